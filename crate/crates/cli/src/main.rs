use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xamp_core::pipeline::{self, RunConfig};
use xamp_core::scene::SceneFile;
use xamp_core::{DelayMethod, Error, FocusMode};

const SEED_ENV: &str = "XAMP_SEED";
const THREADS_ENV: &str = "XAMP_THREADS";

#[derive(Parser)]
#[command(name = "xamp", version, about = "Sub-Nyquist ultrasound line acquisition and imaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Focus {
    Dynamic,
    Infinity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pencil,
    Annihilating,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize per-element channel data, one URF1 file per line
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        oversample: usize,
        /// Overrides the scene's noise seed (also settable via XAMP_SEED)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lines: Option<usize>,
    },
    /// Nyquist-rate delay-and-sum reference image
    Beamform {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        channels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Focus::Dynamic)]
        focus: Focus,
        /// Fixed-delay focal zones instead of --focus
        #[arg(long)]
        focal_zones: Option<usize>,
        #[arg(long, default_value_t = 50.0)]
        dynamic_range_db: f64,
        #[arg(long)]
        lines: Option<usize>,
    },
    /// Low-rate sampling, delay/amplitude recovery and the recovered image
    Xample {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        channels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        rho: usize,
        #[arg(long = "L", default_value_t = 30)]
        l: usize,
        #[arg(long, value_enum, default_value_t = Focus::Dynamic)]
        focus: Focus,
        #[arg(long, value_enum, default_value_t = Method::Pencil)]
        method: Method,
        #[arg(long)]
        eta: Option<usize>,
        #[arg(long)]
        sv_threshold: Option<f64>,
        #[arg(long, default_value_t = 50.0)]
        dynamic_range_db: f64,
        #[arg(long)]
        lines: Option<usize>,
    },
    /// Sample-rate and operation-count table
    Cost {
        #[arg(long = "L", default_value_t = 30)]
        l: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3, 4])]
        rho: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        elements: usize,
        /// Multiplier on n log2 n for each FFT of the Hilbert step
        #[arg(long, default_value_t = 1.0)]
        c_fft: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score recovered lines against the scene and the reference image
    Compare {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        xampled: PathBuf,
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn focus_mode(f: Focus) -> FocusMode {
    match f {
        Focus::Dynamic => FocusMode::Dynamic,
        Focus::Infinity => FocusMode::Infinity,
    }
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV} must be an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn init_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize =
            v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    init_threads()?;
    match cli.command {
        Command::Simulate { scene, out, oversample, seed, lines } => {
            let mut file = SceneFile::load(&scene)?;
            if let Some(s) = seed.or(env_seed()?) {
                file = file.with_seed(s);
            }
            let cfg = RunConfig { oversample, max_lines: lines, ..RunConfig::default() };
            let paths = pipeline::simulate(&file, &cfg, &out)?;
            println!("wrote {} channel files to {}", paths.len(), out.display());
        }
        Command::Beamform { scene, channels, out, focus, focal_zones, dynamic_range_db, lines } => {
            let file = SceneFile::load(&scene)?;
            let mode = focal_zones.map_or(focus_mode(focus), FocusMode::FocalZones);
            let cfg = RunConfig { dynamic_range_db, max_lines: lines, ..RunConfig::default() };
            let summary = pipeline::beamform(&file, &channels, mode, &cfg, &out)?;
            let mean = summary.peak_to_background.iter().sum::<f64>() / summary.peak_to_background.len().max(1) as f64;
            println!("beamformed {} lines; mean peak-to-background {mean:.3}", summary.peak_to_background.len());
        }
        Command::Xample { scene, channels, out, rho, l, focus, method, eta, sv_threshold, dynamic_range_db, lines } => {
            let file = SceneFile::load(&scene)?;
            let cfg = RunConfig {
                l,
                rho,
                focus: focus_mode(focus),
                method: match method {
                    Method::Pencil => DelayMethod::Pencil,
                    Method::Annihilating => DelayMethod::Annihilating,
                },
                eta,
                sv_threshold,
                dynamic_range_db,
                max_lines: lines,
                ..RunConfig::default()
            };
            let est = pipeline::xample(&file, &channels, &cfg, &out)?;
            let pulses: usize = est.iter().map(|e| e.delays.len()).sum();
            println!("recovered {pulses} pulses over {} lines", est.len());
        }
        Command::Cost { l, rho, elements, c_fft, out } => {
            let report = pipeline::cost(l, &rho, elements, c_fft, &out)?;
            for r in &report.rows {
                println!(
                    "rho={} K={} samples={} xampled={:.3} MOps standard={:.3} MOps reduction={:.1}",
                    r.rho,
                    r.k,
                    r.samples_per_element_per_line,
                    r.xampled_ops / 1e6,
                    r.standard_ops / 1e6,
                    r.reduction_factor
                );
            }
        }
        Command::Compare { scene, reference, xampled, estimates, out } => {
            let file = SceneFile::load(&scene)?;
            let rows = pipeline::compare(&file, &reference, &xampled, &estimates, &out)?;
            let worst = rows.iter().map(|r| r.delay_rmse_s).fold(0.0, f64::max);
            println!("compared {} lines; worst delay RMSE {worst:.3e} s", rows.len());
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                e.exit();
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
