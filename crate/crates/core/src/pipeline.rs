//! End-to-end stages driven by the CLI: simulate, beamform, xample, cost
//! and compare. Lines run in parallel; outputs are gathered and written in
//! line order so artifacts are reproducible.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::beamform::{beamform_line, envelope_detect, FocusMode};
use crate::cost::{cost_report, CostReport};
use crate::error::{Error, Result};
use crate::formats::{
    estimate_records, load_pgm, load_urf, read_csv, sample_records, save_pgm, save_urf, write_cost, write_csv,
    write_csv_with_header, EstimateRecord, LineSampleRecord, MetricRecord, UrfData, ESTIMATE_HEADER,
};
use crate::imaging::{assemble_image, axial_len, peak_to_background, render_line, DEFAULT_DYNAMIC_RANGE_DB};
use crate::recovery::{DelayMethod, LineEstimate, LineRecovery, RecoveryOptions, DEFAULT_SV_THRESHOLD};
use crate::scene::SceneFile;
use crate::sim::{add_interference, grid_step_for, synthesize_channels, ChannelSet, MIN_OVERSAMPLE, NYQUIST_HZ};
use crate::xampling::{build_s, xample_channels_folded, XampleConfig};

/// Axial step of reference lines and rendered images.
pub const IMAGE_STEP_S: f64 = 1.0 / NYQUIST_HZ;

pub const REFERENCE_IMAGE: &str = "reference.pgm";
pub const XAMPLED_IMAGE: &str = "xampled.pgm";
pub const LINES_CSV: &str = "lines.csv";
pub const BEAMFORM_METRICS_CSV: &str = "beamform_metrics.csv";
pub const ESTIMATES_CSV: &str = "estimates.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const COST_CSV: &str = "cost.csv";
pub const SAMPLES_DIR: &str = "samples";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub l: usize,
    pub rho: usize,
    pub focus: FocusMode,
    pub method: DelayMethod,
    pub eta: Option<usize>,
    pub sv_threshold: Option<f64>,
    pub oversample: usize,
    pub dynamic_range_db: f64,
    /// Process at most this many lines.
    pub max_lines: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            l: 30,
            rho: 2,
            focus: FocusMode::Dynamic,
            method: DelayMethod::Pencil,
            eta: None,
            sv_threshold: None,
            oversample: MIN_OVERSAMPLE,
            dynamic_range_db: DEFAULT_DYNAMIC_RANGE_DB,
            max_lines: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.rho == 0 {
            return Err(Error::InvalidConfig("L and rho must be >= 1".into()));
        }
        if self.oversample < MIN_OVERSAMPLE {
            return Err(Error::InvalidConfig(format!("oversample must be >= {MIN_OVERSAMPLE}")));
        }
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::InvalidConfig("dynamic range must be positive".into()));
        }
        if let Some(t) = self.sv_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig("sv threshold must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }

    pub fn recovery_options(&self) -> RecoveryOptions<f64> {
        RecoveryOptions {
            method: self.method,
            eta: self.eta,
            sv_threshold: self.sv_threshold.unwrap_or(DEFAULT_SV_THRESHOLD),
        }
    }

    fn line_count(&self, scene: &SceneFile) -> usize {
        self.max_lines.map_or(scene.lines.len(), |m| m.min(scene.lines.len()))
    }
}

pub fn channel_file(dir: &Path, line: usize) -> PathBuf {
    dir.join(format!("line_{line:04}.urf"))
}

/// Synthesizes every line's channels and writes one URF1 file per line.
pub fn simulate(scene: &SceneFile, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let pulse = scene.pulse::<f64>()?;
    let geometry = scene.geometry::<f64>()?;
    let step = grid_step_for::<f64>(cfg.oversample);
    let n = cfg.line_count(scene);
    let channels: Vec<UrfData> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = scene.scene::<f64>(i)?;
            let clean = synthesize_channels(&s, &geometry, &pulse, step)?;
            Ok(UrfData::from_channels(&add_interference(&clean, &pulse, s.alpha, &s.noise)))
        })
        .collect::<Result<_>>()?;
    let mut paths = Vec::with_capacity(n);
    for (i, data) in channels.iter().enumerate() {
        let p = channel_file(out_dir, i);
        save_urf(&p, data)?;
        paths.push(p);
    }
    Ok(paths)
}

fn load_channels(scene: &SceneFile, dir: &Path, line: usize) -> Result<ChannelSet<f64>> {
    let ch = load_urf(&channel_file(dir, line))?.into_channels(scene.geometry::<f64>()?)?;
    if (ch.tau - scene.tau_s).abs() > 1e-12 * scene.tau_s {
        return Err(Error::InvalidConfig(format!("line {line}: channel tau differs from the scene")));
    }
    Ok(ch)
}

#[derive(Debug, Clone)]
pub struct BeamformSummary {
    pub peak_to_background: Vec<f64>,
    pub peak_value: Vec<f64>,
}

/// Reference image: delay-and-sum, envelope detection, log compression.
pub fn beamform(
    scene: &SceneFile,
    channels_dir: &Path,
    focus: FocusMode,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<BeamformSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let n = cfg.line_count(scene);
    let lines: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ch = load_channels(scene, channels_dir, i)?;
            let line = beamform_line(&ch, scene.lines[i].alpha_rad, focus, IMAGE_STEP_S)?;
            let env = envelope_detect(&line);
            Ok((line.samples, env, line.grid_step))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, (samples, env, step)) in lines.iter().enumerate() {
        for (j, (&v, &e)) in samples.iter().zip(env).enumerate() {
            rows.push(LineSampleRecord { line_index: i, t_s: j as f64 * step, value: v, envelope: e });
        }
    }
    write_csv_with_header(out_dir.join(LINES_CSV), &["line_index", "t_s", "value", "envelope"], &rows)?;
    let traces: Vec<Vec<f64>> = lines.iter().map(|l| l.1.clone()).collect();
    let img = assemble_image(&traces, IMAGE_STEP_S, cfg.dynamic_range_db)?;
    save_pgm(&out_dir.join(REFERENCE_IMAGE), &img)?;
    let summary = BeamformSummary {
        peak_to_background: traces.iter().map(|t| peak_to_background(t)).collect(),
        peak_value: traces.iter().map(|t| t.iter().cloned().fold(0.0, f64::max)).collect(),
    };
    #[derive(serde::Serialize)]
    struct Row {
        line_index: usize,
        peak_envelope: f64,
        peak_to_background: f64,
    }
    let rows: Vec<Row> = (0..n)
        .map(|i| Row {
            line_index: i,
            peak_envelope: summary.peak_value[i],
            peak_to_background: summary.peak_to_background[i],
        })
        .collect();
    write_csv_with_header(
        out_dir.join(BEAMFORM_METRICS_CSV),
        &["line_index", "peak_envelope", "peak_to_background"],
        &rows,
    )?;
    Ok(summary)
}

/// Low-rate sampling and recovery of every line, plus the rendered image.
pub fn xample(
    scene: &SceneFile,
    channels_dir: &Path,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<LineEstimate<f64>>> {
    cfg.validate()?;
    let pulse = scene.pulse::<f64>()?;
    let geometry = scene.geometry::<f64>()?;
    let xcfg = XampleConfig::new(cfg.l, cfg.rho, scene.tau_s, &pulse, cfg.focus, geometry)?;
    let recovery = LineRecovery::new(&xcfg, &pulse, cfg.recovery_options())?;
    let s = build_s::<f64>(xcfg.p())?;
    std::fs::create_dir_all(out_dir.join(SAMPLES_DIR))?;
    let n = cfg.line_count(scene);
    let results: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ch = load_channels(scene, channels_dir, i)?;
            let out = xample_channels_folded(&ch, &xcfg, &s)?;
            let est = recovery.recover(&out.c).map_err(|e| match e {
                Error::OrderOverflow { .. } | Error::IllConditioned(_) | Error::SingularSystem => {
                    Error::InvalidConfig(format!("line {i}: {e}"))
                }
                other => other,
            })?;
            Ok((out, est))
        })
        .collect::<Result<_>>()?;
    for (i, (out, _)) in results.iter().enumerate() {
        write_csv(out_dir.join(SAMPLES_DIR).join(format!("line_{i:04}.csv")), &sample_records(out))?;
    }
    let estimates: Vec<LineEstimate<f64>> = results.into_iter().map(|(_, e)| e).collect();
    write_csv_with_header(out_dir.join(ESTIMATES_CSV), ESTIMATE_HEADER, &estimate_records(&estimates))?;
    let rows = axial_len(scene.tau_s, IMAGE_STEP_S);
    let traces: Vec<Vec<f64>> = estimates.iter().map(|e| render_line(e, &pulse, rows, IMAGE_STEP_S)).collect();
    let img = assemble_image(&traces, IMAGE_STEP_S, cfg.dynamic_range_db)?;
    save_pgm(&out_dir.join(XAMPLED_IMAGE), &img)?;
    Ok(estimates)
}

pub fn cost(l: usize, rhos: &[usize], num_elements: usize, c_fft: f64, out: &Path) -> Result<CostReport> {
    let report = cost_report(l, rhos, num_elements, c_fft)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_cost(out, &report.rows)?;
    Ok(report)
}

/// Ground-truth echo times and beamformed amplitudes (`N * reflectivity`)
/// of one line, ascending in time.
pub fn ground_truth(scene: &SceneFile, line: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = scene.scene::<f64>(line)?;
    let n = scene.array.num_elements as f64;
    let mut pairs: Vec<(f64, f64)> = s.scatterers.iter().map(|x| (x.echo_time(), n * x.reflectivity)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Delay RMSE and mean amplitude relative error against ground truth.
///
/// The strongest `len(truth)` estimates are paired with the truth in time
/// order; a missing estimate counts as an error of `tau` in delay and 1 in
/// amplitude.
pub fn score_line(truth_t: &[f64], truth_b: &[f64], est_t: &[f64], est_b: &[f64], tau: f64) -> (f64, f64) {
    if truth_t.is_empty() {
        return (0.0, 0.0);
    }
    let mut idx: Vec<usize> = (0..est_t.len()).collect();
    idx.sort_by(|&a, &b| est_b[b].abs().total_cmp(&est_b[a].abs()).then(a.cmp(&b)));
    idx.truncate(truth_t.len());
    idx.sort_by(|&a, &b| est_t[a].total_cmp(&est_t[b]));
    let mut sq = 0.0;
    let mut amp = 0.0;
    for (j, (&t, &b)) in truth_t.iter().zip(truth_b).enumerate() {
        match idx.get(j) {
            Some(&k) => {
                sq += (est_t[k] - t).powi(2);
                amp += if b != 0.0 { ((est_b[k] - b) / b).abs() } else { est_b[k].abs() };
            }
            None => {
                sq += tau * tau;
                amp += 1.0;
            }
        }
    }
    let n = truth_t.len() as f64;
    ((sq / n).sqrt(), amp / n)
}

/// Per-line comparison of the recovered line against the scene and of the
/// two images' peak rows.
pub fn compare(
    scene: &SceneFile,
    reference: &Path,
    xampled: &Path,
    estimates: &Path,
    out: &Path,
) -> Result<Vec<MetricRecord>> {
    let (rw, rh, rpix) = load_pgm(reference)?;
    let (xw, xh, xpix) = load_pgm(xampled)?;
    if rw != xw || rh != xh {
        return Err(Error::InvalidConfig(format!("image sizes differ: {rw}x{rh} vs {xw}x{xh}")));
    }
    if rw > scene.lines.len() {
        return Err(Error::InvalidConfig(format!("images have {rw} lines, scene has {}", scene.lines.len())));
    }
    let recs: Vec<EstimateRecord> = read_csv(estimates)?;
    if let Some(r) = recs.iter().find(|r| r.line_index >= rw) {
        return Err(Error::InvalidConfig(format!("estimate for line {} but images have {rw} lines", r.line_index)));
    }
    let peak_row = |pix: &[u8], col: usize| {
        (0..rh).fold(0, |best, r| if pix[r * rw + col] > pix[best * rw + col] { r } else { best })
    };
    let mut rows = Vec::with_capacity(rw);
    for i in 0..rw {
        let (tt, tb) = ground_truth(scene, i)?;
        let mine: Vec<&EstimateRecord> = recs.iter().filter(|r| r.line_index == i).collect();
        let et: Vec<f64> = mine.iter().map(|r| r.t_l_s).collect();
        let eb: Vec<f64> = mine.iter().map(|r| r.b_l).collect();
        let (rmse, amp) = score_line(&tt, &tb, &et, &eb, scene.tau_s);
        let (a, b) = if rh > 0 { (peak_row(&rpix, i), peak_row(&xpix, i)) } else { (0, 0) };
        rows.push(MetricRecord {
            line_index: i,
            true_count: tt.len(),
            detected_count: et.len(),
            delay_rmse_s: rmse,
            amplitude_rel_error: amp,
            reference_peak_row: a,
            xampled_peak_row: b,
            peak_row_agree: a.abs_diff(b) <= 2,
        });
    }
    write_csv(out, &rows)?;
    Ok(rows)
}
