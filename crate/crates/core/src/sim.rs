//! Synthetic per-element received signals from on-beam point scatterers.
//!
//! Each element sees the pulse-stream `sum_l a_l h(t - tau_m(t_l))` where
//! `tau_m` is the two-way travel time from the array centre to the scatterer
//! and back to element `m`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::PulseModel;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::xampling::tau_hat;

/// Standard-acquisition Nyquist rate the simulation grid is referenced to.
pub const NYQUIST_HZ: f64 = 20e6;
/// Minimum simulation oversampling relative to [`NYQUIST_HZ`].
pub const MIN_OVERSAMPLE: usize = 16;

/// Largest admissible simulation grid step.
pub fn max_grid_step() -> f64 {
    1.0 / (MIN_OVERSAMPLE as f64 * NYQUIST_HZ)
}

/// Grid step for an oversampling factor relative to the 20 MHz reference.
pub fn grid_step_for<T: Real>(oversample: usize) -> T {
    lit::<T>(1.0 / NYQUIST_HZ) / from_usize(oversample)
}

/// Linear array centred on the beam. Element `i` sits at
/// `(i - (N-1)/2) * pitch`, so offsets are mirror-symmetric for any `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry<T> {
    pub num_elements: usize,
    pub pitch: T,
    pub speed_of_sound: T,
}

impl<T: Real> ArrayGeometry<T> {
    pub fn new(num_elements: usize, pitch: T, speed_of_sound: T) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::InvalidConfig("array needs at least one element".into()));
        }
        if !(pitch > T::zero()) || !(speed_of_sound > T::zero()) {
            return Err(Error::InvalidConfig("pitch and speed of sound must be positive".into()));
        }
        Ok(Self { num_elements, pitch, speed_of_sound })
    }

    /// Lateral offset `delta` of element `i` in metres.
    pub fn offset(&self, i: usize) -> T {
        let centre = lit::<T>((self.num_elements as f64 - 1.0) * 0.5);
        (from_usize::<T>(i) - centre) * self.pitch
    }

    pub fn offsets(&self) -> Vec<T> {
        (0..self.num_elements).map(|i| self.offset(i)).collect()
    }

    /// `delta / c` of element `i` in seconds.
    pub fn offset_time(&self, i: usize) -> T {
        self.offset(i) / self.speed_of_sound
    }

    /// Index of the element mirrored through the array centre.
    pub fn mirror(&self, i: usize) -> usize {
        self.num_elements - 1 - i
    }

    pub fn max_offset_time(&self) -> T {
        self.offset_time(0).abs()
    }
}

/// On-beam reflector, parameterised by its one-way axial time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer<T> {
    pub axial_time: T,
    pub reflectivity: T,
}

impl<T: Real> Scatterer<T> {
    /// Two-way echo time at the array centre.
    pub fn echo_time(&self) -> T {
        self.axial_time + self.axial_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: Option<f64>,
    pub speckle_count: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn is_disabled(&self) -> bool {
        self.snr_db.is_none() && self.speckle_count == 0
    }
}

/// One image line worth of reflectors plus acquisition window and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T> {
    pub scatterers: Vec<Scatterer<T>>,
    pub alpha: T,
    pub tau: T,
    pub noise: NoiseSpec,
}

impl<T: Real> Scene<T> {
    pub fn noiseless(scatterers: Vec<Scatterer<T>>, tau: T) -> Self {
        Self { scatterers, alpha: T::zero(), tau, noise: NoiseSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) {
            return Err(Error::InvalidScene("tau must be positive".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidScene("beam angle must be finite".into()));
        }
        if let Some(snr) = self.noise.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidScene("snr_db must be finite".into()));
            }
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.axial_time > T::zero()) {
                return Err(Error::InvalidScene(format!("scatterer {i}: axial time must be > 0")));
            }
            if !(s.echo_time() < self.tau) {
                return Err(Error::InvalidScene(format!(
                    "scatterer {i}: echo at {:e}s falls outside the window tau={:e}s",
                    to_f64(s.echo_time()),
                    to_f64(self.tau)
                )));
            }
            if !s.reflectivity.is_finite() {
                return Err(Error::InvalidScene(format!("scatterer {i}: reflectivity not finite")));
            }
        }
        let mut times: Vec<T> = self.scatterers.iter().map(|s| s.axial_time).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if times.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidScene("scatterer delays must be distinct".into()));
        }
        Ok(())
    }

    /// Ground-truth echo times, ascending.
    pub fn echo_times(&self) -> Vec<T> {
        let mut v: Vec<T> = self.scatterers.iter().map(|s| s.echo_time()).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }
}

/// Densely sampled per-element signals, row-major `num_elements x grid_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    pub grid_step: T,
    pub grid_len: usize,
    pub data: Vec<T>,
    pub geometry: ArrayGeometry<T>,
    pub tau: T,
}

impl<T: Real> ChannelSet<T> {
    pub fn zeros(geometry: ArrayGeometry<T>, grid_step: T, grid_len: usize, tau: T) -> Self {
        Self { grid_step, grid_len, data: vec![T::zero(); geometry.num_elements * grid_len], geometry, tau }
    }

    pub fn num_elements(&self) -> usize {
        self.geometry.num_elements
    }

    pub fn row(&self, m: usize) -> &[T] {
        &self.data[m * self.grid_len..(m + 1) * self.grid_len]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [T] {
        &mut self.data[m * self.grid_len..(m + 1) * self.grid_len]
    }

    pub fn time(&self, i: usize) -> T {
        from_usize::<T>(i) * self.grid_step
    }

    /// Time of the last grid node.
    pub fn grid_end(&self) -> T {
        from_usize::<T>(self.grid_len.saturating_sub(1)) * self.grid_step
    }

    /// Four-point cubic Lagrange interpolation of element `m` at time `t`.
    /// Nodes beyond the grid count as zero; exact at grid nodes.
    pub fn sample_at(&self, m: usize, t: T) -> T {
        if !(t >= T::zero()) || t > self.grid_end() {
            return T::zero();
        }
        let pos = t / self.grid_step;
        let i = match pos.floor().to_usize() {
            Some(i) => i,
            None => return T::zero(),
        };
        let row = self.row(m);
        let f = pos - from_usize::<T>(i);
        if f == T::zero() {
            return row[i];
        }
        let at = |j: isize| if j >= 0 && (j as usize) < row.len() { row[j as usize] } else { T::zero() };
        let (one, two, six): (T, T, T) = (T::one(), lit(2.0), lit(6.0));
        let i = i as isize;
        let w0 = -f * (f - one) * (f - two) / six;
        let w1 = (f + one) * (f - one) * (f - two) / two;
        let w2 = -(f + one) * f * (f - two) / two;
        let w3 = (f + one) * f * (f - one) / six;
        w0 * at(i - 1) + w1 * at(i) + w2 * at(i + 1) + w3 * at(i + 2)
    }

    pub fn scale(&mut self, gamma: T) {
        self.data.iter_mut().for_each(|v| *v *= gamma);
    }
}

/// Two-way time at which an echo from axial time `t_n` reaches an element at
/// lateral offset `delta`.
pub fn arrival_time<T: Real>(t_n: T, alpha: T, delta: T, c: T) -> T {
    let r = c * t_n;
    let dx = r * alpha.sin() - delta;
    let dz = r * alpha.cos();
    t_n + (dx * dx + dz * dz).sqrt() / c
}

fn check_grid<T: Real>(grid_step: T) -> Result<()> {
    let limit = max_grid_step();
    let step = to_f64(grid_step);
    // allow for the limit's own rounding in T
    let slack = 1e-9f64.max(4.0 * to_f64(T::default_epsilon()));
    if !(step > 0.0) || step > limit * (1.0 + slack) {
        return Err(Error::GridTooCoarse { step, limit });
    }
    Ok(())
}

/// Adds `gain * h(t - arrival)` to `row`, restricted to the pulse support.
fn stamp_pulse<T: Real>(row: &mut [T], grid_step: T, pulse: &PulseModel<T>, arrival: T, gain: T) {
    let half = pulse.support_half_width() + pulse.envelope_sigma + pulse.envelope_sigma;
    let lo = ((arrival - half) / grid_step).ceil();
    let hi = ((arrival + half) / grid_step).floor();
    let lo = lo.max(T::zero()).to_usize().unwrap_or(0);
    let hi = match hi.to_usize() {
        Some(h) => h.min(row.len().saturating_sub(1)),
        None => return,
    };
    for (i, v) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
        *v += gain * pulse.eval(from_usize::<T>(i) * grid_step - arrival);
    }
}

/// Renders every element's received signal on a grid covering `[0, tau_hat]`.
pub fn synthesize_channels<T: Real>(
    scene: &Scene<T>,
    geometry: &ArrayGeometry<T>,
    pulse: &PulseModel<T>,
    grid_step: T,
) -> Result<ChannelSet<T>> {
    scene.validate()?;
    check_grid(grid_step)?;
    let end = tau_hat(scene.tau, geometry);
    let grid_len = (end / grid_step).ceil().to_usize().unwrap_or(0) + 2;
    let mut ch = ChannelSet::zeros(*geometry, grid_step, grid_len, scene.tau);
    ch.data.par_chunks_mut(grid_len).enumerate().for_each(|(m, row)| {
        let delta = geometry.offset(m);
        for s in &scene.scatterers {
            let arrival = arrival_time(s.axial_time, scene.alpha, delta, geometry.speed_of_sound);
            stamp_pulse(row, grid_step, pulse, arrival, s.reflectivity);
        }
    });
    Ok(ch)
}

fn mean_power<T: Real>(row: &[T]) -> f64 {
    if row.is_empty() {
        return 0.0;
    }
    row.iter().map(|&v| to_f64(v) * to_f64(v)).sum::<f64>() / row.len() as f64
}

/// Relative speckle strength used when no SNR target is given.
const DEFAULT_SPECKLE_RATIO: f64 = 1e-2;

/// Adds white Gaussian noise and an on-beam speckle surrogate.
///
/// With an SNR target the total noise power (speckle plus white) per channel
/// equals the clean channel power divided by `10^(snr/10)`; speckle takes half
/// of that budget when present. Deterministic in `noise.seed`.
pub fn add_interference<T: Real>(
    ch: &ChannelSet<T>,
    pulse: &PulseModel<T>,
    alpha: T,
    noise: &NoiseSpec,
) -> ChannelSet<T> {
    let mut out = ch.clone();
    if noise.is_disabled() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let n = ch.num_elements();
    let clean_power: Vec<f64> = (0..n).map(|m| mean_power(ch.row(m))).collect();
    let budget: Vec<f64> = match noise.snr_db {
        Some(snr) => clean_power.iter().map(|p| p / 10f64.powf(snr / 10.0)).collect(),
        None => vec![0.0; n],
    };

    let mut speckle_power = vec![0.0; n];
    if noise.speckle_count > 0 {
        let margin = to_f64(pulse.support_half_width());
        let t_max = to_f64(ch.tau) * 0.5 - margin;
        let mut speckle = ChannelSet::zeros(ch.geometry, ch.grid_step, ch.grid_len, ch.tau);
        if t_max > margin {
            let when = Uniform::new(margin, t_max).expect("valid speckle range");
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            let draws: Vec<(f64, f64)> =
                (0..noise.speckle_count).map(|_| (when.sample(&mut rng), unit.sample(&mut rng))).collect();
            for m in 0..n {
                let delta = ch.geometry.offset(m);
                let row = speckle.row_mut(m);
                for &(t, r) in &draws {
                    let arrival = arrival_time(lit(t), alpha, delta, ch.geometry.speed_of_sound);
                    stamp_pulse(row, ch.grid_step, pulse, arrival, lit(r));
                }
            }
        }
        let unit_power: Vec<f64> = (0..n).map(|m| mean_power(speckle.row(m))).collect();
        let mean_unit = unit_power.iter().sum::<f64>() / n as f64;
        let gain = if noise.snr_db.is_some() {
            let mean_budget = budget.iter().sum::<f64>() / n as f64;
            if mean_unit > 0.0 {
                (0.5 * mean_budget / mean_unit).sqrt()
            } else {
                0.0
            }
        } else {
            DEFAULT_SPECKLE_RATIO * ch.data.iter().fold(0.0f64, |a, &v| a.max(to_f64(v).abs())).max(1e-12)
                / to_f64(pulse.amplitude).abs().max(1e-300)
        };
        for m in 0..n {
            speckle_power[m] = unit_power[m] * gain * gain;
            let g: T = lit(gain);
            for (o, &s) in out.row_mut(m).iter_mut().zip(speckle.row(m)) {
                *o += g * s;
            }
        }
    }

    if noise.snr_db.is_some() {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        for m in 0..n {
            let var = (budget[m] - speckle_power[m]).max(0.0);
            let sd = var.sqrt();
            for o in out.row_mut(m).iter_mut() {
                *o += lit::<T>(sd * unit.sample(&mut rng));
            }
        }
    }
    out
}
