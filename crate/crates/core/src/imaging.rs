//! B-mode style rendering: recovered pulse streams to traces, traces to a
//! log-compressed 8-bit image.

use crate::error::{Error, Result};
use crate::pulse::PulseModel;
use crate::recovery::LineEstimate;
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Default display dynamic range in dB.
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 50.0;
/// Default number of image lines.
pub const DEFAULT_NUM_LINES: usize = 113;

/// Columns are image lines, rows are axial samples; row-major pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub num_lines: usize,
    pub axial_samples: usize,
    pub axial_step: f64,
    pub dynamic_range_db: f64,
    pub pixels: Vec<u8>,
}

impl ImageGrid {
    pub fn pixel(&self, row: usize, line: usize) -> u8 {
        self.pixels[row * self.num_lines + line]
    }

    /// Row of the brightest pixel in a line (first on ties).
    pub fn peak_row(&self, line: usize) -> usize {
        (0..self.axial_samples).fold(0, |best, r| if self.pixel(r, line) > self.pixel(best, line) { r } else { best })
    }
}

/// `trace(t_i) = sum_l |b_l| env(t_i - t_l)` with the pulse's Gaussian window.
pub fn render_line<T: Real>(
    est: &LineEstimate<T>,
    pulse: &PulseModel<T>,
    axial_samples: usize,
    axial_step: T,
) -> Vec<T> {
    let reach = pulse.support_half_width() + pulse.envelope_sigma + pulse.envelope_sigma;
    let mut trace = vec![T::zero(); axial_samples];
    for (&t, &b) in est.delays.iter().zip(&est.amplitudes) {
        let lo = ((t - reach) / axial_step).ceil().max(T::zero()).to_usize().unwrap_or(0);
        let hi = ((t + reach) / axial_step).floor().to_usize().unwrap_or(0).min(axial_samples.saturating_sub(1));
        if axial_samples == 0 || lo > hi {
            continue;
        }
        for (i, v) in trace.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *v += b.abs() * pulse.envelope(from_usize::<T>(i) * axial_step - t);
        }
    }
    trace
}

/// Maps one value to a pixel given the global maximum.
pub fn log_compress(v: f64, v_max: f64, dynamic_range_db: f64) -> u8 {
    if !(v > 0.0) {
        return 0;
    }
    let level = 255.0 * (1.0 + 20.0 * (v / v_max).log10() / dynamic_range_db);
    level.clamp(0.0, 255.0).round() as u8
}

/// Log-compresses equal-length traces into an image, normalised to the
/// global maximum.
pub fn assemble_image<T: Real>(lines: &[Vec<T>], axial_step: T, dynamic_range_db: f64) -> Result<ImageGrid> {
    let axial_samples = lines.first().map_or(0, |l| l.len());
    if lines.iter().any(|l| l.len() != axial_samples) {
        return Err(Error::InvalidConfig("traces must share one length".into()));
    }
    if !(dynamic_range_db > 0.0) {
        return Err(Error::InvalidConfig("dynamic range must be positive".into()));
    }
    let v_max = lines.iter().flatten().fold(0.0f64, |a, &v| a.max(to_f64(v)));
    if !(v_max > 0.0) {
        return Err(Error::AllZero);
    }
    let num_lines = lines.len();
    let mut pixels = vec![0u8; num_lines * axial_samples];
    for (col, trace) in lines.iter().enumerate() {
        for (row, &v) in trace.iter().enumerate() {
            pixels[row * num_lines + col] = log_compress(to_f64(v), v_max, dynamic_range_db);
        }
    }
    Ok(ImageGrid { num_lines, axial_samples, axial_step: to_f64(axial_step), dynamic_range_db, pixels })
}

/// Peak over mean of a non-negative trace; 0 for an all-zero trace.
pub fn peak_to_background<T: Real>(trace: &[T]) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let peak = trace.iter().fold(0.0f64, |a, &v| a.max(to_f64(v).abs()));
    let mean = trace.iter().map(|&v| to_f64(v).abs()).sum::<f64>() / trace.len() as f64;
    if mean > 0.0 {
        peak / mean
    } else {
        0.0
    }
}

/// Number of axial samples covering `[0, tau]` at `step`.
pub fn axial_len<T: Real>(tau: T, step: T) -> usize {
    (tau / step + lit(1e-9)).floor().to_usize().unwrap_or(0) + 1
}
