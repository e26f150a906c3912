//! Nyquist-rate reference path: delay-and-sum with receive focusing, plus
//! envelope detection.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};
use crate::sim::ChannelSet;

/// Receive focusing law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusMode {
    /// One delay law per output sample.
    Dynamic,
    /// No delays: the plain channel sum.
    Infinity,
    /// Piecewise-constant delays over equal-length depth segments, each
    /// computed at its segment centre.
    FocalZones(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedLine<T> {
    pub samples: Vec<T>,
    pub grid_step: T,
    pub alpha: T,
    pub focus_mode: FocusMode,
}

impl<T: Real> BeamformedLine<T> {
    pub fn time(&self, i: usize) -> T {
        from_usize::<T>(i) * self.grid_step
    }
}

/// Compensating delay `tau_0 - tau_m` for an echo from axial time `t_n`.
pub fn focus_delay<T: Real>(t_n: T, alpha: T, delta: T, c: T) -> T {
    let d = delta / c;
    t_n - (t_n * t_n + d * d - (t_n + t_n) * d * alpha.sin()).sqrt()
}

/// Time at which element `d = delta/c` must be read to contribute to output
/// time `t`: `(t + sqrt(t^2 + 4 d (d - t sin(alpha)))) / 2`.
pub fn warp_time<T: Real>(t: T, alpha: T, d: T) -> T {
    let four: T = lit(4.0);
    (t + (t * t + four * d * (d - t * alpha.sin())).sqrt()) * lit(0.5)
}

/// Element `m`'s signal read at the dynamically focused time for output `t`.
pub fn distort_channel<T: Real>(ch: &ChannelSet<T>, m: usize, alpha: T, t: T) -> T {
    if t < T::zero() {
        return T::zero();
    }
    let d = ch.geometry.offset_time(m);
    ch.sample_at(m, warp_time(t, alpha, d))
}

/// Delay-and-sum over `[0, tau]` at output step `out_step`.
pub fn beamform_line<T: Real>(ch: &ChannelSet<T>, alpha: T, mode: FocusMode, out_step: T) -> Result<BeamformedLine<T>> {
    let eps: T = lit(1e-9);
    if out_step < ch.grid_step * (T::one() - eps) {
        return Err(Error::InvalidConfig("output step finer than the channel grid".into()));
    }
    if let FocusMode::FocalZones(0) = mode {
        return Err(Error::InvalidConfig("focal zone count must be >= 1".into()));
    }
    let n_out = (ch.tau / out_step + eps).floor().to_usize().unwrap_or(0) + 1;
    let n_el = ch.num_elements();
    let geom = ch.geometry;
    let zone_delays: Vec<Vec<T>> = match mode {
        FocusMode::FocalZones(zones) => {
            let width = ch.tau / from_usize(zones);
            (0..zones)
                .map(|z| {
                    let centre = (from_usize::<T>(z) + lit(0.5)) * width;
                    (0..n_el)
                        .map(|m| focus_delay(centre * lit(0.5), alpha, geom.offset(m), geom.speed_of_sound))
                        .collect()
                })
                .collect()
        }
        _ => Vec::new(),
    };
    let samples: Vec<T> = (0..n_out)
        .into_par_iter()
        .map(|i| {
            let t = from_usize::<T>(i) * out_step;
            let mut acc = T::zero();
            match mode {
                FocusMode::Dynamic => {
                    for m in 0..n_el {
                        acc += distort_channel(ch, m, alpha, t);
                    }
                }
                FocusMode::Infinity => {
                    for m in 0..n_el {
                        acc += ch.sample_at(m, t);
                    }
                }
                FocusMode::FocalZones(zones) => {
                    let z = (t / ch.tau * from_usize(zones)).floor().to_usize().unwrap_or(0).min(zones - 1);
                    for (m, &theta) in zone_delays[z].iter().enumerate() {
                        acc += ch.sample_at(m, t - theta);
                    }
                }
            }
            acc
        })
        .collect();
    Ok(BeamformedLine { samples, grid_step: out_step, alpha, focus_mode: mode })
}

/// Magnitude of the analytic signal, via one-sided spectrum doubling.
pub fn envelope_detect<T: Real + FftNum>(line: &BeamformedLine<T>) -> Vec<T> {
    analytic_magnitude(&line.samples)
}

pub fn analytic_magnitude<T: Real + FftNum>(x: &[T]) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fwd.process(&mut buf);
    let two: T = lit(2.0);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n.is_multiple_of(2) && k == half) {
            T::one()
        } else if k < n.div_ceil(2) {
            two
        } else {
            T::zero()
        };
        *v = v.scale(w);
    }
    inv.process(&mut buf);
    let scale = T::one() / from_usize::<T>(n);
    buf.iter().map(|&v| crate::scalar::cabs(v) * scale).collect()
}
