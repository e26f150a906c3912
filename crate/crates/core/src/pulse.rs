//! Known-shape transmit pulse: a Gaussian-windowed cosine with a closed-form
//! spectrum.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cabs, lit, Cplx, Real};

/// Default relative floor below which a harmonic of `H` counts as zero.
pub const DEFAULT_SPECTRUM_FLOOR: f64 = 1e-9;

/// `h(t) = A exp(-t^2 / 2 sigma^2) cos(2 pi f_c t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseModel<T> {
    pub carrier_hz: T,
    pub envelope_sigma: T,
    pub amplitude: T,
}

impl<T: Real> PulseModel<T> {
    pub fn new(carrier_hz: T, envelope_sigma: T, amplitude: T) -> Result<Self> {
        if !(carrier_hz > T::zero()) || !(envelope_sigma > T::zero()) {
            return Err(Error::InvalidConfig("pulse carrier and envelope width must be positive".into()));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidConfig("pulse amplitude must be finite".into()));
        }
        Ok(Self { carrier_hz, envelope_sigma, amplitude })
    }

    /// 5.142 MHz carrier, 100 ns envelope, unit amplitude.
    pub fn standard() -> Self {
        Self { carrier_hz: lit(5.142e6), envelope_sigma: lit(1e-7), amplitude: T::one() }
    }

    pub fn carrier_omega(&self) -> T {
        T::TAU() * self.carrier_hz
    }

    /// Pulse value at time `t` (seconds, pulse centred on zero).
    pub fn eval(&self, t: T) -> T {
        self.amplitude * self.envelope(t) * (T::TAU() * self.carrier_hz * t).cos()
    }

    /// Gaussian window, normalised to 1 at `t = 0`.
    pub fn envelope(&self, t: T) -> T {
        let r = t / self.envelope_sigma;
        (-(r * r) * lit(0.5)).exp()
    }

    /// Half-width beyond which `|h| < 1e-6` of its peak (six sigma).
    pub fn support_half_width(&self) -> T {
        self.envelope_sigma * lit(6.0)
    }

    /// Continuous-time Fourier transform `H(omega)`.
    pub fn spectrum(&self, omega: T) -> Cplx<T> {
        let s = self.envelope_sigma;
        let wc = self.carrier_omega();
        let scale = self.amplitude * s * T::TAU().sqrt() * lit(0.5);
        let lo = omega - wc;
        let hi = omega + wc;
        let half: T = lit(0.5);
        let v = scale * ((-(s * s) * lo * lo * half).exp() + (-(s * s) * hi * hi * half).exp());
        Complex::new(v, T::zero())
    }

    /// Reference magnitude of the spectrum, taken at the carrier.
    pub fn spectral_peak(&self) -> T {
        cabs(self.spectrum(self.carrier_omega())).max(cabs(self.spectrum(T::zero())))
    }
}

/// Diagonal of the `K x K` matrix of pulse spectrum samples at `2 pi k / tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDiagonal<T> {
    pub entries: Vec<Cplx<T>>,
}

impl<T: Real> SpectrumDiagonal<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Samples `H` at `omega_k = 2 pi k / tau` for each `k` in iteration order.
///
/// Fails with [`Error::SingularHarmonic`] if any `|H(omega_k)|` falls below
/// `floor * max|H|`.
pub fn build_h<T: Real>(pulse: &PulseModel<T>, kappa: &[i64], tau: T, floor: T) -> Result<SpectrumDiagonal<T>> {
    let peak = pulse.spectral_peak();
    let limit = peak * floor;
    let mut entries = Vec::with_capacity(kappa.len());
    for &k in kappa {
        let omega = T::TAU() * lit::<T>(k as f64) / tau;
        let h = pulse.spectrum(omega);
        if !(cabs(h) > limit) {
            return Err(Error::SingularHarmonic {
                k,
                magnitude: crate::scalar::to_f64(cabs(h)),
                threshold: crate::scalar::to_f64(limit),
            });
        }
        entries.push(h);
    }
    Ok(SpectrumDiagonal { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn model() -> PulseModel<f64> {
        PulseModel::standard()
    }

    /// Trapezoidal CTFT of `eval` on [-8 sigma, 8 sigma] with step 1/(64 f_c).
    fn numeric_ctft(p: &PulseModel<f64>, omega: f64) -> (f64, f64) {
        let step = 1.0 / (64.0 * p.carrier_hz);
        let half = 8.0 * p.envelope_sigma;
        let n = (2.0 * half / step).ceil() as usize;
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..=n {
            let t = -half + i as f64 * step;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let h = p.eval(t);
            re += w * h * (omega * t).cos();
            im -= w * h * (omega * t).sin();
        }
        (re * step, im * step)
    }

    #[test]
    fn eval_examples() {
        let p = model();
        assert_eq!(p.eval(0.0), 1.0);
        assert!(p.eval(6.0 * p.envelope_sigma).abs() < 1e-6);
        let quarter = 1.0 / (4.0 * 5.142e6);
        assert!(p.eval(quarter).abs() < 1e-12);
        assert_eq!(p.eval(3e-8), p.eval(-3e-8));
    }

    #[test]
    fn spectrum_matches_numeric_integral() {
        let p = model();
        let wc = 2.0 * PI * p.carrier_hz;
        let s = p.envelope_sigma;
        let at_carrier = s * (2.0 * PI).sqrt() / 2.0 * (1.0 + (-2.0 * s * s * wc * wc).exp());
        let closed = p.spectrum(wc).re;
        assert!((closed - at_carrier).abs() <= 1e-12 * at_carrier);
        let (re, im) = numeric_ctft(&p, wc);
        assert!((re - closed).abs() <= 1e-6 * closed);
        assert!(im.abs() <= 1e-6 * closed);

        let at_zero = s * (2.0 * PI).sqrt() * (-s * s * wc * wc / 2.0).exp();
        let closed0 = p.spectrum(0.0).re;
        assert!((closed0 - at_zero).abs() <= 1e-12 * at_zero);
        let (re0, _) = numeric_ctft(&p, 0.0);
        assert!((re0 - closed0).abs() <= 1e-6 * closed0);
    }

    #[test]
    fn spectrum_is_even() {
        let p = model();
        for i in 0..10 {
            let w = 1.3e6 * (i as f64 + 0.37) * 7.0;
            assert_eq!(p.spectrum(w), p.spectrum(-w));
            assert_eq!(p.spectrum(-w).conj(), p.spectrum(w));
        }
    }

    #[test]
    fn build_h_single_and_band() {
        let p = model();
        let tau = 102.4e-6;
        let h = build_h(&p, &[527], tau, DEFAULT_SPECTRUM_FLOOR).unwrap();
        assert_eq!(h.entries, vec![p.spectrum(2.0 * PI * 527.0 / tau)]);

        let band: Vec<i64> = (498..=557).chain((498..=557).map(|k: i64| -k)).collect();
        let h = build_h(&p, &band, tau, DEFAULT_SPECTRUM_FLOOR).unwrap();
        assert_eq!(h.len(), 120);
        assert!(h.entries.iter().all(|e| e.norm() > 0.0));
        // numeric CTFT agrees on every band harmonic
        for &k in &band[..60] {
            let w = 2.0 * PI * k as f64 / tau;
            let (re, _) = numeric_ctft(&p, w);
            let c = p.spectrum(w).re;
            assert!((re - c).abs() <= 1e-5 * c, "k={k}");
        }
    }

    #[test]
    fn dc_harmonic_rejected_under_tight_floor() {
        let p = model();
        // |H(0)| / |H(w_c)| = exp(-sigma^2 w_c^2 / 2) / (1/2) ~ 1.1e-2
        let ratio = p.spectrum(0.0).re / p.spectral_peak();
        assert!(ratio > 1e-3 && ratio < 2e-2, "{ratio}");
        assert!(build_h(&p, &[0, 527], 102.4e-6, DEFAULT_SPECTRUM_FLOOR).is_ok());
        match build_h(&p, &[527, 0], 102.4e-6, 5e-2) {
            Err(Error::SingularHarmonic { k, .. }) => assert_eq!(k, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn f32_pulse_agrees_with_f64() {
        let p32 = PulseModel::<f32>::standard();
        let p64 = model();
        for i in 0..20 {
            let t = (i as f64 - 10.0) * 2.3e-8;
            assert!((p32.eval(t as f32) as f64 - p64.eval(t)).abs() < 1e-5);
        }
    }
}
