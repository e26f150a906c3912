//! Delay and amplitude recovery from the low-rate samples of one line.
//!
//! Unmixing gives the line's Fourier coefficients on the positive harmonics;
//! dividing by the pulse spectrum leaves a sum of cisoids
//! `y_k = sum_l a_l exp(-j 2 pi k t_l / tau)` whose frequencies are the delays.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{PulseModel, SpectrumDiagonal, DEFAULT_SPECTRUM_FLOOR};
use crate::scalar::{lit, to_f64, Cplx, Real};
use crate::xampling::{build_s, Kappa, MixingMatrix, XampleConfig};

/// Singular-value ratio used for model-order selection on measured data.
pub const DEFAULT_SV_THRESHOLD: f64 = 1e-2;
/// Ratio for exact synthetic data.
pub const NOISELESS_SV_THRESHOLD: f64 = 1e-8;
/// Largest tolerated condition number of the delay matrix.
pub const MAX_CONDITION: f64 = 1e10;

/// Pulse-normalised Fourier coefficients on consecutive positive harmonics.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs<T> {
    pub y: Vec<Cplx<T>>,
    pub kappa_pos: Vec<i64>,
    pub tau: T,
}

impl<T: Real> FourierCoeffs<T> {
    /// Coefficients of `sum_l a_l exp(-j 2 pi k t_l / tau)` on `harmonics`.
    pub fn from_cisoids(harmonics: Vec<i64>, tau: T, delays: &[T], amps: &[Cplx<T>]) -> Self {
        let y = harmonics
            .iter()
            .map(|&k| {
                delays
                    .iter()
                    .zip(amps)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (&t, &a)| acc + a * phasor(k, t, tau))
            })
            .collect();
        Self { y, kappa_pos: harmonics, tau }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn norm(&self) -> T {
        self.y.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt()
    }
}

#[inline]
fn phasor<T: Real>(k: i64, t: T, tau: T) -> Cplx<T> {
    crate::scalar::cis(-(T::TAU() * lit::<T>(k as f64) * t / tau))
}

/// `y = H^-1 (S^+ c)`, keeping the positive half of the index set.
pub fn recover_fourier<T: Real>(
    c: &[T],
    s: &MixingMatrix<T>,
    h: &SpectrumDiagonal<T>,
    kappa: &Kappa,
    tau: T,
) -> Result<FourierCoeffs<T>> {
    if c.len() != s.branches() {
        return Err(Error::InvalidConfig(format!(
            "sample vector has {} entries, mixing matrix {} rows",
            c.len(),
            s.branches()
        )));
    }
    if h.len() != kappa.len() || s.columns() != kappa.len() {
        return Err(Error::InvalidConfig("H, S and kappa sizes disagree".into()));
    }
    let cv = DVector::from_iterator(c.len(), c.iter().map(|&v| Complex::new(v, T::zero())));
    let phi = s.pseudo_inverse() * cv;
    let half = kappa.half_len();
    let y = (0..half).map(|i| phi[i] / h.entries[i]).collect();
    Ok(FourierCoeffs { y, kappa_pos: kappa.positive().to_vec(), tau })
}

/// Hankel data matrix `(K - eta) x (eta + 1)`, entry `(i, j) = y[i + j]`.
fn hankel<T: Real>(y: &[Cplx<T>], eta: usize) -> DMatrix<Cplx<T>> {
    let rows = y.len() - eta;
    DMatrix::from_fn(rows, eta + 1, |i, j| y[i + j])
}

fn sorted_desc<T: Real>(v: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = v.collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Number of singular values with `sigma_i / sigma_1 > threshold`.
pub fn model_order<T: Real>(singular_values: &[T], threshold: T) -> usize {
    match singular_values.first() {
        Some(&s1) if s1 > T::zero() && s1.is_finite() => {
            singular_values.iter().take_while(|&&s| s / s1 > threshold).count()
        }
        _ => 0,
    }
}

fn check_pencil_parameter(k: usize, eta: usize, l_max: usize) -> Result<()> {
    if l_max > k || eta < l_max || eta > k - l_max || eta + 1 > k {
        return Err(Error::PencilParameter { eta, lower: l_max, upper: k.saturating_sub(l_max) });
    }
    Ok(())
}

/// Default pencil parameter: `floor(K/3)` clamped into `[L, K - L]`.
pub fn default_eta(k: usize, l_max: usize) -> usize {
    (k / 3).max(l_max).min(k.saturating_sub(l_max))
}

/// Delays in `[0, tau)` from unit-modulus poles `z = exp(-j 2 pi t / tau)`.
fn poles_to_delays<T: Real>(poles: &[Cplx<T>], tau: T) -> Vec<T> {
    let mut delays: Vec<T> = poles
        .iter()
        .map(|z| {
            let mut t = -crate::scalar::carg(*z) * tau / T::TAU();
            if t < T::zero() {
                t += tau;
            }
            if t >= tau {
                t -= tau;
            }
            t
        })
        .collect();
    delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
    delays
}

fn eigenvalues<T: Real>(m: DMatrix<Cplx<T>>) -> Result<Vec<Cplx<T>>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = m.try_schur(lit(1e-15), 10_000).ok_or(Error::ConditioningFailure)?;
    let (_, t) = schur.unpack();
    let vals: Vec<Cplx<T>> = (0..n).map(|i| t[(i, i)]).collect();
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConditioningFailure);
    }
    Ok(vals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate<T> {
    /// Ascending, in `[0, tau)`.
    pub delays: Vec<T>,
    /// Hankel singular values, descending.
    pub singular_values: Vec<T>,
}

/// Matrix-pencil delay estimation with SVD-based order selection.
pub fn matrix_pencil<T: Real>(
    y: &FourierCoeffs<T>,
    eta: usize,
    sv_threshold: T,
    l_max: usize,
) -> Result<DelayEstimate<T>> {
    let k = y.len();
    check_pencil_parameter(k, eta, l_max)?;
    let svd = crate::linalg::svd(&hankel(&y.y, eta)).ok_or(Error::ConditioningFailure)?;
    let mut order_idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    order_idx.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(std::cmp::Ordering::Equal)
    });
    let singular_values: Vec<T> = order_idx.iter().map(|&i| svd.singular_values[i]).collect();
    let order = model_order(&singular_values, sv_threshold);
    if order > l_max {
        return Err(Error::OrderOverflow { estimated: order, bound: l_max });
    }
    if order == 0 {
        return Ok(DelayEstimate { delays: Vec::new(), singular_values });
    }
    let v_t = svd.v_t.ok_or(Error::ConditioningFailure)?;
    // rows of V^H spanning the signal subspace
    let w = DMatrix::from_fn(order, eta + 1, |r, c| v_t[(order_idx[r], c)]);
    let w1 = w.columns(0, eta).into_owned();
    let w2 = w.columns(1, eta).into_owned();
    let w1_pinv = crate::linalg::pinv(&w1, T::zero()).ok_or(Error::ConditioningFailure)?;
    let poles = eigenvalues(w2 * w1_pinv)?;
    Ok(DelayEstimate { delays: poles_to_delays(&poles, y.tau), singular_values })
}

/// Singular values of the Hankel matrix used for order estimation.
pub fn hankel_singular_values<T: Real>(y: &FourierCoeffs<T>, eta: usize) -> Vec<T> {
    crate::linalg::svd(&hankel(&y.y, eta)).map_or_else(Vec::new, |s| sorted_desc(s.singular_values.iter().cloned()))
}

/// Prony-style estimation: the order-`l_est` filter annihilating `y`, then
/// its roots.
pub fn annihilating_filter<T: Real>(y: &FourierCoeffs<T>, l_est: usize) -> Result<Vec<T>> {
    let k = y.len();
    if k < 2 * l_est {
        return Err(Error::InvalidConfig(format!("need K >= 2L (K={k}, L={l_est})")));
    }
    if l_est == 0 {
        return Ok(Vec::new());
    }
    // sum_{j=1..L} a_j y[n-j] = -y[n],  n = L..K-1
    let rows = k - l_est;
    let a = DMatrix::from_fn(rows, l_est, |r, j| y.y[l_est + r - 1 - j]);
    let b = DVector::from_iterator(rows, (0..rows).map(|r| -y.y[l_est + r]));
    let svd = crate::linalg::svd(&a).ok_or(Error::SingularSystem)?;
    let smax = svd.singular_values.iter().cloned().fold(T::zero(), |x, v| x.max(v));
    let smin = svd.singular_values.iter().cloned().fold(smax, |x, v| x.min(v));
    if !(smax > T::zero()) || smin / smax < lit(1e-12) {
        return Err(Error::SingularSystem);
    }
    let coeffs = svd.solve(&b, lit(0.0)).map_err(|_| Error::SingularSystem)?;
    // companion matrix of z^L + a_1 z^{L-1} + ... + a_L
    let mut comp = DMatrix::from_element(l_est, l_est, Complex::new(T::zero(), T::zero()));
    for j in 0..l_est {
        comp[(0, j)] = -coeffs[j];
    }
    for i in 1..l_est {
        comp[(i, i - 1)] = Complex::new(T::one(), T::zero());
    }
    let roots = eigenvalues(comp)?;
    Ok(poles_to_delays(&roots, y.tau))
}

/// Least-squares amplitudes for known delays.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit<T> {
    /// Real parts of the fitted amplitudes.
    pub amplitudes: Vec<T>,
    pub complex: Vec<Cplx<T>>,
    /// `max |imag| / |real|`; above `1e-3` the real-amplitude model is suspect.
    pub max_imag_ratio: T,
}

/// Solves `min_a || y - V(t) a ||` with `V[k, l] = exp(-j 2 pi k t_l / tau)`.
pub fn least_squares_amplitudes<T: Real>(y: &FourierCoeffs<T>, delays: &[T]) -> Result<AmplitudeFit<T>> {
    let n = delays.len();
    if n == 0 {
        return Ok(AmplitudeFit { amplitudes: Vec::new(), complex: Vec::new(), max_imag_ratio: T::zero() });
    }
    if n > y.len() {
        return Err(Error::InvalidConfig(format!("{n} delays exceed {} coefficients", y.len())));
    }
    let v = DMatrix::from_fn(y.len(), n, |r, c| phasor(y.kappa_pos[r], delays[c], y.tau));
    let svd = crate::linalg::svd(&v).ok_or(Error::ConditioningFailure)?;
    let smax = svd.singular_values.iter().cloned().fold(T::zero(), |x, s| x.max(s));
    let smin = svd.singular_values.iter().cloned().fold(smax, |x, s| x.min(s));
    let cond = if smin > T::zero() { smax / smin } else { T::max_value().unwrap_or(smax) };
    if !(cond <= lit(MAX_CONDITION)) {
        return Err(Error::IllConditioned(to_f64(cond)));
    }
    let rhs = DVector::from_column_slice(&y.y);
    let sol = svd.solve(&rhs, lit(0.0)).map_err(|_| Error::IllConditioned(to_f64(cond)))?;
    let complex: Vec<Cplx<T>> = sol.iter().cloned().collect();
    let max_imag_ratio = complex.iter().fold(T::zero(), |acc, z| {
        let r = if z.re.abs() > T::zero() {
            z.im.abs() / z.re.abs()
        } else if z.im == T::zero() {
            T::zero()
        } else {
            T::max_value().unwrap_or(z.im.abs())
        };
        acc.max(r)
    });
    Ok(AmplitudeFit { amplitudes: complex.iter().map(|z| z.re).collect(), complex, max_imag_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMethod {
    Pencil,
    Annihilating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions<T> {
    pub method: DelayMethod,
    /// `None` selects [`default_eta`].
    pub eta: Option<usize>,
    pub sv_threshold: T,
}

impl<T: Real> Default for RecoveryOptions<T> {
    fn default() -> Self {
        Self { method: DelayMethod::Pencil, eta: None, sv_threshold: lit(DEFAULT_SV_THRESHOLD) }
    }
}

/// Recovered pulse stream of one image line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineEstimate<T> {
    /// Two-way echo times, ascending, in `[0, tau)`.
    pub delays: Vec<T>,
    /// Beamformed amplitudes `b_l` matching `delays`.
    pub amplitudes: Vec<T>,
    pub model_order: usize,
    pub singular_values: Vec<T>,
    /// `||y - V(t) b / tau|| / ||y||`.
    pub residual: T,
    pub max_imag_ratio: T,
}

impl<T: Real> LineEstimate<T> {
    pub fn empty() -> Self {
        Self {
            delays: Vec::new(),
            amplitudes: Vec::new(),
            model_order: 0,
            singular_values: Vec::new(),
            residual: T::zero(),
            max_imag_ratio: T::zero(),
        }
    }
}

/// Per-configuration state reused across lines: mixing matrix, pulse
/// spectrum diagonal and solver options.
#[derive(Debug, Clone)]
pub struct LineRecovery<T: Real> {
    pub kappa: Kappa,
    pub tau: T,
    pub l_max: usize,
    pub eta: usize,
    pub options: RecoveryOptions<T>,
    pub mixing: MixingMatrix<T>,
    pub spectrum: SpectrumDiagonal<T>,
}

impl<T: Real> LineRecovery<T> {
    pub fn new(cfg: &XampleConfig<T>, pulse: &PulseModel<T>, options: RecoveryOptions<T>) -> Result<Self> {
        let mixing = build_s(cfg.p())?;
        Self::with_mixing(cfg, pulse, mixing, options)
    }

    pub fn with_mixing(
        cfg: &XampleConfig<T>,
        pulse: &PulseModel<T>,
        mixing: MixingMatrix<T>,
        options: RecoveryOptions<T>,
    ) -> Result<Self> {
        let k = cfg.k();
        let eta = options.eta.unwrap_or_else(|| default_eta(k, cfg.l));
        check_pencil_parameter(k, eta, cfg.l)?;
        let spectrum = crate::pulse::build_h(pulse, &cfg.kappa.indices(), cfg.tau, lit(DEFAULT_SPECTRUM_FLOOR))?;
        Ok(Self { kappa: cfg.kappa.clone(), tau: cfg.tau, l_max: cfg.l, eta, options, mixing, spectrum })
    }

    pub fn fourier(&self, c: &[T]) -> Result<FourierCoeffs<T>> {
        recover_fourier(c, &self.mixing, &self.spectrum, &self.kappa, self.tau)
    }

    pub fn recover(&self, c: &[T]) -> Result<LineEstimate<T>> {
        let y = self.fourier(c)?;
        self.recover_from_coeffs(&y)
    }

    pub fn recover_from_coeffs(&self, y: &FourierCoeffs<T>) -> Result<LineEstimate<T>> {
        let ynorm = y.norm();
        if !(ynorm > T::zero()) {
            return Ok(LineEstimate::empty());
        }
        let (delays, singular_values) = match self.options.method {
            DelayMethod::Pencil => {
                let est = matrix_pencil(y, self.eta, self.options.sv_threshold, self.l_max)?;
                (est.delays, est.singular_values)
            }
            DelayMethod::Annihilating => {
                let sv = hankel_singular_values(y, self.eta);
                let order = model_order(&sv, self.options.sv_threshold);
                if order > self.l_max {
                    return Err(Error::OrderOverflow { estimated: order, bound: self.l_max });
                }
                (annihilating_filter(y, order)?, sv)
            }
        };
        let fit = least_squares_amplitudes(y, &delays)?;
        let amplitudes: Vec<T> = fit.amplitudes.iter().map(|&a| a * self.tau).collect();
        let residual = {
            let mut acc = T::zero();
            for (i, &yk) in y.y.iter().enumerate() {
                let model =
                    delays.iter().zip(&fit.amplitudes).fold(Complex::new(T::zero(), T::zero()), |s, (&t, &a)| {
                        s + phasor(y.kappa_pos[i], t, y.tau).scale(a)
                    });
                acc += (yk - model).norm_sqr();
            }
            acc.sqrt() / ynorm
        };
        Ok(LineEstimate {
            model_order: delays.len(),
            delays,
            amplitudes,
            singular_values,
            residual,
            max_imag_ratio: fit.max_imag_ratio,
        })
    }
}

/// One-shot line recovery with the default mixing matrix.
pub fn recover_line<T: Real>(
    c: &[T],
    cfg: &XampleConfig<T>,
    pulse: &PulseModel<T>,
    options: RecoveryOptions<T>,
) -> Result<LineEstimate<T>> {
    LineRecovery::new(cfg, pulse, options)?.recover(c)
}
