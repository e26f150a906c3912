//! Low-rate sampling of the beamformed line straight from the element signals.
//!
//! Sampling the dynamically focused sum `Phi(t)` with the harmonic kernels
//! `s_q(t) = sum_k s_qk exp(-j 2 pi k t / tau)` is rewritten, by the change of
//! variables `t -> t' = (t + sqrt(t^2 + 4 d^2)) / 2`, as a sum over elements of
//! integrals of each element signal against the warped kernel
//!
//! ```text
//! s_qm(t) = [1 + (d/t)^2] * sum_k s_qk exp(-j 2 pi k (t - d^2/t) / tau) * u(t - |d|)
//! ```
//!
//! with `d = delta_m / c`. [`xample_channels`] evaluates that form;
//! [`xample_beamformed_oracle`] integrates `Phi` directly and is the reference
//! it must agree with.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;

use crate::beamform::{BeamformedLine, FocusMode};
use crate::error::{Error, Result};
use crate::pulse::{build_h, PulseModel, SpectrumDiagonal, DEFAULT_SPECTRUM_FLOOR};
use crate::scalar::{cis, from_usize, lit, to_f64, trapz_weight, Cplx, Real};
use crate::sim::{ArrayGeometry, ChannelSet};

/// Ordered harmonic index set: the positive half, optionally followed by the
/// negation of each positive index in the same order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kappa {
    positive: Vec<i64>,
    mirrored: bool,
}

impl Kappa {
    /// `K = 2 rho L` consecutive harmonics centred on `round(f_c tau)`, plus
    /// their negatives.
    pub fn select<T: Real>(l: usize, rho: usize, tau: T, carrier_hz: T) -> Result<Self> {
        if l == 0 || rho == 0 {
            return Err(Error::InvalidConfig("L and rho must be >= 1".into()));
        }
        if !(tau > T::zero()) || !(carrier_hz > T::zero()) {
            return Err(Error::InvalidConfig("tau and carrier must be positive".into()));
        }
        let k = 2 * rho * l;
        let centre = to_f64(carrier_hz * tau).round() as i64;
        let first = centre - (k / 2) as i64 + 1;
        if first < 1 {
            return Err(Error::OffBand(format!("lowest harmonic {first} is not positive (centre {centre}, K={k})")));
        }
        Ok(Self { positive: (first..first + k as i64).collect(), mirrored: true })
    }

    /// Custom set. With `mirrored`, `-k` is appended for every `k`.
    pub fn from_positive(positive: Vec<i64>, mirrored: bool) -> Self {
        Self { positive, mirrored }
    }

    /// Number of distinct positive harmonics, `K`.
    pub fn half_len(&self) -> usize {
        self.positive.len()
    }

    /// `|kappa|`.
    pub fn len(&self) -> usize {
        if self.mirrored {
            2 * self.positive.len()
        } else {
            self.positive.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn positive(&self) -> &[i64] {
        &self.positive
    }

    pub fn indices(&self) -> Vec<i64> {
        let mut v = self.positive.clone();
        if self.mirrored {
            v.extend(self.positive.iter().map(|k| -k));
        }
        v
    }

    /// Confirms the pulse spectrum is usable on every harmonic.
    pub fn check_band<T: Real>(&self, pulse: &PulseModel<T>, tau: T, floor: T) -> Result<SpectrumDiagonal<T>> {
        build_h(pulse, &self.indices(), tau, floor).map_err(|e| match e {
            Error::SingularHarmonic { k, magnitude, threshold } => {
                Error::OffBand(format!("|H| at harmonic {k} is {magnitude:e} (< {threshold:e})"))
            }
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingStructure {
    /// `[[I/2, I/2], [I/(2j), -I/(2j)]]`, giving cosine and negated sine kernels.
    CosSin,
    Custom,
}

/// `p x |kappa|` mixing matrix with its cached left inverse.
#[derive(Debug, Clone)]
pub struct MixingMatrix<T: Real> {
    pub entries: DMatrix<Cplx<T>>,
    pub structure: MixingStructure,
    pinv: DMatrix<Cplx<T>>,
}

/// Block mixing matrix of size `p x p` (`p` even).
pub fn build_s<T: Real>(p: usize) -> Result<MixingMatrix<T>> {
    if p == 0 || !p.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("branch count p={p} must be even and positive")));
    }
    let h = p / 2;
    let half: T = lit(0.5);
    let zero = Complex::new(T::zero(), T::zero());
    let mut s = DMatrix::from_element(p, p, zero);
    let mut inv = DMatrix::from_element(p, p, zero);
    for i in 0..h {
        s[(i, i)] = Complex::new(half, T::zero());
        s[(i, h + i)] = Complex::new(half, T::zero());
        // 1/(2j) = -j/2
        s[(h + i, i)] = Complex::new(T::zero(), -half);
        s[(h + i, h + i)] = Complex::new(T::zero(), half);
        inv[(i, i)] = Complex::new(T::one(), T::zero());
        inv[(i, h + i)] = Complex::new(T::zero(), T::one());
        inv[(h + i, i)] = Complex::new(T::one(), T::zero());
        inv[(h + i, h + i)] = Complex::new(T::zero(), -T::one());
    }
    Ok(MixingMatrix { entries: s, structure: MixingStructure::CosSin, pinv: inv })
}

impl<T: Real> MixingMatrix<T> {
    /// Arbitrary `p x |kappa|` matrix; must have full column rank.
    pub fn custom(entries: DMatrix<Cplx<T>>) -> Result<Self> {
        let (p, k) = entries.shape();
        if p < k || k == 0 {
            return Err(Error::RankDeficient(0.0));
        }
        let svd = crate::linalg::svd(&entries).ok_or(Error::RankDeficient(0.0))?;
        let smax = svd.singular_values.iter().cloned().fold(T::zero(), |a, b| a.max(b));
        let smin = svd.singular_values.iter().cloned().fold(smax, |a, b| a.min(b));
        let ratio = if smax > T::zero() { smin / smax } else { T::zero() };
        if !(ratio > lit(1e-12)) {
            return Err(Error::RankDeficient(to_f64(ratio)));
        }
        let pinv = svd.pseudo_inverse(lit(0.0)).map_err(|_| Error::RankDeficient(to_f64(ratio)))?;
        Ok(Self { entries, structure: MixingStructure::Custom, pinv })
    }

    pub fn branches(&self) -> usize {
        self.entries.nrows()
    }

    pub fn columns(&self) -> usize {
        self.entries.ncols()
    }

    /// `S^+`, the left inverse used to unmix samples.
    pub fn pseudo_inverse(&self) -> &DMatrix<Cplx<T>> {
        &self.pinv
    }

    /// Real branch outputs `c = Re(S F)` for Fourier coefficients `F` over the
    /// full index set.
    pub fn mix(&self, coeffs: &[Cplx<T>]) -> Vec<T> {
        (0..self.branches())
            .map(|q| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (k, f) in coeffs.iter().enumerate() {
                    acc += self.entries[(q, k)] * *f;
                }
                acc.re
            })
            .collect()
    }
}

/// Everything that fixes the kernel bank and the recovery problem size.
#[derive(Debug, Clone)]
pub struct XampleConfig<T> {
    pub l: usize,
    pub rho: usize,
    pub tau: T,
    pub carrier_hz: T,
    pub kappa: Kappa,
    pub focus_mode: FocusMode,
    pub geometry: ArrayGeometry<T>,
}

impl<T: Real> XampleConfig<T> {
    /// Selects `kappa` around the pulse carrier and checks the band.
    pub fn new(
        l: usize,
        rho: usize,
        tau: T,
        pulse: &PulseModel<T>,
        focus_mode: FocusMode,
        geometry: ArrayGeometry<T>,
    ) -> Result<Self> {
        if let FocusMode::FocalZones(_) = focus_mode {
            return Err(Error::InvalidConfig("sampling supports dynamic or infinity focus only".into()));
        }
        let kappa = Kappa::select(l, rho, tau, pulse.carrier_hz)?;
        kappa.check_band(pulse, tau, lit(DEFAULT_SPECTRUM_FLOOR))?;
        Ok(Self { l, rho, tau, carrier_hz: pulse.carrier_hz, kappa, focus_mode, geometry })
    }

    /// `K = 2 rho L`.
    pub fn k(&self) -> usize {
        self.kappa.half_len()
    }

    /// Branch count of the default square mixing matrix.
    pub fn p(&self) -> usize {
        self.kappa.len()
    }

    /// `delta_m / c` as seen by the kernels (zero when focusing at infinity).
    pub fn kernel_offset_time(&self, m: usize) -> T {
        match self.focus_mode {
            FocusMode::Infinity => T::zero(),
            _ => self.geometry.offset_time(m),
        }
    }

    /// Upper integration bound: `tau_hat` for dynamic focus, `tau` otherwise.
    pub fn integration_end(&self) -> T {
        match self.focus_mode {
            FocusMode::Infinity => self.tau,
            _ => tau_hat(self.tau, &self.geometry),
        }
    }
}

/// Longest warped arrival: `max_m (tau + sqrt(tau^2 + 4 (delta_m/c)^2)) / 2`.
pub fn tau_hat<T: Real>(tau: T, geometry: &ArrayGeometry<T>) -> T {
    let four: T = lit(4.0);
    (0..geometry.num_elements)
        .map(|m| {
            let d = geometry.offset_time(m);
            (tau + (tau * tau + four * d * d).sqrt()) * lit(0.5)
        })
        .fold(tau, |a, b| a.max(b))
}

/// Amplitude factor and warped time of the kernel for offset time `d`, or
/// `None` where the unit step switches it off.
#[inline]
fn warp<T: Real>(t: T, d: T) -> Option<(T, T)> {
    if d == T::zero() {
        return if t >= T::zero() { Some((T::one(), t)) } else { None };
    }
    if t < d.abs() {
        return None;
    }
    let r = d / t;
    Some((T::one() + r * r, t - d * r))
}

/// Complex value of the generalised kernel for branch `q` (0-based) and
/// element `m` at time `t`, before discarding the imaginary part.
pub fn kernel_value_complex<T: Real>(cfg: &XampleConfig<T>, s: &MixingMatrix<T>, q: usize, m: usize, t: T) -> Cplx<T> {
    let Some((gain, u)) = warp(t, cfg.kernel_offset_time(m)) else {
        return Complex::new(T::zero(), T::zero());
    };
    let w = T::TAU() / cfg.tau;
    let mut acc = Complex::new(T::zero(), T::zero());
    for (col, &k) in cfg.kappa.indices().iter().enumerate() {
        acc += s.entries[(q, col)] * cis(-(w * lit::<T>(k as f64) * u));
    }
    acc.scale(gain)
}

/// Real generalised kernel `s_qm(t)`; `q` is 0-based, `m` indexes elements.
pub fn kernel_value<T: Real>(cfg: &XampleConfig<T>, s: &MixingMatrix<T>, q: usize, m: usize, t: T) -> T {
    if s.structure == MixingStructure::CosSin && cfg.kappa.is_mirrored() {
        let Some((gain, u)) = warp(t, cfg.kernel_offset_time(m)) else {
            return T::zero();
        };
        let kk = cfg.k();
        let w = T::TAU() / cfg.tau;
        return if q < kk {
            gain * (w * lit::<T>(cfg.kappa.positive()[q] as f64) * u).cos()
        } else {
            -gain * (w * lit::<T>(cfg.kappa.positive()[q - kk] as f64) * u).sin()
        };
    }
    kernel_value_complex(cfg, s, q, m, t).re
}

/// Low-rate outputs: per-column branch samples and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct XampleOutput<T: Real> {
    /// `p x columns`; one column per element, or per mirrored pair when folded.
    pub c_qm: DMatrix<T>,
    /// Element indices feeding each column.
    pub columns: Vec<Vec<usize>>,
    /// `c[q] = sum over columns of c_qm[q]`.
    pub c: Vec<T>,
}

/// Positive-half warped Fourier sums `(1/tau) int g(t) x(t) exp(-j w k u(t)) dt`.
fn warped_coefficients<T: Real>(row: &[T], step: T, n_nodes: usize, d: T, kappa: &[i64], tau: T) -> Vec<Cplx<T>> {
    let w = T::TAU() / tau;
    let k0 = lit::<T>(kappa[0] as f64);
    let mut acc = vec![Complex::new(T::zero(), T::zero()); kappa.len()];
    for (i, &x) in row.iter().enumerate().take(n_nodes) {
        if x == T::zero() {
            continue;
        }
        let t = from_usize::<T>(i) * step;
        let Some((gain, u)) = warp(t, d) else { continue };
        let amp = x * gain * trapz_weight::<T>(i, n_nodes);
        let mut z = cis(-(w * k0 * u)).scale(amp);
        let rot = cis(-(w * u));
        for a in acc.iter_mut() {
            *a += z;
            z *= rot;
        }
    }
    let scale = step / tau;
    acc.iter().map(|a| a.scale(scale)).collect()
}

fn full_set<T: Real>(kappa: &Kappa, positive: &[Cplx<T>]) -> Vec<Cplx<T>> {
    let mut v = positive.to_vec();
    if kappa.is_mirrored() {
        v.extend(positive.iter().map(|z| z.conj()));
    }
    v
}

fn check_consecutive(kappa: &Kappa) -> Result<()> {
    let pos = kappa.positive();
    if pos.is_empty() || pos.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidConfig("harmonic set must be non-empty consecutive integers".into()));
    }
    Ok(())
}

fn integration_nodes<T: Real>(ch: &ChannelSet<T>, end: T) -> Result<usize> {
    let eps: T = lit(1e-9);
    if ch.grid_end() < end * (T::one() - eps) {
        return Err(Error::GridTooShort { grid_end: to_f64(ch.grid_end()), required: to_f64(end) });
    }
    let last = (end / ch.grid_step + eps).floor().to_usize().unwrap_or(0);
    Ok((last + 1).min(ch.grid_len))
}

fn xample_columns<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &XampleConfig<T>,
    s: &MixingMatrix<T>,
    columns: Vec<Vec<usize>>,
) -> Result<XampleOutput<T>> {
    check_consecutive(&cfg.kappa)?;
    if s.columns() != cfg.kappa.len() {
        return Err(Error::InvalidConfig(format!(
            "mixing matrix has {} columns but |kappa| = {}",
            s.columns(),
            cfg.kappa.len()
        )));
    }
    if ch.num_elements() != cfg.geometry.num_elements {
        return Err(Error::InvalidConfig("channel count does not match the array geometry".into()));
    }
    let n_nodes = integration_nodes(ch, cfg.integration_end())?;
    let per_column: Vec<Vec<T>> = columns
        .par_iter()
        .map(|members| {
            let lead = members[0];
            let row: Vec<T> = if members.len() == 1 {
                ch.row(lead).to_vec()
            } else {
                let mut acc = ch.row(lead).to_vec();
                for &m in &members[1..] {
                    for (a, &b) in acc.iter_mut().zip(ch.row(m)) {
                        *a += b;
                    }
                }
                acc
            };
            let coeffs = warped_coefficients(
                &row,
                ch.grid_step,
                n_nodes,
                cfg.kernel_offset_time(lead),
                cfg.kappa.positive(),
                cfg.tau,
            );
            s.mix(&full_set(&cfg.kappa, &coeffs))
        })
        .collect();
    let p = s.branches();
    let c_qm = DMatrix::from_fn(p, columns.len(), |q, col| per_column[col][q]);
    let c = (0..p).map(|q| per_column.iter().fold(T::zero(), |a, col| a + col[q])).collect();
    Ok(XampleOutput { c_qm, columns, c })
}

/// Samples every element with its own kernel bank over `[0, tau_hat]`.
pub fn xample_channels<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &XampleConfig<T>,
    s: &MixingMatrix<T>,
) -> Result<XampleOutput<T>> {
    let columns = (0..ch.num_elements()).map(|m| vec![m]).collect();
    xample_columns(ch, cfg, s, columns)
}

/// Same samples, summing each mirrored element pair before modulation since
/// their kernels coincide.
pub fn xample_channels_folded<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &XampleConfig<T>,
    s: &MixingMatrix<T>,
) -> Result<XampleOutput<T>> {
    let n = ch.num_elements();
    let columns = (0..n.div_ceil(2))
        .map(|m| {
            let mirror = cfg.geometry.mirror(m);
            if mirror == m {
                vec![m]
            } else {
                vec![m, mirror]
            }
        })
        .collect();
    xample_columns(ch, cfg, s, columns)
}

/// Positive-half Fourier coefficients `(1/tau) int_0^tau Phi(t) exp(-j 2 pi k t / tau) dt`
/// of a densely sampled line, by trapezoidal quadrature.
pub fn line_fourier_coefficients<T: Real>(line: &BeamformedLine<T>, harmonics: &[i64], tau: T) -> Vec<Cplx<T>> {
    let eps: T = lit(1e-9);
    let last = (tau / line.grid_step + eps).floor().to_usize().unwrap_or(0);
    let n = (last + 1).min(line.samples.len());
    let w = T::TAU() / tau;
    harmonics
        .par_iter()
        .map(|&k| {
            let wk = w * lit::<T>(k as f64);
            let mut acc = Complex::new(T::zero(), T::zero());
            for (i, &x) in line.samples.iter().enumerate().take(n) {
                if x == T::zero() {
                    continue;
                }
                let t = from_usize::<T>(i) * line.grid_step;
                acc += cis(-(wk * t)).scale(x * trapz_weight::<T>(i, n));
            }
            acc.scale(line.grid_step / tau)
        })
        .collect()
}

/// Reference: samples the beamformed line itself with the unwarped kernels.
pub fn xample_beamformed_oracle<T: Real>(
    line: &BeamformedLine<T>,
    cfg: &XampleConfig<T>,
    s: &MixingMatrix<T>,
) -> Vec<T> {
    let coeffs = line_fourier_coefficients(line, cfg.kappa.positive(), cfg.tau);
    s.mix(&full_set(&cfg.kappa, &coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamform::beamform_line;
    use crate::sim::{synthesize_channels, Scatterer, Scene};

    const C: f64 = 1540.0;
    const TAU: f64 = 102.4e-6;

    fn geometry() -> ArrayGeometry<f64> {
        ArrayGeometry::new(16, 0.298e-3, C).unwrap()
    }

    fn cfg(l: usize, rho: usize, focus: FocusMode) -> XampleConfig<f64> {
        XampleConfig::new(l, rho, TAU, &PulseModel::standard(), focus, geometry()).unwrap()
    }

    #[test]
    fn kappa_selection_examples() {
        let k = Kappa::select(30, 1, TAU, 5.142e6).unwrap();
        assert_eq!(k.half_len(), 60);
        assert_eq!(k.positive()[0], 498);
        assert_eq!(*k.positive().last().unwrap(), 557);
        assert_eq!(k.len(), 120);
        let idx = k.indices();
        assert_eq!(idx[60], -498);
        assert_eq!(idx[119], -557);
        assert_eq!(Kappa::select(30, 4, TAU, 5.142e6).unwrap().len(), 480);
        assert_eq!(Kappa::select(1, 1, TAU, 5.142e6).unwrap().len(), 4);
        assert!(Kappa::select(0, 1, TAU, 5.142e6).is_err());
        assert!(matches!(Kappa::select(30, 4, 5e-6, 5.142e6), Err(Error::OffBand(_))));
        // every selected harmonic lies within the pulse band
        let p = PulseModel::<f64>::standard();
        assert!(k.check_band(&p, TAU, 1e-9).is_ok());
        assert!(matches!(k.check_band(&p, TAU, 0.999), Err(Error::OffBand(_))));
    }

    #[test]
    fn s_matrix_examples() {
        let s = build_s::<f64>(2).unwrap();
        assert_eq!(s.entries[(0, 0)], Complex::new(0.5, 0.0));
        assert_eq!(s.entries[(0, 1)], Complex::new(0.5, 0.0));
        assert_eq!(s.entries[(1, 0)], Complex::new(0.0, -0.5));
        assert_eq!(s.entries[(1, 1)], Complex::new(0.0, 0.5));
        let s4 = build_s::<f64>(4).unwrap();
        let prod = s4.pseudo_inverse() * &s4.entries;
        let eye = DMatrix::<Complex<f64>>::identity(4, 4);
        assert!((prod - eye).norm() < 1e-12);
        let custom = MixingMatrix::custom(s4.entries.clone()).unwrap();
        assert!((custom.pseudo_inverse() - s4.pseudo_inverse()).norm() < 1e-12);
        assert!(build_s::<f64>(3).is_err());
    }

    #[test]
    fn s_rows_reproduce_cos_and_sin_kernels() {
        let c = cfg(1, 2, FocusMode::Infinity);
        let s = build_s::<f64>(c.p()).unwrap();
        let kk = c.k();
        let w = 2.0 * std::f64::consts::PI / TAU;
        for i in 0..10 {
            let t = (i as f64 + 0.3) * 9.1e-6;
            for q in 0..c.p() {
                let z = kernel_value_complex(&c, &s, q, 0, t);
                let expect = if q < kk {
                    (w * c.kappa.positive()[q] as f64 * t).cos()
                } else {
                    -(w * c.kappa.positive()[q - kk] as f64 * t).sin()
                };
                assert!((z.re - expect).abs() < 1e-12);
                assert!(z.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn custom_rank_deficient_rejected() {
        let m = DMatrix::from_element(3, 2, Complex::new(1.0, 0.0));
        assert!(matches!(MixingMatrix::<f64>::custom(m), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn kernel_properties() {
        let c = cfg(2, 1, FocusMode::Dynamic);
        let s = build_s::<f64>(c.p()).unwrap();
        let g = c.geometry;
        for m in 0..g.num_elements {
            let d = g.offset_time(m).abs();
            // switched off before |d|
            assert_eq!(kernel_value(&c, &s, 0, m, 0.5 * d), 0.0);
            for i in 0..25 {
                let t = d + i as f64 * 3.7e-6;
                for q in 0..c.p() {
                    let a = kernel_value(&c, &s, q, m, t);
                    assert_eq!(a, kernel_value(&c, &s, q, g.mirror(m), t));
                    let z = kernel_value_complex(&c, &s, q, m, t);
                    assert!((z.re - a).abs() <= 1e-9 * (1.0 + a.abs()));
                    assert!(z.im.abs() <= 1e-12 * z.re.abs().max(1.0));
                }
            }
        }
        // infinity focus ignores the offsets
        let ci = cfg(2, 1, FocusMode::Infinity);
        assert_eq!(kernel_value(&ci, &s, 1, 0, 3e-6), kernel_value(&ci, &s, 1, 7, 3e-6));
    }

    #[test]
    fn tau_hat_examples() {
        let single = ArrayGeometry::new(1, 1e-3, C).unwrap();
        assert_eq!(tau_hat(TAU, &single), TAU);
        let g = ArrayGeometry::new(3, 10e-6 * C, C).unwrap();
        let th = tau_hat(TAU, &g);
        assert!((th - 103.367_422_784_722_6e-6).abs() < 1e-15, "{th}");
        assert!(tau_hat(TAU, &geometry()) >= TAU);
    }

    #[test]
    fn zero_channels_and_linearity() {
        let g = geometry();
        let c = cfg(2, 2, FocusMode::Dynamic);
        let s = build_s::<f64>(c.p()).unwrap();
        let pulse = PulseModel::standard();
        let empty = synthesize_channels(&Scene::noiseless(vec![], TAU), &g, &pulse, 3.125e-9).unwrap();
        assert!(xample_channels(&empty, &c, &s).unwrap().c.iter().all(|&v| v == 0.0));

        let scene = Scene::noiseless(vec![Scatterer { axial_time: 20e-6, reflectivity: 1.0 }], TAU);
        let ch = synthesize_channels(&scene, &g, &pulse, 3.125e-9).unwrap();
        let mut ch2 = ch.clone();
        ch2.scale(2.0);
        let a = xample_channels(&ch, &c, &s).unwrap();
        let b = xample_channels(&ch2, &c, &s).unwrap();
        for (x, y) in a.c.iter().zip(&b.c) {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn folding_matches_per_element() {
        let g = geometry();
        let c = cfg(3, 2, FocusMode::Dynamic);
        let s = build_s::<f64>(c.p()).unwrap();
        let scene = Scene::noiseless(
            vec![
                Scatterer { axial_time: 8e-6, reflectivity: 1.0 },
                Scatterer { axial_time: 31e-6, reflectivity: -0.4 },
            ],
            TAU,
        );
        let ch = synthesize_channels(&scene, &g, &PulseModel::standard(), 3.125e-9).unwrap();
        let a = xample_channels(&ch, &c, &s).unwrap();
        let b = xample_channels_folded(&ch, &c, &s).unwrap();
        assert_eq!(a.c_qm.ncols(), 16);
        assert_eq!(b.c_qm.ncols(), 8);
        let norm = a.c.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (x, y) in a.c.iter().zip(&b.c) {
            assert!((x - y).abs() <= 1e-12 * norm);
        }
        for q in 0..c.p() {
            let col_sum: f64 = a.c_qm.row(q).iter().sum();
            assert!((col_sum - a.c[q]).abs() <= 1e-15 * norm);
        }
    }

    #[test]
    fn grid_too_short_detected() {
        let g = geometry();
        let c = cfg(1, 1, FocusMode::Dynamic);
        let s = build_s::<f64>(c.p()).unwrap();
        let ch = ChannelSet::zeros(g, 3.125e-9, 1000, TAU);
        assert!(matches!(xample_channels(&ch, &c, &s), Err(Error::GridTooShort { .. })));
    }

    #[test]
    fn oracle_on_pure_harmonic() {
        let kappa = Kappa::from_positive(vec![7], false);
        let c = XampleConfig {
            l: 1,
            rho: 1,
            tau: 1e-5,
            carrier_hz: 7e5,
            kappa,
            focus_mode: FocusMode::Infinity,
            geometry: ArrayGeometry::new(1, 1e-3, C).unwrap(),
        };
        let s = MixingMatrix::custom(DMatrix::from_element(1, 1, Complex::new(1.0, 0.0))).unwrap();
        let n = 4001;
        let dt = 1e-5 / (n - 1) as f64;
        let w = 2.0 * std::f64::consts::PI / 1e-5;
        let samples = (0..n).map(|i| (w * 7.0 * i as f64 * dt).cos()).collect();
        let line = BeamformedLine { samples, grid_step: dt, alpha: 0.0, focus_mode: FocusMode::Infinity };
        let out = xample_beamformed_oracle(&line, &c, &s);
        assert!((out[0] - 0.5).abs() < 1e-9);
        let zero = BeamformedLine { samples: vec![0.0; n], ..line };
        assert_eq!(xample_beamformed_oracle(&zero, &c, &s), vec![0.0]);
    }

    #[test]
    fn infinity_mode_matches_oracle_on_plain_sum() {
        let g = geometry();
        let c = cfg(2, 2, FocusMode::Infinity);
        let s = build_s::<f64>(c.p()).unwrap();
        let scene = Scene::noiseless(
            vec![
                Scatterer { axial_time: 12e-6, reflectivity: 1.0 },
                Scatterer { axial_time: 25e-6, reflectivity: 0.5 },
            ],
            TAU,
        );
        let ch = synthesize_channels(&scene, &g, &PulseModel::standard(), 3.125e-9).unwrap();
        let a = xample_channels(&ch, &c, &s).unwrap();
        let line = beamform_line(&ch, 0.0, FocusMode::Infinity, ch.grid_step).unwrap();
        let b = xample_beamformed_oracle(&line, &c, &s);
        let num: f64 = a.c.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "{}", num / den);
    }
}
