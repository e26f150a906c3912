//! Sample-count and operation-count accounting for one image line.
//!
//! One operation is one multiply-accumulate. The low-rate path is costed
//! block by block (output summation, unmixing, the pencil's SVD, rank-L
//! reconstructions, pseudo-inverse, pencil product and eigendecomposition,
//! then the amplitude least squares); the standard path is the channel sum
//! plus an FFT-based Hilbert transform.

use serde::Serialize;

use crate::error::{Error, Result};

/// Standard acquisition rate.
pub const STANDARD_RATE_HZ: f64 = 20e6;
/// Default imaging depth for the standard-path accounting.
pub const STANDARD_DEPTH_M: f64 = 0.0788;
pub const DEFAULT_SPEED_OF_SOUND: f64 = 1540.0;
/// Samples per line used by the standard-path reference figures.
pub const STANDARD_SAMPLES_PER_LINE: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleCounts {
    pub k: usize,
    /// Samples per element per line, `2K`.
    pub samples: usize,
}

pub fn sample_counts(l: usize, rho: usize) -> Result<SampleCounts> {
    if l == 0 || rho == 0 {
        return Err(Error::InvalidConfig("L and rho must be >= 1".into()));
    }
    let k = 2 * rho * l;
    Ok(SampleCounts { k, samples: 2 * k })
}

/// One named term of the low-rate cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBlock {
    pub name: &'static str,
    pub ops: f64,
}

/// Cost blocks for `L` reflectors, `K` coefficients, `p` branches and
/// `2M+1` elements, with the pencil split at `K/3`.
pub fn xampled_blocks(l: usize, k: usize, p: usize, m: usize) -> Vec<CostBlock> {
    let (l, kf, p, elems) = (l as f64, k as f64, p as f64, (2 * m + 1) as f64);
    let rows = 2.0 * kf / 3.0;
    let cols = kf / 3.0;
    let rank_l = rows * l * l + l * l * cols;
    vec![
        CostBlock { name: "sum_outputs", ops: (p - 1.0).max(0.0) * elems },
        CostBlock { name: "unmix", ops: kf * p },
        CostBlock { name: "pencil_svd", ops: rows * cols * cols },
        // listed twice in the reference breakdown
        CostBlock { name: "rank_l_reconstruction", ops: rank_l },
        CostBlock { name: "rank_l_reconstruction", ops: rank_l },
        CostBlock { name: "pencil_pinv", ops: rows.powi(3) + cols.powi(3) },
        CostBlock { name: "pencil_product", ops: rows * cols * cols },
        CostBlock { name: "pencil_eig", ops: cols.powi(3) },
        CostBlock { name: "ls_elementwise", ops: kf * l },
        CostBlock { name: "ls_pinv", ops: kf.powi(3) + l.powi(3) },
        CostBlock { name: "ls_apply", ops: kf * l },
    ]
}

pub fn xampled_ops(l: usize, k: usize, p: usize, m: usize) -> f64 {
    xampled_blocks(l, k, p, m).iter().map(|b| b.ops).sum()
}

/// Channel-sum adds plus two FFTs of `c_fft * n log2 n` each.
pub fn standard_ops(samples_per_line: usize, num_elements: usize, c_fft: f64) -> Result<f64> {
    if samples_per_line == 0 || num_elements == 0 {
        return Err(Error::InvalidConfig("sample and element counts must be >= 1".into()));
    }
    let n = samples_per_line as f64;
    Ok(standard_adds(samples_per_line, num_elements) as f64 + 2.0 * c_fft * n * n.log2())
}

pub fn standard_adds(samples_per_line: usize, num_elements: usize) -> u64 {
    samples_per_line as u64 * num_elements.saturating_sub(1) as u64
}

/// Nyquist-rate samples per line for a two-way trip to `depth_m`.
pub fn standard_samples(depth_m: f64, rate_hz: f64, speed_of_sound: f64) -> usize {
    (2.0 * depth_m / speed_of_sound * rate_hz).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub l: usize,
    pub rho: usize,
    pub k: usize,
    pub samples_per_element_per_line: usize,
    pub xampled_ops: f64,
    pub standard_ops: f64,
    pub standard_samples: usize,
    /// `standard_samples / samples_per_element_per_line`.
    pub reduction_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
}

/// One row per `rho`, each carrying the standard-path figures for comparison.
pub fn cost_report(l: usize, rhos: &[usize], num_elements: usize, c_fft: f64) -> Result<CostReport> {
    if rhos.is_empty() {
        return Err(Error::InvalidConfig("at least one rho is required".into()));
    }
    if num_elements == 0 {
        return Err(Error::InvalidConfig("element count must be >= 1".into()));
    }
    let standard_samples = STANDARD_SAMPLES_PER_LINE;
    let standard = standard_ops(standard_samples, num_elements, c_fft)?;
    let m = num_elements / 2;
    let rows = rhos
        .iter()
        .map(|&rho| {
            let counts = sample_counts(l, rho)?;
            Ok(CostRow {
                l,
                rho,
                k: counts.k,
                samples_per_element_per_line: counts.samples,
                xampled_ops: xampled_ops(l, counts.k, counts.samples, m),
                standard_ops: standard,
                standard_samples,
                reduction_factor: standard_samples as f64 / counts.samples as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport { rows })
}
