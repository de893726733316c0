//! Exact and empirical two-point correlation functions.
//!
//! For an isotropic field with equispaced discrete spectrum the exact
//! correlation at separation r is a kernel-weighted sum over modes:
//! cos(2 pi k_j r) in 1D, J_0(2 pi k_j r) in 2D and sinc(2 pi k_j r) in
//! 3D, each weighted by 2 E(k_j) dk_j.

use crate::error::{Error, Result};
use crate::field::FieldRealization;
use crate::rng::{CounterStream, Stream};
use crate::spectrum::{tail_sum, SpectralDensity};

/// Spatial dimension of the correlation kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationDim {
    One,
    Two,
    Three,
}

impl CorrelationDim {
    #[inline]
    fn kernel(&self, u: f64) -> f64 {
        match self {
            CorrelationDim::One => u.cos(),
            CorrelationDim::Two => libm::j0(u),
            CorrelationDim::Three => {
                if u == 0.0 {
                    1.0
                } else {
                    u.sin() / u
                }
            }
        }
    }
}

/// Partial sum of the dimension-appropriate correlation series at
/// separation `r`, truncated after `n_terms + 1` modes.
pub fn correlation_exact(
    spectrum: SpectralDensity,
    delta_k: f64,
    dim: CorrelationDim,
    r: f64,
    n_terms: usize,
) -> f64 {
    let mut acc = 0.0;
    for j in 0..=n_terms {
        let dk_j = if j == 0 { 0.5 * delta_k } else { delta_k };
        let k_j = j as f64 * delta_k;
        acc += 2.0 * spectrum.eval(k_j) * dk_j * dim.kernel(std::f64::consts::TAU * k_j * r);
    }
    acc
}

/// Monte Carlo estimate of the correlation of the truncated field:
/// average of eval(x0) * eval(x0 + r) over fresh realizations and random
/// base points.
pub fn correlation_empirical(
    spectrum: SpectralDensity,
    delta_k: f64,
    n_f: usize,
    r: f64,
    n_seeds: usize,
    base_seed: u64,
) -> Result<f64> {
    if n_seeds < 2 {
        return Err(Error::contract("correlation_empirical needs n_seeds >= 2"));
    }
    let base_points = CounterStream::new(base_seed, Stream::CorrelationBase);
    let period = 1.0 / delta_k;
    let mut acc = 0.0;
    for s in 0..n_seeds {
        let realization =
            FieldRealization::sample(spectrum, delta_k, n_f, base_seed.wrapping_add(s as u64))?;
        let x0 = base_points.uniform([s as u64, 0, 0, 0]) * period;
        acc += realization.eval(x0) * realization.eval(x0 + r);
    }
    Ok(acc / n_seeds as f64)
}

/// Tail bound g(N_F + 1) = 2 sum_{j >= N_F+1} E(k_j) dk on the
/// correlation truncation error, uniform in r.
pub fn truncation_error_bound(
    spectrum: SpectralDensity,
    delta_k: f64,
    n_f: usize,
) -> Result<f64> {
    tail_sum(&spectrum, delta_k, n_f + 1)
}
