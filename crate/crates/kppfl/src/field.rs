//! Random Fourier realizations of stationary Gaussian scalar fields.
//!
//! A realization freezes the Gaussian coefficients of
//!
//! ```text
//! v(x) = sum_{j=0}^{N_F} sqrt(2 E(k_j) dk_j) [zeta_j cos(2 pi k_j x) + eta_j sin(2 pi k_j x)]
//! ```
//!
//! with k_j = j dk, dk_j = dk for j >= 1 and dk_0 = dk / 2. Every
//! realization is periodic with period 1/dk. Coefficients are drawn from
//! a counter stream keyed by (seed, mode index), so refining a
//! realization by doubling the mode count reuses the parent coefficients
//! bit-exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{CounterStream, Stream};
use crate::spectrum::SpectralDensity;

/// Hard ceiling on the mode count a refinement may reach.
pub const MAX_MODES: usize = 1 << 22;

/// One frozen realization of a random scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    delta_k: f64,
    spectrum: SpectralDensity,
    seed: u64,
    zeta: Vec<f64>,
    eta: Vec<f64>,
    /// sqrt(2 E(k_j) dk_j), cached at construction.
    amplitude: Vec<f64>,
}

impl FieldRealization {
    /// Draws a fresh realization with `n_f + 1` coefficient pairs.
    ///
    /// Identical `(spectrum, delta_k, n_f, seed)` inputs produce
    /// bit-identical coefficients.
    pub fn sample(
        spectrum: SpectralDensity,
        delta_k: f64,
        n_f: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(delta_k > 0.0) {
            return Err(Error::Spectrum(format!("delta_k must be positive, got {delta_k}")));
        }
        if n_f + 1 > MAX_MODES {
            return Err(Error::Capacity { requested: n_f + 1, max: MAX_MODES });
        }
        let zeta_stream = CounterStream::new(seed, Stream::FieldZeta);
        let eta_stream = CounterStream::new(seed, Stream::FieldEta);
        let mut zeta = Vec::with_capacity(n_f + 1);
        let mut eta = Vec::with_capacity(n_f + 1);
        for j in 0..=n_f {
            zeta.push(zeta_stream.normal_inv_cdf([j as u64, 0, 0, 0]));
            eta.push(eta_stream.normal_inv_cdf([j as u64, 0, 0, 0]));
        }
        let amplitude = amplitudes(&spectrum, delta_k, n_f)?;
        Ok(FieldRealization { delta_k, spectrum, seed, zeta, eta, amplitude })
    }

    /// Rebuilds a realization from explicitly given coefficients
    /// (deserialized replay documents).
    pub fn from_coefficients(
        spectrum: SpectralDensity,
        delta_k: f64,
        seed: u64,
        zeta: Vec<f64>,
        eta: Vec<f64>,
    ) -> Result<Self> {
        if zeta.len() != eta.len() || zeta.is_empty() {
            return Err(Error::contract(
                "coefficient arrays must be non-empty and of equal length",
            ));
        }
        let amplitude = amplitudes(&spectrum, delta_k, zeta.len() - 1)?;
        Ok(FieldRealization { delta_k, spectrum, seed, zeta, eta, amplitude })
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    /// Number of modes N_F; the realization holds N_F + 1 coefficient pairs.
    pub fn n_modes(&self) -> usize {
        self.zeta.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spectrum(&self) -> SpectralDensity {
        self.spectrum
    }

    /// Spatial period 1/dk of the realized field.
    pub fn period(&self) -> f64 {
        1.0 / self.delta_k
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Mode amplitudes sqrt(2 E(k_j) dk_j).
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitude
    }

    /// Evaluates the realized field at `x`.
    ///
    /// The equispaced frequencies make cos/sin(2 pi k_j x) a geometric
    /// phasor sequence; it is advanced by complex recurrence and
    /// re-anchored with exact trig every 64 modes to keep rounding drift
    /// below 1e-13 relative.
    pub fn eval(&self, x: f64) -> f64 {
        let theta = std::f64::consts::TAU * self.delta_k * x;
        let (step_s, step_c) = theta.sin_cos();
        let mut c = 1.0f64; // cos(0)
        let mut s = 0.0f64; // sin(0)
        let mut acc = 0.0f64;
        for (j, amp) in self.amplitude.iter().enumerate() {
            if j > 0 {
                if j % 64 == 0 {
                    let (sj, cj) = (theta * j as f64).sin_cos();
                    s = sj;
                    c = cj;
                } else {
                    let c_next = c * step_c - s * step_s;
                    s = s * step_c + c * step_s;
                    c = c_next;
                }
            }
            acc += amp * (self.zeta[j] * c + self.eta[j] * s);
        }
        acc
    }

    /// Doubles the mode count, keeping the first N_F + 1 coefficient
    /// pairs of the parent bit-exactly and drawing the new ones from the
    /// same seed-derived stream at their reserved counters.
    pub fn refine(&self) -> Result<Self> {
        let n_f = self.n_modes();
        let n_new = 2 * n_f;
        if n_new + 1 > MAX_MODES {
            return Err(Error::Capacity { requested: n_new + 1, max: MAX_MODES });
        }
        let zeta_stream = CounterStream::new(self.seed, Stream::FieldZeta);
        let eta_stream = CounterStream::new(self.seed, Stream::FieldEta);
        let mut zeta = self.zeta.clone();
        let mut eta = self.eta.clone();
        for j in n_f + 1..=n_new {
            zeta.push(zeta_stream.normal_inv_cdf([j as u64, 0, 0, 0]));
            eta.push(eta_stream.normal_inv_cdf([j as u64, 0, 0, 0]));
        }
        let amplitude = amplitudes(&self.spectrum, self.delta_k, n_new)?;
        Ok(FieldRealization {
            delta_k: self.delta_k,
            spectrum: self.spectrum,
            seed: self.seed,
            zeta,
            eta,
            amplitude,
        })
    }

    /// Serializable replay document.
    pub fn to_document(&self) -> RealizationDocument {
        RealizationDocument {
            delta_k: self.delta_k,
            n_f: self.n_modes(),
            seed: self.seed,
            spectrum_name: self.spectrum.name().to_string(),
            zeta: self.zeta.clone(),
            eta: self.eta.clone(),
        }
    }
}

/// JSON document for exact replay of a realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationDocument {
    pub delta_k: f64,
    pub n_f: usize,
    pub seed: u64,
    pub spectrum_name: String,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
}

impl RealizationDocument {
    pub fn into_realization(self) -> Result<FieldRealization> {
        let spectrum = SpectralDensity::from_name(&self.spectrum_name)?;
        if self.zeta.len() != self.n_f + 1 || self.eta.len() != self.n_f + 1 {
            return Err(Error::contract("coefficient arrays do not match n_f"));
        }
        FieldRealization::from_coefficients(spectrum, self.delta_k, self.seed, self.zeta, self.eta)
    }
}

fn amplitudes(spectrum: &SpectralDensity, delta_k: f64, n_f: usize) -> Result<Vec<f64>> {
    let mut amp = Vec::with_capacity(n_f + 1);
    for j in 0..=n_f {
        let dk_j = if j == 0 { 0.5 * delta_k } else { delta_k };
        let e = spectrum.eval(j as f64 * delta_k);
        if e < 0.0 || !e.is_finite() {
            return Err(Error::Spectrum(format!(
                "E({}) = {e} sampled outside [0, inf)",
                j as f64 * delta_k
            )));
        }
        amp.push((2.0 * e * dk_j).sqrt());
    }
    Ok(amp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const DK: f64 = 1.0 / (20.0 * std::f64::consts::PI);

    #[test]
    fn zero_spectrum_evaluates_to_zero() {
        let r = FieldRealization::sample(SpectralDensity::Zero, DK, 32, 9).unwrap();
        for i in 0..20 {
            assert_eq!(r.eval(i as f64 * 1.7), 0.0);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = FieldRealization::sample(SpectralDensity::K05Exp, DK, 64, 1234).unwrap();
        let b = FieldRealization::sample(SpectralDensity::K05Exp, DK, 64, 1234).unwrap();
        assert_eq!(a.zeta(), b.zeta());
        assert_eq!(a.eta(), b.eta());
        let c = FieldRealization::sample(SpectralDensity::K05Exp, DK, 64, 1235).unwrap();
        assert_ne!(a.zeta(), c.zeta());
    }

    #[test]
    fn single_constant_mode() {
        // N_F = 0: eval(x) = sqrt(E(0) dk) * zeta_0 for every x.
        let r = FieldRealization::sample(SpectralDensity::Exp, DK, 0, 5).unwrap();
        let expected = (SpectralDensity::Exp.eval(0.0) * DK).sqrt() * r.zeta()[0];
        assert_abs_diff_eq!(r.eval(0.0), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(r.eval(8.13), expected, epsilon = 1e-15);
    }

    #[test]
    fn eval_matches_term_by_term_oracle() {
        let r = FieldRealization::sample(SpectralDensity::K05Exp, DK, 400, 77).unwrap();
        let x = 1.37;
        // independent straightforward summation with literal trig calls
        let mut oracle = 0.0;
        for j in 0..=400usize {
            let k_j = j as f64 * DK;
            let arg = std::f64::consts::TAU * k_j * x;
            oracle += r.amplitudes()[j] * (r.zeta()[j] * arg.cos() + r.eta()[j] * arg.sin());
        }
        let got = r.eval(x);
        assert!(
            (got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
            "eval {got} vs oracle {oracle}"
        );
    }

    #[test]
    fn realization_is_periodic() {
        let r = FieldRealization::sample(SpectralDensity::K05Exp, DK, 128, 3).unwrap();
        let period = r.period();
        let probe = CounterStream::new(11, Stream::CorrelationBase);
        for i in 0..100u64 {
            let x = (probe.uniform([i, 0, 0, 0]) - 0.5) * 4.0 * period;
            assert!(
                (r.eval(x) - r.eval(x + period)).abs() < 1e-10,
                "periodicity violated at x = {x}"
            );
        }
    }

    #[test]
    fn refinement_preserves_prefix_and_doubles() {
        let r0 = FieldRealization::sample(SpectralDensity::K05Exp, DK, 50, 21).unwrap();
        let r1 = r0.refine().unwrap();
        let r2 = r1.refine().unwrap();
        assert_eq!(r1.n_modes(), 100);
        assert_eq!(r2.n_modes(), 200);
        assert_eq!(&r2.zeta()[..=50], r0.zeta());
        assert_eq!(&r2.eta()[..=50], r0.eta());
        assert_eq!(&r2.zeta()[..=100], r1.zeta());
    }

    #[test]
    fn refinement_capacity_is_enforced() {
        let r = FieldRealization::sample(SpectralDensity::Exp, DK, MAX_MODES / 2, 1).unwrap();
        assert!(matches!(r.refine(), Err(Error::Capacity { .. })));
    }

    #[test]
    fn new_modes_have_smaller_amplitude_for_decaying_spectra() {
        let r0 = FieldRealization::sample(SpectralDensity::K05Exp, DK, 200, 4).unwrap();
        let r1 = r0.refine().unwrap();
        let parent_max = r0.amplitudes().iter().cloned().fold(0.0, f64::max);
        let new_max = r1.amplitudes()[201..].iter().cloned().fold(0.0, f64::max);
        assert!(new_max < parent_max);
    }

    #[test]
    fn coefficient_sample_std_is_one() {
        // Monte Carlo moment check on zeta_0 across seeds.
        let n = 10_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for seed in 0..n as u64 {
            let z = CounterStream::new(seed, Stream::FieldZeta).normal_inv_cdf([0, 0, 0, 0]);
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let sd = var.sqrt();
        // sd of the sample std is ~ 1/sqrt(2n)
        assert!((sd - 1.0).abs() < 3.0 / (2.0 * n as f64).sqrt(), "sd {sd}");
    }

    #[test]
    fn replay_document_round_trips() {
        let r = FieldRealization::sample(SpectralDensity::K05Exp, DK, 16, 99).unwrap();
        let json = serde_json::to_string(&r.to_document()).unwrap();
        let doc: RealizationDocument = serde_json::from_str(&json).unwrap();
        let back = doc.into_realization().unwrap();
        assert_eq!(back, r);
    }
}
