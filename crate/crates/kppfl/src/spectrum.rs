//! Scalar energy spectra for random velocity perturbations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named scalar energy spectrum E(k) on k >= 0.
///
/// Presets are addressable by name from run configs; `K05Exp` is the
/// working spectrum of the experiments, E(k) = |k|^{1/2} e^{-|k|}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralDensity {
    /// E(k) = 0: the trivial spectrum, useful as a null case.
    Zero,
    /// E(k) = |k|^{1/2} e^{-|k|}.
    K05Exp,
    /// E(k) = e^{-|k|}.
    Exp,
}

impl SpectralDensity {
    /// Energy density at wavenumber `k` (cycles per unit length).
    #[inline]
    pub fn eval(&self, k: f64) -> f64 {
        let k = k.abs();
        match self {
            SpectralDensity::Zero => 0.0,
            SpectralDensity::K05Exp => k.sqrt() * (-k).exp(),
            SpectralDensity::Exp => (-k).exp(),
        }
    }

    /// Identifier used in configs and serialized realizations.
    pub fn name(&self) -> &'static str {
        match self {
            SpectralDensity::Zero => "zero",
            SpectralDensity::K05Exp => "k05exp",
            SpectralDensity::Exp => "exp",
        }
    }

    /// Looks a preset up by its config name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(SpectralDensity::Zero),
            "k05exp" => Ok(SpectralDensity::K05Exp),
            "exp" => Ok(SpectralDensity::Exp),
            other => Err(Error::Spectrum(format!("unknown spectrum preset '{other}'"))),
        }
    }

    /// Numerically checks the admissibility properties on a sampled grid:
    /// nonnegativity, finite integral, finite E(0), bounded E and its
    /// first two differences, and a tail sum decaying at least as fast
    /// as y^{-2}.
    pub fn validate(&self, delta_k: f64) -> Result<()> {
        if !(delta_k > 0.0) {
            return Err(Error::Spectrum(format!("delta_k must be positive, got {delta_k}")));
        }
        let e0 = self.eval(0.0);
        if !e0.is_finite() {
            return Err(Error::Spectrum("E(0) is not finite".into()));
        }
        // Sample out to a generous multiple of the frequency step.
        let n_grid = 4096usize;
        let h = delta_k.min(0.01);
        let mut integral = 0.0;
        let mut prev = e0;
        let mut prev_d = 0.0;
        for i in 0..n_grid {
            let k = i as f64 * h;
            let e = self.eval(k);
            if e < 0.0 {
                return Err(Error::Spectrum(format!("E({k}) = {e} is negative")));
            }
            if !e.is_finite() {
                return Err(Error::Spectrum(format!("E({k}) is not finite")));
            }
            let d = (e - prev) / h;
            let dd = (d - prev_d) / h;
            if !d.is_finite() || !dd.is_finite() {
                return Err(Error::Spectrum(format!("divided differences blow up near k = {k}")));
            }
            integral += e * h;
            prev = e;
            prev_d = d;
        }
        if !integral.is_finite() {
            return Err(Error::Spectrum("integral of E diverges on the sampled grid".into()));
        }
        // Tail decay: g(y) = 2 sum_{j >= y} E(k_j) dk must fall at least
        // like y^{-2} along a dyadic sequence.
        let g = |y: usize| -> f64 { tail_sum(self, delta_k, y).unwrap_or(f64::INFINITY) };
        let ys = [64usize, 128, 256, 512];
        let caps: Vec<f64> = ys.iter().map(|&y| g(y) * (y * y) as f64).collect();
        let head = caps[0].max(caps[1]);
        for (i, cap) in caps.iter().enumerate().skip(2) {
            if !cap.is_finite() || *cap > head * 1.0001 + 1e-12 {
                return Err(Error::Spectrum(format!(
                    "tail sum does not decay like y^-2: g({y})*y^2 = {cap}",
                    y = ys[i]
                )));
            }
        }
        Ok(())
    }
}

/// The tail sum g(y) = 2 sum_{j >= y} E(j dk) dk, evaluated until the
/// running increment stays below 1e-14 of the partial sum for ten
/// consecutive terms.
pub(crate) fn tail_sum(spectrum: &SpectralDensity, delta_k: f64, start: usize) -> Result<f64> {
    const BUDGET: usize = 20_000_000;
    let mut sum = 0.0;
    let mut quiet = 0usize;
    let mut j = start;
    while quiet < 10 {
        let term = 2.0 * spectrum.eval(j as f64 * delta_k) * delta_k;
        sum += term;
        if term <= 1e-14 * sum.max(f64::MIN_POSITIVE) {
            quiet += 1;
        } else {
            quiet = 0;
        }
        j += 1;
        if j - start > BUDGET {
            return Err(Error::Spectrum(
                "tail sum is not Cauchy within the term budget".into(),
            ));
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_by_name() {
        for s in [SpectralDensity::Zero, SpectralDensity::K05Exp, SpectralDensity::Exp] {
            assert_eq!(SpectralDensity::from_name(s.name()).unwrap(), s);
        }
        assert!(SpectralDensity::from_name("nope").is_err());
    }

    #[test]
    fn k05exp_passes_admissibility() {
        let dk = 1.0 / (20.0 * std::f64::consts::PI);
        SpectralDensity::K05Exp.validate(dk).unwrap();
        SpectralDensity::Zero.validate(dk).unwrap();
        SpectralDensity::Exp.validate(dk).unwrap();
    }

    #[test]
    fn zero_tail_sum_is_zero() {
        let dk = 0.1;
        assert_eq!(tail_sum(&SpectralDensity::Zero, dk, 1).unwrap(), 0.0);
    }

    #[test]
    fn k05exp_peaks_near_half() {
        let s = SpectralDensity::K05Exp;
        assert!(s.eval(0.5) > s.eval(0.1));
        assert!(s.eval(0.5) > s.eval(2.0));
        assert_eq!(s.eval(0.0), 0.0);
    }
}
