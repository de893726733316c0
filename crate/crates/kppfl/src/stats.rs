//! Empirical-measure diagnostics for particle ensembles: centers, second
//! moments, histograms, and sub-diffusion exponent fits.

use crate::error::{Error, Result};
use crate::ipm::{DomainSpec, ParticleEnsemble};

/// Sample mean and unbiased covariance of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    /// Row-major d x d unbiased sample covariance.
    pub cov: Vec<f64>,
}

impl Moments {
    pub fn var(&self, dim_index: usize) -> f64 {
        let d = self.mean.len();
        self.cov[dim_index * d + dim_index]
    }
}

/// Two-pass sample mean and unbiased covariance.
pub fn moments(ens: &ParticleEnsemble) -> Result<Moments> {
    let n = ens.len();
    let d = ens.dim();
    if n < 2 {
        return Err(Error::contract("moments need at least 2 particles"));
    }
    let mut mean = vec![0.0; d];
    for l in 0..n {
        for (m, x) in mean.iter_mut().zip(ens.position(l)) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for l in 0..n {
        let x = ens.position(l);
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in 0..d {
                cov[a * d + b] += da * (x[b] - mean[b]);
            }
        }
    }
    for c in cov.iter_mut() {
        *c /= (n - 1) as f64;
    }
    Ok(Moments { mean, cov })
}

/// Centers E and second moments D per dimension over generation end
/// times.
#[derive(Debug, Clone, Default)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// center[t][d]
    pub center: Vec<Vec<f64>>,
    /// second_moment[t][d] (per-dimension variance)
    pub second_moment: Vec<Vec<f64>>,
}

impl MomentSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: f64, ens: &ParticleEnsemble) -> Result<()> {
        let m = moments(ens)?;
        let d = m.mean.len();
        self.times.push(t);
        self.second_moment.push((0..d).map(|i| m.var(i)).collect());
        self.center.push(m.mean);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Default tail window for exponent fits: the last half of the series.
pub const DEFAULT_EXPONENT_TAIL: f64 = 0.5;

/// OLS slope of log D versus log t over the trailing `tail_fraction` of
/// the series, with its standard error.
pub fn diffusion_exponent(
    series: &MomentSeries,
    dim_index: usize,
    tail_fraction: f64,
) -> Result<(f64, f64)> {
    let n = series.len();
    if n < 4 {
        return Err(Error::contract("diffusion exponent needs at least 4 time points"));
    }
    let k = ((n as f64 * tail_fraction).ceil() as usize).clamp(4, n);
    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for i in n - k..n {
        let t = series.times[i];
        let d = series.second_moment[i][dim_index];
        if !(t > 0.0) || !(d > 0.0) {
            return Err(Error::contract(format!(
                "log-log fit needs positive data, got (t, D) = ({t}, {d})"
            )));
        }
        xs.push(t.ln());
        ys.push(d.ln());
    }
    let fit = ols(&xs, &ys)?;
    Ok((fit.slope, fit.slope_stderr))
}

/// Uniform-bin histogram counts along one coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub out_of_range: u64,
}

/// Bins [lo, hi) into `n_bins` uniform cells; mass outside the range is
/// reported separately so counts always total N.
pub fn histogram(
    ens: &ParticleEnsemble,
    dim_index: usize,
    n_bins: usize,
    range: (f64, f64),
) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::contract("histogram needs at least one bin"));
    }
    let (lo, hi) = range;
    if !(hi > lo) {
        return Err(Error::contract("histogram range must be non-degenerate"));
    }
    if dim_index >= ens.dim() {
        return Err(Error::contract("histogram dimension out of range"));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    let mut out = 0u64;
    for l in 0..ens.len() {
        let x = ens.position(l)[dim_index];
        if x < lo || x >= hi {
            out += 1;
        } else {
            let b = (((x - lo) / width) as usize).min(n_bins - 1);
            counts[b] += 1;
        }
    }
    Ok(Histogram { counts, out_of_range: out })
}

/// Coordinate-wise modulo copy of the ensemble for visualization on the
/// torus; the source ensemble is untouched.
pub fn torus_projection(ens: &ParticleEnsemble, period: &[f64]) -> Result<ParticleEnsemble> {
    if period.len() != ens.dim() || period.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::contract("projection periods must be positive, one per dimension"));
    }
    let d = ens.dim();
    let mut positions = Vec::with_capacity(ens.len() * d);
    for l in 0..ens.len() {
        for (x, p) in ens.position(l).iter().zip(period) {
            let mut m = x.rem_euclid(*p);
            if m >= *p {
                m = 0.0;
            }
            positions.push(m);
        }
    }
    ParticleEnsemble::from_positions(positions, d, DomainSpec::torus(period.to_vec())?)
}

/// An ordinary least squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// OLS of ys against xs. The slope standard error is zero for exact
/// two-point fits and machine-exact data.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<OlsFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::contract("need at least two (x, y) points"));
    }
    let nf = n as f64;
    let xbar = xs.iter().sum::<f64>() / nf;
    let ybar = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    if sxx == 0.0 {
        return Err(Error::contract("x values are all identical"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let slope_stderr = if n == 2 {
        0.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        (ss_res / (nf - 2.0) / sxx).sqrt()
    };
    Ok(OlsFit { slope, intercept, slope_stderr })
}

/// Convenience wrapper returning (slope, stderr).
pub(crate) fn ols_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    match ols(xs, ys) {
        Ok(fit) => (fit.slope, fit.slope_stderr),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterStream, Stream};
    use approx::assert_abs_diff_eq;

    fn unbounded(positions: Vec<f64>, dim: usize) -> ParticleEnsemble {
        ParticleEnsemble::from_positions(positions, dim, DomainSpec::unbounded(dim)).unwrap()
    }

    #[test]
    fn point_mass_has_zero_covariance() {
        let ens = unbounded(vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0], 2);
        let m = moments(&ens).unwrap();
        assert_eq!(m.mean, vec![1.0, 2.0]);
        assert_eq!(m.cov, vec![0.0; 4]);
    }

    #[test]
    fn two_particle_unbiased_variance() {
        let ens = unbounded(vec![0.0, 0.0, 2.0, 0.0], 2);
        let m = moments(&ens).unwrap();
        assert_eq!(m.mean, vec![1.0, 0.0]);
        assert_eq!(m.var(0), 2.0);
        assert_eq!(m.var(1), 0.0);
    }

    #[test]
    fn gaussian_cloud_covariance_is_near_identity() {
        let n = 100_000;
        let s = CounterStream::new(5, Stream::InitEnsemble);
        let mut positions = Vec::with_capacity(2 * n);
        for l in 0..n {
            let z = s.normal4([l as u64, 0, 0, 0]);
            positions.push(z[0]);
            positions.push(z[1]);
        }
        let ens = unbounded(positions, 2);
        let m = moments(&ens).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (m.cov[a * 2 + b] - expected).abs() < 0.03,
                    "cov[{a}{b}] = {}",
                    m.cov[a * 2 + b]
                );
            }
        }
    }

    #[test]
    fn moments_match_naive_two_pass_oracle() {
        let s = CounterStream::new(17, Stream::InitEnsemble);
        for case in 0..50u64 {
            let n = 16 + (case as usize % 64);
            let mut positions = Vec::with_capacity(2 * n);
            for l in 0..n {
                let u = s.uniform4([case, l as u64, 0, 0]);
                positions.push((u[0] - 0.5) * 100.0);
                positions.push((u[1] - 0.5) * 100.0);
            }
            let ens = unbounded(positions.clone(), 2);
            let m = moments(&ens).unwrap();
            for d in 0..2 {
                let xs: Vec<f64> = (0..n).map(|l| positions[l * 2 + d]).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                assert_abs_diff_eq!(m.mean[d], mean, epsilon = 1e-10 * mean.abs().max(1.0));
                assert_abs_diff_eq!(m.var(d), var, epsilon = 1e-10 * var.abs().max(1.0));
            }
        }
    }

    #[test]
    fn exponent_recovers_exact_power_law() {
        let mut series = MomentSeries::new();
        for i in 1..=24 {
            let t = i as f64 * 0.5;
            series.times.push(t);
            series.center.push(vec![0.0]);
            series.second_moment.push(vec![3.0 * t.powf(0.85)]);
        }
        let (s, se) = diffusion_exponent(&series, 0, 0.5).unwrap();
        assert_abs_diff_eq!(s, 0.85, epsilon = 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn exponent_of_free_diffusion_is_one() {
        let mut series = MomentSeries::new();
        for i in 1..=16 {
            let t = i as f64;
            series.times.push(t);
            series.center.push(vec![0.0]);
            series.second_moment.push(vec![2.0 * t]);
        }
        let (s, _) = diffusion_exponent(&series, 0, 0.5).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exponent_of_constant_d_is_zero() {
        let mut series = MomentSeries::new();
        for i in 1..=16 {
            series.times.push(i as f64);
            series.center.push(vec![0.0]);
            series.second_moment.push(vec![4.2]);
        }
        let (s, _) = diffusion_exponent(&series, 0, 0.5).unwrap();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exponent_rejects_nonpositive_data() {
        let mut series = MomentSeries::new();
        for i in 0..8 {
            series.times.push(i as f64); // t = 0 in the window is invalid
            series.center.push(vec![0.0]);
            series.second_moment.push(vec![1.0]);
        }
        assert!(diffusion_exponent(&series, 0, 1.0).is_err());
    }

    #[test]
    fn histogram_conserves_mass() {
        let ens = unbounded(vec![-5.0, 0.1, 0.2, 0.35, 0.99, 2.0], 1);
        let h = histogram(&ens, 0, 4, (0.0, 1.0)).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>() + h.out_of_range, 6);
        assert_eq!(h.out_of_range, 2);
        assert_eq!(h.counts, vec![2, 1, 0, 1]);
    }

    #[test]
    fn single_point_fills_one_bin() {
        let ens = unbounded(vec![0.5; 100], 1);
        let h = histogram(&ens, 0, 10, (0.0, 1.0)).unwrap();
        assert_eq!(h.counts[5], 100);
        assert_eq!(h.counts.iter().sum::<u64>(), 100);
    }

    #[test]
    fn uniform_ensemble_bins_are_flat() {
        let n = 100_000;
        let s = CounterStream::new(8, Stream::InitEnsemble);
        let positions: Vec<f64> = (0..n).map(|l| s.uniform([l as u64, 0, 0, 0])).collect();
        let ens = unbounded(positions, 1);
        let h = histogram(&ens, 0, 20, (0.0, 1.0)).unwrap();
        let max = *h.counts.iter().max().unwrap() as f64;
        let min = *h.counts.iter().min().unwrap() as f64;
        assert!(max / min < 1.2, "ratio {}", max / min);
        assert_eq!(h.out_of_range, 0);
    }

    #[test]
    fn projection_wraps_and_preserves_counts() {
        let period = std::f64::consts::TAU;
        let ens = unbounded(vec![period + 0.5, -0.25], 1);
        let p = torus_projection(&ens, &[period]).unwrap();
        assert_abs_diff_eq!(p.position(0)[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position(1)[0], period - 0.25, epsilon = 1e-12);
        assert_eq!(p.len(), ens.len());
        // already-wrapped input is untouched
        let q = torus_projection(&p, &[period]).unwrap();
        assert_eq!(q.positions(), p.positions());
        // a further global shift by exactly one period leaves the
        // projection invariant
        let shifted = unbounded(ens.positions().iter().map(|x| x + period).collect(), 1);
        let r = torus_projection(&shifted, &[period]).unwrap();
        for l in 0..r.len() {
            assert_abs_diff_eq!(r.position(l)[0], p.position(l)[0], epsilon = 1e-9);
        }
    }

    #[test]
    fn ols_two_points_is_exact() {
        let fit = ols(&[1.0f64.ln(), 4.0f64.ln()], &[2.0f64.ln(), 4.0f64.ln()]).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.5, epsilon = 1e-15);
        assert_eq!(fit.slope_stderr, 0.0);
    }
}
