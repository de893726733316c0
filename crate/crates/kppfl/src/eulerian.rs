//! Eulerian reference estimators of the principal eigenvalue.
//!
//! Two independent routes cross-validate the particle method on 2D
//! periodic problems:
//!
//! * a semi-Lagrangian advection-reaction step combined with
//!   Crank-Nicolson spectral diffusion (SL+CN), whose per-step log-mass
//!   increments converge to mu;
//! * a Fourier-collocation eigensolver that assembles the dense operator
//!   and extracts the eigenvalue of maximal real part by shifted inverse
//!   iteration on the resolvent.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{drift, potential, DualVariable, FlowModel, KppParams};
use crate::front_speed::MuEstimator;

/// Per-dimension resolution cap for the 2D eigensolver (dense operator).
pub const SPECTRAL_CAP_2D: usize = 64;
/// Resolution cap for the 1D eigensolver.
pub const SPECTRAL_CAP_1D: usize = 2048;

/// A nonnegative scalar field on a periodic n x n grid, with the running
/// sum of log mass renormalizations.
#[derive(Debug, Clone)]
pub struct EulerianGrid {
    n: usize,
    period: f64,
    q: Vec<f64>,
    pub log_mass: f64,
}

impl EulerianGrid {
    /// Uniform unit-mass field.
    pub fn uniform(n: usize, period: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::contract("grid resolution must be even and at least 4"));
        }
        if !(period > 0.0) {
            return Err(Error::contract("grid period must be positive"));
        }
        let q = vec![1.0 / (period * period); n * n];
        Ok(EulerianGrid { n, period, q, log_mass: 0.0 })
    }

    /// Builds a grid from raw values (tests and snapshots).
    pub fn from_values(n: usize, period: f64, q: Vec<f64>) -> Result<Self> {
        if q.len() != n * n {
            return Err(Error::contract("field length must be n^2"));
        }
        let mut grid = EulerianGrid { n, period, q, log_mass: 0.0 };
        grid.renormalize()?;
        grid.log_mass = 0.0;
        Ok(grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Midpoint-quadrature mass h^2 sum q.
    pub fn mass(&self) -> f64 {
        let h = self.spacing();
        pairwise_sum(&self.q) * h * h
    }

    fn renormalize(&mut self) -> Result<f64> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::GridDegeneracy(format!("field mass {mass} after step")));
        }
        let inv = 1.0 / mass;
        for v in self.q.iter_mut() {
            *v *= inv;
        }
        self.log_mass += mass.ln();
        Ok(mass.ln())
    }
}

/// Numerically stable pairwise summation.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Crank-Nicolson diffusion in discrete Fourier space: every mode is
/// multiplied by (1 - kappa |k|^2 dt/2) / (1 + kappa |k|^2 dt/2).
pub struct CnDiffusion {
    n: usize,
    factors: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CnDiffusion {
    pub fn new(n: usize, period: f64, kappa: f64, dt: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let base = std::f64::consts::TAU / period;
        let freq = |m: usize| -> f64 {
            let f = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            f * base
        };
        let mut factors = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k2 = freq(i) * freq(i) + freq(j) * freq(j);
                let a = 0.5 * kappa * k2 * dt;
                factors[i * n + j] = (1.0 - a) / (1.0 + a);
            }
        }
        CnDiffusion { n, factors, fwd, inv }
    }

    /// Per-mode amplification factors (all of magnitude at most one).
    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    /// Applies the diffusion step in place on an n x n real field.
    pub fn apply(&self, q: &mut [f64]) {
        let n = self.n;
        let mut buf: Vec<Complex<f64>> =
            q.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut scratch = vec![Complex::new(0.0, 0.0); n];
        // forward: rows then columns
        for row in buf.chunks_mut(n) {
            self.fwd.process(row);
        }
        for j in 0..n {
            for i in 0..n {
                scratch[i] = buf[i * n + j];
            }
            self.fwd.process(&mut scratch);
            for i in 0..n {
                buf[i * n + j] = scratch[i];
            }
        }
        for (b, f) in buf.iter_mut().zip(&self.factors) {
            *b *= *f;
        }
        // inverse: columns then rows, with 1/n^2 normalization
        for j in 0..n {
            for i in 0..n {
                scratch[i] = buf[i * n + j];
            }
            self.inv.process(&mut scratch);
            for i in 0..n {
                buf[i * n + j] = scratch[i];
            }
        }
        for row in buf.chunks_mut(n) {
            self.inv.process(row);
        }
        let scale = 1.0 / (n * n) as f64;
        for (v, b) in q.iter_mut().zip(&buf) {
            *v = b.re * scale;
        }
    }
}

/// Semi-Lagrangian advection-reaction with Crank-Nicolson spectral
/// diffusion for one steady operator. Departure stencils and reaction
/// factors are precomputed from the (time-independent) drift and
/// potential.
pub struct SlCnSolver {
    n: usize,
    /// four gather indices per node
    stencil: Vec<[u32; 4]>,
    /// four bilinear weights per node
    weights: Vec<[f64; 4]>,
    /// exp(c(x) dt) per node
    react: Vec<f64>,
    diffusion: CnDiffusion,
    dt: f64,
}

impl SlCnSolver {
    pub fn new(
        grid: &EulerianGrid,
        flow: &FlowModel,
        dual: &DualVariable,
        p: &KppParams,
        dt: f64,
    ) -> Result<Self> {
        if flow.dim() != 2 || dual.dim() != 2 {
            return Err(Error::contract("the SL+CN solver is two-dimensional"));
        }
        if !(dt > 0.0) {
            return Err(Error::contract("dt must be positive"));
        }
        let n = grid.n;
        let l = grid.period;
        let h = grid.spacing();
        let mut stencil = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        let mut react = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 * h, j as f64 * h];
                let b = drift(flow, dual, p, &x);
                if b[0].abs() * dt >= 0.5 * l || b[1].abs() * dt >= 0.5 * l {
                    return Err(Error::contract(format!(
                        "departure point bound violated: |b| dt = {} >= L/2",
                        b[0].abs().max(b[1].abs()) * dt
                    )));
                }
                let xd = [x[0] - b[0] * dt, x[1] - b[1] * dt];
                let (idx, w) = bilinear_stencil(xd, h, n);
                stencil.push(idx);
                weights.push(w);
                react.push((potential(flow, dual, p, &x) * dt).exp());
            }
        }
        Ok(SlCnSolver {
            n,
            stencil,
            weights,
            react,
            diffusion: CnDiffusion::new(n, l, p.kappa, dt),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn diffusion(&self) -> &CnDiffusion {
        &self.diffusion
    }

    /// One full step: semi-Lagrangian advection with reaction weighting,
    /// spectral CN diffusion, positivity clamp, renormalization. Returns
    /// the log-mass increment.
    pub fn step(&self, grid: &mut EulerianGrid) -> Result<f64> {
        debug_assert_eq!(grid.n, self.n);
        let q = &grid.q;
        let mut next = vec![0.0; q.len()];
        for (node, out) in next.iter_mut().enumerate() {
            let idx = &self.stencil[node];
            let w = &self.weights[node];
            let interp = w[0] * q[idx[0] as usize]
                + w[1] * q[idx[1] as usize]
                + w[2] * q[idx[2] as usize]
                + w[3] * q[idx[3] as usize];
            // bilinear interpolation of a nonnegative field is a convex
            // combination; clamp guards against rounding
            *out = interp.max(0.0) * self.react[node];
        }
        self.diffusion.apply(&mut next);
        for v in next.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        grid.q = next;
        grid.renormalize()
    }
}

/// Periodic bilinear stencil for a departure point.
fn bilinear_stencil(xd: [f64; 2], h: f64, n: usize) -> ([u32; 4], [f64; 4]) {
    let u = xd[0] / h;
    let v = xd[1] / h;
    let i0f = u.floor();
    let j0f = v.floor();
    let fx = u - i0f;
    let fy = v - j0f;
    let wrap = |m: i64| -> usize { (m.rem_euclid(n as i64)) as usize };
    let i0 = wrap(i0f as i64);
    let i1 = wrap(i0f as i64 + 1);
    let j0 = wrap(j0f as i64);
    let j1 = wrap(j0f as i64 + 1);
    (
        [
            (i0 * n + j0) as u32,
            (i0 * n + j1) as u32,
            (i1 * n + j0) as u32,
            (i1 * n + j1) as u32,
        ],
        [
            (1.0 - fx) * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * (1.0 - fy),
            fx * fy,
        ],
    )
}

/// Result of a mu run: the estimate and the per-step log-mass
/// increments.
#[derive(Debug, Clone)]
pub struct SlMuResult {
    pub mu: f64,
    pub increments: Vec<f64>,
}

/// Time-steps the grid and averages the post-burn-in log-mass growth:
/// mu = sum of increments over the window / window duration.
pub fn run_mu_sl(
    grid: &mut EulerianGrid,
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    dt: f64,
    n_steps: usize,
    burn_in_fraction: f64,
) -> Result<SlMuResult> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::contract("burn-in fraction must be in [0, 1)"));
    }
    let burn = (n_steps as f64 * burn_in_fraction).floor() as usize;
    if n_steps - burn < 10 {
        return Err(Error::contract("need at least 10 post-burn-in steps"));
    }
    let solver = SlCnSolver::new(grid, flow, dual, p, dt)?;
    let mut increments = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        increments.push(solver.step(grid)?);
    }
    let window = &increments[burn..];
    let mu = pairwise_sum(window) / (window.len() as f64 * dt);
    Ok(SlMuResult { mu, increments })
}

/// Fourier collocation first- and second-derivative matrices on a
/// periodic grid of even size n with period L.
pub fn fourier_diff_matrices(n: usize, period: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(n >= 4 && n % 2 == 0, "collocation grid must be even");
    let h = std::f64::consts::TAU / n as f64;
    let scale = std::f64::consts::TAU / period;
    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                d2[(i, j)] = -(std::f64::consts::PI * std::f64::consts::PI)
                    / (3.0 * h * h)
                    - 1.0 / 6.0;
            } else {
                let d = i as i64 - j as i64;
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                let half = 0.5 * d as f64 * h;
                d1[(i, j)] = 0.5 * sign / half.tan();
                d2[(i, j)] = -sign / (2.0 * half.sin() * half.sin());
            }
        }
    }
    (d1 * scale, d2 * (scale * scale))
}

/// Principal (maximal real part) eigenvalue of a dense real matrix by
/// shifted inverse iteration on the resolvent (sigma I - A)^{-1}.
///
/// `sigma_hint` must exceed the principal eigenvalue; for the operators
/// here max c(x) + 1 works since incompressible advection cannot raise
/// the growth rate above the potential maximum.
fn principal_eigenvalue(a: &DMatrix<f64>, sigma_hint: f64) -> Result<f64> {
    let n = a.nrows();
    let mut sigma = sigma_hint;
    for _attempt in 0..3 {
        let b = DMatrix::identity(n, n) * sigma - a;
        let lu = b.lu();
        let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut mu_prev = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0usize;
        for it in 0..20_000 {
            iterations = it + 1;
            let w = match lu.solve(&v) {
                Some(w) => w,
                None => break, // singular shift; retry farther away
            };
            let theta = v.dot(&w);
            let norm = w.norm();
            if !(norm > 0.0) || !theta.is_finite() {
                break;
            }
            v = w / norm;
            let mu = sigma - 1.0 / theta;
            if (mu - mu_prev).abs() <= 1e-13 * (1.0 + mu.abs()) {
                mu_prev = mu;
                converged = true;
                break;
            }
            mu_prev = mu;
        }
        if converged {
            let av = a * &v;
            let mu = mu_prev;
            let residual = (&av - &v * mu).norm();
            let scale = av.norm().max(1.0);
            if residual <= 1e-8 * scale {
                return Ok(mu);
            }
            return Err(Error::Convergence { residual: residual / scale, iterations });
        }
        // dominant mode interfered with the shift: move sigma up and retry
        sigma = sigma * 2.0 + 1.0;
    }
    Err(Error::Convergence { residual: f64::INFINITY, iterations: 0 })
}

/// Principal eigenvalue of the 1D periodic operator
/// kappa u'' + a(x) u' + c(x) u by Fourier collocation.
pub fn spectral_eigen_1d(
    kappa: f64,
    a: impl Fn(f64) -> f64,
    c: impl Fn(f64) -> f64,
    n: usize,
    period: f64,
) -> Result<f64> {
    if n > SPECTRAL_CAP_1D {
        return Err(Error::contract(format!("1D collocation capped at {SPECTRAL_CAP_1D} points")));
    }
    if n < 4 || n % 2 != 0 {
        return Err(Error::contract("collocation grid must be even and at least 4"));
    }
    let (d1, d2) = fourier_diff_matrices(n, period);
    let h = period / n as f64;
    let mut m = d2 * kappa;
    let mut c_max = f64::NEG_INFINITY;
    for i in 0..n {
        let x = i as f64 * h;
        let ai = a(x);
        for j in 0..n {
            m[(i, j)] += ai * d1[(i, j)];
        }
        let ci = c(x);
        m[(i, i)] += ci;
        c_max = c_max.max(ci);
    }
    principal_eigenvalue(&m, c_max + 1.0)
}

/// Principal eigenvalue of the 2D linearized operator
/// kappa Lap + b . grad + c on the periodic square of the given period,
/// assembled by Fourier collocation at `n_per_dim`^2 nodes.
pub fn spectral_eigen(
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    n_per_dim: usize,
    period: f64,
) -> Result<f64> {
    if flow.dim() != 2 {
        return Err(Error::contract("the collocation eigensolver is limited to 2D flows"));
    }
    if n_per_dim > SPECTRAL_CAP_2D {
        return Err(Error::contract(format!(
            "2D collocation capped at {SPECTRAL_CAP_2D} points per dimension"
        )));
    }
    if n_per_dim < 4 || n_per_dim % 2 != 0 {
        return Err(Error::contract("collocation grid must be even and at least 4"));
    }
    let n = n_per_dim;
    let (d1, d2) = fourier_diff_matrices(n, period);
    let h = period / n as f64;
    let nn = n * n;
    let mut m = DMatrix::<f64>::zeros(nn, nn);
    let mut c_max = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            let x = [i as f64 * h, j as f64 * h];
            let b = drift(flow, dual, p, &x);
            // kappa (Dxx + Dyy) + bx Dx + by Dy, Kronecker structure
            for k in 0..n {
                m[(row, k * n + j)] += p.kappa * d2[(i, k)] + b[0] * d1[(i, k)];
                m[(row, i * n + k)] += p.kappa * d2[(j, k)] + b[1] * d1[(j, k)];
            }
            let ci = potential(flow, dual, p, &x);
            m[(row, row)] += ci;
            c_max = c_max.max(ci);
        }
    }
    principal_eigenvalue(&m, c_max + 1.0)
}

/// Config for the SL+CN mu estimator.
#[derive(Debug, Clone)]
pub struct SlCnConfig {
    pub n_per_dim: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub burn_in: f64,
}

impl Default for SlCnConfig {
    fn default() -> Self {
        SlCnConfig { n_per_dim: 128, dt: 1e-3, n_steps: 3000, burn_in: 0.5 }
    }
}

/// SL+CN as a mu estimator for the front-speed search.
#[derive(Debug, Clone)]
pub struct SlCnMuEstimator {
    pub config: SlCnConfig,
}

impl MuEstimator for SlCnMuEstimator {
    fn mu(&self, flow: &FlowModel, dual: &DualVariable, p: &KppParams) -> Result<f64> {
        let period = flow
            .period()
            .ok_or_else(|| Error::contract("flow has no commensurate period"))?;
        let mut grid = EulerianGrid::uniform(self.config.n_per_dim, period)?;
        let result = run_mu_sl(
            &mut grid,
            flow,
            dual,
            p,
            self.config.dt,
            self.config.n_steps,
            self.config.burn_in,
        )?;
        Ok(result.mu)
    }

    fn name(&self) -> &'static str {
        "sl_cn"
    }
}

/// Fourier collocation as a mu estimator.
#[derive(Debug, Clone)]
pub struct SpectralMuEstimator {
    pub n_per_dim: usize,
}

impl MuEstimator for SpectralMuEstimator {
    fn mu(&self, flow: &FlowModel, dual: &DualVariable, p: &KppParams) -> Result<f64> {
        let period = flow
            .period()
            .ok_or_else(|| Error::contract("flow has no commensurate period"))?;
        spectral_eigen(flow, dual, p, self.n_per_dim, period)
    }

    fn name(&self) -> &'static str {
        "spectral"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::BaseFlow;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    #[test]
    fn differentiation_matrices_are_spectrally_exact() {
        for (n, l) in [(16usize, TAU), (32, 3.0)] {
            let (d1, d2) = fourier_diff_matrices(n, l);
            let base = TAU / l;
            let f: DVector<f64> =
                DVector::from_fn(n, |i, _| (3.0 * base * (i as f64 * l / n as f64)).sin());
            let df = &d1 * &f;
            let ddf = &d2 * &f;
            for i in 0..n {
                let x = i as f64 * l / n as f64;
                assert_abs_diff_eq!(df[i], 3.0 * base * (3.0 * base * x).cos(), epsilon = 1e-9);
                assert_abs_diff_eq!(
                    ddf[i],
                    -(3.0 * base) * (3.0 * base) * (3.0 * base * x).sin(),
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn cn_factors_are_contractive() {
        for dt in [1e-4, 1e-2, 0.5, 10.0] {
            let d = CnDiffusion::new(32, TAU, 1.0, dt);
            for f in d.factors() {
                assert!(f.abs() <= 1.0, "amplification {f} at dt {dt}");
            }
        }
    }

    #[test]
    fn cn_single_mode_matches_closed_form() {
        let n = 32;
        let kappa = 1.0;
        let dt = 0.01;
        let d = CnDiffusion::new(n, TAU, kappa, dt);
        let h = TAU / n as f64;
        // q = 2 + cos(3x) sin(2y): modes (±3, ±2) and the mean
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = 2.0 + (3.0 * (i as f64) * h).cos() * (2.0 * (j as f64) * h).sin();
            }
        }
        let k2 = 9.0 + 4.0;
        let a = 0.5 * kappa * k2 * dt;
        let factor = (1.0 - a) / (1.0 + a);
        let mut got = q.clone();
        d.apply(&mut got);
        for i in 0..n {
            for j in 0..n {
                let expected =
                    2.0 + factor * (3.0 * (i as f64) * h).cos() * (2.0 * (j as f64) * h).sin();
                assert_abs_diff_eq!(got[i * n + j], expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn diffusion_preserves_mass() {
        let mut grid = EulerianGrid::uniform(32, TAU).unwrap();
        // seed an inhomogeneous profile
        let n = grid.n();
        let h = grid.spacing();
        let vals: Vec<f64> = (0..n * n)
            .map(|k| 1.0 + 0.5 * ((k / n) as f64 * h).cos() * ((k % n) as f64 * h).sin())
            .collect();
        grid = EulerianGrid::from_values(n, TAU, vals).unwrap();
        let before = grid.mass();
        let d = CnDiffusion::new(n, TAU, 1.0, 0.05);
        let mut q = grid.values().to_vec();
        d.apply(&mut q);
        let after = pairwise_sum(&q) * h * h;
        assert_abs_diff_eq!(before, after, epsilon = 1e-12);
    }

    #[test]
    fn constant_potential_growth_is_exact_per_step() {
        // zero flow, lambda = 0: c = 1, advection trivial, diffusion
        // mass-neutral, so the log-mass increment is exactly dt.
        let flow = FlowModel::new(BaseFlow::Zero { dim: 2 }, 0.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(0.0, 2, 0).unwrap();
        let mut grid = EulerianGrid::uniform(32, TAU).unwrap();
        let dt = 0.01;
        let solver = SlCnSolver::new(&grid, &flow, &dual, &p, dt).unwrap();
        for _ in 0..5 {
            let inc = solver.step(&mut grid).unwrap();
            assert_abs_diff_eq!(inc, dt, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(grid.mass(), 1.0, epsilon = 1e-12);
        for v in grid.values() {
            assert!(*v >= 0.0);
        }
    }

    #[test]
    fn zero_flow_mu_sl_is_two() {
        let flow = FlowModel::new(BaseFlow::Zero { dim: 2 }, 0.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
        let mut grid = EulerianGrid::uniform(64, TAU).unwrap();
        let r = run_mu_sl(&mut grid, &flow, &dual, &p, 1e-3, 400, 0.5).unwrap();
        assert!((r.mu - 2.0).abs() < 1e-3, "mu {}", r.mu);
    }

    #[test]
    fn shear_constant_potential_mu_matches_for_any_amplitude() {
        let dk = 1.0 / (20.0 * std::f64::consts::PI);
        let xi = crate::field::FieldRealization::sample(
            crate::spectrum::SpectralDensity::K05Exp,
            dk,
            16,
            3,
        )
        .unwrap();
        let p = KppParams::default();
        let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
        for delta in [1.0, 8.0] {
            let flow = FlowModel::new(BaseFlow::Shear2dZeroBase, delta)
                .with_perturbation(1.0, xi.clone())
                .unwrap();
            let period = flow.period().unwrap();
            let mut grid = EulerianGrid::uniform(64, period).unwrap();
            let r = run_mu_sl(&mut grid, &flow, &dual, &p, 2e-3, 300, 0.5).unwrap();
            assert!((r.mu - 2.0).abs() < 2e-2, "mu {} at delta {delta}", r.mu);
        }
    }

    #[test]
    fn spectral_zero_flow_is_constant_eigenvector() {
        let flow = FlowModel::new(BaseFlow::Zero { dim: 2 }, 0.0);
        let p = KppParams::default();
        for lambda in [0.0, 1.0, 2.0] {
            let dual = DualVariable::along_axis(lambda, 2, 0).unwrap();
            let mu = spectral_eigen(&flow, &dual, &p, 8, TAU).unwrap();
            assert_abs_diff_eq!(mu, lambda * lambda + 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn spectral_1d_constant_coefficients() {
        // kappa u'' - 2 kappa lambda u' + (kappa lambda^2 + 1) u has
        // principal eigenvalue kappa lambda^2 + 1 (constant mode).
        let kappa = 1.0;
        let lambda = 1.5;
        let mu = spectral_eigen_1d(
            kappa,
            |_x| -2.0 * kappa * lambda,
            |_x| kappa * lambda * lambda + 1.0,
            32,
            TAU,
        )
        .unwrap();
        assert_abs_diff_eq!(mu, kappa * lambda * lambda + 1.0, epsilon = 1e-9);
    }

    #[test]
    fn spectral_cellular_matches_frozen_reference() {
        // dense-eigendecomposition reference value for delta = 4,
        // lambda = 1, e = (1, 0), kappa = f'(0) = 1, converged in
        // resolution to 13 digits
        let reference = 2.7433503802357;
        let flow = FlowModel::new(BaseFlow::Cellular2d, 4.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
        let mu24 = spectral_eigen(&flow, &dual, &p, 24, TAU).unwrap();
        let mu32 = spectral_eigen(&flow, &dual, &p, 32, TAU).unwrap();
        assert_abs_diff_eq!(mu24, reference, epsilon = 1e-6);
        assert_abs_diff_eq!(mu32, reference, epsilon = 1e-8);
        // resolution refinement agrees to better than 3 significant digits
        assert!((mu24 - mu32).abs() / mu32.abs() < 1e-3);
    }

    #[test]
    fn mu_shifts_exactly_with_reaction_constant() {
        let flow = FlowModel::new(BaseFlow::Cellular2d, 2.0);
        let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
        let p0 = KppParams::new(1.0, 1.0).unwrap();
        let p1 = KppParams::new(1.0, 1.75).unwrap();
        let a = spectral_eigen(&flow, &dual, &p0, 16, TAU).unwrap();
        let b = spectral_eigen(&flow, &dual, &p1, 16, TAU).unwrap();
        assert_abs_diff_eq!(b - a, 0.75, epsilon = 1e-6);

        let mut g0 = EulerianGrid::uniform(32, TAU).unwrap();
        let mut g1 = EulerianGrid::uniform(32, TAU).unwrap();
        let r0 = run_mu_sl(&mut g0, &flow, &dual, &p0, 2e-3, 200, 0.5).unwrap();
        let r1 = run_mu_sl(&mut g1, &flow, &dual, &p1, 2e-3, 200, 0.5).unwrap();
        assert_abs_diff_eq!(r1.mu - r0.mu, 0.75, epsilon = 1e-6);
    }

    #[test]
    fn departure_bound_is_enforced() {
        let flow = FlowModel::new(BaseFlow::Cellular2d, 1000.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
        let grid = EulerianGrid::uniform(16, TAU).unwrap();
        assert!(SlCnSolver::new(&grid, &flow, &dual, &p, 0.1).is_err());
    }
}
