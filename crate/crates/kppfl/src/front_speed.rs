//! Front-speed minimization over the dual variable.
//!
//! The minimal front speed in direction z is
//!
//! ```text
//! c*(z) = inf over (z, lambda e) > 0 of mu(lambda e) / (z, lambda e)
//! ```
//!
//! Minimization is a grid search: lambda over a (log-spaced) grid with an
//! optional local refinement pass, e either fixed to z or sampled around
//! it. Every (lambda, e, mu, ratio) sample is kept so the minimum can be
//! audited.

use crate::error::{Error, Result};
use crate::flow::{DualVariable, FlowModel, KppParams};
use crate::ipm::{self, DomainSpec, IpmParams};
use crate::stats::ols;

/// Anything that can estimate the principal eigenvalue mu(lambda e).
pub trait MuEstimator {
    fn mu(&self, flow: &FlowModel, dual: &DualVariable, p: &KppParams) -> Result<f64>;
    /// Short identifier for metadata and tables.
    fn name(&self) -> &'static str;
}

/// Particle-method estimator. The readout averages the trailing
/// `tail_fraction` of per-generation estimates (0 reads the final
/// generation only).
#[derive(Debug, Clone)]
pub struct IpmMuEstimator {
    pub params: IpmParams,
    pub tail_fraction: f64,
}

impl IpmMuEstimator {
    pub fn new(params: IpmParams) -> Self {
        IpmMuEstimator { params, tail_fraction: 0.25 }
    }
}

impl MuEstimator for IpmMuEstimator {
    fn mu(&self, flow: &FlowModel, dual: &DualVariable, p: &KppParams) -> Result<f64> {
        let period = flow.period().ok_or_else(|| {
            Error::contract("flow has no commensurate period; torus run impossible")
        })?;
        let domain = if self.params.dynamic_shift {
            DomainSpec::unbounded(flow.dim())
        } else {
            DomainSpec::torus(vec![period; flow.dim()])?
        };
        let (trace, _) = ipm::run(flow, dual, p, &self.params, &domain)?;
        Ok(trace.mu_tail_mean(self.tail_fraction))
    }

    fn name(&self) -> &'static str {
        "ipm"
    }
}

/// Search policy for the dual direction e.
#[derive(Debug, Clone, PartialEq)]
pub enum ESearch {
    /// e = z; the optimizer for random flows.
    FixedToZ,
    /// Directions within `half_angle` radians of z; suited to flows with
    /// ordered streamlines.
    LocalCone { half_angle: f64, n_samples: usize },
    /// Directions spread over the admissible half-space (z, e) > 0.
    GlobalGrid { n_samples: usize },
}

impl Default for ESearch {
    fn default() -> Self {
        ESearch::FixedToZ
    }
}

/// One evaluated sample of the search.
#[derive(Debug, Clone)]
pub struct SpeedSample {
    pub lambda: f64,
    pub e: Vec<f64>,
    pub mu: f64,
    pub ratio: f64,
}

/// The minimized speed with its optimizer and the full sample table.
#[derive(Debug, Clone)]
pub struct FrontSpeedResult {
    pub c_star: f64,
    pub lambda_opt: f64,
    pub e_opt: Vec<f64>,
    pub mu_at_opt: f64,
    pub samples: Vec<SpeedSample>,
}

/// Query: propagation direction, lambda grid, e policy, refinement
/// rounds around the running minimizer.
#[derive(Debug, Clone)]
pub struct FrontSpeedQuery {
    pub z: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub e_search: ESearch,
    pub refine_rounds: usize,
}

impl FrontSpeedQuery {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::contract("z must be a unit vector"));
        }
        Ok(FrontSpeedQuery {
            z,
            lambda_grid: default_lambda_grid(),
            e_search: ESearch::default(),
            refine_rounds: 1,
        })
    }

    pub fn with_lambda_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn with_e_search(mut self, e_search: ESearch) -> Self {
        self.e_search = e_search;
        self
    }

    pub fn with_refine_rounds(mut self, rounds: usize) -> Self {
        self.refine_rounds = rounds;
        self
    }
}

/// 16 logarithmically spaced lambdas on [1/8, 8].
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(0.125, 8.0, 16)
}

/// `n` log-spaced points on [lo, hi], inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direction samples for the configured search, filtered to the
/// admissible half-space (z, e) > 0.
fn e_samples(z: &[f64], search: &ESearch) -> Result<Vec<Vec<f64>>> {
    let dim = z.len();
    let raw: Vec<Vec<f64>> = match search {
        ESearch::FixedToZ => vec![z.to_vec()],
        ESearch::LocalCone { half_angle, n_samples } => {
            cone_directions(z, *half_angle, (*n_samples).max(1))
        }
        ESearch::GlobalGrid { n_samples } => {
            cone_directions(z, std::f64::consts::FRAC_PI_2 * 0.98, (*n_samples).max(1))
        }
    };
    let admissible: Vec<Vec<f64>> = raw.into_iter().filter(|e| dot(z, e) > 0.0).collect();
    if admissible.is_empty() {
        return Err(Error::contract("no admissible dual directions with (z, e) > 0"));
    }
    debug_assert!(admissible.iter().all(|e| e.len() == dim));
    Ok(admissible)
}

/// z itself plus directions tilted by up to `half_angle`. In 2D the tilts
/// are symmetric in-plane rotations; in 3D they form a ring at the cone
/// angle.
fn cone_directions(z: &[f64], half_angle: f64, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![z.to_vec()];
    if n <= 1 || half_angle <= 0.0 {
        return out;
    }
    match z.len() {
        2 => {
            let m = n - 1;
            for i in 0..m {
                // spread angles over [-half_angle, half_angle], skipping 0
                let a = -half_angle + 2.0 * half_angle * (i as f64 + 0.5) / m as f64;
                let (s, c) = a.sin_cos();
                out.push(vec![c * z[0] - s * z[1], s * z[0] + c * z[1]]);
            }
        }
        3 => {
            // orthonormal pair spanning the plane normal to z
            let helper = if z[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let mut u = [
                z[1] * helper[2] - z[2] * helper[1],
                z[2] * helper[0] - z[0] * helper[2],
                z[0] * helper[1] - z[1] * helper[0],
            ];
            let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            u.iter_mut().for_each(|c| *c /= un);
            let w = [
                z[1] * u[2] - z[2] * u[1],
                z[2] * u[0] - z[0] * u[2],
                z[0] * u[1] - z[1] * u[0],
            ];
            let (sa, ca) = half_angle.sin_cos();
            let m = n - 1;
            for i in 0..m {
                let phi = std::f64::consts::TAU * i as f64 / m as f64;
                let (sp, cp) = phi.sin_cos();
                let e: Vec<f64> = (0..3)
                    .map(|d| ca * z[d] + sa * (cp * u[d] + sp * w[d]))
                    .collect();
                out.push(e);
            }
        }
        _ => {}
    }
    // renormalize against accumulated rounding
    for e in out.iter_mut() {
        let norm = e.iter().map(|c| c * c).sum::<f64>().sqrt();
        e.iter_mut().for_each(|c| *c /= norm);
    }
    out
}

/// Evaluates mu over the (lambda, e) grid and returns the minimizing
/// ratio together with the full sample table. Ties break toward the
/// smallest lambda.
pub fn compute_front_speed(
    query: &FrontSpeedQuery,
    flow: &FlowModel,
    p: &KppParams,
    estimator: &dyn MuEstimator,
) -> Result<FrontSpeedResult> {
    if query.z.len() != flow.dim() {
        return Err(Error::contract("z dimension must match the flow"));
    }
    if query.lambda_grid.is_empty() {
        return Err(Error::contract("lambda grid must be nonempty"));
    }
    if query.lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::contract("lambda grid must be positive"));
    }
    let directions = e_samples(&query.z, &query.e_search)?;
    let mut grid = query.lambda_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let mut samples: Vec<SpeedSample> = Vec::new();
    let evaluate = |lambda: f64, samples: &mut Vec<SpeedSample>| -> Result<()> {
        for e in &directions {
            let dual = DualVariable::new(lambda, e.clone())?;
            let mu = estimator.mu(flow, &dual, p).map_err(|err| {
                Error::contract(format!(
                    "estimator {} failed at lambda = {lambda}, e = {e:?}: {err}",
                    estimator.name()
                ))
            })?;
            let ratio = mu / (lambda * dot(&query.z, e));
            samples.push(SpeedSample { lambda, e: e.clone(), mu, ratio });
        }
        Ok(())
    };

    for &lambda in &grid {
        evaluate(lambda, &mut samples)?;
    }

    for _ in 0..query.refine_rounds {
        let best = best_sample(&samples);
        let lam = best.lambda;
        let idx = grid.iter().position(|&l| l == lam).unwrap_or(0);
        let lo = if idx > 0 { grid[idx - 1] } else { lam / 2.0 };
        let hi = if idx + 1 < grid.len() { grid[idx + 1] } else { lam * 2.0 };
        // 3x finer local grid across the bracketing interval
        let fine = log_grid(lo, hi, 7);
        let mut added = Vec::new();
        for lambda in fine {
            if grid.iter().all(|&g| (g - lambda).abs() > 1e-12 * lambda) {
                evaluate(lambda, &mut samples)?;
                added.push(lambda);
            }
        }
        grid.extend(added);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    let best = best_sample(&samples).clone();
    Ok(FrontSpeedResult {
        c_star: best.ratio,
        lambda_opt: best.lambda,
        e_opt: best.e,
        mu_at_opt: best.mu,
        samples,
    })
}

fn best_sample(samples: &[SpeedSample]) -> &SpeedSample {
    samples
        .iter()
        .min_by(|a, b| {
            a.ratio
                .partial_cmp(&b.ratio)
                .unwrap()
                .then(a.lambda.partial_cmp(&b.lambda).unwrap())
        })
        .expect("at least one sample")
}

/// c*(delta) along an amplitude sweep. `flow_for` rebuilds the flow at
/// each amplitude so one field realization is reused across the sweep.
pub fn sweep_amplitude(
    deltas: &[f64],
    query: &FrontSpeedQuery,
    p: &KppParams,
    mut flow_for: impl FnMut(f64) -> Result<FlowModel>,
    estimator: &dyn MuEstimator,
) -> Result<Vec<(f64, FrontSpeedResult)>> {
    if deltas.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::contract("sweep amplitudes must be nonnegative"));
    }
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let flow = flow_for(delta)?;
        let result = compute_front_speed(query, &flow, p, estimator)?;
        out.push((delta, result));
    }
    Ok(out)
}

/// OLS fit of log c* against log delta: (slope, intercept, stderr).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::contract("log-log fit needs at least two points"));
    }
    if points.iter().any(|&(d, c)| !(d > 0.0) || !(c > 0.0)) {
        return Err(Error::contract("log-log fit needs positive coordinates"));
    }
    let xs: Vec<f64> = points.iter().map(|&(d, _)| d.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, c)| c.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok((fit.slope, fit.intercept, fit.slope_stderr))
}
