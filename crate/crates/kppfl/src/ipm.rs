//! Genetic interacting particle system for the principal eigenvalue.
//!
//! One run evolves N particles through M generations of H
//! mutation/selection steps. A mutation is an Euler-Maruyama step of the
//! drift-diffusion SDE; selection resamples the ensemble from the
//! multinomial distribution given by the Feynman-Kac fitness
//! exp(c(x) dt). The log of the mean fitness per step, divided by dt, is
//! the particle fitness growth rate (PFGR); its generation average
//! estimates the principal eigenvalue mu, read from the final
//! generation.
//!
//! All randomness is addressed by (seed, generation, mutation, particle)
//! counters, so traces are bit-identical for any worker-thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{
    drift_into, potential_from_velocity, DualVariable, FlowModel, KppParams, MAX_DIM,
};
use crate::rng::{CounterStream, Stream};

/// Domain the particles move on.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    /// Periodic box [0, L_d) per dimension; positions are kept inside by
    /// coordinate-wise modulo.
    Torus { period: Vec<f64> },
    /// Free motion on R^d.
    Unbounded { dim: usize },
}

impl DomainSpec {
    pub fn torus(period: Vec<f64>) -> Result<Self> {
        if period.is_empty() || period.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::contract("torus periods must be positive"));
        }
        Ok(DomainSpec::Torus { period })
    }

    pub fn unbounded(dim: usize) -> Self {
        DomainSpec::Unbounded { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Torus { period } => period.len(),
            DomainSpec::Unbounded { dim } => *dim,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, DomainSpec::Torus { .. })
    }
}

/// Initial particle distribution m_0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialDistribution {
    /// Uniform over the reference cell.
    #[default]
    UniformOnCell,
    /// Standard Gaussian centered in the reference cell.
    Gaussian,
}

/// Selection scheme. `None` keeps the raw Feynman-Kac averaging and is a
/// diagnostic mode: for constant potentials it reproduces the selected
/// dynamics exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    #[default]
    Multinomial,
    None,
}

/// Engine parameters: population size N, generations M, mutations per
/// generation H, time step dt with generation span T = H dt.
#[derive(Debug, Clone)]
pub struct IpmParams {
    pub n_particles: usize,
    pub n_generations: usize,
    pub n_mutations: usize,
    pub dt: f64,
    pub seed: u64,
    pub dynamic_shift: bool,
    pub init: InitialDistribution,
    pub resampling: Resampling,
}

impl IpmParams {
    pub fn new(n_particles: usize, n_generations: usize, n_mutations: usize, dt: f64, seed: u64) -> Self {
        IpmParams {
            n_particles,
            n_generations,
            n_mutations,
            dt,
            seed,
            dynamic_shift: false,
            init: InitialDistribution::default(),
            resampling: Resampling::default(),
        }
    }

    /// Generation life span T = H dt.
    pub fn generation_span(&self) -> f64 {
        self.n_mutations as f64 * self.dt
    }

    fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::contract("need at least 2 particles"));
        }
        if self.n_generations < 1 {
            return Err(Error::contract("need at least 1 generation"));
        }
        if !(self.dt > 0.0) || self.n_mutations == 0 {
            return Err(Error::contract("generation span T = H dt must be positive"));
        }
        Ok(())
    }
}

/// N particle positions in d dimensions, flat row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    dim: usize,
    pub generation: usize,
    pub mutation: usize,
    domain: DomainSpec,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn position(&self, particle: usize) -> &[f64] {
        &self.positions[particle * self.dim..(particle + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Builds an ensemble from raw positions (used by tests and
    /// deserialization).
    pub fn from_positions(positions: Vec<f64>, dim: usize, domain: DomainSpec) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM || positions.len() % dim != 0 {
            return Err(Error::contract("positions length must be a multiple of dim"));
        }
        Ok(ParticleEnsemble { positions, dim, generation: 0, mutation: 0, domain })
    }
}

/// Trace of per-mutation PFGR values and per-generation eigenvalue
/// estimates.
#[derive(Debug, Clone)]
pub struct MuTrace {
    pub n_mutations: usize,
    /// Row-major (generation, mutation) PFGR values E_{j,i}.
    pub per_mutation_pfgr: Vec<f64>,
    /// mu_dt^j = mean over the generation's H PFGR values.
    pub per_generation_mu: Vec<f64>,
}

impl MuTrace {
    /// The headline estimate: the final generation's mu.
    pub fn mu_final(&self) -> f64 {
        *self.per_generation_mu.last().expect("at least one generation")
    }

    /// Mean of mu over the trailing `fraction` of generations (at least
    /// one); a lower-variance readout for callers that want it.
    pub fn mu_tail_mean(&self, fraction: f64) -> f64 {
        let m = self.per_generation_mu.len();
        let k = ((m as f64 * fraction).ceil() as usize).clamp(1, m);
        let tail = &self.per_generation_mu[m - k..];
        tail.iter().sum::<f64>() / k as f64
    }

    pub fn pfgr(&self, generation: usize, mutation: usize) -> f64 {
        self.per_mutation_pfgr[generation * self.n_mutations + mutation]
    }

    /// OLS slope of mu over the trailing quarter of generations together
    /// with its standard error; a stationarity diagnostic.
    pub fn stationarity_slope(&self) -> (f64, f64) {
        let m = self.per_generation_mu.len();
        let k = (m / 4).max(2).min(m);
        let ys = &self.per_generation_mu[m - k..];
        let xs: Vec<f64> = (0..k).map(|i| i as f64).collect();
        crate::stats::ols_line(&xs, ys)
    }
}

/// Draws N i.i.d. particles from the initial measure over the reference
/// cell (per-dimension lengths `cell`).
pub fn init_ensemble(
    domain: &DomainSpec,
    init: InitialDistribution,
    n: usize,
    cell: &[f64],
    seed: u64,
) -> Result<ParticleEnsemble> {
    if n < 2 {
        return Err(Error::contract("need at least 2 particles"));
    }
    let dim = domain.dim();
    if cell.len() != dim || dim > MAX_DIM {
        return Err(Error::contract("cell lengths must match the domain dimension"));
    }
    let stream = CounterStream::new(seed, Stream::InitEnsemble);
    let mut positions = vec![0.0; n * dim];
    for l in 0..n {
        let row = &mut positions[l * dim..(l + 1) * dim];
        match init {
            InitialDistribution::UniformOnCell => {
                let u = stream.uniform4([l as u64, 0, 0, 0]);
                for d in 0..dim {
                    row[d] = u[d] * cell[d];
                }
            }
            InitialDistribution::Gaussian => {
                let z = stream.normal4([l as u64, 0, 0, 0]);
                for d in 0..dim {
                    row[d] = 0.5 * cell[d] + z[d];
                }
            }
        }
    }
    let mut ens = ParticleEnsemble { positions, dim, generation: 0, mutation: 0, domain: domain.clone() };
    restrict(&mut ens);
    Ok(ens)
}

/// One Euler-Maruyama step for the whole ensemble: each particle moves by
/// b(x) dt + sqrt(2 kappa dt) w with w a standard normal vector drawn
/// from the (seed, generation, mutation, particle) stream.
pub fn mutation_step(
    ens: &ParticleEnsemble,
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    dt: f64,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let mut out = ens.clone();
    let noise = CounterStream::new(seed, Stream::MutationNoise);
    step_positions(
        &ens.positions,
        &mut out.positions,
        ens.dim,
        flow,
        dual,
        p,
        dt,
        (2.0 * p.kappa * dt).sqrt(),
        &noise,
        ens.generation,
        ens.mutation,
        None,
    )?;
    out.mutation = ens.mutation + 1;
    Ok(out)
}

/// Advances `src` positions into `dst`. When `vel_cache` is provided it
/// holds v(x) for the current positions and is used instead of fresh
/// velocity evaluations.
#[allow(clippy::too_many_arguments)]
fn step_positions(
    src: &[f64],
    dst: &mut [f64],
    dim: usize,
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    dt: f64,
    noise_amp: f64,
    noise: &CounterStream,
    generation: usize,
    mutation: usize,
    vel_cache: Option<&[f64]>,
) -> Result<()> {
    let shift = -2.0 * p.kappa * dual.lambda();
    let e = dual.e();
    let blow_up = dst
        .par_chunks_mut(dim)
        .with_min_len(2048)
        .enumerate()
        .map(|(l, row)| {
            let x = &src[l * dim..(l + 1) * dim];
            let mut b = [0.0; MAX_DIM];
            match vel_cache {
                Some(cache) => {
                    b[..dim].copy_from_slice(&cache[l * dim..(l + 1) * dim]);
                    for d in 0..dim {
                        b[d] += shift * e[d];
                    }
                }
                None => drift_into(flow, dual, p, x, &mut b[..dim]),
            }
            let z = noise.normal4([generation as u64, mutation as u64, l as u64, 0]);
            let mut finite = true;
            for d in 0..dim {
                row[d] = x[d] + b[d] * dt + noise_amp * z[d];
                finite &= row[d].is_finite();
            }
            if finite {
                usize::MAX
            } else {
                l
            }
        })
        .min()
        .unwrap_or(usize::MAX);
    if blow_up != usize::MAX {
        return Err(Error::BlowUp { particle: blow_up, generation, mutation });
    }
    Ok(())
}

/// Coordinate-wise modulo onto the torus cell; a no-op on unbounded
/// domains.
pub fn restrict(ens: &mut ParticleEnsemble) {
    let dim = ens.dim;
    if let DomainSpec::Torus { period } = &ens.domain {
        let period = period.clone();
        ens.positions
            .par_chunks_mut(dim)
            .with_min_len(4096)
            .for_each(|row| {
                for d in 0..dim {
                    row[d] = row[d].rem_euclid(period[d]);
                    // rem_euclid can return the period itself when the
                    // argument is a tiny negative number
                    if row[d] >= period[d] {
                        row[d] = 0.0;
                    }
                }
            });
    }
}

/// Fitness weights and the per-mutation PFGR.
///
/// Fitness is exp(c(x) dt), normalized with a max-shift so large
/// potentials cannot overflow:
/// pfgr = log(mean_l exp(c_l dt)) / dt.
pub fn fitness_weights(
    ens_pre: &ParticleEnsemble,
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    dt: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = ens_pre.len();
    let dim = ens_pre.dim;
    let mut c = vec![0.0; n];
    c.par_iter_mut()
        .with_min_len(2048)
        .enumerate()
        .for_each(|(l, cl)| {
            let x = &ens_pre.positions[l * dim..(l + 1) * dim];
            let mut v = [0.0; MAX_DIM];
            flow.velocity_into(x, &mut v[..dim]);
            *cl = potential_from_velocity(&v[..dim], dual, p);
        });
    fitness_weights_from_potentials(&c, dt)
}

/// Log-sum-exp normalization of exp(c dt) potentials.
pub fn fitness_weights_from_potentials(c: &[f64], dt: f64) -> Result<(Vec<f64>, f64)> {
    if !(dt > 0.0) {
        return Err(Error::contract("dt must be positive"));
    }
    let n = c.len();
    let m = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * dt;
    if !m.is_finite() {
        return Err(Error::Degeneracy("non-finite potential in fitness evaluation".into()));
    }
    let mut weights = vec![0.0; n];
    let mut sum = 0.0;
    for (w, cl) in weights.iter_mut().zip(c) {
        *w = (cl * dt - m).exp();
        sum += *w;
    }
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Degeneracy(format!("fitness sum {sum} cannot be normalized")));
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    let pfgr = (m + (sum / n as f64).ln()) / dt;
    Ok((weights, pfgr))
}

/// Multinomial selection: N offspring drawn i.i.d. from the categorical
/// distribution over the pre-selection positions.
pub fn resample_multinomial(
    ens_pre: &ParticleEnsemble,
    weights: &[f64],
    seed: u64,
    generation: usize,
    mutation: usize,
) -> Result<ParticleEnsemble> {
    let n = ens_pre.len();
    validate_weights(weights, n)?;
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cum.push(acc);
    }
    let stream = CounterStream::new(seed, Stream::Selection);
    let mut out = ens_pre.clone();
    let dim = ens_pre.dim;
    out.positions
        .par_chunks_mut(dim)
        .with_min_len(4096)
        .enumerate()
        .for_each(|(l, row)| {
            let u = stream.uniform([generation as u64, mutation as u64, l as u64, 0]) * acc;
            let idx = cum.partition_point(|&cw| cw <= u).min(n - 1);
            row.copy_from_slice(&ens_pre.positions[idx * dim..(idx + 1) * dim]);
        });
    Ok(out)
}

fn validate_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::contract("weight array length must equal the population size"));
    }
    let mut sum = 0.0;
    for &w in weights {
        if !(w >= 0.0) {
            return Err(Error::contract(format!("negative or NaN weight {w}")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("weights sum to {sum}, expected 1 within 1e-9")));
    }
    Ok(())
}

/// Recenters the ensemble by +2 kappa lambda T e, cancelling the mean
/// drift accumulated over one generation. Only valid on unbounded
/// domains.
pub fn dynamic_shift(
    ens: &mut ParticleEnsemble,
    dual: &DualVariable,
    p: &KppParams,
    span: f64,
) -> Result<()> {
    if ens.domain.is_torus() {
        return Err(Error::contract("dynamic shift applies to unbounded domains only"));
    }
    let step = 2.0 * p.kappa * dual.lambda() * span;
    let dim = ens.dim;
    let e = dual.e();
    for row in ens.positions.chunks_mut(dim) {
        for d in 0..dim {
            row[d] += step * e[d];
        }
    }
    Ok(())
}

/// Runs M generations of H mutation/selection steps and returns the PFGR
/// trace plus the final ensemble.
pub fn run(
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    ipm: &IpmParams,
    domain: &DomainSpec,
) -> Result<(MuTrace, ParticleEnsemble)> {
    run_with_observer(flow, dual, p, ipm, domain, |_, _, _| {})
}

/// Like [`run`], invoking `observer(generation_index, time, ensemble)`
/// after every completed generation (post shift).
pub fn run_with_observer(
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    ipm: &IpmParams,
    domain: &DomainSpec,
    mut observer: impl FnMut(usize, f64, &ParticleEnsemble),
) -> Result<(MuTrace, ParticleEnsemble)> {
    ipm.validate()?;
    let dim = flow.dim();
    if dual.dim() != dim || domain.dim() != dim {
        return Err(Error::contract(format!(
            "dimension mismatch: flow {dim}, dual {}, domain {}",
            dual.dim(),
            domain.dim()
        )));
    }
    if ipm.dynamic_shift && domain.is_torus() {
        return Err(Error::contract("dynamic shift requires an unbounded domain"));
    }

    let cell: Vec<f64> = match domain {
        DomainSpec::Torus { period } => period.clone(),
        DomainSpec::Unbounded { .. } => {
            let l = flow.period().unwrap_or(std::f64::consts::TAU);
            vec![l; dim]
        }
    };
    let mut ens = init_ensemble(domain, ipm.init, ipm.n_particles, &cell, ipm.seed)?;

    let n = ipm.n_particles;
    let noise = CounterStream::new(ipm.seed, Stream::MutationNoise);
    let select = CounterStream::new(ipm.seed, Stream::Selection);
    let noise_amp = (2.0 * p.kappa * ipm.dt).sqrt();
    let span = ipm.generation_span();

    // working buffers
    let mut pre = vec![0.0; n * dim]; // xi~, pre-selection positions
    let mut vel = vec![0.0; n * dim]; // v at current positions
    let mut vel_pre = vec![0.0; n * dim]; // v at pre-selection positions
    let mut c = vec![0.0; n];
    let mut cum = vec![0.0; n];
    fill_velocities(flow, &ens.positions, &mut vel, dim);

    let mut per_mutation = Vec::with_capacity(ipm.n_generations * ipm.n_mutations);
    let mut per_generation = Vec::with_capacity(ipm.n_generations);

    for j in 0..ipm.n_generations {
        let mut gen_sum = 0.0;
        for i in 0..ipm.n_mutations {
            // mutation: xi~ = xi + b dt + sqrt(2 kappa dt) w
            step_positions(
                &ens.positions,
                &mut pre,
                dim,
                flow,
                dual,
                p,
                ipm.dt,
                noise_amp,
                &noise,
                j,
                i,
                Some(&vel),
            )?;
            if domain.is_torus() {
                restrict_slice(&mut pre, dim, domain);
            }
            // fitness at xi~ (velocities kept for the next drift)
            vel_pre
                .par_chunks_mut(dim)
                .with_min_len(2048)
                .zip(c.par_iter_mut())
                .enumerate()
                .for_each(|(l, (vrow, cl))| {
                    flow.velocity_into(&pre[l * dim..(l + 1) * dim], vrow);
                    *cl = potential_from_velocity(vrow, dual, p);
                });
            let (pfgr, total) = pfgr_and_cumulative(&c, ipm.dt, &mut cum)?;
            per_mutation.push(pfgr);
            gen_sum += pfgr;

            match ipm.resampling {
                Resampling::Multinomial => {
                    // selection: copy sampled rows of positions and velocities
                    ens.positions
                        .par_chunks_mut(dim)
                        .with_min_len(4096)
                        .zip(vel.par_chunks_mut(dim))
                        .enumerate()
                        .for_each(|(l, (prow, vrow))| {
                            let u = select.uniform([j as u64, i as u64, l as u64, 0]) * total;
                            let idx = cum.partition_point(|&cw| cw <= u).min(n - 1);
                            prow.copy_from_slice(&pre[idx * dim..(idx + 1) * dim]);
                            vrow.copy_from_slice(&vel_pre[idx * dim..(idx + 1) * dim]);
                        });
                }
                Resampling::None => {
                    ens.positions.copy_from_slice(&pre);
                    vel.copy_from_slice(&vel_pre);
                }
            }
            ens.mutation = i + 1;
        }
        per_generation.push(gen_sum / ipm.n_mutations as f64);
        ens.generation = j + 1;
        ens.mutation = 0;
        if ipm.dynamic_shift {
            dynamic_shift(&mut ens, dual, p, span)?;
            fill_velocities(flow, &ens.positions, &mut vel, dim);
        }
        observer(j, (j + 1) as f64 * span, &ens);
    }

    let trace = MuTrace {
        n_mutations: ipm.n_mutations,
        per_mutation_pfgr: per_mutation,
        per_generation_mu: per_generation,
    };
    Ok((trace, ens))
}

fn fill_velocities(flow: &FlowModel, positions: &[f64], vel: &mut [f64], dim: usize) {
    vel.par_chunks_mut(dim)
        .with_min_len(2048)
        .enumerate()
        .for_each(|(l, row)| flow.velocity_into(&positions[l * dim..(l + 1) * dim], row));
}

fn restrict_slice(positions: &mut [f64], dim: usize, domain: &DomainSpec) {
    if let DomainSpec::Torus { period } = domain {
        positions
            .par_chunks_mut(dim)
            .with_min_len(4096)
            .for_each(|row| {
                for d in 0..dim {
                    row[d] = row[d].rem_euclid(period[d]);
                    if row[d] >= period[d] {
                        row[d] = 0.0;
                    }
                }
            });
    }
}

/// PFGR via log-sum-exp; also fills the cumulative (unnormalized)
/// fitness array used by selection and returns its total.
fn pfgr_and_cumulative(c: &[f64], dt: f64, cum: &mut [f64]) -> Result<(f64, f64)> {
    let n = c.len();
    let m = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * dt;
    if !m.is_finite() {
        return Err(Error::Degeneracy("non-finite potential in fitness evaluation".into()));
    }
    let mut acc = 0.0;
    for l in 0..n {
        acc += (c[l] * dt - m).exp();
        cum[l] = acc;
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(Error::Degeneracy(format!("fitness sum {acc} cannot be normalized")));
    }
    let pfgr = (m + (acc / n as f64).ln()) / dt;
    Ok((pfgr, acc))
}
