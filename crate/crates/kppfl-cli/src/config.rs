//! Run configuration document.
//!
//! One JSON file drives every subcommand. Unknown keys are rejected and
//! numeric fields are range-checked before any computation starts. A
//! single master seed derives every subsystem seed; per-subsystem seeds
//! are never set individually.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use kppfl::eulerian::{SlCnConfig, SlCnMuEstimator, SpectralMuEstimator};
use kppfl::front_speed::{ESearch, FrontSpeedQuery, IpmMuEstimator, MuEstimator};
use kppfl::ipm::{DomainSpec, InitialDistribution, IpmParams, Resampling};
use kppfl::rng::derive_seed;
use kppfl::{BaseFlow, DualVariable, FieldRealization, FlowModel, KppParams, SpectralDensity};

/// Seed-derivation slots under the master seed.
pub mod seed_slot {
    /// Field realization for sweep realization index r: FIELD + r.
    pub const FIELD: u64 = 100;
    /// Particle engine for sweep realization index r: ENGINE + r.
    pub const ENGINE: u64 = 200;
    /// Base points of empirical correlation estimates.
    pub const CORRELATION: u64 = 300;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub flow: FlowConfig,
    #[serde(default)]
    pub kpp: KppConfig,
    #[serde(default)]
    pub dual: Option<DualConfig>,
    #[serde(default)]
    pub ipm: Option<IpmConfig>,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub front_speed: Option<FrontSpeedConfig>,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub stats: Option<StatsConfig>,
    #[serde(default)]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// cellular2d | shear2d | abc3d | cellular3d | zero2d | zero3d
    pub base: String,
    pub delta: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Spectrum preset name, e.g. "k05exp".
    pub spectrum: String,
    pub delta_k: f64,
    pub n_f: usize,
    #[serde(default)]
    pub component: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KppConfig {
    pub kappa: f64,
    pub f_prime0: f64,
}

impl Default for KppConfig {
    fn default() -> Self {
        KppConfig { kappa: 1.0, f_prime0: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualConfig {
    pub lambda: f64,
    pub e: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpmConfig {
    pub n_particles: usize,
    pub n_generations: usize,
    pub n_mutations: usize,
    pub dt: f64,
    #[serde(default)]
    pub dynamic_shift: bool,
    #[serde(default)]
    pub init: Option<String>,
    #[serde(default)]
    pub resampling: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// torus | unbounded
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontSpeedConfig {
    pub z: Vec<f64>,
    pub deltas: Vec<f64>,
    /// ipm | sl_cn | spectral
    pub estimator: String,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_refine_rounds: Option<usize>,
    #[serde(default)]
    pub e_search: Option<ESearchConfig>,
    #[serde(default)]
    pub n_realizations: Option<usize>,
    /// Fraction of trailing generations averaged for the IPM readout.
    #[serde(default)]
    pub tail_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ESearchConfig {
    /// fixed_to_z | local_cone | global_grid
    pub kind: String,
    #[serde(default)]
    pub half_angle_deg: Option<f64>,
    #[serde(default)]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Any of: sl_cn, spectral.
    pub methods: Vec<String>,
    pub n_per_dim: usize,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub spectral_n: Option<usize>,
    #[serde(default)]
    pub dump_increments: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    pub n_bins: usize,
    pub range: (f64, f64),
    #[serde(default)]
    pub exponent_tail: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Separation grid for the correlation table.
    pub r_max: f64,
    pub n_r: usize,
    #[serde(default)]
    pub n_seeds_empirical: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub snapshot_wrap: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let config: RunConfig = serde_json::from_str(text).context("config does not match the schema")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.flow.delta >= 0.0) || !self.flow.delta.is_finite() {
            bail!("flow.delta must be a finite nonnegative number");
        }
        if !self.flow.epsilon.is_finite() {
            bail!("flow.epsilon must be finite");
        }
        base_flow(&self.flow.base)?;
        if let Some(pert) = &self.flow.perturbation {
            SpectralDensity::from_name(&pert.spectrum)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            if !(pert.delta_k > 0.0) {
                bail!("perturbation.delta_k must be positive");
            }
        } else if self.flow.epsilon != 0.0 || self.flow.base == "shear2d" {
            bail!("flow '{}' with epsilon {} needs a perturbation block", self.flow.base, self.flow.epsilon);
        }
        if !(self.kpp.kappa > 0.0) {
            bail!("kpp.kappa must be positive");
        }
        if let Some(ipm) = &self.ipm {
            if ipm.n_particles < 2 {
                bail!("ipm.n_particles must be at least 2");
            }
            if ipm.n_generations < 1 || ipm.n_mutations < 1 {
                bail!("ipm.n_generations and ipm.n_mutations must be at least 1");
            }
            if !(ipm.dt > 0.0) {
                bail!("ipm.dt must be positive");
            }
            if let Some(init) = &ipm.init {
                if init != "uniform_on_cell" && init != "gaussian" {
                    bail!("ipm.init must be uniform_on_cell or gaussian");
                }
            }
            if let Some(r) = &ipm.resampling {
                if r != "multinomial" && r != "none" {
                    bail!("ipm.resampling must be multinomial or none");
                }
            }
        }
        if let Some(domain) = &self.domain {
            if domain.kind != "torus" && domain.kind != "unbounded" {
                bail!("domain.kind must be torus or unbounded");
            }
        }
        if let Some(dual) = &self.dual {
            let norm: f64 = dual.e.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                bail!("dual.e must be a unit vector");
            }
        }
        if let Some(fs) = &self.front_speed {
            if fs.deltas.is_empty() || fs.deltas.iter().any(|&d| !(d >= 0.0)) {
                bail!("front_speed.deltas must be nonnegative and nonempty");
            }
            if let Some(grid) = &fs.lambda_grid {
                if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0)) {
                    bail!("front_speed.lambda_grid must be positive and nonempty");
                }
            }
            if fs.estimator != "ipm" && fs.estimator != "sl_cn" && fs.estimator != "spectral" {
                bail!("front_speed.estimator must be ipm, sl_cn or spectral");
            }
        }
        if let Some(reference) = &self.reference {
            for m in &reference.methods {
                if m != "sl_cn" && m != "spectral" {
                    bail!("reference.methods entries must be sl_cn or spectral");
                }
            }
            if !(reference.dt > 0.0) || reference.n_steps == 0 {
                bail!("reference needs a positive dt and step count");
            }
        }
        if let Some(stats) = &self.stats {
            if stats.n_bins == 0 {
                bail!("stats.n_bins must be at least 1");
            }
            if !(stats.range.1 > stats.range.0) {
                bail!("stats.range must be increasing");
            }
        }
        if let Some(field) = &self.field {
            if field.n_r == 0 || !(field.r_max > 0.0) {
                bail!("field.r_max and field.n_r must be positive");
            }
        }
        Ok(())
    }

    /// Spatial dimension implied by the flow base.
    pub fn dim(&self) -> anyhow::Result<usize> {
        Ok(base_flow(&self.flow.base)?.dim())
    }

    /// Builds the flow for amplitude `delta` and sweep realization `r`
    /// under master seed `seed`.
    pub fn build_flow_at(&self, delta: f64, realization: u64, seed: u64) -> anyhow::Result<FlowModel> {
        let base = base_flow(&self.flow.base)?;
        let mut flow = FlowModel::new(base, delta);
        if let Some(pert) = &self.flow.perturbation {
            let spectrum = SpectralDensity::from_name(&pert.spectrum)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let field_seed = derive_seed(seed, seed_slot::FIELD + realization);
            let xi = FieldRealization::sample(spectrum, pert.delta_k, pert.n_f, field_seed)?;
            let epsilon = if self.flow.base == "shear2d" && self.flow.epsilon == 0.0 {
                1.0 // shear is pure perturbation; epsilon defaults to 1
            } else {
                self.flow.epsilon
            };
            flow = flow.with_perturbation(epsilon, xi)?;
            if let Some(component) = pert.component {
                flow = flow.with_perturb_component(component)?;
            }
        }
        Ok(flow)
    }

    pub fn build_flow(&self) -> anyhow::Result<FlowModel> {
        self.build_flow_at(self.flow.delta, 0, self.seed)
    }

    pub fn kpp_params(&self) -> anyhow::Result<KppParams> {
        Ok(KppParams::new(self.kpp.kappa, self.kpp.f_prime0)?)
    }

    pub fn build_dual(&self) -> anyhow::Result<DualVariable> {
        let dual = self.dual.as_ref().context("this command needs a dual block {lambda, e}")?;
        Ok(DualVariable::new(dual.lambda, dual.e.clone())?)
    }

    pub fn build_domain(&self, flow: &FlowModel) -> anyhow::Result<DomainSpec> {
        let kind = self.domain.as_ref().map(|d| d.kind.as_str()).unwrap_or("torus");
        match kind {
            "unbounded" => Ok(DomainSpec::unbounded(flow.dim())),
            _ => {
                let period = flow
                    .period()
                    .context("flow periods are incommensurate; torus domain impossible")?;
                Ok(DomainSpec::torus(vec![period; flow.dim()])?)
            }
        }
    }

    /// Engine parameters for sweep realization `r`.
    pub fn build_ipm_at(&self, realization: u64) -> anyhow::Result<IpmParams> {
        let c = self.ipm.as_ref().context("this command needs an ipm block")?;
        let mut params = IpmParams::new(
            c.n_particles,
            c.n_generations,
            c.n_mutations,
            c.dt,
            derive_seed(self.seed, seed_slot::ENGINE + realization),
        );
        params.dynamic_shift = c.dynamic_shift;
        params.init = match c.init.as_deref() {
            Some("gaussian") => InitialDistribution::Gaussian,
            _ => InitialDistribution::UniformOnCell,
        };
        params.resampling = match c.resampling.as_deref() {
            Some("none") => Resampling::None,
            _ => Resampling::Multinomial,
        };
        Ok(params)
    }

    pub fn build_query(&self) -> anyhow::Result<FrontSpeedQuery> {
        let fs = self.front_speed.as_ref().context("this command needs a front_speed block")?;
        let mut query = FrontSpeedQuery::new(fs.z.clone())?;
        if let Some(grid) = &fs.lambda_grid {
            query = query.with_lambda_grid(grid.clone());
        }
        if let Some(rounds) = fs.lambda_refine_rounds {
            query = query.with_refine_rounds(rounds);
        }
        if let Some(e_search) = &fs.e_search {
            let search = match e_search.kind.as_str() {
                "local_cone" => ESearch::LocalCone {
                    half_angle: e_search.half_angle_deg.unwrap_or(15.0).to_radians(),
                    n_samples: e_search.n_samples.unwrap_or(8),
                },
                "global_grid" => ESearch::GlobalGrid { n_samples: e_search.n_samples.unwrap_or(16) },
                _ => ESearch::FixedToZ,
            };
            query = query.with_e_search(search);
        }
        Ok(query)
    }

    /// Estimator for sweep realization `r`.
    pub fn build_estimator(&self, realization: u64) -> anyhow::Result<Box<dyn MuEstimator>> {
        let fs = self.front_speed.as_ref().context("this command needs a front_speed block")?;
        match fs.estimator.as_str() {
            "ipm" => {
                let params = self.build_ipm_at(realization)?;
                let mut est = IpmMuEstimator::new(params);
                if let Some(tail) = fs.tail_fraction {
                    est.tail_fraction = tail;
                }
                Ok(Box::new(est))
            }
            "sl_cn" => {
                let r = self.reference.as_ref().context("sl_cn estimator needs a reference block")?;
                Ok(Box::new(SlCnMuEstimator {
                    config: SlCnConfig {
                        n_per_dim: r.n_per_dim,
                        dt: r.dt,
                        n_steps: r.n_steps,
                        burn_in: r.burn_in.unwrap_or(0.5),
                    },
                }))
            }
            "spectral" => {
                let r = self.reference.as_ref().context("spectral estimator needs a reference block")?;
                Ok(Box::new(SpectralMuEstimator { n_per_dim: r.spectral_n.unwrap_or(32) }))
            }
            other => bail!("unknown estimator '{other}'"),
        }
    }
}

pub fn base_flow(name: &str) -> anyhow::Result<BaseFlow> {
    Ok(match name {
        "cellular2d" => BaseFlow::Cellular2d,
        "shear2d" => BaseFlow::Shear2dZeroBase,
        "abc3d" => BaseFlow::Abc3d,
        "cellular3d" => BaseFlow::Cellular3d,
        "zero2d" => BaseFlow::Zero { dim: 2 },
        "zero3d" => BaseFlow::Zero { dim: 3 },
        other => bail!("unknown flow base '{other}'"),
    })
}
