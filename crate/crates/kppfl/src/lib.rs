//! Stochastic computation of KPP reaction-diffusion front speeds in
//! incompressible flows.
//!
//! The toolkit estimates the minimal front speed
//! `c*(z) = inf mu(lambda e) / (z, lambda e)` through the principal
//! eigenvalue mu of the linearized advection-reaction-diffusion operator.
//! mu is computed three ways:
//!
//! * [`ipm`] — a genetic interacting particle system driven by the
//!   Feynman-Kac weighting of Euler-Maruyama paths (the workhorse; mesh
//!   free, works in 2D/3D and on unbounded domains);
//! * [`eulerian::run_mu_sl`] — a semi-Lagrangian / Crank-Nicolson grid
//!   solver (2D reference);
//! * [`eulerian::spectral_eigen`] — a Fourier-collocation eigensolver
//!   (small 1D/2D benchmarks).
//!
//! Velocity fields combine deterministic cellular/ABC/shear bases with
//! stationary Gaussian perturbations synthesized by the random Fourier
//! method ([`field`]); all randomness is counter-based ([`rng`]), so
//! every result is reproducible bit-for-bit at any thread count.
//!
//! The `book/` directory of the repository walks through the concepts
//! with runnable examples; those snippets compile as doc-tests of this
//! crate.

pub mod correlation;
pub mod error;
pub mod eulerian;
pub mod field;
pub mod flow;
pub mod front_speed;
pub mod io;
pub mod ipm;
pub mod rng;
pub mod spectrum;
pub mod stats;

mod book;

pub use error::{Error, Result};
pub use field::{FieldRealization, RealizationDocument};
pub use flow::{BaseFlow, DualVariable, FlowModel, KppParams};
pub use front_speed::{
    compute_front_speed, fit_loglog_slope, sweep_amplitude, ESearch, FrontSpeedQuery,
    FrontSpeedResult, IpmMuEstimator, MuEstimator,
};
pub use ipm::{
    DomainSpec, InitialDistribution, IpmParams, MuTrace, ParticleEnsemble, Resampling,
};
pub use spectrum::SpectralDensity;
