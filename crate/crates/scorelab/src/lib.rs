//! A desk-scale numerical laboratory for score-based diffusion sampling
//! driven by an Ornstein-Uhlenbeck forward process with diagonal covariance.
//!
//! The crate builds everything from closed forms: target families with exact
//! densities and forward marginals, exact and perturbed score oracles, the
//! exponential-integrator backward sampler, heat-kernel quadrature for the
//! transformed log-density, Wasserstein-2 estimators, and a constants
//! calculator that evaluates every convergence bound and plans step budgets.
//!
//! Modules map onto the pipeline:
//!
//! - [`spectral`] — diagonalized covariance model, Gaussian measures, time
//!   schedules, seeded counter-based randomness.
//! - [`targets`] — target families (mixtures, mollified point clouds,
//!   linear-Gaussian posteriors, product mixtures) with closed-form
//!   densities, Gaussian-tail decompositions and OU forward marginals.
//! - [`scores`] — exact scores `s = C grad log p_t`, the modified score
//!   `s~ = s + C Abar_t^{-1} x`, perturbed approximations, FD probes.
//! - [`heat_kernel`] — change-of-variables kernels, Gauss-Hermite evaluation
//!   of the heat-kernel representation, gradient/Hessian bound checks.
//! - [`sampler`] — the discrete backward scheme, the exact Gaussian-channel
//!   law for affine scores, and the martingale diagnostic.
//! - [`metrics`] — Wasserstein-2 estimation (Bures closed form, exact
//!   assignment, sliced) and the KL-vs-W2 product-family computation.
//! - [`bounds`] — evaluated bound constants, the W2 error bound, and
//!   complexity planning.
//! - [`harness`] — config parsing, experiment sweeps, CSV/SVG emission, and
//!   the acceptance suite.
//!
//! Everything is deterministic: a run is reproducible from its config and
//! seed regardless of thread count.

pub mod bounds;
pub mod harness;
pub mod heat_kernel;
pub mod metrics;
pub mod probe;
pub mod quad;
pub mod sampler;
pub mod scores;
pub mod spectral;
pub mod targets;
pub mod util;

pub use bounds::{ComplexityPlan, ConstantsReport, PlanMode};
pub use heat_kernel::{BoundCheckReport, OuKernels, VhjState};
pub use metrics::{w2_assignment, w2_bures, w2_sliced, W2Estimate};
pub use probe::{ProbeConfig, ProbeGrid};
pub use sampler::{GaussianChannel, SamplerRun};
pub use scores::{ModifiedScore, PerturbMode, ScoreModel};
pub use spectral::{GaussianMeasure, ModelSpace, RngStream, SampleSet, Schedule};
pub use targets::{HFunction, TargetModel};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("empty time horizon: T = {t} must exceed delta = {delta}")]
    EmptyHorizon { t: f64, delta: f64 },

    #[error(
        "tail decomposition violates the Gaussian tail assumption: \
         grid sup |sqrt(C) grad h| = {measured:.6e} exceeds cap {cap:.6e}"
    )]
    TailAssumptionViolated { measured: f64, cap: f64 },

    #[error("score undefined before stopping time: t = {t} < delta = {delta}")]
    BeforeStoppingTime { t: f64, delta: f64 },

    #[error(
        "finite-difference step too small: noise estimate {noise:.3e} \
         exceeds 10% of entry scale {scale:.3e}"
    )]
    FdStepTooSmall { noise: f64, scale: f64 },

    #[error("quadrature order insufficient: doubling the nodes shifted the value by {shift:.3e}")]
    QuadratureOrder { shift: f64 },

    #[error("score is not affine in x at schedule time {t}")]
    NonAffineScore { t: f64 },

    #[error("non-finite score output at step {step}")]
    PathDiverged { step: usize },

    #[error("sample count {n} exceeds the assignment cap {cap}; use the sliced estimator")]
    AssignmentCap { n: usize, cap: usize },

    #[error("target is not a product-form symmetric mixture")]
    NonProductTarget,

    #[error("step size {tau:.6} violates the small-step hypothesis (cap {cap:.6})")]
    TauHypothesis { tau: f64, cap: f64 },

    #[error("complexity plan infeasible: {0}")]
    PlanInfeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
