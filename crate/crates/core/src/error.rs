use thiserror::Error;

/// Errors raised by the geometry, solver, audit and reconstruction layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("body is not strongly convex on the sampled domain (rho = {rho:e}, witness {witness:?})")]
    NotStronglyConvex { rho: f64, witness: Vec<f64> },

    #[error("singular chart: sin(phi) = {sin_phi:e} at phi = {phi}")]
    SingularChart { phi: f64, sin_phi: f64 },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("empty beta window: ({lo}, {hi}) for T = {t}, T* = {t_star}")]
    EmptyBetaWindow {
        lo: f64,
        hi: f64,
        t: f64,
        t_star: f64,
    },

    #[error("weight overflow: exponent {exponent:.3e} exceeds the representable range; {advice}")]
    WeightOverflow { exponent: f64, advice: String },

    #[error("CFL violation: dt = {dt:e} exceeds the admissible {dt_max:e}")]
    Cfl { dt: f64, dt_max: f64 },

    #[error("solver blow-up at level {level}: max-norm {norm:e}")]
    BlowUp { level: usize, norm: f64 },

    #[error("odd extension mismatch: |value(t = 0)| = {magnitude:e} exceeds {tol:e}")]
    ExtensionMismatch { magnitude: f64, tol: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("adjoint consistency failure: relative error {rel_err:e} exceeds {tol:e}")]
    AdjointMismatch { rel_err: f64, tol: f64 },

    #[error("conjugate gradient did not reach {tol:e} after {iterations} iterations (last relative residual {last:e})")]
    CgStagnation {
        tol: f64,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBody(_) => "invalid_body",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::Config(_) => "config",
            Error::NotStronglyConvex { .. } => "not_strongly_convex",
            Error::SingularChart { .. } => "singular_chart",
            Error::Infeasible(_) => "infeasible",
            Error::EmptyBetaWindow { .. } => "empty_beta_window",
            Error::WeightOverflow { .. } => "weight_overflow",
            Error::Cfl { .. } => "cfl",
            Error::BlowUp { .. } => "blow_up",
            Error::ExtensionMismatch { .. } => "extension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::AdjointMismatch { .. } => "adjoint_mismatch",
            Error::CgStagnation { .. } => "cg_stagnation",
            Error::Dimension(_) => "dimension",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
