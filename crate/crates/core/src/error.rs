use thiserror::Error;

/// Errors raised by the solvers and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// A user-supplied flux or velocity law violates the model hypotheses.
    #[error("model error: {0}")]
    Model(String),

    /// A requested flow exceeds the capacity `g(rho*)` of the road.
    #[error("infeasible flux: q = {q} exceeds q_max = {q_max}")]
    InfeasibleFlux { q: f64, q_max: f64 },

    /// The data leave the regime in which the solver is valid.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// Initial or boundary density outside `[0, rho*]`.
    #[error("free-regime violation: {0}")]
    FreeRegime(String),

    /// Junction demand above capacity.
    #[error("congestion at junction {junction}: demand {demand} exceeds capacity {capacity} at t = {time}")]
    Congestion {
        junction: String,
        demand: f64,
        capacity: f64,
        time: f64,
    },

    /// Two solver outputs that must share a grid or time stepping do not.
    #[error("coupling error: {0}")]
    Coupling(String),

    /// Network topology or data constraints are violated.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// A solver invariant broke; indicates a bug rather than bad input.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Model(_) => "model",
            Error::InfeasibleFlux { .. } => "infeasible_flux",
            Error::UnsupportedRegime(_) => "unsupported_regime",
            Error::FreeRegime(_) => "free_regime",
            Error::Congestion { .. } => "congestion",
            Error::Coupling(_) => "coupling",
            Error::Validation(_) => "validation",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
