use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("pathloss exponent {0} is below 2; the interference integral does not converge")]
    Divergent(f64),

    #[error(
        "slot infeasible: {c_in_bits} bits need {required_s:.6} s at maximum power but only {budget_s:.6} s remain"
    )]
    InfeasibleSlot {
        c_in_bits: f64,
        required_s: f64,
        budget_s: f64,
    },

    #[error("power allocation did not converge after {iterations} iterations (residual {residual_sq:e})")]
    NonConvergence { iterations: usize, residual_sq: f64 },

    #[error("solver failed at slot {slot}: {source}")]
    Slot {
        slot: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for errors raised by the per-slot optimizer rather than by bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::InfeasibleSlot { .. } | Error::NonConvergence { .. } => true,
            Error::Slot { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
