use thiserror::Error;

/// Errors raised by the simulation kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// The requested quantity diverges at the given argument.
    #[error("divergence in {op}: {reason}")]
    Divergent { op: &'static str, reason: String },

    /// An iterative method failed to converge.
    #[error("{op} did not converge after {iterations} iterations")]
    NoConvergence { op: &'static str, iterations: usize },

    /// Truncation threshold discarded every Fock state.
    #[error("no Fock state carries probability >= {threshold}; the ensemble would be empty")]
    EmptyEnsemble { threshold: f64 },

    /// Population reached the top Fock level of a truncated mode.
    #[error("population {population:.3e} at the cutoff of mode {mode} exceeds {limit:.1e}; increase the cutoffs")]
    Leakage {
        mode: &'static str,
        population: f64,
        limit: f64,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
