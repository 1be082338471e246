use thiserror::Error;

/// Errors raised by model construction, planning and the learning loops.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FmdpError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    Size {
        what: String,
        needed: u128,
        cap: u128,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("diameter is infinite: state {target} is unreachable from state {from}")]
    DiameterInfinite { from: usize, target: usize },

    #[error("value iteration did not converge after {iterations} iterations (last span {span:.3e})")]
    NonConvergence { iterations: usize, span: f64 },

    #[error("structural fault: consistent scope set for {kind} factor {factor} became empty at episode {episode}")]
    StructuralFault {
        kind: &'static str,
        factor: usize,
        episode: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("episode bound violated: {episodes} episodes exceeds bound {bound}")]
    EpisodeBound { episodes: usize, bound: u128 },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, FmdpError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(FmdpError::Domain(msg.into()))
}
