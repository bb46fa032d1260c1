use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A caller violated an operation's dimensional or structural contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("pilot capacity exceeded: {requested} users need orthogonal pilots but tau = {tau}")]
    Capacity { requested: usize, tau: usize },

    #[error("infeasible policy: {0}")]
    Infeasible(String),

    #[error("fixed point did not converge after {iterations} iterations (last t = {last}, residual = {residual})")]
    Convergence {
        last: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("exhaustive search guard: K = {k} exceeds limit {limit}")]
    Guard { k: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Infeasible(_) | Error::Capacity { .. } => 3,
            Error::Convergence { .. } => 4,
            Error::Io(_) => 2,
            Error::Contract(_) | Error::Guard { .. } => 1,
        }
    }
}
