use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("kind mismatch: {0}")]
    KindMismatch(String),
    #[error("no solution: flux level {level:e} exceeds the attainable maximum {max:e}")]
    NoSolution { level: f64, max: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("access violation: position {x} lies inside the masked window ({a}, {b})")]
    AccessViolation { x: f64, a: f64, b: f64 },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("horizon too short: {0}")]
    HorizonTooShort(String),
    #[error("congestion detected: {0}")]
    Congestion(String),
    #[error("inconsistent observation: {0}")]
    InconsistentObservation(String),
    #[error("event livelock: {0}")]
    Livelock(String),
    #[error("resonance: {0}")]
    Resonance(String),
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("support overflow: {0}")]
    SupportOverflow(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::KindMismatch(_) | Error::Domain(_) => 2,
            Error::HorizonTooShort(_) => 3,
            Error::Congestion(_) => 4,
            Error::InconsistentObservation(_)
            | Error::NotFound(_)
            | Error::Bracket(_)
            | Error::Resonance(_)
            | Error::AccessViolation { .. } => 5,
            _ => 1,
        }
    }
}
