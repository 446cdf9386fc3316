use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("integration diverged at t = {time} s")]
    IntegrationDiverged { time: f64 },

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("no equilibrium exists: |P/B| = {ratio} > 1 (loss of synchronism)")]
    NoEquilibrium { ratio: f64 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("candidate library is rank deficient; offending columns: {}", columns.join(", "))]
    SingularLibrary { columns: Vec<String> },

    #[error("inertia is unidentifiable: constant coefficient {c0} is numerically zero")]
    UnidentifiableInertia { c0: f64 },

    #[error("non-finite value encountered while computing gradients")]
    GradientOverflow,

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("percent error undefined for a zero reference value")]
    UndefinedError,

    #[error("unknown scenario `{0}` (expected fd1, fd2, sd1 or sd2)")]
    UnknownScenario(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegrationDiverged { .. }
                | Error::SingularLibrary { .. }
                | Error::UnidentifiableInertia { .. }
                | Error::GradientOverflow
                | Error::TrainingDiverged { .. }
                | Error::NoEquilibrium { .. }
        )
    }
}
