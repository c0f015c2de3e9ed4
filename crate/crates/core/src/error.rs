use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("size mismatch: {0}")]
    Mismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("box constraint violated (step size too large?): {0}")]
    StepSize(String),
    #[error("non-finite state: {0}")]
    Diverged(String),
    #[error("path touches the box boundary: {0}")]
    Margin(String),
    #[error("trajectory has no event log")]
    MissingEventLog,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
