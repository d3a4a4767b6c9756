use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("derivative order {requested} exceeds the supported maximum {max}")]
    DerivativeOrder { requested: usize, max: usize },

    #[error("point ({x}, {y}, {t}) lies outside the sampling range")]
    Sampling { x: f64, y: f64, t: f64 },

    #[error("layout error: {0}")]
    Layout(String),

    #[error("point ({x}, {y}) lies in a solid cell")]
    SolidSample { x: f64, y: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("non-finite loss at training step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("rollout produced non-finite fields at step {step}")]
    Rollout { step: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
