use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Engine(#[from] hermite_pde::Error),

    #[error("malformed message: {0}")]
    Protocol(String),

    #[error("rejected message: {0}")]
    Rejected(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("websocket: {0}")]
    WebSocket(Box<tokio_tungstenite::tungstenite::Error>),
}

impl From<tokio_tungstenite::tungstenite::Error> for ServiceError {
    fn from(e: tokio_tungstenite::tungstenite::Error) -> Self {
        ServiceError::WebSocket(Box::new(e))
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
