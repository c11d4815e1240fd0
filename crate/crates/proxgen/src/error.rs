use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular time: {0}")]
    SingularTime(String),

    #[error("sampler diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("training diverged at epoch {epoch} (last stable checkpoint attached)")]
    TrainingDiverged {
        epoch: usize,
        last_stable: Box<crate::proxnet::ProxNet>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
