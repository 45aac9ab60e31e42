use chainhoi_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid motion: {0}")]
    InvalidMotion(String),
    #[error("sequence too short: {0} frames")]
    TooShort(usize),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("invalid skeleton spec: {0}")]
    InvalidSpec(String),
    #[error("invalid chains: {0}")]
    InvalidChains(String),
    #[error("mesh has no usable triangles")]
    EmptyMesh,
    #[error("mesh has only degenerate triangles")]
    DegenerateMesh,
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("timestep {t} outside [0, {steps})")]
    Timestep { t: usize, steps: usize },
    #[error("DDIM step order: t = {t}, t_prev = {prev}")]
    StepOrder { t: usize, prev: usize },
    #[error("unknown token {0:?}")]
    Vocab(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("instruction group {0:?} is empty")]
    EmptyGroup(String),
    #[error("invalid features: {0}")]
    InvalidFeatures(String),
    #[error("need at least {pool} samples for R-precision, got {count}")]
    Pool { pool: usize, count: usize },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error in {path} line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ChainError>;
