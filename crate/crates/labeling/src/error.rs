use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("ids not in the task grid: {0:?}")]
    UnknownItems(Vec<String>),
    #[error("worker {worker:?} already submitted votes for task {task:?}")]
    DuplicateSubmission { task: String, worker: String },
    #[error("no unfinalized items left in the pool")]
    PoolExhausted,
    #[error("no exemplars for symbol {0:?}")]
    NoExemplars(String),
    #[error("no finalized items to export")]
    NothingFinalized,
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("corrupt journal {path:?} at line {line}: {reason}")]
    Journal { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Core(#[from] htr_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
