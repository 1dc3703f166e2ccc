//! Crowd-labeling backend: 40-image tasks per symbol, vote collection,
//! majority finalization and export of a classifier training manifest.

pub mod error;
pub mod http;
pub mod pool;
pub mod store;

pub use error::{Error, Result};
pub use http::{router, serve, AppState};
pub use pool::{
    create_task, decide, export_manifest, finalize_labels, finalized_samples, Decision, Exemplars, LabelingTask, PoolItem,
    SegmentPool, VoteSubmission, DEFAULT_MARGIN, DEFAULT_QUORUM, GRID_SIZE,
};
pub use store::{FinalizeOutcome, LabelStore, PoolStatus, StoreConfig, SymbolInfo};
