use std::path::PathBuf;

/// Errors raised by the transcription engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty image")]
    EmptyImage,
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("class {0:?} has no samples")]
    EmptyClass(String),
    #[error("model format error: {0}")]
    Format(String),
    #[error("too many variants: {count} exceeds bound {bound}")]
    VariantExplosion { count: u128, bound: u128 },
    #[error("missing ground truth for word {0:?}")]
    MissingTruth(String),
    #[error("image codec error on {path:?}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("png encoding error: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
