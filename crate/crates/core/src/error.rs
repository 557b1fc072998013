use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("feature dimension must be positive")]
    ZeroDimension,

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("empty pool")]
    EmptyPool,

    #[error("cannot choose {requested} features from a pool of {available}")]
    InsufficientFeatures { requested: usize, available: usize },

    #[error("label {label:?} has {available} features, needs at least {requested}")]
    StarvedLabel {
        label: String,
        requested: usize,
        available: usize,
    },

    #[error("label {label:?} has {available} features after filtering, needs at least {requested}; try a larger alpha or a smaller vocabulary")]
    StarvedFilteredLabel {
        label: String,
        requested: usize,
        available: usize,
    },

    #[error("vocabulary size {m} is smaller than the label count {k}")]
    VocabularyTooSmall { m: usize, k: usize },

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("invalid label vocabulary: {0}")]
    InvalidLabels(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown image id {0:?}")]
    UnknownImage(String),

    #[error("image {0:?} has no labels")]
    UnlabeledImage(String),

    #[error("label table contains no labeled images")]
    EmptyLabelTable,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),

    #[error("unknown strategy tag {0}")]
    UnknownStrategy(String),

    #[error("patch at ({x}, {y}) of size {size} lies outside a {width}x{height} image")]
    PatchOutOfBounds {
        x: usize,
        y: usize,
        size: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class {class:?} has {available} images, protocol needs {required}")]
    ClassTooSmall {
        class: String,
        available: usize,
        required: usize,
    },

    #[error("classification needs a single label per image; image {0:?} has several")]
    MultiLabelImage(String),

    #[error("classifier needs at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
