use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid noise rate {alpha}% for {classes} classes (true-class probability would be negative)")]
    InvalidAlpha { alpha: f64, classes: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("column `{0}` not present in CSV header")]
    MissingColumn(String),

    #[error("no usable rows in {}", .0.display())]
    NoRows(PathBuf),

    #[error("bad IDX magic number {found:#010x} in {} (expected {expected:#010x})", .path.display())]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("truncated IDX file {}: {detail}", .path.display())]
    Truncated { path: PathBuf, detail: String },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the user's configuration rather than by a
    /// failure while running it.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownKey(_) | Error::InvalidAlpha { .. }
        )
    }
}
