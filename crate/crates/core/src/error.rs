use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot normalize a zero vector (norm {norm:e})")]
    ZeroVector { norm: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("bad magic bytes: expected \"FSEB\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("corrupt record {index}: {reason}")]
    CorruptRecord { index: usize, reason: String },

    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),

    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("invalid record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("corpus contains no real records")]
    NoRealRecords,

    #[error("corpus contains no fake records")]
    NoFakeRecords,

    #[error("shots per source must be positive")]
    ZeroShots,

    #[error("query vector is not unit norm (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("cache is empty")]
    EmptyCache,

    #[error("support set does not match cache: {0}")]
    SupportMismatch(String),

    #[error("input is empty")]
    EmptyInput,

    #[error("no positive (fake) examples to rank")]
    NoPositives,

    #[error("support set is empty")]
    EmptySupport,

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("variant {variant} does not match cache keys ({keys})")]
    VariantMismatch { variant: String, keys: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    pub(crate) fn corrupt(index: usize, reason: impl Into<String>) -> Self {
        Error::CorruptRecord {
            index,
            reason: reason.into(),
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
