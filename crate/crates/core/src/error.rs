use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the codec, transforms, analysis, and generators can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains NaN or infinite values (first at flat index {index})")]
    NonFiniteInput { index: usize },

    #[error("dimension {d} is too small; at least 2 columns are required")]
    DimensionTooSmall { d: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{count} rows violate the unit-norm tolerance (max deviation {max_deviation:.3e})")]
    NormViolation { count: usize, max_deviation: f64 },

    #[error("row {row} has zero norm and cannot be renormalized")]
    ZeroNormRow { row: usize },

    #[error("norm tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("mantissa truncation of {0} bits is outside 0..=22")]
    BitCountOutOfRange(u32),

    #[error(
        "unsupported element type {0}: the spherical codec only accepts little-endian float32; \
         for reduced-precision data apply the baseline directly to the raw bytes"
    )]
    UnsupportedDtype(String),

    #[error("bad container magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown container mode byte {0}")]
    UnknownMode(u8),

    #[error("container header is truncated: need {needed} bytes, have {available}")]
    TruncatedHeader { needed: usize, available: usize },

    #[error("corrupt frame: {0}")]
    CorruptFrame(String),

    #[error("row range {start}..{end} is out of bounds for {n} rows")]
    RangeOutOfBounds { start: usize, end: usize, n: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("no angle column has at least {min_tail} trailing dimensions (d = {d})")]
    NoQualifyingColumns { d: usize, min_tail: usize },

    #[error("cannot draw {n} orthonormal rows in dimension {d}")]
    TooManyRows { n: usize, d: usize },

    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),

    #[error("rejection sampler exceeded {0} iterations")]
    NonConvergence(usize),

    #[error("bad array file format: {0}")]
    BadFormat(String),

    #[error("unsupported array layout: {0}")]
    UnsupportedLayout(String),

    #[error("operation requires a spherical-mode container")]
    NotSpherical,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the filesystem rather than by data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
