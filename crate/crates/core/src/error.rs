use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample-rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(f64, f64),

    #[error("frequency {freq_hz} Hz violates the Nyquist limit of {nyquist_hz} Hz")]
    Nyquist { freq_hz: f64, nyquist_hz: f64 },

    #[error("band {lo_hz}..{hi_hz} Hz is too narrow for {speakers} speakers with {guard_hz} Hz guards")]
    BandTooNarrow {
        lo_hz: f64,
        hi_hz: f64,
        speakers: usize,
        guard_hz: f64,
    },

    #[error("DFT size {size} is smaller than the signal length {len}")]
    DftSize { size: usize, len: usize },

    #[error("malformed WAV file: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("{what} are co-located ({distance_m} m apart)")]
    Colocated { what: &'static str, distance_m: f64 },

    #[error("source is silent within the analysis band (in-band energy {energy:e})")]
    SilentSource { energy: f64 },

    #[error("voxel grids do not match")]
    GridMismatch,

    #[error("product fusion requires nonnegative values, found {0}")]
    NegativeValue(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at epoch {epoch} (sample {sample}): loss = {loss}")]
    Diverged {
        epoch: usize,
        sample: usize,
        loss: f64,
    },

    #[error("corrupt {format} file: {reason}")]
    Corrupt { format: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure stems from bad user input rather than from the
    /// runtime (I/O, numerical divergence). The CLI maps this to its exit code.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Diverged { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
