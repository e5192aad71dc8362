use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("window length must be odd, got {0}")]
    EvenWindow(usize),
    #[error("window length must be at least 3, got {0}")]
    WindowTooShort(usize),
    #[error("signal must contain at least one sample")]
    EmptySignal,
    #[error("signal contains a non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("hop size must be positive")]
    ZeroHop,
    #[error("FFT size {fft_size} is smaller than the window length {window_len}")]
    FftTooSmall { fft_size: usize, window_len: usize },
    #[error("window/hop combination leaves sample {sample} uncovered (zero overlap-add weight)")]
    CoverageGap { sample: usize },
    #[error("signal length {got} does not match the configured length {expected}")]
    SignalLength { expected: usize, got: usize },
    #[error("spectrogram shape {got_frames}x{got_bins} does not match {frames}x{bins}")]
    ShapeMismatch {
        frames: usize,
        bins: usize,
        got_frames: usize,
        got_bins: usize,
    },
    #[error("measurement vector has length {got}, expected {expected}")]
    MeasurementLength { expected: usize, got: usize },
    #[error("eigendecomposition failed on non-finite input")]
    NonFiniteMatrix,
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: malformed input: {reason}")]
    Parse { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
