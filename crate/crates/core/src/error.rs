use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signals differ in shape: {0}")]
    ShapeMismatch(String),

    #[error("validity set is empty: delays too large for {n_samples} samples")]
    EmptyValiditySet { n_samples: usize },

    #[error("shifted read outside [0, {len}) for range [{start}, {end}) at lag {lag}")]
    IndexOutOfRange {
        start: usize,
        end: usize,
        lag: i64,
        len: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("every {0} channel is silent")]
    AllChannelsSilent(&'static str),

    #[error("gain system for channel {channel} has effective rank 0")]
    SingularSystem { channel: usize },

    #[error("reference has zero energy on the validity set")]
    SilentReference,

    #[error("projected signal has zero energy on the validity set")]
    SilentProjection,

    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("source has zero energy")]
    ZeroEnergySource,

    #[error("delay of {delay} samples is not below signal length {len}")]
    DelayTooLarge { delay: usize, len: usize },

    #[error("signal is silent")]
    SilentSignal,

    #[error("remez exchange did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated WAV data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },

    #[error("sample rate mismatch: reference {reference} Hz, test {test} Hz")]
    SampleRateMismatch { reference: u32, test: u32 },

    #[error("channel count mismatch: reference {reference}, test {test}")]
    ChannelCountMismatch { reference: usize, test: usize },

    #[error("length mismatch too large to trim: reference {reference}, test {test} samples")]
    LengthMismatch { reference: usize, test: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}
