//! Decomposition of the error between a multichannel test signal and its
//! reference into a spatial part, explained by per-channel-pair gains and
//! integer delays, and a residual part. Scores are reported as the
//! signal-to-spatial-distortion ratio (SSR) and the signal-to-residual-
//! distortion ratio (SRR).

// NaN must fail every range check, hence `!(x > 0.0)` rather than `x <= 0.0`
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod correlation;
pub mod degrade;
pub mod error;
pub mod gain;
pub mod metrics;
pub mod projection;
pub mod signal;
pub mod sweep;
pub mod theory;
pub mod wav;

pub use correlation::{estimate_shift, estimate_shift_matrix, DelaySearchConfig};
pub use error::{Error, Result};
pub use gain::{decompose, DecomposeConfig};
pub use metrics::{evaluate, Aggregate, EvalConfig, EvalReport, FrameScores, FrameStatus};
pub use projection::{error_signals, project, Decomposition, ErrorSignals};
pub use signal::{GainMatrix, MultichannelSignal, SampleRange, ShiftMatrix, ValiditySets};
pub use theory::PanParams;
