//! SSR / SRR energy ratios and the framewise evaluation loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::DelaySearchConfig;
use crate::error::{Error, Result};
use crate::gain::{decompose, DecomposeConfig, DEFAULT_SILENCE_EPS_REL};
use crate::projection::{error_signals, Decomposition, ErrorSignals};
use crate::signal::{energy, MultichannelSignal, SampleRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Median,
    Mean,
}

/// Evaluation settings. Defaults: 2 s frames, 50 % hop, 50 ms delay
/// search, relative silence threshold 1e-6, 80 dB cap, median aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub frame_seconds: f64,
    pub hop_fraction: f64,
    pub max_shift_ms: f64,
    pub silence_eps_rel: f64,
    pub db_cap: f64,
    /// Cross-spectrum lowpass for the delay search, as a fraction of Nyquist.
    pub lowpass: Option<f64>,
    pub aggregate: Aggregate,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            frame_seconds: 2.0,
            hop_fraction: 0.5,
            max_shift_ms: 50.0,
            silence_eps_rel: DEFAULT_SILENCE_EPS_REL,
            db_cap: 80.0,
            lowpass: None,
            aggregate: Aggregate::Median,
        }
    }
}

impl EvalConfig {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_seconds * sample_rate as f64).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ((self.hop_fraction * self.frame_len(sample_rate) as f64).round() as usize).max(1)
    }

    /// Delay search limit `K` in samples.
    pub fn max_shift(&self, sample_rate: u32) -> usize {
        (self.max_shift_ms / 1000.0 * sample_rate as f64).round() as usize
    }

    pub fn decompose_config(&self, sample_rate: u32) -> DecomposeConfig {
        DecomposeConfig {
            delay: DelaySearchConfig {
                max_shift: self.max_shift(sample_rate),
                lowpass: self.lowpass,
            },
            silence_eps_rel: self.silence_eps_rel,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.frame_seconds > 0.0) {
            return bad(format!(
                "frame length {} s must be positive",
                self.frame_seconds
            ));
        }
        if !(self.hop_fraction > 0.0 && self.hop_fraction <= 1.0) {
            return bad(format!(
                "hop fraction {} must lie in (0, 1]",
                self.hop_fraction
            ));
        }
        if !(self.max_shift_ms >= 0.0) {
            return bad(format!(
                "delay limit {} ms must be non-negative",
                self.max_shift_ms
            ));
        }
        if !(self.silence_eps_rel > 0.0) {
            return bad(format!(
                "silence threshold {} must be positive",
                self.silence_eps_rel
            ));
        }
        if !(self.db_cap > 0.0) {
            return bad(format!("dB cap {} must be positive", self.db_cap));
        }
        if let Some(fc) = self.lowpass {
            if !(fc > 0.0 && fc <= 1.0) {
                return bad(format!("lowpass cutoff {fc} must lie in (0, 1]"));
            }
        }
        let frame = self.frame_len(sample_rate);
        let k = self.max_shift(sample_rate);
        if frame < 2 * k + 1 {
            return bad(format!(
                "frame of {frame} samples is shorter than 2K+1 = {}",
                2 * k + 1
            ));
        }
        Ok(())
    }
}

fn capped_ratio_db(num: f64, den: f64, cap: f64) -> f64 {
    if den == 0.0 {
        return cap;
    }
    (10.0 * (num / den).log10()).clamp(-cap, cap)
}

/// Signal to spatial distortion ratio in dB over `idx`.
///
/// `e_spat` covers exactly `idx`; `reference` is the full-length signal.
pub fn ssr(
    reference: &MultichannelSignal,
    e_spat: &MultichannelSignal,
    idx: SampleRange,
    cap: f64,
) -> Result<f64> {
    let num = energy(reference, idx);
    if num == 0.0 {
        return Err(Error::SilentReference);
    }
    let den = energy(e_spat, SampleRange::full(e_spat.num_samples()));
    Ok(capped_ratio_db(num, den, cap))
}

/// Signal to residual distortion ratio in dB; both inputs cover the
/// validity set only.
pub fn srr(projected: &MultichannelSignal, e_resid: &MultichannelSignal, cap: f64) -> Result<f64> {
    let num = energy(projected, SampleRange::full(projected.num_samples()));
    if num == 0.0 {
        return Err(Error::SilentProjection);
    }
    let den = energy(e_resid, SampleRange::full(e_resid.num_samples()));
    Ok(capped_ratio_db(num, den, cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Ok,
    SilentSkip,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub frame_index: usize,
    pub start_sample: usize,
    pub ssr_db: Option<f64>,
    pub srr_db: Option<f64>,
    pub status: FrameStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Everything computed for one frame.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub decomposition: Decomposition,
    pub errors: ErrorSignals,
    pub ssr_db: f64,
    pub srr_db: f64,
}

/// Runs the full decomposition on one frame and keeps the intermediates.
pub fn analyze_frame(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    cfg: &EvalConfig,
) -> Result<FrameAnalysis> {
    test.check_same_shape(reference)?;
    let dcfg = cfg.decompose_config(reference.sample_rate());
    let decomposition = decompose(test, reference, &dcfg)?;
    let errors = error_signals(test, reference, &decomposition)?;
    let idx = decomposition.range();
    let ssr_db = ssr(reference, &errors.spatial, idx, cfg.db_cap)?;
    let srr_db = srr(&decomposition.projected, &errors.residual, cfg.db_cap)?;
    Ok(FrameAnalysis {
        decomposition,
        errors,
        ssr_db,
        srr_db,
    })
}

/// Scores one frame, folding failures into the frame status.
pub fn evaluate_frame(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    cfg: &EvalConfig,
) -> FrameScores {
    let (ssr_db, srr_db, status, message) = match analyze_frame(test, reference, cfg) {
        Ok(a) => (Some(a.ssr_db), Some(a.srr_db), FrameStatus::Ok, None),
        Err(e @ (Error::AllChannelsSilent(_) | Error::SilentReference)) => {
            (None, None, FrameStatus::SilentSkip, Some(e.to_string()))
        }
        Err(e) => (None, None, FrameStatus::Error, Some(e.to_string())),
    };
    FrameScores {
        frame_index: 0,
        start_sample: 0,
        ssr_db,
        srr_db,
        status,
        message,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub channels: usize,
    pub num_samples: usize,
    pub sample_rate: u32,
}

impl From<&MultichannelSignal> for SignalMeta {
    fn from(x: &MultichannelSignal) -> Self {
        Self {
            channels: x.num_channels(),
            num_samples: x.num_samples(),
            sample_rate: x.sample_rate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub method: Aggregate,
    pub ssr_db: Option<f64>,
    pub srr_db: Option<f64>,
    pub ssr_median_db: Option<f64>,
    pub srr_median_db: Option<f64>,
    pub ssr_mean_db: Option<f64>,
    pub srr_mean_db: Option<f64>,
    pub frames_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub signal: SignalMeta,
    pub frame_len: usize,
    pub hop_len: usize,
    pub frames: Vec<FrameScores>,
    pub aggregate: AggregateScores,
}

impl EvalReport {
    pub fn ssr_aggregate_db(&self) -> Option<f64> {
        self.aggregate.ssr_db
    }

    pub fn srr_aggregate_db(&self) -> Option<f64> {
        self.aggregate.srr_db
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(frames: &[FrameScores], method: Aggregate) -> AggregateScores {
    let ok: Vec<&FrameScores> = frames
        .iter()
        .filter(|f| f.status == FrameStatus::Ok)
        .collect();
    let ssr: Vec<f64> = ok.iter().filter_map(|f| f.ssr_db).collect();
    let srr: Vec<f64> = ok.iter().filter_map(|f| f.srr_db).collect();
    let (ssr_median_db, srr_median_db) = (median(ssr.clone()), median(srr.clone()));
    let (ssr_mean_db, srr_mean_db) = (mean(&ssr), mean(&srr));
    let (ssr_db, srr_db) = match method {
        Aggregate::Median => (ssr_median_db, srr_median_db),
        Aggregate::Mean => (ssr_mean_db, srr_mean_db),
    };
    AggregateScores {
        method,
        ssr_db,
        srr_db,
        ssr_median_db,
        srr_median_db,
        ssr_mean_db,
        srr_mean_db,
        frames_ok: ok.len(),
    }
}

/// Start samples of every whole frame.
pub fn frame_starts(n_samples: usize, frame_len: usize, hop: usize) -> Vec<usize> {
    if frame_len == 0 || hop == 0 || n_samples < frame_len {
        return Vec::new();
    }
    (0..=(n_samples - frame_len) / hop)
        .map(|k| k * hop)
        .collect()
}

/// Framewise evaluation of `test` against `reference`.
pub fn evaluate(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    test.check_same_shape(reference)?;
    let sr = reference.sample_rate();
    cfg.validate(sr)?;
    let frame_len = cfg.frame_len(sr);
    let hop_len = cfg.hop_len(sr);
    let n = reference.num_samples();
    if n < frame_len {
        return Err(Error::SignalTooShort {
            needed: frame_len,
            got: n,
        });
    }
    let frames = frame_starts(n, frame_len, hop_len)
        .into_par_iter()
        .enumerate()
        .map(|(k, start)| {
            let range = SampleRange::new(start, start + frame_len);
            let mut scores = match (test.slice(range), reference.slice(range)) {
                (Ok(t), Ok(r)) => evaluate_frame(&t, &r, cfg),
                (Err(e), _) | (_, Err(e)) => FrameScores {
                    frame_index: 0,
                    start_sample: 0,
                    ssr_db: None,
                    srr_db: None,
                    status: FrameStatus::Error,
                    message: Some(e.to_string()),
                },
            };
            scores.frame_index = k;
            scores.start_sample = start;
            scores
        })
        .collect::<Vec<_>>();
    let aggregate = aggregate(&frames, cfg.aggregate);
    Ok(EvalReport {
        config: cfg.clone(),
        signal: SignalMeta::from(reference),
        frame_len,
        hop_len,
        frames,
        aggregate,
    })
}
