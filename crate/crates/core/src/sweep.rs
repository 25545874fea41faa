//! Parameter sweeps over one degradation kind, producing one scored row per
//! grid point.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrade::{
    add_noise, delay_channel, design_lowpass_with_fallback, filtfilt, gaussian_noise,
    pan_mono_to_stereo, FirMethod, LowpassSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalConfig};
use crate::signal::{sum_squares, MultichannelSignal};
use crate::theory::{
    autocorrelation, theoretical_ssr_bounds, theoretical_ssr_pan, theoretical_ssr_pan_delay,
    PanParams,
};

/// Cutoff of the lowpass that shapes white noise into the speech-like source.
pub const SPEECH_SHAPED_CUTOFF_HZ: f64 = 4000.0;
/// RMS level of the synthetic sources.
pub const SOURCE_RMS: f64 = 0.1;
/// Mixed into the sweep seed for additive noise so that it never reuses the
/// stream of a synthetic source built from the same seed.
pub const NOISE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Pan,
    Delay,
    Lowpass,
    Noise,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pan => "pan",
            Self::Delay => "delay",
            Self::Lowpass => "lowpass",
            Self::Noise => "noise",
        }
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pan" => Ok(Self::Pan),
            "delay" => Ok(Self::Delay),
            "lowpass" => Ok(Self::Lowpass),
            "noise" => Ok(Self::Noise),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep kind {other:?}"
            ))),
        }
    }
}

/// Seeded white Gaussian noise at [`SOURCE_RMS`].
pub fn white_noise_source(n: usize, sample_rate: u32, seed: u64) -> Result<MultichannelSignal> {
    normalized_mono(gaussian_noise(n, seed), sample_rate)
}

/// White noise lowpassed at [`SPEECH_SHAPED_CUTOFF_HZ`] (or a quarter of the
/// sample rate, whichever is lower), at [`SOURCE_RMS`].
pub fn speech_shaped_source(n: usize, sample_rate: u32, seed: u64) -> Result<MultichannelSignal> {
    let cutoff = SPEECH_SHAPED_CUTOFF_HZ.min(0.25 * sample_rate as f64);
    let (h, _) = design_lowpass_with_fallback(&LowpassSpec::new(cutoff, sample_rate))?;
    let white = MultichannelSignal::mono(gaussian_noise(n, seed), sample_rate)?;
    let shaped = filtfilt(&white, &h)?;
    normalized_mono(shaped.into_channels().swap_remove(0), sample_rate)
}

fn normalized_mono(v: Vec<f64>, sample_rate: u32) -> Result<MultichannelSignal> {
    let e = sum_squares(&v);
    if e == 0.0 {
        return Err(Error::SilentSignal);
    }
    let g = SOURCE_RMS * (v.len() as f64 / e).sqrt();
    MultichannelSignal::mono(v.into_iter().map(|x| g * x).collect(), sample_rate)
}

/// One grid point: the test pan and the kind-specific parameter
/// (delay in samples, cutoff in Hz or SNR in dB; unused for pan sweeps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p_hat: f64,
    pub param: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Reference pan.
    pub p: f64,
    /// Test pans. For pan sweeps this is the swept grid.
    pub p_hats: Vec<f64>,
    /// Kind-specific parameter grid; ignored for pan sweeps.
    pub params: Vec<f64>,
    pub seed: u64,
}

impl SweepSpec {
    /// Grid points in output order: test pan outermost, parameter innermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        if self.kind == SweepKind::Pan {
            return self
                .p_hats
                .iter()
                .map(|&p_hat| SweepPoint { p_hat, param: None })
                .collect();
        }
        self.p_hats
            .iter()
            .flat_map(|&p_hat| {
                self.params.iter().map(move |&v| SweepPoint {
                    p_hat,
                    param: Some(v),
                })
            })
            .collect()
    }

    pub fn validate(&self, sample_rate: u32, n_samples: usize) -> Result<()> {
        PanParams::new(self.p)?;
        if self.p_hats.is_empty() {
            return Err(Error::InvalidParameter("empty test pan grid".into()));
        }
        for &p in &self.p_hats {
            PanParams::new(p)?;
        }
        if self.kind != SweepKind::Pan && self.params.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} sweep needs a parameter grid",
                self.kind.name()
            )));
        }
        for &v in &self.params {
            match self.kind {
                SweepKind::Pan => {}
                SweepKind::Delay => {
                    if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < n_samples) {
                        return Err(Error::InvalidParameter(format!(
                            "delay {v} must be a whole number of samples below {n_samples}"
                        )));
                    }
                }
                SweepKind::Lowpass => LowpassSpec::new(v, sample_rate).validate()?,
                SweepKind::Noise => {
                    if !v.is_finite() {
                        return Err(Error::InvalidParameter(format!("SNR {v} is not finite")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reference and degraded test signal for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSignals {
    pub reference: MultichannelSignal,
    pub test: MultichannelSignal,
    pub fir_method: Option<FirMethod>,
}

/// Synthesizes the reference/test pair for `point` from a mono `source`.
pub fn degrade_point(
    source: &MultichannelSignal,
    spec: &SweepSpec,
    point: SweepPoint,
) -> Result<PointSignals> {
    let reference = pan_mono_to_stereo(source, PanParams::new(spec.p)?)?;
    let panned = pan_mono_to_stereo(source, PanParams::new(point.p_hat)?)?;
    let param = || {
        point.param.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{} sweep point lacks a parameter",
                spec.kind.name()
            ))
        })
    };
    let mut fir_method = None;
    let test = match spec.kind {
        SweepKind::Pan => panned,
        SweepKind::Delay => delay_channel(&panned, 1, param()? as usize)?,
        SweepKind::Lowpass => {
            let lp = LowpassSpec::new(param()?, source.sample_rate());
            let (h, method) = design_lowpass_with_fallback(&lp)?;
            fir_method = Some(method);
            filtfilt(&panned, &h)?
        }
        SweepKind::Noise => add_noise(&panned, param()?, spec.seed ^ NOISE_SEED_SALT)?,
    };
    Ok(PointSignals {
        reference,
        test,
        fir_method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub p: f64,
    pub p_hat: f64,
    pub param: Option<f64>,
    pub ssr_db: Option<f64>,
    pub srr_db: Option<f64>,
    pub theory_ssr_db: Option<f64>,
    pub theory_lower_db: Option<f64>,
    pub theory_upper_db: Option<f64>,
    /// `ok`, or the error that stopped this point.
    pub status: String,
    /// `kaiser_fallback` when the lowpass design fell back to a window.
    pub note: String,
}

fn theory_columns(
    spec: &SweepSpec,
    point: SweepPoint,
    acf: &[f64],
    cap: f64,
) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let (p, p_hat) = (PanParams::new(spec.p)?, PanParams::new(point.p_hat)?);
    Ok(match spec.kind {
        SweepKind::Pan => (Some(theoretical_ssr_pan(p, p_hat, cap)), None, None),
        SweepKind::Delay => {
            let d = point.param.unwrap_or(0.0) as i64;
            let exact = theoretical_ssr_pan_delay(p, p_hat, d, acf, cap)?;
            let (lo, hi) = theoretical_ssr_bounds(p, p_hat, cap);
            (Some(exact), Some(lo), Some(hi))
        }
        SweepKind::Lowpass | SweepKind::Noise => (None, None, None),
    })
}

fn run_point(
    source: &MultichannelSignal,
    spec: &SweepSpec,
    point: SweepPoint,
    acf: &[f64],
    cfg: &EvalConfig,
) -> SweepRow {
    let mut row = SweepRow {
        kind: spec.kind,
        p: spec.p,
        p_hat: point.p_hat,
        param: point.param,
        ssr_db: None,
        srr_db: None,
        theory_ssr_db: None,
        theory_lower_db: None,
        theory_upper_db: None,
        status: "ok".into(),
        note: String::new(),
    };
    let outcome = (|| -> Result<()> {
        let (t, lo, hi) = theory_columns(spec, point, acf, cfg.db_cap)?;
        row.theory_ssr_db = t;
        row.theory_lower_db = lo;
        row.theory_upper_db = hi;
        let sig = degrade_point(source, spec, point)?;
        if sig.fir_method == Some(FirMethod::KaiserFallback) {
            row.note = "kaiser_fallback".into();
        }
        let report = evaluate(&sig.test, &sig.reference, cfg)?;
        row.ssr_db = report.ssr_aggregate_db();
        row.srr_db = report.srr_aggregate_db();
        if row.ssr_db.is_none() {
            return Err(Error::InvalidSignal("no frame could be scored".into()));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.status = e.to_string();
    }
    row
}

/// Runs every grid point of `spec` on a mono `source`. Rows come back in
/// grid order; per-point failures are recorded in the status column.
pub fn run_sweep(
    source: &MultichannelSignal,
    spec: &SweepSpec,
    cfg: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    if source.num_channels() != 1 {
        return Err(Error::InvalidSignal(format!(
            "sweep source must be mono, got {} channels",
            source.num_channels()
        )));
    }
    spec.validate(source.sample_rate(), source.num_samples())?;
    cfg.validate(source.sample_rate())?;
    let acf = if spec.kind == SweepKind::Delay {
        let max_d = spec.params.iter().fold(0.0f64, |m, &v| m.max(v)) as usize;
        autocorrelation(source.channel(0), max_d)
    } else {
        Vec::new()
    };
    Ok(spec
        .points()
        .into_par_iter()
        .map(|pt| run_point(source, spec, pt, &acf, cfg))
        .collect())
}

pub const CSV_HEADER: [&str; 11] = [
    "kind",
    "p",
    "p_hat",
    "param",
    "ssr_db",
    "srr_db",
    "theory_ssr_db",
    "theory_lower_db",
    "theory_upper_db",
    "status",
    "note",
];

/// Fixed six-decimal formatting; `None` is an empty cell.
pub fn format_db(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.kind.name().to_string(),
            format_db(Some(r.p)),
            format_db(Some(r.p_hat)),
            format_db(r.param),
            format_db(r.ssr_db),
            format_db(r.srr_db),
            format_db(r.theory_ssr_db),
            format_db(r.theory_lower_db),
            format_db(r.theory_upper_db),
            r.status.clone(),
            r.note.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
