//! Generalized correlation and integer delay estimation.
//!
//! Delays are found by peak-picking the magnitude of the zero-padded
//! FFT cross-correlation within `[-K, K]`, so a polarity-inverted channel
//! is aligned just like an in-phase one.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::{validity_sets, MultichannelSignal, SampleRange, ShiftMatrix};

/// Parameters of the delay search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySearchConfig {
    /// Search limit `K` in samples.
    pub max_shift: usize,
    /// Optional lowpass weighting of the cross-spectrum, cutoff as a
    /// fraction of Nyquist in `(0, 1]`.
    pub lowpass: Option<f64>,
}

impl DelaySearchConfig {
    pub fn new(max_shift: usize) -> Self {
        Self {
            max_shift,
            lowpass: None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.max_shift >= n {
            return Err(Error::InvalidParameter(format!(
                "delay search limit {} must be below frame length {}",
                self.max_shift, n
            )));
        }
        if let Some(fc) = self.lowpass {
            if !(fc > 0.0 && fc <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "lowpass cutoff {fc} must lie in (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// `sum_{n in idx} u[n - nu] * v[n - eta]`.
pub fn generalized_correlation(
    u: &[f64],
    v: &[f64],
    nu: i64,
    eta: i64,
    idx: SampleRange,
) -> Result<f64> {
    let a = shifted(u, nu, idx)?;
    let b = shifted(v, eta, idx)?;
    Ok(crate::signal::dot(a, b))
}

/// The slice `x[n - lag]` for `n` in `idx`.
pub(crate) fn shifted(x: &[f64], lag: i64, idx: SampleRange) -> Result<&[f64]> {
    if idx.is_empty() {
        return Ok(&[]);
    }
    let start = idx.start as i64 - lag;
    let end = idx.end as i64 - lag;
    if start < 0 || end > x.len() as i64 {
        return Err(Error::IndexOutOfRange {
            start: idx.start,
            end: idx.end,
            lag,
            len: x.len(),
        });
    }
    Ok(&x[start as usize..end as usize])
}

/// Picks the lag with the largest correlation magnitude.
///
/// `corr[i]` holds the correlation at lag `i - K` where `K = (corr.len() - 1) / 2`.
/// Values within `1e-9` of the peak (relative), plus `1e-12 * scale`
/// absolute, count as tied; ties go to the smallest `|lag|`, then to the
/// negative lag.
pub fn select_peak_lag(corr: &[f64], scale: f64) -> i64 {
    let k = (corr.len() / 2) as i64;
    let peak = corr.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * peak + 1e-12 * scale;
    let mut best: Option<i64> = None;
    for (i, c) in corr.iter().enumerate() {
        if c.abs() < peak - tol {
            continue;
        }
        let lag = i as i64 - k;
        best = match best {
            None => Some(lag),
            Some(b) if lag.abs() < b.abs() || (lag.abs() == b.abs() && lag < b) => Some(lag),
            keep => keep,
        };
    }
    best.unwrap_or(0)
}

/// Zero-padded spectra of each channel, shared across channel pairs.
struct Spectra {
    len: usize,
    inverse: Arc<dyn Fft<f64>>,
    test: Vec<Vec<Complex<f64>>>,
    reference: Vec<Vec<Complex<f64>>>,
    weight: Option<Vec<f64>>,
}

impl Spectra {
    fn new(test: &[&[f64]], reference: &[&[f64]], lowpass: Option<f64>) -> Self {
        let n = test
            .iter()
            .chain(reference)
            .map(|c| c.len())
            .max()
            .unwrap_or(1);
        let len = (2 * n).saturating_sub(1).max(1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let transform = |x: &[f64]| {
            let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
            buf.resize(len, Complex::new(0.0, 0.0));
            forward.process(&mut buf);
            buf
        };
        let weight = lowpass.filter(|&fc| fc < 1.0).map(|fc| {
            let half = (len / 2) as f64;
            (0..len)
                .map(|k| {
                    let bin = k.min(len - k) as f64;
                    if bin / half <= fc {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        });
        Self {
            len,
            test: test.iter().map(|c| transform(c)).collect(),
            reference: reference.iter().map(|c| transform(c)).collect(),
            inverse,
            weight,
        }
    }

    /// Cross-correlation of test channel `c` against reference channel `d`
    /// at lags `-k..=k`.
    fn correlate(&self, c: usize, d: usize, k: usize) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self.test[c]
            .iter()
            .zip(&self.reference[d])
            .map(|(t, r)| t * r.conj())
            .collect();
        if let Some(w) = &self.weight {
            buf.iter_mut().zip(w).for_each(|(b, w)| *b *= w);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        let k = k as i64;
        (-k..=k)
            .map(|lag| {
                let i = if lag >= 0 {
                    lag as usize
                } else {
                    (self.len as i64 + lag) as usize
                };
                buf[i].re * scale
            })
            .collect()
    }
}

fn energy(x: &[f64]) -> f64 {
    crate::signal::sum_squares(x)
}

/// Integer lag `tau` such that `ref[n - tau]` best matches `test[n]`
/// (up to sign), searched over `[-K, K]`.
pub fn estimate_shift(test: &[f64], reference: &[f64], cfg: &DelaySearchConfig) -> Result<i64> {
    if test.len() != reference.len() || test.len() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "channels of {} and {} samples (need equal, >= 2)",
            test.len(),
            reference.len()
        )));
    }
    cfg.validate(test.len())?;
    let (et, er) = (energy(test), energy(reference));
    if et == 0.0 || er == 0.0 {
        return Err(Error::DegenerateInput("channel with zero energy".into()));
    }
    let spectra = Spectra::new(&[test], &[reference], cfg.lowpass);
    let corr = spectra.correlate(0, 0, cfg.max_shift);
    Ok(select_peak_lag(&corr, (et * er).sqrt()))
}

/// Estimates `tau[c][d]` for every non-silent pair of test row `c` and
/// reference column `d`. Silent rows and columns get a zero shift.
pub fn estimate_shift_matrix(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    cfg: &DelaySearchConfig,
    silent_rows: &[usize],
    silent_cols: &[usize],
) -> Result<ShiftMatrix> {
    test.check_same_shape(reference)?;
    let n = test.num_samples();
    cfg.validate(n)?;
    let c = test.num_channels();
    let test_ch: Vec<&[f64]> = test.channels().collect();
    let ref_ch: Vec<&[f64]> = reference.channels().collect();
    let spectra = Spectra::new(&test_ch, &ref_ch, cfg.lowpass);
    let et = test.channel_energies();
    let er = reference.channel_energies();

    let mut tau = ShiftMatrix::zeros(c);
    for row in (0..c).filter(|r| !silent_rows.contains(r)) {
        for col in (0..c).filter(|d| !silent_cols.contains(d)) {
            if et[row] == 0.0 || er[col] == 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "pair ({row}, {col}) has a zero-energy channel"
                )));
            }
            let corr = spectra.correlate(row, col, cfg.max_shift);
            tau.set(row, col, select_peak_lag(&corr, (et[row] * er[col]).sqrt()));
        }
    }
    validity_sets(&tau, n)?;
    Ok(tau)
}
