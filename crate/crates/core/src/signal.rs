//! Value types shared by the decomposition: planar multichannel signals,
//! the shift and gain matrices of the projection model, and the sample
//! index sets on which shifted reads are valid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar (channel-major) block of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    data: Vec<f64>,
    channels: usize,
    sample_rate: u32,
}

impl MultichannelSignal {
    /// Builds a signal from one vector per channel.
    pub fn from_channels(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidSignal("no channels".into()));
        }
        let n = channels[0].len();
        if channels.iter().any(|ch| ch.len() != n) {
            return Err(Error::InvalidSignal("channels differ in length".into()));
        }
        let count = channels.len();
        Self::from_planar(channels.concat(), count, sample_rate)
    }

    /// Builds a signal from planar data of `channels * n` samples.
    pub fn from_planar(data: Vec<f64>, channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 || data.is_empty() || !data.len().is_multiple_of(channels) {
            return Err(Error::InvalidSignal(format!(
                "{} samples cannot form {} non-empty channels",
                data.len(),
                channels
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite sample at {i}")));
        }
        Ok(Self {
            data,
            channels,
            sample_rate,
        })
    }

    /// Single channel signal.
    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::from_planar(samples, 1, sample_rate)
    }

    pub fn zeros(channels: usize, n_samples: usize, sample_rate: u32) -> Result<Self> {
        Self::from_planar(vec![0.0; channels * n_samples], channels, sample_rate)
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn num_samples(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.num_samples();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channels(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.num_samples())
    }

    pub fn as_planar(&self) -> &[f64] {
        &self.data
    }

    /// Samples `range` of every channel, as a new signal.
    pub fn slice(&self, range: SampleRange) -> Result<Self> {
        if range.is_empty() || range.end > self.num_samples() {
            return Err(Error::InvalidParameter(format!(
                "range [{}, {}) outside signal of {} samples",
                range.start,
                range.end,
                self.num_samples()
            )));
        }
        let data = self
            .channels()
            .flat_map(|ch| ch[range.start..range.end].iter().copied())
            .collect();
        Ok(Self {
            data,
            channels: self.channels,
            sample_rate: self.sample_rate,
        })
    }

    /// Keeps the first `n` samples of every channel.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        self.slice(SampleRange::new(0, n))
    }

    /// Applies `f` to every sample; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_planar(
            self.data.iter().map(|&x| f(x)).collect(),
            self.channels,
            self.sample_rate,
        )
    }

    pub fn scaled(&self, gain: f64) -> Result<Self> {
        self.map(|x| gain * x)
    }

    /// Reorders channels so that output channel `i` is input channel `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.channels || perm.iter().any(|&p| p >= self.channels) {
            return Err(Error::InvalidParameter(
                "invalid channel permutation".into(),
            ));
        }
        Self::from_channels(
            perm.iter().map(|&p| self.channel(p).to_vec()).collect(),
            self.sample_rate,
        )
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        let n = self.num_samples();
        self.data.chunks_exact(n).map(<[f64]>::to_vec).collect()
    }

    /// Per-channel energy over all samples.
    pub fn channel_energies(&self) -> Vec<f64> {
        self.channels()
            .map(|ch| ch.iter().map(|x| x * x).sum())
            .collect()
    }

    /// Checks that `other` has the same channel count, length and rate.
    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.channels != other.channels
            || self.num_samples() != other.num_samples()
            || self.sample_rate != other.sample_rate
        {
            return Err(Error::ShapeMismatch(format!(
                "{}ch x {} @ {} Hz vs {}ch x {} @ {} Hz",
                self.channels,
                self.num_samples(),
                self.sample_rate,
                other.channels,
                other.num_samples(),
                other.sample_rate
            )));
        }
        Ok(())
    }
}

/// Half-open sample interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleRange {
    pub start: usize,
    pub end: usize,
}

impl SampleRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn full(n: usize) -> Self {
        Self { start: 0, end: n }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            start: self.start.max(other.start),
            end: self.end.min(other.end),
        }
    }

    pub fn contains_range(&self, other: &Self) -> bool {
        other.is_empty() || (self.start <= other.start && other.end <= self.end)
    }

    /// `[max(0, lag), n + min(0, lag))`: indices `i` where `x[i - lag]` exists.
    pub fn for_lag(lag: i64, n: usize) -> Self {
        let n = n as i64;
        let start = lag.max(0);
        let end = (n + lag.min(0)).max(start);
        Self {
            start: start.min(n) as usize,
            end: end.clamp(0, n) as usize,
        }
    }
}

/// Integer delays `tau[c][d]` applied to reference channel `d` when
/// projecting onto test channel `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftMatrix {
    channels: usize,
    tau: Vec<i64>,
}

impl ShiftMatrix {
    pub fn zeros(channels: usize) -> Self {
        Self {
            channels,
            tau: vec![0; channels * channels],
        }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let c = rows.len();
        if c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidParameter(
                "shift matrix must be square".into(),
            ));
        }
        Ok(Self {
            channels: c,
            tau: rows.concat(),
        })
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, c: usize, d: usize) -> i64 {
        self.tau[c * self.channels + d]
    }

    pub fn set(&mut self, c: usize, d: usize, tau: i64) {
        self.tau[c * self.channels + d] = tau;
    }

    pub fn row(&self, c: usize) -> &[i64] {
        &self.tau[c * self.channels..(c + 1) * self.channels]
    }

    pub fn max_abs(&self) -> u64 {
        self.tau.iter().map(|t| t.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        self.tau
            .chunks(self.channels)
            .map(<[i64]>::to_vec)
            .collect()
    }
}

/// Leakage gains `a[c][d]` from reference channel `d` into test channel `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    channels: usize,
    a: Vec<f64>,
}

impl GainMatrix {
    pub fn zeros(channels: usize) -> Self {
        Self {
            channels,
            a: vec![0.0; channels * channels],
        }
    }

    pub fn identity(channels: usize) -> Self {
        let mut m = Self::zeros(channels);
        for c in 0..channels {
            m.set(c, c, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.len();
        if c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidParameter("gain matrix must be square".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "gain matrix has non-finite entries".into(),
            ));
        }
        Ok(Self {
            channels: c,
            a: rows.concat(),
        })
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, c: usize, d: usize) -> f64 {
        self.a[c * self.channels + d]
    }

    pub fn set(&mut self, c: usize, d: usize, value: f64) {
        self.a[c * self.channels + d] = value;
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.a[c * self.channels..(c + 1) * self.channels]
    }

    pub fn set_row(&mut self, c: usize, row: &[f64]) {
        self.a[c * self.channels..(c + 1) * self.channels].copy_from_slice(row);
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.channels).map(<[f64]>::to_vec).collect()
    }
}

/// Index sets on which every shifted read of the projection model is valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValiditySets {
    channels: usize,
    per_pair: Vec<SampleRange>,
    per_channel: Vec<SampleRange>,
    global: SampleRange,
}

impl ValiditySets {
    pub fn pair(&self, c: usize, d: usize) -> SampleRange {
        self.per_pair[c * self.channels + d]
    }

    pub fn channel(&self, c: usize) -> SampleRange {
        self.per_channel[c]
    }

    pub fn global(&self) -> SampleRange {
        self.global
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }
}

/// Computes the per-pair, per-channel and global validity ranges for `tau`
/// on signals of `n_samples`.
pub fn validity_sets(tau: &ShiftMatrix, n_samples: usize) -> Result<ValiditySets> {
    let c = tau.num_channels();
    let full = SampleRange::full(n_samples);
    let per_pair: Vec<_> = (0..c * c)
        .map(|i| SampleRange::for_lag(tau.tau[i], n_samples))
        .collect();
    let per_channel: Vec<_> = per_pair
        .chunks(c)
        .map(|row| row.iter().fold(full, |acc, r| acc.intersect(r)))
        .collect();
    let global = per_channel.iter().fold(full, |acc, r| acc.intersect(r));
    if global.is_empty() || per_channel.iter().any(SampleRange::is_empty) {
        return Err(Error::EmptyValiditySet { n_samples });
    }
    Ok(ValiditySets {
        channels: c,
        per_pair,
        per_channel,
        global,
    })
}

/// Sum of squared samples over all channels within `idx`.
pub fn energy(x: &MultichannelSignal, idx: SampleRange) -> f64 {
    x.channels()
        .map(|ch| sum_squares(&ch[idx.start..idx.end]))
        .sum()
}

pub(crate) fn sum_squares(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
