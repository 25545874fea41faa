//! Synthetic degradations: constant-power panning, single-channel delay,
//! zero-phase lowpass filtering and additive Gaussian noise.

pub mod remez;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{sum_squares, MultichannelSignal};
use crate::theory::PanParams;

pub use remez::{remez, Band, RemezDesign};

/// Places a mono signal in a stereo field with the constant-power law.
pub fn pan_mono_to_stereo(v: &MultichannelSignal, pan: PanParams) -> Result<MultichannelSignal> {
    if v.num_channels() != 1 {
        return Err(Error::InvalidSignal(format!(
            "panning needs a mono source, got {} channels",
            v.num_channels()
        )));
    }
    let (gl, gr) = (pan.left_gain(), pan.right_gain());
    let src = v.channel(0);
    MultichannelSignal::from_channels(
        vec![
            src.iter().map(|x| gl * x).collect(),
            src.iter().map(|x| gr * x).collect(),
        ],
        v.sample_rate(),
    )
}

/// Delays one channel by `d` samples, zero-filling the head and dropping
/// the tail.
pub fn delay_channel(
    x: &MultichannelSignal,
    channel: usize,
    d: usize,
) -> Result<MultichannelSignal> {
    let n = x.num_samples();
    if channel >= x.num_channels() {
        return Err(Error::InvalidParameter(format!(
            "channel {channel} out of range for {} channels",
            x.num_channels()
        )));
    }
    if d >= n {
        return Err(Error::DelayTooLarge { delay: d, len: n });
    }
    let mut chans = x.clone().into_channels();
    let ch = &mut chans[channel];
    ch.copy_within(0..n - d, d);
    ch[..d].fill(0.0);
    MultichannelSignal::from_channels(chans, x.sample_rate())
}

/// Adds seeded white Gaussian noise scaled so that the realised SNR over
/// all channels equals `snr_db`.
pub fn add_noise(x: &MultichannelSignal, snr_db: f64, seed: u64) -> Result<MultichannelSignal> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "SNR {snr_db} dB is not finite"
        )));
    }
    let signal = sum_squares(x.as_planar());
    if signal == 0.0 {
        return Err(Error::SilentSignal);
    }
    let noise = gaussian_noise(x.as_planar().len(), seed);
    let scale = (signal / (sum_squares(&noise) * 10f64.powf(snr_db / 10.0))).sqrt();
    MultichannelSignal::from_planar(
        x.as_planar()
            .iter()
            .zip(&noise)
            .map(|(s, w)| s + scale * w)
            .collect(),
        x.num_channels(),
        x.sample_rate(),
    )
}

/// Unit-variance Gaussian samples from a seeded ChaCha8 stream.
pub fn gaussian_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Default filter order 128, i.e. 129 symmetric taps.
pub const DEFAULT_NUM_TAPS: usize = 129;

/// Equiripple lowpass with a one-third-octave transition band centred
/// geometrically on the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowpassSpec {
    pub num_taps: usize,
    pub cutoff_hz: f64,
    pub sample_rate: u32,
}

impl LowpassSpec {
    pub fn new(cutoff_hz: f64, sample_rate: u32) -> Self {
        Self {
            num_taps: DEFAULT_NUM_TAPS,
            cutoff_hz,
            sample_rate,
        }
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn passband_edge_hz(&self) -> f64 {
        self.cutoff_hz * 2f64.powf(-1.0 / 6.0)
    }

    /// Upper transition edge, truncated at Nyquist.
    pub fn stopband_edge_hz(&self) -> f64 {
        (self.cutoff_hz * 2f64.powf(1.0 / 6.0)).min(self.nyquist())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_taps < 3 || self.num_taps.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "tap count {} must be odd and at least 3",
                self.num_taps
            )));
        }
        if self.sample_rate == 0 || !(self.cutoff_hz > 0.0) {
            return Err(Error::InvalidParameter(
                "cutoff and rate must be positive".into(),
            ));
        }
        if self.passband_edge_hz() >= self.nyquist() {
            return Err(Error::InvalidParameter(format!(
                "cutoff {} Hz leaves no stopband below Nyquist {} Hz",
                self.cutoff_hz,
                self.nyquist()
            )));
        }
        Ok(())
    }

    fn bands(&self) -> [Band; 2] {
        let fs = self.sample_rate as f64;
        [
            Band {
                low: 0.0,
                high: self.passband_edge_hz() / fs,
                desired: 1.0,
                weight: 1.0,
            },
            Band {
                low: self.stopband_edge_hz() / fs,
                high: 0.5,
                desired: 0.0,
                weight: 1.0,
            },
        ]
    }
}

/// Parks-McClellan lowpass for `spec`.
pub fn design_lowpass_fir(spec: &LowpassSpec) -> Result<RemezDesign> {
    spec.validate()?;
    remez(spec.num_taps, &spec.bands())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirMethod {
    Remez,
    KaiserFallback,
}

/// Remez design, or a Kaiser-windowed sinc when the exchange fails.
pub fn design_lowpass_with_fallback(spec: &LowpassSpec) -> Result<(Vec<f64>, FirMethod)> {
    match design_lowpass_fir(spec) {
        Ok(d) => Ok((d.taps, FirMethod::Remez)),
        Err(Error::NoConvergence(_)) => {
            Ok((design_lowpass_kaiser(spec)?, FirMethod::KaiserFallback))
        }
        Err(e) => Err(e),
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc with the same band edges as the Remez design.
pub fn design_lowpass_kaiser(spec: &LowpassSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let fs = spec.sample_rate as f64;
    let (fp, fst) = (spec.passband_edge_hz() / fs, spec.stopband_edge_hz() / fs);
    let fc = 0.5 * (fp + fst);
    let m = (spec.num_taps - 1) as f64;
    let atten = 14.6 * (fst - fp) * m + 7.95;
    let beta = if atten > 50.0 {
        0.1102 * (atten - 8.7)
    } else if atten > 21.0 {
        0.5842 * (atten - 21.0).powf(0.4) + 0.07886 * (atten - 21.0)
    } else {
        0.0
    };
    let denom = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..spec.num_taps)
        .map(|n| {
            let t = n as f64 - m / 2.0;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
            };
            let r = 2.0 * n as f64 / m - 1.0;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= dc);
    Ok(taps)
}

fn fir(h: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let kmax = n.min(h.len() - 1);
            (0..=kmax).map(|k| h[k] * x[n - k]).sum()
        })
        .collect()
}

/// Zero-phase forward-backward FIR filtering with odd reflection padding
/// of `len(coeffs) - 1` samples at each end.
pub fn filtfilt(x: &MultichannelSignal, coeffs: &[f64]) -> Result<MultichannelSignal> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("empty filter".into()));
    }
    let n = x.num_samples();
    let needed = 3 * coeffs.len() + 1;
    if n < needed {
        return Err(Error::SignalTooShort { needed, got: n });
    }
    let pad = coeffs.len() - 1;
    let chans = x
        .channels()
        .map(|ch| {
            let (first, last) = (ch[0], ch[n - 1]);
            let mut ext = Vec::with_capacity(n + 2 * pad);
            ext.extend((1..=pad).rev().map(|i| 2.0 * first - ch[i]));
            ext.extend_from_slice(ch);
            ext.extend((1..=pad).map(|i| 2.0 * last - ch[n - 1 - i]));
            let mut y = fir(coeffs, &ext);
            y.reverse();
            let mut y = fir(coeffs, &y);
            y.reverse();
            y[pad..pad + n].to_vec()
        })
        .collect();
    MultichannelSignal::from_channels(chans, x.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pan(p: f64) -> PanParams {
        PanParams::new(p).unwrap()
    }

    fn amplitude(h: &[f64], f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, c) in h.iter().enumerate() {
            re += c * (2.0 * PI * f * n as f64).cos();
            im -= c * (2.0 * PI * f * n as f64).sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn pan_examples() {
        let v = MultichannelSignal::mono(vec![1.0, -2.0, 0.5], 100).unwrap();
        let left = pan_mono_to_stereo(&v, pan(-1.0)).unwrap();
        assert_eq!(left.channel(0), v.channel(0));
        assert!(left.channel(1).iter().all(|x| x.abs() < 1e-15));

        let mid = pan_mono_to_stereo(&v, pan(0.0)).unwrap();
        let g = 0.5f64.sqrt();
        for (i, &s) in v.channel(0).iter().enumerate() {
            assert!((mid.channel(0)[i] - g * s).abs() < 1e-15);
            assert!((mid.channel(0)[i] - mid.channel(1)[i]).abs() < 1e-15);
        }

        let stereo = MultichannelSignal::zeros(2, 3, 100).unwrap();
        assert!(pan_mono_to_stereo(&stereo, pan(0.0)).is_err());
    }

    #[test]
    fn pan_preserves_energy_on_a_grid() {
        let v = MultichannelSignal::mono(gaussian_noise(257, 1), 100).unwrap();
        let e = sum_squares(v.as_planar());
        for i in 0..=100 {
            let out = pan_mono_to_stereo(&v, pan(-1.0 + 0.02 * i as f64)).unwrap();
            assert!((sum_squares(out.as_planar()) - e).abs() <= 1e-12 * e);
        }
    }

    #[test]
    fn delay_examples() {
        let x = MultichannelSignal::from_channels(
            vec![
                vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                vec![2.0; 9],
            ],
            100,
        )
        .unwrap();
        assert_eq!(delay_channel(&x, 0, 0).unwrap(), x);
        let y = delay_channel(&x, 0, 4).unwrap();
        assert_eq!(y.channel(0)[7], 1.0);
        assert_eq!(y.channel(0).iter().sum::<f64>(), 1.0);
        assert_eq!(y.channel(1), x.channel(1));
        assert!(matches!(
            delay_channel(&x, 0, 9),
            Err(Error::DelayTooLarge { .. })
        ));
        assert!(delay_channel(&x, 2, 1).is_err());

        let z = MultichannelSignal::mono(gaussian_noise(64, 2), 100).unwrap();
        let d = delay_channel(&z, 0, 5).unwrap();
        let lost: f64 = z.channel(0)[59..].iter().map(|v| v * v).sum();
        let before = sum_squares(z.as_planar());
        assert!((before - sum_squares(d.as_planar()) - lost).abs() < 1e-12 * before);
    }

    #[test]
    fn noise_is_exact_and_deterministic() {
        let x = MultichannelSignal::mono(gaussian_noise(1000, 3), 100).unwrap();
        let y = add_noise(&x, 0.0, 1).unwrap();
        let e_noise: f64 = y
            .as_planar()
            .iter()
            .zip(x.as_planar())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let e_sig = sum_squares(x.as_planar());
        assert!((e_noise - e_sig).abs() < 1e-9 * e_sig);
        assert_eq!(add_noise(&x, 0.0, 1).unwrap(), y);
        assert_ne!(add_noise(&x, 0.0, 2).unwrap(), y);

        for snr in [-24.0, -3.5, 12.0, 40.0] {
            let y = add_noise(&x, snr, 9).unwrap();
            let e_noise: f64 = y
                .as_planar()
                .iter()
                .zip(x.as_planar())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            assert!((10.0 * (e_sig / e_noise).log10() - snr).abs() < 1e-9);
        }

        let z = MultichannelSignal::zeros(1, 10, 100).unwrap();
        assert!(matches!(add_noise(&z, 0.0, 1), Err(Error::SilentSignal)));
    }

    #[test]
    fn lowpass_response() {
        let spec = LowpassSpec::new(2000.0, 16000);
        let d = design_lowpass_fir(&spec).unwrap();
        let h = &d.taps;
        assert_eq!(h.len(), 129);
        for k in 0..64 {
            assert_eq!(h[k], h[128 - k]);
        }
        let dc: f64 = h.iter().sum();
        assert!((dc - 1.0).abs() <= d.ripple * 1.001);
        assert!(amplitude(h, 0.5) <= d.ripple * 1.001);
    }

    #[test]
    fn lowpass_equiripple_alternation() {
        for cutoff in [500.0, 1000.0, 2000.0, 4000.0] {
            let spec = LowpassSpec::new(cutoff, 16000);
            let d = design_lowpass_fir(&spec).unwrap();
            let fs = 16000.0;
            let (fp, fst) = (spec.passband_edge_hz() / fs, spec.stopband_edge_hz() / fs);
            // weighted error on a dense grid, evaluated from the taps directly
            let m = 64.0;
            let grid: Vec<(usize, f64)> = (0..=20000)
                .map(|i| i as f64 * 0.5 / 20000.0)
                .filter_map(|f| {
                    let band = if f <= fp {
                        0
                    } else if f >= fst {
                        1
                    } else {
                        return None;
                    };
                    Some((band, f))
                })
                .collect();
            let mut grid = grid;
            grid.push((0, fp));
            grid.push((1, fst));
            grid.sort_by(|a, b| a.1.total_cmp(&b.1));
            let err: Vec<(usize, f64)> = grid
                .iter()
                .map(|&(b, f)| {
                    let a: f64 = d
                        .taps
                        .iter()
                        .enumerate()
                        .map(|(n, c)| c * (2.0 * PI * f * (n as f64 - m)).cos())
                        .sum();
                    (b, if b == 0 { 1.0 - a } else { -a })
                })
                .collect();
            let mut ext: Vec<f64> = Vec::new();
            for i in 0..err.len() {
                let (b, e) = err[i];
                let l = (i > 0 && err[i - 1].0 == b).then(|| err[i - 1].1);
                let r = (i + 1 < err.len() && err[i + 1].0 == b).then(|| err[i + 1].1);
                let is_ext =
                    l.is_none_or(|v| e.abs() >= v.abs()) && r.is_none_or(|v| e.abs() >= v.abs());
                if is_ext && e.abs() > 0.5 * d.ripple {
                    if ext.last().is_some_and(|&p: &f64| p.signum() == e.signum()) {
                        let last = ext.last_mut().unwrap();
                        if e.abs() > last.abs() {
                            *last = e;
                        }
                    } else {
                        ext.push(e);
                    }
                }
            }
            assert!(
                ext.len() >= 66,
                "cutoff {cutoff}: {} alternations",
                ext.len()
            );
            let peak = ext.iter().fold(0.0f64, |a, e| a.max(e.abs()));
            let low = ext.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
            assert!(
                peak - low <= 0.01 * peak,
                "cutoff {cutoff}: {low} .. {peak}"
            );
            assert!((peak - d.ripple).abs() <= 0.01 * peak);
        }
    }

    #[test]
    fn nyquist_cutoff_falls_back_to_kaiser() {
        // the stopband collapses to the Nyquist point, which the exchange cannot level
        let spec = LowpassSpec::new(8000.0, 16000);
        assert_eq!(spec.stopband_edge_hz(), 8000.0);
        assert!(matches!(
            design_lowpass_fir(&spec),
            Err(Error::NoConvergence(_))
        ));
        let (h, method) = design_lowpass_with_fallback(&spec).unwrap();
        assert_eq!(method, FirMethod::KaiserFallback);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(amplitude(&h, 0.5) < 1e-3);
        assert!((amplitude(&h, 0.25) - 1.0).abs() < 1e-3);
        let (_, method) = design_lowpass_with_fallback(&LowpassSpec::new(4000.0, 16000)).unwrap();
        assert_eq!(method, FirMethod::Remez);
    }

    #[test]
    fn lowpass_rejects_bad_specs() {
        assert!(design_lowpass_fir(&LowpassSpec::new(9000.0, 16000)).is_err());
        assert!(design_lowpass_fir(&LowpassSpec {
            num_taps: 128,
            ..LowpassSpec::new(1000.0, 16000)
        })
        .is_err());
        assert!(design_lowpass_fir(&LowpassSpec::new(0.0, 16000)).is_err());
    }

    #[test]
    fn kaiser_fallback_is_a_lowpass() {
        let spec = LowpassSpec::new(2000.0, 16000);
        let h = design_lowpass_kaiser(&spec).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(amplitude(&h, 4000.0 / 16000.0) < 1e-3);
    }

    #[test]
    fn filtfilt_identity_and_length_check() {
        let x = MultichannelSignal::mono(gaussian_noise(64, 4), 100).unwrap();
        assert_eq!(filtfilt(&x, &[1.0]).unwrap(), x);
        assert!(matches!(
            filtfilt(&x, &[0.1; 23]),
            Err(Error::SignalTooShort { .. })
        ));
    }

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn filtfilt_passband_tone_keeps_amplitude_and_phase() {
        let fs = 16000.0;
        let spec = LowpassSpec::new(2000.0, 16000);
        let d = design_lowpass_fir(&spec).unwrap();
        let n = 8000;
        let x = MultichannelSignal::mono(tone(500.0, fs, n), 16000).unwrap();
        let y = filtfilt(&x, &d.taps).unwrap();
        // least-squares sinusoid fit on the interior
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 1000..n - 1000 {
            let w = 2.0 * PI * 500.0 * i as f64 / fs;
            let (s, c) = (w.sin(), w.cos());
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += y.channel(0)[i] * s;
            yc += y.channel(0)[i] * c;
        }
        let det = ss * cc - sc * sc;
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        let amp = (a * a + b * b).sqrt();
        assert!((amp - 1.0).abs() <= 2.0 * d.ripple + 1e-9, "amp {amp}");
        assert!(b.atan2(a).abs() < 1e-6, "phase {}", b.atan2(a));

        // cross-correlation peak at lag zero
        let best = (-20i64..=20)
            .max_by(|&p, &q| {
                let corr = |lag: i64| -> f64 {
                    (100..n - 100)
                        .map(|i| x.channel(0)[i] * y.channel(0)[(i as i64 + lag) as usize])
                        .sum()
                };
                corr(p).total_cmp(&corr(q))
            })
            .unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn filtfilt_stopband_tone_is_attenuated() {
        let fs = 16000.0;
        let spec = LowpassSpec::new(2000.0, 16000);
        let d = design_lowpass_fir(&spec).unwrap();
        let stop_db = -20.0 * d.ripple.log10();
        let n = 8000;
        let x = MultichannelSignal::mono(tone(5000.0, fs, n), 16000).unwrap();
        let y = filtfilt(&x, &d.taps).unwrap();
        let rms = |v: &[f64]| (v.iter().map(|s| s * s).sum::<f64>() / v.len() as f64).sqrt();
        let atten = 20.0
            * (rms(&x.channel(0)[1000..n - 1000]) / rms(&y.channel(0)[1000..n - 1000])).log10();
        assert!(
            atten >= 2.0 * stop_db,
            "{atten} dB vs {stop_db} dB stopband"
        );
    }
}
