//! RIFF/WAVE reading and writing for 16/24-bit PCM and 32-bit float.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Longest length mismatch that is always trimmed, in samples.
pub const TRIM_FLOOR_SAMPLES: usize = 1024;
/// Relative length mismatch that is trimmed beyond the floor.
pub const TRIM_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleFormat {
    #[serde(rename = "pcm16")]
    Pcm16,
    #[serde(rename = "pcm24")]
    Pcm24,
    #[serde(rename = "float32")]
    Float32,
}

impl SampleFormat {
    pub fn bits(self) -> u16 {
        match self {
            Self::Pcm16 => 16,
            Self::Pcm24 => 24,
            Self::Float32 => 32,
        }
    }

    fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    fn tag(self) -> u16 {
        match self {
            Self::Float32 => FORMAT_FLOAT,
            _ => FORMAT_PCM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WavMeta {
    pub sample_rate: u32,
    pub channels: usize,
    pub format: SampleFormat,
    pub num_samples: usize,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a complete WAV file image.
pub fn decode_wav(bytes: &[u8]) -> Result<(MultichannelSignal, WavMeta)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedHeader("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(SampleFormat, usize, u32)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(Error::MalformedHeader(format!("fmt chunk of {size} bytes")));
                }
                fmt = Some(parse_fmt(&bytes[body..body + size])?);
            }
            b"data" => {
                let (format, channels, sample_rate) =
                    fmt.ok_or_else(|| Error::MalformedHeader("data chunk before fmt".into()))?;
                let frame = format.bytes() * channels;
                let available = bytes.len() - body;
                if size > available {
                    return Err(Error::TruncatedData {
                        expected: size,
                        found: available,
                    });
                }
                if !size.is_multiple_of(frame) {
                    return Err(Error::TruncatedData {
                        expected: size.div_ceil(frame) * frame,
                        found: size,
                    });
                }
                let n = size / frame;
                if n == 0 {
                    return Err(Error::MalformedHeader("data chunk holds no samples".into()));
                }
                let data = &bytes[body..body + size];
                let mut planar = vec![0.0; n * channels];
                let width = format.bytes();
                for i in 0..n {
                    for c in 0..channels {
                        let at = (i * channels + c) * width;
                        planar[c * n + i] = decode_sample(format, &data[at..at + width]);
                    }
                }
                let signal = MultichannelSignal::from_planar(planar, channels, sample_rate)?;
                let meta = WavMeta {
                    sample_rate,
                    channels,
                    format,
                    num_samples: n,
                };
                return Ok((signal, meta));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    Err(Error::MalformedHeader("no data chunk".into()))
}

fn parse_fmt(b: &[u8]) -> Result<(SampleFormat, usize, u32)> {
    let mut tag = u16_at(b, 0);
    let channels = u16_at(b, 2) as usize;
    let sample_rate = u32_at(b, 4);
    let bits = u16_at(b, 14);
    if tag == FORMAT_EXTENSIBLE {
        if b.len() < 26 {
            return Err(Error::MalformedHeader("short extensible fmt chunk".into()));
        }
        tag = u16_at(b, 24);
    }
    if channels == 0 || sample_rate == 0 {
        return Err(Error::MalformedHeader(format!(
            "{channels} channels at {sample_rate} Hz"
        )));
    }
    let format = match (tag, bits) {
        (FORMAT_PCM, 16) => SampleFormat::Pcm16,
        (FORMAT_PCM, 24) => SampleFormat::Pcm24,
        (FORMAT_FLOAT, 32) => SampleFormat::Float32,
        (t, b) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {t} with {b} bits per sample"
            )))
        }
    };
    Ok((format, channels, sample_rate))
}

fn decode_sample(format: SampleFormat, b: &[u8]) -> f64 {
    match format {
        SampleFormat::Pcm16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        SampleFormat::Pcm24 => {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        SampleFormat::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<(MultichannelSignal, WavMeta)> {
    decode_wav(&fs::read(path)?)
}

/// Encoded file plus the number of samples clipped to the integer range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub clipped: usize,
}

pub fn encode_wav(x: &MultichannelSignal, format: SampleFormat) -> Result<Encoded> {
    let channels = x.num_channels();
    let n = x.num_samples();
    let width = format.bytes();
    let data_len = n * channels * width;
    let riff_len = 4 + (8 + 16) + (8 + data_len);
    if riff_len > u32::MAX as usize {
        return Err(Error::InvalidParameter(
            "signal too long for a WAV file".into(),
        ));
    }
    let mut out = Vec::with_capacity(8 + riff_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(riff_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.tag().to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&x.sample_rate().to_le_bytes());
    out.extend_from_slice(&(x.sample_rate() * (channels * width) as u32).to_le_bytes());
    out.extend_from_slice(&((channels * width) as u16).to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let mut clipped = 0;
    let mut quantize = |v: f64, full: f64| -> i32 {
        let max = (full - 1.0) / full;
        if !(-1.0..=max).contains(&v) {
            clipped += 1;
        }
        (v.clamp(-1.0, max) * full).round() as i32
    };
    for i in 0..n {
        for c in 0..channels {
            let v = x.channel(c)[i];
            match format {
                SampleFormat::Pcm16 => {
                    out.extend_from_slice(&(quantize(v, 32768.0) as i16).to_le_bytes())
                }
                SampleFormat::Pcm24 => {
                    out.extend_from_slice(&quantize(v, 8_388_608.0).to_le_bytes()[..3])
                }
                SampleFormat::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    Ok(Encoded {
        bytes: out,
        clipped,
    })
}

/// Writes `x` and returns the clip count.
pub fn write_wav(
    path: impl AsRef<Path>,
    x: &MultichannelSignal,
    format: SampleFormat,
) -> Result<usize> {
    let enc = encode_wav(x, format)?;
    fs::write(path, &enc.bytes)?;
    Ok(enc.clipped)
}

/// Outcome of checking a reference/test pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCheck {
    /// Common length both signals should be trimmed to.
    pub num_samples: usize,
    pub warning: Option<String>,
}

/// Checks that two files can be compared sample-by-sample.
///
/// Lengths that differ by at most `max(TRIM_FLOOR_SAMPLES, TRIM_FRACTION * longest)`
/// are trimmed to the shorter one with a warning.
pub fn validate_pair(reference: &WavMeta, test: &WavMeta) -> Result<PairCheck> {
    if reference.sample_rate != test.sample_rate {
        return Err(Error::SampleRateMismatch {
            reference: reference.sample_rate,
            test: test.sample_rate,
        });
    }
    if reference.channels != test.channels {
        return Err(Error::ChannelCountMismatch {
            reference: reference.channels,
            test: test.channels,
        });
    }
    let (a, b) = (reference.num_samples, test.num_samples);
    if a == b {
        return Ok(PairCheck {
            num_samples: a,
            warning: None,
        });
    }
    let diff = a.abs_diff(b);
    let allowed = TRIM_FLOOR_SAMPLES.max((TRIM_FRACTION * a.max(b) as f64).floor() as usize);
    if diff > allowed {
        return Err(Error::LengthMismatch {
            reference: a,
            test: b,
        });
    }
    Ok(PairCheck {
        num_samples: a.min(b),
        warning: Some(format!(
            "lengths differ ({a} vs {b} samples); trimming both to {}",
            a.min(b)
        )),
    })
}
