use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spatial_impairment::degrade::{
    add_noise, delay_channel, design_lowpass_with_fallback, filtfilt, pan_mono_to_stereo,
    FirMethod, LowpassSpec, DEFAULT_NUM_TAPS,
};
use spatial_impairment::metrics::{evaluate, Aggregate, AggregateScores, EvalConfig, FrameScores};
use spatial_impairment::sweep::{
    format_db, run_sweep, speech_shaped_source, white_noise_source, write_sweep_csv, SweepKind,
    SweepSpec,
};
use spatial_impairment::theory::PanParams;
use spatial_impairment::wav::{read_wav, validate_pair, write_wav, SampleFormat, WavMeta};
use spatial_impairment::{Error, MultichannelSignal};

#[derive(Parser)]
#[command(
    name = "spatial-eval",
    version,
    about = "Spatial (SSR) and residual (SRR) distortion scores for multichannel audio"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score an estimate against a reference.
    Eval(EvalArgs),
    /// Apply a synthetic degradation to a WAV file.
    Degrade {
        #[command(subcommand)]
        kind: DegradeCommand,
    },
    /// Sweep one degradation over a parameter grid and write CSV rows.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct EvalFlags {
    /// Frame length in seconds.
    #[arg(long, default_value_t = 2.0)]
    frame_secs: f64,
    /// Hop as a fraction of the frame length.
    #[arg(long, default_value_t = 0.5)]
    hop_frac: f64,
    /// Delay search limit in milliseconds.
    #[arg(long, default_value_t = 50.0)]
    max_shift_ms: f64,
    /// Silence threshold relative to the loudest channel energy.
    #[arg(long, default_value_t = 1e-6)]
    eps_rel: f64,
    /// Magnitude cap for reported dB values.
    #[arg(long, default_value_t = 80.0)]
    cap_db: f64,
    /// Cross-spectrum lowpass for the delay search, as a fraction of Nyquist.
    #[arg(long)]
    delay_lowpass: Option<f64>,
    #[arg(long, value_enum, default_value_t = AggregateArg::Median)]
    aggregate: AggregateArg,
}

impl EvalFlags {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            frame_seconds: self.frame_secs,
            hop_fraction: self.hop_frac,
            max_shift_ms: self.max_shift_ms,
            silence_eps_rel: self.eps_rel,
            db_cap: self.cap_db,
            lowpass: self.delay_lowpass,
            aggregate: match self.aggregate {
                AggregateArg::Median => Aggregate::Median,
                AggregateArg::Mean => Aggregate::Mean,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Median,
    Mean,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct EvalArgs {
    reference: PathBuf,
    estimate: PathBuf,
    #[command(flatten)]
    flags: EvalFlags,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Report destination; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WavFormatArg {
    Pcm16,
    Pcm24,
    Float32,
}

impl From<WavFormatArg> for SampleFormat {
    fn from(f: WavFormatArg) -> Self {
        match f {
            WavFormatArg::Pcm16 => Self::Pcm16,
            WavFormatArg::Pcm24 => Self::Pcm24,
            WavFormatArg::Float32 => Self::Float32,
        }
    }
}

#[derive(Args)]
struct DegradeIo {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Output sample format; defaults to the input format.
    #[arg(long, value_enum)]
    wav_format: Option<WavFormatArg>,
}

#[derive(Subcommand)]
enum DegradeCommand {
    /// Pan a mono file into stereo with the constant-power law.
    #[command(allow_negative_numbers = true)]
    Pan {
        #[command(flatten)]
        io: DegradeIo,
        /// Pan position in [-1, 1], -1 is hard left.
        #[arg(long)]
        p: f64,
    },
    /// Delay one channel, zero-filling its head.
    Delay {
        #[command(flatten)]
        io: DegradeIo,
        /// Delay in samples.
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        channel: usize,
    },
    /// Zero-phase equiripple lowpass with a one-third-octave transition.
    Lowpass {
        #[command(flatten)]
        io: DegradeIo,
        #[arg(long)]
        cutoff_hz: f64,
        /// Odd number of filter taps.
        #[arg(long, default_value_t = DEFAULT_NUM_TAPS)]
        taps: usize,
    },
    /// Add seeded white Gaussian noise at an exact SNR.
    #[command(allow_negative_numbers = true)]
    Noise {
        #[command(flatten)]
        io: DegradeIo,
        #[arg(long)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Pan,
    Delay,
    Lowpass,
    Noise,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Reference pan.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Test pans, comma separated. Pan sweeps default to -1..1 in steps
    /// of 0.25; other kinds default to the reference pan.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p_hats: Vec<f64>,
    /// Parameter grid, comma separated: delays in samples, cutoffs in Hz or
    /// SNRs in dB. Defaults to the standard grid of the kind.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
    /// `white`, `speech` or the path of a mono WAV file.
    #[arg(long, default_value = "white")]
    source: String,
    /// Length of a synthetic source in seconds.
    #[arg(long, default_value_t = 2.0)]
    seconds: f64,
    /// Sample rate of a synthetic source.
    #[arg(long, default_value_t = 16000)]
    sample_rate: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    flags: EvalFlags,
    /// CSV destination; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidSignal(_)
            | Error::InvalidParameter(_)
            | Error::ShapeMismatch(_)
            | Error::SignalTooShort { .. }
            | Error::DelayTooLarge { .. }
            | Error::SilentSignal
            | Error::MalformedHeader(_)
            | Error::UnsupportedFormat(_)
            | Error::TruncatedData { .. }
            | Error::SampleRateMismatch { .. }
            | Error::ChannelCountMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::Io(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_input(path: &Path) -> Result<(MultichannelSignal, WavMeta), Failure> {
    read_wav(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

#[derive(Serialize)]
struct CliReport<'a> {
    config: &'a EvalConfig,
    reference_meta: WavMeta,
    estimate_meta: WavMeta,
    evaluated_samples: usize,
    frame_len: usize,
    hop_len: usize,
    warnings: Vec<String>,
    frames: &'a [FrameScores],
    aggregate: &'a AggregateScores,
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let cfg = args.flags.config();
    let (reference, ref_meta) = read_input(&args.reference)?;
    let (estimate, est_meta) = read_input(&args.estimate)?;
    let pair = validate_pair(&ref_meta, &est_meta)?;
    if let Some(w) = &pair.warning {
        eprintln!("warning: {w}");
    }
    let reference = reference.truncate(pair.num_samples)?;
    let estimate = estimate.truncate(pair.num_samples)?;
    let report = evaluate(&estimate, &reference, &cfg)?;

    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        ReportFormat::Json => {
            let doc = CliReport {
                config: &cfg,
                reference_meta: ref_meta,
                estimate_meta: est_meta,
                evaluated_samples: pair.num_samples,
                frame_len: report.frame_len,
                hop_len: report.hop_len,
                warnings: pair.warning.into_iter().collect(),
                frames: &report.frames,
                aggregate: &report.aggregate,
            };
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| internal(e.to_string()))?;
            writeln!(out)?;
        }
        ReportFormat::Csv => write_eval_csv(&mut out, &report.frames, &report.aggregate)?,
    }
    out.flush()?;
    drop(out);

    let summary = format!(
        "SSR {} dB  SRR {} dB  ({} of {} frames scored, {})",
        format_summary(report.aggregate.ssr_db),
        format_summary(report.aggregate.srr_db),
        report.aggregate.frames_ok,
        report.frames.len(),
        aggregate_name(report.aggregate.method),
    );
    // keep standard output machine-readable when it carries the report
    if args.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if report.aggregate.frames_ok == 0 {
        return Err(internal("no frame could be scored"));
    }
    Ok(())
}

fn aggregate_name(a: Aggregate) -> &'static str {
    match a {
        Aggregate::Median => "median",
        Aggregate::Mean => "mean",
    }
}

fn format_summary(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.2}"))
}

fn write_eval_csv(
    out: &mut dyn Write,
    frames: &[FrameScores],
    agg: &AggregateScores,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| internal(e.to_string());
    w.write_record(["frame_index", "start_sample", "ssr_db", "srr_db", "status"])
        .map_err(csv_err)?;
    for f in frames {
        let status = serde_json::to_value(f.status).map_err(|e| internal(e.to_string()))?;
        w.write_record([
            f.frame_index.to_string(),
            f.start_sample.to_string(),
            format_db(f.ssr_db),
            format_db(f.srr_db),
            status.as_str().unwrap_or_default().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.write_record([
        "aggregate".to_string(),
        String::new(),
        format_db(agg.ssr_db),
        format_db(agg.srr_db),
        aggregate_name(agg.method).to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

fn write_degraded(
    io: &DegradeIo,
    x: &MultichannelSignal,
    input_format: SampleFormat,
) -> Result<(), Failure> {
    let format = io.wav_format.map_or(input_format, SampleFormat::from);
    let clipped = write_wav(&io.output, x, format)?;
    if clipped > 0 {
        eprintln!(
            "warning: {clipped} samples clipped while writing {}",
            io.output.display()
        );
    }
    Ok(())
}

fn cmd_degrade(kind: &DegradeCommand) -> Result<(), Failure> {
    let io = match kind {
        DegradeCommand::Pan { io, .. }
        | DegradeCommand::Delay { io, .. }
        | DegradeCommand::Lowpass { io, .. }
        | DegradeCommand::Noise { io, .. } => io,
    };
    let (x, meta) = read_input(&io.input)?;
    let y = match kind {
        DegradeCommand::Pan { p, .. } => pan_mono_to_stereo(&x, PanParams::new(*p)?)?,
        DegradeCommand::Delay {
            samples, channel, ..
        } => delay_channel(&x, *channel, *samples)?,
        DegradeCommand::Lowpass {
            cutoff_hz, taps, ..
        } => {
            let spec = LowpassSpec {
                num_taps: *taps,
                ..LowpassSpec::new(*cutoff_hz, x.sample_rate())
            };
            let (h, method) = design_lowpass_with_fallback(&spec)?;
            if method == FirMethod::KaiserFallback {
                eprintln!("warning: Remez exchange did not converge; used a Kaiser-windowed sinc");
            }
            filtfilt(&x, &h)?
        }
        DegradeCommand::Noise { snr_db, seed, .. } => add_noise(&x, *snr_db, *seed)?,
    };
    write_degraded(io, &y, meta.format)
}

fn default_grid(kind: SweepKind, p: f64) -> (Vec<f64>, Vec<f64>) {
    match kind {
        SweepKind::Pan => ((0..=8).map(|i| -1.0 + 0.25 * i as f64).collect(), vec![]),
        SweepKind::Delay => (vec![-0.5, 0.0, 0.5], vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0]),
        SweepKind::Lowpass => (vec![p], vec![500.0, 1000.0, 2000.0, 4000.0, 8000.0]),
        SweepKind::Noise => (vec![p], vec![-24.0, -12.0, 0.0, 12.0, 24.0]),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let kind = match args.kind {
        KindArg::Pan => SweepKind::Pan,
        KindArg::Delay => SweepKind::Delay,
        KindArg::Lowpass => SweepKind::Lowpass,
        KindArg::Noise => SweepKind::Noise,
    };
    let (default_p_hats, default_params) = default_grid(kind, args.p);
    let spec = SweepSpec {
        kind,
        p: args.p,
        p_hats: if args.p_hats.is_empty() {
            default_p_hats
        } else {
            args.p_hats.clone()
        },
        params: if args.params.is_empty() {
            default_params
        } else {
            args.params.clone()
        },
        seed: args.seed,
    };
    let synthetic_len = || -> Result<usize, Failure> {
        let n = args.seconds * args.sample_rate as f64;
        if n.is_nan() || n < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "source length {} s is too short",
                args.seconds
            ))
            .into());
        }
        Ok(n.round() as usize)
    };
    let source = match args.source.as_str() {
        "white" => white_noise_source(synthetic_len()?, args.sample_rate, args.seed)?,
        "speech" => speech_shaped_source(synthetic_len()?, args.sample_rate, args.seed)?,
        path => read_input(Path::new(path))?.0,
    };
    let rows = run_sweep(&source, &spec, &args.flags.config())?;
    let mut out = open_output(args.output.as_deref())?;
    write_sweep_csv(&mut out, &rows)?;
    out.flush()?;
    for r in rows.iter().filter(|r| r.status != "ok") {
        eprintln!(
            "warning: point p_hat={} param={:?} failed: {}",
            r.p_hat, r.param, r.status
        );
    }
    if rows.iter().all(|r| r.status != "ok") {
        return Err(internal("every sweep point failed"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Degrade { kind } => cmd_degrade(kind),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
