use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spatial_impairment::sweep::white_noise_source;
use spatial_impairment::wav::{read_wav, write_wav, SampleFormat};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spatial-eval"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two seconds of mono noise at 16 kHz, written as float32.
fn mono_source(dir: &Path) -> PathBuf {
    let path = dir.join("mono.wav");
    let src = white_noise_source(32_000, 16_000, 42).unwrap();
    write_wav(&path, &src, SampleFormat::Float32).unwrap();
    path
}

fn pan(dir: &Path, input: &Path, p: &str, name: &str) -> PathBuf {
    let out = dir.join(name);
    let o = run(&["degrade", "pan", "-i", s(input), "-o", s(&out), "--p", p]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON report on stdout")
}

#[test]
fn eval_against_itself_is_capped() {
    let dir = tempfile::tempdir().unwrap();
    let stereo = pan(dir.path(), &mono_source(dir.path()), "0.3", "st.wav");
    let o = run(&["eval", s(&stereo), s(&stereo)]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["aggregate"]["ssr_db"], 80.0);
    assert_eq!(v["aggregate"]["srr_db"], 80.0);
    for key in ["config", "reference_meta", "estimate_meta", "frames"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["reference_meta"]["channels"], 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("SSR 80.00 dB  SRR 80.00 dB"));
}

#[test]
fn eval_of_panned_copy_matches_theory() {
    let dir = tempfile::tempdir().unwrap();
    let mono = mono_source(dir.path());
    let reference = pan(dir.path(), &mono, "0", "ref.wav");
    let estimate = pan(dir.path(), &mono, "1", "est.wav");
    let report = dir.path().join("report.json");
    let o = run(&["eval", s(&reference), s(&estimate), "--output", s(&report)]);
    assert_eq!(o.status.code(), Some(0));
    // with --output the summary goes to standard output
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("SSR 2.32 dB  SRR 80.00 dB"));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["frames"].as_array().unwrap().len(), 1);
    let ssr = v["aggregate"]["ssr_db"].as_f64().unwrap();
    assert!((ssr - -10.0 * (2.0 - 2f64.sqrt()).log10()).abs() < 0.05);
    assert_eq!(v["aggregate"]["srr_db"], 80.0);
}

#[test]
fn eval_csv_has_frame_rows_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let mono = mono_source(dir.path());
    let a = pan(dir.path(), &mono, "0", "a.wav");
    let b = pan(dir.path(), &mono, "-0.5", "b.wav");
    let o = run(&[
        "eval",
        s(&a),
        s(&b),
        "--format",
        "csv",
        "--frame-secs",
        "1",
        "--aggregate",
        "mean",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "frame_index,start_sample,ssr_db,srr_db,status");
    // 2 s at 1 s frames and 0.5 s hop
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[1].starts_with("0,0,8.174"));
    assert!(lines[2].starts_with("1,8000,"));
    assert!(lines[4].starts_with("aggregate,,8.174"));
    assert!(lines[4].ends_with(",mean"));
}

#[test]
fn validation_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mono = mono_source(dir.path());
    let missing = dir.path().join("nope.wav");
    let o = run(&["eval", s(&mono), s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());

    let stereo = pan(dir.path(), &mono, "0", "st.wav");
    let o = run(&["eval", s(&mono), s(&stereo)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("channel"));

    let o = run(&["eval", s(&mono), s(&mono), "--hop-frac", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eval", s(&mono)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "degrade",
        "pan",
        "-i",
        s(&stereo),
        "-o",
        s(&dir.path().join("x.wav")),
        "--p",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "degrade",
        "pan",
        "-i",
        s(&mono),
        "-o",
        s(&dir.path().join("x.wav")),
        "--p",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degrade_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mono = mono_source(dir.path());
    let (src, _) = read_wav(&mono).unwrap();

    let centred = pan(dir.path(), &mono, "0", "c.wav");
    let (c, meta) = read_wav(&centred).unwrap();
    assert_eq!(meta.channels, 2);
    assert_eq!(meta.format, SampleFormat::Float32);
    let g = 0.5f64.sqrt();
    for i in 0..100 {
        assert!((c.channel(0)[i] - c.channel(1)[i]).abs() < 1e-7);
        assert!((c.channel(0)[i] - g * src.channel(0)[i]).abs() < 1e-7);
    }

    let delayed = dir.path().join("d.wav");
    let o = run(&[
        "degrade",
        "delay",
        "-i",
        s(&centred),
        "-o",
        s(&delayed),
        "--samples",
        "8",
        "--channel",
        "1",
    ]);
    assert!(o.status.success());
    let (d, _) = read_wav(&delayed).unwrap();
    assert_eq!(d.channel(0), c.channel(0));
    assert_eq!(&d.channel(1)[..8], &[0.0; 8]);
    assert_eq!(&d.channel(1)[8..], &c.channel(1)[..c.num_samples() - 8]);

    let noisy = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "degrade",
            "noise",
            "-i",
            s(&centred),
            "-o",
            s(&out),
            "--snr-db",
            "0",
            "--seed",
            "1",
        ]);
        assert!(o.status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(noisy("n1.wav"), noisy("n2.wav"));

    let low = dir.path().join("l.wav");
    let o = run(&[
        "degrade",
        "lowpass",
        "-i",
        s(&centred),
        "-o",
        s(&low),
        "--cutoff-hz",
        "2000",
        "--wav-format",
        "pcm16",
    ]);
    assert!(o.status.success());
    let (_, m) = read_wav(&low).unwrap();
    assert_eq!(m.format, SampleFormat::Pcm16);
    assert_eq!(m.num_samples, 32_000);
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "sweep",
            "--kind",
            "noise",
            "--params=-6,6",
            "--seed",
            "3",
            "--output",
            s(&out),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        std::fs::read_to_string(out).unwrap()
    };
    let a = go("a.csv");
    assert_eq!(a, go("b.csv"));
    assert_eq!(a.lines().count(), 3);
    assert!(a.starts_with("kind,p,p_hat,param,ssr_db,srr_db,"));

    let o = run(&["sweep", "--kind", "pan", "--p-hats=-1,1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let cols: Vec<&str> = r.split(',').collect();
        let (ssr, theory): (f64, f64) = (cols[4].parse().unwrap(), cols[6].parse().unwrap());
        assert!((ssr - theory).abs() < 0.05);
    }

    let o = run(&["sweep", "--kind", "delay", "--params", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}
