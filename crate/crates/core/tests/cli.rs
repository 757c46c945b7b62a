//! Binary-level contract tests: exit codes, one-line summaries, and the
//! file outputs of every subcommand.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gazebench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stdout).trim().to_string();
    assert!(
        !text.is_empty() && !text.contains('\n'),
        "expected a one-line summary, got: {text:?}"
    );
    text
}

fn assert_code(out: &Output, code: i32, what: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{what}: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_code(&out, 0, "--help");
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));

    let out = run(&["sweep", "--help"]);
    assert_code(&out, 0, "sweep --help");
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["sweep", "--definitely-not-a-flag"]);
    assert_code(&out, 1, "unknown flag");

    let out = run(&["evaluate"]);
    assert_code(&out, 1, "missing required arguments");

    let out = run(&["no-such-subcommand"]);
    assert_code(&out, 1, "unknown subcommand");
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "evaluate",
        "--enroll",
        "/nonexistent/embeddings.csv",
        "--auth",
        "/nonexistent/embeddings.csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2, "missing input file");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

fn gen_corpus(dir: &Path, spec: &str, seed: u64) -> std::path::PathBuf {
    let spec_path = dir.join("genspec.json");
    std::fs::write(&spec_path, spec).unwrap();
    let corp = dir.join("corpus");
    let out = run(&[
        "gen-synthetic",
        "--config",
        spec_path.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--out",
        corp.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "gen-synthetic");
    let line = stdout_line(&out);
    assert!(line.contains("manifest.json"), "summary: {line}");
    corp
}

#[test]
fn pipeline_writes_outputs_and_identity_evaluation_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let corp = gen_corpus(
        dir.path(),
        r#"{"n_subjects": 3, "duration_s": 65, "sampling_rate_hz": 250}"#,
        5,
    );
    let manifest = corp.join("manifest.json");

    let pre = dir.path().join("pre");
    let out = run(&[
        "preprocess",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        pre.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "preprocess");
    stdout_line(&out);
    assert!(pre.join("normalization.json").is_file());
    assert!(pre.join("streams.csv").is_file());

    let manip = dir.path().join("manip");
    let out = run(&[
        "manipulate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--decimate-hz",
        "125",
        "--out",
        manip.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "manipulate");
    stdout_line(&out);
    let manip_manifest = std::fs::read_to_string(manip.join("manifest.json")).unwrap();
    assert!(
        manip_manifest.contains("\"sampling_rate_hz\": 125"),
        "manipulated manifest keeps the new rate: {manip_manifest}"
    );

    let emb = dir.path().join("emb");
    let out = run(&[
        "embed",
        "--manifest",
        manifest.to_str().unwrap(),
        "--embedder",
        "stat",
        "--seed",
        "5",
        "--out",
        emb.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "embed");
    stdout_line(&out);
    let embeddings = emb.join("embeddings.csv");
    assert!(embeddings.is_file());

    // Split the two-session artifact into the per-session files `evaluate`
    // takes (the externally-supplied-embeddings path).
    let text = std::fs::read_to_string(&embeddings).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let mut by_session = [vec![header], vec![header]];
    for line in lines {
        match line.split(',').nth(1) {
            Some("S1") => by_session[0].push(line),
            Some("S2") => by_session[1].push(line),
            other => panic!("unexpected session column: {other:?}"),
        }
    }
    let s1 = dir.path().join("s1.csv");
    let s2 = dir.path().join("s2.csv");
    std::fs::write(&s1, by_session[0].join("\n") + "\n").unwrap();
    std::fs::write(&s2, by_session[1].join("\n") + "\n").unwrap();

    let eval = dir.path().join("eval");
    let out = run(&[
        "evaluate",
        "--enroll",
        s1.to_str().unwrap(),
        "--auth",
        s1.to_str().unwrap(),
        "--out",
        eval.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "evaluate");
    let line = stdout_line(&out);
    assert!(
        line.contains("eer 0.0000") && line.contains("kcc 1.0000"),
        "identical enroll/auth must be perfect: {line}"
    );
    assert!(eval.join("report.csv").is_file());

    let out = run(&[
        "evaluate",
        "--enroll",
        s1.to_str().unwrap(),
        "--auth",
        s2.to_str().unwrap(),
        "--out",
        eval.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "cross-session evaluate");
    stdout_line(&out);
}

#[test]
fn fit_rejects_zero_level_under_log_model() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.csv");
    std::fs::write(
        &report,
        "manipulation,level,kcc,eer,intercorr_mean_abs,intercorr_sd,n_subjects,seed,norm_mean,norm_sd,error\n\
         noise,0,0.9,0.1,0.3,0.2,10,1,0,1,\n\
         noise,1,0.8,0.15,0.3,0.2,10,1,0,1,\n\
         noise,2,0.7,0.2,0.3,0.2,10,1,0,1,\n",
    )
    .unwrap();
    let out_dir = dir.path().join("fit");
    let out = run(&[
        "fit",
        "--report",
        report.to_str().unwrap(),
        "--x",
        "level",
        "--y",
        "eer",
        "--model",
        "log",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 2, "log fit over a zero level");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // The same rows fit fine under the linear model.
    let out = run(&[
        "fit",
        "--report",
        report.to_str().unwrap(),
        "--x",
        "level",
        "--y",
        "eer",
        "--model",
        "linear",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "linear fit");
    stdout_line(&out);
    assert!(out_dir.join("fit.csv").is_file());
}

#[test]
fn precision_summary_matches_expected_bands() {
    let dir = tempfile::tempdir().unwrap();
    let corp = gen_corpus(
        dir.path(),
        r#"{"n_subjects": 4, "duration_s": 20, "sampling_rate_hz": 1000}"#,
        9,
    );
    let manifest = corp.join("manifest.json");

    let median_at = |sd: &str| -> f64 {
        let out_dir = dir.path().join(format!("prec{sd}"));
        let out = run(&[
            "precision",
            "--manifest",
            manifest.to_str().unwrap(),
            "--noise-sd",
            sd,
            "--seed",
            "3",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_code(&out, 0, "precision");
        let line = stdout_line(&out);
        assert!(out_dir.join("precision.csv").is_file());
        line.split_whitespace()
            .find_map(|tok| tok.parse::<f64>().ok())
            .unwrap_or_else(|| panic!("no median in summary: {line}"))
    };

    assert!(median_at("0") < 0.05, "clean corpus median");
    let m = median_at("0.25");
    assert!((0.26..=0.32).contains(&m), "sd 0.25 gave {m}");
    let m = median_at("1.0");
    assert!((1.05..=1.25).contains(&m), "sd 1.0 gave {m}");
}

#[test]
fn sweep_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "synthetic": {"n_subjects": 4, "duration_s": 16, "sampling_rate_hz": 250},
  "preprocess": {"sequences_per_stream": 3},
  "grids": {
    "decimate_hz": [250],
    "percentage": [100],
    "n_sequences": [2],
    "noise_sd": [0.5]
  },
  "seed": 3
}"#,
    )
    .unwrap();

    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = dir.path().join(tag);
        let out = run(&[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_code(&out, 0, "sweep");
        let line = stdout_line(&out);
        assert!(line.contains("swept 4 conditions"), "summary: {line}");
        outputs.push((
            std::fs::read(out_dir.join("report.csv")).unwrap(),
            std::fs::read(out_dir.join("fits.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1], "sweep reruns must be byte-identical");
}
