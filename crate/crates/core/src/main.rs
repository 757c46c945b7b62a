//! Command-line front end for the gaze-velocity benchmark pipeline.
//!
//! One binary, batch-oriented subcommands: every run prints a one-line
//! summary to standard output and writes its machine-readable artifacts
//! under `--out`. Exit codes: 0 success, 1 usage error, 2 data/config
//! error, 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use gazebench::embed::{build_embedding_matrix, provider_from_config};
use gazebench::experiment::{
    self, evaluate_matrices, run_sweep, subject_spatial_precision, ExperimentConfig,
    MetricsConfig,
};
use gazebench::fitting::{fit_linear, fit_log, FitModel};
use gazebench::io::{self, FitRow, ReportRow};
use gazebench::manipulate::{self, ManipulationSpec};
use gazebench::model::{DatasetManifest, GazeRecording, ManipulationKind, RecordingEntry};
use gazebench::preprocess::preprocess_corpus;
use gazebench::synthetic::{write_synthetic_dataset, SyntheticSpec};
use gazebench::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gazebench",
    version,
    about = "Benchmark pipeline for gaze-velocity biometric embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-session gaze corpus plus its manifest.
    GenSynthetic(GenSyntheticArgs),
    /// Normalize a corpus and report the pooled velocity statistics.
    Preprocess(PreprocessArgs),
    /// Apply a raw-signal manipulation to every recording of a corpus.
    Manipulate(ManipulateArgs),
    /// Embed a corpus into per-(subject, session) template embeddings.
    Embed(EmbedArgs),
    /// Score externally produced enrollment/authentication embeddings.
    Evaluate(EvaluateArgs),
    /// Fit a trend model to two columns of a sweep report.
    Fit(FitArgs),
    /// Run the manipulation sweep described by a config file.
    Sweep(SweepArgs),
    /// Per-subject spatial precision under additive position noise.
    Precision(PrecisionArgs),
}

#[derive(Args)]
struct GenSyntheticArgs {
    /// Generator spec as JSON; defaults match the desk-scale corpus.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for recording CSVs and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Dataset manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for normalization.json and streams.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("stage").required(true).args(["decimate_hz", "noise_sd"])
))]
struct ManipulateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for manipulated recordings and their manifest.
    #[arg(long)]
    out: PathBuf,
    /// Target sampling rate for anti-aliased decimation, in Hz.
    #[arg(long)]
    decimate_hz: Option<f64>,
    /// SD of additive Gaussian position noise, in degrees.
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for embeddings.csv.
    #[arg(long)]
    out: PathBuf,
    /// Embedding provider: "stat" or "seeded-conv".
    #[arg(long, default_value = "stat")]
    embedder: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Enrollment embeddings CSV.
    #[arg(long)]
    enroll: PathBuf,
    /// Authentication embeddings CSV.
    #[arg(long)]
    auth: PathBuf,
    /// Output directory for report.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep report CSV to read points from.
    #[arg(long)]
    report: PathBuf,
    /// X column: level, kcc, eer, intercorr_mean_abs or intercorr_sd.
    #[arg(long)]
    x: String,
    /// Y column, same choices as --x.
    #[arg(long)]
    y: String,
    /// Trend model: "linear" or "log".
    #[arg(long, default_value = "linear")]
    model: String,
    /// Restrict points to one manipulation (e.g. "decimate").
    #[arg(long)]
    manipulation: Option<String>,
    /// Output directory for fit.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker count; omit to use every core.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PrecisionArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// SD of additive Gaussian position noise, in degrees.
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for precision.csv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(_) => {
            eprintln!("internal error: unexpected panic");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenSynthetic(args) => gen_synthetic(args),
        Command::Preprocess(args) => preprocess_cmd(args),
        Command::Manipulate(args) => manipulate_cmd(args),
        Command::Embed(args) => embed_cmd(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Fit(args) => fit_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Precision(args) => precision_cmd(args),
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Config holding only a manifest source, with library defaults elsewhere.
fn manifest_config(manifest: &Path) -> ExperimentConfig {
    ExperimentConfig {
        data: Some(manifest.to_path_buf()),
        synthetic: None,
        ..ExperimentConfig::default()
    }
}

/// Every recording of a manifest at full length (no selector truncation).
fn load_all_recordings(path: &Path) -> Result<(DatasetManifest, Vec<GazeRecording>)> {
    let manifest = io::read_manifest(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let problems = manifest.validate(&base);
    if !problems.is_empty() {
        return Err(Error::Config(format!(
            "manifest {}: {}",
            path.display(),
            problems.join("; ")
        )));
    }
    let recordings = manifest
        .recordings
        .iter()
        .map(|e| {
            io::load_recording(
                &base.join(&e.path),
                &e.subject_id,
                e.session,
                &e.task,
                e.sampling_rate_hz,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, recordings))
}

fn gen_synthetic(args: GenSyntheticArgs) -> Result<String> {
    let spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<SyntheticSpec>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    ensure_dir(&args.out)?;
    let manifest = write_synthetic_dataset(&spec, args.seed, &args.out)?;
    io::write_manifest(&args.out.join("manifest.json"), &manifest)?;
    Ok(format!(
        "wrote {} recordings and manifest.json to {}",
        manifest.recordings.len(),
        args.out.display()
    ))
}

fn preprocess_cmd(args: PreprocessArgs) -> Result<String> {
    let cfg = manifest_config(&args.manifest);
    let corpus = experiment::load_corpus(&cfg)?;
    let (batches, stats) = preprocess_corpus(&corpus, &cfg.preprocess)?;
    ensure_dir(&args.out)?;
    let norm_path = args.out.join("normalization.json");
    let norm = serde_json::json!({ "mean": stats.mean, "sd": stats.sd });
    std::fs::write(&norm_path, format!("{:#}\n", norm)).map_err(|e| Error::io(&norm_path, e))?;
    let mut streams = String::from("subject_id,session,n_sequences,sequence_len\n");
    for b in &batches {
        let len = b.sequences.first().map_or(0, |s| s.h.len());
        streams.push_str(&format!(
            "{},{},{},{}\n",
            b.subject_id,
            b.session,
            b.sequences.len(),
            len
        ));
    }
    let streams_path = args.out.join("streams.csv");
    std::fs::write(&streams_path, streams).map_err(|e| Error::io(&streams_path, e))?;
    Ok(format!(
        "preprocessed {} streams: velocity mean {:.6}, sd {:.6}",
        batches.len(),
        stats.mean,
        stats.sd
    ))
}

fn manipulate_cmd(args: ManipulateArgs) -> Result<String> {
    let (manifest, recordings) = load_all_recordings(&args.manifest)?;
    let spec = match (args.decimate_hz, args.noise_sd) {
        (Some(target_hz), None) => ManipulationSpec::Decimate { target_hz },
        (None, Some(sigma_deg)) => ManipulationSpec::Noise { sigma_deg },
        _ => unreachable!("clap group enforces exactly one stage"),
    };
    spec.validate()?;
    ensure_dir(&args.out)?;
    let mut entries = Vec::with_capacity(recordings.len());
    for (entry, r) in manifest.recordings.iter().zip(&recordings) {
        let manipulated = match spec {
            ManipulationSpec::Decimate { target_hz } => {
                let q = manipulate::decimation_factor(r.sampling_rate_hz, target_hz)?;
                manipulate::decimate(r, q)?
            }
            ManipulationSpec::Noise { sigma_deg } => {
                manipulate::inject_noise(r, sigma_deg, args.seed)?
            }
            _ => unreachable!(),
        };
        io::write_recording_csv(&args.out.join(&entry.path), &manipulated)?;
        entries.push(RecordingEntry {
            sampling_rate_hz: manipulated.sampling_rate_hz,
            ..entry.clone()
        });
    }
    let out_manifest = DatasetManifest {
        recordings: entries,
        ..manifest
    };
    io::write_manifest(&args.out.join("manifest.json"), &out_manifest)?;
    Ok(format!(
        "applied {} to {} recordings in {}",
        spec.kind(),
        out_manifest.recordings.len(),
        args.out.display()
    ))
}

fn embed_cmd(args: EmbedArgs) -> Result<String> {
    let provider = provider_from_config(&args.embedder, args.seed)?;
    let cfg = manifest_config(&args.manifest);
    let corpus = experiment::load_corpus(&cfg)?;
    let (batches, _) = preprocess_corpus(&corpus, &cfg.preprocess)?;
    let matrix = build_embedding_matrix(
        provider.as_ref(),
        &batches,
        cfg.preprocess.sequences_per_stream,
    )?;
    ensure_dir(&args.out)?;
    let path = args.out.join("embeddings.csv");
    io::write_embeddings(&path, &matrix)?;
    Ok(format!(
        "wrote {} embeddings of dimension {} to {}",
        matrix.len(),
        matrix.dimension(),
        path.display()
    ))
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<String> {
    let enroll = io::read_embeddings(&args.enroll)?;
    let auth = io::read_embeddings(&args.auth)?;
    let report = evaluate_matrices(&enroll, &auth, &MetricsConfig::default())?;
    let row = ReportRow {
        manipulation: report.manipulation,
        level: report.level,
        kcc: Some(report.kcc),
        eer: Some(report.eer),
        intercorr_mean_abs: Some(report.intercorr_mean_abs),
        intercorr_sd: Some(report.intercorr_sd),
        n_subjects: report.n_subjects,
        seed: 0,
        norm_mean: None,
        norm_sd: None,
        error: None,
    };
    ensure_dir(&args.out)?;
    io::write_report_csv(&args.out.join("report.csv"), &[row])?;
    Ok(format!(
        "eer {:.4}, kcc {:.4}, intercorr {:.4} over {} subjects",
        report.eer, report.kcc, report.intercorr_mean_abs, report.n_subjects
    ))
}

fn report_column(name: &str) -> Result<fn(&ReportRow) -> Option<f64>> {
    Ok(match name {
        "level" => |r: &ReportRow| Some(r.level),
        "kcc" => |r: &ReportRow| r.kcc,
        "eer" => |r: &ReportRow| r.eer,
        "intercorr_mean_abs" => |r: &ReportRow| r.intercorr_mean_abs,
        "intercorr_sd" => |r: &ReportRow| r.intercorr_sd,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown report column `{other}`"
            )))
        }
    })
}

fn fit_cmd(args: FitArgs) -> Result<String> {
    let mut rows = io::read_report_csv(&args.report)?;
    if let Some(name) = &args.manipulation {
        let kind = ManipulationKind::from_str(name)?;
        rows.retain(|r| r.manipulation == kind);
    }
    let x = report_column(&args.x)?;
    let y = report_column(&args.y)?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| x(r).zip(y(r)))
        .collect();
    let model = FitModel::from_str(&args.model)?;
    let fit = match model {
        FitModel::Linear => fit_linear(&points)?,
        FitModel::Log => fit_log(&points)?,
    };
    ensure_dir(&args.out)?;
    let row = FitRow {
        x_name: args.x.clone(),
        y_name: args.y.clone(),
        fit,
    };
    io::write_fit_csv(&args.out.join("fit.csv"), &[row.clone()])?;
    Ok(format!(
        "{} fit {} ~ {}: a {:.6}, b {:.6}, r2 {:.4} over {} points",
        model, args.y, args.x, row.fit.a, row.fit.b, row.fit.r2, row.fit.n_points
    ))
}

fn sweep_cmd(args: SweepArgs) -> Result<String> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))?;
    let output = run_sweep(&cfg, args.jobs)?;
    ensure_dir(&out)?;
    io::write_report_csv(&out.join("report.csv"), &output.rows)?;
    io::write_fit_csv(&out.join("fits.csv"), &output.fits)?;
    let errors = output.rows.iter().filter(|r| r.error.is_some()).count();
    Ok(format!(
        "swept {} conditions ({} error rows), {} fits → {}",
        output.rows.len(),
        errors,
        output.fits.len(),
        out.display()
    ))
}

fn precision_cmd(args: PrecisionArgs) -> Result<String> {
    let (_, recordings) = load_all_recordings(&args.manifest)?;
    let table = subject_spatial_precision(&recordings, args.noise_sd, args.seed)?;
    ensure_dir(&args.out)?;
    let path = args.out.join("precision.csv");
    std::fs::write(&path, experiment::precision_to_csv(&table))
        .map_err(|e| Error::io(&path, e))?;
    match table.dataset_median {
        Some(median) => Ok(format!(
            "dataset median precision {:.4} deg over {} subjects",
            median,
            table.rows.len()
        )),
        None => Ok(format!(
            "no dataset median: all {} subjects produced warnings",
            table.rows.len()
        )),
    }
}
