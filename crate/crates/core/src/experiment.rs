//! Configuration-driven sweep runner.
//!
//! A sweep loads one corpus (from a dataset manifest or the synthetic
//! generator), then evaluates every grid level of every manipulation as an
//! independent condition: manipulate → preprocess → embed → score → one
//! report row. Conditions run in parallel; rows are sorted before writing so
//! the output does not depend on worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{centroid, embed_sequence, provider_from_config, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::fitting::{fit_linear, fit_log, FitModel, FitResult};
use crate::io::{self, FitRow, ReportRow};
use crate::manipulate::{self, ManipulationSpec};
use crate::metrics::{self, KccAggregation};
use crate::model::{
    DatasetManifest, EmbeddingMatrix, GazeRecording, ManipulationKind, MetricReport, Session,
    StreamSelector,
};
use crate::preprocess::{self, NormalizationStats, PreprocessConfig};
use crate::synthetic::{generate_synthetic, SyntheticSpec};

/// Where the embedding-intercorrelation statistic draws its observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntercorrSource {
    /// One observation per subject: the enrollment-session centroid.
    #[default]
    EnrollmentCentroids,
    /// One observation per enrollment-session sequence embedding.
    AllSequences,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub kcc_aggregation: KccAggregation,
    pub intercorr_source: IntercorrSource,
}

/// Manipulation levels evaluated by a sweep, one list per manipulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub decimate_hz: Vec<f64>,
    pub percentage: Vec<f64>,
    pub n_sequences: Vec<usize>,
    pub noise_sd: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            decimate_hz: vec![1000.0, 500.0, 333.0, 250.0, 100.0, 50.0, 25.0, 10.0],
            percentage: vec![100.0, 50.0, 33.0, 25.0, 10.0, 5.0, 2.5, 1.0],
            n_sequences: (1..=12).collect(),
            noise_sd: vec![0.0, 0.05, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
        }
    }
}

impl Grids {
    pub fn validate(&self) -> Result<()> {
        let conditions = self.conditions();
        if conditions.is_empty() {
            return Err(Error::Config(
                "all manipulation grids are empty; nothing to sweep".into(),
            ));
        }
        for spec in conditions {
            spec.validate()?;
        }
        Ok(())
    }

    /// All grid levels as manipulation specs, deduplicated, in grid order.
    pub fn conditions(&self) -> Vec<ManipulationSpec> {
        let mut out = Vec::new();
        for &target_hz in &self.decimate_hz {
            out.push(ManipulationSpec::Decimate { target_hz });
        }
        for &percent in &self.percentage {
            out.push(ManipulationSpec::Percentage { percent });
        }
        for &n in &self.n_sequences {
            out.push(ManipulationSpec::NumSequences { n });
        }
        for &sigma_deg in &self.noise_sd {
            out.push(ManipulationSpec::Noise { sigma_deg });
        }
        let mut seen: Vec<ManipulationSpec> = Vec::with_capacity(out.len());
        for spec in out {
            let dup = seen
                .iter()
                .any(|s| s.kind() == spec.kind() && s.level().total_cmp(&spec.level()).is_eq());
            if !dup {
                seen.push(spec);
            }
        }
        seen
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Path to a dataset manifest JSON. Exactly one of `data` / `synthetic`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Generator spec for an in-memory synthetic corpus.
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    /// Embedding provider name; see `embed::provider_from_config`.
    #[serde(default = "default_embedder")]
    pub embedder: String,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_embedder() -> String {
    "stat".into()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: None,
            synthetic: Some(SyntheticSpec::default()),
            preprocess: PreprocessConfig::default(),
            embedder: default_embedder(),
            grids: Grids::default(),
            metrics: MetricsConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.data, &self.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "config must set exactly one of `data` and `synthetic`".into(),
                ))
            }
        }
        if let Some(spec) = &self.synthetic {
            spec.validate()?;
        }
        self.preprocess.validate()?;
        self.grids.validate()?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Loads the corpus named by the config: every enrollment- and
/// authentication-selector recording of a manifest (truncated to the selector
/// duration), or the full synthetic corpus.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Vec<GazeRecording>> {
    cfg.validate()?;
    match (&cfg.data, &cfg.synthetic) {
        (Some(path), None) => load_manifest_corpus(path),
        (None, Some(spec)) => generate_synthetic(spec, cfg.seed),
        _ => unreachable!("validate() enforces exactly one source"),
    }
}

fn select_entries<'a>(
    manifest: &'a DatasetManifest,
    selector: &StreamSelector,
) -> Vec<&'a crate::model::RecordingEntry> {
    manifest
        .recordings
        .iter()
        .filter(|e| e.session == selector.session && e.task == selector.task)
        .collect()
}

fn load_manifest_corpus(path: &Path) -> Result<Vec<GazeRecording>> {
    let manifest = io::read_manifest(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let problems = manifest.validate(base);
    if !problems.is_empty() {
        return Err(Error::Config(format!(
            "manifest {}: {}",
            path.display(),
            problems.join("; ")
        )));
    }
    let mut out = Vec::new();
    for selector in [&manifest.enrollment_selector, &manifest.authentication_selector] {
        for entry in select_entries(&manifest, selector) {
            let r = io::load_recording(
                &base.join(&entry.path),
                &entry.subject_id,
                entry.session,
                &entry.task,
                entry.sampling_rate_hz,
            )?;
            let max_len = (selector.duration_s * entry.sampling_rate_hz).round() as usize;
            out.push(if r.len() > max_len { r.truncated(max_len) } else { r });
        }
    }
    // Subject-major order, matching the in-memory generator, so pooled
    // normalization sums see the same operand order on either path.
    out.sort_by(|a, b| {
        a.subject_id
            .cmp(&b.subject_id)
            .then_with(|| a.session.cmp(&b.session))
    });
    Ok(out)
}

/// Evaluates one manipulation level end to end and returns the metric report
/// together with the pooled normalization statistics of that condition.
pub fn run_condition(
    corpus: &[GazeRecording],
    provider: &dyn EmbeddingProvider,
    cfg: &ExperimentConfig,
    spec: ManipulationSpec,
) -> Result<(MetricReport, NormalizationStats)> {
    spec.validate()?;
    let raw: Vec<GazeRecording> = match spec {
        ManipulationSpec::Decimate { target_hz } => corpus
            .iter()
            .map(|r| {
                let q = manipulate::decimation_factor(r.sampling_rate_hz, target_hz)?;
                manipulate::decimate(r, q)
            })
            .collect::<Result<_>>()?,
        ManipulationSpec::Noise { sigma_deg } => corpus
            .iter()
            .map(|r| manipulate::inject_noise(r, sigma_deg, cfg.seed))
            .collect::<Result<_>>()?,
        _ => corpus.to_vec(),
    };
    let (mut batches, stats) = preprocess::preprocess_corpus(&raw, &cfg.preprocess)?;
    if let ManipulationSpec::Percentage { percent } = spec {
        for batch in &mut batches {
            for seq in &mut batch.sequences {
                *seq = manipulate::percentage_truncate(seq, percent)?;
            }
        }
    }
    let n_sequences = match spec {
        ManipulationSpec::NumSequences { n } => n,
        _ => cfg.preprocess.sequences_per_stream,
    };

    // Embed the first n sequences of every stream; the per-(subject, session)
    // template is their centroid.
    let embedded: Vec<Result<(String, Session, Vec<Vec<f64>>)>> = batches
        .par_iter()
        .map(|b| {
            if b.sequences.len() < n_sequences {
                return Err(Error::InsufficientData(format!(
                    "subject {} session {} has {} sequences, need {n_sequences}",
                    b.subject_id,
                    b.session,
                    b.sequences.len()
                )));
            }
            let rows = b.sequences[..n_sequences]
                .iter()
                .map(|s| embed_sequence(provider, s))
                .collect::<Result<Vec<_>>>()?;
            Ok((b.subject_id.clone(), b.session, rows))
        })
        .collect();

    let mut matrix = EmbeddingMatrix::new(provider.dimension())?;
    let want_sequence_rows = cfg.metrics.intercorr_source == IntercorrSource::AllSequences;
    let mut enroll_sequence_rows: Vec<Vec<f64>> = Vec::new();
    for item in embedded {
        let (subject, session, rows) = item?;
        if want_sequence_rows && session == Session::S1 {
            enroll_sequence_rows.extend(rows.iter().cloned());
        }
        matrix.insert(subject, session, centroid(&rows)?)?;
    }

    let enroll = matrix.session_rows(Session::S1);
    let auth = matrix.session_rows(Session::S2);
    let scores = metrics::build_score_sets(&enroll, &auth)?;
    let eer = metrics::eer(&scores)?;
    let persistence = metrics::temporal_persistence(&enroll, &auth, cfg.metrics.kcc_aggregation)?;
    let intercorr = match cfg.metrics.intercorr_source {
        IntercorrSource::EnrollmentCentroids => metrics::intercorrelation(&enroll)?,
        IntercorrSource::AllSequences => {
            let rows: Vec<&[f64]> = enroll_sequence_rows.iter().map(Vec::as_slice).collect();
            metrics::intercorrelation_rows(&rows, provider.dimension())?
        }
    };
    let report = MetricReport::new(
        spec.kind(),
        spec.level(),
        persistence.mean_w,
        eer,
        intercorr.mean_abs,
        intercorr.sd_abs,
        enroll.len(),
    )?;
    Ok((report, stats))
}

/// One full sweep: sorted report rows (one per condition, errors included)
/// plus the per-manipulation and pooled fits.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ReportRow>,
    pub fits: Vec<FitRow>,
}

/// Evaluates a metric report from externally produced embedding matrices
/// (for example a trained encoder exported to CSV).
pub fn evaluate_matrices(
    enroll: &EmbeddingMatrix,
    auth: &EmbeddingMatrix,
    metrics_cfg: &MetricsConfig,
) -> Result<MetricReport> {
    let scores = metrics::build_score_sets(enroll, auth)?;
    let eer = metrics::eer(&scores)?;
    let persistence = metrics::temporal_persistence(enroll, auth, metrics_cfg.kcc_aggregation)?;
    let intercorr = metrics::intercorrelation(enroll)?;
    MetricReport::new(
        ManipulationKind::External,
        0.0,
        persistence.mean_w,
        eer,
        intercorr.mean_abs,
        intercorr.sd_abs,
        enroll.len(),
    )
}

fn row_from_report(report: &MetricReport, seed: u64, stats: &NormalizationStats) -> ReportRow {
    ReportRow {
        manipulation: report.manipulation,
        level: report.level,
        kcc: Some(report.kcc),
        eer: Some(report.eer),
        intercorr_mean_abs: Some(report.intercorr_mean_abs),
        intercorr_sd: Some(report.intercorr_sd),
        n_subjects: report.n_subjects,
        seed,
        norm_mean: Some(stats.mean),
        norm_sd: Some(stats.sd),
        error: None,
    }
}

fn error_row(spec: ManipulationSpec, seed: u64, err: &Error) -> ReportRow {
    ReportRow {
        manipulation: spec.kind(),
        level: spec.level(),
        kcc: None,
        eer: None,
        intercorr_mean_abs: None,
        intercorr_sd: None,
        n_subjects: 0,
        seed,
        norm_mean: None,
        norm_sd: None,
        error: Some(err.to_string()),
    }
}

/// Fit model used for level→metric curves of one manipulation.
fn level_fit_model(kind: ManipulationKind) -> FitModel {
    match kind {
        ManipulationKind::Noise => FitModel::Linear,
        _ => FitModel::Log,
    }
}

fn level_x_name(kind: ManipulationKind) -> &'static str {
    match kind {
        ManipulationKind::Decimate => "decimate_hz",
        ManipulationKind::Percentage => "percentage",
        ManipulationKind::NumSequences => "n_sequences",
        ManipulationKind::Noise => "noise_sd",
        ManipulationKind::External => "external",
    }
}

fn fit_points(points: &[(f64, f64)], model: FitModel) -> Result<FitResult<f64>> {
    match model {
        FitModel::Linear => fit_linear(points),
        FitModel::Log => fit_log(points),
    }
}

/// Level→KCC and level→EER fits per manipulation, then the pooled KCC→EER
/// linear fit across every successful row. Fits that cannot be computed
/// (too few points, degenerate, zero level under a log model) are omitted;
/// their inputs remain auditable in the report rows.
fn sweep_fits(rows: &[ReportRow]) -> Vec<FitRow> {
    let mut fits = Vec::new();
    let kinds = [
        ManipulationKind::Decimate,
        ManipulationKind::Percentage,
        ManipulationKind::NumSequences,
        ManipulationKind::Noise,
    ];
    for kind in kinds {
        for (y_name, y) in [
            ("kcc", &(|r: &ReportRow| r.kcc) as &dyn Fn(&ReportRow) -> Option<f64>),
            ("eer", &|r: &ReportRow| r.eer),
        ] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.manipulation == kind && r.error.is_none())
                .filter_map(|r| y(r).map(|v| (r.level, v)))
                .collect();
            if let Ok(fit) = fit_points(&points, level_fit_model(kind)) {
                fits.push(FitRow {
                    x_name: level_x_name(kind).into(),
                    y_name: y_name.into(),
                    fit,
                });
            }
        }
    }
    let pooled: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.kcc.zip(r.eer))
        .collect();
    if let Ok(fit) = fit_linear(&pooled) {
        fits.push(FitRow {
            x_name: "kcc".into(),
            y_name: "eer".into(),
            fit,
        });
    }
    fits
}

fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        a.manipulation
            .cmp(&b.manipulation)
            .then_with(|| a.level.total_cmp(&b.level))
    });
}

/// Runs every grid condition (in parallel when `jobs != Some(1)`), sorts the
/// rows by (manipulation, level) and fits the trend models.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<SweepOutput> {
    cfg.validate()?;
    let provider = provider_from_config(&cfg.embedder, cfg.seed)?;
    let corpus = load_corpus(cfg)?;
    let conditions = cfg.grids.conditions();
    let evaluate = |spec: &ManipulationSpec| -> ReportRow {
        match run_condition(&corpus, provider.as_ref(), cfg, *spec) {
            Ok((report, stats)) => row_from_report(&report, cfg.seed, &stats),
            Err(e) => error_row(*spec, cfg.seed, &e),
        }
    };
    let mut rows: Vec<ReportRow> = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(|| conditions.par_iter().map(evaluate).collect())
        }
        None => conditions.par_iter().map(evaluate).collect(),
    };
    sort_rows(&mut rows);
    let fits = sweep_fits(&rows);
    Ok(SweepOutput { rows, fits })
}

/// Per-subject spatial precision: each subject's value is the median over
/// their recordings, the dataset value the median over subjects.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionRow {
    pub subject_id: String,
    /// Median spatial precision over the subject's recordings, in degrees.
    pub precision: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionTable {
    pub rows: Vec<PrecisionRow>,
    pub dataset_median: Option<f64>,
}

pub fn subject_spatial_precision(
    recordings: &[GazeRecording],
    noise_sd: f64,
    seed: u64,
) -> Result<PrecisionTable> {
    if recordings.is_empty() {
        return Err(Error::InsufficientData(
            "spatial precision needs at least one recording".into(),
        ));
    }
    let mut by_subject: BTreeMap<&str, Vec<&GazeRecording>> = BTreeMap::new();
    for r in recordings {
        by_subject.entry(&r.subject_id).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(by_subject.len());
    for (subject, recs) in by_subject {
        let mut values = Vec::with_capacity(recs.len());
        let mut warning = None;
        for r in recs {
            let noisy = manipulate::inject_noise(r, noise_sd, seed)?;
            match manipulate::spatial_precision(&noisy) {
                Ok(v) => values.push(v),
                Err(e) => warning = Some(e.to_string()),
            }
        }
        let precision = (!values.is_empty()).then(|| {
            values.sort_by(f64::total_cmp);
            crate::stats::quantile_sorted(&values, 0.5)
        });
        rows.push(PrecisionRow {
            subject_id: subject.to_string(),
            precision,
            warning,
        });
    }
    let mut medians: Vec<f64> = rows.iter().filter_map(|r| r.precision).collect();
    medians.sort_by(f64::total_cmp);
    let dataset_median =
        (!medians.is_empty()).then(|| crate::stats::quantile_sorted(&medians, 0.5));
    Ok(PrecisionTable { rows, dataset_median })
}

pub fn precision_to_csv(table: &PrecisionTable) -> String {
    let mut out = String::from("subject_id,precision_deg,warning\n");
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    for row in &table.rows {
        let warning = row
            .warning
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{}\n",
            row.subject_id,
            cell(row.precision),
            warning
        ));
    }
    out.push_str(&format!("(dataset),{},\n", cell(table.dataset_median)));
    out
}
