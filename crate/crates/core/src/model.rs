//! Core data types shared by all pipeline stages.
//!
//! Invalid gaze samples are carried as `None` from parse time onward; no
//! stage re-invents a sentinel value. Validity is tracked per channel, and a
//! sample is only considered fully valid when both channels are.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recording session label. Every dataset in scope has exactly two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Session {
    S1,
    S2,
}

impl Session {
    pub fn as_str(self) -> &'static str {
        match self {
            Session::S1 => "S1",
            Session::S2 => "S2",
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" => Ok(Session::S1),
            "S2" => Ok(Session::S2),
            other => Err(Error::Format(format!(
                "unknown session {other:?} (expected \"S1\" or \"S2\")"
            ))),
        }
    }
}

/// Kind of signal-quality manipulation a report row belongs to.
///
/// `External` marks rows computed from externally supplied embeddings, where
/// no manipulation was applied by this crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipulationKind {
    Decimate,
    Percentage,
    NumSequences,
    Noise,
    External,
}

impl ManipulationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ManipulationKind::Decimate => "decimate",
            ManipulationKind::Percentage => "percentage",
            ManipulationKind::NumSequences => "num_sequences",
            ManipulationKind::Noise => "noise",
            ManipulationKind::External => "external",
        }
    }
}

impl fmt::Display for ManipulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManipulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decimate" => Ok(ManipulationKind::Decimate),
            "percentage" => Ok(ManipulationKind::Percentage),
            "num_sequences" => Ok(ManipulationKind::NumSequences),
            "noise" => Ok(ManipulationKind::Noise),
            "external" => Ok(ManipulationKind::External),
            other => Err(Error::Format(format!("unknown manipulation {other:?}"))),
        }
    }
}

/// One gaze recording: two position channels in degrees of visual angle,
/// uniformly sampled. `None` marks an invalid sample in that channel.
#[derive(Clone, Debug, PartialEq)]
pub struct GazeRecording {
    pub subject_id: String,
    pub session: Session,
    pub task: String,
    pub sampling_rate_hz: f64,
    pub horizontal: Vec<Option<f64>>,
    pub vertical: Vec<Option<f64>>,
}

impl GazeRecording {
    /// Builds a recording, enforcing the type invariants: channels of equal
    /// nonzero length, positive sampling rate, all valid samples finite.
    pub fn new(
        subject_id: impl Into<String>,
        session: Session,
        task: impl Into<String>,
        sampling_rate_hz: f64,
        horizontal: Vec<Option<f64>>,
        vertical: Vec<Option<f64>>,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        if subject_id.is_empty() {
            return Err(Error::InvalidArgument("empty subject id".into()));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if horizontal.len() != vertical.len() {
            return Err(Error::InvalidArgument(format!(
                "channel lengths differ: {} vs {}",
                horizontal.len(),
                vertical.len()
            )));
        }
        if horizontal.is_empty() {
            return Err(Error::EmptyRecording(subject_id));
        }
        for ch in [&horizontal, &vertical] {
            if ch.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "valid samples must be finite".into(),
                ));
            }
        }
        Ok(GazeRecording {
            subject_id,
            session,
            task: task.into(),
            sampling_rate_hz,
            horizontal,
            vertical,
        })
    }

    pub fn len(&self) -> usize {
        self.horizontal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.horizontal.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sampling_rate_hz
    }

    /// True when both channels carry a valid value at `i`.
    pub fn sample_valid(&self, i: usize) -> bool {
        self.horizontal[i].is_some() && self.vertical[i].is_some()
    }

    /// Number of samples valid in both channels.
    pub fn valid_len(&self) -> usize {
        (0..self.len()).filter(|&i| self.sample_valid(i)).count()
    }

    /// Copy truncated to the first `max_samples` samples.
    pub fn truncated(&self, max_samples: usize) -> Self {
        let n = self.len().min(max_samples);
        GazeRecording {
            subject_id: self.subject_id.clone(),
            session: self.session,
            task: self.task.clone(),
            sampling_rate_hz: self.sampling_rate_hz,
            horizontal: self.horizontal[..n].to_vec(),
            vertical: self.vertical[..n].to_vec(),
        }
    }
}

/// One fully preprocessed velocity sequence: fixed length, both channels
/// finite (invalid samples have already been filled with 0).
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl Sequence {
    pub fn new(h: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if h.len() != v.len() {
            return Err(Error::InvalidArgument(format!(
                "sequence channel lengths differ: {} vs {}",
                h.len(),
                v.len()
            )));
        }
        if h.is_empty() {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        if h.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "sequence values must be finite".into(),
            ));
        }
        Ok(Sequence { h, v })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// The preprocessed sequences of one recording stream.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    pub subject_id: String,
    pub session: Session,
    pub sampling_rate_hz: f64,
    pub sequences: Vec<Sequence>,
}

impl SequenceBatch {
    /// Length shared by every sequence in the batch.
    pub fn samples_per_sequence(&self) -> usize {
        self.sequences.first().map_or(0, Sequence::len)
    }
}

/// Embedding vectors keyed by `(subject, session)`.
///
/// Keys are unique by construction and iteration order is deterministic
/// (sorted by subject, then session).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    dimension: usize,
    rows: BTreeMap<(String, Session), Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("embedding dimension 0".into()));
        }
        Ok(EmbeddingMatrix {
            dimension,
            rows: BTreeMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(
        &mut self,
        subject_id: impl Into<String>,
        session: Session,
        vector: Vec<f64>,
    ) -> Result<()> {
        let subject_id = subject_id.into();
        if vector.len() != self.dimension {
            return Err(Error::Format(format!(
                "embedding for ({subject_id}, {session}) has dimension {}, expected {}",
                vector.len(),
                self.dimension
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format(format!(
                "embedding for ({subject_id}, {session}) contains non-finite values"
            )));
        }
        let key = (subject_id, session);
        if self.rows.contains_key(&key) {
            return Err(Error::DuplicateKey(format!("({}, {})", key.0, key.1)));
        }
        self.rows.insert(key, vector);
        Ok(())
    }

    pub fn get(&self, subject_id: &str, session: Session) -> Option<&[f64]> {
        self.rows
            .get(&(subject_id.to_string(), session))
            .map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Session, &[f64])> {
        self.rows
            .iter()
            .map(|((s, sess), v)| (s.as_str(), *sess, v.as_slice()))
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.rows.keys().map(|(s, _)| s.as_str()).collect()
    }

    /// One row per subject, erroring when a subject appears under more than
    /// one session (the caller must disambiguate first).
    pub fn by_subject(&self) -> Result<BTreeMap<&str, &[f64]>> {
        let mut out: BTreeMap<&str, &[f64]> = BTreeMap::new();
        for ((subject, _), v) in &self.rows {
            if out.insert(subject.as_str(), v.as_slice()).is_some() {
                return Err(Error::DuplicateKey(format!(
                    "subject {subject} appears in more than one session; select a session first"
                )));
            }
        }
        Ok(out)
    }

    /// Sub-matrix containing only rows of the given session.
    pub fn session_rows(&self, session: Session) -> EmbeddingMatrix {
        let rows = self
            .rows
            .iter()
            .filter(|((_, s), _)| *s == session)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        EmbeddingMatrix {
            dimension: self.dimension,
            rows,
        }
    }
}

/// Metric outcomes for one experiment condition.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub manipulation: ManipulationKind,
    pub level: f64,
    pub kcc: f64,
    pub eer: f64,
    pub intercorr_mean_abs: f64,
    pub intercorr_sd: f64,
    pub n_subjects: usize,
}

impl MetricReport {
    pub fn new(
        manipulation: ManipulationKind,
        level: f64,
        kcc: f64,
        eer: f64,
        intercorr_mean_abs: f64,
        intercorr_sd: f64,
        n_subjects: usize,
    ) -> Result<Self> {
        for (name, value, hi) in [
            ("kcc", kcc, 1.0),
            ("eer", eer, 1.0),
            ("intercorr_mean_abs", intercorr_mean_abs, 1.0),
        ] {
            if !(value.is_finite() && (0.0..=hi).contains(&value)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, {hi}], got {value}"
                )));
            }
        }
        if !(intercorr_sd.is_finite() && intercorr_sd >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "intercorr_sd must be non-negative, got {intercorr_sd}"
            )));
        }
        if !level.is_finite() {
            return Err(Error::InvalidArgument("level must be finite".into()));
        }
        Ok(MetricReport {
            manipulation,
            level,
            kcc,
            eer,
            intercorr_mean_abs,
            intercorr_sd,
            n_subjects,
        })
    }
}

/// One recording referenced by a dataset manifest. `path` is relative to the
/// manifest file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub path: String,
    pub subject_id: String,
    pub session: Session,
    pub task: String,
    pub sampling_rate_hz: f64,
}

/// Picks the recordings (and leading duration) used for one role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSelector {
    pub session: Session,
    pub task: String,
    pub duration_s: f64,
}

/// On-disk dataset description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub recordings: Vec<RecordingEntry>,
    pub enrollment_selector: StreamSelector,
    pub authentication_selector: StreamSelector,
}

impl DatasetManifest {
    /// Hard structural invariants, checked after deserialization.
    pub fn check_invariants(&self) -> Result<()> {
        if self.recordings.is_empty() {
            return Err(Error::Format("manifest lists no recordings".into()));
        }
        if self.enrollment_selector.session == self.authentication_selector.session {
            return Err(Error::Format(
                "enrollment and authentication selectors must reference different sessions"
                    .into(),
            ));
        }
        for sel in [&self.enrollment_selector, &self.authentication_selector] {
            if !(sel.duration_s.is_finite() && sel.duration_s > 0.0) {
                return Err(Error::Format(format!(
                    "selector duration must be positive, got {}",
                    sel.duration_s
                )));
            }
        }
        for r in &self.recordings {
            if !(r.sampling_rate_hz.is_finite() && r.sampling_rate_hz > 0.0) {
                return Err(Error::Format(format!(
                    "recording {} has non-positive sampling rate",
                    r.path
                )));
            }
        }
        Ok(())
    }

    /// Consistency check. Returns human-readable warnings; never fails
    /// (hard errors surface when recordings are actually loaded).
    pub fn validate(&self, base_dir: &Path) -> Vec<String> {
        let mut warnings = Vec::new();
        let mut seen = BTreeSet::new();
        for r in &self.recordings {
            if !base_dir.join(&r.path).is_file() {
                warnings.push(format!("missing file: {}", r.path));
            }
            let key = (r.subject_id.clone(), r.session, r.task.clone());
            if !seen.insert(key) {
                warnings.push(format!(
                    "duplicate entry for ({}, {}, {})",
                    r.subject_id, r.session, r.task
                ));
            }
        }
        let role = |sel: &StreamSelector, name: &str, warnings: &mut Vec<String>| {
            let covered: BTreeSet<&str> = self
                .recordings
                .iter()
                .filter(|r| r.session == sel.session && r.task == sel.task)
                .map(|r| r.subject_id.as_str())
                .collect();
            for subject in self.subjects() {
                if !covered.contains(subject) {
                    warnings.push(format!("subject {subject} has no {name} recording"));
                }
            }
        };
        role(&self.enrollment_selector, "enrollment", &mut warnings);
        role(&self.authentication_selector, "authentication", &mut warnings);
        warnings
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.recordings
            .iter()
            .map(|r| r.subject_id.as_str())
            .collect()
    }
}
