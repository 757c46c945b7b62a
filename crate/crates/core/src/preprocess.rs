//! Raw recording to normalized velocity sequences.
//!
//! Stage order is fixed: gaze bounds, Savitzky-Golay differentiation,
//! segmentation into fixed-duration sequences, velocity clamping, global
//! z-scoring, and zero-filling of invalid samples. Normalization statistics
//! are fitted once over a whole corpus (all subjects and sessions of one
//! experiment condition) so every stream is standardized against the same
//! distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GazeRecording, Sequence, SequenceBatch, Session};
use crate::savgol;
use crate::stats::csum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Horizontal gaze bounds in degrees, inclusive.
    pub h_bounds_deg: (f64, f64),
    /// Vertical gaze bounds in degrees, inclusive.
    pub v_bounds_deg: (f64, f64),
    /// Savitzky-Golay window length in samples (odd).
    pub sg_window: usize,
    /// Savitzky-Golay polynomial order.
    pub sg_polyorder: usize,
    /// Velocity magnitude ceiling in deg/s.
    pub clamp_deg_per_s: f64,
    /// Sequence duration in seconds.
    pub sequence_duration_s: f64,
    /// Maximum sequences retained per stream.
    pub sequences_per_stream: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            h_bounds_deg: (-23.3, 23.3),
            v_bounds_deg: (-18.5, 11.7),
            sg_window: 7,
            sg_polyorder: 2,
            clamp_deg_per_s: 1000.0,
            sequence_duration_s: 5.0,
            sequences_per_stream: 12,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_bounds_deg.0 >= self.h_bounds_deg.1 || self.v_bounds_deg.0 >= self.v_bounds_deg.1
        {
            return Err(Error::Config("gaze bounds must satisfy lo < hi".into()));
        }
        if self.sg_window < 3 || self.sg_window % 2 == 0 {
            return Err(Error::Config(format!(
                "sg_window must be odd and >= 3, got {}",
                self.sg_window
            )));
        }
        if self.sg_polyorder < 1 || self.sg_polyorder >= self.sg_window {
            return Err(Error::Config(format!(
                "sg_polyorder must satisfy 1 <= order < window, got {}",
                self.sg_polyorder
            )));
        }
        if !(self.clamp_deg_per_s.is_finite() && self.clamp_deg_per_s > 0.0) {
            return Err(Error::Config("clamp_deg_per_s must be positive".into()));
        }
        if !(self.sequence_duration_s.is_finite() && self.sequence_duration_s > 0.0) {
            return Err(Error::Config("sequence_duration_s must be positive".into()));
        }
        if self.sequences_per_stream == 0 {
            return Err(Error::Config("sequences_per_stream must be >= 1".into()));
        }
        Ok(())
    }

    /// Samples per sequence at the given sampling rate.
    pub fn sequence_len(&self, sampling_rate_hz: f64) -> Result<usize> {
        let len = (self.sequence_duration_s * sampling_rate_hz).round() as usize;
        if len == 0 {
            return Err(Error::InvalidArgument(format!(
                "sequence duration {} s at {} Hz rounds to zero samples",
                self.sequence_duration_s, sampling_rate_hz
            )));
        }
        Ok(len)
    }
}

/// Velocity channels of one stream, still carrying invalid samples.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityStream {
    pub subject_id: String,
    pub session: Session,
    pub sampling_rate_hz: f64,
    pub h: Vec<Option<f64>>,
    pub v: Vec<Option<f64>>,
}

/// One segmented sequence before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSequence {
    pub h: Vec<Option<f64>>,
    pub v: Vec<Option<f64>>,
}

/// Segmented, clamped sequences of one stream before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawBatch {
    pub subject_id: String,
    pub session: Session,
    pub sampling_rate_hz: f64,
    pub sequences: Vec<RawSequence>,
}

/// Marks samples outside the gaze bounds invalid (both channels; boundary
/// values are retained). Already-invalid samples stay invalid.
pub fn apply_gaze_bounds(r: &GazeRecording, cfg: &PreprocessConfig) -> GazeRecording {
    let mut out = r.clone();
    for i in 0..r.len() {
        let h_ok = matches!(r.horizontal[i], Some(x) if (cfg.h_bounds_deg.0..=cfg.h_bounds_deg.1).contains(&x));
        let v_ok = matches!(r.vertical[i], Some(y) if (cfg.v_bounds_deg.0..=cfg.v_bounds_deg.1).contains(&y));
        // A valid sample must be in-bounds on both channels; otherwise the
        // whole sample is discarded.
        if !(h_ok && v_ok) {
            out.horizontal[i] = None;
            out.vertical[i] = None;
        }
    }
    out
}

/// Differentiates both position channels into deg/s velocities.
pub fn sg_velocity(r: &GazeRecording, cfg: &PreprocessConfig) -> Result<VelocityStream> {
    let coeffs: Vec<f64> = savgol::first_derivative_coefficients(cfg.sg_window, cfg.sg_polyorder)?;
    let scale = r.sampling_rate_hz;
    let h = savgol::filter_derivative(&r.horizontal, &coeffs, scale)?;
    let v = savgol::filter_derivative(&r.vertical, &coeffs, scale)?;
    Ok(VelocityStream {
        subject_id: r.subject_id.clone(),
        session: r.session,
        sampling_rate_hz: r.sampling_rate_hz,
        h,
        v,
    })
}

/// Cuts the stream into consecutive non-overlapping sequences of the
/// configured duration, keeping at most `sequences_per_stream` from the
/// start. Trailing samples that do not fill a sequence are dropped.
pub fn segment_sequences(stream: &VelocityStream, cfg: &PreprocessConfig) -> Result<RawBatch> {
    let len = cfg.sequence_len(stream.sampling_rate_hz)?;
    let count = (stream.h.len() / len).min(cfg.sequences_per_stream);
    let sequences = (0..count)
        .map(|k| RawSequence {
            h: stream.h[k * len..(k + 1) * len].to_vec(),
            v: stream.v[k * len..(k + 1) * len].to_vec(),
        })
        .collect();
    Ok(RawBatch {
        subject_id: stream.subject_id.clone(),
        session: stream.session,
        sampling_rate_hz: stream.sampling_rate_hz,
        sequences,
    })
}

/// Clamps valid velocities into `[-clamp, clamp]`; invalid samples pass
/// through untouched.
pub fn clamp_velocity(batch: &mut RawBatch, cfg: &PreprocessConfig) {
    let c = cfg.clamp_deg_per_s;
    for seq in &mut batch.sequences {
        for ch in [&mut seq.h, &mut seq.v] {
            for s in ch.iter_mut() {
                if let Some(v) = s {
                    *v = v.clamp(-c, c);
                }
            }
        }
    }
}

/// Pooled mean and population SD of the valid velocity samples of a corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub sd: f64,
}

/// Fits normalization statistics over every valid sample (both channels, all
/// sequences, all batches). Two-pass with compensated sums, so the result is
/// independent of batch ordering at f64 precision.
pub fn fit_normalization(batches: &[RawBatch]) -> Result<NormalizationStats> {
    let values = || {
        batches
            .iter()
            .flat_map(|b| b.sequences.iter())
            .flat_map(|s| s.h.iter().chain(s.v.iter()))
            .flatten()
            .copied()
    };
    let n = values().count();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "normalization needs at least 2 valid samples, got {n}"
        )));
    }
    let mean = csum(values()) / n as f64;
    let var = csum(values().map(|x| (x - mean) * (x - mean))) / n as f64;
    let sd = var.sqrt();
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::Degenerate(
            "normalization needs nonzero velocity variance".into(),
        ));
    }
    Ok(NormalizationStats { mean, sd })
}

/// Z-scores valid samples and fills invalid ones with exactly 0.
pub fn normalize_and_fill(batch: &RawBatch, stats: &NormalizationStats) -> SequenceBatch {
    let z = |s: &Option<f64>| match s {
        Some(v) => (v - stats.mean) / stats.sd,
        None => 0.0,
    };
    SequenceBatch {
        subject_id: batch.subject_id.clone(),
        session: batch.session,
        sampling_rate_hz: batch.sampling_rate_hz,
        sequences: batch
            .sequences
            .iter()
            .map(|seq| Sequence {
                h: seq.h.iter().map(z).collect(),
                v: seq.v.iter().map(z).collect(),
            })
            .collect(),
    }
}

/// Bounds, differentiation, segmentation and clamping of one recording.
pub fn prepare_batch(r: &GazeRecording, cfg: &PreprocessConfig) -> Result<RawBatch> {
    cfg.validate()?;
    let bounded = apply_gaze_bounds(r, cfg);
    let velocity = sg_velocity(&bounded, cfg)?;
    let mut batch = segment_sequences(&velocity, cfg)?;
    clamp_velocity(&mut batch, cfg);
    Ok(batch)
}

/// Full pipeline for one recording. When `stats` is `None` the statistics
/// are fitted from this recording alone.
pub fn preprocess_recording(
    r: &GazeRecording,
    cfg: &PreprocessConfig,
    stats: Option<&NormalizationStats>,
) -> Result<(SequenceBatch, NormalizationStats)> {
    let batch = prepare_batch(r, cfg)?;
    let stats = match stats {
        Some(s) => *s,
        None => fit_normalization(std::slice::from_ref(&batch))?,
    };
    Ok((normalize_and_fill(&batch, &stats), stats))
}

/// Full pipeline for a corpus with statistics pooled across all recordings.
pub fn preprocess_corpus(
    recordings: &[GazeRecording],
    cfg: &PreprocessConfig,
) -> Result<(Vec<SequenceBatch>, NormalizationStats)> {
    let batches = recordings
        .iter()
        .map(|r| prepare_batch(r, cfg))
        .collect::<Result<Vec<_>>>()?;
    let stats = fit_normalization(&batches)?;
    let out = batches
        .iter()
        .map(|b| normalize_and_fill(b, &stats))
        .collect();
    Ok((out, stats))
}
