//! Signal-quality manipulations: sampling-rate decimation, duration
//! truncation, sequence-count reduction, and additive Gaussian noise — plus
//! the RMS-S2S spatial-precision estimator used to calibrate the noise
//! levels.
//!
//! Each manipulation acts at a fixed pipeline stage: decimation and noise on
//! raw positions, percentage truncation on normalized sequences, sequence
//! count at centroid time.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::{decimation_stages, ZeroPhaseFilter};
use crate::error::{Error, Result};
use crate::model::{GazeRecording, ManipulationKind, Sequence, SequenceBatch};
use crate::seeding::recording_rng;
use crate::stats::{median, quantile_sorted};

/// One manipulation at one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManipulationSpec {
    /// Reduce the sampling rate to roughly `target_hz` (raw stage).
    Decimate { target_hz: f64 },
    /// Keep the first `percent` of each sequence, re-centered in zeros
    /// (normalized-sequence stage).
    Percentage { percent: f64 },
    /// Average only the first `n` sequence embeddings (centroid stage).
    NumSequences { n: usize },
    /// Additive Gaussian position noise, SD in degrees (raw stage).
    Noise { sigma_deg: f64 },
}

impl ManipulationSpec {
    pub fn kind(self) -> ManipulationKind {
        match self {
            ManipulationSpec::Decimate { .. } => ManipulationKind::Decimate,
            ManipulationSpec::Percentage { .. } => ManipulationKind::Percentage,
            ManipulationSpec::NumSequences { .. } => ManipulationKind::NumSequences,
            ManipulationSpec::Noise { .. } => ManipulationKind::Noise,
        }
    }

    /// The level as reported (grid coordinate of this condition).
    pub fn level(self) -> f64 {
        match self {
            ManipulationSpec::Decimate { target_hz } => target_hz,
            ManipulationSpec::Percentage { percent } => percent,
            ManipulationSpec::NumSequences { n } => n as f64,
            ManipulationSpec::Noise { sigma_deg } => sigma_deg,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            ManipulationSpec::Decimate { target_hz } => {
                if !(target_hz > 0.0 && target_hz.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "decimation target must be a positive rate, got {target_hz}"
                    )));
                }
            }
            ManipulationSpec::Percentage { percent } => {
                if !(percent > 0.0 && percent <= 100.0) {
                    return Err(Error::InvalidArgument(format!(
                        "percentage must lie in (0, 100], got {percent}"
                    )));
                }
            }
            ManipulationSpec::NumSequences { n } => {
                if n == 0 {
                    return Err(Error::InvalidArgument(
                        "sequence count must be at least 1".into(),
                    ));
                }
            }
            ManipulationSpec::Noise { sigma_deg } => {
                if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "noise SD must be non-negative, got {sigma_deg}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Integer decimation factor realizing `target_hz` from `fs`. The achieved
/// rate `fs/q` must land within 2% of the target, which admits the rounded
/// labels in the standard grid (333 Hz from 1000 Hz is factor 3, i.e.
/// 333.33 Hz) while rejecting rates no integer factor can reach.
pub fn decimation_factor(fs: f64, target_hz: f64) -> Result<usize> {
    if !(target_hz > 0.0 && target_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "decimation target must be positive, got {target_hz}"
        )));
    }
    let q = (fs / target_hz).round();
    if q < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "target {target_hz} Hz exceeds the sampling rate {fs} Hz"
        )));
    }
    let achieved = fs / q;
    if ((achieved - target_hz) / target_hz).abs() > 0.02 {
        return Err(Error::InvalidArgument(format!(
            "no integer factor of {fs} Hz lands within 2% of {target_hz} Hz \
             (nearest is {achieved} Hz)"
        )));
    }
    Ok(q as usize)
}

/// Linearly interpolates across invalid runs so the IIR filter sees a
/// finite signal; edge runs hold the nearest valid value. Returns `None`
/// when the channel has no valid samples at all.
fn bridge_invalid(x: &[Option<f64>]) -> Option<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    let mut prev: Option<usize> = None;
    for i in 0..x.len() {
        let Some(v) = x[i] else { continue };
        out[i] = v;
        match prev {
            None => out[..i].fill(v),
            Some(p) => {
                let left = x[p].unwrap();
                let step = (v - left) / (i - p) as f64;
                for (k, slot) in out[p + 1..i].iter_mut().enumerate() {
                    *slot = left + step * (k + 1) as f64;
                }
            }
        }
        prev = Some(i);
    }
    let last = prev?;
    out[last + 1..].fill(x[last].unwrap());
    Some(out)
}

/// Distance from each index to the nearest invalid sample (`usize::MAX`
/// when the channel is fully valid).
fn distance_to_invalid(x: &[Option<f64>]) -> Vec<usize> {
    let n = x.len();
    let mut dist = vec![usize::MAX; n];
    let mut last: Option<usize> = None;
    for i in 0..n {
        if x[i].is_none() {
            last = Some(i);
        }
        if let Some(l) = last {
            dist[i] = i - l;
        }
    }
    last = None;
    for i in (0..n).rev() {
        if x[i].is_none() {
            last = Some(i);
        }
        if let Some(l) = last {
            dist[i] = dist[i].min(l - i);
        }
    }
    dist
}

/// One filter-and-keep-every-f-th stage on a single channel. Samples whose
/// filtered value drew on an invalid input (within the filter's measured
/// support) come out invalid.
fn decimate_stage(x: &[Option<f64>], filter: &ZeroPhaseFilter, factor: usize) -> Vec<Option<f64>> {
    let Some(bridged) = bridge_invalid(x) else {
        return x.iter().step_by(factor).map(|_| None).collect();
    };
    let filtered = filter.apply(&bridged);
    let dist = distance_to_invalid(x);
    let radius = filter.support_radius();
    (0..x.len())
        .step_by(factor)
        .map(|i| (dist[i] == usize::MAX || dist[i] > radius).then(|| filtered[i]))
        .collect()
}

/// Anti-aliased downsampling by an integer factor. Factors above the stage
/// limit run as a cascade of near-equal stages (largest first); `q = 1` is
/// the identity.
pub fn decimate(r: &GazeRecording, q: usize) -> Result<GazeRecording> {
    if q < 1 {
        return Err(Error::InvalidArgument("decimation factor must be >= 1".into()));
    }
    if r.valid_len() < 8 * q {
        return Err(Error::TooShort(format!(
            "decimation by {q} needs at least {} valid samples, got {}",
            8 * q,
            r.valid_len()
        )));
    }
    if q == 1 {
        return Ok(r.clone());
    }
    let mut h = r.horizontal.clone();
    let mut v = r.vertical.clone();
    let mut fs = r.sampling_rate_hz;
    for &factor in &decimation_stages(q)? {
        let filter = ZeroPhaseFilter::cheby1_lowpass(8, 0.05, 0.8 / factor as f64)?;
        h = decimate_stage(&h, &filter, factor);
        v = decimate_stage(&v, &filter, factor);
        fs /= factor as f64;
    }
    GazeRecording::new(r.subject_id.clone(), r.session, r.task.clone(), fs, h, v)
}

/// Keeps the first `round(percent·L/100)` samples of a normalized sequence
/// and re-centers them in a zero field of the original length.
pub fn percentage_truncate(seq: &Sequence, percent: f64) -> Result<Sequence> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "percentage must lie in (0, 100], got {percent}"
        )));
    }
    let l = seq.len();
    let w = (percent * l as f64 / 100.0).round() as usize;
    if w == 0 {
        return Err(Error::InvalidArgument(format!(
            "{percent}% of {l} samples rounds to an empty window"
        )));
    }
    let left = (l - w) / 2;
    let mut h = vec![0.0; l];
    let mut v = vec![0.0; l];
    h[left..left + w].copy_from_slice(&seq.h[..w]);
    v[left..left + w].copy_from_slice(&seq.v[..w]);
    Sequence::new(h, v)
}

/// Retains the first `n` sequences of a batch in recording order.
pub fn take_first_sequences(batch: &SequenceBatch, n: usize) -> Result<SequenceBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sequence count must be at least 1".into(),
        ));
    }
    let available = batch.sequences.len();
    if n > available {
        return Err(Error::InvalidArgument(format!(
            "requested {n} sequences but subject {} session {} has only {available}",
            batch.subject_id, batch.session
        )));
    }
    Ok(SequenceBatch {
        subject_id: batch.subject_id.clone(),
        session: batch.session,
        sampling_rate_hz: batch.sampling_rate_hz,
        sequences: batch.sequences[..n].to_vec(),
    })
}

/// Adds i.i.d. zero-mean Gaussian noise (SD `sigma_deg`) to each channel of
/// each valid sample. The stream is keyed on (seed, subject, session), so
/// results do not depend on evaluation order; draws advance over invalid
/// samples too, keeping the stream aligned with sample indices.
pub fn inject_noise(r: &GazeRecording, sigma_deg: f64, seed: u64) -> Result<GazeRecording> {
    if !(sigma_deg >= 0.0 && sigma_deg.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise SD must be non-negative, got {sigma_deg}"
        )));
    }
    if sigma_deg == 0.0 {
        return Ok(r.clone());
    }
    let mut rng = recording_rng(seed, "noise", &r.subject_id, r.session);
    let mut h = r.horizontal.clone();
    let mut v = r.vertical.clone();
    for i in 0..r.len() {
        let zh: f64 = StandardNormal.sample(&mut rng);
        let zv: f64 = StandardNormal.sample(&mut rng);
        if let Some(x) = h[i].as_mut() {
            *x += sigma_deg * zh;
        }
        if let Some(y) = v[i].as_mut() {
            *y += sigma_deg * zv;
        }
    }
    GazeRecording::new(
        r.subject_id.clone(),
        r.session,
        r.task.clone(),
        r.sampling_rate_hz,
        h,
        v,
    )
}

/// Spatial precision as the median RMS of sample-to-sample differences
/// (horizontal channel), over the segments at or below the 5th percentile.
///
/// The recording splits into consecutive non-overlapping 80 ms segments;
/// any segment touching an invalid sample is discarded.
pub fn spatial_precision(r: &GazeRecording) -> Result<f64> {
    let k = (0.08 * r.sampling_rate_hz).round() as usize;
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "an 80 ms segment at {} Hz holds fewer than 2 samples",
            r.sampling_rate_hz
        )));
    }
    let mut rms = Vec::with_capacity(r.len() / k);
    for start in (0..=r.len().saturating_sub(k)).step_by(k) {
        if (start..start + k).any(|i| !r.sample_valid(i)) {
            continue;
        }
        let sum_sq: f64 = (start..start + k - 1)
            .map(|i| {
                let d = r.horizontal[i + 1].unwrap() - r.horizontal[i].unwrap();
                d * d
            })
            .sum();
        rms.push((sum_sq / (k - 1) as f64).sqrt());
    }
    if rms.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "only {} valid 80 ms segments; need at least 20",
            rms.len()
        )));
    }
    rms.sort_unstable_by(f64::total_cmp);
    let cutoff = quantile_sorted(&rms, 0.05);
    let subset: Vec<f64> = rms.iter().copied().take_while(|&v| v <= cutoff).collect();
    Ok(median(&subset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Session;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn recording(h: Vec<Option<f64>>, v: Vec<Option<f64>>, fs: f64) -> GazeRecording {
        GazeRecording::new("s1", Session::S1, "TEX", fs, h, v).unwrap()
    }

    fn constant_recording(value: f64, n: usize, fs: f64) -> GazeRecording {
        recording(vec![Some(value); n], vec![Some(-value); n], fs)
    }

    #[test]
    fn factor_derivation() {
        assert_eq!(decimation_factor(1000.0, 1000.0).unwrap(), 1);
        assert_eq!(decimation_factor(1000.0, 500.0).unwrap(), 2);
        assert_eq!(decimation_factor(1000.0, 333.0).unwrap(), 3);
        assert_eq!(decimation_factor(1000.0, 250.0).unwrap(), 4);
        assert_eq!(decimation_factor(1000.0, 10.0).unwrap(), 100);
        assert!(decimation_factor(1000.0, 600.0).is_err());
        assert!(decimation_factor(1000.0, 2000.0).is_err());
        assert!(decimation_factor(1000.0, 0.0).is_err());
    }

    #[test]
    fn decimate_factor_one_is_identity() {
        let r = constant_recording(1.5, 500, 1000.0);
        let out = decimate(&r, 1).unwrap();
        assert_eq!(out.horizontal, r.horizontal);
        assert_eq!(out.vertical, r.vertical);
        assert_eq!(out.sampling_rate_hz, 1000.0);
    }

    #[test]
    fn decimate_preserves_constants() {
        let r = constant_recording(2.75, 10_001, 1000.0);
        for q in [2usize, 10, 100] {
            let out = decimate(&r, q).unwrap();
            assert_eq!(out.len(), 10_001usize.div_ceil(q));
            assert_abs_diff_eq!(out.sampling_rate_hz, 1000.0 / q as f64, epsilon = 1e-12);
            for i in 0..out.len() {
                assert_abs_diff_eq!(out.horizontal[i].unwrap(), 2.75, epsilon = 1e-9);
                assert_abs_diff_eq!(out.vertical[i].unwrap(), -2.75, epsilon = 1e-9);
            }
        }
    }

    /// Least-squares amplitude of a known-frequency sine in `x`.
    fn sine_amplitude(x: &[f64], freq_hz: f64, fs: f64) -> f64 {
        let (mut ss, mut sc) = (0.0, 0.0);
        for (i, &v) in x.iter().enumerate() {
            let t = 2.0 * std::f64::consts::PI * freq_hz * i as f64 / fs;
            ss += v * t.sin();
            sc += v * t.cos();
        }
        let n = x.len() as f64;
        // Orthogonal basis on long windows: amplitude = 2/n * projection.
        (2.0 / n) * ss.hypot(sc)
    }

    #[test]
    fn passband_sine_survives_large_factor() {
        // 2 Hz sine at 1000 Hz through q=40 (new rate 25 Hz, Nyquist 12.5):
        // well inside the passband, amplitude must hold within 5%.
        let fs = 1000.0;
        let n = 60_000;
        let h: Vec<Option<f64>> = (0..n)
            .map(|i| Some((2.0 * std::f64::consts::PI * 2.0 * i as f64 / fs).sin()))
            .collect();
        let r = recording(h, vec![Some(0.0); n], fs);
        let out = decimate(&r, 40).unwrap();
        let y: Vec<f64> = out.horizontal.iter().map(|s| s.unwrap()).collect();
        let amp = sine_amplitude(&y[100..y.len() - 100], 2.0, 25.0);
        assert!((amp - 1.0).abs() < 0.05, "passband amplitude {amp}");
    }

    #[test]
    fn stopband_sine_is_suppressed() {
        // 9 Hz sine, q=100 (new rate 10 Hz, Nyquist 5): above the new
        // Nyquist, must come out attenuated by at least 20 dB.
        let fs = 1000.0;
        let n = 60_000;
        let h: Vec<Option<f64>> = (0..n)
            .map(|i| Some((2.0 * std::f64::consts::PI * 9.0 * i as f64 / fs).sin()))
            .collect();
        let r = recording(h, vec![Some(0.0); n], fs);
        let out = decimate(&r, 100).unwrap();
        let y: Vec<f64> = out.horizontal.iter().map(|s| s.unwrap()).collect();
        let rms = crate::stats::rms(&y[30..y.len() - 30]);
        assert!(rms < 0.1 / 2f64.sqrt(), "stopband rms {rms}");
    }

    #[test]
    fn invalid_samples_poison_their_filter_support() {
        let n = 20_000;
        let mut h: Vec<Option<f64>> = vec![Some(1.0); n];
        h[10_000] = None;
        let r = recording(h, vec![Some(0.0); n], 1000.0);
        let out = decimate(&r, 10).unwrap();
        // The invalid region maps near output index 1000.
        assert!(out.horizontal[1000].is_none());
        assert!(out.horizontal[0].is_some());
        assert!(out.horizontal[out.len() - 1].is_some());
        // Validity is contiguous around the hole: valid, a None-run, valid.
        let invalid: Vec<usize> = (0..out.len())
            .filter(|&i| out.horizontal[i].is_none())
            .collect();
        assert_eq!(
            invalid.last().unwrap() - invalid.first().unwrap() + 1,
            invalid.len()
        );
        // Vertical channel had no invalids and stays fully valid.
        assert!(out.vertical.iter().all(Option::is_some));
    }

    #[test]
    fn decimate_rejects_short_recordings() {
        let r = constant_recording(0.0, 100, 1000.0);
        assert!(matches!(decimate(&r, 100), Err(Error::TooShort(_))));
    }

    #[test]
    fn percentage_full_is_identity() {
        let seq = Sequence::new(vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let out = percentage_truncate(&seq, 100.0).unwrap();
        assert_eq!(out.h, seq.h);
        assert_eq!(out.v, seq.v);
    }

    #[test]
    fn percentage_window_is_first_samples_centered() {
        let l = 5000;
        let h: Vec<f64> = (0..l).map(|i| i as f64 + 1.0).collect();
        let seq = Sequence::new(h, vec![1.0; l]).unwrap();

        let out = percentage_truncate(&seq, 50.0).unwrap();
        assert_eq!(out.len(), l);
        // Support occupies indices 1250..=3749 and carries the FIRST 2500
        // input samples.
        assert_eq!(out.h[1249], 0.0);
        assert_eq!(out.h[1250], 1.0);
        assert_eq!(out.h[3749], 2500.0);
        assert_eq!(out.h[3750], 0.0);

        let out = percentage_truncate(&seq, 1.0).unwrap();
        let support: Vec<usize> = (0..l).filter(|&i| out.h[i] != 0.0).collect();
        assert_eq!(support.len(), 50);
        assert_eq!(support[0], 2475);
        assert_eq!(out.h[2475], 1.0);
    }

    #[test]
    fn percentage_rejects_bad_levels() {
        let seq = Sequence::new(vec![1.0; 10], vec![1.0; 10]).unwrap();
        assert!(percentage_truncate(&seq, 0.0).is_err());
        assert!(percentage_truncate(&seq, 100.1).is_err());
        assert!(percentage_truncate(&seq, -5.0).is_err());
        // 1% of 10 samples rounds to an empty window.
        assert!(percentage_truncate(&seq, 1.0).is_err());
    }

    fn batch(n: usize) -> SequenceBatch {
        let sequences = (0..n)
            .map(|i| Sequence::new(vec![i as f64; 4], vec![0.0; 4]).unwrap())
            .collect();
        SequenceBatch {
            subject_id: "s1".into(),
            session: Session::S1,
            sampling_rate_hz: 1000.0,
            sequences,
        }
    }

    #[test]
    fn take_first_sequences_contract() {
        let b = batch(12);
        let all = take_first_sequences(&b, 12).unwrap();
        assert_eq!(all.sequences.len(), 12);
        let one = take_first_sequences(&b, 1).unwrap();
        assert_eq!(one.sequences[0].h, vec![0.0; 4]);
        let err = take_first_sequences(&batch(9), 10).unwrap_err();
        assert!(err.to_string().contains("only 9"), "{err}");
        assert!(take_first_sequences(&b, 0).is_err());
    }

    #[test]
    fn noise_zero_sigma_is_bitwise_identity() {
        let mut h: Vec<Option<f64>> = (0..100).map(|i| Some(i as f64 * 0.1)).collect();
        h[7] = None;
        let r = recording(h, vec![Some(-0.5); 100], 1000.0);
        let out = inject_noise(&r, 0.0, 42).unwrap();
        assert_eq!(out.horizontal, r.horizontal);
        assert_eq!(out.vertical, r.vertical);
    }

    #[test]
    fn noise_is_deterministic_and_keyed() {
        let r = constant_recording(0.0, 1000, 1000.0);
        let a = inject_noise(&r, 1.0, 7).unwrap();
        let b = inject_noise(&r, 1.0, 7).unwrap();
        assert_eq!(a.horizontal, b.horizontal);

        let other = GazeRecording::new(
            "s2",
            Session::S1,
            "TEX",
            1000.0,
            r.horizontal.clone(),
            r.vertical.clone(),
        )
        .unwrap();
        let c = inject_noise(&other, 1.0, 7).unwrap();
        assert_ne!(a.horizontal, c.horizontal);

        let d = inject_noise(&r, 1.0, 8).unwrap();
        assert_ne!(a.horizontal, d.horizontal);
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let r = constant_recording(3.0, 60_000, 1000.0);
        let out = inject_noise(&r, 1.0, 11).unwrap();
        let deltas: Vec<f64> = (0..r.len())
            .map(|i| out.horizontal[i].unwrap() - r.horizontal[i].unwrap())
            .collect();
        let var = crate::stats::population_variance(&deltas);
        assert!((0.97..=1.03).contains(&var), "noise variance {var}");
    }

    #[test]
    fn noise_skips_invalid_samples_but_keeps_alignment() {
        let n = 1000;
        let mut h: Vec<Option<f64>> = vec![Some(0.0); n];
        h[500] = None;
        let masked = recording(h, vec![Some(0.0); n], 1000.0);
        let clean = constant_recording(0.0, n, 1000.0);

        let out_masked = inject_noise(&masked, 0.5, 3).unwrap();
        let out_clean = inject_noise(&clean, 0.5, 3).unwrap();
        assert!(out_masked.horizontal[500].is_none());
        // Same draws land on every other index regardless of the hole.
        for i in 0..n {
            if i != 500 {
                assert_eq!(out_masked.horizontal[i], out_clean.horizontal[i]);
            }
            assert_eq!(out_masked.vertical[i], out_clean.vertical[i]);
        }
    }

    #[test]
    fn precision_of_constant_is_zero() {
        let r = constant_recording(5.0, 2000, 1000.0);
        assert_abs_diff_eq!(spatial_precision(&r).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn precision_translation_and_scale() {
        let mut rng = crate::seeding::stream_rng(99, &["precision-test"]);
        let n = 8000;
        let base: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let make = |xs: &[f64]| {
            recording(
                xs.iter().map(|&x| Some(x)).collect(),
                vec![Some(0.0); n],
                1000.0,
            )
        };
        let p0 = spatial_precision(&make(&base)).unwrap();
        let shifted: Vec<f64> = base.iter().map(|x| x + 10.0).collect();
        assert_abs_diff_eq!(spatial_precision(&make(&shifted)).unwrap(), p0, epsilon = 1e-12);
        let scaled: Vec<f64> = base.iter().map(|x| x * -3.0).collect();
        assert_abs_diff_eq!(
            spatial_precision(&make(&scaled)).unwrap(),
            3.0 * p0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn precision_tracks_injected_noise_level() {
        // Pure Gaussian noise on a constant: the estimator should land in
        // the calibration band around 1.15·sigma at 1000 Hz.
        let clean = constant_recording(0.0, 60_000, 1000.0);
        let noisy = inject_noise(&clean, 1.0, 5).unwrap();
        let p = spatial_precision(&noisy).unwrap();
        assert!((1.05..=1.25).contains(&p), "precision {p}");

        let noisy2 = inject_noise(&clean, 2.0, 5).unwrap();
        let p2 = spatial_precision(&noisy2).unwrap();
        assert!((2.15..=2.45).contains(&p2), "precision {p2}");
    }

    #[test]
    fn precision_requires_enough_segments() {
        let r = constant_recording(0.0, 1000, 1000.0); // 12 full segments
        assert!(matches!(
            spatial_precision(&r),
            Err(Error::InsufficientData(_))
        ));
        let slow = constant_recording(0.0, 1000, 10.0); // k = 1 sample
        assert!(matches!(
            spatial_precision(&slow),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn precision_ignores_segments_with_invalid_samples() {
        // Invalid-touched segments carry huge jumps; they must be discarded
        // rather than contaminate the estimate.
        let n = 4000;
        let mut h: Vec<Option<f64>> = vec![Some(0.0); n];
        for i in (0..n).step_by(400) {
            h[i] = None;
            if i + 1 < n {
                h[i + 1] = Some(500.0);
            }
        }
        let r = recording(h, vec![Some(0.0); n], 1000.0);
        let p = spatial_precision(&r).unwrap();
        assert!(p < 1.0, "contaminated segments leaked: {p}");
    }
}
