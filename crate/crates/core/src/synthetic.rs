//! Desk-scale synthetic gaze corpus.
//!
//! Each subject draws a fixed parameter bundle (saccade rate, target-box
//! scale, drift level, tremor amplitude/frequency, main-sequence
//! coefficients); recordings alternate fixations and min-jerk saccades with
//! AR(1) fixational drift and sinusoidal tremor on top. Session 2 keeps the
//! subject's parameters (optionally perturbed by a small fraction) but
//! redraws every event realization, so the corpus carries genuine
//! subject identity across sessions without being trivially identical.
//!
//! Everything is derived from keyed RNG streams: two runs with one seed are
//! bitwise identical, and no draw order depends on evaluation order.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_recording_csv;
use crate::model::{DatasetManifest, GazeRecording, RecordingEntry, Session, StreamSelector};
use crate::preprocess::PreprocessConfig;
use crate::seeding::{recording_rng, stream_rng};

/// Half-extents of the base saccade target box (deg), centered on
/// `TARGET_CENTER`; a subject's `amplitude_scale` multiplies both.
const TARGET_HALF_W: f64 = 6.0;
const TARGET_HALF_H: f64 = 2.75;
const TARGET_CENTER: (f64, f64) = (0.0, -3.4);

/// Generator configuration. Ranges are inclusive `[low, high]` bounds of
/// the per-subject uniform draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    /// Saccades per second.
    pub saccade_rate_hz: (f64, f64),
    /// Multiplier on the base target box (drives saccade amplitudes).
    pub amplitude_scale: (f64, f64),
    /// RMS fixational drift velocity, deg/s.
    pub drift_sd_deg_s: (f64, f64),
    /// Tremor amplitude (deg) and frequency (Hz).
    pub tremor_amp_deg: (f64, f64),
    pub tremor_hz: (f64, f64),
    /// Main-sequence saturation velocity (deg/s) and amplitude constant
    /// (deg): vpeak = eta * (1 - exp(-A / c)).
    pub peak_velocity_deg_s: (f64, f64),
    pub main_sequence_deg: (f64, f64),
    /// Relative per-parameter perturbation applied to session 2, in [0, 1].
    pub session_perturbation: f64,
    /// Generator seed; `None` inherits the experiment master seed.
    pub seed: Option<u64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_subjects: 60,
            duration_s: 65.0,
            sampling_rate_hz: 1000.0,
            saccade_rate_hz: (2.0, 4.0),
            amplitude_scale: (0.72, 1.4),
            drift_sd_deg_s: (0.11, 2.2),
            tremor_amp_deg: (0.002, 0.033),
            tremor_hz: (60.0, 95.0),
            peak_velocity_deg_s: (440.0, 575.0),
            main_sequence_deg: (3.5, 8.5),
            session_perturbation: 0.02,
            seed: None,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 3 {
            return Err(Error::Config(format!(
                "synthetic corpus needs at least 3 subjects, got {}",
                self.n_subjects
            )));
        }
        if !(self.duration_s > 0.0 && self.sampling_rate_hz > 0.0) {
            return Err(Error::Config(
                "duration and sampling rate must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.session_perturbation) {
            return Err(Error::Config(format!(
                "session perturbation must lie in [0, 1], got {}",
                self.session_perturbation
            )));
        }
        let ranges = [
            ("saccade_rate_hz", self.saccade_rate_hz),
            ("amplitude_scale", self.amplitude_scale),
            ("drift_sd_deg_s", self.drift_sd_deg_s),
            ("tremor_amp_deg", self.tremor_amp_deg),
            ("tremor_hz", self.tremor_hz),
            ("peak_velocity_deg_s", self.peak_velocity_deg_s),
            ("main_sequence_deg", self.main_sequence_deg),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "range {name} must satisfy 0 < low <= high, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn subject_id(&self, index: usize) -> String {
        format!("S{:03}", index + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct SubjectParams {
    saccade_rate: f64,
    amplitude_scale: f64,
    drift_sd: f64,
    tremor_amp: f64,
    tremor_hz: f64,
    peak_velocity: f64,
    main_sequence: f64,
}

fn draw_in(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn clamp_to(value: f64, (lo, hi): (f64, f64)) -> f64 {
    value.clamp(lo, hi)
}

/// Subject parameters for one session. The base bundle is drawn from a
/// per-subject stream (identical across sessions); session 2 multiplies
/// each parameter by `1 + perturbation * U(-1, 1)` from its own stream and
/// clamps back into the configured range.
pub(crate) fn subject_params(
    spec: &SyntheticSpec,
    seed: u64,
    subject_index: usize,
    session: Session,
) -> SubjectParams {
    let id = spec.subject_id(subject_index);
    let mut rng = stream_rng(seed, &["subject-params", &id]);
    let mut params = SubjectParams {
        saccade_rate: draw_in(&mut rng, spec.saccade_rate_hz),
        amplitude_scale: draw_in(&mut rng, spec.amplitude_scale),
        drift_sd: draw_in(&mut rng, spec.drift_sd_deg_s),
        tremor_amp: draw_in(&mut rng, spec.tremor_amp_deg),
        tremor_hz: draw_in(&mut rng, spec.tremor_hz),
        peak_velocity: draw_in(&mut rng, spec.peak_velocity_deg_s),
        main_sequence: draw_in(&mut rng, spec.main_sequence_deg),
    };
    if session == Session::S2 && spec.session_perturbation > 0.0 {
        let mut rng = stream_rng(seed, &["session-perturb", &id]);
        let mut wobble = |value: f64, range| {
            let f = 1.0 + spec.session_perturbation * rng.random_range(-1.0..1.0);
            clamp_to(value * f, range)
        };
        params = SubjectParams {
            saccade_rate: wobble(params.saccade_rate, spec.saccade_rate_hz),
            amplitude_scale: wobble(params.amplitude_scale, spec.amplitude_scale),
            drift_sd: wobble(params.drift_sd, spec.drift_sd_deg_s),
            tremor_amp: wobble(params.tremor_amp, spec.tremor_amp_deg),
            tremor_hz: wobble(params.tremor_hz, spec.tremor_hz),
            peak_velocity: wobble(params.peak_velocity, spec.peak_velocity_deg_s),
            main_sequence: wobble(params.main_sequence, spec.main_sequence_deg),
        };
    }
    params
}

struct Saccade {
    onset_s: f64,
    duration_s: f64,
    from: (f64, f64),
    to: (f64, f64),
}

/// Smooth unit step: 10t^3 - 15t^4 + 6t^5 (zero velocity and acceleration
/// at both ends, peak speed 1.875/duration).
fn min_jerk(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Uniform draw from the subject's scaled target box.
fn draw_target(rng: &mut impl Rng, scale: f64) -> (f64, f64) {
    let half_w = TARGET_HALF_W * scale;
    let half_h = TARGET_HALF_H * scale;
    (
        TARGET_CENTER.0 + rng.random_range(-half_w..half_w),
        TARGET_CENTER.1 + rng.random_range(-half_h..half_h),
    )
}

/// Event layout for one recording: alternating fixations (exponential
/// inter-saccade intervals, clamped to [0.15, 2.5] s) and main-sequence
/// saccades to uniform targets in the subject's scaled box.
fn layout_saccades(
    rng: &mut impl Rng,
    params: &SubjectParams,
    duration_s: f64,
) -> ((f64, f64), Vec<Saccade>) {
    let gaps = Exp::new(params.saccade_rate).expect("validated positive rate");

    let start = draw_target(rng, params.amplitude_scale);
    let mut here = start;
    let mut t = gaps.sample(rng).clamp(0.15, 2.5);
    let mut saccades = Vec::new();
    while t < duration_s {
        let target = draw_target(rng, params.amplitude_scale);
        let amplitude = (target.0 - here.0).hypot(target.1 - here.1);
        let vpeak = params.peak_velocity * (1.0 - (-amplitude / params.main_sequence).exp());
        let dur = if vpeak > 0.0 {
            (1.875 * amplitude / vpeak).clamp(0.02, 0.12)
        } else {
            0.02
        };
        saccades.push(Saccade {
            onset_s: t,
            duration_s: dur,
            from: here,
            to: target,
        });
        here = target;
        t += dur + gaps.sample(rng).clamp(0.15, 2.5);
    }
    (start, saccades)
}

/// AR(1) position component with stationary SD `sigma` and time constant
/// `tau_s`, sampled at `fs`.
struct Ar1 {
    phi: f64,
    innovation_sd: f64,
    state: f64,
}

impl Ar1 {
    fn new(rng: &mut impl Rng, sigma: f64, tau_s: f64, fs: f64) -> Self {
        let phi = (-1.0 / (tau_s * fs)).exp();
        let z: f64 = StandardNormal.sample(rng);
        Ar1 {
            phi,
            innovation_sd: sigma * (1.0 - phi * phi).sqrt(),
            state: sigma * z,
        }
    }

    fn step(&mut self, rng: &mut impl Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.state = self.phi * self.state + self.innovation_sd * z;
        self.state
    }
}

/// One recording: saccade scaffold + fixational drift + tremor, clipped to
/// the capture bounds.
fn generate_recording(
    spec: &SyntheticSpec,
    seed: u64,
    subject_index: usize,
    session: Session,
) -> Result<GazeRecording> {
    let id = spec.subject_id(subject_index);
    let fs = spec.sampling_rate_hz;
    let n = (spec.duration_s * fs).round() as usize;
    let params = subject_params(spec, seed, subject_index, session);

    let mut events_rng = recording_rng(seed, "events", &id, session);
    let (start, saccades) = layout_saccades(&mut events_rng, &params, spec.duration_s);

    // Drift: a fast component carries the target RMS drift velocity; a slow
    // large-excursion component adds low-frequency wander. The fast
    // stationary SD follows from the AR(1) one-step difference:
    // sd(velocity) = sigma * fs * sqrt(2(1 - phi)).
    let mut drift_rng = recording_rng(seed, "drift", &id, session);
    let tau_fast = 0.1;
    let phi_fast = (-1.0 / (tau_fast * fs)).exp();
    let sigma_fast = params.drift_sd / (fs * (2.0 * (1.0 - phi_fast)).sqrt());
    let sigma_slow = 5.0 * sigma_fast;
    let mut drift_h_slow = Ar1::new(&mut drift_rng, sigma_slow, 2.0, fs);
    let mut drift_h_fast = Ar1::new(&mut drift_rng, sigma_fast, tau_fast, fs);
    let mut drift_v_slow = Ar1::new(&mut drift_rng, sigma_slow, 2.0, fs);
    let mut drift_v_fast = Ar1::new(&mut drift_rng, sigma_fast, tau_fast, fs);

    // Tremor rides a slow positive envelope (bursty, common to both
    // channels): windows much shorter than the envelope time constant see a
    // single amplitude draw, so tremor-derived features lose reliability as
    // windows shrink, while full-length sequences average many draws.
    let mut tremor_rng = recording_rng(seed, "tremor", &id, session);
    let phase_h: f64 = tremor_rng.random_range(0.0..std::f64::consts::TAU);
    let phase_v: f64 = tremor_rng.random_range(0.0..std::f64::consts::TAU);
    let omega = std::f64::consts::TAU * params.tremor_hz;
    let mut tremor_env = Ar1::new(&mut tremor_rng, 1.0, 0.35, fs);

    let cfg = PreprocessConfig::default();
    let (h_lo, h_hi) = cfg.h_bounds_deg;
    let (v_lo, v_hi) = cfg.v_bounds_deg;

    let mut h = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut pos = start;
    let mut next = 0; // first saccade not yet finished
    for i in 0..n {
        let t = i as f64 / fs;
        while next < saccades.len() && t >= saccades[next].onset_s + saccades[next].duration_s {
            pos = saccades[next].to;
            next += 1;
        }
        let (mut x, mut y) = pos;
        if next < saccades.len() && t >= saccades[next].onset_s {
            let s = &saccades[next];
            let progress = min_jerk((t - s.onset_s) / s.duration_s);
            x = s.from.0 + (s.to.0 - s.from.0) * progress;
            y = s.from.1 + (s.to.1 - s.from.1) * progress;
        }
        x += drift_h_slow.step(&mut drift_rng) + drift_h_fast.step(&mut drift_rng);
        y += drift_v_slow.step(&mut drift_rng) + drift_v_fast.step(&mut drift_rng);
        let burst = (1.0 + 0.55 * tremor_env.step(&mut tremor_rng)).max(0.12);
        x += params.tremor_amp * burst * (omega * t + phase_h).sin();
        y += params.tremor_amp * burst * (omega * t + phase_v).sin();
        h.push(Some(x.clamp(h_lo, h_hi)));
        v.push(Some(y.clamp(v_lo, v_hi)));
    }
    GazeRecording::new(id, session, "TEX", fs, h, v)
}

/// Generates the full two-session corpus in memory, ordered by subject then
/// session.
pub fn generate_synthetic(spec: &SyntheticSpec, master_seed: u64) -> Result<Vec<GazeRecording>> {
    spec.validate()?;
    let seed = spec.seed.unwrap_or(master_seed);
    let mut out = Vec::with_capacity(spec.n_subjects * 2);
    for subject in 0..spec.n_subjects {
        for session in [Session::S1, Session::S2] {
            out.push(generate_recording(spec, seed, subject, session)?);
        }
    }
    Ok(out)
}

/// Writes the corpus as one CSV per recording plus a manifest describing
/// it, with full-duration enrollment (session 1) and authentication
/// (session 2) selectors. The generated duration deliberately exceeds the
/// nominal analysis window so that decimation by factors that do not divide
/// the stream evenly still yields a full complement of sequences.
pub fn write_synthetic_dataset(
    spec: &SyntheticSpec,
    master_seed: u64,
    dir: &std::path::Path,
) -> Result<DatasetManifest> {
    let recordings = generate_synthetic(spec, master_seed)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(recordings.len());
    for r in &recordings {
        let file = format!("{}_{}_{}.csv", r.subject_id, r.session, r.task);
        write_recording_csv(&dir.join(&file), r)?;
        entries.push(RecordingEntry {
            path: file,
            subject_id: r.subject_id.clone(),
            session: r.session,
            task: r.task.clone(),
            sampling_rate_hz: r.sampling_rate_hz,
        });
    }
    let manifest = DatasetManifest {
        dataset_name: format!("synthetic-{}subj", spec.n_subjects),
        recordings: entries,
        enrollment_selector: StreamSelector {
            session: Session::S1,
            task: "TEX".into(),
            duration_s: spec.duration_s,
        },
        authentication_selector: StreamSelector {
            session: Session::S2,
            task: "TEX".into(),
            duration_s: spec.duration_s,
        },
    };
    manifest.check_invariants()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_subjects: 3,
            duration_s: 3.0,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        let a = generate_synthetic(&spec, 7).unwrap();
        let b = generate_synthetic(&spec, 7).unwrap();
        assert_eq!(a.len(), 6);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.horizontal, rb.horizontal);
            assert_eq!(ra.vertical, rb.vertical);
        }
    }

    #[test]
    fn seed_changes_the_corpus() {
        let spec = small_spec();
        let a = generate_synthetic(&spec, 7).unwrap();
        let b = generate_synthetic(&spec, 8).unwrap();
        assert_ne!(a[0].horizontal, b[0].horizontal);
    }

    #[test]
    fn spec_seed_overrides_master_seed() {
        let spec = SyntheticSpec {
            seed: Some(99),
            ..small_spec()
        };
        let a = generate_synthetic(&spec, 1).unwrap();
        let b = generate_synthetic(&spec, 2).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.horizontal, rb.horizontal);
        }
    }

    #[test]
    fn zero_perturbation_shares_subject_parameters() {
        let spec = SyntheticSpec {
            session_perturbation: 0.0,
            ..small_spec()
        };
        let p1 = subject_params(&spec, 5, 0, Session::S1);
        let p2 = subject_params(&spec, 5, 0, Session::S2);
        assert_eq!(p1, p2);
        // Event realizations still differ between sessions.
        let recs = generate_synthetic(&spec, 5).unwrap();
        assert_ne!(recs[0].horizontal, recs[1].horizontal);
    }

    #[test]
    fn perturbation_moves_session_two_parameters() {
        let spec = SyntheticSpec {
            session_perturbation: 0.1,
            ..small_spec()
        };
        let p1 = subject_params(&spec, 5, 1, Session::S1);
        let p2 = subject_params(&spec, 5, 1, Session::S2);
        assert_ne!(p1, p2);
        // Perturbed values stay inside the configured ranges.
        assert!(p2.saccade_rate >= spec.saccade_rate_hz.0);
        assert!(p2.saccade_rate <= spec.saccade_rate_hz.1);
        assert!(p2.amplitude_scale >= spec.amplitude_scale.0);
        assert!(p2.amplitude_scale <= spec.amplitude_scale.1);
    }

    #[test]
    fn positions_respect_capture_bounds() {
        let spec = SyntheticSpec {
            n_subjects: 4,
            duration_s: 5.0,
            amplitude_scale: (1.6, 1.6),
            drift_sd_deg_s: (1.2, 1.2),
            ..SyntheticSpec::default()
        };
        let cfg = PreprocessConfig::default();
        for r in generate_synthetic(&spec, 3).unwrap() {
            for i in 0..r.len() {
                let x = r.horizontal[i].unwrap();
                let y = r.vertical[i].unwrap();
                assert!(x >= cfg.h_bounds_deg.0 && x <= cfg.h_bounds_deg.1);
                assert!(y >= cfg.v_bounds_deg.0 && y <= cfg.v_bounds_deg.1);
            }
        }
    }

    #[test]
    fn recordings_have_expected_shape() {
        let spec = small_spec();
        let recs = generate_synthetic(&spec, 11).unwrap();
        for r in &recs {
            assert_eq!(r.len(), 3000);
            assert_eq!(r.valid_len(), 3000);
            assert_eq!(r.task, "TEX");
        }
        assert_eq!(recs[0].subject_id, "S001");
        assert_eq!(recs[0].session, Session::S1);
        assert_eq!(recs[1].session, Session::S2);
        assert_eq!(recs[4].subject_id, "S003");
    }

    #[test]
    fn subjects_are_distinguishable_by_construction() {
        // Different subjects draw different parameter bundles.
        let spec = small_spec();
        let a = subject_params(&spec, 7, 0, Session::S1);
        let b = subject_params(&spec, 7, 1, Session::S1);
        assert_ne!(a, b);
    }

    #[test]
    fn dataset_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let manifest = write_synthetic_dataset(&spec, 7, dir.path()).unwrap();
        assert_eq!(manifest.recordings.len(), 6);
        assert!(manifest.validate(dir.path()).is_empty());
        let first = &manifest.recordings[0];
        let loaded = crate::io::load_recording(
            &dir.path().join(&first.path),
            &first.subject_id,
            first.session,
            &first.task,
            first.sampling_rate_hz,
        )
        .unwrap();
        let direct = generate_synthetic(&spec, 7).unwrap();
        // CSV round-trip through Display preserves f64 exactly.
        assert_eq!(loaded.horizontal, direct[0].horizontal);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec();
        spec.n_subjects = 2;
        assert!(spec.validate().is_err());
        spec = small_spec();
        spec.session_perturbation = 1.5;
        assert!(spec.validate().is_err());
        spec = small_spec();
        spec.saccade_rate_hz = (4.0, 1.0);
        assert!(spec.validate().is_err());
        spec = small_spec();
        spec.tremor_amp_deg = (0.0, 0.01);
        assert!(spec.validate().is_err());
    }
}
