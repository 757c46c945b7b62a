//! Zero-phase IIR low-pass filtering for sample-rate reduction.
//!
//! The anti-alias filter is a digital Chebyshev type I low-pass (designed
//! from the analog prototype through the bilinear transform) applied
//! forward-backward, so the cascade has zero phase. It runs as a cascade of
//! second-order sections: a single order-8 direct form is too ill-conditioned
//! at the narrow cutoffs used for large decimation factors. Two departures
//! from the textbook filter are deliberate:
//!
//! * every section is scaled for unit DC gain (an even-order Chebyshev-I
//!   otherwise attenuates DC by the ripple floor, which would break
//!   constant-signal preservation); the passband ripple then lies in
//!   `[1, sqrt(1 + eps^2)]` instead of `[1/sqrt(1 + eps^2), 1]`;
//! * initial section states are set to the unit-step steady state scaled by
//!   the first sample (with odd edge extension), so constant inputs pass
//!   through bit-stably instead of ringing at the edges.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest single-stage decimation factor; larger factors run in stages.
pub const MAX_STAGE_FACTOR: usize = 13;

/// One second-order section in transposed direct form II. First-order
/// sections (odd overall order) carry zeros in the trailing coefficients.
#[derive(Clone, Copy, Debug)]
struct Biquad {
    b: [f64; 3],
    /// Denominator a1, a2 with the implicit leading 1 omitted.
    a: [f64; 2],
    /// Steady state for a unit-level input.
    zi: [f64; 2],
}

impl Biquad {
    /// Section for a conjugate pole pair with both zeros at z = -1, scaled
    /// to unit DC gain.
    fn conjugate_pair(pole: Complex64) -> Self {
        let a = [-2.0 * pole.re, pole.norm_sqr()];
        let g = (1.0 + a[0] + a[1]) / 4.0;
        Biquad::new([g, 2.0 * g, g], a)
    }

    /// First-order section for a real pole with one zero at z = -1.
    fn real_pole(pole: f64) -> Self {
        let a = [-pole, 0.0];
        let g = (1.0 + a[0]) / 2.0;
        Biquad::new([g, g, 0.0], a)
    }

    fn new(b: [f64; 3], a: [f64; 2]) -> Self {
        let mut s = Biquad { b, a, zi: [0.0; 2] };
        s.zi = s.steady_state();
        s
    }

    /// Steady state under a unit constant input: the algebraic solution of
    /// the 2x2 state system, polished to the fixed point of the f64
    /// recursion itself so constants pass through without residual.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        // (I - C^T) zi = b[1:] - a[1:] b0 for the transposed direct form II
        // state update.
        let m = [[1.0 + a1, -1.0], [a2, 1.0]];
        let rhs = [b1 - a1 * b0, b2 - a2 * b0];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let mut zi = [
            (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - rhs[0] * m[1][0]) / det,
        ];
        for _ in 0..4096 {
            let y = b0 + zi[0];
            zi[0] = b1 + zi[1] - a1 * y;
            zi[1] = b2 - a2 * y;
        }
        zi
    }

    /// Filters `x` in place, starting from the steady state for level `x0`.
    fn run(&self, x: &mut [f64], x0: f64) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let mut z = [self.zi[0] * x0, self.zi[1] * x0];
        for v in x.iter_mut() {
            let xi = *v;
            let y = b0 * xi + z[0];
            z[0] = b1 * xi + z[1] - a1 * y;
            z[1] = b2 * xi - a2 * y;
            *v = y;
        }
    }
}

/// A forward-backward IIR low-pass with a measured effective support.
#[derive(Clone, Debug)]
pub struct ZeroPhaseFilter {
    sections: Vec<Biquad>,
    /// Samples until the zero-phase impulse response decays below 1e-8 of
    /// its peak; one-sided.
    support_radius: usize,
}

impl ZeroPhaseFilter {
    /// Designs the low-pass. `cutoff_ratio` is the -ripple edge as a
    /// fraction of the Nyquist frequency, strictly inside (0, 1).
    pub fn cheby1_lowpass(order: usize, ripple_db: f64, cutoff_ratio: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("filter order must be >= 1".into()));
        }
        if !(ripple_db > 0.0) {
            return Err(Error::InvalidArgument("ripple must be positive".into()));
        }
        if !(cutoff_ratio > 0.0 && cutoff_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff must lie in (0, 1) of Nyquist, got {cutoff_ratio}"
            )));
        }
        let n = order;
        let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
        let mu = (1.0 / eps).asinh() / n as f64;
        // Prewarp the cutoff (bilinear sample rate fs = 2) and scale the
        // prototype poles from the Chebyshev ellipse.
        let fs = 2.0;
        let warped = 2.0 * fs * (std::f64::consts::PI * cutoff_ratio / fs).tan();
        let bilinear = |s: Complex64| -> Result<Complex64> {
            let num = Complex64::new(2.0 * fs, 0.0) + s;
            let den = Complex64::new(2.0 * fs, 0.0) - s;
            let z = num / den;
            if z.norm() >= 1.0 {
                return Err(Error::Degenerate(format!(
                    "unstable pole |z| = {} in filter design",
                    z.norm()
                )));
            }
            Ok(z)
        };
        // One section per conjugate pair (k pairs with n + 1 - k); an odd
        // order leaves the real pole at theta = pi/2 for a first-order tail.
        let mut sections = Vec::with_capacity(n / 2 + 1);
        for k in 1..=n / 2 {
            let theta = std::f64::consts::PI * (2.0 * k as f64 - 1.0) / (2.0 * n as f64);
            let proto = Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos());
            sections.push(Biquad::conjugate_pair(bilinear(proto * warped)?));
        }
        if n % 2 == 1 {
            let z = bilinear(Complex64::new(-mu.sinh() * warped, 0.0))?;
            sections.push(Biquad::real_pole(z.re));
        }
        let mut filter = ZeroPhaseFilter {
            sections,
            support_radius: 0,
        };
        filter.support_radius = filter.measure_support();
        Ok(filter)
    }

    /// One-sided support of the zero-phase impulse response at a 1e-8
    /// relative threshold, measured by actually filtering an impulse.
    fn measure_support(&self) -> usize {
        let mut half = 1 << 10;
        loop {
            let len = 2 * half + 1;
            let mut x = vec![0.0; len];
            x[half] = 1.0;
            let h = self.apply(&x);
            let peak = h.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let threshold = peak * 1e-8;
            let radius = (0..=half)
                .rev()
                .find(|&r| h[half - r].abs() > threshold || h[half + r].abs() > threshold)
                .unwrap_or(0);
            // Grow the buffer until the response clearly decays inside it.
            if radius < half / 2 || half >= (1 << 21) {
                return radius.max(1);
            }
            half *= 2;
        }
    }

    pub fn support_radius(&self) -> usize {
        self.support_radius
    }

    /// One filtering pass through every section.
    fn one_pass(&self, x: &mut [f64]) {
        for s in &self.sections {
            let x0 = x[0];
            s.run(x, x0);
        }
    }

    /// Forward-backward application with odd edge extension.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(x.len() - 1);
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        self.one_pass(&mut ext);
        ext.reverse();
        self.one_pass(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    /// Single-pass amplitude response at `freq_ratio` of Nyquist (for the
    /// two-pass cascade, square this).
    pub fn frequency_gain(&self, freq_ratio: f64) -> f64 {
        let w = std::f64::consts::PI * freq_ratio;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = Complex64::from_polar(1.0, -2.0 * w);
        self.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + s.b[1] * z1 + s.b[2] * z2;
                let den = Complex64::new(1.0, 0.0) + s.a[0] * z1 + s.a[1] * z2;
                (num / den).norm()
            })
            .product()
    }
}

/// Splits a decimation factor into stage factors, each at most
/// [`MAX_STAGE_FACTOR`], as equal as possible, largest first. `q = 1` needs
/// no stages. Factors with a prime divisor above the stage limit cannot be
/// realized.
pub fn decimation_stages(q: usize) -> Result<Vec<usize>> {
    if q == 0 {
        return Err(Error::InvalidArgument("decimation factor 0".into()));
    }
    if q == 1 {
        return Ok(Vec::new());
    }
    if q <= MAX_STAGE_FACTOR {
        return Ok(vec![q]);
    }

    // Smallest stage count that could possibly cover q.
    let mut k: u32 = 2;
    while k <= 8 && MAX_STAGE_FACTOR.pow(k) < q {
        k += 1;
    }

    fn best_split(q: usize, stages: u32) -> Option<Vec<usize>> {
        if stages == 1 {
            return (q <= MAX_STAGE_FACTOR).then(|| vec![q]);
        }
        let mut best: Option<Vec<usize>> = None;
        for d in 2..=MAX_STAGE_FACTOR.min(q) {
            if q % d != 0 {
                continue;
            }
            if let Some(mut rest) = best_split(q / d, stages - 1) {
                rest.push(d);
                rest.sort_unstable_by(|a, b| b.cmp(a));
                // Most even split: lexicographically smallest descending
                // factor list (minimizes the largest stage, then the next).
                if best.as_ref().is_none_or(|b| rest < *b) {
                    best = Some(rest);
                }
            }
        }
        best
    }

    for stages in k..=8 {
        if let Some(split) = best_split(q, stages) {
            return Ok(split);
        }
    }
    Err(Error::InvalidArgument(format!(
        "decimation factor {q} has a prime divisor above {MAX_STAGE_FACTOR} and cannot be staged"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn design(q: usize) -> ZeroPhaseFilter {
        ZeroPhaseFilter::cheby1_lowpass(8, 0.05, 0.8 / q as f64).unwrap()
    }

    #[test]
    fn dc_gain_is_exactly_one() {
        for q in [2usize, 4, 10, 13] {
            let f = design(q);
            assert_abs_diff_eq!(f.frequency_gain(0.0), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn passband_ripple_within_chebyshev_bounds() {
        // eps for 0.05 dB ripple; normalized passband lies in
        // [1, sqrt(1+eps^2)].
        let eps2 = 10f64.powf(0.005) - 1.0;
        let top = (1.0 + eps2).sqrt();
        for q in [2usize, 5, 10] {
            let f = design(q);
            let wc = 0.8 / q as f64;
            for i in 1..40 {
                let gain = f.frequency_gain(wc * i as f64 / 40.0);
                assert!(
                    gain >= 0.999 && gain <= top + 1e-9,
                    "q={q} gain {gain} at {i}/40 of cutoff"
                );
            }
        }
    }

    #[test]
    fn odd_order_design_is_stable_and_unit_gain() {
        let f = ZeroPhaseFilter::cheby1_lowpass(5, 0.05, 0.1).unwrap();
        assert_abs_diff_eq!(f.frequency_gain(0.0), 1.0, epsilon = 1e-9);
        assert!(f.frequency_gain(0.5) < 0.01);
        let x = vec![-1.5; 2000];
        for v in f.apply(&x) {
            assert_abs_diff_eq!(v, -1.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn stopband_attenuation_is_deep() {
        for q in [2usize, 5, 10] {
            let f = design(q);
            let wc = 0.8 / q as f64;
            // 1.5 x cutoff = 0.6 of the new Nyquist after downsampling.
            let gain = f.frequency_gain(1.5 * wc);
            assert!(gain < 0.01, "q={q} stopband gain {gain}");
        }
    }

    #[test]
    fn constant_passes_through_unchanged() {
        let f = design(10);
        let x = vec![3.25; 4000];
        let y = f.apply(&x);
        assert_eq!(y.len(), x.len());
        for v in y {
            assert_abs_diff_eq!(v, 3.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_phase_preserves_slow_sine_alignment() {
        // 1 Hz sine at 1000 Hz, q = 4 design: well inside the passband; the
        // output should match the input with no phase shift.
        let f = design(4);
        let n = 4000;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 1.0 * i as f64 / 1000.0).sin())
            .collect();
        let y = f.apply(&x);
        for i in 500..n - 500 {
            assert_abs_diff_eq!(y[i], x[i], epsilon = 0.02);
        }
    }

    #[test]
    fn support_radius_is_finite_and_meaningful() {
        let f = design(10);
        let r = f.support_radius();
        assert!(r > 8, "support {r} suspiciously small for a slow filter");
        assert!(r < 1 << 16, "support {r} did not decay");
    }

    #[test]
    fn stage_factorization() {
        assert_eq!(decimation_stages(1).unwrap(), Vec::<usize>::new());
        assert_eq!(decimation_stages(7).unwrap(), vec![7]);
        assert_eq!(decimation_stages(13).unwrap(), vec![13]);
        assert_eq!(decimation_stages(100).unwrap(), vec![10, 10]);
        assert_eq!(decimation_stages(40).unwrap(), vec![8, 5]);
        assert_eq!(decimation_stages(20).unwrap(), vec![5, 4]);
        assert_eq!(decimation_stages(1000).unwrap(), vec![10, 10, 10]);
        assert!(decimation_stages(0).is_err());
        assert!(decimation_stages(17).is_err()); // prime above the limit
        assert!(decimation_stages(34).is_err()); // 2 * 17
    }
}
