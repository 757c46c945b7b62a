//! Descriptive statistics kernels, generic over the scalar type.
//!
//! Conventions used throughout the crate:
//! * variance and SD are population quantities (divisor `n`);
//! * moment ratios of a constant slice (skewness, kurtosis, autocorrelation)
//!   are defined as 0 rather than NaN;
//! * quantiles use linear interpolation between order statistics at rank
//!   `p * (n - 1)`.
//!
//! Sums are Neumaier-compensated so results do not drift with slice length.

use crate::num::{count, real, Scalar};

/// Compensated sum of an iterator of scalars.
pub fn csum<T: Scalar, I: IntoIterator<Item = T>>(xs: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    debug_assert!(!xs.is_empty());
    csum(xs.iter().copied()) / count(xs.len())
}

pub fn population_variance<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    csum(xs.iter().map(|&x| (x - m) * (x - m))) / count(xs.len())
}

pub fn population_sd<T: Scalar>(xs: &[T]) -> T {
    population_variance(xs).sqrt()
}

/// Standardized third central moment; 0 for a constant slice.
pub fn skewness<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    let var = csum(xs.iter().map(|&x| (x - m) * (x - m))) / count(xs.len());
    if var <= T::zero() {
        return T::zero();
    }
    let m3 = csum(xs.iter().map(|&x| (x - m) * (x - m) * (x - m))) / count(xs.len());
    m3 / var.powf(real(1.5))
}

/// Standardized fourth central moment minus 3; 0 for a constant slice.
pub fn excess_kurtosis<T: Scalar>(xs: &[T]) -> T {
    let m = mean(xs);
    let var = csum(xs.iter().map(|&x| (x - m) * (x - m))) / count(xs.len());
    if var <= T::zero() {
        return T::zero();
    }
    let m4 = csum(xs.iter().map(|&x| {
        let d = x - m;
        d * d * d * d
    })) / count(xs.len());
    m4 / (var * var) - real(3.0)
}

pub fn min_value<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().fold(T::infinity(), T::min)
}

pub fn max_value<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().fold(T::neg_infinity(), T::max)
}

pub fn mean_abs<T: Scalar>(xs: &[T]) -> T {
    csum(xs.iter().map(|x| x.abs())) / count(xs.len())
}

pub fn rms<T: Scalar>(xs: &[T]) -> T {
    (csum(xs.iter().map(|&x| x * x)) / count(xs.len())).sqrt()
}

/// Fraction of adjacent pairs with a strict sign change.
pub fn zero_crossing_rate<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let crossings = xs
        .windows(2)
        .filter(|w| w[0] * w[1] < T::zero())
        .count();
    count::<T>(crossings) / count(xs.len() - 1)
}

/// Normalized autocorrelation at `lag`; 0 for constant slices or when the
/// lag leaves no overlap.
pub fn autocorrelation<T: Scalar>(xs: &[T], lag: usize) -> T {
    if lag == 0 {
        return T::one();
    }
    if lag >= xs.len() {
        return T::zero();
    }
    let m = mean(xs);
    let denom = csum(xs.iter().map(|&x| (x - m) * (x - m)));
    if denom <= T::zero() {
        return T::zero();
    }
    let num = csum((0..xs.len() - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)));
    num / denom
}

/// Linear-interpolated quantile of an ascending-sorted slice, `p` in [0, 1].
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac: T = real(rank - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Quantile of an unsorted slice (sorts a copy).
pub fn quantile<T: Scalar>(xs: &[T], p: f64) -> T {
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    quantile_sorted(&sorted, p)
}

pub fn median<T: Scalar>(xs: &[T]) -> T {
    quantile(xs, 0.5)
}
