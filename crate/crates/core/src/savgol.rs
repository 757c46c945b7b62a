//! Savitzky-Golay first-derivative filtering.
//!
//! A symmetric window of `2m + 1` samples is fitted with a polynomial of the
//! configured order by least squares; the fitted polynomial's slope at the
//! window center estimates the derivative. For uniformly sampled data this
//! reduces to a fixed convolution whose weights depend only on window size
//! and polynomial order.
//!
//! Derivation of the weights: with the design matrix `A[t][j] = t^j` over
//! window offsets `t in [-m, m]`, the least-squares coefficient vector is
//! `beta = (A'A)^-1 A' x` and the slope is `beta_1`. Writing `M = A'A`
//! (`M[i][j] = sum_t t^(i+j)`), the convolution weight of sample `t` is
//! `c_t = sum_j w_j t^j` where `w` solves `M w = e_1`.

use crate::error::{Error, Result};
use crate::num::{count, Scalar};

/// Solves the small symmetric system `M x = rhs` by Gaussian elimination
/// with partial pivoting. `M` is consumed.
fn solve<T: Scalar>(mut m: Vec<Vec<T>>, mut rhs: Vec<T>) -> Result<Vec<T>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| {
                m[a][col]
                    .abs()
                    .partial_cmp(&m[b][col].abs())
                    .expect("finite pivot")
            })
            .expect("non-empty system");
        if m[pivot][col].abs() == T::zero() {
            return Err(Error::Degenerate("singular moment matrix".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                let sub = f * m[col][k];
                m[row][k] = m[row][k] - sub;
            }
            let sub = f * rhs[col];
            rhs[row] = rhs[row] - sub;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc = acc - m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Convolution weights of the first-derivative filter for unit sample
/// spacing, ordered by window offset `-m ..= m`.
pub fn first_derivative_coefficients<T: Scalar>(
    window: usize,
    polyorder: usize,
) -> Result<Vec<T>> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "window must be odd and >= 3, got {window}"
        )));
    }
    if polyorder < 1 || polyorder >= window {
        return Err(Error::InvalidArgument(format!(
            "polynomial order must satisfy 1 <= order < window, got {polyorder}"
        )));
    }
    let m = (window / 2) as i64;
    let p = polyorder;
    let offset = |t: i64| -> T {
        if t >= 0 {
            count::<T>(t as usize)
        } else {
            -count::<T>((-t) as usize)
        }
    };
    // Moment matrix M[i][j] = sum_t t^(i+j). Odd moments vanish by symmetry
    // but are computed uniformly for clarity.
    let mut moments = vec![vec![T::zero(); p + 1]; p + 1];
    for (i, row) in moments.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut s = T::zero();
            for t in -m..=m {
                let mut term = T::one();
                for _ in 0..(i + j) {
                    term = term * offset(t);
                }
                s += term;
            }
            *cell = s;
        }
    }
    let mut e1 = vec![T::zero(); p + 1];
    e1[1] = T::one();
    let w = solve(moments, e1)?;
    // c_t = sum_j w_j t^j
    let mut coeffs = Vec::with_capacity(window);
    for t in -m..=m {
        let mut c = T::zero();
        let mut power = T::one();
        for wj in &w {
            c += *wj * power;
            power = power * offset(t);
        }
        coeffs.push(c);
    }
    Ok(coeffs)
}

/// Mirrors an out-of-range index about the nearest edge without repeating
/// the edge sample (`x[-k] -> x[k]`, `x[n-1+k] -> x[n-1-k]`).
#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let i = if i < 0 { -i } else { i };
    let i = if i >= n { 2 * (n - 1) - i } else { i };
    i as usize
}

/// Applies the derivative filter to a channel with invalid samples.
///
/// Output `i` is the weighted window sum times `scale` (the sampling rate,
/// converting per-sample slope to per-second velocity). A window containing
/// any invalid sample, after edge mirroring, yields an invalid output.
pub fn filter_derivative<T: Scalar>(
    x: &[Option<T>],
    coeffs: &[T],
    scale: T,
) -> Result<Vec<Option<T>>> {
    let window = coeffs.len();
    let m = (window / 2) as isize;
    if x.len() < window {
        return Err(Error::TooShort(format!(
            "need at least {window} samples for the derivative window, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        let mut acc = T::zero();
        let mut ok = true;
        for (k, &c) in coeffs.iter().enumerate() {
            let idx = mirror(i + k as isize - m, n);
            match x[idx] {
                Some(v) => acc += c * v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        out.push(if ok { Some(acc * scale) } else { None });
    }
    Ok(out)
}
