//! Ordinary least squares in two flavors: `y = a·x + b` and
//! `y = a·ln(x) + b`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{count, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Linear,
    Log,
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitModel::Linear => "linear",
            FitModel::Log => "log",
        })
    }
}

impl FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(FitModel::Linear),
            "log" => Ok(FitModel::Log),
            other => Err(Error::InvalidArgument(format!(
                "unknown fit model {other:?}; expected \"linear\" or \"log\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult<T = f64> {
    pub model: FitModel,
    /// Slope (of x for Linear, of ln x for Log).
    pub a: T,
    pub b: T,
    pub r2: T,
    pub n_points: usize,
}

impl<T: Scalar> FitResult<T> {
    pub fn predict(&self, x: T) -> Result<T> {
        match self.model {
            FitModel::Linear => Ok(self.a * x + self.b),
            FitModel::Log => {
                if x <= T::zero() {
                    return Err(Error::Domain(format!(
                        "log model is undefined at x = {x}"
                    )));
                }
                Ok(self.a * x.ln() + self.b)
            }
        }
    }
}

fn check_points<T: Scalar>(points: &[(T, T)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "fitting needs at least 2 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(Error::InvalidArgument(
            "fit points must be finite".into(),
        ));
    }
    Ok(())
}

/// Least-squares line through the points.
pub fn fit_linear<T: Scalar>(points: &[(T, T)]) -> Result<FitResult<T>> {
    check_points(points)?;
    let n: T = count(points.len());
    let mean_x = points.iter().fold(T::zero(), |s, &(x, _)| s + x) / n;
    let mean_y = points.iter().fold(T::zero(), |s, &(_, y)| s + y) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx.is_zero() {
        return Err(Error::Degenerate(
            "all x values are equal; the slope is undefined".into(),
        ));
    }
    let a = sxy / sxx;
    let b = mean_y - a * mean_x;
    let r2 = r_squared(points, FitModel::Linear, a, b)?;
    Ok(FitResult {
        model: FitModel::Linear,
        a,
        b,
        r2,
        n_points: points.len(),
    })
}

/// Least squares of `y = a·ln(x) + b` (natural log); every x must be
/// positive.
pub fn fit_log<T: Scalar>(points: &[(T, T)]) -> Result<FitResult<T>> {
    check_points(points)?;
    if let Some(&(x, _)) = points.iter().find(|&&(x, _)| x <= T::zero()) {
        return Err(Error::Domain(format!(
            "log fit requires positive x values, got {x}"
        )));
    }
    let transformed: Vec<(T, T)> = points.iter().map(|&(x, y)| (x.ln(), y)).collect();
    let linear = fit_linear(&transformed)?;
    Ok(FitResult {
        model: FitModel::Log,
        ..linear
    })
}

/// Coefficient of determination of the given model against the points.
/// A constant target is a perfect fit only if the residuals vanish too.
pub fn r_squared<T: Scalar>(points: &[(T, T)], model: FitModel, a: T, b: T) -> Result<T> {
    check_points(points)?;
    let fit = FitResult {
        model,
        a,
        b,
        r2: T::zero(),
        n_points: points.len(),
    };
    let n: T = count(points.len());
    let mean_y = points.iter().fold(T::zero(), |s, &(_, y)| s + y) / n;
    let mut ssr = T::zero();
    let mut sst = T::zero();
    for &(x, y) in points {
        let r = y - fit.predict(x)?;
        ssr += r * r;
        sst += (y - mean_y) * (y - mean_y);
    }
    if sst.is_zero() {
        return if ssr.is_zero() {
            Ok(T::one())
        } else {
            Err(Error::Degenerate(
                "constant target with nonzero residuals; R^2 undefined".into(),
            ))
        };
    }
    Ok(T::one() - ssr / sst)
}
