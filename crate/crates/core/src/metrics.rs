//! Verification metrics: equal error rate over cosine score sets, Kendall's
//! W concordance across sessions (temporal persistence), and Spearman
//! intercorrelation between embedding dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EmbeddingMatrix;
use crate::num::{count, real, Scalar};

/// Genuine (same-subject) and impostor (cross-subject) similarity scores.
#[derive(Clone, Debug, Default)]
pub struct ScoreSets<T = f64> {
    pub genuine: Vec<T>,
    pub impostor: Vec<T>,
}

pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na.is_zero() || nb.is_zero() {
        return Err(Error::Degenerate(
            "cosine similarity of a zero vector is undefined".into(),
        ));
    }
    let sim = dot / (na.sqrt() * nb.sqrt());
    // Rounding can push |sim| infinitesimally past 1.
    Ok(sim.min(T::one()).max(-T::one()))
}

/// Scores every enrollment centroid against every authentication centroid:
/// same-subject pairs are genuine, ordered cross-subject pairs impostor.
/// Genuine scores follow subject order; impostor scores follow the
/// lexicographic (enroll subject, auth subject) order.
pub fn build_score_sets(enroll: &EmbeddingMatrix, auth: &EmbeddingMatrix) -> Result<ScoreSets> {
    if enroll.dimension() != auth.dimension() {
        return Err(Error::InvalidArgument(format!(
            "embedding dimensions differ: {} vs {}",
            enroll.dimension(),
            auth.dimension()
        )));
    }
    let e = enroll.by_subject()?;
    let a = auth.by_subject()?;
    if e.keys().ne(a.keys()) {
        let only_e: Vec<&str> = e.keys().filter(|s| !a.contains_key(*s)).copied().collect();
        let only_a: Vec<&str> = a.keys().filter(|s| !e.contains_key(*s)).copied().collect();
        return Err(Error::SubjectMismatch(format!(
            "enrollment-only {only_e:?}, authentication-only {only_a:?}"
        )));
    }
    let mut scores = ScoreSets::default();
    for (s, ev) in &e {
        for (t, av) in &a {
            let sim = cosine_similarity(ev, av)?;
            if s == t {
                scores.genuine.push(sim);
            } else {
                scores.impostor.push(sim);
            }
        }
    }
    Ok(scores)
}

/// Equal error rate of the score sets.
///
/// FAR(t) counts impostor scores at or above t, FRR(t) genuine scores below
/// t. Thresholds sweep the sorted score union; the first exact FAR = FRR hit
/// is returned directly, otherwise the crossing is resolved by linear
/// interpolation between the bracketing (FAR, FRR) pairs.
pub fn eer<T: Scalar>(s: &ScoreSets<T>) -> Result<T> {
    if s.genuine.is_empty() || s.impostor.is_empty() {
        return Err(Error::InvalidArgument(
            "EER needs both genuine and impostor scores".into(),
        ));
    }
    let mut genuine = s.genuine.clone();
    let mut impostor = s.impostor.clone();
    let by_value = |a: &T, b: &T| a.partial_cmp(b).expect("scores must be finite");
    genuine.sort_by(by_value);
    impostor.sort_by(by_value);

    let mut thresholds: Vec<T> = genuine.iter().chain(&impostor).copied().collect();
    thresholds.sort_by(by_value);
    thresholds.dedup();

    let n_gen: T = count(genuine.len());
    let n_imp: T = count(impostor.len());
    let mut prev: Option<(T, T)> = None;
    // The virtual threshold above every score has FAR = 0, FRR = 1, so the
    // FAR - FRR walk always crosses zero.
    let points = thresholds
        .iter()
        .map(|&t| {
            let below_imp = impostor.partition_point(|&v| v < t);
            let far = count::<T>(impostor.len() - below_imp) / n_imp;
            let frr = count::<T>(genuine.partition_point(|&v| v < t)) / n_gen;
            (far, frr)
        })
        .chain(std::iter::once((T::zero(), T::one())));
    for (far, frr) in points {
        if far == frr {
            return Ok(far);
        }
        if far < frr {
            let (pf, pr) = prev.expect("FAR - FRR starts positive");
            let t = (pf - pr) / ((frr - pr) - (far - pf));
            return Ok(pf + t * (far - pf));
        }
        prev = Some((far, frr));
    }
    unreachable!("virtual endpoint has FAR < FRR");
}

/// Average ranks (1-based); tied values share the mean of their positions.
/// Values must be finite.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share rank mean(start+1 ..= end).
        let shared = (count::<T>(start + 1) + count::<T>(end)) / real(2.0);
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    let n: T = count(x.len());
    let mx = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
    }
    if sxx.is_zero() || syy.is_zero() {
        return Err(Error::Degenerate(
            "correlation with a constant sequence is undefined".into(),
        ));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.min(T::one()).max(-T::one()))
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(
            "Spearman needs two equally long sequences of length >= 2".into(),
        ));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall's coefficient of concordance across `k >= 2` rankings of the
/// same `n >= 2` items, with the standard tie correction.
pub fn kendalls_w<T: Scalar>(rankings: &[&[T]]) -> Result<T> {
    let k = rankings.len();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 rankings".into()));
    }
    let n = rankings[0].len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 items".into()));
    }
    if rankings.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(
            "rankings must cover the same items".into(),
        ));
    }

    let mut rank_sums = vec![T::zero(); n];
    let mut tie_term = T::zero();
    for ranking in rankings {
        let ranks = average_ranks(ranking);
        for (sum, r) in rank_sums.iter_mut().zip(&ranks) {
            *sum += *r;
        }
        // Tie correction: sum of t^3 - t over tie groups.
        let mut sorted: Vec<T> = ranking.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && sorted[end] == sorted[start] {
                end += 1;
            }
            let t: T = count(end - start);
            tie_term += t * t * t - t;
            start = end;
        }
    }

    let kf: T = count(k);
    let nf: T = count(n);
    let grand_mean = kf * (nf + T::one()) / real(2.0);
    let s = rank_sums
        .iter()
        .fold(T::zero(), |acc, &r| acc + (r - grand_mean) * (r - grand_mean));
    let denom = kf * kf * (nf * nf * nf - nf) - kf * tie_term;
    if denom <= T::zero() {
        return Err(Error::Degenerate(
            "every ranking is fully tied; concordance undefined".into(),
        ));
    }
    let w = real::<T>(12.0) * s / denom;
    Ok(w.min(T::one()).max(T::zero()))
}

/// How the per-dimension concordance values aggregate into one KCC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KccAggregation {
    #[default]
    Mean,
    Median,
}

/// Per-dimension concordance of embedding values across sessions.
#[derive(Clone, Debug)]
pub struct PersistenceResult {
    /// Kendall's W per dimension; `None` where both sessions were constant
    /// across subjects.
    pub per_dimension_w: Vec<Option<f64>>,
    /// Aggregate over the defined dimensions (mean unless configured
    /// otherwise).
    pub mean_w: f64,
    /// Dimensions skipped as degenerate in both sessions.
    pub skipped: usize,
}

/// Temporal persistence: for every embedding dimension, Kendall's W of the
/// two sessions' value-rankings over subjects, aggregated across dimensions.
pub fn temporal_persistence(
    enroll: &EmbeddingMatrix,
    auth: &EmbeddingMatrix,
    aggregation: KccAggregation,
) -> Result<PersistenceResult> {
    if enroll.dimension() != auth.dimension() {
        return Err(Error::InvalidArgument(format!(
            "embedding dimensions differ: {} vs {}",
            enroll.dimension(),
            auth.dimension()
        )));
    }
    let e = enroll.by_subject()?;
    let a = auth.by_subject()?;
    if e.keys().ne(a.keys()) {
        return Err(Error::SubjectMismatch(format!(
            "enrollment {:?} vs authentication {:?}",
            e.keys().collect::<Vec<_>>(),
            a.keys().collect::<Vec<_>>()
        )));
    }
    if e.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "temporal persistence needs at least 3 subjects, got {}",
            e.len()
        )));
    }

    let session1: Vec<&[f64]> = e.values().copied().collect();
    let session2: Vec<&[f64]> = a.values().copied().collect();
    let mut per_dimension_w = Vec::with_capacity(enroll.dimension());
    let mut skipped = 0;
    for d in 0..enroll.dimension() {
        let s1: Vec<f64> = session1.iter().map(|row| row[d]).collect();
        let s2: Vec<f64> = session2.iter().map(|row| row[d]).collect();
        match kendalls_w(&[&s1, &s2]) {
            Ok(w) => per_dimension_w.push(Some(w)),
            Err(Error::Degenerate(_)) => {
                per_dimension_w.push(None);
                skipped += 1;
            }
            Err(other) => return Err(other),
        }
    }

    let mut defined: Vec<f64> = per_dimension_w.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Degenerate(
            "every dimension is constant in both sessions".into(),
        ));
    }
    let mean_w = match aggregation {
        KccAggregation::Mean => crate::stats::mean(&defined),
        KccAggregation::Median => {
            defined.sort_by(f64::total_cmp);
            crate::stats::quantile_sorted(&defined, 0.5)
        }
    };
    Ok(PersistenceResult {
        per_dimension_w,
        mean_w,
        skipped,
    })
}

/// Mean and spread of |Spearman| over all unordered dimension pairs.
#[derive(Clone, Copy, Debug)]
pub struct IntercorrResult {
    pub mean_abs: f64,
    pub sd_abs: f64,
    pub n_pairs: usize,
    /// Dimensions constant across observations, excluded from every pair.
    pub skipped_dimensions: usize,
}

/// Absolute Spearman correlation between every pair of dimensions across
/// the observation rows (each row one observation, e.g. one subject's
/// centroid). Each dimension is ranked once; constant dimensions are
/// skipped.
pub fn intercorrelation_rows(rows: &[&[f64]], dimension: usize) -> Result<IntercorrResult> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "intercorrelation needs at least 3 observations, got {}",
            rows.len()
        )));
    }
    if rows.iter().any(|r| r.len() != dimension) {
        return Err(Error::InvalidArgument(
            "observation rows must match the declared dimension".into(),
        ));
    }
    let mut ranked: Vec<Option<Vec<f64>>> = Vec::with_capacity(dimension);
    let mut skipped_dimensions = 0;
    for d in 0..dimension {
        let values: Vec<f64> = rows.iter().map(|row| row[d]).collect();
        let constant = values.iter().all(|&v| v == values[0]);
        if constant {
            ranked.push(None);
            skipped_dimensions += 1;
        } else {
            ranked.push(Some(average_ranks(&values)));
        }
    }

    let mut abs_rho = Vec::new();
    for i in 0..dimension {
        let Some(ri) = &ranked[i] else { continue };
        for rj in ranked[i + 1..].iter().flatten() {
            abs_rho.push(pearson(ri, rj)?.abs());
        }
    }
    if abs_rho.is_empty() {
        return Err(Error::Degenerate(
            "no dimension pair admits a correlation".into(),
        ));
    }
    Ok(IntercorrResult {
        mean_abs: crate::stats::mean(&abs_rho),
        sd_abs: crate::stats::population_sd(&abs_rho),
        n_pairs: abs_rho.len(),
        skipped_dimensions,
    })
}

/// Intercorrelation over one row per subject (centroid embeddings).
pub fn intercorrelation(m: &EmbeddingMatrix) -> Result<IntercorrResult> {
    let rows: Vec<&[f64]> = m.by_subject()?.into_values().collect();
    intercorrelation_rows(&rows, m.dimension())
}
