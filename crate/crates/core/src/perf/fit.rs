use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::poly::{monomial_count, monomials, PolyModel, MAX_DEGREE};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest mark the design
/// matrix as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

/// Relative residual floor. Exact fits otherwise have an RSS of rounding
/// noise whose logarithm would decide the selection.
const RSS_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeScore {
    pub degree: usize,
    pub coefficients: usize,
    pub rss: f64,
    /// `None` when the design matrix at this degree is rank deficient.
    pub aic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: PolyModel,
    pub rss: f64,
    pub scores: Vec<DegreeScore>,
}

/// Least-squares fit at every degree `1..=max_degree`, selecting the degree
/// with the smallest AIC. Each sample is `(inputs, value)`; all samples must
/// have the same number of inputs (1 or 2).
pub fn fit_poly(samples: &[(Vec<f64>, f64)], max_degree: usize) -> Result<FitReport> {
    let n = samples.len();
    let arity = samples.first().map(|s| s.0.len()).unwrap_or(1);
    if !(1..=2).contains(&arity) || samples.iter().any(|s| s.0.len() != arity) {
        return Err(Error::SingularFit("samples must all have 1 or 2 inputs".into()));
    }
    if !(1..=MAX_DEGREE).contains(&max_degree) {
        return Err(Error::SingularFit(format!("max degree must be in 1..={MAX_DEGREE}")));
    }
    if n <= monomial_count(arity, max_degree) {
        return Err(Error::SingularFit(format!(
            "{n} samples for {} coefficients at degree {max_degree}",
            monomial_count(arity, max_degree)
        )));
    }
    if samples.iter().any(|s| !s.1.is_finite() || s.0.iter().any(|x| !x.is_finite())) {
        return Err(Error::SingularFit("non-finite sample".into()));
    }

    let (offset, scale) = normalization(samples, arity);
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let rms = (y.norm_squared() / n as f64).sqrt();
    let floor = n as f64 * (RSS_FLOOR * rms).powi(2);

    let mut scores = Vec::new();
    let mut best: Option<(f64, PolyModel, f64)> = None;
    for degree in 1..=max_degree {
        let k = monomial_count(arity, degree);
        let fit = solve(samples, arity, degree, &offset, &scale, &y);
        let Some((coef, rss)) = fit else {
            if degree == 1 {
                return Err(Error::SingularFit("design matrix is rank deficient at degree 1".into()));
            }
            scores.push(DegreeScore { degree, coefficients: k, rss: f64::NAN, aic: None });
            continue;
        };
        let aic = n as f64 * (rss.max(floor) / n as f64).ln() + 2.0 * k as f64;
        scores.push(DegreeScore { degree, coefficients: k, rss, aic: Some(aic) });
        if best.as_ref().is_none_or(|b| aic < b.0) {
            let model = PolyModel { arity, degree, coefficients: coef, offset: offset.clone(), scale: scale.clone() };
            best = Some((aic, model, rss));
        }
    }
    let (_, model, rss) = best.expect("degree 1 always produces a candidate");
    Ok(FitReport { model, rss, scores })
}

/// Least-squares fit at exactly `degree`.
pub fn fit_degree(samples: &[(Vec<f64>, f64)], degree: usize) -> Result<(PolyModel, f64)> {
    let arity = samples.first().map(|s| s.0.len()).unwrap_or(1);
    if samples.len() < monomial_count(arity, degree) {
        return Err(Error::SingularFit("fewer samples than coefficients".into()));
    }
    let (offset, scale) = normalization(samples, arity);
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let (coef, rss) = solve(samples, arity, degree, &offset, &scale, &y)
        .ok_or_else(|| Error::SingularFit(format!("rank deficient at degree {degree}")))?;
    Ok((PolyModel { arity, degree, coefficients: coef, offset, scale }, rss))
}

fn normalization(samples: &[(Vec<f64>, f64)], arity: usize) -> (Vec<f64>, Vec<f64>) {
    (0..arity)
        .map(|a| {
            let lo = samples.iter().map(|s| s.0[a]).fold(f64::INFINITY, f64::min);
            let hi = samples.iter().map(|s| s.0[a]).fold(f64::NEG_INFINITY, f64::max);
            let half = (hi - lo) / 2.0;
            ((hi + lo) / 2.0, if half > 0.0 { half } else { 1.0 })
        })
        .unzip()
}

fn solve(
    samples: &[(Vec<f64>, f64)],
    arity: usize,
    degree: usize,
    offset: &[f64],
    scale: &[f64],
    y: &DVector<f64>,
) -> Option<(Vec<f64>, f64)> {
    let terms = monomials(arity, degree);
    let n = samples.len();
    let a = DMatrix::from_fn(n, terms.len(), |r, c| {
        let (i, j) = terms[c];
        let u = (samples[r].0[0] - offset[0]) / scale[0];
        let v = if arity == 2 { (samples[r].0[1] - offset[1]) / scale[1] } else { 0.0 };
        u.powi(i as i32) * v.powi(j as i32)
    });
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax.is_nan() || smax <= 0.0 || smin < RANK_TOLERANCE * smax {
        return None;
    }
    let coef = svd.solve(y, 0.0).ok()?;
    let rss = (a * &coef - y).norm_squared();
    Some((coef.iter().copied().collect(), rss))
}
