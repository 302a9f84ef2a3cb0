use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::MapSequence;

use super::observable::Observable;
use super::orbits::map_orbits;
use super::tail::sorted_thresholds;

/// Effective sample size below which an MGF estimate is flagged unstable.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfRow {
    pub lambda: f64,
    /// `mean exp(λ(K − EK))`.
    pub mgf: f64,
    pub std_error: f64,
    /// `(Σw)²/Σw²` for the weights `w = exp(λ(K − EK))`.
    pub effective_samples: f64,
    /// `ln(mgf) / (λ² Σ Lip_j²)`.
    pub c_estimate: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfReport {
    pub n: usize,
    pub sample_count: usize,
    pub sum_lip_sq: f64,
    pub mean_k: f64,
    pub rows: Vec<MgfRow>,
    /// Largest `c_estimate` over stable `λ`.
    pub c_hat: Option<f64>,
    pub largest_stable_lambda: Option<f64>,
    /// Thresholds `t` for `(K − EK)/√(Σ Lip_j²) > t`.
    pub tail_thresholds: Vec<f64>,
    pub tail_probs: Vec<f64>,
    /// `exp(−t²/(4 C_hat))`, the deviation bound implied by `C_hat`.
    pub tail_bounds: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Monte-Carlo exponential moments of `K` over orbits of length `K.arity()`.
///
/// `EK` is the sample mean. `C_hat = max_λ ln E exp(λ(K − EK)) / (λ² Σ Lip_j²)`
/// over the `λ` whose effective sample size is at least
/// [`MIN_EFFECTIVE_SAMPLES`].
pub fn concentration_mgf(
    seq: &MapSequence,
    k: &Observable,
    lambda_list: &[f64],
    tail_thresholds: &[f64],
    m_samples: usize,
    seed: u64,
) -> Result<MgfReport> {
    if lambda_list.is_empty() || lambda_list.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::Argument("λ list must hold positive finite values".into()));
    }
    let thresholds = if tail_thresholds.is_empty() {
        Vec::new()
    } else {
        sorted_thresholds(tail_thresholds)?
    };
    let n = k.arity();
    let values = map_orbits(seq, n, m_samples, seed, |o| k.eval(o))?;
    let m = values.len() as f64;
    let mean_k = values.iter().sum::<f64>() / m;
    let centered: Vec<f64> = values.iter().map(|v| v - mean_k).collect();
    let sum_lip_sq = k.sum_lip_sq();
    if sum_lip_sq == 0.0 && centered.iter().any(|c| c.abs() > 1e-12) {
        return Err(Error::Argument(
            "observable declares zero Lipschitz constants but varies".into(),
        ));
    }

    let mut rows = Vec::with_capacity(lambda_list.len());
    let mut warnings = Vec::new();
    for &lambda in lambda_list {
        // Shift exponents by their maximum so large λ cannot overflow.
        let top = centered.iter().fold(f64::NEG_INFINITY, |a, &c| a.max(lambda * c));
        let w: Vec<f64> = centered.iter().map(|&c| (lambda * c - top).exp()).collect();
        let s1: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|x| x * x).sum();
        let mean_w = s1 / m;
        let var_w = (s2 / m - mean_w * mean_w).max(0.0) * m / (m - 1.0).max(1.0);
        let log_mgf = mean_w.ln() + top;
        let mgf = log_mgf.exp();
        let effective_samples = s1 * s1 / s2;
        let stable = effective_samples >= MIN_EFFECTIVE_SAMPLES;
        if !stable {
            warnings.push(format!(
                "unstable MGF estimate at λ = {lambda}: effective sample size {effective_samples:.1}"
            ));
        }
        let c_estimate = if sum_lip_sq > 0.0 {
            log_mgf / (lambda * lambda * sum_lip_sq)
        } else {
            0.0
        };
        rows.push(MgfRow {
            lambda,
            mgf,
            std_error: (var_w / m).sqrt() * top.exp(),
            effective_samples,
            c_estimate,
            stable,
        });
    }
    let c_hat = rows
        .iter()
        .filter(|r| r.stable)
        .map(|r| r.c_estimate)
        .reduce(f64::max)
        .map(|c| c.max(0.0));
    let largest_stable_lambda = rows.iter().filter(|r| r.stable).map(|r| r.lambda).reduce(f64::max);
    if c_hat.is_none() {
        warnings.push("no λ has a stable MGF estimate".into());
    }

    let scale = sum_lip_sq.sqrt();
    let tail_probs = thresholds
        .iter()
        .map(|&t| {
            if scale == 0.0 {
                0.0
            } else {
                centered.iter().filter(|&&c| c / scale > t).count() as f64 / m
            }
        })
        .collect();
    let tail_bounds = thresholds
        .iter()
        .map(|&t| match c_hat {
            Some(c) if c > 0.0 => (-t * t / (4.0 * c)).exp(),
            Some(_) => 0.0,
            None => f64::NAN,
        })
        .collect();
    Ok(MgfReport {
        n,
        sample_count: values.len(),
        sum_lip_sq,
        mean_k,
        rows,
        c_hat,
        largest_stable_lambda,
        tail_thresholds: thresholds,
        tail_probs,
        tail_bounds,
        warnings,
    })
}
