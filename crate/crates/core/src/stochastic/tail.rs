use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::MapSequence;
use crate::transfer::{centering_means, pushforward_densities, PiecewiseFn};

use super::kantorovich::Cdf;
use super::observable::ScalarObservable;
use super::orbits::map_orbits;

/// Empirical exceedance probabilities over a threshold list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub thresholds: Vec<f64>,
    pub empirical_probs: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Fitted `c` in the stated bound form, `None` when no threshold in the
    /// fit window has a positive empirical probability.
    pub bound_exponent_fit: Option<f64>,
    /// Smallest threshold admitted by the fit.
    pub fit_from: f64,
    pub sample_count: usize,
}

impl TailReport {
    /// Tail of `values` at each threshold; `c = min −ln p̂ / (scale·t²)` over
    /// thresholds `t ≥ fit_from` with `0 < p̂`.
    pub(crate) fn from_values(values: &[f64], thresholds: &[f64], scale: f64, fit_from: f64) -> Self {
        let m = values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let empirical_probs: Vec<f64> = thresholds
            .iter()
            .map(|&t| (sorted.len() - sorted.partition_point(|&v| v <= t)) as f64 / m)
            .collect();
        let std_errors = empirical_probs.iter().map(|p| (p * (1.0 - p) / m).sqrt()).collect();
        let bound_exponent_fit = thresholds
            .iter()
            .zip(&empirical_probs)
            .filter(|(&t, &p)| t >= fit_from && t > 0.0 && p > 0.0)
            .map(|(&t, &p)| -p.ln() / (scale * t * t))
            .reduce(f64::min);
        TailReport {
            thresholds: thresholds.to_vec(),
            empirical_probs,
            std_errors,
            bound_exponent_fit,
            fit_from,
            sample_count: values.len(),
        }
    }
}

pub(crate) fn sorted_thresholds(t_list: &[f64]) -> Result<Vec<f64>> {
    if t_list.is_empty() || t_list.iter().any(|t| !t.is_finite()) {
        return Err(Error::Argument("threshold list must be nonempty and finite".into()));
    }
    let mut t = t_list.to_vec();
    t.sort_by(f64::total_cmp);
    Ok(t)
}

/// `m((1/n) Σ_k [f∘T_1^k − ∫ f∘T_1^k dm] > t)` for each `t`, with
/// `c` fitted in `exp(−c·n·t²)`.
pub fn ld_tail(
    seq: &MapSequence,
    f: &ScalarObservable,
    n: usize,
    t_list: &[f64],
    m_samples: usize,
    seed: u64,
) -> Result<TailReport> {
    let thresholds = sorted_thresholds(t_list)?;
    let means = centering_means(seq, &*f.value, n)?;
    let value = f.value.clone();
    let devs = map_orbits(seq, n, m_samples, seed, |o| {
        o.iter().zip(&means).map(|(&x, &c)| value(x) - c).sum::<f64>() / n as f64
    })?;
    Ok(TailReport::from_values(&devs, &thresholds, n as f64, 0.0))
}

/// Kantorovich tail of the empirical measure along orbits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasureReport {
    pub n: usize,
    /// `m(κ(ℰ_n, m_n) > t/√n)` per `t`; `c` fitted in `exp(−c t²)` on `t ≥ 1`.
    pub tail: TailReport,
    pub mean_kappa: f64,
    pub kappa_std_error: f64,
}

/// `F_{m_n}(t) = (1/n) Σ_{k<n} ∫_0^t P_1^k 𝟙 dm`.
pub fn averaged_pushforward_cdf(seq: &MapSequence, n: usize) -> Result<Cdf> {
    let densities = pushforward_densities(seq, n.saturating_sub(1))?;
    let mut sum = PiecewiseFn::constant(0.0);
    for rho in &densities {
        sum = sum.add(rho);
    }
    Cdf::from_density(&sum.scale(1.0 / densities.len() as f64))
}

pub fn empirical_measure_tail(
    seq: &MapSequence,
    n: usize,
    m_samples: usize,
    t_list: &[f64],
    seed: u64,
) -> Result<EmpiricalMeasureReport> {
    let thresholds = sorted_thresholds(t_list)?;
    let reference = averaged_pushforward_cdf(seq, n)?;
    let kappas = map_orbits(seq, n, m_samples, seed, |o| Cdf::empirical(o).distance(&reference))?;
    let m = kappas.len() as f64;
    let mean = kappas.iter().sum::<f64>() / m;
    let var = kappas.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / (m - 1.0).max(1.0);
    let scaled: Vec<f64> = kappas.iter().map(|k| k * (n as f64).sqrt()).collect();
    Ok(EmpiricalMeasureReport {
        n,
        tail: TailReport::from_values(&scaled, &thresholds, 1.0, 1.0),
        mean_kappa: mean,
        kappa_std_error: (var / m).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_observable_never_deviates() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let rep = ld_tail(&seq, &ScalarObservable::constant(2.0), 64, &[0.01, 0.1], 500, 1).unwrap();
        assert_eq!(rep.empirical_probs, vec![0.0, 0.0]);
        assert!(rep.bound_exponent_fit.is_none());
    }

    #[test]
    fn tail_is_nonincreasing_and_reproducible() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let f = ScalarObservable::affine(1.0, 0.0, 1 << 10).unwrap();
        let t = [0.05, 0.0, 0.01, 0.02];
        let a = ld_tail(&seq, &f, 64, &t, 4000, 3).unwrap();
        let b = ld_tail(&seq, &f, 64, &t, 4000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.empirical_probs.windows(2).all(|w| w[1] <= w[0]));
        // Symmetric mean at t = 0.
        let p0 = a.empirical_probs[0];
        assert!((p0 - 0.5).abs() < 5.0 * (0.25f64 / 4000.0).sqrt(), "{p0}");
        assert!(a.bound_exponent_fit.unwrap() > 0.0);
    }

    #[test]
    fn single_point_kappa_averages_to_a_third() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let rep = empirical_measure_tail(&seq, 1, 20_000, &[1.0], 5).unwrap();
        assert!((rep.mean_kappa - 1.0 / 3.0).abs() < 0.005, "{}", rep.mean_kappa);
        let a = empirical_measure_tail(&seq, 16, 1, &[1.0], 8).unwrap();
        let b = empirical_measure_tail(&seq, 16, 1, &[1.0], 8).unwrap();
        assert_eq!(a.mean_kappa, b.mean_kappa);
    }
}
