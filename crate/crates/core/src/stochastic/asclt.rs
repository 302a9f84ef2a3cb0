use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MapSequence;
use crate::numeric::normal_cdf;
use crate::transfer::{centering_means, ergodic_sum_variances};

use super::observable::ScalarObservable;
use super::orbits::{fold_orbits, orbit_from};

/// Below this many steps the report is flagged as low-n.
pub const LOW_N: usize = 10;

/// Variance growth `Var S_k ≥ c·k` counts as met when the fitted `c` is
/// above this.
pub const GROWTH_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRoute {
    Operator,
    Montecarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AscltReport {
    pub n: usize,
    /// `H_n = Σ_{k≤n} 1/k`.
    pub harmonic: f64,
    /// Quantile points `Φ⁻¹(p)` at which the CDFs are tabulated.
    pub grid: Vec<f64>,
    /// Log-averaged empirical CDF of `S_k/‖S_k‖₂` on `grid`.
    pub empirical_cdf: Vec<f64>,
    pub normal_cdf: Vec<f64>,
    /// `sup_t |F_n(t) − Φ(t)|` over all `t`.
    pub ks_distance: f64,
    /// `min_{k ≥ k₀} Var S_k / k`.
    pub variance_growth: f64,
    pub hypothesis_failure: bool,
    pub low_n: bool,
    pub route: SigmaRoute,
}

/// Standard normal quantile by bisection on `Φ`.
fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Samples used by the Monte-Carlo route for `‖S_k‖₂`.
pub const MONTECARLO_SIGMA_SAMPLES: usize = 2000;

/// Log-averaged distribution of `S_k(x)/‖S_k‖₂` along the orbit of `x`.
///
/// `seed` fixes the bits of the initial point below f64 resolution.
pub fn asclt_report(
    seq: &MapSequence,
    f: &ScalarObservable,
    n: usize,
    x: f64,
    route: SigmaRoute,
    seed: u64,
) -> Result<AscltReport> {
    if n == 0 {
        return Err(Error::Argument("ASCLT needs n ≥ 1".into()));
    }
    let means = centering_means(seq, &*f.value, n)?;
    let variances: Vec<f64> = match route {
        SigmaRoute::Operator => ergodic_sum_variances(seq, &f.proxy, n)?,
        SigmaRoute::Montecarlo => {
            let value = f.value.clone();
            let blocks = fold_orbits(
                seq,
                n,
                MONTECARLO_SIGMA_SAMPLES,
                seed ^ 0x0051_674A,
                || (vec![0.0; n], vec![0.0; n]),
                |(s1, s2), o| {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += value(o[k]) - means[k];
                        s1[k] += s;
                        s2[k] += s * s;
                    }
                },
            )?;
            let m = MONTECARLO_SIGMA_SAMPLES as f64;
            let mut v = vec![0.0; n + 1];
            for k in 0..n {
                let s1: f64 = blocks.iter().map(|b| b.0[k]).sum();
                let s2: f64 = blocks.iter().map(|b| b.1[k]).sum();
                v[k + 1] = (s2 - s1 * s1 / m) / (m - 1.0);
            }
            v
        }
    };
    let k0 = n.min(LOW_N);
    let variance_growth = (k0..=n)
        .map(|k| variances[k] / k as f64)
        .fold(f64::INFINITY, f64::min);
    let hypothesis_failure = !(variance_growth > GROWTH_FLOOR);

    let orbit = orbit_from(seq, x, n, seed)?;
    let mut atoms = Vec::with_capacity(n);
    let mut s = 0.0;
    for k in 1..=n {
        s += (f.value)(orbit[k - 1]) - means[k - 1];
        let sd = variances[k].max(0.0).sqrt();
        if sd > 0.0 && variances[k] / k as f64 > GROWTH_FLOOR {
            atoms.push((s / sd, 1.0 / k as f64));
        }
    }
    let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

    let grid: Vec<f64> = (1..100).map(|i| normal_quantile(i as f64 / 100.0)).collect();
    let (empirical_cdf, ks_distance) = if total > 0.0 {
        let mut ks: f64 = 0.0;
        let mut acc = 0.0;
        let mut i = 0;
        while i < atoms.len() {
            let z = atoms[i].0;
            let phi = normal_cdf(z);
            ks = ks.max((acc / total - phi).abs());
            while i < atoms.len() && atoms[i].0 == z {
                acc += atoms[i].1;
                i += 1;
            }
            ks = ks.max((acc / total - phi).abs());
        }
        let cdf = grid
            .iter()
            .map(|&t| {
                let idx = atoms.partition_point(|a| a.0 <= t);
                atoms[..idx].iter().map(|a| a.1).sum::<f64>() / total
            })
            .collect();
        (cdf, ks.min(1.0))
    } else {
        (vec![f64::NAN; grid.len()], 1.0)
    };
    Ok(AscltReport {
        n,
        harmonic,
        normal_cdf: grid.iter().map(|&t| normal_cdf(t)).collect(),
        grid,
        empirical_cdf,
        ks_distance,
        variance_growth,
        hypothesis_failure,
        low_n: n < LOW_N,
        route,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_observable_fails_the_hypothesis() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let rep = asclt_report(&seq, &ScalarObservable::constant(1.0), 100, 0.3, SigmaRoute::Operator, 0)
            .unwrap();
        assert!(rep.hypothesis_failure);
    }

    #[test]
    fn single_step_is_flagged_low_n() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let f = ScalarObservable::affine(1.0, -0.5, 1 << 10).unwrap();
        let rep = asclt_report(&seq, &f, 1, 0.3, SigmaRoute::Operator, 0).unwrap();
        assert!(rep.low_n);
        assert!((0.0..=1.0).contains(&rep.ks_distance));
        // One atom at (0.3 − 0.5)/√(1/12) ≈ −0.693: F jumps from 0 to 1 there.
        let z = -0.2 / (1.0f64 / 12.0).sqrt();
        let expected = normal_cdf(z).max(1.0 - normal_cdf(z));
        assert!((rep.ks_distance - expected).abs() < 1e-3, "{}", rep.ks_distance);
    }

    #[test]
    fn routes_agree_roughly() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let f = ScalarObservable::affine(1.0, -0.5, 1 << 10).unwrap();
        let a = asclt_report(&seq, &f, 200, 0.123, SigmaRoute::Operator, 1).unwrap();
        let b = asclt_report(&seq, &f, 200, 0.123, SigmaRoute::Montecarlo, 1).unwrap();
        assert!(!a.hypothesis_failure && !b.hypothesis_failure);
        assert!((a.ks_distance - b.ks_distance).abs() < 0.1);
        assert!((a.variance_growth - 0.25).abs() < 0.1, "{}", a.variance_growth);
    }
}
