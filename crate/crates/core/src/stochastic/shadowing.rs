use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{IntervalMap, IntervalUnion, MapSequence};

use super::orbits::{map_orbits, orbit_from};
use super::tail::{sorted_thresholds, TailReport};

/// Default candidate density (points per unit length of `A`).
pub const DEFAULT_CANDIDATE_GRID: usize = 1 << 12;

/// Candidate starting points in `A`: `a + j/grid` for each part `[a, b]`.
/// Doubling `grid` only adds points.
pub fn shadow_candidates(a: &IntervalUnion, grid: usize) -> Vec<f64> {
    let step = 1.0 / grid as f64;
    let mut out = Vec::new();
    for &(lo, hi) in a.parts() {
        let mut j = 0usize;
        loop {
            let y = lo + j as f64 * step;
            if y > hi || y >= 1.0 {
                break;
            }
            out.push(y);
            j += 1;
        }
    }
    out
}

fn candidate_orbits(maps: &[std::sync::Arc<IntervalMap>], candidates: &[f64], n: usize) -> Vec<Vec<f64>> {
    candidates
        .iter()
        .map(|&y| {
            let mut o = Vec::with_capacity(n);
            let mut z = y;
            for k in 0..n {
                o.push(z);
                if k + 1 < n {
                    z = maps[k].eval_unchecked(z);
                }
            }
            o
        })
        .collect()
}

fn validate(a: &IntervalUnion, n: usize, grid: usize) -> Result<()> {
    if a.is_empty() || a.uncovered() >= 1.0 {
        return Err(Error::Argument("shadowing target set A is empty".into()));
    }
    if n == 0 || grid == 0 {
        return Err(Error::Argument("shadowing needs n ≥ 1 and candidate_grid ≥ 1".into()));
    }
    Ok(())
}

/// Best candidate average distance to a given orbit.
fn best_distance(orbit: &[f64], candidates: &[Vec<f64>]) -> f64 {
    let n = orbit.len() as f64;
    candidates
        .iter()
        .map(|c| c.iter().zip(orbit).map(|(y, x)| (y - x).abs()).sum::<f64>() / n)
        .fold(f64::INFINITY, f64::min)
}

fn contains(a: &IntervalUnion, x: f64) -> bool {
    a.parts().iter().any(|&(lo, hi)| lo <= x && x <= hi)
}

/// Upper bound on `Z_n(x) = inf_{y ∈ A} (1/n) Σ_{k<n} |T_1^k x − T_1^k y|`
/// from a finite candidate set in `A` (plus `x` itself when `x ∈ A`).
pub fn shadowing_stat(
    seq: &MapSequence,
    a: &IntervalUnion,
    n: usize,
    x: f64,
    candidate_grid: usize,
) -> Result<f64> {
    validate(a, n, candidate_grid)?;
    if contains(a, x) {
        return Ok(0.0);
    }
    let maps = seq.first(n.saturating_sub(1))?;
    let orbit = orbit_from(seq, x, n, 0)?;
    let cands = candidate_orbits(&maps, &shadow_candidates(a, candidate_grid), n);
    Ok(best_distance(&orbit, &cands))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowingReport {
    pub n: usize,
    pub measure_a: f64,
    pub candidates: usize,
    pub mean_z: f64,
    pub std_error: f64,
    /// `E Z_n · √n / √|log m(A)|`.
    pub c1_hat: f64,
    /// `m(Z_n > E Z_n + t/√n)` per `t`, `c` fitted in `exp(−c t²)`.
    pub tail: TailReport,
}

/// `Z_n` over uniform random `x`.
pub fn shadowing_ensemble(
    seq: &MapSequence,
    a: &IntervalUnion,
    n: usize,
    candidate_grid: usize,
    t_list: &[f64],
    m_samples: usize,
    seed: u64,
) -> Result<ShadowingReport> {
    validate(a, n, candidate_grid)?;
    let thresholds = sorted_thresholds(t_list)?;
    let maps = seq.first(n.saturating_sub(1))?;
    let cand_points = shadow_candidates(a, candidate_grid);
    let cands = candidate_orbits(&maps, &cand_points, n);
    let z = map_orbits(seq, n, m_samples, seed, |o| {
        if contains(a, o[0]) {
            0.0
        } else {
            best_distance(o, &cands)
        }
    })?;
    let m = z.len() as f64;
    let mean = z.iter().sum::<f64>() / m;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0).max(1.0);
    let measure_a = 1.0 - a.uncovered();
    let root_n = (n as f64).sqrt();
    let excess: Vec<f64> = z.iter().map(|v| (v - mean) * root_n).collect();
    Ok(ShadowingReport {
        n,
        measure_a,
        candidates: cand_points.len(),
        mean_z: mean,
        std_error: (var / m).sqrt(),
        c1_hat: mean * root_n / measure_a.ln().abs().sqrt(),
        tail: TailReport::from_values(&excess, &thresholds, 1.0, 0.0),
    })
}
