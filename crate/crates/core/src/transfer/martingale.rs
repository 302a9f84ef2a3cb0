use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::MapSequence;

use super::operator::{pullback, Propagator};
use super::piecewise::PiecewiseFn;

/// Densities below this make the conditional-expectation operators
/// ill-defined and abort the decomposition.
pub const MINORATION_FLOOR: f64 = 1e-6;

/// Martingale–coboundary decomposition `S_n = Σ_{k<n} U_k + h_n∘T_1^n`.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleDecomp {
    /// `h_0, …, h_n`.
    pub h: Vec<PiecewiseFn>,
    /// `∫ f∘T_1^k dm` for `k < n`.
    pub centers: Vec<f64>,
    /// Per orbit sample, `U_0, …, U_{n−1}`.
    pub u_values: Vec<Vec<f64>>,
    /// Per orbit sample, `|S_n − (Σ U_k + h_n∘T_1^n)|`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// `‖h_k‖_sup` for `k = 0, …, n`.
    pub sup_norms: Vec<f64>,
    /// `max_k sup|P_{k+1}(φ_k · P_1^k 𝟙)|`, zero for reversed martingale
    /// differences.
    pub martingale_defect: f64,
    /// `min_{k ≤ n} min P_1^k 𝟙`.
    pub delta_hat: f64,
}

/// Builds `h_k = (P_1^k 𝟙)⁻¹ Σ_{j<k} P_{j+1}^k (f_j P_1^j 𝟙)` and
/// `φ_k = f_k + h_k − h_{k+1}∘T_{k+1}` with `f_k = f − ∫ f∘T_1^k dm`, and
/// checks the decomposition along the orbits of `orbit_samples`.
pub fn martingale_decomposition(
    seq: &MapSequence,
    f: &PiecewiseFn,
    n: usize,
    orbit_samples: &[f64],
) -> Result<MartingaleDecomp> {
    if n == 0 {
        return Err(Error::Argument("decomposition needs n ≥ 1".into()));
    }
    let mut prop = Propagator::new(seq);
    let mut rho = PiecewiseFn::constant(1.0);
    let mut acc = PiecewiseFn::constant(0.0);
    let mut h = vec![PiecewiseFn::constant(0.0)];
    let mut centers = Vec::with_capacity(n);
    let mut weighted = Vec::with_capacity(n);
    let mut delta_hat: f64 = 1.0;
    for k in 0..n {
        let c = f.integral_product(&rho);
        centers.push(c);
        let fk_rho = f.shift(-c).mul(&rho);
        acc = prop.step(k + 1, &acc.add(&fk_rho))?;
        let next_rho = prop.step(k + 1, &rho)?;
        delta_hat = delta_hat.min(next_rho.min());
        if delta_hat < MINORATION_FLOOR {
            return Err(Error::Minoration(format!(
                "P_1^{} 𝟙 drops to {delta_hat:e}, below {MINORATION_FLOOR:e}",
                k + 1
            )));
        }
        h.push(acc.combine(&next_rho, |a, r| a / r));
        weighted.push(rho);
        rho = next_rho;
    }

    let mut defect: f64 = 0.0;
    for k in 0..n {
        let map = seq.map(k + 1)?;
        let phi = f
            .shift(-centers[k])
            .add(&h[k])
            .sub(&pullback(&map, &h[k + 1]));
        let pushed = prop.step(k + 1, &phi.mul(&weighted[k]))?;
        defect = defect.max(pushed.sup_abs());
    }

    let mut u_values = Vec::with_capacity(orbit_samples.len());
    let mut residuals = Vec::with_capacity(orbit_samples.len());
    for &x in orbit_samples {
        let orbit = seq.orbit(x, n)?;
        let s_n: f64 = (0..n).map(|k| f.eval(orbit[k]) - centers[k]).sum();
        let u: Vec<f64> = (0..n)
            .map(|k| {
                f.eval(orbit[k]) - centers[k] + h[k].eval(orbit[k]) - h[k + 1].eval(orbit[k + 1])
            })
            .collect();
        let rhs = u.iter().sum::<f64>() + h[n].eval(orbit[n]);
        residuals.push((s_n - rhs).abs());
        u_values.push(u);
    }
    Ok(MartingaleDecomp {
        sup_norms: h.iter().map(PiecewiseFn::sup_abs).collect(),
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        h,
        centers,
        u_values,
        residuals,
        martingale_defect: defect,
        delta_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(count: usize) -> Vec<f64> {
        (0..count).map(|i| ((i as f64 + 0.5) * 0.618_033_988_749_895) % 1.0).collect()
    }

    #[test]
    fn constant_observable_has_trivial_decomposition() {
        let seq = MapSequence::constant_beta(2.5).unwrap();
        let d = martingale_decomposition(&seq, &PiecewiseFn::constant(4.0), 6, &samples(10)).unwrap();
        assert!(d.sup_norms.iter().all(|&s| s < 1e-12));
        assert!(d.u_values.iter().flatten().all(|u| u.abs() < 1e-12));
        assert!(d.max_residual < 1e-12);
    }

    #[test]
    fn doubling_sawtooth_identity_and_bounded_coboundary() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let f = PiecewiseFn::sampled(1 << 10, |x| x - 0.5).unwrap();
        let d = martingale_decomposition(&seq, &f, 10, &samples(100)).unwrap();
        assert!(d.max_residual < 1e-8);
        assert!(d.martingale_defect < 1e-12, "{}", d.martingale_defect);
        // Σ_j 2^{-j}(x − 1/2) stays below 1/2.
        assert!(d.sup_norms[10] < 0.5);
    }

    #[test]
    fn random_beta_defect_vanishes() {
        let seq = MapSequence::random_beta(2.0, 0.1, 3).unwrap();
        let f = PiecewiseFn::sampled(64, |x| x * x).unwrap();
        let d = martingale_decomposition(&seq, &f, 8, &samples(20)).unwrap();
        assert!(d.max_residual < 1e-8);
        assert!(d.martingale_defect < 1e-10, "{}", d.martingale_defect);
    }

    #[test]
    fn pullback_composes_pointwise() {
        let map = crate::maps::IntervalMap::beta(1.7).unwrap();
        let g = PiecewiseFn::sampled(9, |x| x.sin()).unwrap();
        let pb = pullback(&map, &g);
        for i in 0..500 {
            let x = (i as f64 + 0.31) / 500.0;
            assert_eq!(pb.eval(x), g.eval(map.eval(x).unwrap()), "x = {x}");
        }
    }
}
