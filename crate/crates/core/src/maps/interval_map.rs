use std::sync::Arc;

use serde::Serialize;

use super::branch::{Branch, SmoothBranch};
use crate::error::{Error, Result};
use crate::numeric::Dd;

/// Branch domains closer than this are treated as touching.
pub const MERGE_TOL: f64 = 1e-12;

/// Upper bound on branch count accepted by [`IntervalMap::new`].
pub const MAX_BRANCHES: usize = 4096;

/// Largest double strictly below one.
pub(crate) const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// A piecewise monotone, uniformly expanding map of `[0, 1)`.
#[derive(Debug, Clone)]
pub struct IntervalMap {
    branches: Vec<Branch>,
    label: String,
}

/// Lasota–Yorke pair `(2/λ(T), C(T))` of a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyConstants {
    pub contraction: f64,
    pub additive: f64,
}

impl IntervalMap {
    /// Assembles a map from branches whose domains tile `[0, 1)`.
    pub fn new(label: impl Into<String>, mut branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Argument("a map needs at least one branch".into()));
        }
        if branches.len() > MAX_BRANCHES {
            return Err(Error::resource("branch count", MAX_BRANCHES));
        }
        branches.sort_by(|a, b| a.start().total_cmp(&b.start()));
        if branches[0].start().abs() > MERGE_TOL {
            return Err(Error::Argument("branch domains must start at 0".into()));
        }
        for pair in branches.windows(2) {
            if (pair[0].end() - pair[1].start()).abs() > MERGE_TOL {
                return Err(Error::Argument(format!(
                    "branch domains leave a gap or overlap near {}",
                    pair[0].end()
                )));
            }
        }
        if (branches[branches.len() - 1].end() - 1.0).abs() > MERGE_TOL {
            return Err(Error::Argument("branch domains must end at 1".into()));
        }
        Ok(IntervalMap {
            branches,
            label: label.into(),
        })
    }

    /// The β-transformation `x ↦ βx mod 1` for `β > 1`.
    pub fn beta(beta: f64) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(Error::Argument(format!("beta must exceed 1, got {beta}")));
        }
        let count = beta.ceil() as usize;
        if count > MAX_BRANCHES {
            return Err(Error::resource("branch count", MAX_BRANCHES));
        }
        let mut branches = Vec::with_capacity(count);
        for k in 0..count {
            let start = k as f64 / beta;
            let end = if k + 1 == count {
                1.0
            } else {
                (k + 1) as f64 / beta
            };
            if end - start <= MERGE_TOL {
                // Integral β rounding: the last cut already sits at 1.
                continue;
            }
            branches.push(Branch::affine(start, end, beta, -(k as f64))?);
        }
        Self::new(format!("beta:{beta}"), branches)
    }

    /// Doubling map with a quadratic perturbation on each half:
    /// `T(x) = g(2x - k)` with `g(u) = u + ε·u·(1 - u)`, `|ε| < 1/2`.
    ///
    /// Certified bounds: `inf|T'| = 2(1 - |ε|)`, `sup|T''| = 8|ε|`.
    pub fn perturbed_doubling(eps: f64) -> Result<Self> {
        if !(eps.abs() < 0.5) {
            return Err(Error::Argument(format!(
                "perturbation must satisfy |eps| < 1/2, got {eps}"
            )));
        }
        let mut branches = Vec::with_capacity(2);
        for k in 0..2 {
            let shift = k as f64;
            let spec = SmoothBranch {
                value: Arc::new(move |x: f64| {
                    let u = 2.0 * x - shift;
                    (u + eps * u * (1.0 - u)).clamp(0.0, 1.0)
                }),
                derivative: Arc::new(move |x: f64| {
                    let u = 2.0 * x - shift;
                    2.0 * (1.0 + eps * (1.0 - 2.0 * u))
                }),
                second_derivative: Arc::new(move |_x: f64| -8.0 * eps),
                min_expansion: 2.0 * (1.0 - eps.abs()),
                max_curvature: 8.0 * eps.abs(),
            };
            branches.push(Branch::smooth(0.5 * shift, 0.5 * (shift + 1.0), spec)?);
        }
        Self::new(format!("perturbed_doubling:{eps}"), branches)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn is_affine(&self) -> bool {
        self.branches.iter().all(Branch::is_affine)
    }

    /// `λ(T) = inf|T'|`.
    pub fn min_expansion(&self) -> f64 {
        self.branches
            .iter()
            .map(Branch::min_expansion)
            .fold(f64::INFINITY, f64::min)
    }

    /// `sup|T'|`, sampled on smooth branches.
    pub fn max_derivative(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| match b.affine_coefficients() {
                Some((s, _)) => s.abs(),
                None => (0..=64)
                    .map(|i| b.derivative(b.start() + b.width() * i as f64 / 64.0).abs())
                    .fold(0.0, f64::max),
            })
            .fold(0.0, f64::max)
    }

    pub fn max_curvature(&self) -> f64 {
        self.branches
            .iter()
            .map(Branch::max_curvature)
            .fold(0.0, f64::max)
    }

    /// Breakpoints `0 = a_0 < … < a_k = 1` of the monotonicity partition.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.branches.iter().map(Branch::start).collect();
        pts.push(1.0);
        pts
    }

    /// Index of the branch whose half-open domain contains `x`.
    pub fn branch_index(&self, x: f64) -> usize {
        let i = self.branches.partition_point(|b| b.start() <= x);
        i.saturating_sub(1)
    }

    pub fn branch_at(&self, x: f64) -> &Branch {
        &self.branches[self.branch_index(x)]
    }

    /// `T(x)` for `x ∈ [0, 1)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain(format!("point {x} is outside [0, 1)")));
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        fold_into_unit(self.branch_at(x).apply(x))
    }

    /// `T'(x)` on the branch containing `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.branch_at(x).derivative(x)
    }

    pub(crate) fn eval_dd(&self, x: Dd) -> Dd {
        let mut i = self.branch_index(x.hi);
        if i > 0 && x.lo < 0.0 && x.hi == self.branches[i].start() {
            i -= 1;
        }
        let y = self.branches[i].apply_dd(x);
        if y.hi < 0.0 {
            Dd::new(0.0)
        } else if y.hi >= 1.0 {
            Dd::new(BELOW_ONE)
        } else {
            y
        }
    }

    /// All `y` with `T(y) = x`, one per branch whose image contains `x`,
    /// paired with `|T'(y)|`.
    pub fn preimages(&self, x: f64) -> Result<Vec<(f64, f64)>> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain(format!("point {x} is outside [0, 1)")));
        }
        Ok(self
            .branches
            .iter()
            .filter(|b| b.image_contains(x))
            .map(|b| {
                let mut y = b.inverse(x);
                if y >= b.end() {
                    y = f64::max(b.start(), prev_below(b.end()));
                }
                (y, b.derivative(y).abs())
            })
            .collect())
    }

    /// `(2/λ(T), C(T))` with
    /// `C(T) = sup|T''|/|T'|² + 2·sup_I (sup_I |T'|⁻¹)/m(I)`.
    pub fn lasota_yorke_constants(&self) -> LyConstants {
        let lambda = self.min_expansion();
        let distortion = self
            .branches
            .iter()
            .map(|b| b.max_curvature() / (b.min_expansion() * b.min_expansion()))
            .fold(0.0, f64::max);
        let cell_term = self
            .branches
            .iter()
            .map(|b| (1.0 / b.min_expansion()) / b.width())
            .fold(0.0, f64::max);
        LyConstants {
            contraction: 2.0 / lambda,
            additive: distortion + 2.0 * cell_term,
        }
    }
}

/// Maps a branch value into `[0, 1)`; values at 1 come from rounding.
#[inline]
pub(crate) fn fold_into_unit(y: f64) -> f64 {
    if y < 0.0 {
        0.0
    } else if y >= 1.0 {
        BELOW_ONE
    } else {
        y
    }
}

#[inline]
pub(crate) fn prev_below(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn eval_beta_examples() {
        assert!(close(IntervalMap::beta(2.0).unwrap().eval(0.3).unwrap(), 0.6));
        assert!(close(IntervalMap::beta(1.5).unwrap().eval(0.8).unwrap(), 0.2));
        assert_eq!(IntervalMap::beta(2.0).unwrap().eval(0.5).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_points_outside_unit_interval() {
        let m = IntervalMap::beta(2.0).unwrap();
        assert!(matches!(m.eval(1.0), Err(Error::Domain(_))));
        assert!(matches!(m.eval(-0.1), Err(Error::Domain(_))));
        assert!(matches!(m.eval(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn preimage_examples() {
        let p = IntervalMap::beta(2.0).unwrap().preimages(0.0).unwrap();
        assert_eq!(p.len(), 2);
        assert!(close(p[0].0, 0.0) && close(p[1].0, 0.5));
        assert!(p.iter().all(|&(_, d)| d == 2.0));

        let p = IntervalMap::beta(1.5).unwrap().preimages(0.9).unwrap();
        assert_eq!(p.len(), 1);
        assert!(close(p[0].0, 0.6) && p[0].1 == 1.5);

        let p = IntervalMap::beta(3.0).unwrap().preimages(0.3).unwrap();
        let ys: Vec<f64> = p.iter().map(|q| q.0).collect();
        assert_eq!(ys.len(), 3);
        assert!(close(ys[0], 0.1) && close(ys[1], 1.3 / 3.0) && close(ys[2], 2.3 / 3.0));
    }

    #[test]
    fn lasota_yorke_examples() {
        let c = IntervalMap::beta(3.0).unwrap().lasota_yorke_constants();
        assert!(close(c.contraction, 2.0 / 3.0) && close(c.additive, 2.0));
        let c = IntervalMap::beta(2.0).unwrap().lasota_yorke_constants();
        assert!(close(c.contraction, 1.0) && close(c.additive, 2.0));
        let c = IntervalMap::beta(2.5).unwrap().lasota_yorke_constants();
        assert!(close(c.contraction, 0.8) && close(c.additive, 4.0));
    }

    #[test]
    fn beta_branch_layout() {
        let m = IntervalMap::beta(2.5).unwrap();
        assert_eq!(m.branches().len(), 3);
        assert_eq!(m.label(), "beta:2.5");
        let m = IntervalMap::beta(3.0).unwrap();
        assert_eq!(m.branches().len(), 3);
        assert!(IntervalMap::beta(1.0).is_err());
    }

    #[test]
    fn new_rejects_gapped_domains() {
        let a = Branch::affine(0.0, 0.4, 2.0, 0.0).unwrap();
        let b = Branch::affine(0.5, 1.0, 2.0, -1.0).unwrap();
        assert!(IntervalMap::new("gap", vec![a, b]).is_err());
    }

    #[test]
    fn branch_rejects_weak_expansion_and_bad_image() {
        assert!(Branch::affine(0.0, 0.5, 0.9, 0.0).is_err());
        assert!(Branch::affine(0.0, 0.8, 2.0, 0.0).is_err());
    }

    #[test]
    fn decreasing_branches_are_supported() {
        let tent = IntervalMap::new(
            "tent",
            vec![
                Branch::affine(0.0, 0.5, 2.0, 0.0).unwrap(),
                Branch::affine(0.5, 1.0, -2.0, 2.0).unwrap(),
            ],
        )
        .unwrap();
        assert!(close(tent.eval(0.75).unwrap(), 0.5));
        let pre = tent.preimages(0.5).unwrap();
        assert_eq!(pre.len(), 2);
        assert!(close(pre[0].0, 0.25) && close(pre[1].0, 0.75));
        // The decreasing branch only approaches 0 at its excluded right end.
        assert_eq!(tent.preimages(0.0).unwrap().len(), 1);
    }

    #[test]
    fn perturbed_doubling_bounds() {
        let m = IntervalMap::perturbed_doubling(0.2).unwrap();
        assert!(!m.is_affine());
        assert!(close(m.min_expansion(), 1.6));
        for &x in &[0.1, 0.3, 0.6, 0.9] {
            for (y, d) in m.preimages(x).unwrap() {
                assert!((m.eval(y).unwrap() - x).abs() < 1e-12);
                assert!(d >= 1.6 - 1e-12);
            }
        }
        assert!(IntervalMap::perturbed_doubling(0.6).is_err());
    }
}
