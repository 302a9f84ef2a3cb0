use crate::error::{Error, Result};
use crate::transfer::PiecewiseFn;

const MONOTONE_TOL: f64 = 1e-12;

/// A right-continuous distribution function on `[0, 1]` that is linear
/// between knots and may jump at them.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    /// `(t, F(t−), F(t))`, sorted by `t`, starting at 0 and ending at 1.
    knots: Vec<(f64, f64, f64)>,
}

impl Cdf {
    pub fn new(knots: Vec<(f64, f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if knots.len() < 2 || knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return bad("distribution knots must start at 0 and end at 1".into());
        }
        let mut prev = 0.0;
        let mut prev_t = f64::NEG_INFINITY;
        for &(t, left, right) in &knots {
            if !(t > prev_t) {
                return bad(format!("knot {t} is not strictly after {prev_t}"));
            }
            if left < prev - MONOTONE_TOL || right < left - MONOTONE_TOL {
                return bad(format!("distribution function decreases at t = {t}"));
            }
            if left < -MONOTONE_TOL || right > 1.0 + MONOTONE_TOL {
                return bad(format!("distribution value outside [0, 1] at t = {t}"));
            }
            prev = right;
            prev_t = t;
        }
        if (knots[knots.len() - 1].2 - 1.0).abs() > 1e-9 {
            return bad("distribution function must reach 1 at t = 1".into());
        }
        Ok(Cdf { knots })
    }

    pub fn lebesgue() -> Self {
        Cdf {
            knots: vec![(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)],
        }
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::empirical_checked(&[x])
    }

    /// Distribution of the uniform measure on the given points.
    pub fn empirical(points: &[f64]) -> Self {
        let mut sorted: Vec<f64> = points.iter().map(|p| p.clamp(0.0, 1.0)).collect();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut knots = Vec::with_capacity(sorted.len() + 2);
        knots.push((0.0, 0.0, 0.0));
        let mut count = 0usize;
        let mut i = 0;
        while i < sorted.len() {
            let t = sorted[i];
            let before = count as f64 / n;
            while i < sorted.len() && sorted[i] == t {
                i += 1;
                count += 1;
            }
            let after = count as f64 / n;
            if t == 0.0 {
                knots[0] = (0.0, 0.0, after);
            } else {
                knots.push((t, before, after));
            }
        }
        if knots[knots.len() - 1].0 < 1.0 {
            knots.push((1.0, 1.0, 1.0));
        }
        Cdf { knots }
    }

    pub fn empirical_checked(points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("empirical measure needs a point".into()));
        }
        if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Argument(format!("point {p} is outside [0, 1]")));
        }
        Ok(Self::empirical(points))
    }

    /// `t ↦ ∫_0^t ρ dm` for a probability density `ρ`.
    pub fn from_density(rho: &PiecewiseFn) -> Result<Self> {
        let total = rho.integral();
        if rho.min() < 0.0 || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!(
                "density must be nonnegative with unit mass, got mass {total}"
            )));
        }
        let mut knots = Vec::with_capacity(rho.cell_count() + 1);
        knots.push((0.0, 0.0, 0.0));
        let mut acc = 0.0;
        for (a, b, v) in rho.cells() {
            acc += v * (b - a);
            knots.push((b, acc, acc));
        }
        let last = knots.len() - 1;
        knots[last] = (1.0, acc.min(1.0), 1.0);
        Cdf::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64, f64)] {
        &self.knots
    }

    /// `F(t)` (right-continuous).
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return self.knots[self.knots.len() - 1].2;
        }
        let i = self.knots.partition_point(|k| k.0 <= t);
        let (t0, _, f0) = self.knots[i - 1];
        let (t1, f1, _) = self.knots[i];
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    }

    /// `F` just before `t` (left limit).
    fn eval_left(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|k| k.0 < t);
        if i < self.knots.len() && self.knots[i].0 == t {
            return self.knots[i].1;
        }
        self.eval(t)
    }

    /// `∫_0^1 |F − G| dt`.
    pub fn distance(&self, other: &Cdf) -> f64 {
        let mut ts: Vec<f64> = self
            .knots
            .iter()
            .chain(&other.knots)
            .map(|k| k.0)
            .collect();
        ts.sort_unstable_by(f64::total_cmp);
        ts.dedup();
        let mut total = 0.0;
        for w in ts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let d0 = self.eval(a) - other.eval(a);
            let d1 = self.eval_left(b) - other.eval_left(b);
            total += abs_linear_integral(d0, d1) * (b - a);
        }
        total
    }
}

/// `∫_0^1 |d0 + (d1 − d0) s| ds`.
fn abs_linear_integral(d0: f64, d1: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs())
    } else {
        0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

/// Kantorovich distance `∫_0^1 |F_1 − F_2| dt`.
pub fn kantorovich(cdf1: &Cdf, cdf2: &Cdf) -> f64 {
    cdf1.distance(cdf2)
}
