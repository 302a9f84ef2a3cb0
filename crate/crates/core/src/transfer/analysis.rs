use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{composition_cells, covering_horizon, MapSequence, DEFAULT_CELL_CAP};
use crate::numeric::{gauss_legendre, linear_fit};

use super::operator::Propagator;
use super::piecewise::PiecewiseFn;

/// Rates below this are treated as exact zeros and left out of fits.
pub const RATE_FLOOR: f64 = 1e-300;

/// First step used by the decay fit; earlier steps are transient.
pub const DECAY_FIT_START: usize = 3;

/// `P_1^n 𝟙`.
pub fn pushforward_density(seq: &MapSequence, n: usize) -> Result<PiecewiseFn> {
    Propagator::new(seq).run(1, n, &PiecewiseFn::constant(1.0))
}

/// `(P_1^0 𝟙, …, P_1^n 𝟙)`.
pub fn pushforward_densities(seq: &MapSequence, n: usize) -> Result<Vec<PiecewiseFn>> {
    let mut prop = Propagator::new(seq);
    let mut out = Vec::with_capacity(n + 1);
    out.push(PiecewiseFn::constant(1.0));
    for k in 1..=n {
        let next = prop.step(k, &out[k - 1])?;
        out.push(next);
    }
    Ok(out)
}

/// One row of a density or decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub variation: f64,
    pub l1: f64,
    pub bv: f64,
}

impl CurveRow {
    pub fn of(n: usize, f: &PiecewiseFn) -> Self {
        let norm = f.bv_norm();
        CurveRow {
            n,
            min: f.min(),
            max: f.max(),
            variation: norm.variation,
            l1: norm.l1,
            bv: norm.bv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorationReport {
    pub delta_hat: f64,
    /// `min P_1^n 𝟙` for `n = 1, …, horizon`.
    pub per_n_minima: Vec<f64>,
    /// Lower bound from the covering argument, when its inputs are available.
    pub predicted_delta: Option<f64>,
    /// Cone parameter `a` used by `predicted_delta`.
    pub cone_parameter: Option<f64>,
    pub rows: Vec<CurveRow>,
}

/// Pointwise minima of `P_1^n 𝟙` over `n ≤ horizon`.
pub fn minoration_check(seq: &MapSequence, horizon: usize) -> Result<MinorationReport> {
    if horizon == 0 {
        return Err(Error::Argument("minoration horizon must be ≥ 1".into()));
    }
    let mut prop = Propagator::new(seq);
    let mut rho = PiecewiseFn::constant(1.0);
    let mut per_n_minima = Vec::with_capacity(horizon);
    let mut rows = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        rho = prop.step(n, &rho)?;
        per_n_minima.push(rho.min());
        rows.push(CurveRow::of(n, &rho));
    }
    let delta_hat = per_n_minima.iter().copied().fold(f64::INFINITY, f64::min);
    let predicted = predicted_delta(seq, horizon)?;
    Ok(MinorationReport {
        delta_hat,
        per_n_minima,
        predicted_delta: predicted.map(|p| p.0),
        cone_parameter: predicted.map(|p| p.1),
        rows,
    })
}

/// `(δ, a)` from the covering argument:
/// `δ = min{C^{-N(n₀)}, C^{-(r+N(n₀))}/2}` with `C = sup|T'|`, `r` the
/// smallest integer with `λ^r > 2`, `a = max{1, C_r/(1-ρ_r)}` from the
/// Lasota–Yorke constants of the `r`-fold compositions, `n₀` the first
/// generation whose cells are shorter than `1/(2a)`, and `N(n₀)` the
/// largest covering horizon over the probed blocks.
///
/// Only affine sequences are handled; `None` otherwise or when some probed
/// block does not cover.
fn predicted_delta(seq: &MapSequence, horizon: usize) -> Result<Option<(f64, f64)>> {
    let probe = horizon.min(8);
    if !seq.is_affine(probe + 1)? {
        return Ok(None);
    }
    let lambda = seq.min_expansion(horizon)?;
    let big_c = seq.max_derivative(horizon)?;
    let r = (1..=64).find(|&r| lambda.powi(r as i32) > 2.0);
    let Some(r) = r else { return Ok(None) };
    if seq.horizon().is_some_and(|h| h < r + probe) {
        return Ok(None);
    }
    let mut rho_r: f64 = 0.0;
    let mut c_r: f64 = 0.0;
    for m in 0..probe {
        let cells = composition_cells(seq, m + 1, m + r, DEFAULT_CELL_CAP)?;
        for cell in &cells {
            let slope = cell.affine.map(|(s, _)| s.abs()).unwrap_or(f64::NAN);
            let width = cell.b - cell.a;
            if width <= 0.0 {
                continue;
            }
            rho_r = rho_r.max(2.0 / slope);
            c_r = c_r.max(2.0 * (1.0 / slope) / width);
        }
    }
    if !(rho_r < 1.0) {
        return Ok(None);
    }
    let a = f64::max(1.0, c_r / (1.0 - rho_r));
    let n0 = (1..=200).find(|&n| lambda.powi(-(n as i32)) < 1.0 / (2.0 * a));
    let Some(n0) = n0 else { return Ok(None) };
    let mut big_n = 0usize;
    for m in 0..probe {
        match covering_horizon(seq, m, n0, 4 * n0 + 64) {
            Ok(Some(nm)) => big_n = big_n.max(nm),
            Ok(None) | Err(Error::Resource { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    let nn = big_n as i32;
    let delta = f64::min(
        big_c.powi(-nn),
        big_c.powi(-(r as i32 + nn)) / 2.0,
    );
    Ok(Some((delta, a)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEstimate {
    /// `‖P_1^n f_0‖_BV` for `n = 0, …, n_max`.
    pub rates: Vec<f64>,
    pub theta_hat: Option<f64>,
    pub k_hat: Option<f64>,
    /// Inclusive range of `n` considered by the fit.
    pub window: (usize, usize),
    /// Number of rates actually used by the fit.
    pub fitted_points: usize,
    pub degenerate: bool,
    pub rows: Vec<CurveRow>,
}

/// Geometric decay of `‖P_1^n f_0‖_BV` for a zero-mean `f_0`.
pub fn decay_rate(seq: &MapSequence, f0: &PiecewiseFn, n_max: usize) -> Result<DecayEstimate> {
    if n_max < 4 {
        return Err(Error::Argument(format!("decay fit needs n_max ≥ 4, got {n_max}")));
    }
    let mean = f0.integral();
    if mean.abs() > 1e-12 {
        return Err(Error::Argument(format!(
            "decay needs a zero-mean function, got mean {mean:e}"
        )));
    }
    let mut prop = Propagator::new(seq);
    let mut f = f0.clone();
    let mut rows = vec![CurveRow::of(0, &f)];
    for n in 1..=n_max {
        f = prop.step(n, &f)?;
        rows.push(CurveRow::of(n, &f));
    }
    let rates: Vec<f64> = rows.iter().map(|r| r.bv).collect();
    let window = (DECAY_FIT_START, n_max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (window.0..=window.1)
        .filter(|&n| rates[n] >= RATE_FLOOR)
        .map(|n| (n as f64, rates[n].ln()))
        .unzip();
    let fit = if rates[0] >= RATE_FLOOR { linear_fit(&xs, &ys) } else { None };
    Ok(DecayEstimate {
        theta_hat: fit.map(|(s, _)| s.exp()),
        k_hat: fit.map(|(_, c)| c.exp() / rates[0]),
        window,
        fitted_points: if fit.is_some() { xs.len() } else { 0 },
        degenerate: fit.is_none(),
        rates,
        rows,
    })
}

/// `∫ (f∘T_1^j)(g∘T_1^l) dm = ∫ g · P_{j+1}^l (f · P_1^j 𝟙) dm`.
pub fn correlation(
    seq: &MapSequence,
    f: &PiecewiseFn,
    g: &PiecewiseFn,
    j: usize,
    l: usize,
) -> Result<f64> {
    if j > l {
        return Err(Error::Argument(format!("correlation needs j ≤ l, got {j} > {l}")));
    }
    let mut prop = Propagator::new(seq);
    let rho = prop.run(1, j, &PiecewiseFn::constant(1.0))?;
    let pushed = prop.run(j + 1, l, &f.mul(&rho))?;
    Ok(g.integral_product(&pushed))
}

/// `Var(S_n)` with `S_n = Σ_{k<n} f∘T_1^k` under Lebesgue measure.
pub fn ergodic_sum_variance(seq: &MapSequence, f: &PiecewiseFn, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("ergodic sum needs n ≥ 1".into()));
    }
    Ok(ergodic_sum_variances(seq, f, n)?[n])
}

/// `(Var S_0, …, Var S_n)` in one sweep.
///
/// With `ρ_k = P_1^k 𝟙`, `c_k = ∫ f ρ_k`, `h_k = (f − c_k) ρ_k` and
/// `A_k = Σ_{j<k} P_{j+1}^k h_j`:
/// `Var S_{k+1} = Var S_k + ∫(f − c_k) h_k + 2 ∫(f − c_k) A_k`.
pub fn ergodic_sum_variances(seq: &MapSequence, f: &PiecewiseFn, n: usize) -> Result<Vec<f64>> {
    let mut prop = Propagator::new(seq);
    let mut rho = PiecewiseFn::constant(1.0);
    let mut acc = PiecewiseFn::constant(0.0);
    let mut out = Vec::with_capacity(n + 1);
    let mut var = 0.0;
    out.push(var);
    for k in 0..n {
        let c = f.integral_product(&rho);
        let centered = f.shift(-c);
        let h = centered.mul(&rho);
        var += centered.integral_product(&h) + 2.0 * centered.integral_product(&acc);
        out.push(var);
        if k + 1 < n {
            acc = prop.step(k + 1, &acc.add(&h))?;
            rho = prop.step(k + 1, &rho)?;
        }
    }
    Ok(out)
}

/// `∫ f∘T_1^k dm = ∫ f · P_1^k 𝟙 dm` for `k = 0, …, n − 1`, integrating
/// `f` exactly enough on each density cell with Gauss–Legendre.
pub fn centering_means(
    seq: &MapSequence,
    f: &(dyn Fn(f64) -> f64 + Sync),
    n: usize,
) -> Result<Vec<f64>> {
    let mut prop = Propagator::new(seq);
    let mut rho = PiecewiseFn::constant(1.0);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            rho = prop.step(k, &rho)?;
        }
        out.push(
            rho.cells()
                .map(|(a, b, v)| if v == 0.0 { 0.0 } else { v * gauss_legendre(a, b, f) })
                .sum(),
        );
    }
    Ok(out)
}
