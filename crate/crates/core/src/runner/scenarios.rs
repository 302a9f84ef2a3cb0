use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{covering_horizon, inverse_derivative_sums, IntervalUnion};
use crate::numeric::{linear_fit, median};
use crate::stochastic::{
    asclt_report, concentration_mgf, empirical_measure_tail, fold_orbits, ld_tail, orbit_rng,
    shadowing_ensemble, Observable, ScalarObservable, SigmaRoute, DEFAULT_CANDIDATE_GRID,
};
use crate::transfer::{
    conditional_expectation_kp, decay_rate, martingale_decomposition, minoration_check, DEFAULT_PROXY_CELLS,
};

use super::config::{ObservableSpec, Params, Plan};
use super::record::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Decay,
    Minoration,
    Covering,
    LdTail,
    EmpiricalMeasure,
    Shadowing,
    Asclt,
    Concentration,
    Martingale,
    KpCheck,
}

/// One row of the scenario listing.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
    pub verifies: &'static str,
}

impl Scenario {
    /// Listing order.
    pub const ALL: [Scenario; 10] = [
        Scenario::Decay,
        Scenario::Minoration,
        Scenario::Covering,
        Scenario::LdTail,
        Scenario::EmpiricalMeasure,
        Scenario::Shadowing,
        Scenario::Asclt,
        Scenario::Concentration,
        Scenario::Martingale,
        Scenario::KpCheck,
    ];

    pub fn name(self) -> &'static str {
        self.info().name
    }

    pub fn info(self) -> ScenarioInfo {
        let (name, required, optional, verifies): (_, &'static [&'static str], &'static [&'static str], _) =
            match self {
                Scenario::Decay => (
                    "decay",
                    &["n_max"],
                    &["proxy_cells", "observable"],
                    "exponential loss of memory: BV norm of P_1^n f decays geometrically for zero-mean f",
                ),
                Scenario::Minoration => (
                    "minoration",
                    &["horizon"],
                    &[],
                    "uniform lower bound on the pushforward densities P_1^n 1",
                ),
                Scenario::Covering => (
                    "covering",
                    &["n_max"],
                    &["max_steps", "block_start"],
                    "uniform covering of composition cells and bounded inverse-derivative sums",
                ),
                Scenario::LdTail => (
                    "ld_tail",
                    &["n", "t_list"],
                    &["m_samples", "observable", "proxy_cells"],
                    "Gaussian large-deviation tail of Birkhoff averages",
                ),
                Scenario::EmpiricalMeasure => (
                    "empirical_measure",
                    &["n_list"],
                    &["t_list", "m_samples"],
                    "Kantorovich distance of the empirical measure is of order 1/sqrt(n) with a Gaussian tail",
                ),
                Scenario::Shadowing => (
                    "shadowing",
                    &["n", "widths"],
                    &["candidate_grid", "t_list", "m_samples"],
                    "average shadowing distance to orbits started in a target set",
                ),
                Scenario::Asclt => (
                    "asclt",
                    &["n"],
                    &["x_list", "route", "observable", "proxy_cells"],
                    "almost-sure central limit theorem for normalized ergodic sums",
                ),
                Scenario::Concentration => (
                    "concentration",
                    &["n_list", "lambda_list"],
                    &["t_list", "m_samples", "observable", "proxy_cells"],
                    "Gaussian concentration inequality for separately Lipschitz functionals",
                ),
                Scenario::Martingale => (
                    "martingale",
                    &["n"],
                    &["orbit_samples", "observable", "proxy_cells"],
                    "reverse martingale-coboundary decomposition of ergodic sums",
                ),
                Scenario::KpCheck => (
                    "kp_check",
                    &["n", "p_list"],
                    &["x_list", "m_samples", "bin_width", "observable"],
                    "preimage formula for the conditional expectation E[K | T_1^p = x]",
                ),
            };
        ScenarioInfo {
            name,
            required,
            optional,
            verifies,
        }
    }

    /// Fills unset optional parameters with desk-scale defaults.
    pub(crate) fn with_defaults(self, p: &Params) -> Params {
        let mut p = p.clone();
        let affine = |a, b| Some(ObservableSpec::Affine { a, b });
        match self {
            Scenario::Decay => {
                p.proxy_cells.get_or_insert(1 << 20);
                p.observable = p.observable.or(affine(1.0, -0.5));
            }
            Scenario::Minoration => {}
            Scenario::Covering => {
                p.max_steps.get_or_insert(64);
                p.block_start.get_or_insert(0);
            }
            Scenario::LdTail => {
                p.m_samples.get_or_insert(10_000);
                p.proxy_cells.get_or_insert(DEFAULT_PROXY_CELLS);
                p.observable = p.observable.or(affine(1.0, 0.0));
            }
            Scenario::EmpiricalMeasure => {
                p.m_samples.get_or_insert(10_000);
                p.t_list.get_or_insert_with(|| vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
            }
            Scenario::Shadowing => {
                p.m_samples.get_or_insert(2_000);
                p.candidate_grid.get_or_insert(DEFAULT_CANDIDATE_GRID);
                p.t_list.get_or_insert_with(|| vec![0.25, 0.5, 1.0]);
            }
            Scenario::Asclt => {
                p.x_list.get_or_insert_with(|| vec![0.1234, 0.2345, 0.4567, 0.6789, 0.8901]);
                p.route.get_or_insert(SigmaRoute::Operator);
                p.proxy_cells.get_or_insert(DEFAULT_PROXY_CELLS);
                p.observable = p.observable.or(affine(1.0, -0.5));
            }
            Scenario::Concentration => {
                p.m_samples.get_or_insert(10_000);
                p.t_list.get_or_insert_with(|| vec![0.5, 1.0, 1.5, 2.0]);
                p.proxy_cells.get_or_insert(DEFAULT_PROXY_CELLS);
                p.observable = p.observable.or(affine(1.0, 0.0));
            }
            Scenario::Martingale => {
                p.orbit_samples.get_or_insert(100);
                p.proxy_cells.get_or_insert(DEFAULT_PROXY_CELLS);
                p.observable = p.observable.or(affine(1.0, 0.0));
            }
            Scenario::KpCheck => {
                p.x_list.get_or_insert_with(|| vec![0.3, 0.7]);
                p.m_samples.get_or_insert(100_000);
                p.bin_width.get_or_insert(0.01);
                p.observable = p.observable.or(affine(1.0, 0.0));
            }
        }
        p
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown scenario {s:?}")))
    }
}

/// The ten scenarios in listing order.
pub fn list_scenarios() -> Vec<ScenarioInfo> {
    Scenario::ALL.iter().map(|s| s.info()).collect()
}

/// Tables, fitted constants and warnings produced by one scenario.
#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub tables: Vec<Table>,
    pub fitted: BTreeMap<String, Option<f64>>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn fit(&mut self, name: &str, v: Option<f64>) {
        self.fitted.insert(name.to_string(), v.filter(|x| x.is_finite()));
    }
}

pub(crate) fn execute(plan: &Plan) -> Result<Outcome> {
    let scenario = plan.scenario;
    dispatch(plan).map_err(|e| match e {
        Error::Resource { what, cap } => Error::Resource {
            what: format!("{scenario}: {what}"),
            cap,
        },
        e => e,
    })
}

fn observable(p: &Params) -> Result<ScalarObservable> {
    p.observable
        .expect("defaulted")
        .build(p.proxy_cells.unwrap_or(DEFAULT_PROXY_CELLS))
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn dispatch(plan: &Plan) -> Result<Outcome> {
    let p = &plan.params;
    let seq = &plan.sequence;
    let seed = plan.seed;
    let mut out = Outcome::default();
    match plan.scenario {
        Scenario::Decay => {
            let f = observable(p)?;
            let f0 = f.proxy.shift(-f.proxy.integral());
            let est = decay_rate(seq, &f0, p.n_max.expect("required"))?;
            let mut t = Table::new("curve", &["n", "min", "max", "variation", "l1", "bv"]);
            for r in &est.rows {
                t.push(vec![r.n as f64, r.min, r.max, r.variation, r.l1, r.bv]);
            }
            out.tables.push(t);
            out.fit("theta_hat", est.theta_hat);
            out.fit("k_hat", est.k_hat);
            out.fit("fitted_points", Some(est.fitted_points as f64));
            if est.degenerate {
                out.warnings.push("decay fit is degenerate: the norms vanish".into());
            }
        }
        Scenario::Minoration => {
            let rep = minoration_check(seq, p.horizon.expect("required"))?;
            let mut t = Table::new("curve", &["n", "min", "max", "variation", "l1", "bv"]);
            for r in &rep.rows {
                t.push(vec![r.n as f64, r.min, r.max, r.variation, r.l1, r.bv]);
            }
            out.tables.push(t);
            out.fit("delta_hat", Some(rep.delta_hat));
            out.fit("predicted_delta", rep.predicted_delta);
            out.fit("cone_parameter", rep.cone_parameter);
        }
        Scenario::Covering => {
            let (start, steps) = (p.block_start.expect("defaulted"), p.max_steps.expect("defaulted"));
            let mut t = Table::new("horizon", &["n", "covering_horizon", "sup_sum", "var_sum"]);
            let mut sups = Vec::new();
            for n in 1..=p.n_max.expect("required") {
                let h = covering_horizon(seq, start, n, steps)?;
                if h.is_none() {
                    out.warnings.push(format!("no covering within {steps} steps for n = {n}"));
                }
                let s = inverse_derivative_sums(seq, n)?;
                sups.push(s.sup_sum);
                t.push(vec![n as f64, opt(h.map(|h| h as f64)), s.sup_sum, s.var_sum]);
            }
            out.tables.push(t);
            out.fit("max_sup_sum", sups.iter().copied().reduce(f64::max));
            out.fit("min_sup_sum", sups.iter().copied().reduce(f64::min));
        }
        Scenario::LdTail => {
            let f = observable(p)?;
            let n = p.n.expect("required");
            let rep = ld_tail(seq, &f, n, p.t_list.as_deref().expect("required"), p.m_samples.expect("defaulted"), seed)?;
            let mut t = Table::new("tail", &["t", "prob", "std_error", "bound"]);
            for (i, &th) in rep.thresholds.iter().enumerate() {
                let bound = rep.bound_exponent_fit.map(|c| (-c * n as f64 * th * th).exp());
                t.push(vec![th, rep.empirical_probs[i], rep.std_errors[i], opt(bound)]);
            }
            out.tables.push(t);
            out.fit("c", rep.bound_exponent_fit);
            if rep.bound_exponent_fit.is_none() {
                out.warnings.push("no threshold with positive probability to fit c".into());
            }
        }
        Scenario::EmpiricalMeasure => {
            let mut kt = Table::new("kappa", &["n", "mean_kappa", "std_error", "c"]);
            let mut tt = Table::new("tail", &["n", "t", "prob", "std_error"]);
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for &n in p.n_list.as_deref().expect("required") {
                let rep = empirical_measure_tail(
                    seq,
                    n,
                    p.m_samples.expect("defaulted"),
                    p.t_list.as_deref().expect("defaulted"),
                    seed,
                )?;
                kt.push(vec![n as f64, rep.mean_kappa, rep.kappa_std_error, opt(rep.tail.bound_exponent_fit)]);
                for (i, &th) in rep.tail.thresholds.iter().enumerate() {
                    tt.push(vec![n as f64, th, rep.tail.empirical_probs[i], rep.tail.std_errors[i]]);
                }
                if rep.mean_kappa > 0.0 {
                    xs.push((n as f64).ln());
                    ys.push(rep.mean_kappa.ln());
                }
            }
            out.tables.push(kt);
            out.tables.push(tt);
            out.fit("kappa_slope", linear_fit(&xs, &ys).map(|(s, _)| s));
        }
        Scenario::Shadowing => {
            let n = p.n.expect("required");
            let mut wt = Table::new(
                "widths",
                &["width", "measure_a", "candidates", "mean_z", "std_error", "c1_hat", "c"],
            );
            let mut tt = Table::new("tail", &["width", "t", "prob", "std_error"]);
            let mut c1 = Vec::new();
            for &w in p.widths.as_deref().expect("required") {
                let a = IntervalUnion::new(vec![(0.0, w)]);
                let rep = shadowing_ensemble(
                    seq,
                    &a,
                    n,
                    p.candidate_grid.expect("defaulted"),
                    p.t_list.as_deref().expect("defaulted"),
                    p.m_samples.expect("defaulted"),
                    seed,
                )?;
                wt.push(vec![
                    w,
                    rep.measure_a,
                    rep.candidates as f64,
                    rep.mean_z,
                    rep.std_error,
                    rep.c1_hat,
                    opt(rep.tail.bound_exponent_fit),
                ]);
                for (i, &th) in rep.tail.thresholds.iter().enumerate() {
                    tt.push(vec![w, th, rep.tail.empirical_probs[i], rep.tail.std_errors[i]]);
                }
                c1.push(rep.c1_hat);
            }
            out.tables.push(wt);
            out.tables.push(tt);
            out.fit(
                "c1_ratio",
                (c1.len() >= 2).then(|| c1[c1.len() - 1] / c1[0]),
            );
        }
        Scenario::Asclt => {
            let f = observable(p)?;
            let n = p.n.expect("required");
            let route = p.route.expect("defaulted");
            let mut ot = Table::new("orbits", &["x", "ks_distance", "variance_growth", "hypothesis_failure", "low_n"]);
            let mut ct = Table::new("cdf", &["x", "t", "empirical", "normal"]);
            let mut ks = Vec::new();
            for &x in p.x_list.as_deref().expect("defaulted") {
                let rep = asclt_report(seq, &f, n, x, route, seed)?;
                ot.push(vec![x, rep.ks_distance, rep.variance_growth, flag(rep.hypothesis_failure), flag(rep.low_n)]);
                for i in 0..rep.grid.len() {
                    ct.push(vec![x, rep.grid[i], rep.empirical_cdf[i], rep.normal_cdf[i]]);
                }
                if rep.hypothesis_failure {
                    out.warnings.push(format!("x = {x}: variance growth hypothesis fails"));
                }
                if rep.low_n {
                    out.warnings.push(format!("x = {x}: n = {n} is too small for a meaningful comparison"));
                }
                ks.push(rep.ks_distance);
            }
            out.tables.push(ot);
            out.tables.push(ct);
            out.fit("median_ks", Some(median(&ks)));
        }
        Scenario::Concentration => {
            let f = observable(p)?;
            let mut mt = Table::new(
                "mgf",
                &["n", "lambda", "mgf", "std_error", "effective_samples", "c_estimate", "stable"],
            );
            let mut tt = Table::new("tail", &["n", "t", "prob", "bound"]);
            let mut c_hats = Vec::new();
            for &n in p.n_list.as_deref().expect("required") {
                let k = Observable::birkhoff_average(n, &f)?;
                let rep = concentration_mgf(
                    seq,
                    &k,
                    p.lambda_list.as_deref().expect("required"),
                    p.t_list.as_deref().expect("defaulted"),
                    p.m_samples.expect("defaulted"),
                    seed,
                )?;
                for r in &rep.rows {
                    mt.push(vec![
                        n as f64,
                        r.lambda,
                        r.mgf,
                        r.std_error,
                        r.effective_samples,
                        r.c_estimate,
                        flag(r.stable),
                    ]);
                }
                for i in 0..rep.tail_thresholds.len() {
                    tt.push(vec![n as f64, rep.tail_thresholds[i], rep.tail_probs[i], rep.tail_bounds[i]]);
                }
                out.fit(&format!("c_hat_n{n}"), rep.c_hat);
                c_hats.extend(rep.c_hat);
                out.warnings.extend(rep.warnings.iter().map(|w| format!("n = {n}: {w}")));
            }
            out.tables.push(mt);
            out.tables.push(tt);
            let max = c_hats.iter().copied().reduce(f64::max);
            let min = c_hats.iter().copied().reduce(f64::min);
            out.fit("c_hat_max", max);
            out.fit("c_hat_min", min);
            out.fit("c_hat_ratio", max.zip(min).map(|(a, b)| a / b));
        }
        Scenario::Martingale => {
            let f = observable(p)?;
            let n = p.n.expect("required");
            let samples: Vec<f64> = (0..p.orbit_samples.expect("defaulted"))
                .map(|i| orbit_rng(seed, i as u64).gen::<f64>())
                .collect();
            let dec = martingale_decomposition(seq, &f.proxy, n, &samples)?;
            let mut rt = Table::new("residuals", &["sample", "x0", "residual"]);
            for (i, (&x, &r)) in samples.iter().zip(&dec.residuals).enumerate() {
                rt.push(vec![i as f64, x, r]);
            }
            let mut st = Table::new("sup_norms", &["k", "sup_norm"]);
            for (k, &s) in dec.sup_norms.iter().enumerate() {
                st.push(vec![k as f64, s]);
            }
            out.tables.push(rt);
            out.tables.push(st);
            out.fit("max_residual", Some(dec.max_residual));
            out.fit("martingale_defect", Some(dec.martingale_defect));
            out.fit("delta_hat", Some(dec.delta_hat));
        }
        Scenario::KpCheck => {
            let f = observable(p)?;
            let n = p.n.expect("required");
            let k = Observable::birkhoff_average(n, &f)?;
            let ps = p.p_list.as_deref().expect("required");
            let xs = p.x_list.as_deref().expect("defaulted");
            let half = 0.5 * p.bin_width.expect("defaulted");
            let cells = ps.len() * xs.len();
            // Given `x_p = x` the coordinates from `p` on are the forward orbit
            // of `x`; only the past is averaged over the bin.
            let mut futures = Vec::with_capacity(cells);
            for &pp in ps {
                for &x in xs {
                    let mut fut = vec![x];
                    for i in pp + 1..n {
                        let last = fut[fut.len() - 1];
                        fut.push(seq.map(i)?.eval(last)?);
                    }
                    futures.push(fut);
                }
            }
            let blocks = fold_orbits(
                seq,
                n,
                p.m_samples.expect("defaulted"),
                seed,
                || vec![(0usize, 0.0f64, 0.0f64); cells],
                |acc, o| {
                    let mut coords = vec![0.0; n];
                    for (i, &pp) in ps.iter().enumerate() {
                        for (j, &x) in xs.iter().enumerate() {
                            if (o[pp] - x).abs() < half {
                                let c = i * xs.len() + j;
                                coords[..pp].copy_from_slice(&o[..pp]);
                                coords[pp..].copy_from_slice(&futures[c]);
                                let v = k.eval(&coords);
                                let a = &mut acc[c];
                                a.0 += 1;
                                a.1 += v;
                                a.2 += v * v;
                            }
                        }
                    }
                },
            )?;
            let mut t = Table::new("kp", &["p", "x", "formula", "mc_mean", "mc_std_error", "bin_count", "z"]);
            let mut max_z: f64 = 0.0;
            for (i, &pp) in ps.iter().enumerate() {
                for (j, &x) in xs.iter().enumerate() {
                    let (mut c, mut s1, mut s2) = (0usize, 0.0, 0.0);
                    for b in &blocks {
                        let a = b[i * xs.len() + j];
                        c += a.0;
                        s1 += a.1;
                        s2 += a.2;
                    }
                    let formula = conditional_expectation_kp(seq, &k, pp, x)?;
                    let cf = c as f64;
                    let mean = s1 / cf;
                    let var = (s2 - s1 * s1 / cf) / (cf - 1.0);
                    let se = (var / cf).sqrt();
                    let z = (formula - mean) / se;
                    if c < 30 {
                        out.warnings.push(format!("p = {pp}, x = {x}: only {c} samples in the bin"));
                    } else if z.is_finite() {
                        max_z = max_z.max(z.abs());
                    }
                    t.push(vec![pp as f64, x, formula, mean, se, cf, z]);
                }
            }
            out.tables.push(t);
            out.fit("max_abs_z", Some(max_z));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip_in_listing_order() {
        let rows = list_scenarios();
        assert_eq!(rows.len(), 10);
        for (s, r) in Scenario::ALL.iter().zip(&rows) {
            assert_eq!(r.name.parse::<Scenario>().unwrap(), *s);
            assert!(!r.required.is_empty());
        }
        assert!("nope".parse::<Scenario>().is_err());
    }

    #[test]
    fn defaults_fill_optional_parameters_only() {
        for s in Scenario::ALL {
            let p = s.with_defaults(&Params::default());
            for name in s.info().optional {
                assert!(p.has(name), "{s}: {name} has no default");
            }
            for name in s.info().required {
                assert!(!p.has(name), "{s}: {name} is defaulted");
            }
        }
    }
}
