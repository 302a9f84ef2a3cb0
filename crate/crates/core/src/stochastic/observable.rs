use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::RealFn;
use crate::transfer::PiecewiseFn;

use super::kantorovich::Cdf;

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Probe pairs per coordinate used when an observable is constructed.
pub const SPOT_CHECK_PROBES: usize = 16;

/// A scalar Lipschitz function on `[0, 1]` with its constant and a
/// piecewise-constant proxy for operator-side computations.
#[derive(Clone)]
pub struct ScalarObservable {
    pub value: RealFn,
    pub lip: f64,
    pub proxy: PiecewiseFn,
}

impl fmt::Debug for ScalarObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarObservable")
            .field("lip", &self.lip)
            .field("proxy_cells", &self.proxy.cell_count())
            .finish()
    }
}

impl ScalarObservable {
    pub fn new(value: RealFn, lip: f64, proxy_cells: usize) -> Result<Self> {
        if !(lip >= 0.0) || !lip.is_finite() {
            return Err(Error::Argument(format!("Lipschitz constant {lip} is invalid")));
        }
        let proxy = PiecewiseFn::sampled(proxy_cells, |x| value(x))?;
        Ok(ScalarObservable { value, lip, proxy })
    }

    /// `x ↦ a·x + b`.
    pub fn affine(a: f64, b: f64, proxy_cells: usize) -> Result<Self> {
        Self::new(Arc::new(move |x| a.mul_add(x, b)), a.abs(), proxy_cells)
    }

    pub fn constant(c: f64) -> Self {
        ScalarObservable {
            value: Arc::new(move |_| c),
            lip: 0.0,
            proxy: PiecewiseFn::constant(c),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }
}

/// A separately Lipschitz functional `K(x_0, …, x_{n−1})`.
#[derive(Clone)]
pub struct Observable {
    arity: usize,
    lip: Vec<f64>,
    evaluator: Evaluator,
    label: String,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("label", &self.label)
            .field("arity", &self.arity)
            .finish()
    }
}

impl Observable {
    /// Validates the declared constants and spot-checks them on random
    /// single-coordinate perturbations.
    pub fn new(label: impl Into<String>, lip: Vec<f64>, evaluator: Evaluator) -> Result<Self> {
        if lip.is_empty() {
            return Err(Error::Argument("observable needs arity ≥ 1".into()));
        }
        if let Some(bad) = lip.iter().position(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Argument(format!(
                "Lipschitz constant {} at coordinate {bad} is invalid",
                lip[bad]
            )));
        }
        let obs = Observable {
            arity: lip.len(),
            lip,
            evaluator,
            label: label.into(),
        };
        obs.spot_check(SPOT_CHECK_PROBES, 0x5EED_0B5E)?;
        Ok(obs)
    }

    pub fn constant(arity: usize, c: f64) -> Result<Self> {
        Self::new(format!("constant:{c}"), vec![0.0; arity], Arc::new(move |_| c))
    }

    /// `x_j`.
    pub fn coordinate(arity: usize, j: usize) -> Result<Self> {
        if j >= arity {
            return Err(Error::Argument(format!("coordinate {j} outside arity {arity}")));
        }
        let mut lip = vec![0.0; arity];
        lip[j] = 1.0;
        Self::new(format!("coordinate:{j}"), lip, Arc::new(move |x| x[j]))
    }

    /// `(1/n) Σ_k f(x_k)`.
    pub fn birkhoff_average(arity: usize, f: &ScalarObservable) -> Result<Self> {
        let value = f.value.clone();
        let n = arity as f64;
        Self::new(
            "birkhoff_average",
            vec![f.lip / n; arity],
            Arc::new(move |x| x.iter().map(|&v| value(v)).sum::<f64>() / n),
        )
    }

    /// `κ(ℰ_n(x), μ)` for a fixed reference distribution function.
    pub fn kantorovich_functional(arity: usize, reference: Cdf) -> Result<Self> {
        let reference = Arc::new(reference);
        Self::new(
            "kantorovich",
            vec![1.0 / arity as f64; arity],
            Arc::new(move |x| Cdf::empirical(x).distance(&reference)),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn lip(&self) -> &[f64] {
        &self.lip
    }

    pub fn sum_lip_sq(&self) -> f64 {
        self.lip.iter().map(|l| l * l).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    /// Checks `|K(x) − K(x')| ≤ Lip_j·|x_j − x'_j|` on `probes` random pairs
    /// differing in coordinate `j`, for each `j`.
    pub fn spot_check(&self, probes: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = Vec::new();
        let coords: Vec<usize> = if self.arity <= 64 {
            (0..self.arity).collect()
        } else {
            (0..64).map(|_| rng.gen_range(0..self.arity)).collect()
        };
        for &j in &coords {
            for _ in 0..probes {
                let mut x: Vec<f64> = (0..self.arity).map(|_| rng.gen::<f64>()).collect();
                let k0 = self.eval(&x);
                let old = x[j];
                x[j] = rng.gen::<f64>();
                let k1 = self.eval(&x);
                let allowed = self.lip[j] * (x[j] - old).abs();
                if (k1 - k0).abs() > allowed * (1.0 + 1e-9) + 1e-12 {
                    violations.push(format!(
                        "{}: coordinate {j} moved by {:.3e} changes K by {:.3e} > {:.3e}",
                        self.label,
                        (x[j] - old).abs(),
                        (k1 - k0).abs(),
                        allowed
                    ));
                    break;
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }
}
