use crate::error::{Error, Result};
use crate::maps::{IntervalMap, MERGE_TOL};

use super::piecewise::PiecewiseFn;

/// Default Ulam grid resolution.
pub const DEFAULT_GRID_BINS: usize = 1 << 14;

/// Bin averages on a uniform grid of `[0, 1)` with a power-of-two bin count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let bins = values.len();
        if bins < 2 || !bins.is_power_of_two() {
            return Err(Error::Argument(format!(
                "grid needs a power-of-two bin count ≥ 2, got {bins}"
            )));
        }
        Ok(GridFn { values })
    }

    pub fn constant(bins: usize, c: f64) -> Result<Self> {
        GridFn::new(vec![c; bins])
    }

    /// Exact cell averages of `f` over each bin.
    pub fn project(f: &PiecewiseFn, bins: usize) -> Result<Self> {
        if bins < 2 || !bins.is_power_of_two() {
            return GridFn::new(vec![0.0; bins]);
        }
        let mut values = vec![0.0; bins];
        let h = 1.0 / bins as f64;
        for (a, b, v) in f.cells() {
            let first = ((a * bins as f64) as usize).min(bins - 1);
            let last = (((b * bins as f64).ceil() as usize).max(first + 1)).min(bins);
            for (j, out) in values.iter_mut().enumerate().take(last).skip(first) {
                let lo = a.max(j as f64 * h);
                let hi = b.min((j + 1) as f64 * h);
                if hi > lo {
                    *out += v * (hi - lo);
                }
            }
        }
        for v in &mut values {
            *v *= bins as f64;
        }
        GridFn::new(values)
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.bins() as f64
    }

    pub fn to_piecewise(&self) -> PiecewiseFn {
        let n = self.bins();
        let breakpoints = (0..=n).map(|i| i as f64 / n as f64).collect();
        PiecewiseFn::from_parts_unchecked(breakpoints, self.values.clone())
    }
}

/// Sparse Ulam discretization of a transfer operator:
/// `(Pg)_j = Σ_i g_i · m(B_i ∩ T⁻¹B_j) / m(B_j)`.
#[derive(Debug, Clone)]
pub struct UlamMatrix {
    bins: usize,
    /// `(source bin, target bin, m(B_i ∩ T⁻¹B_j) / m(B_j))`.
    entries: Vec<(u32, u32, f64)>,
}

impl UlamMatrix {
    pub fn new(map: &IntervalMap, bins: usize) -> Result<Self> {
        if bins < 2 || !bins.is_power_of_two() || bins > u32::MAX as usize {
            return Err(Error::Argument(format!(
                "Ulam grid needs a power-of-two bin count ≥ 2, got {bins}"
            )));
        }
        let nb = bins as f64;
        let h = 1.0 / nb;
        let mut entries = Vec::new();
        for br in map.branches() {
            let first = (br.start() * nb) as usize;
            let last = ((br.end() * nb).ceil() as usize).min(bins);
            for i in first..last {
                let l = br.start().max(i as f64 * h);
                let r = br.end().min((i + 1) as f64 * h);
                if r - l <= 0.0 {
                    continue;
                }
                let (v1, v2) = (br.apply(l), br.apply(r));
                let (ylo, yhi) = (v1.min(v2).max(0.0), v1.max(v2).min(1.0));
                if yhi - ylo <= 0.0 {
                    continue;
                }
                let j0 = ((ylo * nb) as usize).min(bins - 1);
                let j1 = ((yhi * nb).ceil() as usize).clamp(j0 + 1, bins);
                // Measure of each target piece's preimage, renormalized so the
                // source piece's mass is distributed without loss.
                let mut pieces = Vec::with_capacity(j1 - j0);
                let mut total = 0.0;
                for j in j0..j1 {
                    let a = ylo.max(j as f64 * h);
                    let b = yhi.min((j + 1) as f64 * h);
                    if b - a <= MERGE_TOL * 1e-3 {
                        continue;
                    }
                    let m = match br.affine_coefficients() {
                        Some((s, _)) => (b - a) / s.abs(),
                        None => (br.inverse(b) - br.inverse(a)).abs(),
                    };
                    total += m;
                    pieces.push((j, m));
                }
                if total <= 0.0 {
                    continue;
                }
                let scale = (r - l) / total * nb;
                for (j, m) in pieces {
                    entries.push((i as u32, j as u32, m * scale));
                }
            }
        }
        Ok(UlamMatrix { bins, entries })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn apply(&self, g: &GridFn) -> Result<GridFn> {
        if g.bins() != self.bins {
            return Err(Error::Argument(format!(
                "grid has {} bins, operator expects {}",
                g.bins(),
                self.bins
            )));
        }
        let mut out = vec![0.0; self.bins];
        for &(i, j, w) in &self.entries {
            out[j as usize] += g.values[i as usize] * w;
        }
        GridFn::new(out)
    }
}

/// Ulam-projected transfer operator applied to `g`.
pub fn apply_transfer_ulam(map: &IntervalMap, g: &GridFn) -> Result<GridFn> {
    UlamMatrix::new(map, g.bins())?.apply(g)
}
