use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::MERGE_TOL;

/// A function on `[0, 1)` that is constant on each half-open cell
/// `[breakpoints[i], breakpoints[i+1])`.
///
/// This is the bounded-variation representation every exact operator in
/// the crate acts on. Variation counts interior jumps only, which is the
/// variation of the best representative in the Lebesgue class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

/// `(V f, ‖f‖_{L¹}, V f + ‖f‖_{L¹})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BvNorm {
    pub variation: f64,
    pub l1: f64,
    pub bv: f64,
}

impl PiecewiseFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::Argument(format!(
                "{} breakpoints cannot carry {} cell values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 || breakpoints[breakpoints.len() - 1] != 1.0 {
            return Err(Error::Argument(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("cell values must be finite".into()));
        }
        Ok(PiecewiseFn {
            breakpoints,
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(breakpoints.len(), values.len() + 1);
        PiecewiseFn {
            breakpoints,
            values,
        }
    }

    pub fn constant(c: f64) -> Self {
        PiecewiseFn {
            breakpoints: vec![0.0, 1.0],
            values: vec![c],
        }
    }

    /// `𝟙_{[a, b)}` for `0 ≤ a < b ≤ 1`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::Argument(format!("indicator of [{a}, {b}) is not in [0, 1]")));
        }
        let mut bp = vec![0.0];
        let mut vals = Vec::new();
        if a > 0.0 {
            bp.push(a);
            vals.push(0.0);
        }
        vals.push(1.0);
        if b < 1.0 {
            bp.push(b);
            vals.push(0.0);
        }
        bp.push(1.0);
        Ok(PiecewiseFn::from_parts_unchecked(bp, vals))
    }

    /// Piecewise-constant proxy of `f` on `cells` equal cells, sampled at
    /// cell midpoints (exact cell averages for affine `f`).
    pub fn sampled(cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Argument("proxy needs at least one cell".into()));
        }
        let h = 1.0 / cells as f64;
        let breakpoints: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let values = (0..cells).map(|i| f((i as f64 + 0.5) * h)).collect();
        PiecewiseFn::new(breakpoints, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    /// `(left, right, value)` for each cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1], v))
    }

    pub fn cell_index(&self, x: f64) -> usize {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        i.clamp(1, self.values.len()) - 1
    }

    /// Value at `x`; the last cell is closed at 1.
    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.cell_index(x)]
    }

    pub fn integral(&self) -> f64 {
        self.cells().map(|(a, b, v)| v * (b - a)).sum()
    }

    pub fn l1(&self) -> f64 {
        self.cells().map(|(a, b, v)| v.abs() * (b - a)).sum()
    }

    pub fn variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn bv_norm(&self) -> BvNorm {
        let variation = self.variation();
        let l1 = self.l1();
        BvNorm {
            variation,
            l1,
            bv: variation + l1,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        PiecewiseFn {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_values(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map_values(|v| v + c)
    }

    /// Applies `op` cellwise on the common refinement of both partitions.
    pub fn combine(&self, other: &PiecewiseFn, op: impl Fn(f64, f64) -> f64) -> Self {
        let breakpoints = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let mut values = Vec::with_capacity(breakpoints.len() - 1);
        let (mut i, mut j) = (0usize, 0usize);
        for w in breakpoints.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            while i + 1 < self.values.len() && self.breakpoints[i + 1] <= mid {
                i += 1;
            }
            while j + 1 < other.values.len() && other.breakpoints[j + 1] <= mid {
                j += 1;
            }
            values.push(op(self.values[i], other.values[j]));
        }
        PiecewiseFn {
            breakpoints,
            values,
        }
    }

    pub fn add(&self, other: &PiecewiseFn) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PiecewiseFn) -> Self {
        self.combine(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &PiecewiseFn) -> Self {
        self.combine(other, |a, b| a * b)
    }

    /// `∫ f·g dm` on the common refinement, without materializing it.
    pub fn integral_product(&self, other: &PiecewiseFn) -> f64 {
        let (mut i, mut j) = (0usize, 0usize);
        let mut left = 0.0;
        let mut total = 0.0;
        while i < self.values.len() && j < other.values.len() {
            let ri = self.breakpoints[i + 1];
            let rj = other.breakpoints[j + 1];
            let right = ri.min(rj);
            total += self.values[i] * other.values[j] * (right - left);
            left = right;
            if ri <= right {
                i += 1;
            }
            if rj <= right {
                j += 1;
            }
        }
        total
    }

    /// Merges neighbouring cells whose values agree to a relative `1e-15`,
    /// replacing them by their width-weighted average.
    pub fn simplify(&self) -> Self {
        let mut bp = vec![0.0];
        let mut vals: Vec<f64> = Vec::with_capacity(self.values.len());
        let mut widths: Vec<f64> = Vec::with_capacity(self.values.len());
        for (a, b, v) in self.cells() {
            if let (Some(last), Some(w)) = (vals.last_mut(), widths.last_mut()) {
                if (*last - v).abs() <= 1e-15 * last.abs().max(v.abs()) {
                    let nw = *w + (b - a);
                    if *last != v {
                        *last = (*last * *w + v * (b - a)) / nw;
                    }
                    *w = nw;
                    *bp.last_mut().unwrap() = b;
                    continue;
                }
            }
            vals.push(v);
            widths.push(b - a);
            bp.push(b);
        }
        PiecewiseFn {
            breakpoints: bp,
            values: vals,
        }
    }

    /// Writes `(breakpoint, value)` rows: each cell's left breakpoint with
    /// its value, then the closing breakpoint 1 repeating the last value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["breakpoint", "value"])
            .map_err(|e| Error::Serialize(e.to_string()))?;
        for (a, _, v) in self.cells() {
            w.write_record([a.to_string(), v.to_string()])
                .map_err(|e| Error::Serialize(e.to_string()))?;
        }
        w.write_record(["1".to_string(), self.values[self.values.len() - 1].to_string()])
            .map_err(|e| Error::Serialize(e.to_string()))?;
        w.flush()?;
        Ok(())
    }
}

/// Sorted union of two breakpoint lists, dropping points within
/// [`MERGE_TOL`] of the previous one. Both lists start at 0 and end at 1.
pub(crate) fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        push_point(&mut out, x);
    }
    finish_points(&mut out);
    out
}

/// Appends `x` unless it lies within [`MERGE_TOL`] of the last point.
pub(crate) fn push_point(out: &mut Vec<f64>, x: f64) {
    match out.last() {
        Some(&last) if x - last <= MERGE_TOL => {}
        _ => out.push(x),
    }
}

/// Ensures a sorted, deduplicated point list spans exactly `[0, 1]`.
pub(crate) fn finish_points(out: &mut Vec<f64>) {
    if out.is_empty() || out[0] != 0.0 {
        if let Some(first) = out.first_mut() {
            if *first <= MERGE_TOL {
                *first = 0.0;
            } else {
                out.insert(0, 0.0);
            }
        } else {
            out.push(0.0);
        }
    }
    while out.len() > 1 && 1.0 - out[out.len() - 1] <= MERGE_TOL {
        out.pop();
    }
    out.push(1.0);
}
