use super::interval_map::{IntervalMap, MERGE_TOL};
use super::partition::{composition_cells, DEFAULT_CELL_CAP};
use super::sequence::MapSequence;
use crate::error::{Error, Result};

/// An image union covers `[0, 1]` when its gaps total less than this.
pub const COVER_TOL: f64 = 1e-9;

/// Default cap on the total number of interval fragments tracked.
pub const DEFAULT_FRAGMENT_CAP: usize = 1 << 20;

/// Finite union of closed subintervals of `[0, 1]`, kept sorted and disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion {
    parts: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(mut parts: Vec<(f64, f64)>) -> Self {
        parts.retain(|p| p.1 >= p.0);
        parts.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (a, b) in parts {
            match merged.last_mut() {
                Some(last) if a <= last.1 + MERGE_TOL => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        IntervalUnion { parts: merged }
    }

    pub fn parts(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Total length of `[0, 1]` not covered by the union.
    pub fn uncovered(&self) -> f64 {
        let covered: f64 = self
            .parts
            .iter()
            .map(|&(a, b)| (b.min(1.0) - a.max(0.0)).max(0.0))
            .sum();
        (1.0 - covered).max(0.0)
    }

    pub fn covers_unit(&self) -> bool {
        self.uncovered() < COVER_TOL
    }

    /// Image of the union under `map`, branch by branch.
    pub fn image(&self, map: &IntervalMap) -> IntervalUnion {
        let mut out = Vec::new();
        for &(l, r) in &self.parts {
            for br in map.branches() {
                let lo = l.max(br.start());
                let hi = r.min(br.end());
                if hi - lo <= MERGE_TOL {
                    continue;
                }
                let (v1, v2) = (br.apply(lo), br.apply(hi));
                out.push((v1.min(v2).max(0.0), v1.max(v2).min(1.0)));
            }
        }
        IntervalUnion::new(out)
    }
}

/// Smallest `N ≤ max_steps` such that every cell of the partition of
/// `T_{m+1}^{m+n}` (with `m = block_start`) is mapped onto `[0, 1]` by
/// `T_{m+1}^{m+N}`; `None` when no such `N` exists within `max_steps`.
pub fn covering_horizon(
    seq: &MapSequence,
    block_start: usize,
    n: usize,
    max_steps: usize,
) -> Result<Option<usize>> {
    covering_horizon_with_caps(
        seq,
        block_start,
        n,
        max_steps,
        DEFAULT_CELL_CAP,
        DEFAULT_FRAGMENT_CAP,
    )
}

pub fn covering_horizon_with_caps(
    seq: &MapSequence,
    block_start: usize,
    n: usize,
    max_steps: usize,
    cell_cap: usize,
    fragment_cap: usize,
) -> Result<Option<usize>> {
    if n == 0 || max_steps == 0 {
        return Err(Error::Argument(
            "covering_horizon needs n ≥ 1 and max_steps ≥ 1".into(),
        ));
    }
    let cells = composition_cells(seq, block_start + 1, block_start + n, cell_cap)?;
    let mut images: Vec<IntervalUnion> = cells
        .iter()
        .map(|c| IntervalUnion::new(vec![(c.a, c.b)]))
        .collect();
    for step in 1..=max_steps {
        let map = seq.map(block_start + step)?;
        images = images.iter().map(|u| u.image(&map)).collect();
        let fragments: usize = images.iter().map(IntervalUnion::len).sum();
        if fragments > fragment_cap {
            return Err(Error::resource("covering image fragments", fragment_cap));
        }
        if images.iter().all(IntervalUnion::covers_unit) {
            return Ok(Some(step));
        }
    }
    Ok(None)
}
