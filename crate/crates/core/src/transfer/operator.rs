use std::sync::Arc;

use crate::error::{Error, Result};
use crate::maps::{IntervalMap, MapSequence, DEFAULT_CELL_CAP};

use super::grid::{GridFn, UlamMatrix, DEFAULT_GRID_BINS};
use super::piecewise::{finish_points, push_point, PiecewiseFn};

/// Exact transfer operator of an affine-branched map acting on `f`.
pub fn apply_transfer(map: &IntervalMap, f: &PiecewiseFn) -> Result<PiecewiseFn> {
    apply_transfer_with_cap(map, f, DEFAULT_CELL_CAP)
}

pub fn apply_transfer_with_cap(
    map: &IntervalMap,
    f: &PiecewiseFn,
    cap: usize,
) -> Result<PiecewiseFn> {
    // One list of (image_lo, image_hi, value / |slope|) per branch, sorted
    // by position in the image.
    let mut pieces: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(map.branches().len());
    let mut points: Vec<f64> = Vec::new();
    for br in map.branches() {
        let (s, c) = br.affine_coefficients().ok_or_else(|| {
            Error::Unsupported(format!(
                "exact transfer needs affine branches; map {} has a smooth branch",
                map.label()
            ))
        })?;
        let (a, b) = (br.start(), br.end());
        let (bp, vals) = (f.breakpoints(), f.values());
        let mut list = Vec::new();
        for i in f.cell_index(a)..vals.len() {
            if bp[i] >= b {
                break;
            }
            let v = vals[i];
            let (l, r) = (bp[i].max(a), bp[i + 1].min(b));
            if r <= l {
                continue;
            }
            let (y1, y2) = (s.mul_add(l, c), s.mul_add(r, c));
            let (lo, hi) = (y1.min(y2).max(0.0), y1.max(y2).min(1.0));
            if hi <= lo {
                continue;
            }
            list.push((lo, hi, v / s.abs()));
            points.push(lo);
            points.push(hi);
        }
        if s < 0.0 {
            list.reverse();
        }
        pieces.push(list);
    }
    points.sort_unstable_by(f64::total_cmp);
    let mut breakpoints = Vec::with_capacity(points.len() / 2 + 2);
    for p in points {
        push_point(&mut breakpoints, p);
    }
    finish_points(&mut breakpoints);
    if breakpoints.len() - 1 > cap {
        return Err(Error::resource("transfer output cells", cap));
    }
    let mut cursor = vec![0usize; pieces.len()];
    let mut values = Vec::with_capacity(breakpoints.len() - 1);
    for w in breakpoints.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let mut sum = 0.0;
        for (list, p) in pieces.iter().zip(cursor.iter_mut()) {
            while *p < list.len() && list[*p].1 <= mid {
                *p += 1;
            }
            if let Some(&(lo, _, v)) = list.get(*p) {
                if lo <= mid {
                    sum += v;
                }
            }
        }
        values.push(sum);
    }
    Ok(PiecewiseFn::from_parts_unchecked(breakpoints, values).simplify())
}

/// `g ∘ T` as a piecewise-constant function: on each branch, the cells of
/// `g` inside the branch image pulled back through the branch inverse.
pub fn pullback(map: &IntervalMap, g: &PiecewiseFn) -> PiecewiseFn {
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    for br in map.branches() {
        let (lo, hi) = br.image();
        let mut pts: Vec<f64> = g
            .breakpoints()
            .iter()
            .copied()
            .filter(|&y| y > lo && y < hi)
            .map(|y| br.inverse(y).clamp(br.start(), br.end()))
            .collect();
        pts.push(br.start());
        pts.push(br.end());
        pts.sort_unstable_by(f64::total_cmp);
        for w in pts.windows(2) {
            if w[1] - w[0] <= 0.0 {
                continue;
            }
            let before = breakpoints.len();
            push_point(&mut breakpoints, w[0]);
            if breakpoints.len() == before && !values.is_empty() {
                // Merged with the previous cell's start: overwrite its value.
                values.pop();
            }
            values.push(g.eval(fold_unit(br.apply(0.5 * (w[0] + w[1])))));
        }
    }
    breakpoints.push(1.0);
    PiecewiseFn::from_parts_unchecked(breakpoints, values)
}

fn fold_unit(y: f64) -> f64 {
    y.clamp(0.0, crate::maps::BELOW_ONE)
}

/// Iterates transfer operators along a sequence, using the exact
/// representation while it fits and the Ulam grid otherwise.
pub struct Propagator<'a> {
    seq: &'a MapSequence,
    cell_cap: usize,
    bins: usize,
    cache: Option<(String, Arc<UlamMatrix>)>,
    grid_steps: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(seq: &'a MapSequence) -> Self {
        Self::with_limits(seq, DEFAULT_CELL_CAP, DEFAULT_GRID_BINS)
    }

    pub fn with_limits(seq: &'a MapSequence, cell_cap: usize, bins: usize) -> Self {
        Propagator {
            seq,
            cell_cap,
            bins,
            cache: None,
            grid_steps: 0,
        }
    }

    pub fn sequence(&self) -> &MapSequence {
        self.seq
    }

    /// Number of steps so far that went through the Ulam grid.
    pub fn grid_steps(&self) -> usize {
        self.grid_steps
    }

    /// `P_index f`.
    pub fn step(&mut self, index: usize, f: &PiecewiseFn) -> Result<PiecewiseFn> {
        let map = self.seq.map(index)?;
        if map.is_affine() && f.cell_count() <= self.cell_cap {
            match apply_transfer_with_cap(&map, f, self.cell_cap) {
                Err(Error::Resource { .. }) => {}
                other => return other,
            }
        }
        self.grid_steps += 1;
        let op = match &self.cache {
            Some((label, op)) if label == map.label() => op.clone(),
            _ => {
                let op = Arc::new(UlamMatrix::new(&map, self.bins)?);
                self.cache = Some((map.label().to_string(), op.clone()));
                op
            }
        };
        Ok(op.apply(&GridFn::project(f, self.bins)?)?.to_piecewise())
    }

    /// `P_{start}^{end} f = P_end ⋯ P_start f`; identity when `end < start`.
    pub fn run(&mut self, start: usize, end: usize, f: &PiecewiseFn) -> Result<PiecewiseFn> {
        let mut g = f.clone();
        for i in start..=end {
            g = self.step(i, &g)?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_diff(f: &PiecewiseFn, g: &PiecewiseFn) -> f64 {
        f.sub(g).sup_abs()
    }

    #[test]
    fn examples() {
        let two = IntervalMap::beta(2.0).unwrap();
        let one = PiecewiseFn::constant(1.0);
        assert_eq!(sup_diff(&apply_transfer(&two, &one).unwrap(), &one), 0.0);
        let left = PiecewiseFn::indicator(0.0, 0.5).unwrap();
        let out = apply_transfer(&two, &left).unwrap();
        assert_eq!(sup_diff(&out, &PiecewiseFn::constant(0.5)), 0.0);
        let three = IntervalMap::beta(3.0).unwrap();
        assert!(sup_diff(&apply_transfer(&three, &one).unwrap(), &one) < 1e-15);
    }

    #[test]
    fn non_integer_beta_density_matches_preimage_sum() {
        let map = IntervalMap::beta(1.9).unwrap();
        let f = PiecewiseFn::sampled(7, |x| 1.0 + x * x).unwrap();
        let out = apply_transfer(&map, &f).unwrap();
        for i in 0..200 {
            let x = (i as f64 + 0.37) / 200.0;
            let oracle: f64 = map
                .preimages(x)
                .unwrap()
                .iter()
                .map(|&(y, d)| f.eval(y) / d)
                .sum();
            assert!((out.eval(x) - oracle).abs() < 1e-12, "x = {x}");
        }
        assert!((out.integral() - f.integral()).abs() < 1e-12);
    }

    #[test]
    fn decreasing_branches_are_handled() {
        let tent = IntervalMap::new(
            "tent",
            vec![
                crate::maps::Branch::affine(0.0, 0.5, 2.0, 0.0).unwrap(),
                crate::maps::Branch::affine(0.5, 1.0, -2.0, 2.0).unwrap(),
            ],
        )
        .unwrap();
        let f = PiecewiseFn::indicator(0.0, 0.25).unwrap();
        let out = apply_transfer(&tent, &f).unwrap();
        assert!((out.eval(0.2) - 0.5).abs() < 1e-15);
        assert!(out.eval(0.7).abs() < 1e-15);
    }

    #[test]
    fn smooth_maps_are_rejected_on_the_exact_path() {
        let map = IntervalMap::perturbed_doubling(0.1).unwrap();
        let err = apply_transfer(&map, &PiecewiseFn::constant(1.0)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn cap_is_a_resource_error_and_propagator_falls_back() {
        let map = IntervalMap::beta(1.9).unwrap();
        let f = PiecewiseFn::sampled(64, |x| x).unwrap();
        let err = apply_transfer_with_cap(&map, &f, 8).unwrap_err();
        assert!(matches!(err, Error::Resource { cap: 8, .. }));

        let seq = MapSequence::constant(map);
        let mut prop = Propagator::with_limits(&seq, 8, 256);
        let g = prop.step(1, &f).unwrap();
        assert_eq!(prop.grid_steps(), 1);
        assert_eq!(g.cell_count(), 256);
        assert!((g.integral() - f.integral()).abs() < 1e-12);
    }

    #[test]
    fn smooth_sequence_runs_on_the_grid() {
        let seq = MapSequence::constant(IntervalMap::perturbed_doubling(0.1).unwrap());
        let mut prop = Propagator::with_limits(&seq, DEFAULT_CELL_CAP, 1024);
        let rho = prop.run(1, 5, &PiecewiseFn::constant(1.0)).unwrap();
        assert_eq!(prop.grid_steps(), 5);
        assert!((rho.integral() - 1.0).abs() < 1e-12);
        assert!(rho.min() > 0.0);
    }
}
