use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::interval_map::{IntervalMap, MERGE_TOL};
use super::sequence::MapSequence;
use crate::error::{Error, Result};

/// Default cap on the number of cells a composition partition may hold.
pub const DEFAULT_CELL_CAP: usize = 1 << 20;

/// Monotonicity partition of a composition `T_start^end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    breakpoints: Vec<f64>,
    start: usize,
    end: usize,
}

impl Partition {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn cell_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// `(start, end)` of the composition this partition refines.
    pub fn provenance(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    /// Largest cell width.
    pub fn diameter(&self) -> f64 {
        self.cells().map(|(a, b)| b - a).fold(0.0, f64::max)
    }
}

/// A cell of a composition partition together with the composition's
/// behavior on it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CompositionCell {
    pub a: f64,
    pub b: f64,
    pub image_lo: f64,
    pub image_hi: f64,
    pub increasing: bool,
    /// `(slope, intercept)` when every map so far is affine on this cell.
    pub affine: Option<(f64, f64)>,
}

impl CompositionCell {
    fn identity() -> Self {
        CompositionCell {
            a: 0.0,
            b: 1.0,
            image_lo: 0.0,
            image_hi: 1.0,
            increasing: true,
            affine: Some((1.0, 0.0)),
        }
    }
}

/// Evaluates a composition at a point interior to one of its cells.
pub(crate) fn compose(maps: &[&IntervalMap], x: f64) -> f64 {
    maps.iter().fold(x, |y, m| m.eval_unchecked(y))
}

/// Preimage of `y` under the composition restricted to `cell`.
fn cell_preimage(cell: &CompositionCell, maps: &[&IntervalMap], y: f64) -> f64 {
    if y <= cell.image_lo + MERGE_TOL * 1e-3 {
        return if cell.increasing { cell.a } else { cell.b };
    }
    if y >= cell.image_hi - MERGE_TOL * 1e-3 {
        return if cell.increasing { cell.b } else { cell.a };
    }
    if let Some((s, c)) = cell.affine {
        return ((y - c) / s).clamp(cell.a, cell.b);
    }
    let (mut lo, mut hi) = (cell.a, cell.b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = compose(maps, mid);
        if (v < y) == cell.increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Refines composition cells of `maps[..k]` by the next map `maps[k]`.
fn refine(
    cells: Vec<CompositionCell>,
    maps: &[&IntervalMap],
    next: &IntervalMap,
    cap: usize,
) -> Result<Vec<CompositionCell>> {
    let mut out = Vec::with_capacity(cells.len() * next.branches().len());
    for cell in &cells {
        let first = out.len();
        for br in next.branches() {
            let lo = cell.image_lo.max(br.start());
            let hi = cell.image_hi.min(br.end());
            if hi - lo <= MERGE_TOL {
                continue;
            }
            let xl = cell_preimage(cell, maps, lo);
            let xh = cell_preimage(cell, maps, hi);
            let (a, b) = if cell.increasing { (xl, xh) } else { (xh, xl) };
            let (v1, v2) = (br.apply(lo), br.apply(hi));
            let affine = match (cell.affine, br.affine_coefficients()) {
                (Some((s, c)), Some((bs, bc))) => Some((bs * s, bs.mul_add(c, bc))),
                _ => None,
            };
            out.push(CompositionCell {
                a,
                b,
                image_lo: v1.min(v2).max(0.0),
                image_hi: v1.max(v2).min(1.0),
                increasing: cell.increasing == br.is_increasing(),
                affine,
            });
            if out.len() > cap {
                return Err(Error::resource("composition partition cells", cap));
            }
        }
        if !cell.increasing {
            out[first..].reverse();
        }
    }
    Ok(out)
}

/// Cells of the monotonicity partition of `T_start^end` with the
/// composition's image and (when affine) its coefficients on each cell.
pub(crate) fn composition_cells(
    seq: &MapSequence,
    start: usize,
    end: usize,
    cap: usize,
) -> Result<Vec<CompositionCell>> {
    if start == 0 || end < start {
        return Err(Error::Argument(format!(
            "composition range {start}..={end} must satisfy 1 ≤ start ≤ end"
        )));
    }
    let owned = seq.maps(start, end)?;
    let maps: Vec<&IntervalMap> = owned.iter().map(|m| m.as_ref()).collect();
    let mut cells = vec![CompositionCell::identity()];
    for k in 0..maps.len() {
        cells = refine(cells, &maps[..k], maps[k], cap)?;
    }
    Ok(cells)
}

/// Monotonicity partition of `T_start^end` (one-based, inclusive).
pub fn composition_partition(seq: &MapSequence, start: usize, end: usize) -> Result<Partition> {
    composition_partition_with_cap(seq, start, end, DEFAULT_CELL_CAP)
}

pub fn composition_partition_with_cap(
    seq: &MapSequence,
    start: usize,
    end: usize,
    cap: usize,
) -> Result<Partition> {
    let cells = composition_cells(seq, start, end, cap)?;
    let mut breakpoints = Vec::with_capacity(cells.len() + 1);
    breakpoints.push(0.0);
    for cell in &cells[1..] {
        if cell.a - breakpoints[breakpoints.len() - 1] > MERGE_TOL {
            breakpoints.push(cell.a);
        }
    }
    if 1.0 - breakpoints[breakpoints.len() - 1] <= MERGE_TOL && breakpoints.len() > 1 {
        breakpoints.pop();
    }
    breakpoints.push(1.0);
    Ok(Partition {
        breakpoints,
        start,
        end,
    })
}

/// Value and derivative of `T_1^n` along the branch path of `x`.
fn value_and_derivative(maps: &[&IntervalMap], x: f64) -> (f64, f64) {
    maps.iter().fold((x, 1.0), |(y, d), m| {
        let br = m.branch_at(y);
        (super::interval_map::fold_into_unit(br.apply(y)), d * br.derivative(y))
    })
}

/// Largest sampled distortion ratio
/// `|D(x) - D(y)| / (|D(x)|·|T_1^n x - T_1^n y|)` over same-cell pairs,
/// with `D = (T_1^n)'`.
pub fn distortion_bound(seq: &MapSequence, n: usize, sample_pairs: usize) -> Result<f64> {
    if sample_pairs == 0 {
        return Err(Error::Argument("distortion_bound needs sample_pairs ≥ 1".into()));
    }
    if n == 0 {
        return Err(Error::Argument("distortion_bound needs n ≥ 1".into()));
    }
    let cells = composition_cells(seq, 1, n, DEFAULT_CELL_CAP)?;
    let owned = seq.first(n)?;
    let maps: Vec<&IntervalMap> = owned.iter().map(|m| m.as_ref()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0D15_7027);
    let mut worst = 0.0f64;
    for _ in 0..sample_pairs {
        let cell = &cells[rng.gen_range(0..cells.len())];
        let w = cell.b - cell.a;
        let x = cell.a + w * rng.gen_range(0.05..0.95);
        let y = cell.a + w * rng.gen_range(0.05..0.95);
        let (tx, dx) = value_and_derivative(&maps, x);
        let (ty, dy) = value_and_derivative(&maps, y);
        if tx == ty {
            continue;
        }
        worst = worst.max((dx - dy).abs() / (dx.abs() * (tx - ty).abs()));
    }
    Ok(worst)
}

/// Sums over the cells `I` of `T_1^n`'s partition of `sup_I 1/|(T_1^n)'|`
/// and of `V_I(1/|(T_1^n)'|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseDerivativeSums {
    pub sup_sum: f64,
    pub var_sum: f64,
}

/// Points per cell used to sample `1/|(T_1^n)'|` on non-affine compositions.
const CELL_SAMPLES: usize = 33;

pub fn inverse_derivative_sums(seq: &MapSequence, n: usize) -> Result<InverseDerivativeSums> {
    if n == 0 {
        return Err(Error::Argument("inverse_derivative_sums needs n ≥ 1".into()));
    }
    if seq.is_affine(n)? {
        return Ok(InverseDerivativeSums {
            sup_sum: affine_inverse_derivative_sum(seq, n)?,
            var_sum: 0.0,
        });
    }
    let cells = composition_cells(seq, 1, n, DEFAULT_CELL_CAP)?;
    let owned = seq.first(n)?;
    let maps: Vec<&IntervalMap> = owned.iter().map(|m| m.as_ref()).collect();
    let mut sup_sum = 0.0;
    let mut var_sum = 0.0;
    for cell in &cells {
        let w = cell.b - cell.a;
        let samples: Vec<f64> = (0..CELL_SAMPLES)
            .map(|i| {
                let x = cell.a + w * (i as f64 + 0.5) / CELL_SAMPLES as f64;
                1.0 / value_and_derivative(&maps, x).1.abs()
            })
            .collect();
        sup_sum += samples.iter().copied().fold(0.0, f64::max);
        var_sum += samples.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>();
    }
    Ok(InverseDerivativeSums { sup_sum, var_sum })
}

/// For affine compositions `1/|(T_1^n)'|` is constant on each cell, and
/// cells sharing an image interval refine identically afterwards. Grouping
/// cells by image keeps the work proportional to the number of distinct
/// images rather than the number of cells.
fn affine_inverse_derivative_sum(seq: &MapSequence, n: usize) -> Result<f64> {
    let mut states: Vec<(f64, f64, f64)> = vec![(0.0, 1.0, 1.0)];
    for map in seq.first(n)? {
        let mut next = Vec::with_capacity(states.len() * map.branches().len());
        for &(lo, hi, weight) in &states {
            for br in map.branches() {
                let l = lo.max(br.start());
                let h = hi.min(br.end());
                if h - l <= MERGE_TOL {
                    continue;
                }
                let (v1, v2) = (br.apply(l), br.apply(h));
                next.push((
                    v1.min(v2).max(0.0),
                    v1.max(v2).min(1.0),
                    weight / br.min_expansion(),
                ));
            }
        }
        next.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(next.len());
        for s in next {
            match merged.last_mut() {
                Some(m) if (m.0 - s.0).abs() <= MERGE_TOL && (m.1 - s.1).abs() <= MERGE_TOL => {
                    m.2 += s.2
                }
                _ => merged.push(s),
            }
        }
        states = merged;
    }
    Ok(states.iter().map(|s| s.2).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force refinement: cut `[0,1)` at every point whose orbit hits a
    /// branch boundary, found by scanning a fine grid for branch-index changes.
    fn scanned_breakpoints(seq: &MapSequence, n: usize, grid: usize) -> Vec<f64> {
        let maps = seq.first(n).unwrap();
        let path = |x: f64| -> Vec<usize> {
            let mut y = x;
            maps.iter()
                .map(|m| {
                    let i = m.branch_index(y);
                    y = m.eval(y).unwrap();
                    i
                })
                .collect()
        };
        let mut pts = vec![0.0];
        let mut prev = path(0.5 / grid as f64);
        for i in 1..grid {
            let x = (i as f64 + 0.5) / grid as f64;
            let cur = path(x);
            if cur != prev {
                pts.push(i as f64 / grid as f64);
            }
            prev = cur;
        }
        pts.push(1.0);
        pts
    }

    #[test]
    fn doubling_composition_is_dyadic() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        for n in 1..=8 {
            let p = composition_partition(&seq, 1, n).unwrap();
            let oracle = scanned_breakpoints(&seq, n, 1 << 12);
            assert_eq!(p.cell_count(), 1 << n);
            assert_eq!(oracle.len(), p.breakpoints().len());
            for (a, b) in p.breakpoints().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_map_partition_is_branch_partition() {
        let seq = MapSequence::constant_beta(2.5).unwrap();
        let p = composition_partition(&seq, 1, 1).unwrap();
        let expected = IntervalMap::beta(2.5).unwrap().breakpoints();
        assert_eq!(p.breakpoints().len(), expected.len());
        for (a, b) in p.breakpoints().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p.provenance(), (1, 1));
    }

    #[test]
    fn two_three_composition_has_six_equal_cells() {
        let seq = MapSequence::beta_list(&[2.0, 3.0]).unwrap();
        let p = composition_partition(&seq, 1, 2).unwrap();
        assert_eq!(p.cell_count(), 6);
        for (a, b) in p.cells() {
            assert!((b - a - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_integer_beta_matches_scan() {
        let seq = MapSequence::constant_beta(1.7).unwrap();
        let p = composition_partition(&seq, 1, 5).unwrap();
        let oracle = scanned_breakpoints(&seq, 5, 1 << 16);
        assert_eq!(p.breakpoints().len(), oracle.len());
        for (a, b) in p.breakpoints().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1.0 / (1 << 16) as f64);
        }
    }

    #[test]
    fn smooth_composition_matches_scan() {
        let seq = MapSequence::constant(IntervalMap::perturbed_doubling(0.3).unwrap());
        let p = composition_partition(&seq, 1, 3).unwrap();
        let oracle = scanned_breakpoints(&seq, 3, 1 << 16);
        assert_eq!(p.cell_count(), 8);
        for (a, b) in p.breakpoints().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1.0 / (1 << 16) as f64);
        }
    }

    #[test]
    fn cap_is_a_resource_error() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let err = composition_partition_with_cap(&seq, 1, 12, 1000).unwrap_err();
        assert!(matches!(err, Error::Resource { cap: 1000, .. }));
        assert!(composition_partition(&seq, 3, 2).is_err());
    }

    #[test]
    fn distortion_vanishes_for_affine_sequences() {
        let seq = MapSequence::random_beta(2.0, 0.3, 5).unwrap();
        assert_eq!(distortion_bound(&seq, 10, 500).unwrap(), 0.0);
        let seq = MapSequence::beta_list(&[2.0, 2.7, 3.0]).unwrap();
        assert_eq!(distortion_bound(&seq, 1, 200).unwrap(), 0.0);
        assert!(distortion_bound(&seq, 1, 0).is_err());
    }

    #[test]
    fn distortion_of_smooth_map_respects_curvature_bound() {
        let eps = 0.2;
        let map = IntervalMap::perturbed_doubling(eps).unwrap();
        let bound = map.max_curvature() / map.min_expansion().powi(2);
        let seq = MapSequence::constant(map);
        let d = distortion_bound(&seq, 1, 2000).unwrap();
        assert!(d > 0.0 && d <= bound, "distortion {d} vs bound {bound}");
    }

    #[test]
    fn inverse_derivative_sum_examples() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        for n in 1..=20 {
            let s = inverse_derivative_sums(&seq, n).unwrap();
            assert!((s.sup_sum - 1.0).abs() < 1e-14);
            assert_eq!(s.var_sum, 0.0);
        }
        let s = inverse_derivative_sums(&MapSequence::constant_beta(3.0).unwrap(), 2).unwrap();
        assert!((s.sup_sum - 1.0).abs() < 1e-14);
        let s = inverse_derivative_sums(&MapSequence::beta_list(&[2.0, 3.0]).unwrap(), 2).unwrap();
        assert!((s.sup_sum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn grouped_sum_matches_cell_enumeration() {
        let seq = MapSequence::random_beta(1.8, 0.3, 11).unwrap();
        for n in 1..=8 {
            let cells = composition_cells(&seq, 1, n, DEFAULT_CELL_CAP).unwrap();
            let direct: f64 = cells.iter().map(|c| 1.0 / c.affine.unwrap().0.abs()).sum();
            let grouped = inverse_derivative_sums(&seq, n).unwrap().sup_sum;
            assert!((direct - grouped).abs() < 1e-12, "n={n}: {direct} vs {grouped}");
        }
    }

    #[test]
    fn smooth_inverse_derivative_sums_are_positive_and_bounded() {
        let seq = MapSequence::constant(IntervalMap::perturbed_doubling(0.2).unwrap());
        let s = inverse_derivative_sums(&seq, 4).unwrap();
        assert!(s.var_sum > 0.0);
        assert!(s.sup_sum > 0.5 && s.sup_sum < 3.0);
    }
}
