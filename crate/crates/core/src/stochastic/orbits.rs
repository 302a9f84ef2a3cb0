use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{IntervalMap, MapSequence};
use crate::numeric::Dd;

/// Scale of the per-step perturbation added below the double-double
/// resolution, which keeps low-order bits random once the initial
/// point's own bits have been shifted out.
const DITHER_SCALE: f64 = 1.0 / (1u128 << 102) as f64;

/// RNG for orbit `index` of an experiment: independent of evaluation order.
pub fn orbit_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform initial point of orbit `index`, to roughly 106 bits.
fn initial_state(rng: &mut ChaCha8Rng) -> Dd {
    // `gen` yields multiples of 2^-53; the second draw fills the next 53 bits.
    let hi: f64 = rng.gen();
    let lo: f64 = rng.gen::<f64>() * f64::EPSILON / 2.0;
    Dd::from_sum(hi, lo)
}

/// Double-double state seeded from a given f64 point with a random tail.
pub(crate) fn seeded_state(x: f64, rng: &mut ChaCha8Rng) -> Dd {
    let spacing = if x > 0.0 { f64::from_bits(x.to_bits() + 1) - x } else { 2f64.powi(-60) };
    Dd::from_sum(x, rng.gen::<f64>() * 0.5 * spacing)
}

/// Fills `out` with `x_0, …, x_{len−1}` along `maps`, starting from `state`.
pub(crate) fn fill_orbit(maps: &[Arc<IntervalMap>], mut state: Dd, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let len = out.len();
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = state.hi;
        if k + 1 < len {
            state = maps[k].eval_dd(state);
            let u: f64 = rng.gen();
            let next = state.add_small((u - 0.5) * DITHER_SCALE);
            state = if next.hi < 0.0 || next.hi >= 1.0 { state } else { next };
        }
    }
}

/// Evaluates `f` on `m_samples` orbits `(x_0, …, x_{n−1})` with uniform
/// initial points, in parallel, returning results in orbit order.
pub fn map_orbits<R, F>(seq: &MapSequence, n: usize, m_samples: usize, seed: u64, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&[f64]) -> R + Sync,
{
    if n == 0 || m_samples == 0 {
        return Err(Error::Argument("orbit sampling needs n ≥ 1 and m_samples ≥ 1".into()));
    }
    let maps = seq.first(n.saturating_sub(1))?;
    Ok((0..m_samples)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, i| {
                let mut rng = orbit_rng(seed, i as u64);
                let state = initial_state(&mut rng);
                fill_orbit(&maps, state, &mut rng, buf);
                f(buf)
            },
        )
        .collect())
}

/// Orbits per block in [`fold_orbits`].
pub const FOLD_BLOCK: usize = 256;

/// Folds orbits into per-block accumulators of [`FOLD_BLOCK`] consecutive
/// orbit indices, returned in block order so that merging them
/// sequentially is independent of the worker count.
pub fn fold_orbits<A, I, F>(
    seq: &MapSequence,
    n: usize,
    m_samples: usize,
    seed: u64,
    init: I,
    fold: F,
) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &[f64]) + Sync,
{
    if n == 0 || m_samples == 0 {
        return Err(Error::Argument("orbit sampling needs n ≥ 1 and m_samples ≥ 1".into()));
    }
    let maps = seq.first(n.saturating_sub(1))?;
    let blocks = m_samples.div_ceil(FOLD_BLOCK);
    Ok((0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let mut buf = vec![0.0; n];
            for i in b * FOLD_BLOCK..((b + 1) * FOLD_BLOCK).min(m_samples) {
                let mut rng = orbit_rng(seed, i as u64);
                let state = initial_state(&mut rng);
                fill_orbit(&maps, state, &mut rng, &mut buf);
                fold(&mut acc, &buf);
            }
            acc
        })
        .collect())
}

/// Seeded `M × n` array of orbit values.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitEnsemble {
    pub seed: u64,
    pub n: usize,
    pub m_samples: usize,
    points: Vec<f64>,
}

impl OrbitEnsemble {
    pub fn orbit(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn orbits(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.n)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// `m_samples` orbits of length `n` from uniform initial points.
pub fn sample_orbits(seq: &MapSequence, n: usize, m_samples: usize, seed: u64) -> Result<OrbitEnsemble> {
    let rows = map_orbits(seq, n, m_samples, seed, |o| o.to_vec())?;
    Ok(OrbitEnsemble {
        seed,
        n,
        m_samples,
        points: rows.concat(),
    })
}

/// Orbit `x_0, …, x_{n−1}` of a given point, with its tail bits below
/// f64 resolution drawn from `seed`.
pub fn orbit_from(seq: &MapSequence, x: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("point {x} is outside [0, 1)")));
    }
    let maps = seq.first(n.saturating_sub(1))?;
    let mut rng = orbit_rng(seed, 0);
    let state = seeded_state(x, &mut rng);
    let mut out = vec![0.0; n];
    fill_orbit(&maps, state, &mut rng, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensembles_are_reproducible_and_uniform_at_start() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let a = sample_orbits(&seq, 1, 10, 42).unwrap();
        let b = sample_orbits(&seq, 1, 10, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.points().iter().all(|x| (0.0..1.0).contains(x)));
        let c = sample_orbits(&seq, 1, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn short_orbits_agree_with_plain_iteration() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let e = sample_orbits(&seq, 3, 1, 9).unwrap();
        let o = e.orbit(0);
        let plain = seq.orbit(o[0], 2).unwrap();
        for k in 0..3 {
            assert!((o[k] - plain[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_orbits_do_not_collapse() {
        let seq = MapSequence::constant_beta(2.0).unwrap();
        let means = map_orbits(&seq, 2000, 64, 1, |o| o[1000..].iter().sum::<f64>() / 1000.0).unwrap();
        for m in means {
            assert!((m - 0.5).abs() < 0.1, "tail mean {m}");
        }
        // Step 53 exposes exactly the second draw of the initial state.
        let at53 = map_orbits(&seq, 54, 4000, 2, |o| o[53]).unwrap();
        let mean = at53.iter().sum::<f64>() / 4000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean at step 53: {mean}");
        let o = orbit_from(&seq, 0.25, 500, 3).unwrap();
        assert!(o[400..].iter().any(|&x| x > 0.1));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let seq = MapSequence::random_beta(2.0, 0.1, 4).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_orbits(&seq, 50, 200, 7).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
