use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::interval_map::IntervalMap;
use crate::error::{Error, Result};

/// Text-config description of a map sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    ConstantBeta { beta: f64 },
    /// `β_n` drawn independently and uniformly from `[center - radius, center + radius]`.
    RandomBeta { center: f64, radius: f64, seed: u64 },
    Periodic { betas: Vec<f64> },
    Explicit { betas: Vec<f64> },
}

impl SequenceSpec {
    pub fn build(&self) -> Result<MapSequence> {
        match self {
            SequenceSpec::ConstantBeta { beta } => {
                Ok(MapSequence::constant(IntervalMap::beta(*beta)?))
            }
            SequenceSpec::RandomBeta {
                center,
                radius,
                seed,
            } => MapSequence::random_beta(*center, *radius, *seed),
            SequenceSpec::Periodic { betas } => MapSequence::periodic(
                betas
                    .iter()
                    .map(|&b| IntervalMap::beta(b))
                    .collect::<Result<_>>()?,
            ),
            SequenceSpec::Explicit { betas } => MapSequence::explicit(
                betas
                    .iter()
                    .map(|&b| IntervalMap::beta(b))
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

#[derive(Debug, Clone)]
enum Generator {
    Cycle(Vec<Arc<IntervalMap>>),
    List(Vec<Arc<IntervalMap>>),
    RandomBeta { center: f64, radius: f64, seed: u64 },
}

/// A reproducible sequence `(T_n)_{n ≥ 1}` of interval maps.
///
/// Indices are one-based: `map(1)` is the first map applied.
#[derive(Debug, Clone)]
pub struct MapSequence {
    generator: Generator,
}

impl MapSequence {
    pub fn constant(map: IntervalMap) -> Self {
        MapSequence {
            generator: Generator::Cycle(vec![Arc::new(map)]),
        }
    }

    pub fn constant_beta(beta: f64) -> Result<Self> {
        Ok(Self::constant(IntervalMap::beta(beta)?))
    }

    /// Repeats `maps` forever, starting with `maps[0]` at index 1.
    pub fn periodic(maps: Vec<IntervalMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Argument("periodic sequence needs a map".into()));
        }
        Ok(MapSequence {
            generator: Generator::Cycle(maps.into_iter().map(Arc::new).collect()),
        })
    }

    /// A finite sequence whose horizon is the list length.
    pub fn explicit(maps: Vec<IntervalMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Argument("explicit sequence needs a map".into()));
        }
        Ok(MapSequence {
            generator: Generator::List(maps.into_iter().map(Arc::new).collect()),
        })
    }

    pub fn beta_list(betas: &[f64]) -> Result<Self> {
        Self::explicit(
            betas
                .iter()
                .map(|&b| IntervalMap::beta(b))
                .collect::<Result<_>>()?,
        )
    }

    pub fn random_beta(center: f64, radius: f64, seed: u64) -> Result<Self> {
        if !(radius >= 0.0) || !(center - radius > 1.0) || !(center + radius).is_finite() {
            return Err(Error::Argument(format!(
                "random beta range [{}, {}] must lie in (1, ∞)",
                center - radius,
                center + radius
            )));
        }
        Ok(MapSequence {
            generator: Generator::RandomBeta {
                center,
                radius,
                seed,
            },
        })
    }

    /// Number of maps available, `None` for unbounded sequences.
    pub fn horizon(&self) -> Option<usize> {
        match &self.generator {
            Generator::List(maps) => Some(maps.len()),
            _ => None,
        }
    }

    /// β used at `index` by a random-β sequence.
    fn random_beta_at(center: f64, radius: f64, seed: u64, index: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let u: f64 = rng.gen();
        center + radius * (2.0 * u - 1.0)
    }

    /// The map `T_index`.
    pub fn map(&self, index: usize) -> Result<Arc<IntervalMap>> {
        if index == 0 {
            return Err(Error::Argument("map indices start at 1".into()));
        }
        match &self.generator {
            Generator::Cycle(maps) => Ok(maps[(index - 1) % maps.len()].clone()),
            Generator::List(maps) => maps.get(index - 1).cloned().ok_or_else(|| {
                Error::Argument(format!(
                    "index {index} exceeds the sequence horizon {}",
                    maps.len()
                ))
            }),
            Generator::RandomBeta {
                center,
                radius,
                seed,
            } => Ok(Arc::new(IntervalMap::beta(Self::random_beta_at(
                *center, *radius, *seed, index,
            ))?)),
        }
    }

    /// Maps `T_start, …, T_end` (inclusive); empty when `end < start`.
    pub fn maps(&self, start: usize, end: usize) -> Result<Vec<Arc<IntervalMap>>> {
        (start..=end).map(|i| self.map(i)).collect()
    }

    /// Maps `T_1, …, T_n`.
    pub fn first(&self, n: usize) -> Result<Vec<Arc<IntervalMap>>> {
        self.maps(1, n)
    }

    /// `(x, T_1^1 x, …, T_1^n x)`.
    pub fn orbit(&self, x: f64, n: usize) -> Result<Vec<f64>> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain(format!("point {x} is outside [0, 1)")));
        }
        let mut out = Vec::with_capacity(n + 1);
        out.push(x);
        let mut y = x;
        for map in self.first(n)? {
            y = map.eval(y)?;
            out.push(y);
        }
        Ok(out)
    }

    /// Class-level lower bound on `inf|T_k'|` over `k ≤ n`.
    pub fn min_expansion(&self, n: usize) -> Result<f64> {
        match &self.generator {
            Generator::RandomBeta { center, radius, .. } => Ok(center - radius),
            _ => Ok(self
                .first(n.max(1))?
                .iter()
                .map(|m| m.min_expansion())
                .fold(f64::INFINITY, f64::min)),
        }
    }

    /// Class-level upper bound on `sup|T_k'|` over `k ≤ n`.
    pub fn max_derivative(&self, n: usize) -> Result<f64> {
        match &self.generator {
            Generator::RandomBeta { center, radius, .. } => Ok(center + radius),
            _ => Ok(self
                .first(n.max(1))?
                .iter()
                .map(|m| m.max_derivative())
                .fold(0.0, f64::max)),
        }
    }

    pub fn is_affine(&self, n: usize) -> Result<bool> {
        match &self.generator {
            Generator::RandomBeta { .. } => Ok(true),
            _ => Ok(self.first(n.max(1))?.iter().all(|m| m.is_affine())),
        }
    }
}
