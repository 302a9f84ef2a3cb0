use crate::error::{Error, Result};
use crate::maps::{MapSequence, DEFAULT_CELL_CAP};
use crate::stochastic::Observable;

/// Below this, `P_1^p 𝟙(x_p)` is treated as a minoration failure.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// `E[K | T_1^p = x_p]` under Lebesgue measure:
///
/// `(P_1^p 𝟙(x_p))⁻¹ Σ_{T_1^p y = x_p} K(y, T_1 y, …, T_1^{p−1} y, x_p, …) / |(T_1^p)'(y)|`,
///
/// with preimages found branch by branch from `x_p` backwards and the
/// coordinates from `p` on taken along the forward orbit of `x_p`.
pub fn conditional_expectation_kp(
    seq: &MapSequence,
    k: &Observable,
    p: usize,
    x_p: f64,
) -> Result<f64> {
    if p == 0 {
        return Err(Error::Argument("conditioning index p must be ≥ 1".into()));
    }
    if !(0.0..1.0).contains(&x_p) {
        return Err(Error::Domain(format!("point {x_p} is outside [0, 1)")));
    }
    let arity = k.arity();
    let mut tail = vec![x_p];
    for i in p + 1..arity {
        let next = seq.map(i)?.eval(tail[tail.len() - 1])?;
        tail.push(next);
    }
    // Each chain holds (x_j, …, x_{p−1}) built backwards, with its weight.
    let mut chains: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    let mut heads = vec![x_p];
    for i in (1..=p).rev() {
        let map = seq.map(i)?;
        let mut next_chains = Vec::new();
        let mut next_heads = Vec::new();
        for ((chain, w), &z) in chains.iter().zip(&heads) {
            for (y, d) in map.preimages(z)? {
                let mut c = Vec::with_capacity(chain.len() + 1);
                c.push(y);
                c.extend_from_slice(chain);
                next_chains.push((c, w / d));
                next_heads.push(y);
            }
        }
        if next_chains.len() > DEFAULT_CELL_CAP {
            return Err(Error::resource("composition preimages", DEFAULT_CELL_CAP));
        }
        chains = next_chains;
        heads = next_heads;
    }
    let density: f64 = chains.iter().map(|c| c.1).sum();
    if density < DENSITY_FLOOR {
        return Err(Error::Minoration(format!(
            "P_1^{p} 𝟙({x_p}) = {density:e} is below {DENSITY_FLOOR:e}"
        )));
    }
    let mut coords = vec![0.0; arity];
    let mut total = 0.0;
    for (chain, w) in &chains {
        for (j, slot) in coords.iter_mut().enumerate() {
            *slot = if j < p { chain[j] } else { tail[j - p] };
        }
        total += w * k.eval(&coords);
    }
    Ok(total / density)
}
