//! Transfer operators on piecewise-constant densities, and the analyses
//! built on iterating them along a map sequence.

mod analysis;
mod grid;
mod kp;
mod martingale;
mod operator;
mod piecewise;

pub use analysis::{
    centering_means, correlation, decay_rate, ergodic_sum_variance, ergodic_sum_variances,
    minoration_check, pushforward_densities, pushforward_density, CurveRow, DecayEstimate,
    MinorationReport, DECAY_FIT_START, RATE_FLOOR,
};
pub use grid::{apply_transfer_ulam, GridFn, UlamMatrix, DEFAULT_GRID_BINS};
pub use kp::{conditional_expectation_kp, DENSITY_FLOOR};
pub use martingale::{martingale_decomposition, MartingaleDecomp, MINORATION_FLOOR};
pub use operator::{apply_transfer, apply_transfer_with_cap, pullback, Propagator};
pub use piecewise::{BvNorm, PiecewiseFn};

/// Cell count of the piecewise-constant proxies used for smooth observables.
pub const DEFAULT_PROXY_CELLS: usize = 1 << 10;
