//! Seeded orbit ensembles and Monte-Carlo checks of concentration for
//! orbit functionals.

mod asclt;
mod kantorovich;
mod mgf;
mod observable;
mod orbits;
mod shadowing;
mod tail;

pub use asclt::{asclt_report, AscltReport, SigmaRoute, GROWTH_FLOOR, LOW_N, MONTECARLO_SIGMA_SAMPLES};
pub use kantorovich::{kantorovich, Cdf};
pub use mgf::{concentration_mgf, MgfReport, MgfRow, MIN_EFFECTIVE_SAMPLES};
pub use observable::{Evaluator, Observable, ScalarObservable, SPOT_CHECK_PROBES};
pub use orbits::{fold_orbits, map_orbits, orbit_from, orbit_rng, sample_orbits, OrbitEnsemble, FOLD_BLOCK};
pub use shadowing::{
    shadow_candidates, shadowing_ensemble, shadowing_stat, ShadowingReport, DEFAULT_CANDIDATE_GRID,
};
pub use tail::{
    averaged_pushforward_cdf, empirical_measure_tail, ld_tail, EmpiricalMeasureReport, TailReport,
};
