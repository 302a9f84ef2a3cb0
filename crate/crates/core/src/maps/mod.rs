//! Piecewise expanding interval maps, sequences of them, and the
//! partition-level constants of their compositions.

mod branch;
mod covering;
mod interval_map;
mod partition;
mod sequence;

pub use branch::{Branch, BranchKind, RealFn, SmoothBranch};
pub use covering::{
    covering_horizon, covering_horizon_with_caps, IntervalUnion, COVER_TOL, DEFAULT_FRAGMENT_CAP,
};
pub use interval_map::{IntervalMap, LyConstants, MAX_BRANCHES, MERGE_TOL};
pub use partition::{
    composition_partition, composition_partition_with_cap, distortion_bound,
    inverse_derivative_sums, InverseDerivativeSums, Partition, DEFAULT_CELL_CAP,
};
pub use sequence::{MapSequence, SequenceSpec};

pub(crate) use interval_map::BELOW_ONE;
pub(crate) use partition::composition_cells;
