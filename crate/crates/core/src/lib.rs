//! Sequential dynamics of piecewise expanding interval maps.
//!
//! * [`maps`]: interval maps, map sequences, composition partitions.
//! * [`transfer`]: transfer operators on piecewise-constant densities.
//! * [`stochastic`]: seeded orbit ensembles and concentration checks.
//! * [`runner`]: experiment configs, scenarios, and persisted records.

pub mod error;
pub mod maps;
pub mod numeric;
pub mod runner;
pub mod stochastic;
pub mod transfer;

pub use error::{Error, Result};
