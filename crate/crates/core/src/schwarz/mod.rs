//! Two-level overlapping additive Schwarz preconditioning on a Cartesian coarse grid.

mod coarse;
mod precond;

pub use coarse::{build_coarse, CoarseGrid, CoarseSpace, Face, OverlapStats, Subdomain};
pub use precond::{CounterSnapshot, SchwarzCache, SchwarzCounters, SchwarzPreconditioner};
