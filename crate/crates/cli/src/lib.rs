//! Experiment drivers, file formats and run reports for the `beamnet` command.

pub mod bc;
pub mod experiments;
pub mod io;
pub mod report;
