//! Semi-discrete last passage percolation laboratory.
//!
//! * [`env`]: grids, line ensembles, reproducible random streams.
//! * [`lpp`]: exact passage values, profiles, leftmost geodesics, Pitman
//!   transforms and boundary-data recursions.
//! * [`sheet`]: the Brownian-LPP prelimit of the Airy sheet and the
//!   difference profile `D`.
//! * [`fractal`]: local time, non-constant sets, box counting, and the
//!   Lévy / local-limit / dimension experiment kernels.
//! * [`stats`]: KS statistics, half-normal law, least squares, bootstrap.

pub mod env;
pub mod error;
pub mod fractal;
pub mod lpp;
pub mod report;
pub mod sheet;
pub mod stats;
pub mod thresholds;

pub use env::{make_grid, Fixture, Grid, LineEnsemble, Lines, RngSpec};
pub use error::{Error, Result};
pub use lpp::{Geodesic, LatticePoint, Profile};
pub use report::ExperimentReport;
pub use sheet::{BoundaryData, SheetParams};
