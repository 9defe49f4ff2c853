//! Percolation laboratory: exact and Monte Carlo machinery around the k-point
//! connectivity function of critical bond percolation.
//!
//! * [`lattice`] — graphs, boxes of Z^d, configurations, connection events
//! * [`pivotals`] — open pivotal edges and their order
//! * [`conntree`] — the connectivity tree of a configuration
//! * [`trees`] — binary branching trees with labelled leaves
//! * [`diagrams`] — Riesz-kernel diagram sums and exponent fits
//! * [`integrals`] — continuum tree integrals and the limit constant
//! * [`oracle`] — exhaustive verification of switching identities and bounds
//! * [`estimation`] — Monte Carlo k-point functions and conditioned proxies
//! * [`suites`] — the verification suites behind `percolab verify`

pub mod cli;
pub mod conntree;
pub mod diagrams;
pub mod error;
pub mod estimation;
pub mod integrals;
pub mod lattice;
pub mod manifest;
pub mod oracle;
pub mod pivotals;
pub mod rng;
pub mod stats;
pub mod suites;
pub mod trees;

pub use error::{Error, Result};
