//! Simulation laboratory for configuration models with heavy-tailed degrees
//! in the critical window.
//!
//! * [`degrees`]: power-law degree sequences, criticality tuning and
//!   finite-`n` assumption diagnostics.
//! * [`graph`]: uniform half-edge pairing, rejection to simple graphs and
//!   degree-level percolation.
//! * [`explore`]: breadth-first exploration walk with its exact drift and
//!   variance, components and distance statistics.
//! * [`bp`]: dominating branching-process laws, the breadth-first random
//!   walk and its height, scale and upcrossing bookkeeping.
//! * [`lab`]: seeded Monte Carlo experiments, tightness diagnostics and the CLI.

pub mod bp;
pub mod degrees;
pub mod error;
pub mod explore;
pub mod graph;
pub mod lab;
pub mod num;
mod quad;
pub mod rng;

pub use error::{Error, Result};
