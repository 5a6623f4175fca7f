//! MAC-layer coexistence engine for WiFi sharing an unlicensed channel with
//! a listen-before-talk (LBT) contender.
//!
//! Three layers:
//! - [`analytic`]: attempt-rate fixed points, slot statistics, frame
//!   durations, throughput and airtime models of the WiFi population;
//! - [`policy`]: the orthogonal transmission policies — the admissible
//!   idle-slot budget, the random (ORLA) take rule for asynchronous access
//!   and the optimal-stopping (OLAA) threshold rule for synchronous access;
//! - [`sim`]: a deterministic, seeded discrete-event simulation of DCF
//!   stations plus one contender, with Monte Carlo and distribution-test
//!   oracles.

pub mod analytic;
pub mod policy;
pub mod sim;

mod error;
pub use error::{Error, Result};
