//! Library surface of the command-line front end, exposed so integration
//! tests can drive the scenario parser, sweep runner and report writers
//! directly.

pub mod report;
pub mod scenario;
pub mod sweep;
