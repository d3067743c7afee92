//! Reference oracles kept independent of the production crates.

pub mod riemann;
