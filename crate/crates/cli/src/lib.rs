//! Configuration, orchestration and artifact emission for the `waveguide` binary.

pub mod config;
pub mod emit;
pub mod plot;
pub mod run;
