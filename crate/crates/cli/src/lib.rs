//! Command-line front end of the eigensolver: matrix generation, solving,
//! verification and parameter sweeps.

pub mod commands;
pub mod mm;
pub mod stats;
