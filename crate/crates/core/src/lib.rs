//! Spectral divide-and-conquer eigensolver for symmetric banded and HODLR
//! matrices.

pub mod banded;
pub mod basis;
pub mod dense;
pub mod error;
pub mod factored;
pub mod hodlr;
pub mod matgen;
pub mod metrics;
pub mod oracle;
pub mod sign;
pub mod solver;

pub use banded::BandedMatrix;
pub use error::{Error, Result};
pub use hodlr::{HodlrMatrix, IndexPartition, LowRank, TruncationConfig};
pub use factored::FactoredEigenvectors;
pub use metrics::{error_metrics, ErrorReport, Reference};
pub use solver::{hsdc, hsdc_banded, ShiftStrategy, Solver, SolverConfig, SpectralDecomposition};
