//! Algorithmic randomness deficiencies for quantum states, σ-tests, and a
//! constructive covering procedure that certifies quantum outliers.

pub mod bundle;
pub mod cover;
pub mod error;
pub mod measures;
pub mod qmat;
pub mod schumacher;
pub mod sigma;
pub mod stats;
pub mod witness;

pub use cover::{run_cover, verify_moments, CoverParams, CoverResult};
pub use error::{Error, Result};
pub use measures::{CodeLengthTable, ElementaryMeasure};
pub use qmat::{DensityMatrix, HermitianOp, Projector, PureState};
pub use sigma::{point_test, SigmaTest};
pub use witness::{certify_outlier, extract_witness, Certification};
