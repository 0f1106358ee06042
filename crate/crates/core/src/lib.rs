//! Sparse random feature regression with iterative magnitude pruning.
//!
//! Random Fourier features whose weight vectors touch only `q` input
//! coordinates are fitted by minimum-norm least squares, then pruned by
//! coefficient magnitude and refitted until a validation split picks the best
//! model. The crate also carries the comparison fitters, synthetic targets and
//! spectral diagnostics used to evaluate the method.

pub mod baselines;
pub mod diagnostics;
mod error;
pub mod features;
pub mod sampling;
pub mod shrimp;
pub mod solve;
pub mod synthetic;

pub use error::{Error, Result};
pub use features::{design, ColumnMeta, DesignMatrix, FeatureBank, Parity};
pub use sampling::RngState;
pub use shrimp::{imp_run, predict, select_model, FitProblem, ImpOptions, ImpTrace, Method, PrunedModel};
pub use solve::{min_norm_lsq, LsqSolution, Regime};
pub use synthetic::{make_dataset, Dataset, TargetFunction};
