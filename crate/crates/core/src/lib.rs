//! Supervised classification with empirical Christoffel functions.
//!
//! Each class's training points define an empirical measure; its moment
//! matrix yields a Christoffel function `Lambda_j`, which is large on the
//! class support and decays quickly away from it. A point is assigned to the
//! class with the largest `Lambda_j`.
//!
//! - [`multiindex`]: monomial bases (plain, variety, tensor).
//! - [`moments`]: labeled datasets, empirical measures, moment matrices.
//! - [`christoffel`]: eigen-thresholded evaluators and the variational route.
//! - [`classifier`]: the per-class model, joint Christoffel functions and
//!   the sandwich check between joint variants.
//! - [`datasets`]: synthetic shapes, scaling, CSV I/O and splits.
//! - [`cli`]: the command implementations behind the `christoffel` binary.

pub mod christoffel;
pub mod classifier;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod moments;
pub mod multiindex;

pub use christoffel::{build_evaluator, ChristoffelEvaluator, InverseScore, ThresholdPolicy};
pub use classifier::{ClassifierModel, FitOptions, Prediction};
pub use datasets::AffineTransform;
pub use error::{Error, ErrorKind, Result};
pub use moments::{LabeledDataset, MassPolicy, MomentMatrix};
pub use multiindex::MonomialBasis;
