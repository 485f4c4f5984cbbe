//! Kernel-space adaptive oversampling for imbalanced binary classification.
//!
//! The crate trains a soft-margin SVM on a precomputed kernel, picks the
//! minority support vectors that sit on or inside the margin, weights them by
//! their distance to the hyperplane, and synthesizes virtual minority samples
//! directly in feature space by extending the Gram matrix. The extended kernel
//! is then fed back to the solver.
//!
//! Modules:
//!
//! - [`data`]: datasets, CSV ingestion, scaling, splitting, ratio construction.
//! - [`kernel`]: kernel functions, Gram matrices and kernel augmentation.
//! - [`svm`]: SMO solver, slack, support-vector taxonomy, decisions.
//! - [`mmsmote`]: the oversampling pipeline.
//! - [`baselines`]: plain, class-weighted, undersampled and SMOTE SVMs.
//! - [`metrics`]: precision, recall, F1 and G-mean.
//! - [`experiment`]: the ratio × method × repetition benchmark harness.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod metrics;
pub mod mmsmote;
pub mod seed;
pub mod svm;

pub use error::{Error, Result};

/// Label of the minority (positive) class.
pub const POSITIVE: i8 = 1;
/// Label of the majority (negative) class.
pub const NEGATIVE: i8 = -1;
