//! Kernel EDMD: transition datasets, center selection, local affine
//! regression of the induced flow map, and the Koopman surrogate with
//! state-space prediction and rollout.

mod dataset;
mod regression;
mod surrogate;

pub(crate) use dataset::greedy_until_fill;
pub use dataset::{build_dataset, select_centers, CenterStrategy, TransitionDataset};
pub use regression::{local_regression, local_regression_knn, LocalRegression};
pub use surrogate::{fit, fit_with_centers, FitMetadata, FitOptions, KoopmanSurrogate, SigmaPolicy, StateScaling};
