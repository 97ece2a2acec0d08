//! Out-of-distribution detection on backbone features.
//!
//! The engine takes exported feature files (features, labels, logits) and
//! provides:
//!
//! * [`geometry`]: unit-sphere normalisation and tied-covariance class
//!   Gaussians with min-Mahalanobis and max-cosine scores;
//! * [`head`]: a small MLP that maps three uncertainty cues to a calibrated
//!   OOD probability, trained with manual backprop and Adam;
//! * [`scores`]: post-hoc uncertainty score rules (higher = more OOD);
//! * [`metrics`]: AUROC, AUPR, FPR@95TPR, detection accuracy, ECE, NLL, Brier;
//! * [`synthetic`]: seeded generators and numerical checks of the geometry
//!   results the method relies on;
//! * [`pipeline`]: density fitting, head calibration, evaluation, ablations
//!   and multi-seed aggregation.

pub mod error;
pub mod feature_store;
pub mod geometry;
pub mod head;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scores;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};
pub use feature_store::{FeatureSet, SplitSpec};
pub use geometry::GaussianModel;
pub use head::{CalibrationHead, CueVector, TrainConfig};
pub use rng::Xoshiro256;
