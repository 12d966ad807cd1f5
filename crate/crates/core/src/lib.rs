//! ABROCA (area between ROC curves) as a fairness metric, with a
//! permutation test for its significance and Monte Carlo estimation of
//! that test's power.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] holds scored predictions with binary outcome and group labels.
//! * [`roc`] builds empirical ROC curves, AUC and the exact ABROCA integral.
//! * [`generator`] draws binormal datasets with prescribed per-group AUCs.
//! * [`permutation`] runs the group-label randomization test.
//! * [`power`] repeats generate-and-test to estimate rejection rates over grids.
//! * [`distfit`] fits parametric families to null ABROCA samples and runs K-S tests.
//!
//! All randomness flows through [`stream`], which hands out independent,
//! reproducible counter-based generators addressed by a seed and an index path,
//! so results never depend on the number of worker threads.

pub mod dataset;
pub mod distfit;
pub mod error;
pub mod generator;
pub mod permutation;
pub mod power;
pub mod roc;
pub mod stream;

pub use dataset::ScoredDataset;
pub use error::{Error, Result};
pub use generator::{Scenario, SimConfig};
pub use permutation::{PConvention, TestConfig, TestResult};
pub use power::{PowerConfig, PowerCurve, PowerEstimate};
pub use roc::RocCurve;
