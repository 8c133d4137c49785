//! Conditional independence testing with split-sample projected covariance
//! measures, holdout randomization tests and generalized covariance measures.

pub mod counters;
pub mod data;
pub mod equivalence;
pub mod error;
pub mod gaussian;
pub mod learners;
pub mod methods;
pub mod pvalue;
pub mod rng;
pub mod simbench;

pub use counters::{CostCounters, CounterSnapshot, FitTag, PredictTag};
pub use data::{split_data, Dataset, SplitAssignment};
pub use error::{Error, Result};
