//! Instrumented cost accounting.
//!
//! The five units are the fit and prediction steps every method is built
//! from. Fit counters count model trainings; predict counters count batches,
//! where one batch is a single call covering every evaluation row.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Which fit unit a training call is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTag {
    /// Regression of the response (or a proxy for it) on predictors.
    YGivenX,
    /// Joint predictor law.
    JointX,
    /// Regression of a function of `X_j` on the remaining predictors.
    XjGivenRest,
}

/// Which prediction unit an evaluation batch is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictTag {
    XjGivenRest,
    YGivenX,
}

#[derive(Debug, Default)]
pub struct CostCounters {
    ml_y_given_x: AtomicU64,
    ml_x: AtomicU64,
    ml_xj_given_rest: AtomicU64,
    predict_xj_given_rest: AtomicU64,
    predict_y_given_x: AtomicU64,
}

/// Plain copy of the counters at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub ml_y_given_x: u64,
    pub ml_x: u64,
    pub ml_xj_given_rest: u64,
    pub predict_xj_given_rest: u64,
    pub predict_y_given_x: u64,
}

impl CounterSnapshot {
    pub const fn new(ml_y: u64, ml_x: u64, ml_xj: u64, pred_xj: u64, pred_y: u64) -> Self {
        Self {
            ml_y_given_x: ml_y,
            ml_x,
            ml_xj_given_rest: ml_xj,
            predict_xj_given_rest: pred_xj,
            predict_y_given_x: pred_y,
        }
    }

    pub fn as_tuple(&self) -> (u64, u64, u64, u64, u64) {
        (
            self.ml_y_given_x,
            self.ml_x,
            self.ml_xj_given_rest,
            self.predict_xj_given_rest,
            self.predict_y_given_x,
        )
    }

    pub fn total_fits(&self) -> u64 {
        self.ml_y_given_x + self.ml_x + self.ml_xj_given_rest
    }

    pub fn saturating_sub(&self, other: &Self) -> Self {
        Self {
            ml_y_given_x: self.ml_y_given_x.saturating_sub(other.ml_y_given_x),
            ml_x: self.ml_x.saturating_sub(other.ml_x),
            ml_xj_given_rest: self.ml_xj_given_rest.saturating_sub(other.ml_xj_given_rest),
            predict_xj_given_rest: self
                .predict_xj_given_rest
                .saturating_sub(other.predict_xj_given_rest),
            predict_y_given_x: self.predict_y_given_x.saturating_sub(other.predict_y_given_x),
        }
    }
}

impl std::ops::Add for CounterSnapshot {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            ml_y_given_x: self.ml_y_given_x + rhs.ml_y_given_x,
            ml_x: self.ml_x + rhs.ml_x,
            ml_xj_given_rest: self.ml_xj_given_rest + rhs.ml_xj_given_rest,
            predict_xj_given_rest: self.predict_xj_given_rest + rhs.predict_xj_given_rest,
            predict_y_given_x: self.predict_y_given_x + rhs.predict_y_given_x,
        }
    }
}

impl std::ops::AddAssign for CounterSnapshot {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl CostCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_fit(&self, tag: FitTag) {
        let slot = match tag {
            FitTag::YGivenX => &self.ml_y_given_x,
            FitTag::JointX => &self.ml_x,
            FitTag::XjGivenRest => &self.ml_xj_given_rest,
        };
        slot.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_predict(&self, tag: PredictTag, batches: u64) {
        let slot = match tag {
            PredictTag::XjGivenRest => &self.predict_xj_given_rest,
            PredictTag::YGivenX => &self.predict_y_given_x,
        };
        slot.fetch_add(batches, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            ml_y_given_x: self.ml_y_given_x.load(Ordering::Relaxed),
            ml_x: self.ml_x.load(Ordering::Relaxed),
            ml_xj_given_rest: self.ml_xj_given_rest.load(Ordering::Relaxed),
            predict_xj_given_rest: self.predict_xj_given_rest.load(Ordering::Relaxed),
            predict_y_given_x: self.predict_y_given_x.load(Ordering::Relaxed),
        }
    }
}
