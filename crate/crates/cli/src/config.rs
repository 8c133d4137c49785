//! Run configuration for `citlab test`.

use std::fs;
use std::path::{Path, PathBuf};

use citlab::gaussian::{Estimator, GaussianConfig};
use citlab::learners::LearnerConfig;
use citlab::methods::{StructureHint, TestConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliResult, Failure};

/// Known structure of the predictors, `{"banded": bandwidth}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandedHint {
    pub banded: usize,
}

/// Everything a `test` run depends on. Unknown keys are rejected.
///
/// Defaults: spline learner with GCV, graphical lasso with 20 penalties down
/// to a ratio of 1e-6 and 5 folds, 25 tower resamples, 5000 HRT resamples,
/// training proportions 0.4 (tPCM, HRT) and 0.3 (vPCM), 5 tGCM folds,
/// alpha 0.05, seed 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub learner: LearnerConfig,
    pub gaussian: GaussianConfig,
    pub test: TestConfig,
    pub structure_hint: Option<BandedHint>,
    pub data: Option<PathBuf>,
    /// Name of the response column.
    pub response: String,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            learner: LearnerConfig::default(),
            gaussian: GaussianConfig::glasso(),
            test: TestConfig::default(),
            structure_hint: None,
            data: None,
            response: "y".into(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        let schema = |e: citlab::Error| Failure::Schema(e.to_string());
        self.learner.validate().map_err(schema)?;
        self.test.validate().map_err(schema)?;
        if self.test.seed != 0 && self.test.seed != self.seed {
            return Err(Failure::Schema("set the seed at the top level, not under 'test'".into()));
        }
        let g = &self.gaussian;
        if g.estimator == Estimator::Oracle {
            return Err(Failure::Schema("the oracle estimator is only available in simulations".into()));
        }
        if g.estimator == Estimator::Banded && g.bandwidth == 0 {
            return Err(Failure::Schema("gaussian.bandwidth must be at least 1".into()));
        }
        if g.estimator == Estimator::Glasso {
            if !(g.glasso_min_ratio > 0.0 && g.glasso_min_ratio < 1.0) {
                return Err(Failure::Schema(format!(
                    "gaussian.glasso_min_ratio must lie in (0, 1), got {}",
                    g.glasso_min_ratio
                )));
            }
            if g.glasso_grid_size == 0 || g.glasso_cv_folds < 2 {
                return Err(Failure::Schema("glasso needs a non-empty grid and at least 2 folds".into()));
            }
        }
        if matches!(self.structure_hint, Some(BandedHint { banded: 0 })) {
            return Err(Failure::Schema("structure_hint.banded must be at least 1".into()));
        }
        if self.response.trim().is_empty() {
            return Err(Failure::Schema("response column name is empty".into()));
        }
        Ok(())
    }

    /// Test settings with the top-level seed and structure hint applied.
    pub fn resolved_test(&self) -> TestConfig {
        let mut t = self.test.clone();
        t.seed = self.seed;
        if let Some(h) = self.structure_hint {
            t.vpcm_structure = StructureHint::Banded { bandwidth: h.banded };
        }
        t
    }
}

/// Reads a JSON config, or returns the default when `path` is `None`.
pub fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))
}
