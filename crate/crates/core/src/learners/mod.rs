//! Regression learners used for every nuisance fit.

mod additive;
mod bspline;
mod linear;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use additive::{additive_design, AdditiveDesign, AdditiveFit, SplineComponent, SplineSelection};
pub use bspline::{second_difference_penalty, UniformCubicBasis};
pub use linear::LinearFit;

use crate::counters::{CostCounters, FitTag, PredictTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Ols,
    Ridge,
    #[default]
    AdditiveSpline,
    /// Wraps a known function; built with [`FittedRegression::oracle`].
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Penalty for `ridge`; `ols` always uses zero.
    pub ridge_lambda: f64,
    pub spline_basis_size: usize,
    pub spline_lambda_grid: Vec<f64>,
    pub spline_selection: SplineSelection,
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::AdditiveSpline,
            ridge_lambda: 0.0,
            spline_basis_size: 10,
            spline_lambda_grid: log_grid(1e-4, 1e4, 20),
            spline_selection: SplineSelection::Gcv,
        }
    }
}

impl LearnerConfig {
    pub fn ols() -> Self {
        Self {
            kind: LearnerKind::Ols,
            ..Self::default()
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: LearnerKind::Ridge,
            ridge_lambda: lambda,
            ..Self::default()
        }
    }

    pub fn additive_spline() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ridge_lambda must be a finite value >= 0, got {}",
                self.ridge_lambda
            )));
        }
        if self.kind == LearnerKind::AdditiveSpline {
            if self.spline_basis_size < 4 {
                return Err(Error::InvalidArgument(format!(
                    "spline_basis_size must be at least 4, got {}",
                    self.spline_basis_size
                )));
            }
            if self.spline_lambda_grid.is_empty()
                || self.spline_lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite()))
            {
                return Err(Error::InvalidArgument(
                    "spline_lambda_grid must be a nonempty list of positive values".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A known regression function of a full predictor row.
#[derive(Clone)]
pub struct MeanFunction(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl MeanFunction {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn call(&self, row: &[f64]) -> f64 {
        (self.0)(row)
    }
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MeanFunction")
    }
}

#[derive(Debug, Clone)]
enum Model {
    Linear(LinearFit),
    Additive(AdditiveFit),
    Oracle(MeanFunction),
}

/// An immutable fitted regression; safe to share across threads.
#[derive(Debug, Clone)]
pub struct FittedRegression {
    model: Model,
    input_dimension: usize,
    training_rows: usize,
    counter_tag: Option<FitTag>,
}

fn check_shapes(x: &DMatrix<f64>, targets: &[f64]) -> Result<()> {
    if x.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: targets.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 training rows, got {}",
            x.nrows()
        )));
    }
    if x.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data".into()));
    }
    Ok(())
}

fn fit_model(config: &LearnerConfig, x: &DMatrix<f64>, targets: &[f64]) -> Result<Model> {
    config.validate()?;
    check_shapes(x, targets)?;
    Ok(match config.kind {
        LearnerKind::Ols => Model::Linear(linear::fit_linear(x, targets, 0.0)?),
        LearnerKind::Ridge => Model::Linear(linear::fit_linear(x, targets, config.ridge_lambda)?),
        LearnerKind::AdditiveSpline => Model::Additive(additive::fit_additive(
            x,
            targets,
            config.spline_basis_size,
            &config.spline_lambda_grid,
            config.spline_selection,
        )?),
        LearnerKind::Oracle => {
            return Err(Error::InvalidArgument(
                "oracle learners wrap a known function and cannot be fitted".into(),
            ))
        }
    })
}

/// Fits `targets ~ x` and charges one training to `tag`.
pub fn fit(
    config: &LearnerConfig,
    x: &DMatrix<f64>,
    targets: &[f64],
    counters: &CostCounters,
    tag: FitTag,
) -> Result<FittedRegression> {
    let model = fit_model(config, x, targets)?;
    counters.record_fit(tag);
    Ok(FittedRegression {
        model,
        input_dimension: x.ncols(),
        training_rows: x.nrows(),
        counter_tag: Some(tag),
    })
}

/// Uncounted additive-spline fit whose components can be read one by one.
/// Any non-spline `kind` in `config` is ignored.
pub fn fit_additive_spline_center(
    config: &LearnerConfig,
    x: &DMatrix<f64>,
    targets: &[f64],
) -> Result<FittedRegression> {
    let config = LearnerConfig {
        kind: LearnerKind::AdditiveSpline,
        ..config.clone()
    };
    Ok(FittedRegression {
        model: fit_model(&config, x, targets)?,
        input_dimension: x.ncols(),
        training_rows: x.nrows(),
        counter_tag: None,
    })
}

/// Predicts every row of `x` and charges one batch to `tag` (none for an
/// empty input).
pub fn predict(
    model: &FittedRegression,
    x: &DMatrix<f64>,
    counters: &CostCounters,
    tag: PredictTag,
) -> Result<Vec<f64>> {
    let out = model.evaluate(x)?;
    if !out.is_empty() {
        counters.record_predict(tag, 1);
    }
    Ok(out)
}

impl FittedRegression {
    /// Wraps a known function of rows of width `input_dimension`.
    pub fn oracle(f: MeanFunction, input_dimension: usize) -> Self {
        Self {
            model: Model::Oracle(f),
            input_dimension,
            training_rows: 0,
            counter_tag: None,
        }
    }

    pub fn input_dimension(&self) -> usize {
        self.input_dimension
    }

    pub fn training_rows(&self) -> usize {
        self.training_rows
    }

    pub fn counter_tag(&self) -> Option<FitTag> {
        self.counter_tag
    }

    pub fn as_linear(&self) -> Option<&LinearFit> {
        match &self.model {
            Model::Linear(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_additive(&self) -> Option<&AdditiveFit> {
        match &self.model {
            Model::Additive(a) => Some(a),
            _ => None,
        }
    }

    pub fn eval_row(&self, row: &[f64]) -> f64 {
        match &self.model {
            Model::Linear(l) => l.eval_row(row.iter().copied()),
            Model::Additive(a) => a.eval_row(row.iter().copied()),
            Model::Oracle(f) => f.call(row),
        }
    }

    /// Predictions without touching any counter.
    pub fn evaluate(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.input_dimension {
            return Err(Error::DimensionMismatch {
                expected: self.input_dimension,
                found: x.ncols(),
            });
        }
        let mut row = vec![0.0; x.ncols()];
        let out: Vec<f64> = (0..x.nrows())
            .map(|i| {
                row.iter_mut().enumerate().for_each(|(k, v)| *v = x[(i, k)]);
                self.eval_row(&row)
            })
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("predictions".into()));
        }
        Ok(out)
    }

    /// Prepares repeated predictions on `x` with only `column` changing.
    pub fn column_sweep<'a>(&'a self, x: &'a DMatrix<f64>, column: usize) -> Result<ColumnSweep<'a>> {
        let base = self.evaluate(x)?;
        if column >= self.input_dimension {
            return Err(Error::InvalidArgument(format!(
                "column {column} out of range for width {}",
                self.input_dimension
            )));
        }
        let current = match &self.model {
            Model::Linear(l) => x.column(column).iter().map(|v| v * l.coefficients[column]).collect(),
            Model::Additive(a) => x.column(column).iter().map(|&v| a.eval_component(column, v)).collect(),
            Model::Oracle(_) => Vec::new(),
        };
        Ok(ColumnSweep {
            model: self,
            x,
            column,
            base,
            current,
        })
    }
}

/// Predictions of a model on fixed rows with one column replaced.
///
/// Linear and additive models only recompute the swept term.
pub struct ColumnSweep<'a> {
    model: &'a FittedRegression,
    x: &'a DMatrix<f64>,
    column: usize,
    base: Vec<f64>,
    current: Vec<f64>,
}

impl ColumnSweep<'_> {
    /// Predictions at the unmodified rows.
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Writes predictions with column values `values` into `out`, charging one
    /// `YGivenX` batch.
    pub fn predict_into(&self, values: &[f64], out: &mut [f64], counters: &CostCounters) {
        assert_eq!(values.len(), self.base.len());
        assert_eq!(out.len(), self.base.len());
        let j = self.column;
        match &self.model.model {
            Model::Linear(l) => {
                let b = l.coefficients[j];
                for i in 0..out.len() {
                    out[i] = self.base[i] - self.current[i] + b * values[i];
                }
            }
            Model::Additive(a) => match a.component(j) {
                Some(g) => {
                    for i in 0..out.len() {
                        out[i] = self.base[i] - self.current[i] + g.eval(values[i]);
                    }
                }
                None => out.copy_from_slice(&self.base),
            },
            Model::Oracle(f) => {
                let mut row = vec![0.0; self.x.ncols()];
                for i in 0..out.len() {
                    row.iter_mut().enumerate().for_each(|(k, v)| *v = self.x[(i, k)]);
                    row[j] = values[i];
                    out[i] = f.call(&row);
                }
            }
        }
        if !out.is_empty() {
            counters.record_predict(PredictTag::YGivenX, 1);
        }
    }
}
