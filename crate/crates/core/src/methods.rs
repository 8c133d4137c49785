//! Conditional independence tests of `Y ⫫ X_j | X_-j`, one outcome per
//! predictor: tower PCM, vanilla PCM, the holdout randomization test and the
//! generalized covariance measure (oracle and cross-fitted).

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counters::{CostCounters, CounterSnapshot, FitTag, PredictTag};
use crate::data::{Dataset, SplitAssignment};
use crate::error::{Error, Result};
use crate::gaussian::{ConditionalLaw, GaussianConfig, GaussianModel};
use crate::learners::{self, ColumnSweep, FittedRegression, LearnerConfig, MeanFunction};
use crate::pvalue::{normal_pvalue, Sided};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tpcm,
    Vpcm,
    Hrt,
    OracleGcm,
    Tgcm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Tpcm, Method::Vpcm, Method::Hrt, Method::OracleGcm, Method::Tgcm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Tpcm => "tpcm",
            Method::Vpcm => "vpcm",
            Method::Hrt => "hrt",
            Method::OracleGcm => "oracle_gcm",
            Method::Tgcm => "tgcm",
        }
    }

    /// Methods that need the true data-generating law.
    pub fn needs_truth(&self) -> bool {
        matches!(self, Method::OracleGcm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Optional structural knowledge used by vPCM's auxiliary regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StructureHint {
    #[default]
    None,
    /// Predictors are banded: `X_j` depends on the rest only through
    /// neighbours within `bandwidth`.
    Banded { bandwidth: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    pub alpha: f64,
    pub b_tpcm: usize,
    pub b_hrt: usize,
    pub train_proportion_tpcm_hrt: f64,
    pub train_proportion_pcm: f64,
    pub gcm_sided: Sided,
    pub cross_fit_folds: usize,
    /// Tower resamples of the oracle GCM and of tGCM.
    pub b_gcm: usize,
    /// Resamples for conditional second moments in the rescaled HRT.
    pub b_sigma: usize,
    pub vpcm_structure: StructureHint,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            b_tpcm: 25,
            b_hrt: 5000,
            train_proportion_tpcm_hrt: 0.4,
            train_proportion_pcm: 0.3,
            gcm_sided: Sided::Two,
            cross_fit_folds: 5,
            b_gcm: 25,
            b_sigma: 1000,
            vpcm_structure: StructureHint::None,
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.b_tpcm == 0 || self.b_gcm == 0 || self.b_sigma == 0 {
            return Err(Error::InvalidArgument("resample counts must be at least 1".into()));
        }
        let min_hrt = (1.0 / self.alpha).ceil() as usize - 1;
        if self.b_hrt < min_hrt.max(1) {
            return Err(Error::InvalidArgument(format!(
                "b_hrt = {} cannot reject at alpha = {}; need at least {min_hrt}",
                self.b_hrt, self.alpha
            )));
        }
        for prop in [self.train_proportion_tpcm_hrt, self.train_proportion_pcm] {
            if !(prop > 0.0 && prop < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "training proportion must lie in (0, 1), got {prop}"
                )));
            }
        }
        if self.cross_fit_folds < 2 {
            return Err(Error::InvalidArgument("cross_fit_folds must be at least 2".into()));
        }
        Ok(())
    }

    /// Training proportion used by `method`'s sample split.
    pub fn train_proportion(&self, method: Method) -> f64 {
        match method {
            Method::Vpcm => self.train_proportion_pcm,
            _ => self.train_proportion_tpcm_hrt,
        }
    }
}

/// Result for one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub variable: usize,
    pub name: String,
    pub method: Method,
    pub statistic: f64,
    pub pvalue: f64,
    /// Bonferroni decision at the configured alpha across all predictors.
    pub reject: bool,
    /// The statistic's scale estimate vanished; the p-value is set to 1.
    pub degenerate: bool,
    pub seconds: f64,
}

/// Per-observation quantities behind a product-of-residuals statistic on the
/// test half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace {
    /// Response residual, `Y_i - m_j(X_{i,-j})`.
    pub eps: Vec<f64>,
    /// Fitted direction, `m(X_i) - m_j(X_{i,-j})` (or its vPCM analogue).
    pub xi_hat: Vec<f64>,
    pub products: Vec<f64>,
    pub sigma_hat: f64,
}

/// Normalized sum `sum(R) / (sqrt(n) sigma)` with `sigma` the population
/// standard deviation of `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductStatistic {
    pub statistic: f64,
    pub sigma_hat: f64,
    pub degenerate: bool,
}

/// `scale` is a magnitude of the response below which a vanishing standard
/// deviation counts as degenerate.
pub fn product_statistic(products: &[f64], scale: f64) -> ProductStatistic {
    let n = products.len() as f64;
    let mean = products.iter().sum::<f64>() / n;
    let var = products.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let sigma_hat = var.sqrt();
    let rms = (products.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let degenerate = !(sigma_hat > 1e-12 * rms && sigma_hat > 1e-10 * scale) || !sigma_hat.is_finite();
    ProductStatistic {
        statistic: if degenerate { 0.0 } else { n.sqrt() * mean / sigma_hat },
        sigma_hat,
        degenerate,
    }
}

fn response_scale(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64
}

fn pvalue_of(stat: &ProductStatistic, sided: Sided) -> Result<f64> {
    if stat.degenerate {
        Ok(1.0)
    } else {
        normal_pvalue(stat.statistic, sided)
    }
}

/// Predicted counter values for one run of `method` on `p` predictors.
pub fn predicted_counters(method: Method, p: usize, cfg: &TestConfig) -> CounterSnapshot {
    let p = p as u64;
    match method {
        Method::Tpcm => {
            let b = cfg.b_tpcm as u64;
            CounterSnapshot::new(1, 1, 0, p * b, p * b)
        }
        Method::Hrt => {
            let b = cfg.b_hrt as u64;
            CounterSnapshot::new(1, 1, 0, p * b, p * b)
        }
        Method::Vpcm => CounterSnapshot::new(1 + 2 * p, 0, p, p, 2 * p),
        Method::OracleGcm => {
            let b = cfg.b_gcm as u64;
            CounterSnapshot::new(0, 0, 0, p * b, p * b)
        }
        Method::Tgcm => {
            let k = cfg.cross_fit_folds as u64;
            let b = cfg.b_gcm as u64;
            CounterSnapshot::new(k, k, 0, k * p * b, k * p * b)
        }
    }
}

/// Test and training halves of a split.
#[derive(Debug, Clone)]
pub struct Holdout {
    pub x1: DMatrix<f64>,
    pub y1: Vec<f64>,
    pub x2: DMatrix<f64>,
    pub y2: Vec<f64>,
}

impl Holdout {
    pub fn new(dataset: &Dataset, split: &SplitAssignment) -> Result<Self> {
        let n = dataset.n_rows();
        if split.d1_indices.iter().chain(&split.d2_indices).any(|&i| i >= n) {
            return Err(Error::InvalidArgument("split indices exceed the dataset".into()));
        }
        if split.n_test() < 2 || split.n_train() < 2 {
            return Err(Error::SplitTooSmall {
                size: split.n_test().min(split.n_train()),
                min: 2,
            });
        }
        Ok(Self {
            x1: dataset.x_rows(&split.d1_indices),
            y1: dataset.y_rows(&split.d1_indices),
            x2: dataset.x_rows(&split.d2_indices),
            y2: dataset.y_rows(&split.d2_indices),
        })
    }
}

/// `m_hat` and the predictor law fitted once on the training half.
#[derive(Debug, Clone)]
pub struct SharedFits {
    pub m_hat: FittedRegression,
    pub gaussian: GaussianModel,
    pub laws: Vec<ConditionalLaw>,
}

pub fn fit_shared(
    x: &DMatrix<f64>,
    y: &[f64],
    learner: &LearnerConfig,
    gaussian: &GaussianConfig,
    seed: u64,
    counters: &CostCounters,
) -> Result<SharedFits> {
    let m_hat = learners::fit(learner, x, y, counters, FitTag::YGivenX)?;
    let gaussian = gaussian.fit(x, rng::derive_seed(seed, Domain::CvFolds, 0))?;
    counters.record_fit(FitTag::JointX);
    let laws = gaussian.conditional_laws();
    Ok(SharedFits { m_hat, gaussian, laws })
}

/// Redraws column `j` of fixed rows from a conditional law and predicts with
/// the swept model.
pub struct Resampler<'a> {
    sweep: ColumnSweep<'a>,
    means: Vec<f64>,
    sd: f64,
    seed: u64,
    index: u64,
}

impl<'a> Resampler<'a> {
    pub fn new(
        model: &'a FittedRegression,
        x: &'a DMatrix<f64>,
        law: &ConditionalLaw,
        seed: u64,
        index: u64,
    ) -> Result<Self> {
        Ok(Self {
            sweep: model.column_sweep(x, law.index)?,
            means: law.means_for(x),
            sd: law.sd(),
            seed,
            index,
        })
    }

    /// Model predictions at the observed rows.
    pub fn base(&self) -> &[f64] {
        self.sweep.base()
    }

    /// Conditional means of the swept column.
    pub fn cond_means(&self) -> &[f64] {
        &self.means
    }

    /// Draws batch `batch` of the swept column into `out`; one sampling batch.
    pub fn draw(&self, domain: Domain, batch: u64, out: &mut [f64], counters: &CostCounters) {
        let mut rng = rng::substream(self.seed, domain, self.index, batch);
        for (o, m) in out.iter_mut().zip(&self.means) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *o = m + self.sd * z;
        }
        counters.record_predict(PredictTag::XjGivenRest, 1);
    }

    /// Predictions with the swept column set to `values`; one prediction batch.
    pub fn predict(&self, values: &[f64], out: &mut [f64], counters: &CostCounters) {
        self.sweep.predict_into(values, out, counters);
    }

    /// Monte Carlo estimate of `E[m(X~_j, X_-j) | X_-j]` from `b` draws.
    pub fn tower_mean(&self, domain: Domain, b: usize, counters: &CostCounters) -> Vec<f64> {
        let n = self.means.len();
        let mut acc = vec![0.0; n];
        let mut draw = vec![0.0; n];
        let mut pred = vec![0.0; n];
        for batch in 0..b {
            self.draw(domain, batch as u64, &mut draw, counters);
            self.predict(&draw, &mut pred, counters);
            acc.iter_mut().zip(&pred).for_each(|(a, p)| *a += p);
        }
        acc.iter_mut().for_each(|a| *a /= b as f64);
        acc
    }

    /// Monte Carlo estimate of `E[(m(X~_j, X_-j) - center)^2 | X_-j]`.
    pub fn second_moment(&self, center: &[f64], domain: Domain, b: usize, counters: &CostCounters) -> Vec<f64> {
        let n = self.means.len();
        let mut acc = vec![0.0; n];
        let mut draw = vec![0.0; n];
        let mut pred = vec![0.0; n];
        for batch in 0..b {
            self.draw(domain, batch as u64, &mut draw, counters);
            self.predict(&draw, &mut pred, counters);
            for i in 0..n {
                acc[i] += (pred[i] - center[i]).powi(2);
            }
        }
        acc.iter_mut().for_each(|a| *a /= b as f64);
        acc
    }
}

/// Tower-property estimate of `E[m(X) | X_-j]` on the rows of `x`.
pub fn tower_mean(
    model: &FittedRegression,
    law: &ConditionalLaw,
    x: &DMatrix<f64>,
    b: usize,
    seed: u64,
    counters: &CostCounters,
) -> Result<Vec<f64>> {
    if b == 0 {
        return Err(Error::InvalidArgument("tower mean needs at least one resample".into()));
    }
    let r = Resampler::new(model, x, law, seed, law.index as u64)?;
    Ok(r.tower_mean(Domain::TowerResample, b, counters))
}

fn finish(outcomes: &mut [TestOutcome], alpha: f64) {
    let cutoff = alpha / outcomes.len() as f64;
    for o in outcomes.iter_mut() {
        o.reject = o.pvalue <= cutoff;
    }
}

fn outcome(dataset_names: &[String], j: usize, method: Method, stat: f64, pvalue: f64, degenerate: bool, start: Instant) -> TestOutcome {
    TestOutcome {
        variable: j,
        name: dataset_names[j].clone(),
        method,
        statistic: stat,
        pvalue,
        reject: false,
        degenerate,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// tPCM residual trace for one predictor, given shared fits.
pub fn tpcm_trace(
    fits: &SharedFits,
    x1: &DMatrix<f64>,
    y1: &[f64],
    j: usize,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<(ResidualTrace, ProductStatistic)> {
    let r = Resampler::new(&fits.m_hat, x1, &fits.laws[j], cfg.seed, j as u64)?;
    let m_j = r.tower_mean(Domain::TowerResample, cfg.b_tpcm, counters);
    Ok(trace_from(y1, r.base(), &m_j))
}

fn trace_from(y: &[f64], m_full: &[f64], m_j: &[f64]) -> (ResidualTrace, ProductStatistic) {
    let eps: Vec<f64> = y.iter().zip(m_j).map(|(y, m)| y - m).collect();
    let xi_hat: Vec<f64> = m_full.iter().zip(m_j).map(|(a, b)| a - b).collect();
    let products: Vec<f64> = eps.iter().zip(&xi_hat).map(|(e, x)| e * x).collect();
    let stat = product_statistic(&products, response_scale(y));
    (
        ResidualTrace {
            eps,
            xi_hat,
            products,
            sigma_hat: stat.sigma_hat,
        },
        stat,
    )
}

/// tPCM outcomes from already fitted nuisances.
pub fn tpcm_with_fits(
    dataset: &Dataset,
    holdout: &Holdout,
    fits: &SharedFits,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    let p = dataset.n_predictors();
    let mut out = (0..p)
        .into_par_iter()
        .map(|j| {
            let start = Instant::now();
            let (_, stat) = tpcm_trace(fits, &holdout.x1, &holdout.y1, j, cfg, counters)?;
            let pv = pvalue_of(&stat, Sided::Upper)?;
            Ok(outcome(dataset.column_names(), j, Method::Tpcm, stat.statistic, pv, stat.degenerate, start))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(&mut out, cfg.alpha);
    Ok(out)
}

pub fn tpcm_test(
    dataset: &Dataset,
    split: &SplitAssignment,
    learner: &LearnerConfig,
    gaussian: &GaussianConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    cfg.validate()?;
    let h = Holdout::new(dataset, split)?;
    let fits = fit_shared(&h.x2, &h.y2, learner, gaussian, cfg.seed, counters)?;
    tpcm_with_fits(dataset, &h, &fits, cfg, counters)
}

/// Mean squared error of `pred` for `y`.
pub fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// HRT p-value `(1 + #{b : resampled_b <= observed}) / (B + 1)`.
pub fn hrt_pvalue(observed: f64, resampled: &[f64]) -> f64 {
    let count = resampled.iter().filter(|&&t| t <= observed).count();
    (1 + count) as f64 / (resampled.len() + 1) as f64
}

/// Observed and resampled HRT statistics for one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrtVariable {
    pub observed: f64,
    pub resampled: Vec<f64>,
    pub pvalue: f64,
}

pub fn hrt_variable(
    fits: &SharedFits,
    x1: &DMatrix<f64>,
    y1: &[f64],
    j: usize,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<HrtVariable> {
    let r = Resampler::new(&fits.m_hat, x1, &fits.laws[j], cfg.seed, j as u64)?;
    let observed = mse(y1, r.base());
    let n = y1.len();
    let mut draw = vec![0.0; n];
    let mut pred = vec![0.0; n];
    let resampled: Vec<f64> = (0..cfg.b_hrt)
        .map(|b| {
            r.draw(Domain::HrtResample, b as u64, &mut draw, counters);
            r.predict(&draw, &mut pred, counters);
            mse(y1, &pred)
        })
        .collect();
    let pvalue = hrt_pvalue(observed, &resampled);
    Ok(HrtVariable {
        observed,
        resampled,
        pvalue,
    })
}

pub fn hrt_with_fits(
    dataset: &Dataset,
    holdout: &Holdout,
    fits: &SharedFits,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    let p = dataset.n_predictors();
    let mut out = (0..p)
        .into_par_iter()
        .map(|j| {
            let start = Instant::now();
            let v = hrt_variable(fits, &holdout.x1, &holdout.y1, j, cfg, counters)?;
            Ok(outcome(dataset.column_names(), j, Method::Hrt, v.observed, v.pvalue, false, start))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(&mut out, cfg.alpha);
    Ok(out)
}

pub fn hrt_test(
    dataset: &Dataset,
    split: &SplitAssignment,
    learner: &LearnerConfig,
    gaussian: &GaussianConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    cfg.validate()?;
    let h = Holdout::new(dataset, split)?;
    let fits = fit_shared(&h.x2, &h.y2, learner, gaussian, cfg.seed, counters)?;
    hrt_with_fits(dataset, &h, &fits, cfg, counters)
}

/// tPCM and HRT on one split sharing a single fit of `m_hat` and the
/// predictor law.
pub fn tpcm_and_hrt(
    dataset: &Dataset,
    split: &SplitAssignment,
    learner: &LearnerConfig,
    gaussian: &GaussianConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<(Vec<TestOutcome>, Vec<TestOutcome>)> {
    cfg.validate()?;
    let h = Holdout::new(dataset, split)?;
    let fits = fit_shared(&h.x2, &h.y2, learner, gaussian, cfg.seed, counters)?;
    Ok((
        tpcm_with_fits(dataset, &h, &fits, cfg, counters)?,
        hrt_with_fits(dataset, &h, &fits, cfg, counters)?,
    ))
}

/// Columns used to regress onto "the rest" for predictor `j`.
fn rest_columns(p: usize, j: usize, hint: StructureHint) -> Vec<usize> {
    match hint {
        StructureHint::None => (0..p).filter(|&k| k != j).collect(),
        StructureHint::Banded { bandwidth } => (j.saturating_sub(bandwidth)..=(j + bandwidth).min(p - 1))
            .filter(|&k| k != j)
            .collect(),
    }
}

fn drop_column(x: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    x.clone().remove_column(j)
}

/// vPCM residual trace for one predictor.
pub fn vpcm_trace(
    holdout: &Holdout,
    m_hat_train: &[f64],
    m_hat_test: &[f64],
    j: usize,
    learner: &LearnerConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<(ResidualTrace, ProductStatistic)> {
    let p = holdout.x1.ncols();
    let x2_rest = drop_column(&holdout.x2, j);
    let x1_rest = drop_column(&holdout.x1, j);
    // f_j = m - E[m | X_-j], estimated on the training half.
    let m_check = learners::fit(learner, &x2_rest, m_hat_train, counters, FitTag::YGivenX)?;
    let m_check_test = learners::predict(&m_check, &x1_rest, counters, PredictTag::YGivenX)?;
    let f_hat: Vec<f64> = m_hat_test.iter().zip(&m_check_test).map(|(a, b)| a - b).collect();

    let m_tilde = learners::fit(learner, &x1_rest, &holdout.y1, counters, FitTag::YGivenX)?;
    let y_fit = learners::predict(&m_tilde, &x1_rest, counters, PredictTag::YGivenX)?;

    let aux_x = holdout.x1.select_columns(&rest_columns(p, j, cfg.vpcm_structure));
    let m_f = learners::fit(learner, &aux_x, &f_hat, counters, FitTag::XjGivenRest)?;
    let f_fit = learners::predict(&m_f, &aux_x, counters, PredictTag::XjGivenRest)?;

    let eps: Vec<f64> = holdout.y1.iter().zip(&y_fit).map(|(a, b)| a - b).collect();
    let xi_hat: Vec<f64> = f_hat.iter().zip(&f_fit).map(|(a, b)| a - b).collect();
    let products: Vec<f64> = eps.iter().zip(&xi_hat).map(|(a, b)| a * b).collect();
    let stat = product_statistic(&products, response_scale(&holdout.y1));
    Ok((
        ResidualTrace {
            eps,
            xi_hat,
            products,
            sigma_hat: stat.sigma_hat,
        },
        stat,
    ))
}

pub fn vpcm_test(
    dataset: &Dataset,
    split: &SplitAssignment,
    learner: &LearnerConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    cfg.validate()?;
    let h = Holdout::new(dataset, split)?;
    let m_hat = learners::fit(learner, &h.x2, &h.y2, counters, FitTag::YGivenX)?;
    let m_train = m_hat.evaluate(&h.x2)?;
    let m_test = m_hat.evaluate(&h.x1)?;
    let p = dataset.n_predictors();
    let mut out = (0..p)
        .into_par_iter()
        .map(|j| {
            let start = Instant::now();
            let (_, stat) = vpcm_trace(&h, &m_train, &m_test, j, learner, cfg, counters)?;
            let pv = pvalue_of(&stat, Sided::Upper)?;
            Ok(outcome(dataset.column_names(), j, Method::Vpcm, stat.statistic, pv, stat.degenerate, start))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(&mut out, cfg.alpha);
    Ok(out)
}

/// GCM outcomes from per-predictor regressions `m_j[j][i] ~ E[Y | X_{i,-j}]`
/// and `cond_mean[j][i] ~ E[X_ij | X_{i,-j}]`.
pub fn gcm_test(
    dataset: &Dataset,
    m_j: &[Vec<f64>],
    cond_mean: &[Vec<f64>],
    sided: Sided,
    alpha: f64,
) -> Result<Vec<TestOutcome>> {
    let p = dataset.n_predictors();
    let n = dataset.n_rows();
    if m_j.len() != p || cond_mean.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: m_j.len().min(cond_mean.len()),
        });
    }
    let y = dataset.y();
    let mut out = (0..p)
        .map(|j| {
            let start = Instant::now();
            if m_j[j].len() != n || cond_mean[j].len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m_j[j].len().min(cond_mean[j].len()),
                });
            }
            let xj = dataset.x().column(j);
            let products: Vec<f64> = (0..n).map(|i| (y[i] - m_j[j][i]) * (xj[i] - cond_mean[j][i])).collect();
            let stat = product_statistic(&products, response_scale(y));
            let pv = pvalue_of(&stat, sided)?;
            Ok(outcome(dataset.column_names(), j, Method::OracleGcm, stat.statistic, pv, stat.degenerate, start))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(&mut out, alpha);
    Ok(out)
}

/// GCM with the true regression function and predictor law on all rows.
/// `E[Y | X_-j]` comes from the tower property with `cfg.b_gcm` draws.
pub fn oracle_gcm_test(
    dataset: &Dataset,
    true_mean: &MeanFunction,
    truth: &GaussianModel,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    cfg.validate()?;
    let p = dataset.n_predictors();
    if truth.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: truth.dim(),
        });
    }
    let model = FittedRegression::oracle(true_mean.clone(), p);
    let x = dataset.x();
    let parts = (0..p)
        .into_par_iter()
        .map(|j| {
            let law = truth.conditional_law(j)?;
            let r = Resampler::new(&model, x, &law, cfg.seed, j as u64)?;
            let m_j = r.tower_mean(Domain::OracleResample, cfg.b_gcm, counters);
            Ok((m_j, r.cond_means().to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (m_j, cond): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    gcm_test(dataset, &m_j, &cond, cfg.gcm_sided, cfg.alpha)
}

/// Random assignment of `n` rows to `folds` folds of (nearly) equal size.
pub fn cross_fit_folds(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, Domain::CrossFitFolds));
    let mut fold_of = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos * folds / n;
    }
    fold_of
}

pub fn tgcm_test(
    dataset: &Dataset,
    learner: &LearnerConfig,
    gaussian: &GaussianConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    cfg.validate()?;
    let folds = cross_fit_folds(dataset.n_rows(), cfg.cross_fit_folds, cfg.seed);
    tgcm_with_folds(dataset, &folds, learner, gaussian, cfg, counters)
}

/// Per-fold nuisance fits of a cross-fitted GCM.
pub struct FoldFits {
    pub held_out: Vec<usize>,
    pub fits: SharedFits,
}

/// Cross-fitted GCM with an explicit fold label per row (labels `0..K`).
pub fn tgcm_with_folds(
    dataset: &Dataset,
    fold_of: &[usize],
    learner: &LearnerConfig,
    gaussian: &GaussianConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<TestOutcome>> {
    let n = dataset.n_rows();
    let p = dataset.n_predictors();
    if fold_of.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: fold_of.len(),
        });
    }
    let k = fold_of.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::InvalidArgument("cross-fitting needs at least 2 folds".into()));
    }
    let fold_fits = tgcm_fold_fits(dataset, fold_of, k, learner, gaussian, cfg, counters)?;
    let mut m_j = vec![vec![0.0; n]; p];
    let mut cond = vec![vec![0.0; n]; p];
    for (f, ff) in fold_fits.iter().enumerate() {
        let x_out = dataset.x_rows(&ff.held_out);
        let parts = (0..p)
            .into_par_iter()
            .map(|j| {
                let r = Resampler::new(&ff.fits.m_hat, &x_out, &ff.fits.laws[j], cfg.seed, (j * k + f) as u64)?;
                Ok((r.tower_mean(Domain::CrossFitResample, cfg.b_gcm, counters), r.cond_means().to_vec()))
            })
            .collect::<Result<Vec<_>>>()?;
        for (j, (mj, cm)) in parts.into_iter().enumerate() {
            for (pos, &i) in ff.held_out.iter().enumerate() {
                m_j[j][i] = mj[pos];
                cond[j][i] = cm[pos];
            }
        }
    }
    let mut out = gcm_test(dataset, &m_j, &cond, cfg.gcm_sided, cfg.alpha)?;
    out.iter_mut().for_each(|o| o.method = Method::Tgcm);
    Ok(out)
}

/// Nuisance fits for each fold, trained on the other folds.
pub fn tgcm_fold_fits(
    dataset: &Dataset,
    fold_of: &[usize],
    k: usize,
    learner: &LearnerConfig,
    gaussian: &GaussianConfig,
    cfg: &TestConfig,
    counters: &CostCounters,
) -> Result<Vec<FoldFits>> {
    (0..k)
        .map(|f| {
            let held_out: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect();
            let train: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect();
            if held_out.len() < 2 || train.len() < 2 {
                return Err(Error::SplitTooSmall {
                    size: held_out.len().min(train.len()),
                    min: 2,
                });
            }
            let seed = rng::derive_seed(cfg.seed, Domain::CrossFitFolds, f as u64 + 1);
            let fits = fit_shared(
                &dataset.x_rows(&train),
                &dataset.y_rows(&train),
                learner,
                gaussian,
                seed,
                counters,
            )?;
            Ok(FoldFits { held_out, fits })
        })
        .collect()
}

/// Rescaled HRT statistic
/// `(sum eps_i xi_i - (1/2) sum (xi_i^2 - m2_i)) / (sqrt(n) sigma_n)`,
/// where `m2_i` is the conditional second moment of the resampled direction.
/// Pass resampled directions for `xi` to obtain the resampled statistic.
pub fn rhrt_from_arrays(eps: &[f64], xi: &[f64], m2: &[f64], sigma_n: f64) -> Result<f64> {
    if !(sigma_n > 0.0 && sigma_n.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma_n must be positive, got {sigma_n}")));
    }
    let n = eps.len();
    if xi.len() != n || m2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: xi.len().min(m2.len()),
        });
    }
    let cross: f64 = eps.iter().zip(xi).map(|(e, x)| e * x).sum();
    let correction: f64 = xi.iter().zip(m2).map(|(x, m)| x * x - m).sum();
    Ok((cross - 0.5 * correction) / ((n as f64).sqrt() * sigma_n))
}

pub fn rhrt_statistic(trace: &ResidualTrace, sigma_n: f64, m2: &[f64]) -> Result<f64> {
    rhrt_from_arrays(&trace.eps, &trace.xi_hat, m2, sigma_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_statistic() {
        let s = product_statistic(&[1.0, 3.0], 1.0);
        assert!((s.statistic - 2.828_427_124_746_19).abs() < 1e-6);
        assert!((s.sigma_hat - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_products_are_degenerate() {
        assert!(product_statistic(&[2.0; 10], 1.0).degenerate);
        assert!(product_statistic(&[0.0; 10], 0.0).degenerate);
        assert!(!product_statistic(&[1.0, 2.0, 0.5], 1.0).degenerate);
    }

    #[test]
    fn hrt_pvalue_formula() {
        assert_eq!(hrt_pvalue(1.0, &[2.0, 3.0, 4.0]), 0.25);
        assert_eq!(hrt_pvalue(1.0, &[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(hrt_pvalue(2.5, &[2.0, 3.0, 4.0]), 0.5);
    }

    #[test]
    fn banded_rest_columns() {
        assert_eq!(rest_columns(5, 0, StructureHint::Banded { bandwidth: 1 }), vec![1]);
        assert_eq!(rest_columns(5, 2, StructureHint::Banded { bandwidth: 1 }), vec![1, 3]);
        assert_eq!(rest_columns(5, 4, StructureHint::Banded { bandwidth: 2 }), vec![2, 3]);
        assert_eq!(rest_columns(3, 1, StructureHint::None), vec![0, 2]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("pcm".parse::<Method>().is_err());
    }

    #[test]
    fn rhrt_reduces_to_tpcm_when_corrections_vanish() {
        let eps = [0.5, -1.0, 2.0, 0.3];
        let xi = [1.0, 0.2, -0.4, 0.8];
        let m2: Vec<f64> = xi.iter().map(|x| x * x).collect();
        let products: Vec<f64> = eps.iter().zip(&xi).map(|(e, x)| e * x).collect();
        let stat = product_statistic(&products, 1.0);
        let r = rhrt_from_arrays(&eps, &xi, &m2, stat.sigma_hat).unwrap();
        assert!((r - stat.statistic).abs() < 1e-12);
        assert!(rhrt_from_arrays(&eps, &xi, &m2, 0.0).is_err());
    }

    #[test]
    fn folds_are_balanced() {
        let f = cross_fit_folds(23, 5, 1);
        let mut counts = [0; 5];
        f.iter().for_each(|&k| counts[k] += 1);
        assert!(counts.iter().all(|&c| c == 4 || c == 5));
    }
}
