//! Numerical checks of how the HRT, its rescaled form and tPCM relate:
//! the exact algebraic link between the HRT and tPCM statistics, the
//! HRT/rescaled-HRT decision identity, null calibration in a linear model and
//! the nuisance-error diagnostics.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counters::CostCounters;
use crate::data::{split_rows, Dataset, SplitAssignment};
use crate::error::{Error, Result};
use crate::gaussian::{chi2_gaussian_general, fit_sample_gaussian, ConditionalLaw, GaussianModel};
use crate::learners::{self, FittedRegression, LearnerConfig, MeanFunction};
use crate::methods::{
    hrt_pvalue, hrt_variable, mse, tpcm_trace, Holdout, Resampler, SharedFits, TestConfig,
};
use crate::pvalue::{binomial_se, ks_test_normal, normal_sf};
use crate::rng::{self, Domain};
use crate::FitTag;

/// Summary of one sample size of the linear-model suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub reps: usize,
    pub identity_max_abs_error: f64,
    /// Fraction of replicates where tPCM and HRT make the same decision.
    pub decision_agreement_rate: f64,
    pub agreement_se: f64,
    /// Fraction of replicates where HRT and rescaled HRT agree.
    pub rhrt_agreement_rate: f64,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub empirical_level: f64,
    pub level_se: f64,
    pub hrt_level: f64,
    /// Medians over replicates of the diagnostic terms.
    pub assumption_terms: BTreeMap<String, f64>,
}

impl EquivalenceReport {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.decision_agreement_rate,
            self.rhrt_agreement_rate,
            self.empirical_level,
            self.hrt_level,
            self.ks_pvalue,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidArgument("report rates must lie in [0, 1]".into()));
        }
        if !(self.identity_max_abs_error >= 0.0) || !(self.ks_statistic >= 0.0) {
            return Err(Error::InvalidArgument("report errors must be nonnegative".into()));
        }
        Ok(())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Absolute gap between the two sides of
/// `T_HRT = -(2 s / sqrt(n)) T_tPCM + mean(xi^2) + mean(eps^2)`,
/// with `eps = y - m_j`, `xi = m_full - m_j` and `s` the product sd.
pub fn hrt_identity_error(y: &[f64], m_full: &[f64], m_j: &[f64]) -> Result<f64> {
    let n = y.len();
    check_len(n, m_full.len())?;
    check_len(n, m_j.len())?;
    if n == 0 {
        return Err(Error::InvalidArgument("identity check needs at least one row".into()));
    }
    let nf = n as f64;
    let eps: Vec<f64> = y.iter().zip(m_j).map(|(a, b)| a - b).collect();
    let xi: Vec<f64> = m_full.iter().zip(m_j).map(|(a, b)| a - b).collect();
    let products: Vec<f64> = eps.iter().zip(&xi).map(|(e, x)| e * x).collect();
    let sum: f64 = products.iter().sum();
    let mean = sum / nf;
    let sd = (products.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let cross = if sd > 0.0 {
        let t = sum / (nf.sqrt() * sd);
        -(2.0 * sd / nf.sqrt()) * t
    } else {
        -2.0 * mean
    };
    let rhs = cross + xi.iter().map(|v| v * v).sum::<f64>() / nf + eps.iter().map(|v| v * v).sum::<f64>() / nf;
    Ok((mse(y, m_full) - rhs).abs())
}

/// Evaluates the identity on the test half for predictor `j`, with the
/// tower mean computed from `b` draws of the fitted law.
pub fn check_hrt_identity(
    dataset: &Dataset,
    split: &SplitAssignment,
    m_hat: &FittedRegression,
    l_hat: &GaussianModel,
    j: usize,
    b: usize,
    seed: u64,
) -> Result<f64> {
    let h = Holdout::new(dataset, split)?;
    let law = l_hat.conditional_law(j)?;
    if b == 0 {
        return Err(Error::InvalidArgument("identity check needs at least one resample".into()));
    }
    let r = Resampler::new(m_hat, &h.x1, &law, seed, j as u64)?;
    let m_j = r.tower_mean(Domain::TowerResample, b, &CostCounters::new());
    hrt_identity_error(&h.y1, r.base(), &m_j)
}

/// Rescaled-HRT p-value `(1 + #{b : resampled_b >= observed}) / (B + 1)`.
pub fn rhrt_pvalue(observed: f64, resampled: &[f64]) -> f64 {
    let count = resampled.iter().filter(|&&t| t >= observed).count();
    (1 + count) as f64 / (resampled.len() + 1) as f64
}

/// HRT and rescaled-HRT decisions for one predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionCheck {
    pub hrt_pvalue: f64,
    pub rhrt_pvalue: f64,
    pub hrt_reject: bool,
    pub rhrt_reject: bool,
    pub sigma_n: f64,
}

impl DecisionCheck {
    pub fn agree(&self) -> bool {
        self.hrt_reject == self.rhrt_reject
    }
}

/// Decisions from the two statistics and their resamples; the resample
/// arrays must come from the same draws, in the same order.
pub fn decision_from_statistics(
    hrt_observed: f64,
    hrt_resampled: &[f64],
    rhrt_observed: f64,
    rhrt_resampled: &[f64],
    alpha: f64,
    sigma_n: f64,
) -> Result<DecisionCheck> {
    if hrt_resampled.len() != rhrt_resampled.len() {
        return Err(Error::InvalidArgument(format!(
            "resample stream mismatch: {} HRT draws against {} rescaled draws",
            hrt_resampled.len(),
            rhrt_resampled.len()
        )));
    }
    let hrt_p = hrt_pvalue(hrt_observed, hrt_resampled);
    let rhrt_p = rhrt_pvalue(rhrt_observed, rhrt_resampled);
    Ok(DecisionCheck {
        hrt_pvalue: hrt_p,
        rhrt_pvalue: rhrt_p,
        hrt_reject: hrt_p <= alpha,
        rhrt_reject: rhrt_p <= alpha,
        sigma_n,
    })
}

struct ResamplePass {
    hrt_observed: f64,
    hrt_resampled: Vec<f64>,
    rhrt_observed: f64,
    rhrt_resampled: Vec<f64>,
    sigma_n: f64,
    m_j: Vec<f64>,
}

/// One pass over the HRT draws computing both statistics. `m_j` is the
/// tower mean, `m2` the conditional second moment of the resampled
/// direction and `sigma_n` the plug-in `sqrt(mean(eps^2 m2))`.
fn resample_pass(r: &Resampler<'_>, y: &[f64], cfg: &TestConfig, counters: &CostCounters) -> Result<ResamplePass> {
    let n = y.len();
    let m_j = r.tower_mean(Domain::TowerResample, cfg.b_tpcm, counters);
    let m2 = r.second_moment(&m_j, Domain::SigmaResample, cfg.b_sigma, counters);
    let eps: Vec<f64> = y.iter().zip(&m_j).map(|(a, b)| a - b).collect();
    let xi: Vec<f64> = r.base().iter().zip(&m_j).map(|(a, b)| a - b).collect();
    let s2 = eps.iter().zip(&m2).map(|(e, m)| e * e * m).sum::<f64>() / n as f64;
    // The decisions do not depend on the scale; any positive value works
    // when m_hat ignores the swept column.
    let sigma_n = if s2 > 0.0 && s2.is_finite() { s2.sqrt() } else { 1.0 };
    let rhrt_observed = crate::methods::rhrt_from_arrays(&eps, &xi, &m2, sigma_n)?;
    let mut draw = vec![0.0; n];
    let mut pred = vec![0.0; n];
    let mut xi_t = vec![0.0; n];
    let mut hrt_resampled = Vec::with_capacity(cfg.b_hrt);
    let mut rhrt_resampled = Vec::with_capacity(cfg.b_hrt);
    for b in 0..cfg.b_hrt {
        r.draw(Domain::HrtResample, b as u64, &mut draw, counters);
        r.predict(&draw, &mut pred, counters);
        hrt_resampled.push(mse(y, &pred));
        xi_t.iter_mut().zip(pred.iter().zip(&m_j)).for_each(|(o, (a, c))| *o = a - c);
        rhrt_resampled.push(crate::methods::rhrt_from_arrays(&eps, &xi_t, &m2, sigma_n)?);
    }
    Ok(ResamplePass {
        hrt_observed: mse(y, r.base()),
        hrt_resampled,
        rhrt_observed,
        rhrt_resampled,
        sigma_n,
        m_j,
    })
}

/// Runs the HRT for predictor `j` and the rescaled HRT on the same draws,
/// and checks that the HRT resamples reproduce those of the HRT itself.
pub fn check_decision_identity(
    dataset: &Dataset,
    split: &SplitAssignment,
    fits: &SharedFits,
    j: usize,
    cfg: &TestConfig,
) -> Result<DecisionCheck> {
    cfg.validate()?;
    let h = Holdout::new(dataset, split)?;
    if j >= fits.laws.len() {
        return Err(Error::InvalidArgument(format!("predictor {j} out of range")));
    }
    let counters = CostCounters::new();
    let reference = hrt_variable(fits, &h.x1, &h.y1, j, cfg, &counters)?;
    let r = Resampler::new(&fits.m_hat, &h.x1, &fits.laws[j], cfg.seed, j as u64)?;
    let pass = resample_pass(&r, &h.y1, cfg, &counters)?;
    if pass.hrt_observed != reference.observed || pass.hrt_resampled != reference.resampled {
        return Err(Error::InvalidArgument(
            "resample stream mismatch: rescaled HRT draws differ from the HRT draws".into(),
        ));
    }
    decision_from_statistics(
        reference.observed,
        &reference.resampled,
        pass.rhrt_observed,
        &pass.rhrt_resampled,
        cfg.alpha,
        pass.sigma_n,
    )
}

/// True conditional law of `X_j` and the true `E[Y | X_-j]`, the latter
/// evaluated on full rows (it must ignore column `j`).
#[derive(Clone)]
pub struct DiagnosticTruth {
    pub law: ConditionalLaw,
    pub m_j: MeanFunction,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Nuisance-error terms on the rows of `x` with responses `y`:
///
/// - `chi2_mean`: mean chi-square divergence of the fitted from the true law,
/// - `e2_lhat`: the same weighted by `E[xi^2 | X_-j]` and scaled by `n sigma_n^2`,
/// - `e2_mhat_prime`: weighted regression error, scaled likewise,
/// - `e2_mhat`: unweighted regression error scaled by `n sigma_n^2`,
/// - `e2_mhat_raw`: unweighted regression error scaled by `n` only,
/// - `dr_product`, `dr_product_raw`: `sqrt(n) E_lhat E_mhat` with either
///   version of `E_mhat`,
/// - `sigma_n2`: the plug-in `sigma_n^2`.
///
/// Conditional moments under the true law use `b` draws. A term whose
/// numerator is exactly zero is reported as zero.
pub fn diagnostics_on(
    x: &DMatrix<f64>,
    y: &[f64],
    m_hat: &FittedRegression,
    law_hat: &ConditionalLaw,
    truth: &DiagnosticTruth,
    b: usize,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let n = x.nrows();
    let j = truth.law.index;
    if law_hat.index != j {
        return Err(Error::InvalidArgument(format!(
            "fitted law is for predictor {}, truth for {j}",
            law_hat.index
        )));
    }
    check_len(n, y.len())?;
    if b < 2 || n == 0 {
        return Err(Error::InvalidArgument("diagnostics need rows and at least two draws".into()));
    }
    let counters = CostCounters::new();
    let r = Resampler::new(m_hat, x, &truth.law, seed, j as u64)?;
    let m_true: Vec<f64> = (0..n).map(|i| truth.m_j.call(&row(x, i))).collect();

    let mut draw = vec![0.0; n];
    let mut pred = vec![0.0; n];
    let mut reference = vec![0.0; n];
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut err = vec![0.0; n];
    for batch in 0..b {
        r.draw(Domain::Diagnostics, batch as u64, &mut draw, &counters);
        r.predict(&draw, &mut pred, &counters);
        if batch == 0 {
            reference.copy_from_slice(&pred);
        }
        for i in 0..n {
            let d = pred[i] - reference[i];
            s1[i] += d;
            s2[i] += d * d;
            err[i] += (pred[i] - m_true[i]).powi(2);
        }
    }
    let bf = b as f64;
    let v: Vec<f64> = (0..n).map(|i| (s2[i] / bf - (s1[i] / bf).powi(2)).max(0.0)).collect();
    let e: Vec<f64> = err.iter().map(|s| s / bf).collect();

    let hat_means = law_hat.means_for(x);
    let true_means = truth.law.means_for(x);
    let chi2 = (0..n)
        .map(|i| {
            if hat_means[i] == true_means[i] && law_hat.variance == truth.law.variance {
                Ok(0.0)
            } else {
                chi2_gaussian_general(hat_means[i], law_hat.variance, true_means[i], truth.law.variance)
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let nf = n as f64;
    let sigma2 = (0..n).map(|i| (y[i] - m_true[i]).powi(2) * v[i]).sum::<f64>() / nf;
    let chi_w: f64 = chi2.iter().zip(&v).map(|(c, v)| c * v).sum();
    let err_w: f64 = e.iter().zip(&v).map(|(a, v)| a * v).sum();
    let err_sum: f64 = e.iter().sum();

    let e2_lhat = ratio(chi_w, nf * sigma2);
    let e2_mhat = ratio(err_sum, nf * sigma2);
    let e2_mhat_raw = err_sum / nf;
    let mut out = BTreeMap::new();
    out.insert("chi2_mean".into(), chi2.iter().sum::<f64>() / nf);
    out.insert("e2_lhat".into(), e2_lhat);
    out.insert("e2_mhat_prime".into(), ratio(err_w, nf * sigma2));
    out.insert("e2_mhat".into(), e2_mhat);
    out.insert("e2_mhat_raw".into(), e2_mhat_raw);
    out.insert("dr_product".into(), nf.sqrt() * ratio_sqrt_product(e2_lhat, e2_mhat));
    out.insert("dr_product_raw".into(), nf.sqrt() * ratio_sqrt_product(e2_lhat, e2_mhat_raw));
    out.insert("sigma_n2".into(), sigma2);
    Ok(out)
}

fn ratio_sqrt_product(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a.sqrt() * b.sqrt()
    }
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Diagnostics for predictor `j` on the test half of `split`.
pub fn assumption_diagnostics(
    dataset: &Dataset,
    split: &SplitAssignment,
    fits: &SharedFits,
    j: usize,
    truth: &DiagnosticTruth,
    b: usize,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let h = Holdout::new(dataset, split)?;
    let law_hat = fits
        .laws
        .get(j)
        .ok_or_else(|| Error::InvalidArgument(format!("predictor {j} out of range")))?;
    diagnostics_on(&h.x1, &h.y1, &fits.m_hat, law_hat, truth, b, seed)
}

/// Linear model `Y = beta X_0 + Z'gamma + e`, `X_0 = Z'eta + d` with
/// `Z ~ Uniform(-sqrt(3), sqrt(3))^k` and standard normal `e`, `d`; `2n`
/// rows split in halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSuiteConfig {
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub beta: f64,
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    pub b_tpcm: usize,
    pub b_hrt: usize,
    pub b_sigma: usize,
    /// Draws for the diagnostic terms; 0 skips them.
    pub b_diagnostics: usize,
    pub seed: u64,
}

impl Default for LinearSuiteConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![500, 2000, 8000],
            reps: 500,
            beta: 0.0,
            eta: vec![0.5, -0.3, 0.2, 0.0],
            gamma: vec![1.0, 0.5, -0.5, 0.25],
            alpha: 0.05,
            b_tpcm: 25,
            b_hrt: 2000,
            b_sigma: 200,
            b_diagnostics: 200,
            seed: 0,
        }
    }
}

impl LinearSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta.is_empty() || self.eta.len() != self.gamma.len() {
            return Err(Error::InvalidArgument("eta and gamma must be nonempty and of equal length".into()));
        }
        if self.reps == 0 || self.n_grid.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument("need reps >= 1 and every n >= 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        if self.b_tpcm == 0 || self.b_hrt == 0 || self.b_sigma == 0 || self.b_diagnostics == 1 {
            return Err(Error::InvalidArgument("resample counts must be positive (diagnostics: 0 or >= 2)".into()));
        }
        if !(self.beta.is_finite() && self.eta.iter().chain(&self.gamma).all(|v| v.is_finite())) {
            return Err(Error::NonFinite("linear model coefficients".into()));
        }
        Ok(())
    }

    /// Known law of `X_0 | Z`.
    pub fn true_law(&self) -> ConditionalLaw {
        ConditionalLaw {
            index: 0,
            coefficients: self.eta.clone(),
            intercept: 0.0,
            variance: 1.0,
        }
    }

    /// Known `E[Y | Z]` evaluated on full rows.
    pub fn true_m_j(&self) -> MeanFunction {
        let gamma = self.gamma.clone();
        let eta = self.eta.clone();
        let beta = self.beta;
        MeanFunction::new(move |r: &[f64]| {
            let z = &r[1..];
            let lin: f64 = z.iter().zip(&gamma).map(|(a, g)| a * g).sum();
            let x0: f64 = z.iter().zip(&eta).map(|(a, e)| a * e).sum();
            lin + beta * x0
        })
    }

    /// Known `E[Y | X]` evaluated on full rows.
    pub fn true_mean(&self) -> MeanFunction {
        let gamma = self.gamma.clone();
        let beta = self.beta;
        MeanFunction::new(move |r: &[f64]| {
            beta * r[0] + r[1..].iter().zip(&gamma).map(|(a, g)| a * g).sum::<f64>()
        })
    }

    /// `2n` rows of the model, deterministic in `(seed, n, rep)`.
    pub fn generate(&self, n: usize, rep: usize) -> Result<Dataset> {
        let k = self.eta.len();
        let rows = 2 * n;
        let mut rng = rng::substream(self.seed, Domain::Replicate, rep as u64, n as u64);
        let half = 3f64.sqrt();
        let mut x = DMatrix::zeros(rows, k + 1);
        let mut y = Vec::with_capacity(rows);
        for i in 0..rows {
            let mut x0 = 0.0;
            let mut lin = 0.0;
            for c in 0..k {
                let z = rng.random_range(-half..half);
                x[(i, c + 1)] = z;
                x0 += self.eta[c] * z;
                lin += self.gamma[c] * z;
            }
            let d: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            x[(i, 0)] = x0 + d;
            y.push(self.beta * x[(i, 0)] + lin + e);
        }
        Dataset::new(x, y)
    }

    fn test_config(&self, n: usize, rep: usize) -> TestConfig {
        TestConfig {
            alpha: self.alpha,
            b_tpcm: self.b_tpcm,
            b_hrt: self.b_hrt,
            b_sigma: self.b_sigma,
            seed: rng::derive_seed(rng::derive_seed(self.seed, Domain::Instance, n as u64), Domain::Instance, rep as u64),
            ..TestConfig::default()
        }
    }
}

/// Per-replicate quantities of the linear-model suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReplicate {
    pub tpcm_statistic: f64,
    pub tpcm_pvalue: f64,
    pub hrt_pvalue: f64,
    pub rhrt_pvalue: f64,
    pub identity_error: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

/// OLS for `m_hat` and least-squares Gaussian fit for the law on the
/// training half, then tPCM, HRT and rescaled HRT for predictor 0.
pub fn linear_model_replicate(cfg: &LinearSuiteConfig, n: usize, rep: usize) -> Result<LinearReplicate> {
    let data = cfg.generate(n, rep)?;
    let tcfg = cfg.test_config(n, rep);
    let split = split_rows(2 * n, 0.5, tcfg.seed)?;
    let h = Holdout::new(&data, &split)?;
    let counters = CostCounters::new();
    let m_hat = learners::fit(&LearnerConfig::ols(), &h.x2, &h.y2, &counters, FitTag::YGivenX)?;
    let gaussian = fit_sample_gaussian(&h.x2)?;
    let laws = gaussian.conditional_laws();
    let fits = SharedFits { m_hat, gaussian, laws };

    let (_, stat) = tpcm_trace(&fits, &h.x1, &h.y1, 0, &tcfg, &counters)?;
    let r = Resampler::new(&fits.m_hat, &h.x1, &fits.laws[0], tcfg.seed, 0)?;
    let pass = resample_pass(&r, &h.y1, &tcfg, &counters)?;
    let decision = decision_from_statistics(
        pass.hrt_observed,
        &pass.hrt_resampled,
        pass.rhrt_observed,
        &pass.rhrt_resampled,
        cfg.alpha,
        pass.sigma_n,
    )?;
    let identity_error = hrt_identity_error(&h.y1, r.base(), &pass.m_j)?;
    let diagnostics = if cfg.b_diagnostics > 0 {
        let truth = DiagnosticTruth {
            law: cfg.true_law(),
            m_j: cfg.true_m_j(),
        };
        diagnostics_on(&h.x1, &h.y1, &fits.m_hat, &fits.laws[0], &truth, cfg.b_diagnostics, tcfg.seed)?
    } else {
        BTreeMap::new()
    };
    Ok(LinearReplicate {
        tpcm_statistic: stat.statistic,
        tpcm_pvalue: if stat.degenerate { 1.0 } else { normal_sf(stat.statistic) },
        hrt_pvalue: decision.hrt_pvalue,
        rhrt_pvalue: decision.rhrt_pvalue,
        identity_error,
        diagnostics,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Aggregates replicates at one sample size.
pub fn summarize(n: usize, alpha: f64, reps: &[LinearReplicate]) -> Result<EquivalenceReport> {
    let count = reps.len();
    if count == 0 {
        return Err(Error::InvalidArgument("no replicates to summarize".into()));
    }
    let frac = |f: &dyn Fn(&LinearReplicate) -> bool| reps.iter().filter(|r| f(r)).count() as f64 / count as f64;
    let agreement = frac(&|r| (r.tpcm_pvalue <= alpha) == (r.hrt_pvalue <= alpha));
    let level = frac(&|r| r.tpcm_pvalue <= alpha);
    let stats: Vec<f64> = reps.iter().map(|r| r.tpcm_statistic).collect();
    let ks = ks_test_normal(&stats)?;
    let mut terms = BTreeMap::new();
    for key in reps[0].diagnostics.keys() {
        let values: Vec<f64> = reps.iter().filter_map(|r| r.diagnostics.get(key).copied()).collect();
        terms.insert(key.clone(), median(values));
    }
    let report = EquivalenceReport {
        n,
        reps: count,
        identity_max_abs_error: reps.iter().map(|r| r.identity_error).fold(0.0, f64::max),
        decision_agreement_rate: agreement,
        agreement_se: binomial_se(agreement, count),
        rhrt_agreement_rate: frac(&|r| (r.hrt_pvalue <= alpha) == (r.rhrt_pvalue <= alpha)),
        ks_statistic: ks.statistic,
        ks_pvalue: ks.pvalue,
        empirical_level: level,
        level_se: binomial_se(alpha, count),
        hrt_level: frac(&|r| r.hrt_pvalue <= alpha),
        assumption_terms: terms,
    };
    report.validate()?;
    Ok(report)
}

/// One report per entry of `cfg.n_grid`; replicates run in parallel.
pub fn linear_model_suite(cfg: &LinearSuiteConfig) -> Result<Vec<EquivalenceReport>> {
    cfg.validate()?;
    cfg.n_grid
        .iter()
        .map(|&n| {
            let reps = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| linear_model_replicate(cfg, n, rep))
                .collect::<Result<Vec<_>>>()?;
            summarize(n, cfg.alpha, &reps)
        })
        .collect()
}
