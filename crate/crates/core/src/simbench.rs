//! Simulation study: a sparse additive model with AR(1) Gaussian predictors,
//! one-at-a-time parameter grids, Monte Carlo replication, FWER / power /
//! timing summaries, the large-p timing sweep, and CSV / JSON / SVG output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counters::{CostCounters, CounterSnapshot};
use crate::data::{split_data, Dataset};
use crate::error::{Error, Result};
use crate::gaussian::{ar1_covariance, sample_gaussian_rows, GaussianConfig, GaussianModel};
use crate::learners::{LearnerConfig, MeanFunction, SplineSelection};
use crate::methods::{
    fit_shared, hrt_with_fits, oracle_gcm_test, tgcm_test, tpcm_with_fits, vpcm_test, Holdout, Method,
    StructureHint, TestConfig, TestOutcome,
};
use crate::rng::{self, Domain};

/// One simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub rho: f64,
    pub theta: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Pins the nonnull set across replicates when set; otherwise it is
    /// redrawn for every replicate.
    pub nonnull_seed: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 1200,
            p: 50,
            s: 12,
            rho: 0.5,
            theta: 0.25,
            alpha: 0.05,
            replicates: 400,
            methods: vec![Method::Tpcm, Method::Vpcm, Method::Hrt, Method::OracleGcm],
            seed: 0,
            nonnull_seed: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.s > self.p {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= s <= p and p >= 1, got s = {}, p = {}",
                self.s, self.p
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("need |rho| < 1, got {}", self.rho)));
        }
        if !self.theta.is_finite() {
            return Err(Error::NonFinite("theta".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n < 4 {
            return Err(Error::InvalidArgument("need n >= 4".into()));
        }
        Ok(())
    }

    /// Copy with `param` set to `value`.
    pub fn with(&self, param: GridParam, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let whole = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidArgument(format!("{param} takes whole numbers, got {v}")))
            }
        };
        match param {
            GridParam::N => c.n = whole(value)?,
            GridParam::P => c.p = whole(value)?,
            GridParam::S => c.s = whole(value)?,
            GridParam::Rho => c.rho = value,
            GridParam::Theta => c.theta = value,
        }
        c.validate()?;
        Ok(c)
    }

    pub fn get(&self, param: GridParam) -> f64 {
        match param {
            GridParam::N => self.n as f64,
            GridParam::P => self.p as f64,
            GridParam::S => self.s as f64,
            GridParam::Rho => self.rho,
            GridParam::Theta => self.theta,
        }
    }

    fn label(&self) -> String {
        format!("n={},p={},s={},rho={},theta={}", self.n, self.p, self.s, self.rho, self.theta)
    }
}

/// Parameter varied by a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridParam {
    N,
    P,
    S,
    Rho,
    Theta,
}

impl GridParam {
    pub const ALL: [GridParam; 5] = [GridParam::N, GridParam::P, GridParam::S, GridParam::Rho, GridParam::Theta];

    pub fn as_str(&self) -> &'static str {
        match self {
            GridParam::N => "n",
            GridParam::P => "p",
            GridParam::S => "s",
            GridParam::Rho => "rho",
            GridParam::Theta => "theta",
        }
    }

    /// The five values of the standard grid for this parameter.
    pub fn standard_values(&self) -> Vec<f64> {
        match self {
            GridParam::N => vec![800.0, 1000.0, 1200.0, 1400.0, 1600.0],
            GridParam::P => vec![30.0, 40.0, 50.0, 60.0, 70.0],
            GridParam::S => vec![4.0, 8.0, 12.0, 16.0, 20.0],
            GridParam::Rho => vec![0.2, 0.35, 0.5, 0.65, 0.8],
            GridParam::Theta => vec![0.15, 0.2, 0.25, 0.3, 0.35],
        }
    }
}

impl fmt::Display for GridParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GridParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GridParam::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown grid parameter {s:?} (expected n, p, s, rho or theta)")))
    }
}

/// A generated replicate: data, nonnull mask and the true model.
#[derive(Clone)]
pub struct SimInstance {
    pub dataset: Dataset,
    pub truth: Vec<bool>,
    pub mean: MeanFunction,
    pub law: GaussianModel,
}

/// Contribution of nonnull coordinate `i` (0-based) at value `x`: odd
/// 1-based indices give `(x - 0.3)^2 theta / sqrt 2`, even ones
/// `-cos(x) theta`.
pub fn gam_term(i: usize, x: f64, theta: f64) -> f64 {
    if (i + 1) % 2 == 1 {
        (x - 0.3).powi(2) / std::f64::consts::SQRT_2 * theta
    } else {
        -x.cos() * theta
    }
}

/// `E[Y | X]` for nonnull set `nonnull`.
pub fn gam_mean(nonnull: Vec<usize>, theta: f64) -> MeanFunction {
    MeanFunction::new(move |r: &[f64]| nonnull.iter().map(|&i| gam_term(i, r[i], theta)).sum())
}

/// Draws replicate `replicate` of `cfg`.
pub fn generate_gam_dgp(cfg: &SimConfig, replicate: u64) -> Result<SimInstance> {
    cfg.validate()?;
    let cov = ar1_covariance(cfg.p, cfg.rho)?;
    let law = GaussianModel::oracle(DVector::zeros(cfg.p), &cov)?;
    let x = sample_gaussian_rows(&cov, cfg.n, cfg.seed, replicate)?;
    let (nn_seed, nn_index) = match cfg.nonnull_seed {
        Some(s) => (s, 0),
        None => (cfg.seed, replicate),
    };
    let mut nonnull = sample(&mut rng::substream(nn_seed, Domain::NonnullSet, nn_index, 0), cfg.p, cfg.s).into_vec();
    nonnull.sort_unstable();
    let mut truth = vec![false; cfg.p];
    nonnull.iter().for_each(|&i| truth[i] = true);
    let mean = gam_mean(nonnull, cfg.theta);
    let mut noise = rng::substream(cfg.seed, Domain::Noise, replicate, 0);
    let y = (0..cfg.n)
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let e: f64 = StandardNormal.sample(&mut noise);
            mean.call(&row) + e
        })
        .collect();
    Ok(SimInstance {
        dataset: Dataset::new(x, y)?,
        truth,
        mean,
        law,
    })
}

/// Learner, predictor-law estimator and test settings used by the methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    pub learner: LearnerConfig,
    pub gaussian: GaussianConfig,
    pub test: TestConfig,
}

impl Default for MethodSettings {
    /// Spline learner, banded precision with bandwidth 1 and the banded
    /// shortcut for the vPCM auxiliary regression.
    fn default() -> Self {
        Self {
            learner: LearnerConfig::default(),
            gaussian: GaussianConfig::banded(1),
            test: TestConfig {
                vpcm_structure: StructureHint::Banded { bandwidth: 1 },
                ..TestConfig::default()
            },
        }
    }
}

/// Setting a replicate belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingId {
    pub label: String,
    pub vary: Option<GridParam>,
    /// Value of the varied parameter; NaN (`null` in JSON) when nothing varies.
    #[serde(deserialize_with = "nan_if_null")]
    pub value: f64,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Outcome of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub setting: SettingId,
    pub replicate: usize,
    pub method: Method,
    pub rejections: Vec<bool>,
    pub pvalues: Vec<f64>,
    pub truth: Vec<bool>,
    pub seconds: f64,
    pub counters: CounterSnapshot,
    /// True when the nuisance fits (and their cost) are shared with
    /// another method of the same replicate.
    pub shared_fits: bool,
    pub error: Option<String>,
}

impl ReplicateResult {
    pub fn false_rejection(&self) -> bool {
        self.rejections.iter().zip(&self.truth).any(|(&r, &t)| r && !t)
    }

    /// Fraction of nonnulls rejected; `None` when there are none.
    pub fn power(&self) -> Option<f64> {
        let s = self.truth.iter().filter(|&&t| t).count();
        if s == 0 {
            return None;
        }
        let hits = self.rejections.iter().zip(&self.truth).filter(|(&r, &t)| r && t).count();
        Some(hits as f64 / s as f64)
    }
}

fn replicate_seed(base: u64, replicate: usize) -> u64 {
    rng::derive_seed(base, Domain::Replicate, replicate as u64)
}

fn finished(setting: &SettingId, replicate: usize, truth: &[bool], run: MethodRun) -> ReplicateResult {
    let mut r = ReplicateResult {
        setting: setting.clone(),
        replicate,
        method: run.method,
        rejections: Vec::new(),
        pvalues: Vec::new(),
        truth: truth.to_vec(),
        seconds: run.seconds,
        counters: run.counters,
        shared_fits: run.shared_fits,
        error: None,
    };
    match run.outcome {
        Ok(out) => {
            r.rejections = out.iter().map(|o| o.reject).collect();
            r.pvalues = out.iter().map(|o| o.pvalue).collect();
        }
        Err(e) => r.error = Some(e.to_string()),
    }
    r
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

/// One method's run on one dataset.
#[derive(Debug)]
pub struct MethodRun {
    pub method: Method,
    pub outcome: Result<Vec<TestOutcome>>,
    pub seconds: f64,
    pub counters: CounterSnapshot,
    /// The nuisance fits (and their time and counters) are shared with
    /// another method of the same run.
    pub shared_fits: bool,
}

/// Runs `methods` on `data`. tPCM and HRT share their split and nuisance
/// fits when both are requested; each then carries the shared fit's time
/// and counters. `oracle` supplies the true mean and law for the oracle
/// GCM. Method failures are returned per method.
pub fn run_methods(
    data: &Dataset,
    methods: &[Method],
    settings: &MethodSettings,
    cfg: &TestConfig,
    oracle: Option<(&MeanFunction, &GaussianModel)>,
) -> Vec<MethodRun> {
    let mut out = Vec::with_capacity(methods.len());
    let run = |method, res: Result<(Vec<TestOutcome>, f64)>, counters, shared| {
        let (outcome, seconds) = match res {
            Ok((o, s)) => (Ok(o), s),
            Err(e) => (Err(e), 0.0),
        };
        MethodRun {
            method,
            outcome,
            seconds,
            counters,
            shared_fits: shared,
        }
    };

    let wants_t = methods.contains(&Method::Tpcm);
    let wants_h = methods.contains(&Method::Hrt);
    if wants_t || wants_h {
        let shared = wants_t && wants_h;
        let fit_counters = CostCounters::new();
        let prepared = timed(|| {
            let split = split_data(data, cfg.train_proportion(Method::Tpcm), cfg.seed)?;
            let h = Holdout::new(data, &split)?;
            let fits = fit_shared(&h.x2, &h.y2, &settings.learner, &settings.gaussian, cfg.seed, &fit_counters)?;
            Ok((h, fits))
        });
        match prepared {
            Ok(((h, fits), fit_seconds)) => {
                let base = fit_counters.snapshot();
                for (method, wanted) in [(Method::Tpcm, wants_t), (Method::Hrt, wants_h)] {
                    if !wanted {
                        continue;
                    }
                    let c = CostCounters::new();
                    let res = timed(|| match method {
                        Method::Tpcm => tpcm_with_fits(data, &h, &fits, cfg, &c),
                        _ => hrt_with_fits(data, &h, &fits, cfg, &c),
                    })
                    .map(|(o, s)| (o, s + fit_seconds));
                    out.push(run(method, res, base + c.snapshot(), shared));
                }
            }
            Err(e) => {
                for method in [Method::Tpcm, Method::Hrt] {
                    if methods.contains(&method) {
                        let err = Err(Error::InvalidArgument(e.to_string()));
                        out.push(run(method, err, fit_counters.snapshot(), shared));
                    }
                }
            }
        }
    }
    for &method in methods {
        let c = CostCounters::new();
        let res = match method {
            Method::Tpcm | Method::Hrt => continue,
            Method::Vpcm => timed(|| {
                let split = split_data(data, cfg.train_proportion(Method::Vpcm), cfg.seed)?;
                vpcm_test(data, &split, &settings.learner, cfg, &c)
            }),
            Method::OracleGcm => match oracle {
                Some((mean, law)) => timed(|| oracle_gcm_test(data, mean, law, cfg, &c)),
                None => Err(Error::Unsupported("the oracle GCM needs the true mean and predictor law".into())),
            },
            Method::Tgcm => timed(|| tgcm_test(data, &settings.learner, &settings.gaussian, cfg, &c)),
        };
        out.push(run(method, res, c.snapshot(), false));
    }
    out
}

/// Runs `methods` on one replicate of `sim`.
pub fn run_replicate(
    sim: &SimConfig,
    settings: &MethodSettings,
    methods: &[Method],
    replicate: usize,
    setting: &SettingId,
) -> Result<Vec<ReplicateResult>> {
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let inst = generate_gam_dgp(sim, replicate as u64)?;
    let cfg = TestConfig {
        alpha: sim.alpha,
        seed: replicate_seed(sim.seed, replicate),
        ..settings.test.clone()
    };
    cfg.validate()?;
    let runs = run_methods(&inst.dataset, methods, settings, &cfg, Some((&inst.mean, &inst.law)));
    Ok(runs
        .into_iter()
        .map(|r| finished(setting, replicate, &inst.truth, r))
        .collect())
}

/// Options for a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub base: SimConfig,
    pub settings: MethodSettings,
    /// Parameter varied over `values`; `None` runs the base setting only.
    pub vary: Option<GridParam>,
    pub values: Vec<f64>,
    /// Run the HRT at every setting rather than only where the varied
    /// parameter equals its base value.
    pub hrt_everywhere: bool,
    pub workers: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            base: SimConfig::default(),
            settings: MethodSettings::default(),
            vary: None,
            values: Vec::new(),
            hrt_everywhere: false,
            workers: 1,
        }
    }
}

impl GridConfig {
    /// Settings of the grid, with the methods run at each.
    pub fn plan(&self) -> Result<Vec<(SimConfig, SettingId)>> {
        self.base.validate()?;
        let Some(param) = self.vary else {
            let id = SettingId {
                label: self.base.label(),
                vary: None,
                value: f64::NAN,
            };
            return Ok(vec![(self.base.clone(), id)]);
        };
        if self.values.is_empty() {
            return Err(Error::InvalidArgument(format!("no values given for {param}")));
        }
        self.values
            .iter()
            .map(|&v| {
                let mut c = self.base.with(param, v)?;
                let at_base = self.base.get(param) == v;
                if !(self.hrt_everywhere || at_base) {
                    c.methods.retain(|m| *m != Method::Hrt);
                }
                let id = SettingId {
                    label: c.label(),
                    vary: Some(param),
                    value: v,
                };
                Ok((c, id))
            })
            .collect()
    }
}

/// All replicate results of a grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultStore {
    pub grid: GridConfig,
    pub results: Vec<ReplicateResult>,
}

/// Runs every setting of the grid with `base.replicates` replicates on a
/// pool of `workers` threads. Results are ordered by setting, replicate and
/// method regardless of scheduling.
pub fn run_grid(grid: &GridConfig) -> Result<ResultStore> {
    let plan = grid.plan()?;
    let jobs: Vec<(usize, usize)> = (0..plan.len())
        .flat_map(|s| (0..plan[s].0.replicates).map(move |r| (s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let nested = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| {
                let (cfg, id) = &plan[s];
                run_replicate(cfg, &grid.settings, &cfg.methods, r, id)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ResultStore {
        grid: grid.clone(),
        results: nested.into_iter().flatten().collect(),
    })
}

/// Metric of a summary row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Fwer,
    Power,
    Seconds,
    Failures,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Fwer => "fwer",
            Metric::Power => "power",
            Metric::Seconds => "seconds",
            Metric::Failures => "failures",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Metric::Fwer, Metric::Power, Metric::Seconds, Metric::Failures]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub vary: String,
    #[serde(deserialize_with = "nan_if_null")]
    pub value: f64,
    pub method: Method,
    pub metric: Metric,
    pub estimate: Option<f64>,
    pub mc_se: Option<f64>,
}

/// Mean and `sd / sqrt(k)` with the `k - 1` divisor.
pub fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (Some(mean), Some((var / k as f64).sqrt()))
}

/// FWER, average power, mean seconds and failure count per setting and
/// method. Failed replicates are excluded from the first three.
pub fn compute_metrics(results: &[ReplicateResult]) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to summarize".into()));
    }
    let mut groups: Vec<((String, Method), Vec<&ReplicateResult>)> = Vec::new();
    let mut index: BTreeMap<(String, Method), usize> = BTreeMap::new();
    for r in results {
        let key = (r.setting.label.clone(), r.method);
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            groups.push((key, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(r);
    }
    let mut rows = Vec::new();
    for ((label, method), members) in groups {
        let ok: Vec<&ReplicateResult> = members.iter().copied().filter(|r| r.error.is_none()).collect();
        let first = members[0];
        let row = |metric, (estimate, mc_se): (Option<f64>, Option<f64>)| SummaryRow {
            setting: label.clone(),
            vary: first.setting.vary.map_or(String::new(), |v| v.to_string()),
            value: first.setting.value,
            method,
            metric,
            estimate,
            mc_se,
        };
        let fwer: Vec<f64> = ok.iter().map(|r| r.false_rejection() as u8 as f64).collect();
        let power: Vec<f64> = ok.iter().filter_map(|r| r.power()).collect();
        let secs: Vec<f64> = ok.iter().map(|r| r.seconds).collect();
        rows.push(row(Metric::Fwer, mean_and_se(&fwer)));
        rows.push(row(Metric::Power, mean_and_se(&power)));
        rows.push(row(Metric::Seconds, mean_and_se(&secs)));
        rows.push(row(Metric::Failures, (Some((members.len() - ok.len()) as f64), None)));
    }
    Ok(rows)
}

/// Output format of [`emit_results`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:?}"))
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

/// Writes the summary as CSV with columns
/// `setting, vary, value, method, metric, estimate, mc_se`.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["setting", "vary", "value", "method", "metric", "estimate", "mc_se"])?;
    for r in rows {
        w.write_record([
            r.setting.clone(),
            r.vary.clone(),
            fmt_value(r.value),
            r.method.as_str().to_string(),
            r.metric.as_str().to_string(),
            fmt_opt(r.estimate),
            fmt_opt(r.mc_se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a summary written by [`write_summary_csv`].
pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let parse = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::InvalidDataset(format!("not a number: {s:?}")))
        }
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 7 {
            return Err(Error::InvalidDataset(format!("summary rows need 7 fields, found {}", rec.len())));
        }
        rows.push(SummaryRow {
            setting: rec[0].to_string(),
            vary: rec[1].to_string(),
            value: parse(&rec[2])?.unwrap_or(f64::NAN),
            method: rec[3].parse()?,
            metric: rec[4].parse()?,
            estimate: parse(&rec[5])?,
            mc_se: parse(&rec[6])?,
        });
    }
    Ok(rows)
}

/// Writes the summary of `store` to `path`: CSV summary rows, or JSON with
/// the grid, the summary and every replicate result.
pub fn emit_results(store: &ResultStore, format: Format, path: &Path) -> Result<Vec<SummaryRow>> {
    let rows = compute_metrics(&store.results)?;
    let file = fs::File::create(path)?;
    match format {
        Format::Csv => write_summary_csv(&rows, file)?,
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                grid: &'a GridConfig,
                summary: &'a [SummaryRow],
                results: &'a [ReplicateResult],
            }
            serde_json::to_writer_pretty(
                std::io::BufWriter::new(file),
                &Out {
                    grid: &store.grid,
                    summary: &rows,
                    results: &store.results,
                },
            )?;
        }
    }
    Ok(rows)
}

/// One SVG per varied parameter and metric (FWER, power, seconds), with a
/// line per method and `+/- 2 SE` error bars. Rows without an estimate are
/// left out. Returns the files written.
pub fn emit_plots(rows: &[SummaryRow], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    use plotters::prelude::*;

    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut panels: BTreeMap<(String, Metric), BTreeMap<Method, Vec<(f64, f64, f64)>>> = BTreeMap::new();
    for r in rows {
        if r.metric == Metric::Failures || r.value.is_nan() {
            continue;
        }
        let Some(est) = r.estimate else { continue };
        let se = r.mc_se.unwrap_or(0.0);
        panels
            .entry((r.vary.clone(), r.metric))
            .or_default()
            .entry(r.method)
            .or_default()
            .push((r.value, est, se));
    }
    let palette = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];
    for ((vary, metric), series) in panels {
        let name = if vary.is_empty() { "base".to_string() } else { vary.clone() };
        let path = dir.join(format!("{name}_{}.svg", metric.as_str()));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for pts in series.values() {
            for &(x, y, se) in pts {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y - 2.0 * se);
                y1 = y1.max(y + 2.0 * se);
            }
        }
        let pad_x = if x1 > x0 { 0.05 * (x1 - x0) } else { 0.5 };
        let pad_y = if y1 > y0 { 0.05 * (y1 - y0) } else { 0.05 };
        let draw = || -> std::result::Result<(), Box<dyn std::error::Error>> {
            let root = SVGBackend::new(&path, (640, 420)).into_drawing_area();
            root.fill(&WHITE)?;
            let mut chart = ChartBuilder::on(&root)
                .margin(20)
                .x_label_area_size(40)
                .y_label_area_size(60)
                .build_cartesian_2d((x0 - pad_x)..(x1 + pad_x), (y0 - pad_y)..(y1 + pad_y))?;
            chart
                .configure_mesh()
                .x_desc(name.as_str())
                .y_desc(metric.as_str())
                .draw()?;
            for (k, (method, pts)) in series.iter().enumerate() {
                let color = palette[k % palette.len()];
                let mut pts = pts.clone();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                chart
                    .draw_series(LineSeries::new(pts.iter().map(|&(x, y, _)| (x, y)), color.stroke_width(2)))?
                    .label(method.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
                chart.draw_series(pts.iter().map(|&(x, y, se)| {
                    ErrorBar::new_vertical(x, y - 2.0 * se, y, y + 2.0 * se, color.filled(), 6)
                }))?;
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()?;
            root.present()?;
            Ok(())
        };
        draw().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        written.push(path);
    }
    Ok(written)
}

/// Wall time and counters of one method at one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub p: usize,
    pub method: Method,
    pub seconds: f64,
    pub resamples: usize,
    pub counters: CounterSnapshot,
}

/// Resamples for the HRT at dimension `p`: `ceil(5 p / alpha)`.
pub fn hrt_resamples(p: usize, alpha: f64) -> usize {
    (5.0 * p as f64 / alpha).ceil() as usize
}

/// Learner used by the timing sweep: a small spline basis at a fixed
/// penalty, so that fits over hundreds of columns stay tractable.
pub fn timing_learner() -> LearnerConfig {
    LearnerConfig {
        spline_basis_size: 5,
        spline_lambda_grid: vec![1.0],
        spline_selection: SplineSelection::Fixed,
        ..LearnerConfig::default()
    }
}

/// Single runs of each method at every `p`, on one thread, each method
/// fitting its own nuisances. `base` supplies the remaining parameters.
pub fn timing_sweep(
    base: &SimConfig,
    p_values: &[usize],
    methods: &[Method],
    settings: &MethodSettings,
) -> Result<Vec<TimingRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for &p in p_values {
        let sim = SimConfig {
            p,
            s: base.s.min(p),
            ..base.clone()
        };
        let inst = generate_gam_dgp(&sim, 0)?;
        let b_hrt = hrt_resamples(p, sim.alpha);
        let cfg = TestConfig {
            alpha: sim.alpha,
            b_hrt,
            seed: replicate_seed(sim.seed, 0),
            ..settings.test.clone()
        };
        for &method in methods {
            let c = CostCounters::new();
            let data = &inst.dataset;
            let ((), seconds) = pool.install(|| {
                timed(|| {
                    match method {
                        Method::Tpcm | Method::Hrt => {
                            let split = split_data(data, cfg.train_proportion(method), cfg.seed)?;
                            let h = Holdout::new(data, &split)?;
                            let fits = fit_shared(&h.x2, &h.y2, &settings.learner, &settings.gaussian, cfg.seed, &c)?;
                            if method == Method::Tpcm {
                                tpcm_with_fits(data, &h, &fits, &cfg, &c)?;
                            } else {
                                hrt_with_fits(data, &h, &fits, &cfg, &c)?;
                            }
                        }
                        Method::Vpcm => {
                            let split = split_data(data, cfg.train_proportion(method), cfg.seed)?;
                            vpcm_test(data, &split, &settings.learner, &cfg, &c)?;
                        }
                        Method::OracleGcm => {
                            oracle_gcm_test(data, &inst.mean, &inst.law, &cfg, &c)?;
                        }
                        Method::Tgcm => {
                            tgcm_test(data, &settings.learner, &settings.gaussian, &cfg, &c)?;
                        }
                    }
                    Ok(())
                })
            })?;
            let resamples = match method {
                Method::Hrt => b_hrt,
                Method::Tpcm => cfg.b_tpcm,
                Method::OracleGcm | Method::Tgcm => cfg.b_gcm,
                Method::Vpcm => 0,
            };
            rows.push(TimingRow {
                p,
                method,
                seconds,
                resamples,
                counters: c.snapshot(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gam_terms() {
        assert_eq!(gam_term(0, 0.3, 0.25), 0.0);
        assert_eq!(gam_term(1, 0.0, 0.25), -0.25);
        assert!((gam_term(2, 1.3, 1.0) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_param_round_trip() {
        for g in GridParam::ALL {
            assert_eq!(g.as_str().parse::<GridParam>().unwrap(), g);
            assert_eq!(g.standard_values().len(), 5);
            assert!(g.standard_values().contains(&SimConfig::default().get(g)));
        }
    }

    #[test]
    fn with_rejects_bad_values() {
        let c = SimConfig::default();
        assert!(c.with(GridParam::S, 60.0).is_err());
        assert!(c.with(GridParam::N, 10.5).is_err());
        assert!(c.with(GridParam::Rho, 1.0).is_err());
        assert_eq!(c.with(GridParam::Theta, 0.0).unwrap().theta, 0.0);
    }

    #[test]
    fn hrt_resample_rule() {
        assert_eq!(hrt_resamples(100, 0.05), 10_000);
        assert_eq!(hrt_resamples(200, 0.05), 20_000);
    }

    #[test]
    fn mean_and_se_small_cases() {
        assert_eq!(mean_and_se(&[]), (None, None));
        assert_eq!(mean_and_se(&[2.0]), (Some(2.0), None));
        let (m, se) = mean_and_se(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(m, Some(0.5));
        assert!((se.unwrap() - (1.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
