//! Multivariate Gaussian models for the predictors.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Floor on conditional variances.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Sample,
    #[default]
    Banded,
    Glasso,
    Oracle,
}

/// `N(mean, precision^-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    estimator: Estimator,
}

/// Law of `X_j` given the other coordinates, which are passed in their
/// original order with `j` removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLaw {
    pub index: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub variance: f64,
}

impl ConditionalLaw {
    pub fn mean_given(&self, rest: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(rest).map(|(c, z)| c * z).sum::<f64>()
    }

    /// Conditional mean using a full row and ignoring its `index` entry.
    pub fn mean_given_row(&self, row: impl Iterator<Item = f64>) -> f64 {
        let j = self.index;
        let mut acc = self.intercept;
        for (k, v) in row.enumerate() {
            if k != j {
                acc += v * self.coefficients[if k < j { k } else { k - 1 }];
            }
        }
        acc
    }

    /// Conditional means for every row of a full predictor matrix.
    pub fn means_for(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let j = self.index;
        let mut out = vec![self.intercept; x.nrows()];
        for k in 0..x.ncols() {
            if k == j {
                continue;
            }
            let c = self.coefficients[if k < j { k } else { k - 1 }];
            for (o, v) in out.iter_mut().zip(x.column(k).iter()) {
                *o += c * v;
            }
        }
        out
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `count` independent draws from the law at `rest`.
pub fn sample_conditional<R: Rng + ?Sized>(
    law: &ConditionalLaw,
    rest: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mean = law.mean_given(rest);
    let sd = law.sd();
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * z
        })
        .collect()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for k in 0..i {
            let v = 0.5 * (m[(i, k)] + m[(k, i)]);
            m[(i, k)] = v;
            m[(k, i)] = v;
        }
    }
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, mut precision: DMatrix<f64>, estimator: Estimator) -> Result<Self> {
        let p = mean.len();
        if precision.nrows() != p || precision.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: precision.nrows(),
            });
        }
        if precision.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian parameters".into()));
        }
        let asym = (0..p)
            .flat_map(|i| (0..i).map(move |k| (i, k)))
            .map(|(i, k)| (precision[(i, k)] - precision[(k, i)]).abs())
            .fold(0.0, f64::max);
        let scale = precision.amax().max(1.0);
        if asym > 1e-8 * scale {
            return Err(Error::InvalidArgument("precision matrix is not symmetric".into()));
        }
        symmetrize(&mut precision);
        if precision.diagonal().iter().any(|&d| d <= 0.0) || precision.clone().cholesky().is_none() {
            return Err(Error::Singular("precision matrix is not positive definite".into()));
        }
        Ok(Self {
            mean,
            precision,
            estimator,
        })
    }

    /// The true law given by its mean and covariance.
    pub fn oracle(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        let precision = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?
            .inverse();
        Self::new(mean, precision, Estimator::Oracle)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = self
            .precision
            .clone()
            .cholesky()
            .expect("checked at construction")
            .inverse();
        symmetrize(&mut c);
        c
    }

    pub fn conditional_law(&self, j: usize) -> Result<ConditionalLaw> {
        let p = self.dim();
        if j >= p {
            return Err(Error::InvalidArgument(format!("coordinate {j} out of range for p = {p}")));
        }
        let tjj = self.precision[(j, j)];
        if tjj <= 0.0 {
            return Err(Error::Singular(format!("precision[{j},{j}] = {tjj}")));
        }
        let coefficients: Vec<f64> = (0..p)
            .filter(|&k| k != j)
            .map(|k| -self.precision[(j, k)] / tjj)
            .collect();
        let shift: f64 = (0..p)
            .filter(|&k| k != j)
            .zip(&coefficients)
            .map(|(k, c)| c * self.mean[k])
            .sum();
        Ok(ConditionalLaw {
            index: j,
            coefficients,
            intercept: self.mean[j] - shift,
            variance: (1.0 / tjj).max(VARIANCE_FLOOR),
        })
    }

    pub fn conditional_laws(&self) -> Vec<ConditionalLaw> {
        (0..self.dim())
            .map(|j| self.conditional_law(j).expect("valid precision"))
            .collect()
    }

    /// `n` rows drawn from the model.
    pub fn sample_rows<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.dim();
        let l = self.covariance().cholesky().expect("covariance is positive definite").l();
        let z = DMatrix::<f64>::from_fn(p, n, |_, _| StandardNormal.sample(rng));
        let draws = l * z;
        DMatrix::from_fn(n, p, |i, k| self.mean[k] + draws[(k, i)])
    }

    /// Writes the precision matrix as CSV with a header row of column names.
    pub fn precision_to_csv<W: Write>(&self, writer: W, names: &[String]) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(names)?;
        for i in 0..self.dim() {
            wtr.write_record(self.precision.row(i).iter().map(|v| format!("{v}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_design(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictor matrix".into()));
    }
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 rows and 1 column, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), (0..x.ncols()).map(|k| x.column(k).mean()))
}

fn centered(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| x[(i, k)] - mean[k])
}

/// Covariance with divisor `divisor`.
fn scatter(x: &DMatrix<f64>, mean: &DVector<f64>, divisor: f64) -> DMatrix<f64> {
    let xc = centered(x, mean);
    let mut s = xc.tr_mul(&xc) / divisor;
    symmetrize(&mut s);
    s
}

/// Mean and inverse unbiased sample covariance.
pub fn fit_sample_gaussian(x: &DMatrix<f64>) -> Result<GaussianModel> {
    check_design(x)?;
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::Singular(format!("sample covariance needs n > p, got n = {n}, p = {p}")));
    }
    let mean = column_means(x);
    let s = scatter(x, &mean, (n - 1) as f64);
    let precision = s
        .cholesky()
        .ok_or_else(|| Error::Singular("sample covariance is singular".into()))?
        .inverse();
    GaussianModel::new(mean, precision, Estimator::Sample)
}

/// Banded precision from the modified Cholesky decomposition: each column is
/// regressed on at most `bandwidth` predecessors.
pub fn fit_banded_precision(x: &DMatrix<f64>, bandwidth: usize) -> Result<GaussianModel> {
    check_design(x)?;
    let (n, p) = x.shape();
    if n <= bandwidth + 1 {
        return Err(Error::InvalidArgument(format!(
            "banded estimator needs n > bandwidth + 1, got n = {n}, bandwidth = {bandwidth}"
        )));
    }
    let mean = column_means(x);
    let s = scatter(x, &mean, (n - 1) as f64);
    // T is unit lower triangular with -phi below the diagonal; precision is
    // T' D^-1 T.
    let mut t = DMatrix::<f64>::identity(p, p);
    let mut d = vec![0.0; p];
    for j in 0..p {
        let lo = j.saturating_sub(bandwidth);
        let k = j - lo;
        if k == 0 {
            d[j] = s[(j, j)];
        } else {
            let block = s.view((lo, lo), (k, k)).into_owned();
            let rhs = s.view((lo, j), (k, 1)).into_owned();
            let chol = block.cholesky().ok_or_else(|| {
                Error::Singular(format!("predecessors of column {j} are collinear"))
            })?;
            let phi = chol.solve(&rhs);
            d[j] = s[(j, j)] - (rhs.transpose() * &phi)[(0, 0)];
            for c in 0..k {
                t[(j, lo + c)] = -phi[(c, 0)];
            }
        }
        if !(d[j] > 1e-10 * s[(j, j)]) {
            return Err(Error::Singular(format!("column {j} is explained exactly by its predecessors")));
        }
    }
    let dinv = DMatrix::from_diagonal(&DVector::from_iterator(p, d.iter().map(|v| 1.0 / v)));
    let mut precision = t.transpose() * dinv * &t;
    for i in 0..p {
        for k in 0..p {
            if i.abs_diff(k) > bandwidth {
                precision[(i, k)] = 0.0;
            }
        }
    }
    GaussianModel::new(mean, precision, Estimator::Banded)
}

/// Settings of the graphical lasso solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoSettings {
    pub max_sweeps: usize,
    /// Convergence threshold on the mean absolute change of `W`, relative to
    /// the mean absolute off-diagonal of `S`.
    pub tolerance: f64,
}

impl Default for GlassoSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 500,
            tolerance: 1e-8,
        }
    }
}

/// Solution at one penalty level.
#[derive(Debug, Clone)]
pub struct GlassoSolution {
    pub precision: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub lambda: f64,
    pub sweeps: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Graphical lasso with an unpenalized diagonal,
/// `max log det(Theta) - tr(S Theta) - lambda * sum_{i != k} |Theta_ik|`,
/// by blockwise coordinate descent on `W = Theta^-1`.
///
/// `warm` supplies a starting `W` and matching regression coefficients.
pub fn graphical_lasso(
    s: &DMatrix<f64>,
    lambda: f64,
    settings: &GlassoSettings,
    warm: Option<&GlassoSolution>,
) -> Result<GlassoSolution> {
    let p = s.nrows();
    let mut w = match warm {
        Some(sol) => sol.covariance.clone(),
        None => s.clone(),
    };
    // beta[j] holds the lasso coefficients of column j on the others.
    let mut beta = DMatrix::<f64>::zeros(p, p);
    if let Some(sol) = warm {
        for j in 0..p {
            let tjj = sol.precision[(j, j)];
            for k in 0..p {
                if k != j {
                    beta[(k, j)] = -sol.precision[(k, j)] / tjj;
                }
            }
        }
    }
    let off_mean = if p > 1 {
        (0..p)
            .flat_map(|i| (0..p).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| s[(i, k)].abs())
            .sum::<f64>()
            / (p * (p - 1)) as f64
    } else {
        0.0
    };
    let threshold = settings.tolerance * off_mean.max(f64::MIN_POSITIVE);
    let mut sweeps = 0;
    let mut change = f64::INFINITY;
    while p > 1 && sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut total_change = 0.0;
        for j in 0..p {
            // Lasso: min 1/2 b' W11 b - b' s12 + lambda |b|_1 over k != j.
            let mut b: Vec<f64> = (0..p).map(|k| if k == j { 0.0 } else { beta[(k, j)] }).collect();
            let mut wb: Vec<f64> = (0..p)
                .map(|r| (0..p).filter(|&k| k != j).map(|k| w[(r, k)] * b[k]).sum())
                .collect();
            for _ in 0..10_000 {
                let mut delta: f64 = 0.0;
                for k in 0..p {
                    if k == j {
                        continue;
                    }
                    let wkk = w[(k, k)];
                    let partial = s[(k, j)] - (wb[k] - wkk * b[k]);
                    let new = soft_threshold(partial, lambda) / wkk;
                    let step = new - b[k];
                    if step != 0.0 {
                        for r in 0..p {
                            wb[r] += w[(r, k)] * step;
                        }
                        b[k] = new;
                        delta = delta.max(step.abs() * wkk.sqrt());
                    }
                }
                if delta < 1e-12 {
                    break;
                }
            }
            for k in 0..p {
                if k != j {
                    beta[(k, j)] = b[k];
                    total_change += (wb[k] - w[(k, j)]).abs();
                    w[(k, j)] = wb[k];
                    w[(j, k)] = wb[k];
                }
            }
        }
        change = total_change / (p * (p - 1)) as f64;
        if change < threshold {
            break;
        }
    }
    if p > 1 && change >= threshold {
        return Err(Error::NoConvergence {
            sweeps,
            lambda,
            change,
        });
    }
    let mut theta = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let w12b: f64 = (0..p).filter(|&k| k != j).map(|k| w[(k, j)] * beta[(k, j)]).sum();
        let tjj = 1.0 / (w[(j, j)] - w12b);
        theta[(j, j)] = tjj;
        for k in 0..p {
            if k != j {
                theta[(k, j)] = -beta[(k, j)] * tjj;
            }
        }
    }
    for i in 0..p {
        for k in 0..i {
            let (a, b) = (theta[(i, k)], theta[(k, i)]);
            let v = if a == 0.0 || b == 0.0 { 0.0 } else { 0.5 * (a + b) };
            theta[(i, k)] = v;
            theta[(k, i)] = v;
        }
    }
    Ok(GlassoSolution {
        precision: theta,
        covariance: w,
        lambda,
        sweeps,
    })
}

/// Largest violation of the glasso optimality conditions at `theta`.
pub fn glasso_kkt_residual(s: &DMatrix<f64>, theta: &DMatrix<f64>, lambda: f64) -> f64 {
    let p = s.nrows();
    let w = match theta.clone().cholesky() {
        Some(c) => c.inverse(),
        None => return f64::INFINITY,
    };
    let mut worst: f64 = 0.0;
    for i in 0..p {
        worst = worst.max((s[(i, i)] - w[(i, i)]).abs());
        for k in 0..p {
            if k == i {
                continue;
            }
            let g = s[(i, k)] - w[(i, k)];
            let r = if theta[(i, k)] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * theta[(i, k)].signum()).abs()
            };
            worst = worst.max(r);
        }
    }
    worst
}

/// Covariance of `x` with divisor `n`, as used by the graphical lasso.
pub fn mle_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    scatter(x, &column_means(x), x.nrows() as f64)
}

/// Default penalty grid: `count` log-spaced values from the largest absolute
/// off-diagonal covariance down to `min_ratio` times it.
pub fn glasso_default_grid(x: &DMatrix<f64>, count: usize, min_ratio: f64) -> Vec<f64> {
    let s = mle_covariance(x);
    let p = s.nrows();
    let lmax = (0..p)
        .flat_map(|i| (0..p).filter(move |&k| k != i).map(move |k| (i, k)))
        .map(|(i, k)| s[(i, k)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    crate::learners::log_grid(lmax, lmax * min_ratio, count)
}

/// Penalty level chosen by cross-validation together with the per-level
/// held-out scores.
#[derive(Debug, Clone)]
pub struct GlassoPath {
    pub model: GaussianModel,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub cv_scores: Vec<f64>,
    pub solutions: Vec<GlassoSolution>,
    pub sample_covariance: DMatrix<f64>,
}

/// Graphical lasso path over `lambda_grid` (solved from largest to smallest),
/// selecting the level with the highest held-out Gaussian log-likelihood
/// `log det(Theta) - tr(S_test Theta)` averaged over `cv_folds` folds.
pub fn fit_graphical_lasso(
    x: &DMatrix<f64>,
    lambda_grid: &[f64],
    cv_folds: usize,
    seed: u64,
) -> Result<GlassoPath> {
    fit_graphical_lasso_with(x, lambda_grid, cv_folds, seed, &GlassoSettings::default())
}

pub fn fit_graphical_lasso_with(
    x: &DMatrix<f64>,
    lambda_grid: &[f64],
    cv_folds: usize,
    seed: u64,
    settings: &GlassoSettings,
) -> Result<GlassoPath> {
    check_design(x)?;
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("glasso grid must be a nonempty list of values >= 0".into()));
    }
    let n = x.nrows();
    if cv_folds < 2 || cv_folds > n / 2 {
        return Err(Error::InvalidArgument(format!(
            "cv_folds must lie in [2, n/2], got {cv_folds} for n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..lambda_grid.len()).collect();
    order.sort_by(|&a, &b| lambda_grid[b].total_cmp(&lambda_grid[a]));

    let path = |s: &DMatrix<f64>| -> Result<Vec<GlassoSolution>> {
        let mut sols: Vec<Option<GlassoSolution>> = vec![None; lambda_grid.len()];
        let mut prev: Option<GlassoSolution> = None;
        for &g in &order {
            let sol = graphical_lasso(s, lambda_grid[g], settings, prev.as_ref())?;
            prev = Some(sol.clone());
            sols[g] = Some(sol);
        }
        Ok(sols.into_iter().map(|s| s.expect("every level solved")).collect())
    };

    let mut perm: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng::stream(seed, Domain::CvFolds));
    }
    let mut scores = vec![0.0; lambda_grid.len()];
    for f in 0..cv_folds {
        let (test, train): (Vec<usize>, Vec<usize>) = perm
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos % cv_folds == f, i))
            .fold((Vec::new(), Vec::new()), |(mut te, mut tr), (is_test, i)| {
                if is_test {
                    te.push(i)
                } else {
                    tr.push(i)
                }
                (te, tr)
            });
        let s_train = mle_covariance(&x.select_rows(&train));
        let s_test = mle_covariance(&x.select_rows(&test));
        for (g, sol) in path(&s_train)?.iter().enumerate() {
            let logdet = match sol.precision.clone().cholesky() {
                Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
                None => f64::NEG_INFINITY,
            };
            scores[g] += (logdet - (&s_test * &sol.precision).trace()) / cv_folds as f64;
        }
    }
    let best = (0..lambda_grid.len())
        .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
        .expect("nonempty grid");
    let s = mle_covariance(x);
    let solutions = path(&s)?;
    let model = GaussianModel::new(column_means(x), solutions[best].precision.clone(), Estimator::Glasso)?;
    Ok(GlassoPath {
        model,
        lambda: lambda_grid[best],
        lambda_grid: lambda_grid.to_vec(),
        cv_scores: scores,
        solutions,
        sample_covariance: s,
    })
}

/// How the predictor law is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianConfig {
    pub estimator: Estimator,
    /// Bandwidth of the banded estimator.
    pub bandwidth: usize,
    pub glasso_grid_size: usize,
    pub glasso_min_ratio: f64,
    pub glasso_cv_folds: usize,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Banded,
            bandwidth: 1,
            glasso_grid_size: 20,
            glasso_min_ratio: 1e-6,
            glasso_cv_folds: 5,
        }
    }
}

impl GaussianConfig {
    pub fn sample() -> Self {
        Self {
            estimator: Estimator::Sample,
            ..Self::default()
        }
    }

    pub fn banded(bandwidth: usize) -> Self {
        Self {
            estimator: Estimator::Banded,
            bandwidth,
            ..Self::default()
        }
    }

    pub fn glasso() -> Self {
        Self {
            estimator: Estimator::Glasso,
            ..Self::default()
        }
    }

    /// Estimates the law of the rows of `x`. `seed` drives the glasso folds.
    pub fn fit(&self, x: &DMatrix<f64>, seed: u64) -> Result<GaussianModel> {
        match self.estimator {
            Estimator::Sample => fit_sample_gaussian(x),
            Estimator::Banded => fit_banded_precision(x, self.bandwidth),
            Estimator::Glasso => {
                let grid = glasso_default_grid(x, self.glasso_grid_size.max(1), self.glasso_min_ratio);
                Ok(fit_graphical_lasso(x, &grid, self.glasso_cv_folds, seed)?.model)
            }
            Estimator::Oracle => Err(Error::InvalidArgument(
                "the oracle predictor law is supplied directly, not estimated".into(),
            )),
        }
    }
}

/// `chi^2(N(mu, sigma2) || N(nu, sigma2)) = exp((mu - nu)^2 / sigma2) - 1`.
pub fn chi2_gaussian(mu: f64, nu: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {sigma2}")));
    }
    Ok(((mu - nu).powi(2) / sigma2).exp_m1())
}

/// `chi^2(N(mu1, var1) || N(mu2, var2))`; infinite when `2 var2 <= var1`.
pub fn chi2_gaussian_general(mu1: f64, var1: f64, mu2: f64, var2: f64) -> Result<f64> {
    if !(var1 > 0.0 && var2 > 0.0) {
        return Err(Error::InvalidArgument("variances must be positive".into()));
    }
    let denom = 2.0 * var2 - var1;
    if denom <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(var2 / (var1 * denom).sqrt() * ((mu1 - mu2).powi(2) / denom).exp() - 1.0)
}

/// `Sigma_ik = rho^|i-k|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("AR(1) parameter must satisfy |rho| < 1, got {rho}")));
    }
    Ok(DMatrix::from_fn(p, p, |i, k| rho.powi(i.abs_diff(k) as i32)))
}

/// Draws `n` rows from `N(0, Sigma)`.
pub fn sample_gaussian_rows(covariance: &DMatrix<f64>, n: usize, seed: u64, index: u64) -> Result<DMatrix<f64>> {
    let model = GaussianModel::oracle(DVector::zeros(covariance.nrows()), covariance)?;
    Ok(model.sample_rows(n, &mut rng::substream(seed, Domain::Predictors, index, 0)))
}
