//! Penalized additive cubic-spline regression.
//!
//! Each non-constant predictor gets a uniform cubic B-spline basis restricted
//! to sum to zero over the training rows, so the intercept separates. The
//! second-difference penalty of every block has its null space filled in with
//! a small multiple of its smallest positive eigenvalue, which lets whole
//! components shrink to zero. One smoothing parameter is shared by all blocks.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bspline::{second_difference_penalty, UniformCubicBasis};
use crate::error::{Error, Result};

/// Ridge added to the intercept's normal equation.
const INTERCEPT_RIDGE: f64 = 1e-8;
/// Null-space eigenvalues of a penalty block become this fraction of the
/// smallest positive one.
const SHRINK_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplineSelection {
    #[default]
    Gcv,
    /// Use the first grid value without search.
    Fixed,
}

/// One fitted smooth `g_k`, extended linearly beyond the training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineComponent {
    basis: UniformCubicBasis,
    coef: Vec<f64>,
    lower: (f64, f64),
    upper: (f64, f64),
}

impl SplineComponent {
    fn new(basis: UniformCubicBasis, coef: Vec<f64>) -> Self {
        let (lo, hi) = basis.range();
        let lower = (basis.combine(&coef, lo), basis.combine_deriv(&coef, lo));
        let upper = (basis.combine(&coef, hi), basis.combine_deriv(&coef, hi));
        Self {
            basis,
            coef,
            lower,
            upper,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.basis.range();
        if x < lo {
            self.lower.0 + self.lower.1 * (x - lo)
        } else if x > hi {
            self.upper.0 + self.upper.1 * (x - hi)
        } else {
            self.basis.combine(&self.coef, x)
        }
    }

    pub fn basis(&self) -> &UniformCubicBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }
}

/// Fitted additive model `intercept + sum_k g_k(x_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    intercept: f64,
    components: Vec<Option<SplineComponent>>,
    lambda: f64,
    edf: f64,
}

impl AdditiveFit {
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// `None` for predictors that were constant in training.
    pub fn component(&self, k: usize) -> Option<&SplineComponent> {
        self.components[k].as_ref()
    }

    pub fn eval_component(&self, k: usize, x: f64) -> f64 {
        self.components[k].as_ref().map_or(0.0, |c| c.eval(x))
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Selected smoothing parameter.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Effective degrees of freedom, intercept included.
    pub fn edf(&self) -> f64 {
        self.edf
    }

    pub fn eval_row(&self, row: impl Iterator<Item = f64>) -> f64 {
        self.intercept
            + row
                .zip(&self.components)
                .map(|(x, c)| c.as_ref().map_or(0.0, |c| c.eval(x)))
                .sum::<f64>()
    }
}

/// Per-predictor block of the constrained, penalized basis.
struct Block {
    column: usize,
    basis: UniformCubicBasis,
    /// Null space of the sum-to-zero constraint, `K x (K-1)`.
    z: DMatrix<f64>,
    /// Scaled penalty in constrained coordinates.
    penalty: DMatrix<f64>,
    /// Maps whitened coordinates to spline coefficients: `Z U diag(ev^-1/2)`.
    to_coef: DMatrix<f64>,
}

impl Block {
    fn width(&self) -> usize {
        self.z.ncols()
    }
}

fn is_constant(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let scale = lo.abs().max(hi.abs()).max(1.0);
    (hi - lo > 1e-12 * scale).then_some((lo, hi))
}

fn prepare_blocks(x: &DMatrix<f64>, basis_size: usize) -> Vec<Block> {
    let n = x.nrows();
    let k = basis_size;
    let mut blocks = Vec::new();
    for column in 0..x.ncols() {
        let col = x.column(column);
        let Some((lo, hi)) = is_constant(col.iter().copied()) else {
            continue;
        };
        let basis = UniformCubicBasis::new(lo, hi, k);
        let mut btb = DMatrix::<f64>::zeros(k, k);
        let mut sums = DVector::<f64>::zeros(k);
        for i in 0..n {
            let (s, v) = basis.eval_local(col[i]);
            for a in 0..4 {
                sums[s + a] += v[a];
                for b in 0..4 {
                    btb[(s + a, s + b)] += v[a] * v[b];
                }
            }
        }
        // Householder reflection sending the constraint vector to e_1; its
        // remaining columns span the constraint's null space.
        let norm = sums.norm();
        let mut v = sums.clone();
        v[0] += sums[0].signum() * norm;
        let h = DMatrix::<f64>::identity(k, k) - (&v * v.transpose()) * (2.0 / v.norm_squared());
        let z = h.columns(1, k - 1).into_owned();

        let dd = second_difference_penalty(k);
        let dd = DMatrix::from_fn(k, k, |a, b| dd[a][b]);
        let s = z.transpose() * dd * &z;
        let eig = s.symmetric_eigen();
        let top = eig.eigenvalues.max();
        let tol = 1e-9 * top.max(f64::MIN_POSITIVE);
        let floor = eig
            .eigenvalues
            .iter()
            .filter(|&&e| e > tol)
            .fold(f64::INFINITY, |m, &e| m.min(e));
        let mut ev: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&e| if e > tol { e } else { SHRINK_FACTOR * floor })
            .collect();
        let xtx = z.transpose() * btb * &z;
        let s_norm = ev.iter().map(|e| e * e).sum::<f64>().sqrt();
        let scale = xtx.norm() / s_norm;
        ev.iter_mut().for_each(|e| *e *= scale);
        let u = &eig.eigenvectors;
        let penalty = u * DMatrix::from_diagonal(&DVector::from_vec(ev.clone())) * u.transpose();
        let inv_sqrt = DVector::from_iterator(k - 1, ev.iter().map(|e| 1.0 / e.sqrt()));
        let to_coef = &z * u * DMatrix::from_diagonal(&inv_sqrt);
        blocks.push(Block {
            column,
            basis,
            z,
            penalty,
            to_coef,
        });
    }
    blocks
}

/// Dense design and penalty of the additive model, exposed so the fitted
/// values can be checked against a direct solve of the normal equations.
#[derive(Debug, Clone)]
pub struct AdditiveDesign {
    /// Centered spline columns, blocks in predictor order.
    pub design: DMatrix<f64>,
    /// Block-diagonal penalty matching `design`.
    pub penalty: DMatrix<f64>,
    /// Intercept estimate used by the fit.
    pub intercept: f64,
}

pub fn additive_design(x: &DMatrix<f64>, targets: &[f64], basis_size: usize) -> AdditiveDesign {
    let blocks = prepare_blocks(x, basis_size);
    let n = x.nrows();
    let m: usize = blocks.iter().map(Block::width).sum();
    let mut design = DMatrix::zeros(n, m);
    let mut penalty = DMatrix::zeros(m, m);
    let mut offset = 0;
    let mut row = vec![0.0; basis_size];
    for b in &blocks {
        let d = b.width();
        for i in 0..n {
            b.basis.row(x[(i, b.column)], &mut row);
            for c in 0..d {
                design[(i, offset + c)] = (0..basis_size).map(|a| row[a] * b.z[(a, c)]).sum();
            }
        }
        penalty.view_mut((offset, offset), (d, d)).copy_from(&b.penalty);
        offset += d;
    }
    AdditiveDesign {
        design,
        penalty,
        intercept: intercept_of(targets),
    }
}

fn intercept_of(targets: &[f64]) -> f64 {
    targets.iter().sum::<f64>() / (targets.len() as f64 + INTERCEPT_RIDGE)
}

pub fn fit_additive(
    x: &DMatrix<f64>,
    targets: &[f64],
    basis_size: usize,
    lambda_grid: &[f64],
    selection: SplineSelection,
) -> Result<AdditiveFit> {
    if basis_size < 4 {
        return Err(Error::InvalidArgument(format!(
            "spline basis size must be at least 4, got {basis_size}"
        )));
    }
    if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(
            "spline lambda grid must be a nonempty list of positive values".into(),
        ));
    }
    let n = x.nrows();
    let intercept = intercept_of(targets);
    let resid: Vec<f64> = targets.iter().map(|t| t - intercept).collect();
    let blocks = prepare_blocks(x, basis_size);
    let m: usize = blocks.iter().map(Block::width).sum();
    let mut components: Vec<Option<SplineComponent>> = vec![None; x.ncols()];
    if m == 0 {
        return Ok(AdditiveFit {
            intercept,
            components,
            lambda: lambda_grid[0],
            edf: 1.0,
        });
    }

    // Whitened design: penalty becomes the identity.
    let mut dt = Mat::<f64>::zeros(n, m);
    let mut offset = 0;
    for b in &blocks {
        let d = b.width();
        for i in 0..n {
            let (s, v) = b.basis.eval_local(x[(i, b.column)]);
            for c in 0..d {
                dt[(i, offset + c)] = (0..4).map(|a| v[a] * b.to_coef[(s + a, c)]).sum();
            }
        }
        offset += d;
    }
    let r = Mat::<f64>::from_fn(n, 1, |i, _| resid[i]);
    let dtr = dt.transpose() * &r;
    let gram = dt.transpose() * &dt;

    let (lambda, edf, gamma) = match selection {
        SplineSelection::Gcv => {
            let eig = gram
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| Error::Singular("spline eigendecomposition failed".into()))?;
            let u = eig.U();
            let e: Vec<f64> = (0..m).map(|i| eig.S()[i].max(0.0)).collect();
            let c_mat = u.transpose() * &dtr;
            let c: Vec<f64> = (0..m).map(|i| c_mat[(i, 0)]).collect();
            let yy: f64 = resid.iter().map(|v| v * v).sum();
            let nf = n as f64;
            let mut best = (f64::INFINITY, lambda_grid[0], 0.0);
            for &lam in lambda_grid {
                let mut rss = yy;
                let mut edf = 1.0;
                for (ei, ci) in e.iter().zip(&c) {
                    let w = 1.0 / (ei + lam);
                    rss += ci * ci * w * (ei * w - 2.0);
                    edf += ei * w;
                }
                let denom = nf - edf;
                let score = if denom > 0.0 {
                    nf * rss.max(0.0) / (denom * denom)
                } else {
                    f64::INFINITY
                };
                if score < best.0 {
                    best = (score, lam, edf);
                }
            }
            let (_, lam, edf) = best;
            let scaled = Mat::<f64>::from_fn(m, 1, |i, _| c[i] / (e[i] + lam));
            let gamma = u * &scaled;
            (lam, edf, (0..m).map(|i| gamma[(i, 0)]).collect::<Vec<_>>())
        }
        SplineSelection::Fixed => {
            let lam = lambda_grid[0];
            let mut a = gram;
            for i in 0..m {
                a[(i, i)] += lam;
            }
            let llt = a
                .llt(Side::Lower)
                .map_err(|_| Error::Singular("penalized spline system".into()))?;
            let gamma = llt.solve(&dtr);
            let hat = llt.solve(&(dt.transpose() * &dt));
            let edf = 1.0 + (0..m).map(|i| hat[(i, i)]).sum::<f64>();
            (lam, edf, (0..m).map(|i| gamma[(i, 0)]).collect::<Vec<_>>())
        }
    };

    let mut offset = 0;
    for b in &blocks {
        let d = b.width();
        let g = DVector::from_column_slice(&gamma[offset..offset + d]);
        let coef = &b.to_coef * g;
        components[b.column] = Some(SplineComponent::new(b.basis.clone(), coef.as_slice().to_vec()));
        offset += d;
    }
    if !intercept.is_finite() || components.iter().flatten().any(|c| c.coef.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("additive spline coefficients".into()));
    }
    Ok(AdditiveFit {
        intercept,
        components,
        lambda,
        edf,
    })
}
