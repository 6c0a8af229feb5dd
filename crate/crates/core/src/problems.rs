//! Finite-sum objectives `f = (1/n) sum_i f_i` split across workers.
//!
//! Local objectives are scaled by the worker count so that the average of the
//! local objectives is the usual global objective:
//!
//! - ridge: `f_i(x) = (n/2)|A_i x - y_i|^2 + (lambda/2)|x|^2`, so that
//!   `f(x) = (1/2)|A x - y|^2 + (lambda/2)|x|^2`;
//! - logistic: `f_i(x) = (n/m) sum_l log(1 + exp(-b_l a_l^T x)) + (lambda/2)|x|^2`
//!   over the worker's rows, with `m` the total row count.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Shard};
use crate::error::check_dim;
use crate::rng::{seed_stream, Purpose};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Ridge,
    Logistic,
}

/// Smoothness and strong-convexity constants.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessInfo {
    /// Smoothness of `f`.
    pub l: f64,
    /// Smoothness of each `f_i`.
    pub l_i: Vec<f64>,
    pub l_max: f64,
    /// Strong convexity of `f`. For logistic loss this is `lambda`.
    pub mu: f64,
}

impl SmoothnessInfo {
    /// `L / mu`.
    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    /// `L_max / mu`, the condition number that enters the worker-level rates.
    pub fn kappa_max(&self) -> f64 {
        self.l_max / self.mu
    }
}

/// Minimizer of `f` together with the local gradients there.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSolution {
    pub x_star: Vector,
    /// `grad f_i(x*)` per worker.
    pub local_grads: Vec<Vector>,
    pub f_star: f64,
    /// Achieved `|grad f(x*)|^2`.
    pub grad_norm_sq: f64,
}

impl ReferenceSolution {
    /// `|grad f_i(x*)|` per worker.
    pub fn grad_norms_at_star(&self) -> Vec<f64> {
        self.local_grads.iter().map(|g| g.norm()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Local {
    a: Matrix,
    y: Vector,
}

/// Constants of the data term alone; the regularizer shifts all of them by
/// `lambda`.
#[derive(Clone, Debug, PartialEq)]
struct DataConstants {
    l: f64,
    l_i: Vec<f64>,
    /// Smallest Hessian eigenvalue of the data term (ridge only).
    mu: f64,
}

/// Finite-sum problem with per-worker gradient oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    kind: LossKind,
    lambda: f64,
    locals: Vec<Local>,
    /// All rows stacked in worker order.
    stacked: Local,
    constants: DataConstants,
}

impl Problem {
    /// Build from a dataset split into `shards`.
    pub fn new(kind: LossKind, data: &Dataset, shards: &[Shard], lambda: f64) -> Result<Self> {
        let locals = shards
            .iter()
            .map(|s| {
                if let Some(&r) = s.rows.iter().find(|&&r| r >= data.rows()) {
                    return Err(Error::InvalidArgument(format!("row {r} out of range")));
                }
                let part = data.select(&s.rows);
                Ok((part.features, part.labels))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(kind, locals, lambda)
    }

    /// Build from explicit `(A_i, y_i)` blocks.
    pub fn from_parts(kind: LossKind, parts: Vec<(Matrix, Vector)>, lambda: f64) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda = {lambda} must be >= 0"
            )));
        }
        let d = parts[0].0.ncols();
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        for (a, y) in &parts {
            check_dim(d, a.ncols())?;
            check_dim(a.nrows(), y.len())?;
            if a.nrows() == 0 {
                return Err(Error::InvalidArgument(
                    "every worker needs at least one row".into(),
                ));
            }
            if kind == LossKind::Logistic && y.iter().any(|&b| b != 1.0 && b != -1.0) {
                return Err(Error::InvalidArgument(
                    "logistic loss needs labels in {-1, +1}".into(),
                ));
            }
        }
        let total: usize = parts.iter().map(|p| p.0.nrows()).sum();
        let mut a = Matrix::zeros(total, d);
        let mut y = Vector::zeros(total);
        let mut row = 0;
        for (ai, yi) in &parts {
            a.rows_mut(row, ai.nrows()).copy_from(ai);
            y.rows_mut(row, ai.nrows()).copy_from(yi);
            row += ai.nrows();
        }
        let locals: Vec<Local> = parts.into_iter().map(|(a, y)| Local { a, y }).collect();
        let stacked = Local { a, y };
        let constants = data_constants(kind, &locals, &stacked);
        Ok(Self {
            kind,
            lambda,
            locals,
            stacked,
            constants,
        })
    }

    /// Same data with a different regularizer.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda = {lambda} must be >= 0"
            )));
        }
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.stacked.a.ncols()
    }

    pub fn workers(&self) -> usize {
        self.locals.len()
    }

    pub fn total_rows(&self) -> usize {
        self.stacked.a.nrows()
    }

    /// `(A_i, y_i)` of worker `i`.
    pub fn local_data(&self, i: usize) -> Result<(&Matrix, &Vector)> {
        let l = self.local(i)?;
        Ok((&l.a, &l.y))
    }

    fn local(&self, i: usize) -> Result<&Local> {
        self.locals.get(i).ok_or(Error::WorkerOutOfRange {
            index: i,
            workers: self.locals.len(),
        })
    }

    /// Scale applied to a block's data term.
    fn block_scale(&self, global: bool) -> f64 {
        let n = if global { 1.0 } else { self.workers() as f64 };
        match self.kind {
            LossKind::Ridge => n,
            LossKind::Logistic => n / self.total_rows() as f64,
        }
    }

    fn block_gradient(&self, block: &Local, scale: f64, x: &Vector) -> Vector {
        let mut g = match self.kind {
            LossKind::Ridge => block.a.tr_mul(&(&block.a * x - &block.y)),
            LossKind::Logistic => {
                let margins = &block.a * x;
                let weights = Vector::from_iterator(
                    margins.len(),
                    margins
                        .iter()
                        .zip(block.y.iter())
                        .map(|(z, b)| -b * sigmoid(-b * z)),
                );
                block.a.tr_mul(&weights)
            }
        };
        g *= scale;
        g.axpy(self.lambda, x, 1.0);
        g
    }

    fn block_value(&self, block: &Local, scale: f64, x: &Vector) -> f64 {
        let data = match self.kind {
            LossKind::Ridge => 0.5 * (&block.a * x - &block.y).norm_squared(),
            LossKind::Logistic => (&block.a * x)
                .iter()
                .zip(block.y.iter())
                .map(|(z, b)| softplus(-b * z))
                .sum(),
        };
        scale * data + 0.5 * self.lambda * x.norm_squared()
    }

    /// `grad f_i(x)`.
    pub fn local_gradient(&self, i: usize, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        let scale = self.block_scale(false);
        Ok(self.block_gradient(self.local(i)?, scale, x))
    }

    /// All local gradients at `x`, in worker order.
    pub fn local_gradients(&self, x: &Vector) -> Result<Vec<Vector>> {
        check_dim(self.dim(), x.len())?;
        let scale = self.block_scale(false);
        Ok(self
            .locals
            .iter()
            .map(|l| self.block_gradient(l, scale, x))
            .collect())
    }

    /// `grad f(x)`, evaluated on the stacked data.
    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        Ok(self.block_gradient(&self.stacked, self.block_scale(true), x))
    }

    /// `f_i(x)`.
    pub fn local_value(&self, i: usize, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.block_value(self.local(i)?, self.block_scale(false), x))
    }

    /// `f(x)`.
    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.block_value(&self.stacked, self.block_scale(true), x))
    }

    /// Hessian of `f` at `x`.
    pub fn hessian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.dim(), x.len())?;
        let a = &self.stacked.a;
        let mut h = match self.kind {
            LossKind::Ridge => a.tr_mul(a),
            LossKind::Logistic => {
                let margins = a * x;
                let mut scaled = a.clone();
                for (r, (z, b)) in margins.iter().zip(self.stacked.y.iter()).enumerate() {
                    let s = sigmoid(b * z);
                    scaled.row_mut(r).scale_mut(s * (1.0 - s));
                }
                a.tr_mul(&scaled) * self.block_scale(true)
            }
        };
        for j in 0..self.dim() {
            h[(j, j)] += self.lambda;
        }
        Ok(h)
    }

    /// Smoothness constants at the current regularizer.
    pub fn smoothness(&self) -> SmoothnessInfo {
        let c = &self.constants;
        let l_i: Vec<f64> = c.l_i.iter().map(|l| l + self.lambda).collect();
        let l_max = l_i.iter().copied().fold(0.0, f64::max);
        let mu = match self.kind {
            LossKind::Ridge => c.mu + self.lambda,
            LossKind::Logistic => self.lambda,
        };
        SmoothnessInfo {
            l: c.l + self.lambda,
            l_i,
            l_max,
            mu,
        }
    }

    /// Minimize `f` until `|grad f|^2 <= tol`, or until rounding makes further
    /// progress impossible.
    ///
    /// Ridge solves the normal equations by Cholesky and refines the solution
    /// iteratively. Logistic runs accelerated gradient descent followed by
    /// Newton steps.
    pub fn solve_reference(&self, tol: f64) -> Result<ReferenceSolution> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {tol} must be positive"
            )));
        }
        let x = match self.kind {
            LossKind::Ridge => self.solve_ridge(tol)?,
            LossKind::Logistic => self.solve_logistic(tol)?,
        };
        let grad_norm_sq = self.gradient(&x)?.norm_squared();
        let floor = self.rounding_floor(&x);
        if grad_norm_sq > tol.max(floor * floor) {
            return Err(Error::ReferenceNotConverged {
                achieved: grad_norm_sq,
                tolerance: tol,
            });
        }
        Ok(ReferenceSolution {
            local_grads: self.local_gradients(&x)?,
            f_star: self.value(&x)?,
            grad_norm_sq,
            x_star: x,
        })
    }

    /// Size of the gradient that rounding alone produces near `x`.
    fn rounding_floor(&self, x: &Vector) -> f64 {
        let s = self.smoothness();
        let data_scale = match self.kind {
            LossKind::Ridge => self.stacked.a.tr_mul(&self.stacked.y).norm(),
            LossKind::Logistic => self.stacked.a.norm() / self.total_rows() as f64,
        };
        let n = (self.dim() * self.total_rows().max(1)) as f64;
        64.0 * f64::EPSILON * n.sqrt() * (data_scale + s.l * x.norm())
    }

    fn solve_ridge(&self, tol: f64) -> Result<Vector> {
        let h = self.hessian(&Vector::zeros(self.dim()))?;
        let chol = h.clone().cholesky().ok_or_else(|| {
            Error::Singular("ridge normal equations are not positive definite".into())
        })?;
        let rhs = self.stacked.a.tr_mul(&self.stacked.y);
        let mut x = chol.solve(&rhs);
        let mut best = self.gradient(&x)?.norm_squared();
        for _ in 0..10 {
            if best <= tol {
                break;
            }
            let r = &rhs - &h * &x;
            let candidate = &x + chol.solve(&r);
            let g = self.gradient(&candidate)?.norm_squared();
            if g >= best {
                break;
            }
            x = candidate;
            best = g;
        }
        Ok(x)
    }

    fn solve_logistic(&self, tol: f64) -> Result<Vector> {
        let s = self.smoothness();
        if s.mu <= 0.0 {
            return Err(Error::Singular(
                "logistic reference needs lambda > 0 for strong convexity".into(),
            ));
        }
        let d = self.dim();
        // Accelerated gradient descent for the strongly convex case.
        let step = 1.0 / s.l;
        let q = (s.mu / s.l).sqrt();
        let beta = (1.0 - q) / (1.0 + q);
        let mut x = Vector::zeros(d);
        let mut y = x.clone();
        let coarse = tol.max(1e-16);
        for _ in 0..200_000 {
            let g = self.gradient(&y)?;
            let next = &y - g * step;
            y = &next + (&next - &x) * beta;
            x = next;
            if self.gradient(&x)?.norm_squared() <= coarse {
                break;
            }
        }
        // Newton polish from the AGD point.
        let mut best = self.gradient(&x)?.norm_squared();
        for _ in 0..20 {
            if best <= tol {
                break;
            }
            let g = self.gradient(&x)?;
            let h = self.hessian(&x)?;
            let Some(chol) = h.cholesky() else { break };
            let candidate = &x - chol.solve(&g);
            let gn = self.gradient(&candidate)?.norm_squared();
            if gn >= best {
                break;
            }
            x = candidate;
            best = gn;
        }
        Ok(x)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn data_constants(kind: LossKind, locals: &[Local], stacked: &Local) -> DataConstants {
    let n = locals.len() as f64;
    let (local_scale, global_scale) = match kind {
        LossKind::Ridge => (n, 1.0),
        LossKind::Logistic => {
            let m = stacked.a.nrows() as f64;
            (n / (4.0 * m), 1.0 / (4.0 * m))
        }
    };
    let l_i = locals
        .iter()
        .map(|l| local_scale * gram_max_eigenvalue(&l.a))
        .collect();
    let l = global_scale * gram_max_eigenvalue(&stacked.a);
    let mu = match kind {
        LossKind::Ridge => gram_min_eigenvalue(&stacked.a),
        LossKind::Logistic => 0.0,
    };
    DataConstants { l, l_i, mu }
}

/// Largest eigenvalue of `A^T A` by power iteration.
pub fn gram_max_eigenvalue(a: &Matrix) -> f64 {
    power_iteration(a.ncols(), |v| a.tr_mul(&(a * v)))
}

/// Smallest eigenvalue of `A^T A` by inverse iteration; zero when the Gram
/// matrix is singular.
pub fn gram_min_eigenvalue(a: &Matrix) -> f64 {
    let gram = a.tr_mul(a);
    match gram.cholesky() {
        Some(chol) => {
            let inv_max = power_iteration(a.ncols(), |v| chol.solve(v));
            if inv_max > 0.0 {
                1.0 / inv_max
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator.
fn power_iteration(d: usize, apply: impl Fn(&Vector) -> Vector) -> f64 {
    let mut rng = seed_stream(0, d as u64, 0, Purpose::Custom(0x0050_4f57_4552));
    let mut v = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = apply(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let residual = (&w - &v * next).norm();
        v = w / norm;
        let settled = (next - lambda).abs() <= 1e-15 * next.abs();
        lambda = next;
        if residual <= 1e-10 * norm || settled {
            break;
        }
    }
    // One last Rayleigh quotient on the normalized vector.
    v.dot(&apply(&v)).max(lambda)
}

/// Regularizer giving condition number `L / mu = target` (to 1e-10
/// relative), found by bisection on `lambda`.
pub fn tune_regularizer_for_condition(problem: &Problem, target: f64) -> Result<f64> {
    if !(target > 1.0) || !target.is_finite() {
        return Err(Error::UnattainableCondition {
            target,
            reason: "target must be a finite number above 1".into(),
        });
    }
    let kappa = |lambda: f64| -> Result<f64> {
        let s = problem.with_lambda(lambda)?.smoothness();
        Ok(if s.mu > 0.0 {
            s.l / s.mu
        } else {
            f64::INFINITY
        })
    };
    let unregularized = kappa(0.0)?;
    if unregularized < target * (1.0 - 1e-12) {
        return Err(Error::UnattainableCondition {
            target,
            reason: format!("the unregularized condition number is already {unregularized}"),
        });
    }
    if unregularized <= target * (1.0 + 1e-12) {
        return Ok(0.0);
    }
    // kappa is decreasing in lambda; bracket, then bisect.
    let mut lo = 0.0;
    let mut hi = problem.smoothness().l.max(1e-300);
    while kappa(hi)? > target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::UnattainableCondition {
                target,
                reason: "no finite regularizer reaches the target".into(),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kappa(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
