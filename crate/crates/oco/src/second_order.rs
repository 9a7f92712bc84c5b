//! Online Newton Step and the Vovk-Azoury-Warmuth forecaster.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::game::{feedback_gradient, Feedback, Learner};
use crate::geometry::FeasibleSet;

/// Number of rank-one updates between full re-inversions of the maintained inverse.
pub const REFACTOR_EVERY: usize = 512;

/// A symmetric positive definite matrix together with its inverse, updated by rank-one terms.
#[derive(Debug, Clone)]
pub struct RankOneInverse {
    s: DMatrix<f64>,
    s_inv: DMatrix<f64>,
    since_refactor: usize,
}

impl RankOneInverse {
    /// Starts at `lambda I`.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(RankOneInverse {
            s: DMatrix::identity(dim, dim) * lambda,
            s_inv: DMatrix::identity(dim, dim) / lambda,
            since_refactor: 0,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.s_inv
    }

    /// `S <- S + w u u^T` with Sherman-Morrison on the inverse.
    pub fn add(&mut self, u: &DVector<f64>, w: f64) -> Result<()> {
        self.s.ger(w, u, u, 1.0);
        let su = &self.s_inv * u;
        let denom = 1.0 + w * u.dot(&su);
        self.s_inv.ger(-w / denom, &su, &su, 1.0);
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes the inverse from scratch through a Cholesky factorization.
    pub fn refactor(&mut self) -> Result<()> {
        let chol = self
            .s
            .clone()
            .cholesky()
            .ok_or_else(|| OcoError::Convergence("matrix lost positive definiteness".into()))?;
        self.s_inv = chol.inverse();
        self.since_refactor = 0;
        Ok(())
    }
}

/// Exp-concavity constant `exp(-2U) / 2` of the logistic loss on a ball of radius `U`
/// with features of norm at most 1.
pub fn logistic_exp_concavity(radius: f64) -> f64 {
    (-2.0 * radius).exp() / 2.0
}

/// The usual ONS curvature `0.5 min(1 / (4 G D), alpha)` for `alpha`-exp-concave losses
/// with gradients bounded by `G` on a set of diameter `D`.
pub fn ons_mu(alpha: f64, grad_bound: f64, diameter: f64) -> f64 {
    0.5 * (1.0 / (4.0 * grad_bound * diameter)).min(alpha)
}

/// Online Newton Step on the whole space or a Euclidean ball.
#[derive(Debug, Clone)]
pub struct OnlineNewtonStep {
    grad_sum: DVector<f64>,
    b: DVector<f64>,
    curvature: RankOneInverse,
    lambda: f64,
    mu: f64,
    set: FeasibleSet,
    x: DVector<f64>,
    t: usize,
}

impl OnlineNewtonStep {
    pub fn new(dim: usize, lambda: f64, mu: f64, set: FeasibleSet) -> Result<Self> {
        check_positive("mu", mu)?;
        set.validate()?;
        if !matches!(set, FeasibleSet::All | FeasibleSet::L2Ball { .. }) {
            return Err(OcoError::Unsupported("ONS supports the whole space and Euclidean balls".into()));
        }
        Ok(OnlineNewtonStep {
            grad_sum: DVector::zeros(dim),
            b: DVector::zeros(dim),
            curvature: RankOneInverse::new(dim, lambda)?,
            lambda,
            mu,
            set,
            x: DVector::zeros(dim),
            t: 0,
        })
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.iter().copied().collect()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn curvature(&self) -> &RankOneInverse {
        &self.curvature
    }

    /// Value of `sum <g_i, x> + lambda/2 ||x||^2 + mu/2 sum <g_i, x - x_i>^2` up to a constant.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let h = &self.b - &self.grad_sum;
        0.5 * xv.dot(&(self.curvature.matrix() * &xv)) - h.dot(&xv)
    }

    pub fn step(&mut self, g: &[f64], x_obs: &[f64]) -> Result<()> {
        check_dim(self.x.len(), g.len())?;
        check_dim(self.x.len(), x_obs.len())?;
        check_finite("gradient", g)?;
        check_finite("observed point", x_obs)?;
        let gv = DVector::from_column_slice(g);
        let xo = DVector::from_column_slice(x_obs);
        self.curvature.add(&gv, self.mu)?;
        self.b.axpy(self.mu * gv.dot(&xo), &gv, 1.0);
        self.grad_sum += &gv;
        self.t += 1;
        self.x = self.minimize()?;
        Ok(())
    }

    fn minimize(&self) -> Result<DVector<f64>> {
        let h = &self.b - &self.grad_sum;
        let free = self.curvature.inverse() * &h;
        let radius = match self.set {
            FeasibleSet::L2Ball { radius } => radius,
            _ => return Ok(free),
        };
        if free.norm() <= radius {
            return Ok(free);
        }
        // KKT: x = (S + nu I)^{-1} h with ||x|| = r; the norm is decreasing in nu
        let eig = self.curvature.matrix().clone().symmetric_eigen();
        let ht = eig.eigenvectors.transpose() * &h;
        let norm_at = |nu: f64| -> f64 {
            ht.iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, l)| (c / (l + nu)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let (mut lo, mut hi) = (0.0, h.norm() / radius);
        while hi - lo > 1e-10 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_at(mid) > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let coords: DVector<f64> =
            DVector::from_iterator(ht.len(), ht.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c / (l + hi)));
        let mut x = &eig.eigenvectors * coords;
        let n = x.norm();
        if n > radius {
            x *= radius / n;
            while x.norm() > radius {
                x *= 1.0 - f64::EPSILON;
            }
        }
        Ok(x)
    }
}

impl Learner for OnlineNewtonStep {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let x = self.x();
        let g = feedback_gradient(feedback, &x)?;
        self.step(&g, &x)
    }
}

/// Vovk-Azoury-Warmuth forecaster for online least squares with loss `0.5 (<z, x> - y)^2`.
#[derive(Debug, Clone)]
pub struct Vaw {
    curvature: RankOneInverse,
    b: DVector<f64>,
    lambda: f64,
    pending: Option<(DVector<f64>, DVector<f64>)>,
    t: usize,
}

impl Vaw {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        Ok(Vaw { curvature: RankOneInverse::new(dim, lambda)?, b: DVector::zeros(dim), lambda, pending: None, t: 0 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn curvature(&self) -> &RankOneInverse {
        &self.curvature
    }

    /// Adds `z z^T` to the curvature (a hallucinated label of 0) and returns `S^{-1} sum_{i<t} y_i z_i`.
    pub fn predict(&mut self, z: &[f64]) -> Result<Vec<f64>> {
        if self.pending.is_some() {
            return Err(OcoError::Protocol("predict called twice without observe".into()));
        }
        check_dim(self.b.len(), z.len())?;
        check_finite("features", z)?;
        let zv = DVector::from_column_slice(z);
        self.curvature.add(&zv, 1.0)?;
        let x = self.curvature.inverse() * &self.b;
        let out = x.iter().copied().collect();
        self.pending = Some((zv, x));
        Ok(out)
    }

    /// Reveals the label of the pending round; returns the loss `0.5 (<z, x> - y)^2`.
    pub fn observe(&mut self, y: f64) -> Result<f64> {
        check_finite("label", &[y])?;
        let (z, x) = self
            .pending
            .take()
            .ok_or_else(|| OcoError::Protocol("observe called without a pending prediction".into()))?;
        let r = z.dot(&x) - y;
        self.b.axpy(y, &z, 1.0);
        self.t += 1;
        Ok(0.5 * r * r)
    }
}

/// Offline ridge solution `argmin lambda/2 ||u||^2 + sum 0.5 (<z_t, u> - y_t)^2`.
pub fn ridge_solution(zs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let d = zs.first().map(|z| z.len()).ok_or_else(|| OcoError::Empty("no samples".into()))?;
    check_dim(zs.len(), ys.len())?;
    let mut a = DMatrix::identity(d, d) * lambda;
    let mut rhs = DVector::zeros(d);
    for (z, y) in zs.iter().zip(ys) {
        check_dim(d, z.len())?;
        let zv = DVector::from_column_slice(z);
        a.ger(1.0, &zv, &zv, 1.0);
        rhs.axpy(*y, &zv, 1.0);
    }
    let sol = a
        .cholesky()
        .ok_or_else(|| OcoError::Convergence("ridge system not positive definite".into()))?
        .solve(&rhs);
    Ok(sol.iter().copied().collect())
}
