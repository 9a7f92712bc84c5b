//! Mirror descent on the simplex (exponentiated gradient) and with p-norm mirror
//! maps, plus randomized expert selection.

use rand::Rng;

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::game::{feedback_gradient, Feedback, Learner};
use crate::geometry::{check_p, pnorm_mirror_map};
use crate::vecops::softmax;

/// Exponentiated gradient with a fixed learning rate.
///
/// The weights are kept as logits `ln x_1 - eta sum g`, so the prediction is a softmax
/// and never overflows.
#[derive(Debug, Clone)]
pub struct ExponentiatedGradient {
    logits: Vec<f64>,
    x: Vec<f64>,
    eta: f64,
    t: usize,
}

impl ExponentiatedGradient {
    /// Uniform start `x_1 = [1/d, ..., 1/d]`.
    pub fn new(dim: usize, eta: f64) -> Result<Self> {
        if dim < 2 {
            return Err(OcoError::InvalidParameter("exponentiated gradient needs d >= 2".into()));
        }
        Self::with_prior(vec![1.0 / dim as f64; dim], eta)
    }

    /// Starts from a strictly positive prior on the simplex.
    pub fn with_prior(prior: Vec<f64>, eta: f64) -> Result<Self> {
        check_positive("eta", eta)?;
        check_finite("prior", &prior)?;
        if prior.iter().any(|p| *p <= 0.0) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(OcoError::InvalidParameter("prior must be a strictly positive simplex vector".into()));
        }
        let logits: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
        let x = softmax(&logits);
        Ok(ExponentiatedGradient { logits, x, eta, t: 0 })
    }

    /// The tuned rate `sqrt(2 ln d / T)` for gradients with `||g||_inf <= 1`.
    pub fn tuned_eta(dim: usize, horizon: usize) -> f64 {
        (2.0 * (dim as f64).ln() / horizon as f64).sqrt()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.x.len(), g.len())?;
        check_finite("gradient", g)?;
        for (l, gi) in self.logits.iter_mut().zip(g) {
            *l -= self.eta * gi;
        }
        self.x = softmax(&self.logits);
        self.t += 1;
        Ok(())
    }
}

impl Learner for ExponentiatedGradient {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.x)?;
        self.step(&g)
    }
}

/// Unconstrained mirror descent with `psi(x) = 0.5 ||x||_p^2`.
#[derive(Debug, Clone)]
pub struct PNormDescent {
    x: Vec<f64>,
    p: f64,
    q: f64,
    eta: f64,
}

impl PNormDescent {
    pub fn new(x1: Vec<f64>, p: f64, eta: f64) -> Result<Self> {
        check_p(p)?;
        check_positive("eta", eta)?;
        check_finite("starting point", &x1)?;
        Ok(PNormDescent { x: x1, p, q: p / (p - 1.0), eta })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Dual exponent `p / (p - 1)`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Maps `x` to the dual space, takes the gradient step there and maps back.
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.x.len(), g.len())?;
        check_finite("gradient", g)?;
        if self.p == 2.0 {
            // both maps are the identity
            self.x = self.x.iter().zip(g).map(|(x, gi)| x - self.eta * gi).collect();
            return Ok(());
        }
        let theta: Vec<f64> = pnorm_mirror_map(&self.x, self.p)
            .iter()
            .zip(g)
            .map(|(t, gi)| t - self.eta * gi)
            .collect();
        self.x = pnorm_mirror_map(&theta, self.q);
        Ok(())
    }
}

impl Learner for PNormDescent {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.x)?;
        self.step(&g)
    }
}

/// Inverse-CDF selection of an index with probability `x_i` for a given draw `u` in `[0, 1)`.
pub fn sample_expert_with(x: &[f64], u: f64) -> Result<usize> {
    if x.is_empty() {
        return Err(OcoError::Empty("no experts to sample".into()));
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(OcoError::Domain("sampling distribution must be finite and nonnegative".into()));
    }
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return Err(OcoError::Domain("sampling distribution has no mass".into()));
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > 0.0 {
            last_positive = i;
        }
        acc += v;
        if target < acc {
            return Ok(i);
        }
    }
    Ok(last_positive)
}

/// Draws an index with probability `x_i` using one uniform draw from `rng`.
pub fn sample_expert<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<usize> {
    sample_expert_with(x, rng.random::<f64>())
}
