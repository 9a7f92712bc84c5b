//! Projected online subgradient descent and diagonal AdaGrad on boxes.

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::game::{feedback_gradient, Feedback, Learner};
use crate::geometry::{project, FeasibleSet};
use crate::vecops::norm_sq;

/// Strong-convexity constants fed to the `1 / sum mu` stepsize.
#[derive(Debug, Clone, PartialEq)]
pub enum MuSchedule {
    Constant(f64),
    /// `mu_t` for rounds `1..=len`; running past the end is an error.
    PerRound(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepsizePolicy {
    Constant { eta: f64 },
    /// `eta_t = D / (L sqrt(t))`
    Decaying { diameter: f64, lipschitz: f64 },
    /// `eta_t = sqrt(2) D / (2 sqrt(sum_{i<=t} ||g_i||^2))`
    AdaptiveGlobal { diameter: f64 },
    /// `eta_t = 1 / sum_{i<=t} mu_i`
    StronglyConvex(MuSchedule),
}

impl StepsizePolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            StepsizePolicy::Constant { eta } => check_positive("eta", *eta),
            StepsizePolicy::Decaying { diameter, lipschitz } => {
                check_positive("diameter", *diameter)?;
                check_positive("lipschitz constant", *lipschitz)
            }
            StepsizePolicy::AdaptiveGlobal { diameter } => check_positive("diameter", *diameter),
            StepsizePolicy::StronglyConvex(MuSchedule::Constant(mu)) => check_positive("mu", *mu),
            StepsizePolicy::StronglyConvex(MuSchedule::PerRound(mus)) => {
                mus.iter().try_for_each(|m| check_positive("mu", *m))
            }
        }
    }
}

/// Projected online subgradient descent.
#[derive(Debug, Clone)]
pub struct Osd {
    x: Vec<f64>,
    set: FeasibleSet,
    policy: StepsizePolicy,
    grad_sq_sum: f64,
    mu_sum: f64,
    t: usize,
    last_eta: Option<f64>,
}

impl Osd {
    /// Starts at the projection of `x1` onto `set`.
    pub fn new(set: FeasibleSet, policy: StepsizePolicy, x1: Vec<f64>) -> Result<Self> {
        policy.validate()?;
        let x = project(&set, &x1)?;
        Ok(Osd { x, set, policy, grad_sq_sum: 0.0, mu_sum: 0.0, t: 0, last_eta: None })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn grad_sq_sum(&self) -> f64 {
        self.grad_sq_sum
    }

    /// Stepsize used by the most recent step, if it moved.
    pub fn last_eta(&self) -> Option<f64> {
        self.last_eta
    }

    /// `x <- project(x - eta_t g)`.
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.x.len(), g.len())?;
        check_finite("gradient", g)?;
        let t = self.t + 1;
        self.grad_sq_sum += norm_sq(g);
        let eta = match &self.policy {
            StepsizePolicy::Constant { eta } => Some(*eta),
            StepsizePolicy::Decaying { diameter, lipschitz } => Some(diameter / (lipschitz * (t as f64).sqrt())),
            StepsizePolicy::AdaptiveGlobal { diameter } => {
                if self.grad_sq_sum > 0.0 {
                    Some(2f64.sqrt() * diameter / (2.0 * self.grad_sq_sum.sqrt()))
                } else {
                    None
                }
            }
            StepsizePolicy::StronglyConvex(schedule) => {
                let mu = match schedule {
                    MuSchedule::Constant(mu) => *mu,
                    MuSchedule::PerRound(mus) => *mus.get(t - 1).ok_or_else(|| {
                        OcoError::InvalidParameter(format!("mu schedule has no entry for round {t}"))
                    })?,
                };
                self.mu_sum += mu;
                Some(1.0 / self.mu_sum)
            }
        };
        self.t = t;
        self.last_eta = eta;
        if let Some(eta) = eta {
            let moved: Vec<f64> = self.x.iter().zip(g).map(|(x, gi)| x - eta * gi).collect();
            self.x = project(&self.set, &moved)?;
        }
        Ok(())
    }
}

impl Learner for Osd {
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

    fn aux(&self) -> Option<f64> {
        self.last_eta
    }
}

/// Diagonal AdaGrad on a box `lo <= x <= hi`.
///
/// Each coordinate keeps the largest gradient magnitude seen so far and stores its
/// squared-gradient sum normalized by it, so streams that differ by a per-coordinate
/// factor produce bit-identical iterates.
#[derive(Debug, Clone)]
pub struct AdaGrad {
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    max_abs: Vec<f64>,
    normalized_sq: Vec<f64>,
    t: usize,
}

impl AdaGrad {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, x1: Vec<f64>) -> Result<Self> {
        let set = FeasibleSet::boxed(lo.clone(), hi.clone())?;
        let x = project(&set, &x1)?;
        let d = x.len();
        Ok(AdaGrad { x, lo, hi, max_abs: vec![0.0; d], normalized_sq: vec![0.0; d], t: 0 })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `sum_j g_{j,i}^2` for every coordinate.
    pub fn per_coord_sq(&self) -> Vec<f64> {
        self.max_abs.iter().zip(&self.normalized_sq).map(|(m, s)| m * m * s).collect()
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.x.len(), g.len())?;
        check_finite("gradient", g)?;
        for i in 0..g.len() {
            let a = g[i].abs();
            if a > self.max_abs[i] {
                let ratio = self.max_abs[i] / a;
                self.normalized_sq[i] *= ratio * ratio;
                self.max_abs[i] = a;
            }
            if self.max_abs[i] == 0.0 {
                continue;
            }
            let gn = g[i] / self.max_abs[i];
            self.normalized_sq[i] += gn * gn;
            let width = self.hi[i] - self.lo[i];
            // eta_{t,i} g_{t,i} = sqrt(2) D_i g / (2 sqrt(sum g^2)) with the common max factored out
            let delta = 2f64.sqrt() * width * gn / (2.0 * self.normalized_sq[i].sqrt());
            self.x[i] = (self.x[i] - delta).min(self.hi[i]).max(self.lo[i]);
        }
        self.t += 1;
        Ok(())
    }
}

impl Learner for AdaGrad {
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
