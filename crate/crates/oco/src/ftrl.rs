//! Follow-the-regularized-leader family: linearized FTRL with a quadratic
//! regularizer, entropic FTRL, AdaHedge, the composite L1 closed form, quadratized
//! FTRL for strongly convex losses, optimistic FTRL, and plain follow-the-leader.

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::game::{feedback_gradient, subgradient, Feedback, Learner, LossKind, LossSpec};
use crate::geometry::{project, FeasibleSet};
use crate::vecops::{norm2, norm_inf, norm_sq, softmax};

// ---------------------------------------------------------------------------
// Linearized FTRL with psi_t(x) = lambda_t / 2 ||x||^2
// ---------------------------------------------------------------------------

/// Regularizer strength `lambda_t` used for the prediction of round `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegSchedule {
    /// `lambda_t = c sqrt(t - 1)`, so the first prediction minimizes the indicator alone.
    Sqrt { c: f64 },
    Constant { lambda: f64 },
}

impl RegSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegSchedule::Sqrt { c } => check_positive("regularizer scale", *c),
            RegSchedule::Constant { lambda } => check_positive("regularizer strength", *lambda),
        }
    }

    pub fn lambda(&self, t: usize) -> f64 {
        match self {
            RegSchedule::Sqrt { c } => c * ((t.max(1) - 1) as f64).sqrt(),
            RegSchedule::Constant { lambda } => *lambda,
        }
    }
}

fn check_closed_form_set(set: &FeasibleSet) -> Result<()> {
    set.validate()?;
    if matches!(set, FeasibleSet::Simplex { .. }) {
        return Err(OcoError::Unsupported(
            "quadratic-regularizer FTRL has closed forms only for the whole space, balls and boxes".into(),
        ));
    }
    Ok(())
}

/// `argmin_{x in V} lambda / 2 ||x||^2 - <theta, x>`.
fn quadratic_argmin(set: &FeasibleSet, theta: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if lambda == 0.0 {
        // only reached before any gradient arrived, where every point of V is optimal
        return project(set, &vec![0.0; theta.len()]);
    }
    let v: Vec<f64> = theta.iter().map(|t| t / lambda).collect();
    project(set, &v)
}

/// FTRL on linearized losses: `x_{t+1} = project(theta / lambda_{t+1})` with `theta = -sum g`.
#[derive(Debug, Clone)]
pub struct FtrlLin {
    theta: Vec<f64>,
    set: FeasibleSet,
    schedule: RegSchedule,
    t: usize,
    x: Vec<f64>,
}

impl FtrlLin {
    pub fn new(dim: usize, set: FeasibleSet, schedule: RegSchedule) -> Result<Self> {
        check_closed_form_set(&set)?;
        schedule.validate()?;
        if let Some(d) = set.dim() {
            check_dim(d, dim)?;
        }
        let theta = vec![0.0; dim];
        let x = quadratic_argmin(&set, &theta, schedule.lambda(1))?;
        Ok(FtrlLin { theta, set, schedule, t: 0, x })
    }

    /// Current prediction `x_{t+1}`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn schedule(&self) -> RegSchedule {
        self.schedule
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.theta.len(), g.len())?;
        check_finite("gradient", g)?;
        for (th, gi) in self.theta.iter_mut().zip(g) {
            *th -= gi;
        }
        self.t += 1;
        self.x = quadratic_argmin(&self.set, &self.theta, self.schedule.lambda(self.t + 1))?;
        Ok(())
    }
}

impl Learner for FtrlLin {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.x)?;
        self.step(&g)
    }

    fn aux(&self) -> Option<f64> {
        Some(self.schedule.lambda(self.t + 1))
    }
}

// ---------------------------------------------------------------------------
// Entropic FTRL on the simplex
// ---------------------------------------------------------------------------

/// FTRL with the entropic regularizer scaled by `alpha L_inf sqrt(t)`.
#[derive(Debug, Clone)]
pub struct EntropicFtrl {
    theta: Vec<f64>,
    alpha: f64,
    linf: f64,
    t: usize,
}

impl EntropicFtrl {
    pub fn new(dim: usize, alpha: f64, linf: f64) -> Result<Self> {
        if dim < 2 {
            return Err(OcoError::InvalidParameter("entropic FTRL needs d >= 2".into()));
        }
        check_positive("alpha", alpha)?;
        check_positive("L_inf", linf)?;
        Ok(EntropicFtrl { theta: vec![0.0; dim], alpha, linf, t: 0 })
    }

    /// Prediction for the next round `t + 1`.
    pub fn x(&self) -> Vec<f64> {
        let temp = self.alpha * self.linf * ((self.t + 1) as f64).sqrt();
        let logits: Vec<f64> = self.theta.iter().map(|th| th / temp).collect();
        softmax(&logits)
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.theta.len(), g.len())?;
        check_finite("gradient", g)?;
        if norm_inf(g) > self.linf {
            return Err(OcoError::BoundViolated(format!(
                "||g||_inf = {} exceeds L_inf = {}",
                norm_inf(g),
                self.linf
            )));
        }
        for (th, gi) in self.theta.iter_mut().zip(g) {
            *th -= gi;
        }
        self.t += 1;
        Ok(())
    }
}

impl Learner for EntropicFtrl {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.x())?;
        self.step(&g)
    }
}

// ---------------------------------------------------------------------------
// AdaHedge
// ---------------------------------------------------------------------------

/// AdaHedge with uniform prior.
///
/// `theta` and `lambda` are stored divided by the largest `||g||_inf` seen so far,
/// which leaves every prediction unchanged and makes runs on exactly rescaled loss
/// streams bit-identical.
#[derive(Debug, Clone)]
pub struct AdaHedge {
    theta_n: Vec<f64>,
    lambda_n: f64,
    scale: f64,
    alpha: f64,
    x: Vec<f64>,
    last_delta: f64,
    t: usize,
}

impl AdaHedge {
    /// `alpha = sqrt(ln d)` gives the standard guarantee.
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim < 2 {
            return Err(OcoError::InvalidParameter("AdaHedge needs d >= 2".into()));
        }
        check_positive("alpha", alpha)?;
        Ok(AdaHedge {
            theta_n: vec![0.0; dim],
            lambda_n: 0.0,
            scale: 0.0,
            alpha,
            x: vec![1.0 / dim as f64; dim],
            last_delta: 0.0,
            t: 0,
        })
    }

    pub fn with_default_alpha(dim: usize) -> Result<Self> {
        Self::new(dim, (dim as f64).ln().sqrt())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Current `lambda_{t+1}` in loss units.
    pub fn lambda(&self) -> f64 {
        self.lambda_n * self.scale
    }

    /// Mixability gap of the last round, in loss units.
    pub fn last_delta(&self) -> f64 {
        self.last_delta
    }

    fn rescale_to(&mut self, m: f64) {
        if self.scale > 0.0 {
            let r = self.scale / m;
            for th in self.theta_n.iter_mut() {
                *th *= r;
            }
            self.lambda_n *= r;
        }
        self.scale = m;
    }

    /// `delta = lambda ln(sum x_j exp(-g_j / lambda)) + <g, x>`, or its `lambda -> 0` limit.
    fn mixability_gap(x: &[f64], g: &[f64], lambda: f64) -> f64 {
        let gx: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
        let gmin = x
            .iter()
            .zip(g)
            .filter(|(a, _)| **a > 0.0)
            .map(|(_, b)| *b)
            .fold(f64::INFINITY, f64::min);
        let delta = if lambda == 0.0 {
            gx - gmin
        } else {
            let s: f64 = x
                .iter()
                .zip(g)
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, b)| a * (-(b - gmin) / lambda).exp())
                .sum();
            gx - gmin + lambda * s.ln()
        };
        delta.max(0.0)
    }

    fn predict_from_state(&self) -> Vec<f64> {
        let d = self.theta_n.len();
        let tmax = self.theta_n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if self.lambda_n == 0.0 {
            // limit of the softmax: uniform over the leaders
            let leaders: Vec<bool> = self.theta_n.iter().map(|th| *th == tmax).collect();
            let k = leaders.iter().filter(|b| **b).count() as f64;
            return (0..d).map(|i| if leaders[i] { 1.0 / k } else { 0.0 }).collect();
        }
        let logits: Vec<f64> = self.theta_n.iter().map(|th| th / self.lambda_n).collect();
        softmax(&logits)
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.theta_n.len(), g.len())?;
        check_finite("gradient", g)?;
        self.t += 1;
        let m = norm_inf(g);
        if m == 0.0 {
            self.last_delta = 0.0;
            return Ok(());
        }
        if m > self.scale {
            self.rescale_to(m);
        }
        let gn: Vec<f64> = g.iter().map(|v| v / self.scale).collect();
        let delta_n = Self::mixability_gap(&self.x, &gn, self.lambda_n);
        self.last_delta = delta_n * self.scale;
        self.lambda_n += delta_n / (self.alpha * self.alpha);
        for (th, gi) in self.theta_n.iter_mut().zip(&gn) {
            *th -= gi;
        }
        self.x = self.predict_from_state();
        Ok(())
    }
}

impl Learner for AdaHedge {
    fn dim(&self) -> usize {
        self.theta_n.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.x)?;
        self.step(&g)
    }

    fn aux(&self) -> Option<f64> {
        Some(self.lambda())
    }
}

// ---------------------------------------------------------------------------
// Composite L1 regularization
// ---------------------------------------------------------------------------

/// FTRL for losses `<g_t, x> + lambda ||x||_1` with regularizer `L sqrt(t) / 2 ||x||^2`.
///
/// Only the gradients of the linear part are fed back; the L1 term is handled in closed form.
#[derive(Debug, Clone)]
pub struct CompositeL1 {
    theta: Vec<f64>,
    lambda: f64,
    lipschitz: f64,
    t: usize,
}

impl CompositeL1 {
    pub fn new(dim: usize, lambda: f64, lipschitz: f64) -> Result<Self> {
        check_positive("l1 weight", lambda)?;
        check_positive("lipschitz constant", lipschitz)?;
        Ok(CompositeL1 { theta: vec![0.0; dim], lambda, lipschitz, t: 0 })
    }

    /// Soft-thresholded prediction for round `t` given `theta = sum_{i<t} g_i`.
    pub fn soft_threshold(theta: &[f64], t: usize, lambda: f64, lipschitz: f64) -> Vec<f64> {
        let t = t as f64;
        theta
            .iter()
            .map(|th| {
                let mag = (th.abs() - lambda * t).max(0.0);
                if mag == 0.0 {
                    0.0
                } else {
                    -th.signum() * mag / (lipschitz * t.sqrt())
                }
            })
            .collect()
    }

    pub fn x(&self) -> Vec<f64> {
        Self::soft_threshold(&self.theta, self.t + 1, self.lambda, self.lipschitz)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.theta.len(), g.len())?;
        check_finite("gradient", g)?;
        for (th, gi) in self.theta.iter_mut().zip(g) {
            *th += gi;
        }
        self.t += 1;
        Ok(())
    }
}

impl Learner for CompositeL1 {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.x())?;
        self.step(&g)
    }
}

// ---------------------------------------------------------------------------
// Quadratized FTRL
// ---------------------------------------------------------------------------

/// Unconstrained FTRL on the quadratic lower bounds `<g_i, x> + mu_i / 2 ||x - x_i||^2`.
#[derive(Debug, Clone)]
pub struct Quadratized {
    num: Vec<f64>,
    den: f64,
    mu: f64,
    last_x: Vec<f64>,
}

impl Quadratized {
    /// `mu` is the strong-convexity constant used by [`Learner::observe`]; full-loss
    /// feedback multiplies it by the loss scale.
    pub fn new(dim: usize, mu: f64) -> Result<Self> {
        check_positive("mu", mu)?;
        Ok(Quadratized { num: vec![0.0; dim], den: 0.0, mu, last_x: vec![0.0; dim] })
    }

    /// `sum (mu_i x_i - g_i) / sum mu_i`, zero before any observation.
    pub fn x(&self) -> Vec<f64> {
        if self.den == 0.0 {
            return vec![0.0; self.num.len()];
        }
        self.num.iter().map(|n| n / self.den).collect()
    }

    pub fn step(&mut self, g: &[f64], mu: f64, x_obs: &[f64]) -> Result<()> {
        check_dim(self.num.len(), g.len())?;
        check_dim(self.num.len(), x_obs.len())?;
        check_finite("gradient", g)?;
        check_finite("observed point", x_obs)?;
        check_positive("mu", mu)?;
        for ((n, gi), xi) in self.num.iter_mut().zip(g).zip(x_obs) {
            *n += mu * xi - gi;
        }
        self.den += mu;
        Ok(())
    }
}

impl Learner for Quadratized {
    fn dim(&self) -> usize {
        self.num.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        self.last_x = self.x();
        Ok(self.last_x.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let x = self.last_x.clone();
        let mu = match feedback {
            Feedback::Loss(loss) => self.mu * loss.scale,
            _ => self.mu,
        };
        let g = feedback_gradient(feedback, &x)?;
        self.step(&g, mu, &x)
    }
}

// ---------------------------------------------------------------------------
// Follow the leader
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum LeaderState {
    Empty,
    Linear(Vec<f64>),
    Squared { sum: Vec<f64>, count: usize },
}

/// Exact follow-the-leader for linear losses (on a ball or box) and squared distances.
///
/// The first prediction is the projection of the origin.
#[derive(Debug, Clone)]
pub struct FollowTheLeader {
    dim: usize,
    set: FeasibleSet,
    state: LeaderState,
}

impl FollowTheLeader {
    pub fn new(dim: usize, set: FeasibleSet) -> Result<Self> {
        check_closed_form_set(&set)?;
        if let Some(d) = set.dim() {
            check_dim(d, dim)?;
        }
        Ok(FollowTheLeader { dim, set, state: LeaderState::Empty })
    }

    pub fn x(&self) -> Result<Vec<f64>> {
        match &self.state {
            LeaderState::Empty => project(&self.set, &vec![0.0; self.dim]),
            LeaderState::Squared { sum, count } => {
                let mean: Vec<f64> = sum.iter().map(|s| s / *count as f64).collect();
                project(&self.set, &mean)
            }
            LeaderState::Linear(gsum) => match &self.set {
                FeasibleSet::All => {
                    if gsum.iter().all(|g| *g == 0.0) {
                        Ok(vec![0.0; self.dim])
                    } else {
                        Err(OcoError::Domain("linear leader is unbounded on the whole space".into()))
                    }
                }
                FeasibleSet::L2Ball { radius } => {
                    let n = norm2(gsum);
                    if n == 0.0 {
                        Ok(vec![0.0; self.dim])
                    } else {
                        project(&self.set, &gsum.iter().map(|g| -radius * g / n).collect::<Vec<_>>())
                    }
                }
                FeasibleSet::Box { lo, hi } => Ok(gsum
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(g, (a, b))| {
                        if *g > 0.0 {
                            *a
                        } else if *g < 0.0 {
                            *b
                        } else {
                            0f64.max(*a).min(*b)
                        }
                    })
                    .collect()),
                FeasibleSet::Simplex { .. } => unreachable!("rejected at construction"),
            },
        }
    }

    pub fn observe_loss(&mut self, loss: &LossSpec) -> Result<()> {
        check_dim(self.dim, loss.dim())?;
        match (&mut self.state, &loss.kind) {
            (LeaderState::Empty, LossKind::Linear { g }) => {
                self.state = LeaderState::Linear(g.iter().map(|v| v * loss.scale).collect());
            }
            (LeaderState::Linear(sum), LossKind::Linear { g }) => {
                for (s, v) in sum.iter_mut().zip(g) {
                    *s += v * loss.scale;
                }
            }
            (LeaderState::Empty, LossKind::SquaredDistance { y }) if loss.scale == 1.0 => {
                self.state = LeaderState::Squared { sum: y.clone(), count: 1 };
            }
            (LeaderState::Squared { sum, count }, LossKind::SquaredDistance { y }) if loss.scale == 1.0 => {
                for (s, v) in sum.iter_mut().zip(y) {
                    *s += v;
                }
                *count += 1;
            }
            _ => {
                return Err(OcoError::Unsupported(
                    "follow-the-leader handles a stream of all-linear or all-unit-scale squared losses".into(),
                ))
            }
        }
        Ok(())
    }
}

impl Learner for FollowTheLeader {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        self.x()
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        match feedback {
            Feedback::Loss(loss) => self.observe_loss(loss),
            Feedback::Gradient(g) => self.observe_loss(&LossSpec::linear(g.to_vec())),
            Feedback::Bandit { .. } => Err(OcoError::Unsupported("follow-the-leader needs full information".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Optimistic FTRL
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HintStrategy {
    Zero,
    LastGradient,
    RunningMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimisticSchedule {
    Fixed(RegSchedule),
    /// `lambda_t = sqrt(max(8 M^2, 4 L^2) + sum_{i=2}^{t-1} ||grad l_i(x_{i-1}) - grad l_{i-1}(x_{i-1})||^2)`
    /// for `M`-smooth, `L`-Lipschitz losses; needs full-loss feedback.
    Gradual { smoothness: f64, lipschitz: f64 },
}

/// Optimistic FTRL with quadratic regularizer and linear hints `<h_t, x>`.
#[derive(Debug, Clone)]
pub struct OptimisticFtrl {
    theta: Vec<f64>,
    set: FeasibleSet,
    schedule: OptimisticSchedule,
    hint: HintStrategy,
    grad_sum: Vec<f64>,
    last_g: Option<Vec<f64>>,
    prev_x: Option<Vec<f64>>,
    variation: f64,
    x: Vec<f64>,
    t: usize,
}

impl OptimisticFtrl {
    pub fn new(dim: usize, set: FeasibleSet, schedule: OptimisticSchedule, hint: HintStrategy) -> Result<Self> {
        check_closed_form_set(&set)?;
        if let Some(d) = set.dim() {
            check_dim(d, dim)?;
        }
        match schedule {
            OptimisticSchedule::Fixed(s) => s.validate()?,
            OptimisticSchedule::Gradual { smoothness, lipschitz } => {
                check_positive("smoothness", smoothness)?;
                check_positive("lipschitz constant", lipschitz)?;
            }
        }
        let mut me = OptimisticFtrl {
            theta: vec![0.0; dim],
            set,
            schedule,
            hint,
            grad_sum: vec![0.0; dim],
            last_g: None,
            prev_x: None,
            variation: 0.0,
            x: vec![0.0; dim],
            t: 0,
        };
        me.x = me.compute_x()?;
        Ok(me)
    }

    /// `lambda` used for the prediction of round `t + 1`.
    pub fn lambda(&self) -> f64 {
        match self.schedule {
            OptimisticSchedule::Fixed(s) => s.lambda(self.t + 1),
            OptimisticSchedule::Gradual { smoothness, lipschitz } => {
                let base = (8.0 * smoothness * smoothness).max(4.0 * lipschitz * lipschitz);
                (base + self.variation).sqrt()
            }
        }
    }

    /// Hint vector `h_{t+1}` for the coming round.
    pub fn hint(&self) -> Vec<f64> {
        let d = self.theta.len();
        match (self.hint, &self.last_g) {
            (HintStrategy::Zero, _) | (_, None) => vec![0.0; d],
            (HintStrategy::LastGradient, Some(g)) => g.clone(),
            (HintStrategy::RunningMean, Some(_)) => self.grad_sum.iter().map(|s| s / self.t as f64).collect(),
        }
    }

    fn compute_x(&self) -> Result<Vec<f64>> {
        let h = self.hint();
        let shifted: Vec<f64> = self.theta.iter().zip(&h).map(|(th, hi)| th - hi).collect();
        quadratic_argmin(&self.set, &shifted, self.lambda())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        if matches!(self.schedule, OptimisticSchedule::Gradual { .. }) {
            return Err(OcoError::Unsupported("the gradual-variation schedule needs full-loss feedback".into()));
        }
        self.absorb(g)
    }

    /// Full-information update; required by the gradual-variation schedule.
    pub fn step_loss(&mut self, loss: &LossSpec) -> Result<()> {
        let g = subgradient(loss, &self.x)?;
        if let (Some(px), Some(pg)) = (&self.prev_x, &self.last_g) {
            // grad l_t(x_{t-1}) - grad l_{t-1}(x_{t-1})
            let now = subgradient(loss, px)?;
            self.variation += norm_sq(&now.iter().zip(pg).map(|(a, b)| a - b).collect::<Vec<_>>());
        }
        self.absorb(&g)
    }

    fn absorb(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.theta.len(), g.len())?;
        check_finite("gradient", g)?;
        for ((th, s), gi) in self.theta.iter_mut().zip(self.grad_sum.iter_mut()).zip(g) {
            *th -= gi;
            *s += gi;
        }
        self.prev_x = Some(self.x.clone());
        self.last_g = Some(g.to_vec());
        self.t += 1;
        self.x = self.compute_x()?;
        Ok(())
    }
}

impl Learner for OptimisticFtrl {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        match feedback {
            Feedback::Loss(loss) => self.step_loss(loss),
            other => {
                let g = feedback_gradient(other, &self.x)?;
                self.step(&g)
            }
        }
    }

    fn aux(&self) -> Option<f64> {
        Some(self.lambda())
    }
}
