//! Adversarial bandits (Exp3, exponential weights with explicit exploration,
//! Tsallis-INF) and stochastic bandits (explore-then-commit, UCB).
//!
//! Arms are 0-based everywhere. Losses, not rewards: lower is better.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::game::{Feedback, Learner};
use crate::mirror_descent::sample_expert;
use crate::vecops::softmax;

/// Tolerance on `|sum x - 1|` reached by the Tsallis normalizer search.
pub const TSALLIS_TOLERANCE: f64 = 1e-10;
/// Iteration cap of the Tsallis normalizer search.
pub const TSALLIS_MAX_ITER: usize = 200;

/// Importance-weighted estimate: `loss / x_arm` on the played arm, zero elsewhere.
pub fn iw_estimate(x: &[f64], arm: usize, loss: f64) -> Result<Vec<f64>> {
    if arm >= x.len() {
        return Err(OcoError::InvalidParameter(format!("arm {arm} out of range for {} arms", x.len())));
    }
    if !loss.is_finite() {
        return Err(OcoError::NonFinite("bandit loss".into()));
    }
    if x[arm] <= 0.0 {
        return Err(OcoError::Domain(format!("arm {arm} was played with probability {}", x[arm])));
    }
    let mut g = vec![0.0; x.len()];
    g[arm] = loss / x[arm];
    Ok(g)
}

// ---------------------------------------------------------------------------
// Adversarial bandits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversarialAlgo {
    Exp3 { eta: f64 },
    /// Exponential weights sampling from `(1 - alpha) x + alpha / d`.
    ExploreMix { eta: f64, alpha: f64 },
    /// Online mirror descent with the `q = 1/2` Tsallis entropy.
    Tsallis { eta: f64 },
}

impl AdversarialAlgo {
    /// `sqrt(ln d / (d L^2 T))`.
    pub fn exp3_tuned(dim: usize, horizon: usize, linf: f64) -> Self {
        let (d, t) = (dim as f64, horizon as f64);
        AdversarialAlgo::Exp3 { eta: (d.ln() / (d * linf * linf * t)).sqrt() }
    }

    /// `1 / (L sqrt(T))`.
    pub fn tsallis_default(horizon: usize, linf: f64) -> Self {
        AdversarialAlgo::Tsallis { eta: 1.0 / (linf * (horizon as f64).sqrt()) }
    }
}

/// `sqrt(2) L sqrt(d T ln d)`, the tuned Exp3 pseudo-regret bound.
pub fn exp3_bound(dim: usize, horizon: usize, linf: f64) -> f64 {
    let (d, t) = (dim as f64, horizon as f64);
    2f64.sqrt() * linf * (d * t * d.ln()).sqrt()
}

/// `4 sqrt(d T)` for losses in `[0, 1]`.
pub fn tsallis_bound(dim: usize, horizon: usize) -> f64 {
    4.0 * (dim as f64 * horizon as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct AdversarialBandit {
    algo: AdversarialAlgo,
    linf: f64,
    /// Exp3 / ExploreMix: cumulative logits. Tsallis: unused.
    logits: Vec<f64>,
    /// Inner distribution (before exploration mixing).
    x: Vec<f64>,
    last_estimate: Vec<f64>,
    last_iterations: usize,
    t: usize,
}

impl AdversarialBandit {
    /// Starts uniform over `dim >= 2` arms; losses must lie in `[0, linf]`
    /// (`[-linf, linf]` for ExploreMix).
    pub fn new(dim: usize, algo: AdversarialAlgo, linf: f64) -> Result<Self> {
        if dim < 2 {
            return Err(OcoError::InvalidParameter("a bandit needs at least two arms".into()));
        }
        check_positive("loss bound", linf)?;
        match algo {
            AdversarialAlgo::Exp3 { eta } | AdversarialAlgo::Tsallis { eta } => check_positive("eta", eta)?,
            AdversarialAlgo::ExploreMix { eta, alpha } => {
                check_positive("eta", eta)?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(OcoError::InvalidParameter(format!("alpha must be in [0, 1], got {alpha}")));
                }
            }
        }
        let x = vec![1.0 / dim as f64; dim];
        Ok(AdversarialBandit {
            algo,
            linf,
            logits: vec![0.0; dim],
            x,
            last_estimate: vec![0.0; dim],
            last_iterations: 0,
            t: 0,
        })
    }

    pub fn algo(&self) -> AdversarialAlgo {
        self.algo
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    /// The inner distribution (equal to the sampling distribution except for ExploreMix).
    pub fn weights(&self) -> &[f64] {
        &self.x
    }

    /// The distribution arms are drawn from this round.
    pub fn sampling_distribution(&self) -> Vec<f64> {
        match self.algo {
            AdversarialAlgo::ExploreMix { alpha, .. } => {
                let u = alpha / self.x.len() as f64;
                self.x.iter().map(|xi| (1.0 - alpha) * xi + u).collect()
            }
            _ => self.x.clone(),
        }
    }

    /// The importance-weighted estimate used in the last update.
    pub fn last_estimate(&self) -> &[f64] {
        &self.last_estimate
    }

    /// Newton/bisection iterations used by the last Tsallis update.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        sample_expert(&self.sampling_distribution(), rng)
    }

    /// Updates after `arm` was played and suffered `loss`.
    pub fn update(&mut self, arm: usize, loss: f64) -> Result<()> {
        let lo = match self.algo {
            AdversarialAlgo::ExploreMix { .. } => -self.linf,
            _ => 0.0,
        };
        if !(lo..=self.linf).contains(&loss) {
            return Err(OcoError::BoundViolated(format!("loss {loss} outside [{lo}, {}]", self.linf)));
        }
        let g = iw_estimate(&self.sampling_distribution(), arm, loss)?;
        match self.algo {
            AdversarialAlgo::Exp3 { eta } | AdversarialAlgo::ExploreMix { eta, .. } => {
                self.logits[arm] -= eta * g[arm];
                self.x = softmax(&self.logits);
            }
            AdversarialAlgo::Tsallis { eta } => {
                let (x, iters) = tsallis_update(&self.x, &g, eta)?;
                self.x = x;
                self.last_iterations = iters;
            }
        }
        self.last_estimate = g;
        self.t += 1;
        Ok(())
    }
}

/// One Tsallis-INF step: `x'_i = (beta + x_i^{-1/2} + eta g_i)^{-2}` with `beta` chosen so that
/// `sum x' = 1`.
///
/// `beta` is found by Newton's method from the left end of the bracket, falling back to
/// bisection whenever a Newton step leaves the bracket. Returns the new point and the number
/// of iterations.
pub fn tsallis_update(x: &[f64], g: &[f64], eta: f64) -> Result<(Vec<f64>, usize)> {
    check_dim(x.len(), g.len())?;
    check_finite("estimate", g)?;
    if x.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(OcoError::Domain("Tsallis iterate must be strictly positive".into()));
    }
    if g.iter().any(|v| *v < 0.0) {
        return Err(OcoError::Domain("Tsallis estimates must be nonnegative".into()));
    }
    let a: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| 1.0 / xi.sqrt() + eta * gi).collect();
    let a_min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let residual = |beta: f64| a.iter().map(|ai| (beta + ai).powi(-2)).sum::<f64>() - 1.0;
    let slope = |beta: f64| -2.0 * a.iter().map(|ai| (beta + ai).powi(-3)).sum::<f64>();
    // residual(lo) >= 0 because the smallest term alone is 1; residual(hi) <= 0 because every term is <= 1/d
    let mut lo = 1.0 - a_min;
    let mut hi = (x.len() as f64).sqrt() - a_min;
    let mut beta = lo;
    for iter in 1..=TSALLIS_MAX_ITER {
        let r = residual(beta);
        if r.abs() <= TSALLIS_TOLERANCE {
            let next: Vec<f64> = a.iter().map(|ai| (beta + ai).powi(-2)).collect();
            return Ok((next, iter));
        }
        if r > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta - r / slope(beta);
        beta = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(OcoError::Convergence(format!("Tsallis normalizer not found in {TSALLIS_MAX_ITER} iterations")))
}

impl Learner for AdversarialBandit {
    fn dim(&self) -> usize {
        self.x.len()
    }

    /// The sampling distribution; the caller draws the arm.
    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.sampling_distribution())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        match feedback {
            Feedback::Bandit { arm, loss } => self.update(arm, loss),
            _ => Err(OcoError::Unsupported("adversarial bandits take bandit feedback only".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Stochastic bandits
// ---------------------------------------------------------------------------

/// Loss distribution of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmModel {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl ArmModel {
    pub fn bernoulli(p: f64) -> Result<Self> {
        let arm = ArmModel::Bernoulli { p };
        arm.validate()?;
        Ok(arm)
    }

    /// Unit-variance Gaussian.
    pub fn gaussian(mean: f64) -> Result<Self> {
        let arm = ArmModel::Gaussian { mean, sd: 1.0 };
        arm.validate()?;
        Ok(arm)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ArmModel::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                Err(OcoError::InvalidParameter(format!("Bernoulli parameter {p} not in [0, 1]")))
            }
            ArmModel::Gaussian { mean, sd } => {
                if !mean.is_finite() {
                    return Err(OcoError::NonFinite("Gaussian mean".into()));
                }
                check_positive("standard deviation", sd)
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ArmModel::Bernoulli { p } => p,
            ArmModel::Gaussian { mean, .. } => mean,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ArmModel::Bernoulli { p } => {
                if Bernoulli::new(p).expect("validated parameter").sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            ArmModel::Gaussian { mean, sd } => Normal::new(mean, sd).expect("validated parameter").sample(rng),
        }
    }
}

/// Gaps `mu_i - min_j mu_j`.
pub fn gaps(arms: &[ArmModel]) -> Vec<f64> {
    let best = arms.iter().map(|a| a.mean()).fold(f64::INFINITY, f64::min);
    arms.iter().map(|a| a.mean() - best).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StochasticPolicy {
    /// Explore every arm `m` times round robin, then commit to the empirical best.
    ExploreThenCommit { m: usize },
    /// Lower confidence index `mu - sqrt(2 alpha ln t / S)`; needs `alpha > 2`.
    Ucb { alpha: f64 },
}

/// `max(ceil(4 / gap^2 ln(T gap^2 / 4)), 1)`, the two-armed tuning of the exploration length.
pub fn etc_tuned_m(horizon: usize, gap: f64) -> usize {
    let g2 = gap * gap;
    let m = (4.0 / g2 * (horizon as f64 * g2 / 4.0).ln()).ceil();
    if m.is_finite() && m >= 1.0 {
        m as usize
    } else {
        1
    }
}

/// `gap + 4 / gap (1 + max(ln(T gap^2 / 4), 0))`, the tuned two-armed ETC bound.
pub fn etc_bound(horizon: usize, gap: f64) -> f64 {
    gap + 4.0 / gap * (1.0 + (horizon as f64 * gap * gap / 4.0).ln().max(0.0))
}

/// `alpha / (alpha - 2) sum gaps + sum_{gap > 0} 8 alpha ln T / gap`.
pub fn ucb_bound(alpha: f64, gaps: &[f64], horizon: usize) -> f64 {
    let ln_t = (horizon as f64).ln();
    let sum: f64 = gaps.iter().sum();
    alpha / (alpha - 2.0) * sum + gaps.iter().filter(|g| **g > 0.0).map(|g| 8.0 * alpha * ln_t / g).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct StochasticBandit {
    policy: StochasticPolicy,
    pulls: Vec<usize>,
    sums: Vec<f64>,
    horizon: usize,
    t: usize,
    committed: Option<usize>,
}

impl StochasticBandit {
    pub fn new(dim: usize, policy: StochasticPolicy, horizon: usize) -> Result<Self> {
        if dim < 2 {
            return Err(OcoError::InvalidParameter("a bandit needs at least two arms".into()));
        }
        if horizon == 0 {
            return Err(OcoError::InvalidParameter("horizon must be at least 1".into()));
        }
        match policy {
            StochasticPolicy::ExploreThenCommit { m } => {
                if m < 1 || m > horizon / dim {
                    return Err(OcoError::InvalidParameter(format!("m = {m} not in [1, T/d = {}]", horizon / dim)));
                }
            }
            StochasticPolicy::Ucb { alpha } => {
                if !(alpha > 2.0) || !alpha.is_finite() {
                    return Err(OcoError::InvalidParameter(format!("UCB needs alpha > 2, got {alpha}")));
                }
            }
        }
        Ok(StochasticBandit { policy, pulls: vec![0; dim], sums: vec![0.0; dim], horizon, t: 0, committed: None })
    }

    pub fn policy(&self) -> StochasticPolicy {
        self.policy
    }

    pub fn dim(&self) -> usize {
        self.pulls.len()
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn pulls(&self) -> &[usize] {
        &self.pulls
    }

    /// Empirical mean loss per arm; `None` for arms never pulled.
    pub fn means(&self) -> Vec<Option<f64>> {
        self.pulls.iter().zip(&self.sums).map(|(n, s)| (*n > 0).then(|| s / *n as f64)).collect()
    }

    /// UCB index of every arm at round `t` (1-based); `-inf` for unpulled arms.
    pub fn ucb_indices(&self, alpha: f64, t: usize) -> Vec<f64> {
        let ln_t = (t as f64).ln();
        self.means()
            .iter()
            .zip(&self.pulls)
            .map(|(m, n)| match m {
                Some(mu) => mu - (2.0 * alpha * ln_t / *n as f64).sqrt(),
                None => f64::NEG_INFINITY,
            })
            .collect()
    }

    /// Arm to play in the coming round.
    pub fn choose(&mut self) -> usize {
        let t = self.t + 1;
        let d = self.dim();
        match self.policy {
            StochasticPolicy::ExploreThenCommit { m } => {
                if t <= d * m {
                    t % d
                } else {
                    *self.committed.get_or_insert_with(|| {
                        let means: Vec<f64> = self.sums.iter().zip(&self.pulls).map(|(s, n)| s / *n as f64).collect();
                        argmin_first(&means)
                    })
                }
            }
            StochasticPolicy::Ucb { alpha } => argmin_first(&self.ucb_indices(alpha, t)),
        }
    }

    pub fn update(&mut self, arm: usize, loss: f64) -> Result<()> {
        if arm >= self.dim() {
            return Err(OcoError::InvalidParameter(format!("arm {arm} out of range")));
        }
        if !loss.is_finite() {
            return Err(OcoError::NonFinite("bandit loss".into()));
        }
        self.pulls[arm] += 1;
        self.sums[arm] += loss;
        self.t += 1;
        Ok(())
    }
}

impl Learner for StochasticBandit {
    fn dim(&self) -> usize {
        self.pulls.len()
    }

    /// One-hot vector of the chosen arm.
    fn predict(&mut self) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim()];
        x[self.choose()] = 1.0;
        Ok(x)
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        match feedback {
            Feedback::Bandit { arm, loss } => self.update(arm, loss),
            _ => Err(OcoError::Unsupported("stochastic bandits take bandit feedback only".into())),
        }
    }
}

/// Index of the smallest entry, ties to the lowest index.
fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Outcome of a simulated bandit run on stochastic arms.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditRun {
    /// Pseudo-regret `sum_s mu_{A_s} - t mu*` after each round.
    pub pseudo_regret: Vec<f64>,
    /// Realized losses `sum_s loss_s - t mu*` after each round.
    pub realized_regret: Vec<f64>,
    pub pulls: Vec<usize>,
}

impl BanditRun {
    pub fn final_pseudo_regret(&self) -> f64 {
        self.pseudo_regret.last().copied().unwrap_or(0.0)
    }
}

/// Either kind of bandit learner, for the simulator.
pub enum BanditAgent {
    Adversarial(AdversarialBandit),
    Stochastic(StochasticBandit),
}

/// Plays `horizon` rounds against stochastic arms; the same `rng` drives arm selection and losses.
pub fn simulate<R: Rng + ?Sized>(agent: &mut BanditAgent, arms: &[ArmModel], horizon: usize, rng: &mut R) -> Result<BanditRun> {
    let dim = match agent {
        BanditAgent::Adversarial(b) => b.dim(),
        BanditAgent::Stochastic(b) => b.dim(),
    };
    check_dim(dim, arms.len())?;
    for a in arms {
        a.validate()?;
    }
    let best = arms.iter().map(|a| a.mean()).fold(f64::INFINITY, f64::min);
    let mut run = BanditRun {
        pseudo_regret: Vec::with_capacity(horizon),
        realized_regret: Vec::with_capacity(horizon),
        pulls: vec![0; dim],
    };
    let (mut pseudo, mut realized) = (0.0, 0.0);
    for _ in 0..horizon {
        let arm = match agent {
            BanditAgent::Adversarial(b) => b.sample(rng)?,
            BanditAgent::Stochastic(b) => b.choose(),
        };
        let loss = arms[arm].sample(rng);
        match agent {
            BanditAgent::Adversarial(b) => b.update(arm, loss)?,
            BanditAgent::Stochastic(b) => b.update(arm, loss)?,
        }
        run.pulls[arm] += 1;
        pseudo += arms[arm].mean() - best;
        realized += loss - best;
        run.pseudo_regret.push(pseudo);
        run.realized_regret.push(realized);
    }
    Ok(run)
}
