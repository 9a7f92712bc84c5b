//! Seeded loss-sequence generators and the online-to-batch conversion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bandit::ArmModel;
use crate::error::{check_finite, check_positive, OcoError, Result};
use crate::game::{Feedback, Learner, LossSpec};
use crate::vecops::norm2;

/// Noise added to the mean vector of an i.i.d. linear environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearNoise {
    /// Independent uniform noise on `[-half_width, half_width]` per coordinate.
    Uniform { half_width: f64 },
    /// Independent `+-scale` noise per coordinate.
    Rademacher { scale: f64 },
    /// Independent Gaussian noise per coordinate.
    Gaussian { sd: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    /// Squared distance to `y_t`; `ys = None` draws `y_t` uniformly from `[0, 1]`.
    GuessingGame { ys: Option<Vec<f64>> },
    /// Linear losses on `[-1, 1]`: `-0.5`, then `+1` on even rounds and `-1` on odd rounds.
    FtlFailure,
    /// Linear losses `L eps_t z` with Rademacher signs; `diameter` is the width of the
    /// competitor segment `[-(D/2) z, (D/2) z]` for unit `z`.
    RademacherOlo { lipschitz: f64, diameter: f64, z: Vec<f64> },
    /// Linear losses `mean + noise`.
    IidLinear { mean: Vec<f64>, noise: LinearNoise },
    /// Linear losses whose coordinates are independent draws of each arm.
    StochasticArms { arms: Vec<ArmModel> },
    /// The same loss every round.
    FixedConvex { loss: LossSpec },
    /// Linear losses in `[-linf, linf]^dim` that jump to a fresh random base vector every
    /// `block` rounds, with uniform jitter of a quarter of `linf` around it.
    Switching { dim: usize, linf: f64, block: usize },
}

impl EnvKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvKind::GuessingGame { ys: Some(ys) } => {
                if ys.is_empty() {
                    return Err(OcoError::Empty("guessing-game sequence".into()));
                }
                if ys.iter().any(|y| !(0.0..=1.0).contains(y)) {
                    return Err(OcoError::InvalidParameter("guessing-game targets must lie in [0, 1]".into()));
                }
                Ok(())
            }
            EnvKind::GuessingGame { ys: None } | EnvKind::FtlFailure => Ok(()),
            EnvKind::RademacherOlo { lipschitz, diameter, z } => {
                check_positive("lipschitz constant", *lipschitz)?;
                check_positive("diameter", *diameter)?;
                check_finite("direction", z)?;
                if (norm2(z) - 1.0).abs() > 1e-9 {
                    return Err(OcoError::InvalidParameter("direction must have unit norm".into()));
                }
                Ok(())
            }
            EnvKind::IidLinear { mean, noise } => {
                if mean.is_empty() {
                    return Err(OcoError::Empty("mean vector".into()));
                }
                check_finite("mean", mean)?;
                match *noise {
                    LinearNoise::Uniform { half_width: w } | LinearNoise::Rademacher { scale: w } => {
                        if !(w >= 0.0 && w.is_finite()) {
                            return Err(OcoError::InvalidParameter(format!("noise scale {w} must be nonnegative")));
                        }
                        Ok(())
                    }
                    LinearNoise::Gaussian { sd } => check_positive("noise sd", sd),
                }
            }
            EnvKind::StochasticArms { arms } => {
                if arms.len() < 2 {
                    return Err(OcoError::InvalidParameter("need at least two arms".into()));
                }
                arms.iter().try_for_each(ArmModel::validate)
            }
            EnvKind::FixedConvex { loss } => loss.validate(),
            EnvKind::Switching { dim, linf, block } => {
                if *dim == 0 || *block == 0 {
                    return Err(OcoError::InvalidParameter("switching stream needs dim >= 1 and block >= 1".into()));
                }
                check_positive("loss bound", *linf)
            }
        }
    }

    /// Dimension of the generated losses.
    pub fn dim(&self) -> usize {
        match self {
            EnvKind::GuessingGame { .. } | EnvKind::FtlFailure => 1,
            EnvKind::RademacherOlo { z, .. } => z.len(),
            EnvKind::IidLinear { mean, .. } => mean.len(),
            EnvKind::StochasticArms { arms } => arms.len(),
            EnvKind::FixedConvex { loss } => loss.dim(),
            EnvKind::Switching { dim, .. } => *dim,
        }
    }
}

/// A seeded loss generator. Identical kinds and seeds produce identical streams.
#[derive(Debug, Clone)]
pub struct Environment {
    kind: EnvKind,
    seed: u64,
    rng: ChaCha8Rng,
    t: usize,
    base: Vec<f64>,
}

impl Environment {
    pub fn new(kind: EnvKind, seed: u64) -> Result<Self> {
        kind.validate()?;
        Ok(Environment { kind, seed, rng: ChaCha8Rng::seed_from_u64(seed), t: 0, base: vec![] })
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Rounds generated so far.
    pub fn rounds(&self) -> usize {
        self.t
    }

    /// Loss of round `t`; rounds must be requested in order starting from 1.
    pub fn next_loss(&mut self, t: usize) -> Result<LossSpec> {
        if t != self.t + 1 {
            return Err(OcoError::Protocol(format!("expected round {}, got {t}", self.t + 1)));
        }
        let loss = match &self.kind {
            EnvKind::GuessingGame { ys: Some(ys) } => {
                let y = *ys.get(t - 1).ok_or_else(|| {
                    OcoError::Empty(format!("guessing-game sequence has only {} targets", ys.len()))
                })?;
                LossSpec::squared_scalar(y)
            }
            EnvKind::GuessingGame { ys: None } => LossSpec::squared_scalar(self.rng.random::<f64>()),
            EnvKind::FtlFailure => {
                let z = if t == 1 {
                    -0.5
                } else if t.is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                LossSpec::linear(vec![z])
            }
            EnvKind::RademacherOlo { lipschitz, z, .. } => {
                let eps = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
                LossSpec::linear(z.iter().map(|zi| lipschitz * eps * zi).collect())
            }
            EnvKind::IidLinear { mean, noise } => {
                let rng = &mut self.rng;
                let g = match *noise {
                    LinearNoise::Uniform { half_width } => {
                        mean.iter().map(|m| m + half_width * rng.random_range(-1.0..=1.0)).collect()
                    }
                    LinearNoise::Rademacher { scale } => mean
                        .iter()
                        .map(|m| m + if rng.random::<bool>() { scale } else { -scale })
                        .collect(),
                    LinearNoise::Gaussian { sd } => {
                        let normal = Normal::new(0.0, sd).expect("validated sd");
                        mean.iter().map(|m| m + normal.sample(rng)).collect()
                    }
                };
                LossSpec::linear(g)
            }
            EnvKind::StochasticArms { arms } => {
                let rng = &mut self.rng;
                LossSpec::linear(arms.iter().map(|a| a.sample(rng)).collect())
            }
            EnvKind::FixedConvex { loss } => loss.clone(),
            EnvKind::Switching { dim, linf, block } => {
                let (dim, linf, block) = (*dim, *linf, *block);
                let rng = &mut self.rng;
                if (t - 1).is_multiple_of(block) {
                    self.base = (0..dim).map(|_| rng.random_range(-linf..=linf)).collect();
                }
                let g = self
                    .base
                    .iter()
                    .map(|b| (b + 0.25 * linf * rng.random_range(-1.0..=1.0)).clamp(-linf, linf))
                    .collect();
                LossSpec::linear(g)
            }
        };
        self.t = t;
        Ok(loss)
    }

    /// The next `horizon` losses.
    pub fn take(&mut self, horizon: usize) -> Result<Vec<LossSpec>> {
        (0..horizon).map(|_| self.next_loss(self.t + 1)).collect()
    }
}

/// The two endpoints `+-(D/2) z` of a Rademacher environment's competitor segment.
pub fn rademacher_competitors(diameter: f64, z: &[f64]) -> [Vec<f64>; 2] {
    let v: Vec<f64> = z.iter().map(|zi| 0.5 * diameter * zi).collect();
    let w: Vec<f64> = v.iter().map(|vi| -vi).collect();
    [v, w]
}

// ---------------------------------------------------------------------------
// Online-to-batch
// ---------------------------------------------------------------------------

/// Per-round weights `alpha_t` of the online-to-batch conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchWeights {
    Uniform,
    /// `1 / sqrt(t)`.
    InvSqrt,
    /// `t`.
    Linear,
}

impl BatchWeights {
    pub fn weight(&self, t: usize) -> f64 {
        match self {
            BatchWeights::Uniform => 1.0,
            BatchWeights::InvSqrt => 1.0 / (t as f64).sqrt(),
            BatchWeights::Linear => t as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConversion {
    /// `sum alpha_t x_t / sum alpha_t`.
    pub average: Vec<f64>,
    pub weights: Vec<f64>,
    /// The objective at the average, when an objective was supplied.
    pub objective: Option<f64>,
}

/// Runs `learner` on the losses `alpha_t f(., xi_t)` drawn from `sampler(t)` and averages its
/// predictions with the same weights.
pub fn online_to_batch<S>(
    learner: &mut dyn Learner,
    mut sampler: S,
    horizon: usize,
    weights: BatchWeights,
    objective: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<BatchConversion>
where
    S: FnMut(usize) -> Result<LossSpec>,
{
    if horizon == 0 {
        return Err(OcoError::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut sum = vec![0.0; learner.dim()];
    let mut alphas = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let x = learner.predict()?;
        let alpha = weights.weight(t);
        for (s, xi) in sum.iter_mut().zip(&x) {
            *s += alpha * xi;
        }
        alphas.push(alpha);
        let f = sampler(t)?;
        let scaled = f.clone().with_scale(f.scale * alpha)?;
        learner.observe(Feedback::Loss(&scaled))?;
    }
    let total: f64 = alphas.iter().sum();
    let average: Vec<f64> = sum.iter().map(|s| s / total).collect();
    let objective = objective.map(|f| f(&average));
    Ok(BatchConversion { average, weights: alphas, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::first_order::{Osd, StepsizePolicy};
    use crate::ftrl::{FollowTheLeader, Quadratized};
    use crate::game::{play, regret, FeedbackMode, LossKind};
    use crate::geometry::FeasibleSet;
    use proptest::prelude::*;

    #[test]
    fn ftl_failure_examples() {
        let mut env = Environment::new(EnvKind::FtlFailure, 0).unwrap();
        let losses = env.take(5).unwrap();
        let zs: Vec<f64> = losses
            .iter()
            .map(|l| match &l.kind {
                LossKind::Linear { g } => g[0],
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(zs, vec![-0.5, 1.0, -1.0, 1.0, -1.0]);
        assert!(env.next_loss(7).is_err());
    }

    #[test]
    fn guessing_game_examples() {
        let mut env = Environment::new(EnvKind::GuessingGame { ys: Some(vec![0.3]) }, 0).unwrap();
        assert_eq!(env.next_loss(1).unwrap(), LossSpec::squared_scalar(0.3));
        assert!(env.next_loss(2).is_err());
        assert!(Environment::new(EnvKind::GuessingGame { ys: Some(vec![1.5]) }, 0).is_err());
    }

    #[test]
    fn ftl_fails_where_osd_does_not() {
        let t_max = 1000;
        let losses = Environment::new(EnvKind::FtlFailure, 0).unwrap().take(t_max).unwrap();
        let set = FeasibleSet::interval(-1.0, 1.0).unwrap();
        let mut ftl = FollowTheLeader::new(1, set.clone()).unwrap();
        let ledger = play(&mut ftl, losses.clone(), FeedbackMode::FullLoss).unwrap();
        assert_eq!(ledger.records()[0].x, vec![0.0]);
        assert!(regret(&ledger, &[0.0]).unwrap() >= t_max as f64 - 2.0);

        let policy = StepsizePolicy::Decaying { diameter: 2.0, lipschitz: 1.0 };
        let mut osd = Osd::new(set, policy, vec![0.0]).unwrap();
        let ledger = play(&mut osd, losses, FeedbackMode::Gradient).unwrap();
        let worst = [-1.0, 0.0, 1.0].iter().map(|u| regret(&ledger, &[*u]).unwrap()).fold(f64::MIN, f64::max);
        assert!(worst <= 3.0 * (t_max as f64).sqrt());
    }

    #[test]
    fn ftl_guessing_game_log_regret() {
        let t_max = 1000;
        for seed in 0..100 {
            let losses = Environment::new(EnvKind::GuessingGame { ys: None }, seed).unwrap().take(t_max).unwrap();
            let ys: Vec<f64> = losses
                .iter()
                .map(|l| match &l.kind {
                    LossKind::SquaredDistance { y } => y[0],
                    _ => unreachable!(),
                })
                .collect();
            let mut ftl = FollowTheLeader::new(1, FeasibleSet::All).unwrap();
            let ledger = play(&mut ftl, losses, FeedbackMode::FullLoss).unwrap();
            let best = crate::game::best_squared_loss_competitor(&ys).unwrap();
            assert!(regret(&ledger, &[best]).unwrap() <= 4.0 + 4.0 * (t_max as f64).ln());
        }
    }

    #[test]
    fn rademacher_stream_shape() {
        let z = vec![0.6, 0.8];
        let mut env = Environment::new(EnvKind::RademacherOlo { lipschitz: 2.0, diameter: 1.0, z: z.clone() }, 9).unwrap();
        for l in env.take(100).unwrap() {
            match &l.kind {
                LossKind::Linear { g } => {
                    assert!((norm2(g) - 2.0).abs() < 1e-12);
                    assert!((g[0] * z[1] - g[1] * z[0]).abs() < 1e-12);
                }
                _ => unreachable!(),
            }
        }
        assert!(Environment::new(EnvKind::RademacherOlo { lipschitz: 1.0, diameter: 1.0, z: vec![1.0, 1.0] }, 0).is_err());
        let [v, w] = rademacher_competitors(2.0, &z);
        assert_eq!(v, vec![0.6, 0.8]);
        assert_eq!(w, vec![-0.6, -0.8]);
    }

    #[test]
    fn stochastic_arms_and_fixed_losses() {
        let arms = vec![ArmModel::bernoulli(0.0).unwrap(), ArmModel::bernoulli(1.0).unwrap()];
        let mut env = Environment::new(EnvKind::StochasticArms { arms }, 1).unwrap();
        assert_eq!(env.next_loss(1).unwrap(), LossSpec::linear(vec![0.0, 1.0]));
        let loss = LossSpec::absolute(10.0);
        let mut env = Environment::new(EnvKind::FixedConvex { loss: loss.clone() }, 1).unwrap();
        assert_eq!(env.take(3).unwrap(), vec![loss.clone(), loss.clone(), loss]);
    }

    #[test]
    fn switching_stream_stays_in_box() {
        let mut env = Environment::new(EnvKind::Switching { dim: 3, linf: 0.5, block: 7 }, 4).unwrap();
        for l in env.take(200).unwrap() {
            match &l.kind {
                LossKind::Linear { g } => assert!(g.iter().all(|v| v.abs() <= 0.5)),
                _ => unreachable!(),
            }
        }
        assert!(Environment::new(EnvKind::Switching { dim: 3, linf: 0.5, block: 0 }, 4).is_err());
    }

    #[test]
    fn o2b_constant_quadratic() {
        let set = FeasibleSet::interval(-1.0, 1.0).unwrap();
        let policy = StepsizePolicy::Decaying { diameter: 2.0, lipschitz: 2.0 };
        let mut osd = Osd::new(set.clone(), policy.clone(), vec![1.0]).unwrap();
        let f = |x: &[f64]| x[0] * x[0];
        let out = online_to_batch(&mut osd, |_| Ok(LossSpec::squared_scalar(0.0)), 1000, BatchWeights::Uniform, Some(&f)).unwrap();
        assert!(out.average[0].abs() <= 0.1);
        assert!(out.objective.unwrap() <= 0.01);

        let mut osd = Osd::new(set, policy, vec![0.7]).unwrap();
        let out = online_to_batch(&mut osd, |_| Ok(LossSpec::squared_scalar(0.0)), 1, BatchWeights::InvSqrt, None).unwrap();
        assert_eq!(out.average, vec![0.7]);
        assert_eq!(out.weights, vec![1.0]);
    }

    #[test]
    fn o2b_linear_weights_beat_uniform_on_strongly_convex_objective() {
        // f(x, xi) = (x - xi)^2 with xi ~ N(1, 1); F(x) - F* = (x - 1)^2
        let horizon = 1000;
        let excess = |x: &[f64]| (x[0] - 1.0).powi(2);
        let mut sums = [0.0; 2];
        for seed in 0..20 {
            for (k, weights) in [BatchWeights::Uniform, BatchWeights::Linear].into_iter().enumerate() {
                let mut env = Environment::new(
                    EnvKind::IidLinear { mean: vec![1.0], noise: LinearNoise::Gaussian { sd: 1.0 } },
                    seed,
                )
                .unwrap();
                let mut learner = Quadratized::new(1, 2.0).unwrap();
                let sampler = |t: usize| {
                    let xi = match env.next_loss(t)?.kind {
                        LossKind::Linear { g } => g[0],
                        _ => unreachable!(),
                    };
                    Ok(LossSpec::squared_scalar(xi))
                };
                let out = online_to_batch(&mut learner, sampler, horizon, weights, Some(&excess)).unwrap();
                sums[k] += out.objective.unwrap();
            }
        }
        assert!(sums[1] < sums[0], "linear {} vs uniform {}", sums[1], sums[0]);
    }

    proptest! {
        #[test]
        fn identical_seeds_identical_streams(seed in any::<u64>(), which in 0usize..5) {
            let kind = match which {
                0 => EnvKind::Switching { dim: 2, linf: 1.0, block: 5 },
                1 => EnvKind::RademacherOlo { lipschitz: 1.0, diameter: 2.0, z: vec![1.0, 0.0] },
                2 => EnvKind::IidLinear { mean: vec![0.1, -0.2], noise: LinearNoise::Uniform { half_width: 0.5 } },
                3 => EnvKind::GuessingGame { ys: None },
                _ => EnvKind::StochasticArms { arms: vec![ArmModel::gaussian(0.0).unwrap(), ArmModel::bernoulli(0.5).unwrap()] },
            };
            let a = Environment::new(kind.clone(), seed).unwrap().take(50).unwrap();
            let b = Environment::new(kind, seed).unwrap().take(50).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn o2b_average_is_weighted_mean(weights in prop::sample::select(vec![BatchWeights::Uniform, BatchWeights::InvSqrt, BatchWeights::Linear]),
                                        ys in prop::collection::vec(-1.0..1.0f64, 1..40)) {
            let mut learner = Quadratized::new(1, 1.0).unwrap();
            let mut xs = vec![];
            let mut shadow = Quadratized::new(1, 1.0).unwrap();
            for (t, y) in ys.iter().enumerate() {
                let x = shadow.predict().unwrap();
                xs.push(x[0]);
                let l = LossSpec::squared_scalar(*y).with_scale(weights.weight(t + 1)).unwrap();
                shadow.observe(Feedback::Loss(&l)).unwrap();
            }
            let out = online_to_batch(&mut learner, |t| Ok(LossSpec::squared_scalar(ys[t - 1])), ys.len(), weights, None).unwrap();
            let total: f64 = out.weights.iter().sum();
            let expect: f64 = xs.iter().zip(&out.weights).map(|(x, a)| a * x).sum::<f64>() / total;
            prop_assert!(out.weights.iter().all(|a| *a > 0.0));
            prop_assert!((out.average[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}
