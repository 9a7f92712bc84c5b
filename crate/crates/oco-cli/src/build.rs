//! Turns config sections into learners, environments and bound metadata.

use oco::bandit::{etc_tuned_m, gaps, AdversarialAlgo, AdversarialBandit, ArmModel, BanditAgent, StochasticBandit, StochasticPolicy};
use oco::environments::{EnvKind, Environment, LinearNoise};
use oco::first_order::{AdaGrad, MuSchedule, Osd, StepsizePolicy};
use oco::ftrl::{AdaHedge, EntropicFtrl, FollowTheLeader, FtrlLin, Quadratized, RegSchedule};
use oco::mirror_descent::{ExponentiatedGradient, PNormDescent};
use oco::parameter_free::{BettingExperts, BettorKind, CoinBettingOlo, CoordinateKt, DirectionMagnitude, DirectionStepsize};
use oco::second_order::OnlineNewtonStep;
use oco::{project, FeasibleSet, FeedbackMode, Learner, LossKind, LossSpec};

use crate::config::{
    BettorName, CompetitorName, DomainName, EnvName, EnvSpec, ExperimentConfig, FeedbackName, FixedLossName, LearnerName, LearnerSpec,
    NoiseName, StepsizeName,
};
use crate::error::CliError;

fn missing(section: &str, key: &str, what: &str) -> CliError {
    CliError::config(format!("[{section}] `{key}` is required for {what}"))
}

/// Loss model of the environment, for the stochastic-arms environment.
pub fn arms(spec: &EnvSpec) -> Result<Vec<ArmModel>, CliError> {
    let arms = match (&spec.bernoulli, &spec.gaussian) {
        (Some(ps), None) => ps.iter().map(|p| ArmModel::bernoulli(*p)).collect::<oco::Result<Vec<_>>>()?,
        (None, Some(ms)) => ms.iter().map(|m| ArmModel::gaussian(*m)).collect::<oco::Result<Vec<_>>>()?,
        _ => return Err(CliError::config("stochastic-arms needs exactly one of `bernoulli` and `gaussian`")),
    };
    if arms.len() < 2 {
        return Err(CliError::config("stochastic-arms needs at least two arms"));
    }
    Ok(arms)
}

pub fn env_kind(spec: &EnvSpec) -> Result<EnvKind, CliError> {
    let kind = match spec.name {
        EnvName::GuessingGame => EnvKind::GuessingGame { ys: spec.ys.clone() },
        EnvName::FtlFailure => EnvKind::FtlFailure,
        EnvName::Rademacher => EnvKind::RademacherOlo {
            lipschitz: spec.lipschitz.unwrap_or(1.0),
            diameter: spec.diameter.unwrap_or(2.0),
            z: spec.z.clone().unwrap_or_else(|| vec![1.0]),
        },
        EnvName::IidLinear => {
            let mean = spec.mean.clone().ok_or_else(|| missing("environment", "mean", "iid-linear"))?;
            let scale = spec.noise_scale.unwrap_or(0.0);
            let noise = match spec.noise.unwrap_or(NoiseName::Uniform) {
                NoiseName::Uniform => LinearNoise::Uniform { half_width: scale },
                NoiseName::Rademacher => LinearNoise::Rademacher { scale },
                NoiseName::Gaussian => LinearNoise::Gaussian { sd: scale },
            };
            EnvKind::IidLinear { mean, noise }
        }
        EnvName::StochasticArms => EnvKind::StochasticArms { arms: arms(spec)? },
        EnvName::FixedConvex => {
            let target = spec.target.clone().ok_or_else(|| missing("environment", "target", "fixed-convex"))?;
            let loss = match spec.loss.unwrap_or(FixedLossName::Absolute) {
                FixedLossName::Absolute => match target.as_slice() {
                    [y] => LossSpec::absolute(*y),
                    _ => return Err(CliError::config("absolute loss needs a one-element `target`")),
                },
                FixedLossName::Squared => LossSpec::squared_distance(target),
                FixedLossName::Linear => LossSpec::linear(target),
            };
            EnvKind::FixedConvex { loss }
        }
        EnvName::Switching => EnvKind::Switching {
            dim: spec.dim.ok_or_else(|| missing("environment", "dim", "switching"))?,
            linf: spec.linf.unwrap_or(1.0),
            block: spec.block.unwrap_or(100),
        },
    };
    kind.validate()?;
    Ok(kind)
}

/// The first `horizon` losses of the environment under `seed`.
///
/// A nonnegative switching stream maps each coordinate `g` to `(g + linf) / 2`, which lands in `[0, linf]`.
pub fn loss_stream(spec: &EnvSpec, seed: u64, horizon: usize) -> Result<Vec<LossSpec>, CliError> {
    let kind = env_kind(spec)?;
    let mut losses = Environment::new(kind, seed)?.take(horizon)?;
    if spec.name == EnvName::Switching && spec.nonnegative == Some(true) {
        let linf = spec.linf.unwrap_or(1.0);
        for loss in losses.iter_mut() {
            if let LossKind::Linear { g } = &mut loss.kind {
                g.iter_mut().for_each(|v| *v = 0.5 * (*v + linf));
            }
        }
    }
    Ok(losses)
}

pub fn env_dim(spec: &EnvSpec) -> Result<usize, CliError> {
    Ok(env_kind(spec)?.dim())
}

/// Loss bound of the environment: `linf` for switching streams, 1 for Bernoulli arms.
pub fn env_linf(spec: &EnvSpec) -> Option<f64> {
    match spec.name {
        EnvName::Switching => Some(spec.linf.unwrap_or(1.0)),
        EnvName::StochasticArms if spec.bernoulli.is_some() => Some(1.0),
        EnvName::FtlFailure => Some(1.0),
        _ => None,
    }
}

/// The learner's feasible set; the default is the unit ball, or the box when `lo`/`hi` are given.
pub fn feasible_set(spec: &LearnerSpec, dim: usize) -> Result<FeasibleSet, CliError> {
    let domain = spec.domain.unwrap_or(if spec.lo.is_some() || spec.hi.is_some() { DomainName::Box } else { DomainName::Ball });
    let set = match domain {
        DomainName::All => FeasibleSet::All,
        DomainName::Ball => FeasibleSet::ball(spec.radius.unwrap_or(1.0))?,
        DomainName::Box => {
            let (lo, hi) = box_bounds(spec, dim)?;
            FeasibleSet::boxed(lo, hi)?
        }
        DomainName::Simplex => FeasibleSet::simplex(dim)?,
    };
    Ok(set)
}

/// `lo`/`hi` of a box learner; each defaults to `-1`/`1` per coordinate.
pub fn box_bounds(spec: &LearnerSpec, dim: usize) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let lo = spec.lo.clone().unwrap_or_else(|| vec![-1.0; dim]);
    let hi = spec.hi.clone().unwrap_or_else(|| vec![1.0; dim]);
    if lo.len() != dim || hi.len() != dim {
        return Err(CliError::config(format!("`lo` and `hi` need {dim} entries")));
    }
    Ok((lo, hi))
}

fn start_point(spec: &LearnerSpec, set: &FeasibleSet, dim: usize) -> Result<Vec<f64>, CliError> {
    match &spec.x1 {
        Some(x1) if x1.len() != dim => Err(CliError::config(format!("`x1` needs {dim} entries"))),
        Some(x1) => Ok(x1.clone()),
        None => Ok(project(set, &vec![0.0; dim])?),
    }
}

fn finite_diameter(spec: &LearnerSpec, set: &FeasibleSet) -> Result<f64, CliError> {
    let d = spec.diameter.unwrap_or_else(|| set.diameter());
    if d.is_finite() {
        Ok(d)
    } else {
        Err(CliError::config("an unbounded domain needs an explicit `diameter`"))
    }
}

/// Dimension of the game: the environment's, which an explicit learner `dim` must match.
pub fn game_dim(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    let dim = env_dim(&cfg.environment)?;
    match cfg.learner.dim {
        Some(d) if d != dim => Err(CliError::config(format!("learner dim {d} does not match the environment's {dim}"))),
        _ => Ok(dim),
    }
}

pub fn feedback_mode(cfg: &ExperimentConfig) -> FeedbackMode {
    match cfg.run.feedback {
        Some(FeedbackName::FullLoss) => FeedbackMode::FullLoss,
        Some(FeedbackName::Gradient) => FeedbackMode::Gradient,
        None => match cfg.learner.name {
            LearnerName::Ftl | LearnerName::Quadratized => FeedbackMode::FullLoss,
            _ => FeedbackMode::Gradient,
        },
    }
}

pub fn full_info_learner(spec: &LearnerSpec, dim: usize, horizon: usize) -> Result<Box<dyn Learner>, CliError> {
    let learner: Box<dyn Learner> = match spec.name {
        LearnerName::Osd => {
            let set = feasible_set(spec, dim)?;
            let policy = match spec.stepsize.unwrap_or(StepsizeName::Decaying) {
                StepsizeName::Constant => StepsizePolicy::Constant { eta: spec.eta.ok_or_else(|| missing("learner", "eta", "a constant stepsize"))? },
                StepsizeName::Decaying => StepsizePolicy::Decaying { diameter: finite_diameter(spec, &set)?, lipschitz: spec.lipschitz.unwrap_or(1.0) },
                StepsizeName::Adaptive => StepsizePolicy::AdaptiveGlobal { diameter: finite_diameter(spec, &set)? },
                StepsizeName::StronglyConvex => {
                    StepsizePolicy::StronglyConvex(MuSchedule::Constant(spec.mu.ok_or_else(|| missing("learner", "mu", "a strongly convex stepsize"))?))
                }
            };
            let x1 = start_point(spec, &set, dim)?;
            Box::new(Osd::new(set, policy, x1)?)
        }
        LearnerName::Adagrad => {
            let (lo, hi) = box_bounds(spec, dim)?;
            let set = FeasibleSet::boxed(lo.clone(), hi.clone())?;
            let x1 = start_point(spec, &set, dim)?;
            Box::new(AdaGrad::new(lo, hi, x1)?)
        }
        LearnerName::Eg => Box::new(ExponentiatedGradient::new(dim, spec.eta.unwrap_or_else(|| ExponentiatedGradient::tuned_eta(dim, horizon)))?),
        LearnerName::Pnorm => {
            let eta = spec.eta.ok_or_else(|| missing("learner", "eta", "pnorm"))?;
            let x1 = start_point(spec, &FeasibleSet::All, dim)?;
            Box::new(PNormDescent::new(x1, spec.p.unwrap_or(2.0), eta)?)
        }
        LearnerName::Ftrl => {
            let schedule = match spec.lambda {
                Some(lambda) => RegSchedule::Constant { lambda },
                None => RegSchedule::Sqrt { c: spec.c.unwrap_or(1.0) },
            };
            Box::new(FtrlLin::new(dim, feasible_set(spec, dim)?, schedule)?)
        }
        LearnerName::EntropicFtrl => Box::new(EntropicFtrl::new(dim, spec.alpha.unwrap_or(1.0), spec.lipschitz.unwrap_or(1.0))?),
        LearnerName::Adahedge => match spec.alpha {
            Some(alpha) => Box::new(AdaHedge::new(dim, alpha)?),
            None => Box::new(AdaHedge::with_default_alpha(dim)?),
        },
        LearnerName::Ftl => Box::new(FollowTheLeader::new(dim, feasible_set(spec, dim)?)?),
        LearnerName::Quadratized => Box::new(Quadratized::new(dim, spec.mu.unwrap_or(1.0))?),
        LearnerName::Ons => {
            let mu = spec.mu.ok_or_else(|| missing("learner", "mu", "ons"))?;
            Box::new(OnlineNewtonStep::new(dim, spec.lambda.unwrap_or(1.0), mu, feasible_set(spec, dim)?)?)
        }
        LearnerName::Kt => {
            if dim != 1 {
                return Err(CliError::config("kt is one-dimensional; use coordinate-kt"));
            }
            Box::new(CoinBettingOlo::kt(spec.eps.unwrap_or(1.0))?)
        }
        LearnerName::CoordinateKt => match spec.eps {
            Some(eps) => Box::new(CoordinateKt::new(dim, eps)?),
            None => Box::new(CoordinateKt::with_default_eps(dim)?),
        },
        LearnerName::DirMag => {
            let stepsize = match spec.stepsize.unwrap_or(StepsizeName::Decaying) {
                StepsizeName::Decaying => DirectionStepsize::Decaying,
                StepsizeName::Adaptive => DirectionStepsize::AdaptiveGlobal,
                other => return Err(CliError::config(format!("dir-mag supports decaying or adaptive stepsizes, not {other:?}"))),
            };
            Box::new(DirectionMagnitude::new(dim, spec.eps.unwrap_or(1.0), stepsize)?)
        }
        LearnerName::BettingExperts => {
            let kind = match spec.bettor.unwrap_or(BettorName::Kt) {
                BettorName::Kt => BettorKind::Kt,
                BettorName::Shifted => BettorKind::Shifted { horizon },
            };
            Box::new(BettingExperts::uniform(dim, kind)?)
        }
        name => return Err(CliError::config(format!("{name:?} is a bandit learner"))),
    };
    Ok(learner)
}

/// Smallest positive gap, the quantity the explore-then-commit tuning needs.
fn min_gap(arms: &[ArmModel]) -> Option<f64> {
    gaps(arms).into_iter().filter(|g| *g > 0.0).min_by(f64::total_cmp)
}

pub fn bandit_agent(spec: &LearnerSpec, env: &EnvSpec, horizon: usize) -> Result<BanditAgent, CliError> {
    let arms = arms(env)?;
    let dim = arms.len();
    if let Some(d) = spec.dim.filter(|d| *d != dim) {
        return Err(CliError::config(format!("learner dim {d} does not match the {dim} arms")));
    }
    let adversarial = |algo| -> Result<BanditAgent, CliError> {
        let linf = env_linf(env).ok_or_else(|| CliError::config("adversarial bandits need bounded (Bernoulli) arms"))?;
        Ok(BanditAgent::Adversarial(AdversarialBandit::new(dim, algo, linf)?))
    };
    match spec.name {
        LearnerName::Exp3 => adversarial(match spec.eta {
            Some(eta) => AdversarialAlgo::Exp3 { eta },
            None => AdversarialAlgo::exp3_tuned(dim, horizon, 1.0),
        }),
        LearnerName::ExploreMix => {
            let (d, t) = (dim as f64, horizon as f64);
            let eta = spec.eta.unwrap_or_else(|| (d.ln() / (d * t)).sqrt());
            adversarial(AdversarialAlgo::ExploreMix { eta, alpha: spec.alpha.ok_or_else(|| missing("learner", "alpha", "explore-mix"))? })
        }
        LearnerName::Tsallis => adversarial(match spec.eta {
            Some(eta) => AdversarialAlgo::Tsallis { eta },
            None => AdversarialAlgo::tsallis_default(horizon, 1.0),
        }),
        LearnerName::Etc => {
            let m = match spec.m {
                Some(m) => m,
                None if dim == 2 => etc_tuned_m(horizon, min_gap(&arms).ok_or_else(|| CliError::config("etc tuning needs a positive gap"))?),
                None => return Err(missing("learner", "m", "etc with more than two arms")),
            };
            Ok(BanditAgent::Stochastic(StochasticBandit::new(dim, StochasticPolicy::ExploreThenCommit { m }, horizon)?))
        }
        LearnerName::Ucb => {
            let policy = StochasticPolicy::Ucb { alpha: spec.alpha.unwrap_or(3.0) };
            Ok(BanditAgent::Stochastic(StochasticBandit::new(dim, policy, horizon)?))
        }
        name => Err(CliError::config(format!("{name:?} is not a bandit learner"))),
    }
}

/// Competitor used when `[run]` names none.
pub fn default_competitor(cfg: &ExperimentConfig, dim: usize) -> CompetitorName {
    let name = cfg.learner.name;
    if name.is_bandit() {
        CompetitorName::BestArm
    } else if cfg.environment.name == EnvName::GuessingGame {
        CompetitorName::BestMean
    } else if name.is_simplex() {
        CompetitorName::BestVertex
    } else if dim <= 2 {
        CompetitorName::BestOnGrid
    } else {
        CompetitorName::None
    }
}

/// Radius of the competitor grid or ball: `grid_radius`, else the learner's ball radius or box extent, else 1.
pub fn competitor_radius(cfg: &ExperimentConfig, dim: usize) -> f64 {
    if let Some(r) = cfg.run.grid_radius {
        return r;
    }
    let spec = &cfg.learner;
    match feasible_set(spec, dim) {
        Ok(FeasibleSet::L2Ball { radius }) if spec.name.keys().contains(&"domain") => radius,
        Ok(FeasibleSet::Box { lo, hi }) if spec.name.keys().contains(&"lo") => {
            lo.iter().chain(&hi).fold(0.0f64, |m, v| m.max(v.abs()))
        }
        _ => 1.0,
    }
}
