//! Runs an experiment config: one game per seed, in parallel across seeds.

use std::path::{Path, PathBuf};

use oco::bandit::{gaps, simulate, BanditAgent};
use oco::{evaluate, play, LossKind, LossSpec, RegretLedger};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{bound_curve, BoundCurve, BoundMeta};
use crate::build;
use crate::config::{BoundName, CheckMode, CompetitorName, ExperimentConfig, LearnerName};
use crate::csv::{emit_csv, Row};
use crate::error::CliError;
use crate::seeds::split_seed;

/// Relative slack allowed when comparing regret to a bound.
pub const BOUND_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces `master_seed` from the config.
    pub master_seed: Option<u64>,
    /// Directory receiving one CSV per seed.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub index: usize,
    pub seed: u64,
    pub rows: Vec<Row>,
    /// Predictions of a full-information learner; empty for bandits.
    pub predictions: Vec<Vec<f64>>,
    pub final_regret: f64,
    pub final_bound: Option<f64>,
    /// Whether this game stayed under its bound (always true without a bound).
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub horizon: usize,
    pub check: CheckMode,
    pub seeds: Vec<SeedResult>,
    pub mean_final_regret: f64,
    pub max_final_regret: f64,
    pub mean_final_bound: Option<f64>,
    pub passed: bool,
}

pub fn within(regret: f64, bound: f64) -> bool {
    regret <= bound + BOUND_TOLERANCE * bound.abs() + 1e-12
}

/// File name of the CSV of game `index`.
pub fn csv_name(run_name: &str, index: usize) -> String {
    format!("{run_name}-seed{index}.csv")
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let master = opts.master_seed.unwrap_or(cfg.run.master_seed);
    let seeds: Vec<SeedResult> = (0..cfg.run.seeds)
        .into_par_iter()
        .map(|index| {
            let result = run_seed(cfg, index, split_seed(master, index as u64))?;
            if let Some(dir) = &opts.out_dir {
                emit_csv(&result.rows, &dir.join(csv_name(cfg.run_name(), index)))?;
            }
            Ok(result)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(summarize(cfg, seeds))
}

fn summarize(cfg: &ExperimentConfig, seeds: Vec<SeedResult>) -> RunSummary {
    let n = seeds.len() as f64;
    let mean_final_regret = seeds.iter().map(|s| s.final_regret).sum::<f64>() / n;
    let max_final_regret = seeds.iter().map(|s| s.final_regret).fold(f64::NEG_INFINITY, f64::max);
    let mean_final_bound = seeds.iter().map(|s| s.final_bound).sum::<Option<f64>>().map(|b| b / n);
    let check = check_mode(cfg);
    let passed = match (check, mean_final_bound) {
        (_, None) => true,
        (CheckMode::EverySeed, Some(_)) => seeds.iter().all(|s| s.passed),
        (CheckMode::Mean, Some(b)) => within(mean_final_regret, b),
    };
    RunSummary {
        name: cfg.run_name().to_string(),
        horizon: cfg.run.horizon,
        check,
        seeds,
        mean_final_regret,
        max_final_regret,
        mean_final_bound,
        passed,
    }
}

/// Bandit bounds hold in expectation, so they are checked on the mean by default.
pub fn check_mode(cfg: &ExperimentConfig) -> CheckMode {
    cfg.run.check.unwrap_or(if cfg.learner.name.is_bandit() { CheckMode::Mean } else { CheckMode::EverySeed })
}

/// Plays game `index` with the given seed.
pub fn run_seed(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<SeedResult, CliError> {
    if cfg.learner.name.is_bandit() {
        run_bandit(cfg, index, seed)
    } else {
        run_full_info(cfg, index, seed)
    }
}

fn assemble(
    index: usize,
    seed: u64,
    losses: Vec<f64>,
    competitor: Vec<f64>,
    bound: Option<BoundCurve>,
    predictions: Vec<Vec<f64>>,
) -> SeedResult {
    let mut rows = Vec::with_capacity(losses.len());
    let mut cum = 0.0;
    let mut passed = true;
    for (i, (loss, comp)) in losses.iter().zip(&competitor).enumerate() {
        cum += loss;
        let regret = cum - comp;
        let b = bound.as_ref().map(|c| c.values[i]);
        let is_last = i + 1 == losses.len();
        if let (Some(b), Some(curve)) = (b, &bound) {
            if (curve.anytime || is_last) && !within(regret, b) {
                passed = false;
            }
        }
        rows.push(Row { round: i + 1, loss: *loss, cum_loss: cum, competitor_cum_loss: *comp, regret, bound: b });
    }
    let final_regret = rows.last().map(|r| r.regret).unwrap_or(0.0);
    let final_bound = rows.last().and_then(|r| r.bound);
    SeedResult { index, seed, rows, predictions, final_regret, final_bound, passed }
}

fn run_bandit(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<SeedResult, CliError> {
    let horizon = cfg.run.horizon;
    let arms = build::arms(&cfg.environment)?;
    let mut agent = build::bandit_agent(&cfg.learner, &cfg.environment, horizon)?;
    let competitor = cfg.run.competitor.unwrap_or(CompetitorName::BestArm);
    if competitor != CompetitorName::BestArm {
        return Err(CliError::config("bandit runs are measured against the best arm"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = simulate(&mut agent, &arms, horizon, &mut rng)?;
    let best = arms.iter().map(|a| a.mean()).fold(f64::INFINITY, f64::min);
    // the loss column is the mean of the arm played, so regret is the pseudo-regret
    let mut prev = 0.0;
    let losses: Vec<f64> = run
        .pseudo_regret
        .iter()
        .map(|p| {
            let l = p - prev + best;
            prev = *p;
            l
        })
        .collect();
    let comp: Vec<f64> = (1..=horizon).map(|t| t as f64 * best).collect();
    let alpha = match (&agent, cfg.learner.name) {
        (BanditAgent::Stochastic(_), LearnerName::Ucb) => Some(cfg.learner.alpha.unwrap_or(3.0)),
        _ => None,
    };
    let meta = BoundMeta {
        horizon,
        dim: arms.len(),
        linf: build::env_linf(&cfg.environment),
        gaps: Some(gaps(&arms)),
        alpha,
        coef: cfg.run.bound_coef,
        ..Default::default()
    };
    let bound = bound_curve(cfg.run.bound.unwrap_or(BoundName::None), &meta)?;
    Ok(assemble(index, seed, losses, comp, bound, Vec::new()))
}

fn run_full_info(cfg: &ExperimentConfig, index: usize, seed: u64) -> Result<SeedResult, CliError> {
    let horizon = cfg.run.horizon;
    let dim = build::game_dim(cfg)?;
    let losses = build::loss_stream(&cfg.environment, seed, horizon)?;
    let mut learner = build::full_info_learner(&cfg.learner, dim, horizon)?;
    let ledger = play(learner.as_mut(), losses, build::feedback_mode(cfg))?;
    let competitor_name = cfg.run.competitor.unwrap_or_else(|| build::default_competitor(cfg, dim));
    let radius = build::competitor_radius(cfg, dim);
    let comp = competitor_curve(&ledger, competitor_name, cfg.run.u.as_deref(), radius, dim)?;
    let meta = bound_meta(cfg, dim, &ledger, competitor_name)?;
    let bound = bound_curve(cfg.run.bound.unwrap_or(BoundName::None), &meta)?;
    let values: Vec<f64> = ledger.records().iter().map(|r| r.loss_value).collect();
    let predictions = ledger.records().iter().map(|r| r.x.clone()).collect();
    Ok(assemble(index, seed, values, comp, bound, predictions))
}

fn bound_meta(cfg: &ExperimentConfig, dim: usize, ledger: &RegretLedger, competitor: CompetitorName) -> Result<BoundMeta, CliError> {
    let spec = &cfg.learner;
    let set_diameter = if spec.name.keys().contains(&"domain") || spec.name == LearnerName::Adagrad {
        Some(build::feasible_set(spec, dim)?.diameter()).filter(|d| d.is_finite())
    } else {
        None
    };
    let widths = if spec.name == LearnerName::Adagrad {
        let (lo, hi) = build::box_bounds(spec, dim)?;
        Some(lo.iter().zip(&hi).map(|(a, b)| b - a).collect())
    } else {
        None
    };
    Ok(BoundMeta {
        horizon: cfg.run.horizon,
        dim,
        diameter: spec.diameter.or(set_diameter),
        lipschitz: spec.lipschitz.or(cfg.environment.lipschitz).or(build::env_linf(&cfg.environment)),
        widths,
        coef: cfg.run.bound_coef,
        linf: build::env_linf(&cfg.environment),
        kl: (competitor == CompetitorName::BestVertex).then(|| (dim as f64).ln()),
        gaps: None,
        alpha: spec.alpha,
        gradients: ledger.records().iter().map(|r| r.g.clone()).collect(),
    })
}

/// Points of the competitor grid: 2001 points of `[-r, r]`, or the origin plus a 40 x 72 polar grid of the disk.
pub fn grid_points(dim: usize, radius: f64) -> Result<Vec<Vec<f64>>, CliError> {
    match dim {
        1 => Ok((0..=2000).map(|i| vec![radius * (i as f64 / 1000.0 - 1.0)]).collect()),
        2 => {
            let mut pts = vec![vec![0.0, 0.0]];
            for i in 1..=40 {
                for j in 0..72 {
                    let (r, a) = (radius * i as f64 / 40.0, (j as f64 * 5.0).to_radians());
                    pts.push(vec![r * a.cos(), r * a.sin()]);
                }
            }
            Ok(pts)
        }
        _ => Err(CliError::config("best-on-grid supports one or two dimensions")),
    }
}

/// Running minimum over `candidates` of their cumulative loss.
fn best_of(losses: &[LossSpec], candidates: &[Vec<f64>]) -> Result<Vec<f64>, CliError> {
    let mut cum = vec![0.0; candidates.len()];
    let mut out = Vec::with_capacity(losses.len());
    for loss in losses {
        for (c, u) in cum.iter_mut().zip(candidates) {
            *c += evaluate(loss, u)?;
        }
        out.push(cum.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(out)
}

/// Cumulative loss of the competitor after each round.
pub fn competitor_curve(
    ledger: &RegretLedger,
    name: CompetitorName,
    u: Option<&[f64]>,
    radius: f64,
    dim: usize,
) -> Result<Vec<f64>, CliError> {
    let losses = ledger.losses();
    match name {
        CompetitorName::None => Ok(vec![0.0; losses.len()]),
        CompetitorName::Fixed => {
            let u = u.ok_or_else(|| CliError::config("fixed competitor needs `u`"))?;
            if u.len() != dim {
                return Err(CliError::config(format!("`u` needs {dim} entries")));
            }
            best_of(losses, &[u.to_vec()])
        }
        CompetitorName::BestOnGrid => best_of(losses, &grid_points(dim, radius)?),
        CompetitorName::BestVertex => {
            let vertices: Vec<Vec<f64>> = (0..dim)
                .map(|i| {
                    let mut e = vec![0.0; dim];
                    e[i] = 1.0;
                    e
                })
                .collect();
            best_of(losses, &vertices)
        }
        CompetitorName::BestInBall => {
            // min over ||u|| <= r of <G, u> is -r ||G||
            let mut sum = vec![0.0; dim];
            losses
                .iter()
                .map(|loss| match &loss.kind {
                    LossKind::Linear { g } => {
                        for (s, v) in sum.iter_mut().zip(g) {
                            *s += loss.scale * v;
                        }
                        Ok(-radius * sum.iter().map(|v| v * v).sum::<f64>().sqrt())
                    }
                    _ => Err(CliError::config("best-in-ball needs linear losses")),
                })
                .collect()
        }
        CompetitorName::BestMean => {
            // sum_s w_s ||u - y_s||^2 is minimized at the weighted mean
            let (mut w, mut sq) = (0.0, 0.0);
            let mut wy = vec![0.0; dim];
            losses
                .iter()
                .map(|loss| match &loss.kind {
                    LossKind::SquaredDistance { y } => {
                        w += loss.scale;
                        sq += loss.scale * y.iter().map(|v| v * v).sum::<f64>();
                        for (a, v) in wy.iter_mut().zip(y) {
                            *a += loss.scale * v;
                        }
                        Ok((sq - wy.iter().map(|v| v * v).sum::<f64>() / w).max(0.0))
                    }
                    _ => Err(CliError::config("best-mean needs squared-distance losses")),
                })
                .collect()
        }
        CompetitorName::BestArm => Err(CliError::config("best-arm needs a bandit learner")),
    }
}

/// Writes the CSVs of a finished run into `dir`.
pub fn write_csvs(summary: &RunSummary, dir: &Path) -> Result<(), CliError> {
    for s in &summary.seeds {
        emit_csv(&s.rows, &dir.join(csv_name(&summary.name, s.index)))?;
    }
    Ok(())
}
