//! The acceptance suite: eighteen named presets, each reporting pass or fail.
//!
//! Presets that run experiment configs keep artifacts: the CSV of the first game and a
//! summary with one line per game, including a digest of that game's CSV. The determinism
//! preset re-runs those presets on a single thread and compares the artifacts byte for byte.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use oco::bandit::{iw_estimate, tsallis_update, TSALLIS_TOLERANCE};
use oco::classification::{perceptron_bound_search, Perceptron};
use oco::first_order::AdaGrad;
use oco::ftrl::{AdaHedge, FtrlLin, RegSchedule};
use oco::geometry::{lambert_w, LAMBERT_LOWER};
use oco::parameter_free::{calibrate_kt_constant, Bettor};
use oco::second_order::{logistic_exp_concavity, ons_mu, ridge_solution, OnlineNewtonStep, Vaw};
use oco::{play, project, regret, FeasibleSet, FeedbackMode, LossSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::csv::{format_csv, format_number, write_text};
use crate::error::CliError;
use crate::runner::{run_experiment, RunOptions, RunSummary};
use crate::seeds::split_seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub slug: &'static str,
    pub passed: bool,
    pub detail: String,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!("[{}] {:02} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.slug, self.detail)
    }
}

/// Shared state of one suite run.
#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub master_seed: u64,
}

impl Ctx {
    /// Master seed of preset `id`.
    pub fn seed(&self, id: usize) -> u64 {
        split_seed(self.master_seed, id as u64)
    }

    pub fn rng(&self, id: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(id))
    }
}

type Check = fn(&Ctx) -> Result<(bool, String, Vec<Artifact>), CliError>;

pub struct Criterion {
    pub id: usize,
    pub slug: &'static str,
    pub title: &'static str,
    check: Option<Check>,
}

pub const CRITERIA: [Criterion; 18] = [
    Criterion { id: 1, slug: "ftl-guessing", title: "FTL on the guessing game stays under 4 + 4 ln T", check: Some(ftl_guessing) },
    Criterion { id: 2, slug: "ftl-failure", title: "FTL fails linearly on the alternating stream; decaying OSD does not", check: Some(ftl_failure) },
    Criterion { id: 3, slug: "osd-adaptive", title: "adaptive OSD meets its gradient-norm bound", check: Some(osd_adaptive) },
    Criterion { id: 4, slug: "adagrad-scale-free", title: "AdaGrad iterates are unchanged by per-coordinate scaling", check: Some(adagrad_scale_free) },
    Criterion { id: 5, slug: "eg-tuned", title: "EG with tuned stepsize meets (sqrt2/2) sqrt(T ln d)", check: Some(eg_tuned) },
    Criterion { id: 6, slug: "adahedge", title: "AdaHedge is scale-free and meets its bound", check: Some(adahedge) },
    Criterion { id: 7, slug: "ftrl-equality", title: "FTRL regret equality holds numerically", check: Some(ftrl_equality) },
    Criterion { id: 8, slug: "vaw", title: "VAW meets its log bound against the ridge solution", check: Some(vaw) },
    Criterion { id: 9, slug: "ons-logistic", title: "ONS regret grows logarithmically; one step matches a brute-force oracle", check: Some(ons_logistic) },
    Criterion { id: 10, slug: "kt-wealth", title: "KT wealth lower bound with the calibrated constant", check: Some(kt_wealth) },
    Criterion { id: 11, slug: "shifted-bettor", title: "shifted bettor wealth lower bound", check: Some(shifted_bettor) },
    Criterion { id: 12, slug: "betting-experts", title: "betting experts with shifted bettors meet the KL bound", check: Some(betting_experts) },
    Criterion { id: 13, slug: "perceptron", title: "Perceptron mistake bound and learning-rate invariance", check: Some(perceptron) },
    Criterion { id: 14, slug: "exp3", title: "Exp3 mean pseudo-regret under sqrt2 sqrt(d T ln d)", check: Some(exp3) },
    Criterion { id: 15, slug: "tsallis", title: "Tsallis normalization residual and mean pseudo-regret under 4 sqrt(d T)", check: Some(tsallis) },
    Criterion { id: 16, slug: "ucb-etc", title: "UCB and tuned ETC mean pseudo-regret under their bounds", check: Some(ucb_etc) },
    Criterion { id: 17, slug: "lambert", title: "Lambert W residual and sandwich", check: Some(lambert) },
    Criterion { id: 18, slug: "determinism", title: "artifacts are byte-identical across runs and thread counts", check: None },
];

/// Criteria whose presets produce CSV artifacts.
pub const ARTIFACT_CRITERIA: [usize; 9] = [1, 2, 3, 5, 6, 12, 14, 15, 16];

/// Criterion ids selected by a suite name: `all`, a number, or a slug.
pub fn select(suite: &str) -> Result<Vec<usize>, CliError> {
    if suite == "all" {
        return Ok((1..=CRITERIA.len()).collect());
    }
    if let Ok(id) = suite.parse::<usize>() {
        if (1..=CRITERIA.len()).contains(&id) {
            return Ok(vec![id]);
        }
    }
    CRITERIA
        .iter()
        .find(|c| c.slug == suite)
        .map(|c| vec![c.id])
        .ok_or_else(|| CliError::config(format!("unknown acceptance suite `{suite}`")))
}

fn criterion(id: usize) -> &'static Criterion {
    &CRITERIA[id - 1]
}

/// Runs one non-determinism criterion; errors are reported as failures.
pub fn run_criterion(id: usize, ctx: &Ctx) -> Outcome {
    let c = criterion(id);
    let check = c.check.expect("determinism is run by run_suite");
    let (passed, detail, artifacts) = match check(ctx) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}"), Vec::new()),
    };
    Outcome { id, slug: c.slug, passed, detail, artifacts }
}

/// Runs the selected criteria in order, printing each line through `report` as it finishes.
pub fn run_suite(ids: &[usize], ctx: &Ctx, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let mut outcomes: Vec<Outcome> = Vec::new();
    for &id in ids {
        let outcome = if id == 18 { determinism(ctx, &outcomes) } else { run_criterion(id, ctx) };
        report(&outcome);
        outcomes.push(outcome);
    }
    outcomes
}

pub fn write_artifacts(outcomes: &[Outcome], dir: &Path) -> Result<(), CliError> {
    for a in outcomes.iter().flat_map(|o| &o.artifacts) {
        write_text(&dir.join(&a.file), &a.contents)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Config presets
// ---------------------------------------------------------------------------

/// Named experiment configs used by the presets, as TOML text.
pub fn preset_configs(id: usize) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut add = |name: String, learner: &str, env: &str, run: &str| {
        let text = format!("[learner]\n{learner}\n\n[environment]\n{env}\n\n[run]\nname = \"{name}\"\n{run}\n");
        out.push((name, text));
    };
    match id {
        1 => add(
            "c01-ftl-guessing".into(),
            "name = \"ftl\"\nlo = [-1.0]\nhi = [1.0]",
            "name = \"guessing-game\"",
            "horizon = 1000\nseeds = 100\ncompetitor = \"best-mean\"\nbound = \"ftl-guessing\"",
        ),
        2 => {
            add(
                "c02-ftl-failure".into(),
                "name = \"ftl\"\nlo = [-1.0]\nhi = [1.0]",
                "name = \"ftl-failure\"",
                "horizon = 1000\ncompetitor = \"fixed\"\nu = [0.0]",
            );
            add(
                "c02-osd-decaying".into(),
                "name = \"osd\"\nlo = [-1.0]\nhi = [1.0]\nstepsize = \"decaying\"\ndiameter = 2.0\nlipschitz = 1.0",
                "name = \"ftl-failure\"",
                "horizon = 1000\ncompetitor = \"best-on-grid\"\nbound = \"sqrt-t\"\nbound_coef = 3.0",
            );
        }
        3 => add(
            "c03-osd-adaptive".into(),
            "name = \"osd\"\ndomain = \"ball\"\nradius = 1.0\nstepsize = \"adaptive\"",
            "name = \"iid-linear\"\nmean = [0.0, 0.0, 0.0, 0.0, 0.0]\nnoise = \"uniform\"\nnoise_scale = 1.0",
            "horizon = 2000\nseeds = 50\ncompetitor = \"best-in-ball\"\nbound = \"adaptive-global\"",
        ),
        5 => {
            for d in [2, 10, 100] {
                add(
                    format!("c05-eg-switching-d{d}"),
                    "name = \"eg\"",
                    &format!("name = \"switching\"\ndim = {d}\nlinf = 1.0\nblock = 100"),
                    "horizon = 2000\nseeds = 10\ncompetitor = \"best-vertex\"\nbound = \"eg\"",
                );
                let ps: Vec<String> = (0..d).map(|i| if i == 0 { "0.4".into() } else { "0.5".into() }).collect();
                add(
                    format!("c05-eg-bernoulli-d{d}"),
                    "name = \"eg\"",
                    &format!("name = \"stochastic-arms\"\nbernoulli = [{}]", ps.join(", ")),
                    "horizon = 2000\nseeds = 10\ncompetitor = \"best-vertex\"\nbound = \"eg\"",
                );
            }
        }
        6 => {
            for (d, block) in [(2, 1), (10, 50), (100, 200)] {
                add(
                    format!("c06-adahedge-d{d}"),
                    "name = \"adahedge\"",
                    &format!("name = \"switching\"\ndim = {d}\nlinf = 1.0\nblock = {block}"),
                    "horizon = 2000\nseeds = 10\ncompetitor = \"best-vertex\"\nbound = \"adahedge\"",
                );
            }
        }
        12 => {
            for d in [2, 10] {
                add(
                    format!("c12-betting-experts-fair-d{d}"),
                    "name = \"betting-experts\"\nbettor = \"shifted\"",
                    &format!("name = \"stochastic-arms\"\nbernoulli = [{}]", vec!["0.5"; d].join(", ")),
                    "horizon = 4096\nseeds = 20\ncompetitor = \"best-vertex\"\nbound = \"experts\"",
                );
            }
            add(
                "c12-betting-experts-switching-d10".into(),
                "name = \"betting-experts\"\nbettor = \"shifted\"",
                "name = \"switching\"\ndim = 10\nlinf = 1.0\nblock = 256\nnonnegative = true",
                "horizon = 4096\nseeds = 20\ncompetitor = \"best-vertex\"\nbound = \"experts\"",
            );
        }
        14 | 15 => {
            let learner = if id == 14 { "exp3" } else { "tsallis" };
            add(
                format!("c{id}-{learner}"),
                &format!("name = \"{learner}\""),
                "name = \"stochastic-arms\"\nbernoulli = [0.3, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]",
                &format!("horizon = 10000\nseeds = 100\nbound = \"{learner}\""),
            );
        }
        16 => {
            add(
                "c16-ucb".into(),
                "name = \"ucb\"\nalpha = 3.0",
                "name = \"stochastic-arms\"\ngaussian = [0.0, 0.2, 0.5]",
                "horizon = 10000\nseeds = 100\nbound = \"ucb\"",
            );
            add(
                "c16-etc".into(),
                "name = \"etc\"",
                "name = \"stochastic-arms\"\ngaussian = [0.0, 0.2]",
                "horizon = 10000\nseeds = 100\nbound = \"etc\"",
            );
        }
        _ => {}
    }
    out
}

fn digest(text: &str) -> u64 {
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    h.finish()
}

/// First game's CSV plus a per-game summary with CSV digests.
fn artifacts_of(summary: &RunSummary) -> Vec<Artifact> {
    let mut lines = String::from("index,seed,final_regret,final_bound,passed,csv_digest\n");
    for s in &summary.seeds {
        let bound = s.final_bound.map(format_number).unwrap_or_default();
        lines.push_str(&format!(
            "{},{},{},{},{},{:016x}\n",
            s.index,
            s.seed,
            format_number(s.final_regret),
            bound,
            s.passed,
            digest(&format_csv(&s.rows))
        ));
    }
    let mut out = vec![Artifact { file: format!("{}-summary.csv", summary.name), contents: lines }];
    if let Some(first) = summary.seeds.first() {
        out.push(Artifact { file: format!("{}-seed0.csv", summary.name), contents: format_csv(&first.rows) });
    }
    out
}

/// Runs every config of preset `id`.
fn run_presets(id: usize, ctx: &Ctx) -> Result<Vec<RunSummary>, CliError> {
    preset_configs(id)
        .iter()
        .enumerate()
        .map(|(k, (_, text))| {
            let cfg = ExperimentConfig::parse(text)?;
            let opts = RunOptions { master_seed: Some(split_seed(ctx.seed(id), k as u64)), out_dir: None };
            run_experiment(&cfg, &opts)
        })
        .collect()
}

fn describe(s: &RunSummary) -> String {
    match s.mean_final_bound {
        Some(b) => format!("{} mean {:.4} max {:.4} bound {:.4}", s.name, s.mean_final_regret, s.max_final_regret, b),
        None => format!("{} mean {:.4} max {:.4}", s.name, s.mean_final_regret, s.max_final_regret),
    }
}

/// Passes when every config of the preset passes its bound check.
fn bound_presets(id: usize, ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let runs = run_presets(id, ctx)?;
    let passed = runs.iter().all(|r| r.passed);
    let detail = runs.iter().map(describe).collect::<Vec<_>>().join("; ");
    Ok((passed, detail, runs.iter().flat_map(artifacts_of).collect()))
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn ftl_guessing(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    bound_presets(1, ctx)
}

fn ftl_failure(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let runs = run_presets(2, ctx)?;
    let (ftl, osd) = (&runs[0], &runs[1]);
    let t = ftl.horizon as f64;
    let ftl_ok = ftl.seeds.iter().all(|s| s.final_regret >= t - 2.0);
    let detail = format!("FTL regret {:.1} (needs >= {:.0}); {}", ftl.mean_final_regret, t - 2.0, describe(osd));
    Ok((ftl_ok && osd.passed, detail, runs.iter().flat_map(artifacts_of).collect()))
}

fn osd_adaptive(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    bound_presets(3, ctx)
}

/// Integer gradient rows, so that scaling by 100 and 0.01 is exact in floating point.
fn integer_rows(rng: &mut ChaCha8Rng, len: usize, dim: usize, span: i32) -> Vec<Vec<i32>> {
    (0..len).map(|_| (0..dim).map(|_| rng.random_range(-span..=span)).collect()).collect()
}

/// Base and scaled streams: `c = 100` multiplies coordinate `coord`; `c = 0.01` divides a x100 base.
fn scaled_pair(rows: &[Vec<i32>], coord: Option<usize>, up: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let f = if up { 1.0 } else { 100.0 };
    let base: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| *v as f64 * f).collect()).collect();
    let scaled = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(i, v)| {
                    let hit = coord.is_none_or(|c| c == i);
                    match (hit, up) {
                        (false, _) => *v as f64 * f,
                        (true, true) => *v as f64 * 100.0,
                        (true, false) => *v as f64,
                    }
                })
                .collect()
        })
        .collect();
    (base, scaled)
}

fn adagrad_scale_free(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let mut rng = ctx.rng(4);
    let (mut runs, mut mismatches) = (0, 0);
    for stream in 0..100 {
        let dim = 2 + stream % 3;
        let rows = integer_rows(&mut rng, 100, dim, 20);
        for up in [true, false] {
            for coord in 0..dim {
                let (base, scaled) = scaled_pair(&rows, Some(coord), up);
                let mut a = AdaGrad::new(vec![-1.0; dim], vec![1.0; dim], vec![0.0; dim])?;
                let mut b = a.clone();
                let mut same = true;
                for (g, h) in base.iter().zip(&scaled) {
                    a.step(g)?;
                    b.step(h)?;
                    same &= a.x() == b.x();
                }
                runs += 1;
                mismatches += usize::from(!same);
            }
        }
    }
    Ok((mismatches == 0, format!("{runs} scaled runs, {mismatches} with differing iterates"), Vec::new()))
}

fn eg_tuned(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let runs = run_presets(5, ctx)?;
    let mut failing = Vec::new();
    let mut derived_ok = true;
    for r in &runs {
        let d = r.name.rsplit_once("-d").and_then(|(_, d)| d.parse::<f64>().ok()).unwrap_or(2.0);
        let derived = (2.0 * r.horizon as f64 * d.ln()).sqrt();
        derived_ok &= r.seeds.iter().all(|s| s.final_regret <= derived);
        if !r.passed {
            failing.push(format!("{} max {:.2} > {:.2}", r.name, r.max_final_regret, r.mean_final_bound.unwrap_or(f64::NAN)));
        }
    }
    let passed = failing.is_empty();
    let mut detail = if passed {
        runs.iter().map(describe).collect::<Vec<_>>().join("; ")
    } else {
        format!("bound exceeded: {}", failing.join("; "))
    };
    detail.push_str(&format!(
        "; the tuned-stepsize bound sqrt(2 T ln d) {} in every run",
        if derived_ok { "holds" } else { "FAILS" }
    ));
    Ok((passed, detail, runs.iter().flat_map(artifacts_of).collect()))
}

fn adahedge(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let mut rng = ctx.rng(6);
    let mut mismatches = 0;
    for _ in 0..100 {
        let rows = integer_rows(&mut rng, 80, 3, 8);
        for up in [true, false] {
            let (base, scaled) = scaled_pair(&rows, None, up);
            let mut a = AdaHedge::with_default_alpha(3)?;
            let mut b = AdaHedge::with_default_alpha(3)?;
            let mut same = true;
            for (g, h) in base.iter().zip(&scaled) {
                a.step(g)?;
                b.step(h)?;
                same &= a.x() == b.x();
            }
            mismatches += usize::from(!same);
        }
    }
    let (bounds_ok, detail, artifacts) = bound_presets(6, ctx)?;
    let detail = format!("scale-freeness: {mismatches} of 200 runs differ; {detail}");
    Ok((mismatches == 0 && bounds_ok, detail, artifacts))
}

/// Both sides of the FTRL regret equality for linear losses and `psi_t = lambda_t / 2 ||x||^2`.
fn ftrl_sides(set: &FeasibleSet, schedule: RegSchedule, gs: &[Vec<f64>], u: &[f64]) -> Result<(f64, f64), CliError> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let d = u.len();
    let mut f = FtrlLin::new(d, set.clone(), schedule)?;
    let mut xs = vec![f.x().to_vec()];
    for g in gs {
        f.step(g)?;
        xs.push(f.x().to_vec());
    }
    let t_max = gs.len();
    let psi = |t: usize, x: &[f64]| 0.5 * schedule.lambda(t) * dot(x, x);
    let big_f = |t: usize, x: &[f64]| psi(t, x) + gs[..t - 1].iter().map(|g| dot(g, x)).sum::<f64>();
    let lhs: f64 = gs.iter().zip(&xs).map(|(g, x)| dot(g, x) - dot(g, u)).sum();
    let mut rhs = psi(t_max + 1, u) - psi(1, &project(set, &vec![0.0; d])?);
    for t in 1..=t_max {
        rhs += big_f(t, &xs[t - 1]) - big_f(t + 1, &xs[t]) + dot(&gs[t - 1], &xs[t - 1]);
    }
    rhs += big_f(t_max + 1, &xs[t_max]) - big_f(t_max + 1, u);
    Ok((lhs, rhs))
}

fn ftrl_equality(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let mut rng = ctx.rng(7);
    let mut worst = 0.0f64;
    for run in 0..20 {
        let (set, schedule) = match run % 4 {
            0 => (FeasibleSet::ball(1.0)?, RegSchedule::Sqrt { c: 1.0 }),
            1 => (FeasibleSet::boxed(vec![-1.0, -0.5], vec![1.0, 2.0])?, RegSchedule::Sqrt { c: 0.5 }),
            2 => (FeasibleSet::All, RegSchedule::Constant { lambda: 3.0 }),
            _ => (FeasibleSet::ball(2.0)?, RegSchedule::Constant { lambda: 0.7 }),
        };
        let gs: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        for i in 0..10 {
            for j in 0..10 {
                let u = [-1.0 + 2.0 * i as f64 / 9.0, -1.0 + 2.0 * j as f64 / 9.0];
                let (l, r) = ftrl_sides(&set, schedule, &gs, &u)?;
                worst = worst.max((l - r).abs() / l.abs().max(1.0));
            }
        }
    }
    Ok((worst <= 1e-6, format!("20 runs x 100 competitors, worst relative gap {worst:.2e}"), Vec::new()))
}

/// Uniform point of the `dim`-dimensional unit ball.
fn unit_ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return p;
        }
    }
}

fn vaw(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let (horizon, lambda, radius, ybound) = (10_000, 1.0, 1.0, 1.0);
    let mut worst_margin = f64::INFINITY;
    for seed in 0..20u64 {
        let dim = 1 + (seed as usize % 5);
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(ctx.seed(8), seed));
        let w = unit_ball_point(&mut rng, dim);
        let mut learner = Vaw::new(dim, lambda)?;
        let (mut zs, mut ys, mut total) = (Vec::new(), Vec::new(), 0.0);
        for _ in 0..horizon {
            let z = unit_ball_point(&mut rng, dim);
            let y = (z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5)).clamp(-ybound, ybound);
            learner.predict(&z)?;
            total += learner.observe(y)?;
            zs.push(z);
            ys.push(y);
        }
        let u = ridge_solution(&zs, &ys, lambda)?;
        let comp: f64 = zs.iter().zip(&ys).map(|(z, y)| 0.5 * (z.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() - y).powi(2)).sum();
        let d = dim as f64;
        let bound = 0.5 * lambda * u.iter().map(|v| v * v).sum::<f64>()
            + 0.5 * d * ybound * ybound * (1.0 + radius * radius * horizon as f64 / (lambda * d)).ln();
        worst_margin = worst_margin.min(bound - (total - comp));
    }
    Ok((worst_margin >= 0.0, format!("20 seeds, d = 1..5, smallest bound minus regret {worst_margin:.4}"), Vec::new()))
}

/// Logistic stream in the unit disk with labels from a fixed direction, flipped with probability 0.3.
fn logistic_stream(rng: &mut ChaCha8Rng, horizon: usize) -> Result<Vec<LossSpec>, CliError> {
    let w = [0.8, -0.6];
    (0..horizon)
        .map(|_| {
            let z = unit_ball_point(rng, 2);
            let clean = if z[0] * w[0] + z[1] * w[1] >= 0.0 { 1.0 } else { -1.0 };
            let y = if rng.random::<f64>() < 0.3 { -clean } else { clean };
            Ok(LossSpec::logistic(z, y)?)
        })
        .collect()
}

/// Minimizer of the summed logistic loss over the unit disk, by projected gradient descent.
fn logistic_competitor(losses: &[LossSpec]) -> Result<Vec<f64>, CliError> {
    let ball = FeasibleSet::ball(1.0)?;
    let step = 4.0 / losses.len() as f64;
    let mut u = vec![0.0, 0.0];
    for _ in 0..3000 {
        let mut g = [0.0, 0.0];
        for loss in losses {
            let s = oco::subgradient(loss, &u)?;
            g[0] += s[0];
            g[1] += s[1];
        }
        u = project(&ball, &[u[0] - step * g[0], u[1] - step * g[1]])?;
    }
    Ok(u)
}

/// Grid argmin of the ONS objective over the unit disk around `center`.
fn disk_argmin(ons: &OnlineNewtonStep, center: [f64; 2], half: f64, h: f64) -> [f64; 2] {
    let n = (2.0 * half / h).round() as i64;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..=n {
        for j in 0..=n {
            let p = [center[0] - half + i as f64 * h, center[1] - half + j as f64 * h];
            if p[0] * p[0] + p[1] * p[1] <= 1.0 {
                let v = ons.objective(&p);
                if v < best.0 {
                    best = (v, p);
                }
            }
        }
    }
    best.1
}

/// Brute-force agreement of ONS steps on the unit disk; returns the largest coordinate gap.
fn ons_oracle_gap(rng: &mut ChaCha8Rng) -> Result<f64, CliError> {
    let mut ons = OnlineNewtonStep::new(2, 0.5, 0.8, FeasibleSet::ball(1.0)?)?;
    let mut worst = 0.0f64;
    for _ in 0..12 {
        let g = [rng.random_range(-1.0..0.2), rng.random_range(-0.3..1.0)];
        let x = ons.x();
        ons.step(&g, &x)?;
        let coarse = disk_argmin(&ons, [0.0, 0.0], 1.0, 1e-2);
        let mut fine = disk_argmin(&ons, coarse, 0.02, 1e-4);
        // the square grid misses the circle, so the boundary is scanned by angle
        let on_circle = |a: f64| [a.cos(), a.sin()];
        let mut best_angle = 0.0f64;
        for k in 0..62_832 {
            let a = k as f64 * 1e-4;
            if ons.objective(&on_circle(a)) < ons.objective(&on_circle(best_angle)) {
                best_angle = a;
            }
        }
        for k in 0..=2000 {
            let p = on_circle(best_angle - 1e-4 + k as f64 * 1e-7);
            if ons.objective(&p) < ons.objective(&fine) {
                fine = p;
            }
        }
        let got = ons.x();
        worst = worst.max((got[0] - fine[0]).abs()).max((got[1] - fine[1]).abs());
    }
    Ok(worst)
}

fn ons_logistic(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let mu = ons_mu(logistic_exp_concavity(1.0), 1.0, 2.0);
    let horizons = [100usize, 1000, 10_000];
    let mut means = Vec::new();
    for (k, &horizon) in horizons.iter().enumerate() {
        let mut total = 0.0;
        for s in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(ctx.seed(9), 100 * k as u64 + s));
            let losses = logistic_stream(&mut rng, horizon)?;
            let u = logistic_competitor(&losses)?;
            let mut ons = OnlineNewtonStep::new(2, 1.0, mu, FeasibleSet::ball(1.0)?)?;
            let ledger = play(&mut ons, losses, FeedbackMode::Gradient)?;
            total += regret(&ledger, &u)?;
        }
        means.push(total / 10.0);
    }
    // least-squares slope of mean regret against ln T
    let xs: Vec<f64> = horizons.iter().map(|t| (*t as f64).ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, means.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&means).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let gap = ons_oracle_gap(&mut ctx.rng(109))?;
    let passed = (0.2..=5.0).contains(&slope) && gap <= 1e-3;
    let detail = format!(
        "mean regret {:.3}/{:.3}/{:.3} at T = 1e2/1e3/1e4, slope {slope:.3}; oracle gap {gap:.2e}",
        means[0], means[1], means[2]
    );
    Ok((passed, detail, Vec::new()))
}

/// `+-1` coins with a random bias per sequence.
fn biased_coins(rng: &mut ChaCha8Rng, horizon: usize) -> Vec<f64> {
    let p: f64 = rng.random();
    (0..horizon).map(|_| if rng.random::<f64>() < p { 1.0 } else { -1.0 }).collect()
}

/// Coins in `[-1, 1]`: biased signs for even sequences, clamped uniform draws around a random mean otherwise.
fn mixed_coins(rng: &mut ChaCha8Rng, horizon: usize, k: usize) -> Vec<f64> {
    if k.is_multiple_of(2) {
        return biased_coins(rng, horizon);
    }
    let m: f64 = rng.random_range(-1.0..1.0);
    (0..horizon).map(|_| (m + rng.random_range(-1.0..1.0)).clamp(-1.0, 1.0)).collect()
}

fn settle_all(bettor: &mut Bettor, coins: &[f64]) -> Result<(), CliError> {
    for c in coins {
        bettor.bet()?;
        bettor.settle(*c)?;
    }
    Ok(())
}

fn kt_wealth(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let k = calibrate_kt_constant(16);
    let mut rng = ctx.rng(10);
    let mut worst = f64::INFINITY;
    for horizon in [64usize, 256, 1024] {
        for _ in 0..1000 {
            let coins = biased_coins(&mut rng, horizon);
            let mut b = Bettor::kt(1.0)?;
            settle_all(&mut b, &coins)?;
            let t = horizon as f64;
            let s = b.coin_sum();
            worst = worst.min(b.wealth().ln() - (s * s / (4.0 * t) - 0.5 * t.ln() - k));
        }
    }
    Ok((worst >= 0.0, format!("K = {k:.6}; 3000 sequences, smallest slack {worst:.4e}"), Vec::new()))
}

fn shifted_bettor(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let mut rng = ctx.rng(11);
    let mut worst = f64::INFINITY;
    for horizon in [10usize, 100, 1000] {
        for k in 0..1000 {
            let coins = mixed_coins(&mut rng, horizon, k);
            let mut b = Bettor::shifted(horizon, 1.0)?;
            settle_all(&mut b, &coins)?;
            let s = b.coin_sum();
            let bound = 0.5 * 2f64.sqrt() * (s * s / (4.0 * horizon as f64)).exp();
            worst = worst.min(b.wealth() / bound - 1.0);
        }
    }
    Ok((worst >= -1e-9, format!("3000 sequences, smallest relative slack {worst:.4e}"), Vec::new()))
}

fn betting_experts(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    bound_presets(12, ctx)
}

fn perceptron(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let (horizon, radius) = (1000, 1.0);
    let mut worst = f64::INFINITY;
    let mut rate_mismatch = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(ctx.seed(13), seed));
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let w = [angle.cos(), angle.sin()];
        let noise = 0.05 * (seed % 4) as f64;
        let stream: Vec<(Vec<f64>, f64)> = (0..horizon)
            .map(|_| {
                let z = unit_ball_point(&mut rng, 2);
                let clean = if z[0] * w[0] + z[1] * w[1] >= 0.0 { 1.0 } else { -1.0 };
                (z, if rng.random::<f64>() < noise { -clean } else { clean })
            })
            .collect();
        let mut p = Perceptron::new(2);
        let mut scaled = [Perceptron::with_rate(2, 0.37)?, Perceptron::with_rate(2, 1e3)?];
        let (mut zs, mut ys) = (Vec::new(), Vec::new());
        for (z, y) in &stream {
            let pred = p.step(z, *y)?;
            for q in scaled.iter_mut() {
                rate_mismatch += usize::from(q.step(z, *y)? != pred);
            }
            if pred != *y {
                zs.push(z.clone());
                ys.push(*y);
            }
        }
        let (_, bound) = perceptron_bound_search(&zs, &ys, radius, 5.0)?;
        worst = worst.min(bound - p.mistakes() as f64);
    }
    let passed = worst >= 0.0 && rate_mismatch == 0;
    Ok((passed, format!("50 seeds, smallest bound minus mistakes {worst:.3}; {rate_mismatch} rate-dependent predictions"), Vec::new()))
}

fn exp3(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    bound_presets(14, ctx)
}

/// Largest `|sum x - 1|` over chained Tsallis updates driven by importance-weighted estimates.
fn tsallis_residual(rng: &mut ChaCha8Rng, rounds: usize) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < rounds {
        let dim = rng.random_range(2..=50);
        let eta = 10f64.powf(rng.random_range(-3.0..0.0));
        let mut x = vec![1.0 / dim as f64; dim];
        for _ in 0..1000 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let arm = x.iter().position(|p| {
                acc += p;
                u < acc
            });
            let arm = arm.unwrap_or(dim - 1);
            let g = iw_estimate(&x, arm, rng.random())?;
            x = tsallis_update(&x, &g, eta)?.0;
            worst = worst.max((x.iter().sum::<f64>() - 1.0).abs());
            done += 1;
        }
    }
    Ok(worst)
}

fn tsallis(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let residual = tsallis_residual(&mut ctx.rng(115), 100_000)?;
    let (bound_ok, detail, artifacts) = bound_presets(15, ctx)?;
    let passed = residual <= TSALLIS_TOLERANCE && bound_ok;
    Ok((passed, format!("largest residual over 1e5 rounds {residual:.2e}; {detail}"), artifacts))
}

fn ucb_etc(ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    bound_presets(16, ctx)
}

fn lambert(_ctx: &Ctx) -> Result<(bool, String, Vec<Artifact>), CliError> {
    let (mut worst_residual, mut sandwich_fail) = (0.0f64, 0);
    for i in 0..1000 {
        let x = 10f64.powf(-8.0 + 16.0 * i as f64 / 999.0);
        let w = lambert_w(x)?;
        worst_residual = worst_residual.max((w * w.exp() - x).abs() / x.max(1.0));
        let up = x.ln_1p();
        sandwich_fail += usize::from(!(w <= up && w >= LAMBERT_LOWER * up));
    }
    let passed = worst_residual <= 1e-12 && sandwich_fail == 0;
    Ok((passed, format!("1000 points in [1e-8, 1e8], worst scaled residual {worst_residual:.2e}, {sandwich_fail} sandwich failures"), Vec::new()))
}

/// Re-runs the artifact presets on a one-thread pool and compares with earlier outcomes
/// (or with a run on the default pool when there are none).
pub fn determinism(ctx: &Ctx, earlier: &[Outcome]) -> Outcome {
    let c = criterion(18);
    let single = match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
        Ok(p) => p,
        Err(e) => return Outcome { id: 18, slug: c.slug, passed: false, detail: format!("error: {e}"), artifacts: Vec::new() },
    };
    let mut compared = 0;
    let mut differing = Vec::new();
    for id in ARTIFACT_CRITERIA {
        let reference = match earlier.iter().find(|o| o.id == id) {
            Some(o) => o.artifacts.clone(),
            None => run_criterion(id, ctx).artifacts,
        };
        let again = single.install(|| run_criterion(id, ctx)).artifacts;
        compared += again.len();
        if reference != again || again.is_empty() {
            differing.push(criterion(id).slug);
        }
    }
    let passed = differing.is_empty();
    let detail = if passed {
        format!("{compared} artifacts byte-identical on the one-thread re-run")
    } else {
        format!("artifacts differ for {}", differing.join(", "))
    };
    Outcome { id: 18, slug: c.slug, passed, detail, artifacts: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_resolve() {
        assert_eq!(select("all").unwrap().len(), 18);
        assert_eq!(select("7").unwrap(), vec![7]);
        assert_eq!(select("lambert").unwrap(), vec![17]);
        assert!(select("19").is_err());
        assert!(select("nope").is_err());
        for (i, c) in CRITERIA.iter().enumerate() {
            assert_eq!(c.id, i + 1);
            assert!(!c.title.is_empty());
        }
    }

    #[test]
    fn every_preset_config_parses() {
        for id in ARTIFACT_CRITERIA {
            let presets = preset_configs(id);
            assert!(!presets.is_empty(), "criterion {id}");
            for (name, text) in presets {
                let cfg = ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
                assert_eq!(cfg.run_name(), name);
            }
        }
    }

    #[test]
    fn scaled_pair_is_exact() {
        let rows = vec![vec![3, -7], vec![0, 20]];
        let (base, scaled) = scaled_pair(&rows, Some(1), true);
        assert_eq!(base, vec![vec![3.0, -7.0], vec![0.0, 20.0]]);
        assert_eq!(scaled, vec![vec![3.0, -700.0], vec![0.0, 2000.0]]);
        let (base, scaled) = scaled_pair(&rows, None, false);
        assert_eq!(base[0], vec![300.0, -700.0]);
        assert_eq!(scaled[0], vec![3.0, -7.0]);
    }
}
