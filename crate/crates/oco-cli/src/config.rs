//! Experiment configuration.
//!
//! A config is a TOML document with exactly three tables: `[learner]`, `[environment]` and
//! `[run]`. The `learner` and `environment` tables carry a `name` plus the keys that name
//! accepts; any other key is rejected.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerName {
    Osd,
    Adagrad,
    Eg,
    Pnorm,
    Ftrl,
    EntropicFtrl,
    Adahedge,
    Ftl,
    Quadratized,
    Ons,
    Kt,
    CoordinateKt,
    DirMag,
    BettingExperts,
    Exp3,
    ExploreMix,
    Tsallis,
    Etc,
    Ucb,
}

impl LearnerName {
    /// Keys accepted in `[learner]` besides `name` and `dim`.
    pub fn keys(self) -> &'static [&'static str] {
        use LearnerName::*;
        match self {
            Osd => &["domain", "radius", "lo", "hi", "stepsize", "eta", "diameter", "lipschitz", "mu", "x1"],
            Adagrad => &["lo", "hi", "x1"],
            Eg => &["eta"],
            Pnorm => &["p", "eta", "x1"],
            Ftrl => &["domain", "radius", "lo", "hi", "c", "lambda"],
            EntropicFtrl => &["alpha", "lipschitz"],
            Adahedge => &["alpha"],
            Ftl => &["domain", "radius", "lo", "hi"],
            Quadratized => &["mu"],
            Ons => &["domain", "radius", "lambda", "mu"],
            Kt => &["eps"],
            CoordinateKt => &["eps"],
            DirMag => &["eps", "stepsize"],
            BettingExperts => &["bettor"],
            Exp3 => &["eta"],
            ExploreMix => &["eta", "alpha"],
            Tsallis => &["eta"],
            Etc => &["m"],
            Ucb => &["alpha"],
        }
    }

    pub fn is_bandit(self) -> bool {
        use LearnerName::*;
        matches!(self, Exp3 | ExploreMix | Tsallis | Etc | Ucb)
    }

    /// Learners whose predictions live on the probability simplex.
    pub fn is_simplex(self) -> bool {
        use LearnerName::*;
        matches!(self, Eg | EntropicFtrl | Adahedge | BettingExperts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainName {
    All,
    Ball,
    Box,
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsizeName {
    Constant,
    Decaying,
    Adaptive,
    StronglyConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BettorName {
    Kt,
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LearnerSpec {
    pub name: LearnerName,
    pub dim: Option<usize>,
    pub domain: Option<DomainName>,
    pub radius: Option<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub stepsize: Option<StepsizeName>,
    pub eta: Option<f64>,
    pub diameter: Option<f64>,
    pub lipschitz: Option<f64>,
    pub mu: Option<f64>,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub bettor: Option<BettorName>,
    pub m: Option<usize>,
    pub x1: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvName {
    GuessingGame,
    FtlFailure,
    Rademacher,
    IidLinear,
    StochasticArms,
    FixedConvex,
    Switching,
}

impl EnvName {
    pub fn keys(self) -> &'static [&'static str] {
        use EnvName::*;
        match self {
            GuessingGame => &["ys"],
            FtlFailure => &[],
            Rademacher => &["lipschitz", "diameter", "z"],
            IidLinear => &["mean", "noise", "noise_scale"],
            StochasticArms => &["bernoulli", "gaussian"],
            FixedConvex => &["loss", "target"],
            Switching => &["dim", "linf", "block", "nonnegative"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseName {
    Uniform,
    Rademacher,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedLossName {
    Absolute,
    Squared,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EnvSpec {
    pub name: EnvName,
    pub ys: Option<Vec<f64>>,
    pub lipschitz: Option<f64>,
    pub diameter: Option<f64>,
    pub z: Option<Vec<f64>>,
    pub mean: Option<Vec<f64>>,
    pub noise: Option<NoiseName>,
    pub noise_scale: Option<f64>,
    pub bernoulli: Option<Vec<f64>>,
    pub gaussian: Option<Vec<f64>>,
    pub loss: Option<FixedLossName>,
    pub target: Option<Vec<f64>>,
    pub dim: Option<usize>,
    pub linf: Option<f64>,
    pub block: Option<usize>,
    pub nonnegative: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompetitorName {
    None,
    Fixed,
    BestOnGrid,
    BestInBall,
    BestMean,
    BestVertex,
    BestArm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundName {
    None,
    OsdDecaying,
    SqrtT,
    AdaptiveGlobal,
    Adagrad,
    Eg,
    Adahedge,
    FtlGuessing,
    Experts,
    Exp3,
    Tsallis,
    Ucb,
    Etc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    /// Every seed must stay under its bound.
    EverySeed,
    /// The mean final regret must stay under the mean final bound.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackName {
    Gradient,
    FullLoss,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: usize,
    #[serde(default = "one")]
    pub seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub name: Option<String>,
    pub competitor: Option<CompetitorName>,
    pub u: Option<Vec<f64>>,
    pub grid_radius: Option<f64>,
    pub bound: Option<BoundName>,
    pub bound_coef: Option<f64>,
    pub check: Option<CheckMode>,
    pub feedback: Option<FeedbackName>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub learner: LearnerSpec,
    pub environment: EnvSpec,
    pub run: RunSpec,
}

fn take_table(doc: &mut toml::Table, key: &str) -> Result<toml::Table, CliError> {
    match doc.remove(key) {
        Some(toml::Value::Table(t)) => Ok(t),
        Some(_) => Err(CliError::config(format!("`{key}` must be a table"))),
        None => Err(CliError::config(format!("missing `[{key}]` table"))),
    }
}

fn check_keys(section: &str, table: &toml::Table, allowed: &[&str]) -> Result<(), CliError> {
    let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
    for key in table.keys() {
        if key != "name" && !allowed.contains(key.as_str()) {
            return Err(CliError::config(format!("unknown key `{key}` in [{section}]")));
        }
    }
    Ok(())
}

fn name_of<T: for<'de> Deserialize<'de>>(section: &str, table: &toml::Table) -> Result<T, CliError> {
    let value = table.get("name").ok_or_else(|| CliError::config(format!("[{section}] needs a `name`")))?;
    value
        .clone()
        .try_into()
        .map_err(|_| CliError::config(format!("unknown {section} name {value}")))
}

fn decode<T: for<'de> Deserialize<'de>>(section: &str, table: toml::Table) -> Result<T, CliError> {
    toml::Value::Table(table).try_into().map_err(|e| CliError::config(format!("[{section}]: {e}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
        let learner = take_table(&mut doc, "learner")?;
        let environment = take_table(&mut doc, "environment")?;
        let run = take_table(&mut doc, "run")?;
        if let Some(extra) = doc.keys().next() {
            return Err(CliError::config(format!("unknown top-level key `{extra}`")));
        }

        let lname: LearnerName = name_of("learner", &learner)?;
        let mut allowed = vec!["dim"];
        allowed.extend_from_slice(lname.keys());
        check_keys("learner", &learner, &allowed)?;
        let ename: EnvName = name_of("environment", &environment)?;
        check_keys("environment", &environment, ename.keys())?;

        let cfg = ExperimentConfig {
            learner: decode("learner", learner)?,
            environment: decode("environment", environment)?,
            run: decode("run", run)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Structural checks; numeric ranges are checked when the learner and environment are built.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.run.horizon == 0 {
            return Err(CliError::config("horizon must be at least 1"));
        }
        if self.run.seeds == 0 {
            return Err(CliError::config("at least one seed is required"));
        }
        let bandit_env = self.environment.name == EnvName::StochasticArms;
        if self.learner.name.is_bandit() && !bandit_env {
            return Err(CliError::config("bandit learners need the stochastic-arms environment"));
        }
        if self.run.competitor == Some(CompetitorName::BestArm) && !self.learner.name.is_bandit() {
            return Err(CliError::config("best-arm competitor needs a bandit learner"));
        }
        if self.run.competitor == Some(CompetitorName::Fixed) && self.run.u.is_none() {
            return Err(CliError::config("fixed competitor needs `u`"));
        }
        if self.learner.name.is_bandit() && self.run.feedback.is_some() {
            return Err(CliError::config("bandit learners take bandit feedback; drop `feedback`"));
        }
        Ok(())
    }

    pub fn run_name(&self) -> &str {
        self.run.name.as_deref().unwrap_or("run")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OSD: &str = r#"
[learner]
name = "osd"
domain = "ball"
radius = 1.0
stepsize = "decaying"
diameter = 2.0
lipschitz = 1.0

[environment]
name = "guessing-game"

[run]
horizon = 100
seeds = 3
master_seed = 7
"#;

    #[test]
    fn parses_valid_config() {
        let cfg = ExperimentConfig::parse(OSD).unwrap();
        assert_eq!(cfg.learner.name, LearnerName::Osd);
        assert_eq!(cfg.learner.stepsize, Some(StepsizeName::Decaying));
        assert_eq!(cfg.environment.name, EnvName::GuessingGame);
        assert_eq!((cfg.run.horizon, cfg.run.seeds, cfg.run.master_seed), (100, 3, 7));
        assert_eq!(cfg.run_name(), "run");
    }

    #[test]
    fn rejects_parameters_of_other_learners() {
        let bad = OSD.replace("lipschitz = 1.0", "lipschitz = 1.0\nbettor = \"kt\"");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("bettor"), "{err}");
    }

    #[test]
    fn rejects_unknown_names_and_sections() {
        assert!(ExperimentConfig::parse(&OSD.replace("\"osd\"", "\"sgd\"")).is_err());
        assert!(ExperimentConfig::parse(&OSD.replace("guessing-game", "maze")).is_err());
        assert!(ExperimentConfig::parse(&format!("{OSD}\n[extra]\nx = 1\n")).is_err());
        assert!(ExperimentConfig::parse(&OSD.replace("seeds = 3", "seeds = 3\ncolour = 1")).is_err());
        assert!(ExperimentConfig::parse(&OSD.replace("[environment]\nname = \"guessing-game\"", "")).is_err());
    }

    #[test]
    fn rejects_empty_horizon_and_seed_list() {
        assert!(ExperimentConfig::parse(&OSD.replace("horizon = 100", "horizon = 0")).is_err());
        assert!(ExperimentConfig::parse(&OSD.replace("seeds = 3", "seeds = 0")).is_err());
        assert!(ExperimentConfig::parse(&OSD.replace("horizon = 100", "")).is_err());
    }

    #[test]
    fn bandit_learner_needs_arms() {
        let text = "[learner]\nname = \"ucb\"\nalpha = 3.0\n[environment]\nname = \"ftl-failure\"\n[run]\nhorizon = 10\n";
        assert!(ExperimentConfig::parse(text).is_err());
        let ok = "[learner]\nname = \"ucb\"\nalpha = 3.0\n[environment]\nname = \"stochastic-arms\"\nbernoulli = [0.2, 0.5]\n[run]\nhorizon = 10\n";
        assert!(ExperimentConfig::parse(ok).is_ok());
    }
}
