//! Loss family, learner contract and regret accounting shared by every algorithm.

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::vecops::{dot, sign0};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// The base shape of a per-round loss.
#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// `<g, x>`
    Linear { g: Vec<f64> },
    /// `||x - y||^2`
    SquaredDistance { y: Vec<f64> },
    /// `|x - y|` on the real line.
    Absolute { y: f64 },
    /// `max(1 - y <z, x>, 0)`
    Hinge { z: Vec<f64>, y: f64 },
    /// `max(1 - y <z, x>, 0)^q`
    HingePower { z: Vec<f64>, y: f64, q: f64 },
    /// `ln(1 + exp(-y <z, x>))`
    Logistic { z: Vec<f64>, y: f64 },
    /// `-ln(1 + c x)` on the real line.
    LogWealth { c: f64 },
}

/// A loss kind multiplied by a positive scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub scale: f64,
}

fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(OcoError::InvalidParameter(format!("label must be +1 or -1, got {y}")))
    }
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Result<Self> {
        let spec = LossSpec { kind, scale: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(g: Vec<f64>) -> Self {
        LossSpec { kind: LossKind::Linear { g }, scale: 1.0 }
    }

    pub fn squared_distance(y: Vec<f64>) -> Self {
        LossSpec { kind: LossKind::SquaredDistance { y }, scale: 1.0 }
    }

    /// One-dimensional squared distance `(x - y)^2`.
    pub fn squared_scalar(y: f64) -> Self {
        Self::squared_distance(vec![y])
    }

    pub fn absolute(y: f64) -> Self {
        LossSpec { kind: LossKind::Absolute { y }, scale: 1.0 }
    }

    pub fn hinge(z: Vec<f64>, y: f64) -> Result<Self> {
        Self::new(LossKind::Hinge { z, y })
    }

    pub fn hinge_power(z: Vec<f64>, y: f64, q: f64) -> Result<Self> {
        Self::new(LossKind::HingePower { z, y, q })
    }

    pub fn logistic(z: Vec<f64>, y: f64) -> Result<Self> {
        Self::new(LossKind::Logistic { z, y })
    }

    pub fn log_wealth(c: f64) -> Result<Self> {
        Self::new(LossKind::LogWealth { c })
    }

    /// Returns the same loss multiplied by `scale`.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        check_positive("loss scale", scale)?;
        self.scale = scale;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("loss scale", self.scale)?;
        match &self.kind {
            LossKind::Linear { g } => check_finite("linear coefficients", g),
            LossKind::SquaredDistance { y } => check_finite("squared-loss target", y),
            LossKind::Absolute { y } => check_finite("absolute-loss target", &[*y]),
            LossKind::Hinge { z, y } | LossKind::Logistic { z, y } => {
                check_finite("features", z)?;
                check_label(*y)
            }
            LossKind::HingePower { z, y, q } => {
                check_finite("features", z)?;
                check_label(*y)?;
                if !(q.is_finite() && *q >= 1.0) {
                    return Err(OcoError::InvalidParameter(format!("hinge power must be >= 1, got {q}")));
                }
                Ok(())
            }
            LossKind::LogWealth { c } => {
                if !(c.is_finite() && (-1.0..=1.0).contains(c)) {
                    return Err(OcoError::InvalidParameter(format!("coin must lie in [-1,1], got {c}")));
                }
                Ok(())
            }
        }
    }

    /// Dimension of the points the loss is defined on.
    pub fn dim(&self) -> usize {
        match &self.kind {
            LossKind::Linear { g } => g.len(),
            LossKind::SquaredDistance { y } => y.len(),
            LossKind::Absolute { .. } | LossKind::LogWealth { .. } => 1,
            LossKind::Hinge { z, .. } | LossKind::HingePower { z, .. } | LossKind::Logistic { z, .. } => z.len(),
        }
    }
}

fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

fn wealth_factor(c: f64, x: f64) -> Result<f64> {
    let w = 1.0 + c * x;
    if w <= 0.0 {
        return Err(OcoError::Domain(format!("log-wealth requires 1 + c x > 0, got {w}")));
    }
    Ok(w)
}

/// Value of `loss` at `x` (including the scale).
pub fn evaluate(loss: &LossSpec, x: &[f64]) -> Result<f64> {
    check_dim(loss.dim(), x.len())?;
    check_finite("point", x)?;
    let base = match &loss.kind {
        LossKind::Linear { g } => dot(g, x),
        LossKind::SquaredDistance { y } => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
        LossKind::Absolute { y } => (x[0] - y).abs(),
        LossKind::Hinge { z, y } => (1.0 - y * dot(z, x)).max(0.0),
        LossKind::HingePower { z, y, q } => (1.0 - y * dot(z, x)).max(0.0).powf(*q),
        LossKind::Logistic { z, y } => softplus(-y * dot(z, x)),
        LossKind::LogWealth { c } => -wealth_factor(*c, x[0])?.ln(),
    };
    Ok(loss.scale * base)
}

/// One element of the subdifferential of `loss` at `x` (including the scale).
///
/// At kinks the absolute loss returns 0 and the hinge losses return the zero vector.
pub fn subgradient(loss: &LossSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(loss.dim(), x.len())?;
    check_finite("point", x)?;
    let s = loss.scale;
    let g = match &loss.kind {
        LossKind::Linear { g } => g.iter().map(|v| s * v).collect(),
        LossKind::SquaredDistance { y } => x.iter().zip(y).map(|(a, b)| s * 2.0 * (a - b)).collect(),
        LossKind::Absolute { y } => vec![s * sign0(x[0] - y)],
        LossKind::Hinge { z, y } => {
            if 1.0 - y * dot(z, x) > 0.0 {
                z.iter().map(|v| -s * y * v).collect()
            } else {
                vec![0.0; z.len()]
            }
        }
        LossKind::HingePower { z, y, q } => {
            let m = 1.0 - y * dot(z, x);
            if m > 0.0 {
                let c = -s * q * m.powf(q - 1.0) * y;
                z.iter().map(|v| c * v).collect()
            } else {
                vec![0.0; z.len()]
            }
        }
        LossKind::Logistic { z, y } => {
            let c = -s * y * sigmoid(-y * dot(z, x));
            z.iter().map(|v| c * v).collect()
        }
        LossKind::LogWealth { c } => vec![-s * c / wealth_factor(*c, x[0])?],
    };
    Ok(g)
}

/// Mean of `ys`, the minimizer of the summed squared distances.
pub fn best_squared_loss_competitor(ys: &[f64]) -> Result<f64> {
    if ys.is_empty() {
        return Err(OcoError::Empty("no targets to average".into()));
    }
    Ok(ys.iter().sum::<f64>() / ys.len() as f64)
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub loss_value: f64,
    /// Gradient actually used by the learner (possibly an estimate).
    pub g: Vec<f64>,
    pub aux: Option<f64>,
}

/// Ordered trajectory of a game together with the true per-round losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    records: Vec<RoundRecord>,
    losses: Vec<LossSpec>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: RoundRecord, loss: LossSpec) -> Result<()> {
        let last_t = self.records.last().map_or(0, |r| r.t);
        if record.t <= last_t {
            return Err(OcoError::Protocol(format!(
                "round index {} does not follow {last_t}",
                record.t
            )));
        }
        check_finite("recorded prediction", &record.x)?;
        check_finite("recorded gradient", &record.g)?;
        check_finite("recorded loss", &[record.loss_value])?;
        if let Some(a) = record.aux {
            check_finite("recorded aux value", &[a])?;
        }
        self.records.push(record);
        self.losses.push(loss);
        Ok(())
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn losses(&self) -> &[LossSpec] {
        &self.losses
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss_value).sum()
    }

    /// Cumulative loss of the fixed competitor `u`.
    pub fn competitor_loss(&self, u: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for l in &self.losses {
            total += evaluate(l, u)?;
        }
        Ok(total)
    }

    /// Checks that every recorded loss value matches a fresh evaluation within 1e-9 relative.
    pub fn check_consistency(&self) -> Result<()> {
        for (r, l) in self.records.iter().zip(&self.losses) {
            let v = evaluate(l, &r.x)?;
            if (v - r.loss_value).abs() > 1e-9 * v.abs().max(1.0) {
                return Err(OcoError::Protocol(format!(
                    "round {}: recorded loss {} differs from {}",
                    r.t, r.loss_value, v
                )));
            }
        }
        Ok(())
    }
}

/// `sum_t l_t(x_t) - sum_t l_t(u)`; zero on an empty ledger.
pub fn regret(ledger: &RegretLedger, u: &[f64]) -> Result<f64> {
    if ledger.is_empty() {
        return Ok(0.0);
    }
    Ok(ledger.cumulative_loss() - ledger.competitor_loss(u)?)
}

// ---------------------------------------------------------------------------
// Learner contract
// ---------------------------------------------------------------------------

/// What a learner receives after predicting.
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    /// Full information: the whole loss.
    Loss(&'a LossSpec),
    /// Linearized feedback: a (sub)gradient at the last prediction.
    Gradient(&'a [f64]),
    /// Bandit feedback: the loss of the single coordinate that was played.
    Bandit { arm: usize, loss: f64 },
}

/// Uniform contract implemented by every online learner.
///
/// `predict` is called once per round and is followed by exactly one `observe`.
pub trait Learner: Send {
    fn dim(&self) -> usize;

    fn predict(&mut self) -> Result<Vec<f64>>;

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()>;

    /// Optional scalar worth logging (wealth, regularizer strength, ...).
    fn aux(&self) -> Option<f64> {
        None
    }
}

/// Converts full-information or gradient feedback into a gradient at `x`.
pub fn feedback_gradient(feedback: Feedback<'_>, x: &[f64]) -> Result<Vec<f64>> {
    match feedback {
        Feedback::Loss(loss) => subgradient(loss, x),
        Feedback::Gradient(g) => {
            check_dim(x.len(), g.len())?;
            check_finite("gradient", g)?;
            Ok(g.to_vec())
        }
        Feedback::Bandit { .. } => Err(OcoError::Unsupported(
            "bandit feedback given to a full-information learner".into(),
        )),
    }
}

/// How the harness reports each loss to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackMode {
    FullLoss,
    Gradient,
}

/// Plays the learner against a sequence of losses and returns the full ledger.
pub fn play<I>(learner: &mut dyn Learner, losses: I, mode: FeedbackMode) -> Result<RegretLedger>
where
    I: IntoIterator<Item = LossSpec>,
{
    let mut ledger = RegretLedger::new();
    for (i, loss) in losses.into_iter().enumerate() {
        let x = learner.predict()?;
        let value = evaluate(&loss, &x)?;
        let g = subgradient(&loss, &x)?;
        match mode {
            FeedbackMode::FullLoss => learner.observe(Feedback::Loss(&loss))?,
            FeedbackMode::Gradient => learner.observe(Feedback::Gradient(&g))?,
        }
        let record = RoundRecord { t: i + 1, x, loss_value: value, g, aux: learner.aux() };
        ledger.push(record, loss)?;
    }
    Ok(ledger)
}
