//! Coin-betting learners and the reductions built on them: one-dimensional and
//! coordinate-wise OLO, direction/magnitude decomposition, experts through betting,
//! and the additive combiner.

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::first_order::{Osd, StepsizePolicy};
use crate::game::{feedback_gradient, Feedback, Learner};
use crate::geometry::FeasibleSet;
use crate::vecops::{dot, norm2};

// ---------------------------------------------------------------------------
// Bettors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BettorKind {
    /// Betting fraction `sum_{i<t} c_i / t`.
    Kt,
    /// Betting fraction from the shifted exponential potential with known horizon.
    Shifted { horizon: usize },
}

/// Wealth, coin sum and round counter of a coin-betting strategy.
#[derive(Debug, Clone)]
pub struct Bettor {
    kind: BettorKind,
    initial: f64,
    wealth: f64,
    coin_sum: f64,
    t: usize,
    last_bet: Option<f64>,
}

impl Bettor {
    pub fn new(kind: BettorKind, initial_wealth: f64) -> Result<Self> {
        check_positive("initial wealth", initial_wealth)?;
        if let BettorKind::Shifted { horizon } = kind {
            if horizon == 0 {
                return Err(OcoError::InvalidParameter("shifted bettor needs a horizon >= 1".into()));
            }
        }
        Ok(Bettor { kind, initial: initial_wealth, wealth: initial_wealth, coin_sum: 0.0, t: 0, last_bet: None })
    }

    pub fn kt(initial_wealth: f64) -> Result<Self> {
        Self::new(BettorKind::Kt, initial_wealth)
    }

    pub fn shifted(horizon: usize, initial_wealth: f64) -> Result<Self> {
        Self::new(BettorKind::Shifted { horizon }, initial_wealth)
    }

    pub fn kind(&self) -> BettorKind {
        self.kind
    }

    pub fn wealth(&self) -> f64 {
        self.wealth
    }

    pub fn initial_wealth(&self) -> f64 {
        self.initial
    }

    pub fn coin_sum(&self) -> f64 {
        self.coin_sum
    }

    /// Rounds already settled.
    pub fn rounds(&self) -> usize {
        self.t
    }

    /// Betting fraction for the coming round.
    pub fn fraction(&self) -> Result<f64> {
        let t = self.t + 1;
        match self.kind {
            BettorKind::Kt => Ok(self.coin_sum / t as f64),
            BettorKind::Shifted { horizon } => {
                if t > horizon {
                    return Err(OcoError::Protocol(format!("round {t} is past the horizon {horizon}")));
                }
                // (F(S+1) - F(S-1)) / (F(S+1) + F(S-1)) with F(x) proportional to exp(x^2 / 2(t+T))
                Ok((self.coin_sum / (t + horizon) as f64).tanh())
            }
        }
    }

    /// Signed amount wagered on the coming coin.
    pub fn bet(&mut self) -> Result<f64> {
        let b = self.fraction()? * self.wealth;
        self.last_bet = Some(b);
        Ok(b)
    }

    /// Settles the coin `c` in `[-1, 1]` against the current bet.
    pub fn settle(&mut self, c: f64) -> Result<()> {
        if !(c.is_finite() && c.abs() <= 1.0) {
            return Err(OcoError::InvalidParameter(format!("coin must lie in [-1, 1], got {c}")));
        }
        let b = match self.last_bet.take() {
            Some(b) => b,
            None => self.fraction()? * self.wealth,
        };
        self.wealth += c * b;
        self.coin_sum += c;
        self.t += 1;
        Ok(())
    }
}

/// Largest `(sum c)^2 / (4T) - ln(T) / 2 - ln(Wealth_T / eps)` over every `+-1` coin
/// sequence of length at most `max_len`, for a KT bettor.
///
/// The search walks the binary tree of sequences depth first, sharing prefixes.
pub fn calibrate_kt_constant(max_len: usize) -> f64 {
    fn walk(depth: usize, max_len: usize, sum: f64, log_wealth: f64, best: &mut f64) {
        if depth > 0 {
            let t = depth as f64;
            let gap = sum * sum / (4.0 * t) - 0.5 * t.ln() - log_wealth;
            if gap > *best {
                *best = gap;
            }
        }
        if depth == max_len {
            return;
        }
        let beta = sum / (depth + 1) as f64;
        for c in [1.0, -1.0] {
            walk(depth + 1, max_len, sum + c, log_wealth + (1.0 + beta * c).ln(), best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    walk(0, max_len, 0.0, 0.0, &mut best);
    best
}

// ---------------------------------------------------------------------------
// One-dimensional OLO from a bettor
// ---------------------------------------------------------------------------

/// One-dimensional online linear optimization by betting on the coins `c_t = -g_t`.
#[derive(Debug, Clone)]
pub struct CoinBettingOlo {
    bettor: Bettor,
    x: f64,
}

impl CoinBettingOlo {
    pub fn new(kind: BettorKind, initial_wealth: f64) -> Result<Self> {
        let mut bettor = Bettor::new(kind, initial_wealth)?;
        let x = bettor.bet()?;
        Ok(CoinBettingOlo { bettor, x })
    }

    /// KT bettor with initial wealth `eps`.
    pub fn kt(eps: f64) -> Result<Self> {
        Self::new(BettorKind::Kt, eps)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn bettor(&self) -> &Bettor {
        &self.bettor
    }

    /// Feeds `g` in `[-1, 1]` and prepares the next prediction.
    pub fn step(&mut self, g: f64) -> Result<()> {
        if !(g.is_finite() && g.abs() <= 1.0) {
            return Err(OcoError::InvalidParameter(format!("gradient must lie in [-1, 1], got {g}")));
        }
        self.bettor.settle(-g)?;
        self.x = match self.bettor.bet() {
            Ok(b) => b,
            // a shifted bettor that reached its horizon keeps its last bet
            Err(OcoError::Protocol(_)) => self.x,
            Err(e) => return Err(e),
        };
        Ok(())
    }
}

impl Learner for CoinBettingOlo {
    fn dim(&self) -> usize {
        1
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(vec![self.x])
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &[self.x])?;
        self.step(g[0])
    }

    fn aux(&self) -> Option<f64> {
        Some(self.bettor.wealth())
    }
}

/// Independent KT learners per coordinate; needs `||g||_inf <= 1`.
#[derive(Debug, Clone)]
pub struct CoordinateKt {
    coords: Vec<CoinBettingOlo>,
}

impl CoordinateKt {
    /// Initial wealth `eps` per coordinate.
    pub fn new(dim: usize, eps: f64) -> Result<Self> {
        if dim == 0 {
            return Err(OcoError::InvalidParameter("dimension must be positive".into()));
        }
        let coords = (0..dim).map(|_| CoinBettingOlo::kt(eps)).collect::<Result<Vec<_>>>()?;
        Ok(CoordinateKt { coords })
    }

    /// `eps = 1 / d`.
    pub fn with_default_eps(dim: usize) -> Result<Self> {
        Self::new(dim, 1.0 / dim.max(1) as f64)
    }

    pub fn x(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.x()).collect()
    }

    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.coords.len(), g.len())?;
        check_finite("gradient", g)?;
        if g.iter().any(|v| v.abs() > 1.0) {
            return Err(OcoError::InvalidParameter("coordinate-wise KT needs ||g||_inf <= 1".into()));
        }
        for (c, gi) in self.coords.iter_mut().zip(g) {
            c.step(*gi)?;
        }
        Ok(())
    }
}

impl Learner for CoordinateKt {
    fn dim(&self) -> usize {
        self.coords.len()
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
// Direction and magnitude
// ---------------------------------------------------------------------------

/// How the unit-ball direction learner picks its stepsizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionStepsize {
    AdaptiveGlobal,
    Decaying,
}

/// Unconstrained OLO in Euclidean geometry: a KT magnitude times an OSD direction in the unit ball.
#[derive(Debug, Clone)]
pub struct DirectionMagnitude {
    magnitude: CoinBettingOlo,
    direction: Osd,
    last_s: f64,
}

impl DirectionMagnitude {
    pub fn new(dim: usize, eps: f64, stepsize: DirectionStepsize) -> Result<Self> {
        let policy = match stepsize {
            DirectionStepsize::AdaptiveGlobal => StepsizePolicy::AdaptiveGlobal { diameter: 2.0 },
            DirectionStepsize::Decaying => StepsizePolicy::Decaying { diameter: 2.0, lipschitz: 1.0 },
        };
        Ok(DirectionMagnitude {
            magnitude: CoinBettingOlo::kt(eps)?,
            direction: Osd::new(FeasibleSet::ball(1.0)?, policy, vec![0.0; dim])?,
            last_s: 0.0,
        })
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude.x()
    }

    pub fn direction(&self) -> &[f64] {
        self.direction.x()
    }

    /// Last scalar gradient `<g, direction>` fed to the magnitude learner.
    pub fn last_s(&self) -> f64 {
        self.last_s
    }

    pub fn x(&self) -> Vec<f64> {
        let z = self.magnitude.x();
        self.direction.x().iter().map(|v| z * v).collect()
    }

    /// Feeds `g` with `||g||_2 <= 1`.
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.direction.x().len(), g.len())?;
        check_finite("gradient", g)?;
        if norm2(g) > 1.0 + 1e-12 {
            return Err(OcoError::InvalidParameter("direction/magnitude needs ||g||_2 <= 1".into()));
        }
        let mut s = dot(g, self.direction.x());
        if s.abs() > 1.0 {
            // only rounding can push |<g, d>| past 1 here
            s = s.clamp(-1.0, 1.0);
        }
        self.last_s = s;
        self.magnitude.step(s)?;
        self.direction.step(g)
    }
}

impl Learner for DirectionMagnitude {
    fn dim(&self) -> usize {
        self.direction.x().len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.x())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.x())?;
        self.step(&g)
    }

    fn aux(&self) -> Option<f64> {
        Some(self.magnitude.bettor().wealth())
    }
}

// ---------------------------------------------------------------------------
// Experts through betting
// ---------------------------------------------------------------------------

/// Learning with expert advice from one bettor per expert.
#[derive(Debug, Clone)]
pub struct BettingExperts {
    prior: Vec<f64>,
    bettors: Vec<Bettor>,
    bets: Vec<f64>,
    p: Vec<f64>,
}

impl BettingExperts {
    pub fn new(prior: Vec<f64>, kind: BettorKind) -> Result<Self> {
        if prior.len() < 2 {
            return Err(OcoError::InvalidParameter("need at least two experts".into()));
        }
        check_finite("prior", &prior)?;
        if prior.iter().any(|p| *p <= 0.0) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(OcoError::InvalidParameter("prior must be a strictly positive simplex vector".into()));
        }
        let bettors = prior.iter().map(|_| Bettor::new(kind, 1.0)).collect::<Result<Vec<_>>>()?;
        let mut me = BettingExperts { bets: vec![0.0; prior.len()], p: prior.clone(), prior, bettors };
        me.refresh()?;
        Ok(me)
    }

    pub fn uniform(dim: usize, kind: BettorKind) -> Result<Self> {
        Self::new(vec![1.0 / dim as f64; dim], kind)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn bets(&self) -> &[f64] {
        &self.bets
    }

    fn refresh(&mut self) -> Result<()> {
        for (b, bettor) in self.bets.iter_mut().zip(self.bettors.iter_mut()) {
            *b = match bettor.bet() {
                Ok(v) => v,
                Err(OcoError::Protocol(_)) => *b,
                Err(e) => return Err(e),
            };
        }
        let hat: Vec<f64> = self.prior.iter().zip(&self.bets).map(|(pi, x)| pi * x.max(0.0)).collect();
        let total: f64 = hat.iter().sum();
        self.p = if total > 0.0 { hat.iter().map(|h| h / total).collect() } else { self.prior.clone() };
        Ok(())
    }

    /// Feeds expert losses `g` in `[0, 1]^d`.
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.prior.len(), g.len())?;
        check_finite("expert losses", g)?;
        if g.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(OcoError::InvalidParameter("expert losses must lie in [0, 1]".into()));
        }
        let mixed = dot(g, &self.p);
        for i in 0..g.len() {
            let raw = mixed - g[i];
            let c = if self.bets[i] > 0.0 { raw } else { raw.max(0.0) };
            self.bettors[i].settle(c.clamp(-1.0, 1.0))?;
        }
        self.refresh()
    }
}

impl Learner for BettingExperts {
    fn dim(&self) -> usize {
        self.prior.len()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(self.p.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.p)?;
        self.step(&g)
    }
}

// ---------------------------------------------------------------------------
// Combining learners
// ---------------------------------------------------------------------------

/// Always predicts the origin.
#[derive(Debug, Clone)]
pub struct ZeroLearner {
    dim: usize,
}

impl ZeroLearner {
    pub fn new(dim: usize) -> Self {
        ZeroLearner { dim }
    }
}

impl Learner for ZeroLearner {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.dim])
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        feedback_gradient(feedback, &vec![0.0; self.dim]).map(|_| ())
    }
}

/// Predicts the sum of two OLO learners and sends both the same gradient.
pub struct Combined {
    a: Box<dyn Learner>,
    b: Box<dyn Learner>,
    last: Vec<f64>,
    parts: (Vec<f64>, Vec<f64>),
}

impl Combined {
    pub fn new(a: Box<dyn Learner>, b: Box<dyn Learner>) -> Result<Self> {
        check_dim(a.dim(), b.dim())?;
        let d = a.dim();
        Ok(Combined { a, b, last: vec![0.0; d], parts: (vec![0.0; d], vec![0.0; d]) })
    }

    /// Predictions of the two components in the last round.
    pub fn parts(&self) -> (&[f64], &[f64]) {
        (&self.parts.0, &self.parts.1)
    }
}

impl Learner for Combined {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn predict(&mut self) -> Result<Vec<f64>> {
        let xa = self.a.predict()?;
        let xb = self.b.predict()?;
        self.last = xa.iter().zip(&xb).map(|(p, q)| p + q).collect();
        self.parts = (xa, xb);
        Ok(self.last.clone())
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = feedback_gradient(feedback, &self.last)?;
        self.a.observe(Feedback::Gradient(&g))?;
        self.b.observe(Feedback::Gradient(&g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{play, FeedbackMode, LossSpec};
    use crate::geometry::{conj_exp_square, kl_divergence};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kt_examples() {
        let mut b = Bettor::kt(1.0).unwrap();
        assert_eq!(b.bet().unwrap(), 0.0);
        b.settle(1.0).unwrap();
        assert_eq!(b.fraction().unwrap(), 0.5);
        assert_eq!(b.bet().unwrap(), 0.5);
        b.settle(1.0).unwrap();
        assert_eq!(b.wealth(), 1.5);
        assert!((b.fraction().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.bet().unwrap() - 1.0).abs() < 1e-15);
        assert!(b.settle(1.5).is_err());
    }

    #[test]
    fn shifted_examples() {
        let mut b = Bettor::shifted(4, 1.0).unwrap();
        assert_eq!(b.fraction().unwrap(), 0.0);
        for _ in 0..4 {
            b.bet().unwrap();
            b.settle(1.0).unwrap();
        }
        assert!(b.wealth() >= 2f64.sqrt() / 2.0 * std::f64::consts::E);
        assert!(b.bet().is_err());

        let mut b = Bettor::shifted(100, 1.0).unwrap();
        for t in 0..100 {
            b.bet().unwrap();
            b.settle(if t % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
            assert!(b.wealth() >= 2f64.sqrt() / 2.0);
        }
    }

    #[test]
    fn shifted_fraction_matches_potential_ratio() {
        for &(s, t, horizon) in &[(3.0, 5usize, 10usize), (-7.0, 9, 20), (0.5, 1, 1), (40.0, 60, 100)] {
            let k = (t + horizon) as f64;
            let f = |x: f64| (x * x / (2.0 * k)).exp();
            let direct = (f(s + 1.0) - f(s - 1.0)) / (f(s + 1.0) + f(s - 1.0));
            let b = Bettor { kind: BettorKind::Shifted { horizon }, initial: 1.0, wealth: 1.0, coin_sum: s, t: t - 1, last_bet: None };
            assert!((b.fraction().unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn kt_all_heads_meets_bound_with_calibrated_constant() {
        let k = calibrate_kt_constant(16);
        let mut b = Bettor::kt(1.0).unwrap();
        for _ in 0..21 {
            b.bet().unwrap();
            b.settle(1.0).unwrap();
        }
        let t = 21.0f64;
        assert!(b.wealth().ln() >= t * t / (4.0 * t) - 0.5 * t.ln() - k);
    }

    #[test]
    fn calibration_matches_explicit_enumeration() {
        // independent oracle: enumerate bit patterns directly for short lengths
        let mut best = f64::NEG_INFINITY;
        for len in 1..=10usize {
            for mask in 0u32..(1 << len) {
                let mut b = Bettor::kt(1.0).unwrap();
                for i in 0..len {
                    b.bet().unwrap();
                    b.settle(if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).unwrap();
                }
                let t = len as f64;
                best = best.max(b.coin_sum().powi(2) / (4.0 * t) - 0.5 * t.ln() - b.wealth().ln());
            }
        }
        assert!((calibrate_kt_constant(10) - best).abs() < 1e-12);
    }

    #[test]
    fn kt_oco_examples() {
        let mut l = CoinBettingOlo::kt(1.0).unwrap();
        assert_eq!(l.x(), 0.0);
        l.step(-1.0).unwrap();
        assert_eq!(l.x(), 0.5);
        assert!(l.step(1.5).is_err());
    }

    #[test]
    fn kt_oco_moves_fast_toward_minimizer() {
        let mut l = CoinBettingOlo::kt(1.0).unwrap();
        let loss = LossSpec::absolute(10.0);
        let ledger = play(&mut l, std::iter::repeat(loss).take(40), FeedbackMode::Gradient).unwrap();
        let xs: Vec<f64> = ledger.records().iter().map(|r| r.x[0]).collect();
        assert!(xs[..8].iter().any(|x| *x >= 1.0), "{xs:?}");
        assert!(xs.iter().any(|x| *x > 10.0));
    }

    #[test]
    fn coordinate_kt_examples() {
        let mut c = CoordinateKt::with_default_eps(3).unwrap();
        for _ in 0..10 {
            c.step(&[0.0, 0.0, 0.0]).unwrap();
            assert_eq!(c.x(), vec![0.0; 3]);
        }
        let mut c = CoordinateKt::new(2, 0.5).unwrap();
        let mut one = CoinBettingOlo::kt(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let g = rng.random_range(-1.0..1.0);
            c.step(&[g, 0.0]).unwrap();
            one.step(g).unwrap();
            assert_eq!(c.x(), vec![one.x(), 0.0]);
        }
        assert!(c.step(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn kt_regret_below_conjugate_of_wealth_bound() {
        let k = calibrate_kt_constant(16);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..50 {
            let t_max = 300usize;
            let eps = 1.0;
            let mut l = CoinBettingOlo::kt(eps).unwrap();
            let gs: Vec<f64> = (0..t_max).map(|_| if rng.random_bool(0.7) { -1.0 } else { rng.random_range(-1.0..1.0) }).collect();
            let mut learner = 0.0;
            for g in &gs {
                learner += g * l.x();
                l.step(*g).unwrap();
            }
            let gsum: f64 = gs.iter().sum();
            // Wealth_T >= b exp(S^2 / (2a)) with a = 2T and b = eps e^{-K} / sqrt(T)
            let a = 2.0 * t_max as f64;
            let b = eps * (-k).exp() / (t_max as f64).sqrt();
            for i in 0..=100 {
                let u = -50.0 + i as f64;
                let regret = learner - gsum * u;
                assert!(regret <= eps + conj_exp_square(u, a, b).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn dir_mag_examples() {
        let mut dm = DirectionMagnitude::new(2, 1.0, DirectionStepsize::Decaying).unwrap();
        assert_eq!(dm.x(), vec![0.0, 0.0]);
        for t in 1..=30 {
            dm.step(&[1.0, 0.0]).unwrap();
            assert!(dm.last_s().abs() <= 1.0);
            if t >= 1 {
                assert!(dm.x()[0] <= 0.0);
            }
        }
        assert!(dm.direction()[0] < -0.99);
        assert!(dm.magnitude() > 1.0);
        assert!(dm.step(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn dir_mag_regret_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for stepsize in [DirectionStepsize::AdaptiveGlobal, DirectionStepsize::Decaying] {
            let mut dm = DirectionMagnitude::new(3, 1.0, stepsize).unwrap();
            let (mut zs, mut dirs, mut ss, mut gs) = (vec![], vec![], vec![], vec![]);
            for _ in 0..500 {
                let mut g: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0) + 0.3).collect();
                let n = norm2(&g);
                if n > 1.0 {
                    g.iter_mut().for_each(|v| *v /= n);
                }
                zs.push(dm.magnitude());
                dirs.push(dm.direction().to_vec());
                dm.step(&g).unwrap();
                ss.push(dm.last_s());
                gs.push(g);
            }
            for u in [[1.0, -2.0, 0.5], [-3.0, -3.0, -3.0], [0.1, 0.0, 0.0]] {
                let un = norm2(&u);
                let ud: Vec<f64> = u.iter().map(|v| v / un).collect();
                let total: f64 = gs.iter().zip(zs.iter().zip(&dirs)).map(|(g, (z, d))| dot(g, &d.iter().map(|v| z * v).collect::<Vec<_>>()) - dot(g, &u)).sum();
                let one_d: f64 = ss.iter().zip(&zs).map(|(s, z)| s * z - s * un).sum();
                let ball: f64 = gs.iter().zip(&dirs).map(|(g, d)| dot(g, d) - dot(g, &ud)).sum();
                assert!((total - (one_d + un * ball)).abs() <= 1e-9 * total.abs().max(1.0));
            }
        }
    }

    #[test]
    fn betting_experts_examples() {
        let mut e = BettingExperts::uniform(2, BettorKind::Kt).unwrap();
        assert_eq!(e.p(), &[0.5, 0.5]);
        let mut last = 0.0;
        for t in 0..200 {
            e.step(&[0.0, 1.0]).unwrap();
            if t > 5 {
                assert!(e.p()[0] >= last);
            }
            last = e.p()[0];
        }
        assert!(last > 0.99);
        assert!(e.step(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn betting_experts_regret_bound_small() {
        let (d, t_max) = (4usize, 512usize);
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..5 {
            let mut e = BettingExperts::uniform(d, BettorKind::Shifted { horizon: t_max }).unwrap();
            let mut learner = 0.0;
            let mut totals = vec![0.0; d];
            for _ in 0..t_max {
                let g: Vec<f64> = (0..d).map(|i| if rng.random_bool(0.5 - 0.05 * i as f64) { 1.0 } else { 0.0 }).collect();
                learner += dot(&g, e.p());
                for i in 0..d {
                    totals[i] += g[i];
                }
                e.step(&g).unwrap();
                assert!((e.p().iter().sum::<f64>() - 1.0).abs() < 1e-12 && e.p().iter().all(|v| *v >= 0.0));
            }
            for i in 0..d {
                let mut u = vec![0.0; d];
                u[i] = 1.0;
                let kl = kl_divergence(&u, &vec![1.0 / d as f64; d]).unwrap();
                let bound = (4.0 * t_max as f64 * (kl + 0.5 * 2f64.ln())).sqrt();
                assert!(learner - totals[i] <= bound);
            }
        }
    }

    #[test]
    fn combine_with_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut plain = CoordinateKt::new(2, 1.0).unwrap();
        let mut combo = Combined::new(Box::new(ZeroLearner::new(2)), Box::new(CoordinateKt::new(2, 1.0).unwrap())).unwrap();
        for _ in 0..100 {
            let g = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            assert_eq!(plain.predict().unwrap(), combo.predict().unwrap());
            plain.observe(Feedback::Gradient(&g)).unwrap();
            combo.observe(Feedback::Gradient(&g)).unwrap();
        }
        assert!(Combined::new(Box::new(ZeroLearner::new(2)), Box::new(ZeroLearner::new(3))).is_err());
    }

    #[test]
    fn combined_regret_splits_over_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut combo = Combined::new(
            Box::new(CoordinateKt::with_default_eps(2).unwrap()),
            Box::new(DirectionMagnitude::new(2, 1.0, DirectionStepsize::AdaptiveGlobal).unwrap()),
        )
        .unwrap();
        let (mut ra, mut rb, mut rc) = (0.0, 0.0, 0.0);
        let u = [2.0, -1.0];
        for _ in 0..400 {
            let x = combo.predict().unwrap();
            let (xa, xb) = (combo.parts().0.to_vec(), combo.parts().1.to_vec());
            let g = vec![rng.random_range(-0.7..0.3), rng.random_range(-0.3..0.7)];
            rc += dot(&g, &x) - dot(&g, &u);
            ra += dot(&g, &xa) - dot(&g, &u);
            rb += dot(&g, &xb);
            combo.observe(Feedback::Gradient(&g)).unwrap();
        }
        assert!((rc - (ra + rb)).abs() < 1e-9 * rc.abs().max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn wealth_identities(coins in prop::collection::vec(-1.0..=1.0f64, 1..200), shifted in any::<bool>()) {
            let kind = if shifted { BettorKind::Shifted { horizon: coins.len() } } else { BettorKind::Kt };
            let mut b = Bettor::new(kind, 1.0).unwrap();
            let mut product = 1.0;
            let mut additive = 1.0;
            for c in &coins {
                let beta = b.fraction().unwrap();
                let bet = b.bet().unwrap();
                prop_assert!(bet.abs() < b.wealth() || bet == 0.0);
                b.settle(*c).unwrap();
                product *= 1.0 + beta * c;
                additive += c * bet;
                prop_assert!(b.wealth() > 0.0);
                prop_assert!(b.coin_sum().abs() <= b.rounds() as f64 + 1e-12);
            }
            prop_assert!((b.wealth() - product).abs() <= 1e-9 * product);
            prop_assert!((b.wealth() - additive).abs() <= 1e-9 * additive);
        }
    }
}
