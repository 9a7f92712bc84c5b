//! Online linear classification: the Perceptron and a randomized FTRL classifier.

use rand::Rng;

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::vecops::{dot, norm2, sign0};

fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(OcoError::InvalidParameter(format!("label must be +1 or -1, got {y}")))
    }
}

/// Perceptron with an optional update scale; `sign(0)` predicts `+1`.
#[derive(Debug, Clone)]
pub struct Perceptron {
    x: Vec<f64>,
    eta: f64,
    mistakes: usize,
}

impl Perceptron {
    pub fn new(dim: usize) -> Self {
        Perceptron { x: vec![0.0; dim], eta: 1.0, mistakes: 0 }
    }

    /// Multiplies every update by `eta`; the predicted labels do not depend on it.
    pub fn with_rate(dim: usize, eta: f64) -> Result<Self> {
        check_positive("eta", eta)?;
        Ok(Perceptron { x: vec![0.0; dim], eta, mistakes: 0 })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn mistakes(&self) -> usize {
        self.mistakes
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.x.len(), z.len())?;
        check_finite("features", z)?;
        Ok(if dot(z, &self.x) >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Predicts, then updates on a mistake. Returns the predicted label.
    pub fn step(&mut self, z: &[f64], y: f64) -> Result<f64> {
        check_label(y)?;
        let pred = self.predict(z)?;
        if pred != y {
            self.mistakes += 1;
            for (xi, zi) in self.x.iter_mut().zip(z) {
                *xi += self.eta * y * zi;
            }
        }
        Ok(pred)
    }
}

/// `L + R^2 ||u||^2 / 2 + R ||u|| sqrt(R^2 ||u||^2 / 4 + L)`, the Perceptron mistake bound
/// for a competitor `u` with hinge loss `L` on the mistake rounds.
pub fn perceptron_mistake_bound(hinge_loss: f64, radius: f64, u_norm: f64) -> f64 {
    let a = radius * u_norm;
    hinge_loss + a * a / 2.0 + a * (a * a / 4.0 + hinge_loss).sqrt()
}

/// Grid search for the two-dimensional competitor minimizing the Perceptron bound.
///
/// `zs`/`ys` are the rounds on which mistakes happened. The search scans `[-extent, extent]^2`
/// with step 0.1, then refines around the best point with step 0.01. Returns the competitor
/// and its bound value.
pub fn perceptron_bound_search(zs: &[Vec<f64>], ys: &[f64], radius: f64, extent: f64) -> Result<([f64; 2], f64)> {
    check_dim(zs.len(), ys.len())?;
    if zs.iter().any(|z| z.len() != 2) {
        return Err(OcoError::Unsupported("the bound search is two-dimensional".into()));
    }
    let value = |u: [f64; 2]| {
        let hinge: f64 = zs
            .iter()
            .zip(ys)
            .map(|(z, y)| (1.0 - y * (z[0] * u[0] + z[1] * u[1])).max(0.0))
            .sum();
        perceptron_mistake_bound(hinge, radius, u[0].hypot(u[1]))
    };
    let scan = |center: [f64; 2], half: f64, step: f64, best: &mut ([f64; 2], f64)| {
        let n = (2.0 * half / step).round() as i64;
        for i in 0..=n {
            for j in 0..=n {
                let u = [center[0] - half + i as f64 * step, center[1] - half + j as f64 * step];
                let v = value(u);
                if v < best.1 {
                    *best = (u, v);
                }
            }
        }
    };
    let mut best = ([0.0, 0.0], value([0.0, 0.0]));
    scan([0.0, 0.0], extent, 0.1, &mut best);
    let c = best.0;
    scan(c, 0.1, 0.01, &mut best);
    Ok(best)
}

/// Randomized classifier running FTRL on the surrogate `|<z, x> - y| / 2` over the ball of radius `1 / R`.
#[derive(Debug, Clone)]
pub struct RandomizedClassifier {
    theta: Vec<f64>,
    radius: f64,
    t: usize,
}

/// Outcome of one randomized round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedRound {
    pub prediction: f64,
    pub prob_positive: f64,
    /// Probability of a mistake, `|<z, x> - y| / 2`.
    pub expected_mistake: f64,
}

impl RandomizedClassifier {
    /// `radius` bounds the feature norms `||z||_2`.
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        check_positive("feature radius", radius)?;
        Ok(RandomizedClassifier { theta: vec![0.0; dim], radius, t: 0 })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Weight vector for the coming round, inside the ball of radius `1 / R`.
    pub fn x(&self) -> Vec<f64> {
        let eta = 2f64.sqrt() / ((self.t + 1) as f64).sqrt();
        let n = norm2(&self.theta);
        if n == 0.0 {
            return vec![0.0; self.theta.len()];
        }
        let shrink = (1.0 / (self.radius * eta * n)).min(1.0);
        self.theta.iter().map(|th| eta * th * shrink).collect()
    }

    /// Plays a round using the uniform draw `u` in `[0, 1)`: predicts `+1` when `u < P(+1)`.
    pub fn step_with(&mut self, z: &[f64], y: f64, u: f64) -> Result<RandomizedRound> {
        check_dim(self.theta.len(), z.len())?;
        check_finite("features", z)?;
        check_label(y)?;
        if norm2(z) > self.radius * (1.0 + 1e-12) {
            return Err(OcoError::BoundViolated(format!("||z|| = {} exceeds R = {}", norm2(z), self.radius)));
        }
        let x = self.x();
        let margin = dot(z, &x).clamp(-1.0, 1.0);
        let prob_positive = (margin + 1.0) / 2.0;
        let prediction = if u < prob_positive { 1.0 } else { -1.0 };
        let s = sign0(margin - y);
        for (th, zi) in self.theta.iter_mut().zip(z) {
            *th -= 0.5 * s * zi;
        }
        self.t += 1;
        Ok(RandomizedRound { prediction, prob_positive, expected_mistake: 0.5 * (margin - y).abs() })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, z: &[f64], y: f64, rng: &mut R) -> Result<RandomizedRound> {
        self.step_with(z, y, rng.random::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perceptron_examples() {
        let mut p = Perceptron::new(2);
        assert_eq!(p.step(&[1.0, 0.0], 1.0).unwrap(), 1.0);
        assert_eq!(p.x(), &[0.0, 0.0]);
        assert_eq!(p.mistakes(), 0);
        assert_eq!(p.step(&[1.0, 0.0], -1.0).unwrap(), 1.0);
        assert_eq!(p.x(), &[-1.0, 0.0]);
        assert_eq!(p.mistakes(), 1);
        assert!(p.step(&[1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn separable_cycle_respects_margin_bound() {
        // points at distance >= gamma from the line x1 = x2 through the origin, labels by side
        let pts = [([1.0, 0.2], 1.0), ([0.1, 0.9], -1.0), ([0.8, -0.5], 1.0), ([-0.6, 0.4], -1.0), ([0.5, 0.1], 1.0), ([-0.2, 0.7], -1.0)];
        let w = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
        let gamma = pts.iter().map(|(z, y)| y * (z[0] * w[0] + z[1] * w[1])).fold(f64::INFINITY, f64::min);
        let r = pts.iter().map(|(z, _)| z[0].hypot(z[1])).fold(0.0, f64::max);
        assert!(gamma > 0.0);
        let mut p = Perceptron::new(2);
        for _ in 0..200 {
            for (z, y) in &pts {
                p.step(z, *y).unwrap();
            }
        }
        assert!(p.mistakes() as f64 <= r * r / (gamma * gamma));
        for (z, y) in &pts {
            assert_eq!(p.predict(z).unwrap(), *y);
        }
    }

    #[test]
    fn bound_search_reaches_margin_competitor() {
        let zs = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let ys = vec![1.0, -1.0];
        let (u, v) = perceptron_bound_search(&zs, &ys, 1.0, 3.0).unwrap();
        // u = (1, 0) has zero hinge loss and bound 1/2 + 1/2 = 1
        assert!(v <= 1.0 + 1e-12);
        assert!((u[0] - 1.0).abs() <= 0.01 && u[1].abs() <= 0.01);
        assert!((perceptron_mistake_bound(0.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn randomized_examples() {
        let mut c = RandomizedClassifier::new(2, 1.0).unwrap();
        assert_eq!(c.x(), vec![0.0, 0.0]);
        let r = c.step_with(&[1.0, 0.0], 1.0, 0.3).unwrap();
        assert_eq!(r.prob_positive, 0.5);
        assert_eq!(r.prediction, 1.0);
        let r2 = RandomizedClassifier::new(2, 1.0).unwrap().step_with(&[1.0, 0.0], 1.0, 0.7).unwrap();
        assert_eq!(r2.prediction, -1.0);
        assert!(c.step_with(&[2.0, 0.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn randomized_becomes_confident_on_constant_label() {
        let mut c = RandomizedClassifier::new(1, 1.0).unwrap();
        for _ in 0..50 {
            c.step_with(&[1.0], 1.0, 0.5).unwrap();
        }
        let r = c.step_with(&[1.0], 1.0, 0.9).unwrap();
        assert!(r.prob_positive > 0.95, "{}", r.prob_positive);
        assert_eq!(r.prediction, 1.0);
    }

    #[test]
    fn randomized_surrogate_regret_on_separable_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t_max = 2000;
        let w = [0.6f64, 0.8];
        let mut c = RandomizedClassifier::new(2, 1.0).unwrap();
        let (mut zs, mut ys) = (vec![], vec![]);
        let mut expected = 0.0;
        for _ in 0..t_max {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let z = [a.cos(), a.sin()];
            let y = if z[0] * w[0] + z[1] * w[1] >= 0.0 { 1.0 } else { -1.0 };
            expected += c.step(&z, y, &mut rng).unwrap().expected_mistake;
            zs.push(z);
            ys.push(y);
        }
        // best competitor in the unit ball on a polar grid
        let mut best = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..360 {
                let (r, a) = (i as f64 / 100.0, (j as f64).to_radians());
                let u = [r * a.cos(), r * a.sin()];
                let l: f64 = zs.iter().zip(&ys).map(|(z, y)| 0.5 * ((z[0] * u[0] + z[1] * u[1]) - y).abs()).sum();
                best = best.min(l);
            }
        }
        assert!(expected - best <= (2.0 * t_max as f64).sqrt(), "{expected} - {best}");
    }

    proptest! {
        #[test]
        fn perceptron_rate_invariance(stream in prop::collection::vec((prop::collection::vec(-2.0..2.0f64, 3), any::<bool>()), 1..200),
                                      eta in 0.001..1000.0f64) {
            let mut a = Perceptron::new(3);
            let mut b = Perceptron::with_rate(3, eta).unwrap();
            for (z, pos) in &stream {
                let y = if *pos { 1.0 } else { -1.0 };
                prop_assert_eq!(a.step(z, y).unwrap(), b.step(z, y).unwrap());
            }
            prop_assert_eq!(a.mistakes(), b.mistakes());
        }

        #[test]
        fn randomized_probability_valid(stream in prop::collection::vec((prop::collection::vec(-0.7..0.7f64, 2), any::<bool>(), 0.0..1.0f64), 1..300)) {
            let mut c = RandomizedClassifier::new(2, 1.0).unwrap();
            for (z, pos, u) in &stream {
                let r = c.step_with(z, if *pos { 1.0 } else { -1.0 }, *u).unwrap();
                prop_assert!((0.0..=1.0).contains(&r.prob_positive));
                prop_assert!(norm2(&c.x()) <= 1.0 + 1e-12);
            }
        }
    }
}
