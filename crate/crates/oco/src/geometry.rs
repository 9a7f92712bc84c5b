//! Feasible sets and projections, Bregman divergences, and the Lambert W based
//! special functions used by the parameter-free bounds.

use crate::error::{check_dim, check_finite, check_positive, OcoError, Result};
use crate::vecops::{dot, norm2, norm_p};

// ---------------------------------------------------------------------------
// Feasible sets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    All,
    L2Ball { radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Simplex { dim: usize },
}

/// Slack allowed on the simplex sum when deciding that a point is already feasible.
fn simplex_slack(d: usize) -> f64 {
    4.0 * d as f64 * f64::EPSILON
}

impl FeasibleSet {
    pub fn ball(radius: f64) -> Result<Self> {
        let s = FeasibleSet::L2Ball { radius };
        s.validate()?;
        Ok(s)
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let s = FeasibleSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    /// The interval `[lo, hi]` as a one-dimensional box.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        let s = FeasibleSet::Simplex { dim };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::All => Ok(()),
            FeasibleSet::L2Ball { radius } => check_positive("ball radius", *radius),
            FeasibleSet::Box { lo, hi } => {
                check_dim(lo.len(), hi.len())?;
                check_finite("box bounds", lo)?;
                check_finite("box bounds", hi)?;
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(OcoError::InvalidParameter("box with lo > hi".into()));
                }
                Ok(())
            }
            FeasibleSet::Simplex { dim } => {
                if *dim < 2 {
                    return Err(OcoError::InvalidParameter("simplex needs dimension >= 2".into()));
                }
                Ok(())
            }
        }
    }

    /// Dimension fixed by the set, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            FeasibleSet::Box { lo, .. } => Some(lo.len()),
            FeasibleSet::Simplex { dim } => Some(*dim),
            _ => None,
        }
    }

    /// Euclidean diameter, infinite for the whole space.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::All => f64::INFINITY,
            FeasibleSet::L2Ball { radius } => 2.0 * radius,
            FeasibleSet::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
            FeasibleSet::Simplex { .. } => 2f64.sqrt(),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::All => true,
            FeasibleSet::L2Ball { radius } => norm2(x) <= radius * (1.0 + tol),
            FeasibleSet::Box { lo, hi } => {
                x.len() == lo.len() && x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= a - tol && *v <= b + tol)
            }
            FeasibleSet::Simplex { dim } => {
                x.len() == *dim && x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol.max(simplex_slack(*dim))
            }
        }
    }
}

/// Euclidean projection of `v` onto `set`.
pub fn project(set: &FeasibleSet, v: &[f64]) -> Result<Vec<f64>> {
    set.validate()?;
    if let Some(d) = set.dim() {
        check_dim(d, v.len())?;
    }
    check_finite("vector to project", v)?;
    Ok(match set {
        FeasibleSet::All => v.to_vec(),
        FeasibleSet::L2Ball { radius } => project_ball(*radius, v),
        FeasibleSet::Box { lo, hi } => v.iter().zip(lo.iter().zip(hi)).map(|(x, (a, b))| x.max(*a).min(*b)).collect(),
        FeasibleSet::Simplex { .. } => project_simplex(v),
    })
}

fn project_ball(radius: f64, v: &[f64]) -> Vec<f64> {
    let n = norm2(v);
    if n <= radius {
        return v.to_vec();
    }
    let mut out: Vec<f64> = v.iter().map(|x| x * (radius / n)).collect();
    // rounding can leave the rescaled point a few ulps outside; shrink until it is inside
    // so that projecting again is the identity
    while norm2(&out) > radius {
        for o in out.iter_mut() {
            *o *= 1.0 - f64::EPSILON;
        }
    }
    out
}

/// Sort-then-threshold projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    if v.iter().all(|x| *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= simplex_slack(d) {
        return v.to_vec();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            tau = candidate;
        }
    }
    let out: Vec<f64> = v.iter().map(|x| (x - tau).max(0.0)).collect();
    // cancellation in x - tau can push the sum past the membership slack for large inputs
    let total: f64 = out.iter().sum();
    if (total - 1.0).abs() <= simplex_slack(d) {
        out
    } else {
        out.iter().map(|x| x / total).collect()
    }
}

// ---------------------------------------------------------------------------
// Bregman divergences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BregmanKind {
    SquaredL2,
    NegativeEntropy,
    /// `psi(x) = 0.5 ||x||_p^2` with `p` in `(1, 2]`.
    HalfPNormSq { p: f64 },
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(OcoError::InvalidParameter(format!("p must lie in (1, 2], got {p}")))
    }
}

/// Gradient of `0.5 ||x||_p^2`: `sign(x_j) |x_j|^(p-1) ||x||_p^(2-p)`, zero at the origin.
///
/// The same map with the dual exponent `q` inverts it.
pub fn pnorm_mirror_map(x: &[f64], p: f64) -> Vec<f64> {
    let n = norm_p(x, p);
    if n == 0.0 {
        return vec![0.0; x.len()];
    }
    let f = n.powf(2.0 - p);
    x.iter().map(|v| v.signum() * v.abs().powf(p - 1.0) * f).collect()
}

/// `B_psi(x; y) = psi(x) - psi(y) - <grad psi(y), x - y>`.
pub fn bregman(kind: BregmanKind, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    check_finite("bregman argument", x)?;
    check_finite("bregman argument", y)?;
    match kind {
        BregmanKind::SquaredL2 => Ok(0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()),
        BregmanKind::NegativeEntropy => {
            if y.iter().any(|v| *v <= 0.0) {
                return Err(OcoError::Domain("negative entropy needs a strictly positive second argument".into()));
            }
            if x.iter().any(|v| *v < 0.0) {
                return Err(OcoError::Domain("negative entropy needs a nonnegative first argument".into()));
            }
            let mut s = 0.0;
            for (a, b) in x.iter().zip(y) {
                if *a > 0.0 {
                    s += a * (a / b).ln();
                }
                s += b - a;
            }
            Ok(s)
        }
        BregmanKind::HalfPNormSq { p } => {
            check_p(p)?;
            let psi = |v: &[f64]| 0.5 * norm_p(v, p).powi(2);
            let grad = pnorm_mirror_map(y, p);
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            Ok(psi(x) - psi(y) - dot(&grad, &diff))
        }
    }
}

/// Kullback-Leibler divergence between two distributions, with `0 ln 0 = 0`.
pub fn kl_divergence(u: &[f64], pi: &[f64]) -> Result<f64> {
    bregman(BregmanKind::NegativeEntropy, u, pi)
}

// ---------------------------------------------------------------------------
// Lambert W and the conjugate of b exp(x^2 / 2a)
// ---------------------------------------------------------------------------

/// Constant of the lower sandwich `LAMBERT_LOWER ln(1 + x) <= W(x)`.
pub const LAMBERT_LOWER: f64 = 0.6321;

/// Principal branch of the Lambert function on `[0, inf)`: the `w >= 0` with `w e^w = x`.
pub fn lambert_w(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(OcoError::Domain(format!("lambert_w needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let upper = x.ln_1p();
    let lower = LAMBERT_LOWER * upper;
    let tol = 1e-12 * x.max(1.0);
    let residual = |w: f64| w * w.exp() - x;

    let mut w = upper;
    for _ in 0..50 {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= tol * 0.01 {
            break;
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        if next == w {
            break;
        }
        w = next;
    }
    if w.is_finite() && w >= lower && w <= upper && residual(w).abs() <= tol {
        return Ok(w);
    }

    // guaranteed bracket from the sandwich bounds
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let w = if residual(lo).abs() <= residual(hi).abs() { lo } else { hi };
    if residual(w).abs() > tol {
        return Err(OcoError::Convergence(format!("lambert_w({x}) residual {}", residual(w))));
    }
    Ok(w)
}

/// Fenchel conjugate of `f(x) = b exp(x^2 / (2a))` evaluated at `theta`.
pub fn conj_exp_square(theta: f64, a: f64, b: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    if !theta.is_finite() {
        return Err(OcoError::NonFinite("theta".into()));
    }
    if theta == 0.0 {
        return Ok(-b);
    }
    let w = lambert_w(a * theta * theta / (b * b))?;
    Ok(a.sqrt() * theta.abs() * w.sqrt() - b * (0.5 * w).exp())
}

/// The closed-form upper bound `sqrt(a) |theta| sqrt(ln(a theta^2 / b^2 + 1)) - b`.
pub fn conj_exp_square_upper(theta: f64, a: f64, b: f64) -> f64 {
    a.sqrt() * theta.abs() * (a * theta * theta / (b * b)).ln_1p().sqrt() - b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn projection_examples() {
        let s = FeasibleSet::simplex(3).unwrap();
        assert_eq!(project(&s, &[0.2, 0.3, 0.5]).unwrap(), vec![0.2, 0.3, 0.5]);
        let s2 = FeasibleSet::simplex(2).unwrap();
        assert!(close(&project(&s2, &[0.7, 0.6]).unwrap(), &[0.55, 0.45], 1e-12));
        let b = FeasibleSet::ball(1.0).unwrap();
        assert!(close(&project(&b, &[3.0, 4.0]).unwrap(), &[0.6, 0.8], 1e-12));
    }

    #[test]
    fn water_filling_grid_oracle() {
        // independent oracle: scan tau on a 1e-6 grid for sum max(v - tau, 0) = 1
        let v = [0.7, 0.6];
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..2_000_000 {
            let tau = -1.0 + k as f64 * 1e-6;
            let s: f64 = v.iter().map(|x| (x - tau).max(0.0)).sum();
            if (s - 1.0).abs() < best.0 {
                best = ((s - 1.0).abs(), tau);
            }
        }
        let expect: Vec<f64> = v.iter().map(|x| (x - best.1).max(0.0)).collect();
        let got = project(&FeasibleSet::simplex(2).unwrap(), &v).unwrap();
        assert!(close(&got, &expect, 2e-6));
    }

    #[test]
    fn projection_errors() {
        assert!(project(&FeasibleSet::simplex(3).unwrap(), &[1.0, 2.0]).is_err());
        let bad = FeasibleSet::Box { lo: vec![1.0], hi: vec![0.0] };
        assert!(project(&bad, &[0.5]).is_err());
        assert!(FeasibleSet::simplex(1).is_err());
        assert!(FeasibleSet::ball(0.0).is_err());
    }

    #[test]
    fn bregman_examples() {
        assert_eq!(bregman(BregmanKind::SquaredL2, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5);
        assert_eq!(bregman(BregmanKind::NegativeEntropy, &[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let v = bregman(BregmanKind::NegativeEntropy, &[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            bregman(BregmanKind::NegativeEntropy, &[0.5, 0.5], &[1.0, 0.0]),
            Err(OcoError::Domain(_))
        ));
        assert!(bregman(BregmanKind::HalfPNormSq { p: 2.5 }, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn lambert_examples() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-12);
        assert!(lambert_w(-1e-3).is_err());
    }

    #[test]
    fn lambert_one_matches_bisection_oracle() {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let w = lambert_w(1.0).unwrap();
        assert!((w - lo).abs() < 1e-12);
        assert!((w - 0.5671432904).abs() < 1e-10);
    }

    #[test]
    fn lambert_sandwich_log_spaced() {
        for i in 0..1000 {
            let x = 10f64.powf(-8.0 + 16.0 * i as f64 / 999.0);
            let w = lambert_w(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12 * x.max(1.0), "residual at {x}");
            let up = x.ln_1p();
            assert!(w <= up && w >= LAMBERT_LOWER * up, "sandwich at {x}");
        }
    }

    #[test]
    fn conj_examples() {
        assert_eq!(conj_exp_square(0.0, 1.0, 1.0).unwrap(), -1.0);
        let v = conj_exp_square(1.0, 1.0, 1.0).unwrap();
        // grid maximization of theta x - exp(x^2 / 2)
        let mut best = f64::NEG_INFINITY;
        for k in 0..=400_000 {
            let x = -2.0 + k as f64 * 1e-5;
            best = best.max(x - (0.5 * x * x).exp());
        }
        assert!((v - best).abs() < 1e-8);
        assert!((v + 0.5747).abs() < 1e-4);
        let w = lambert_w(1.0).unwrap();
        assert!((v - (w.sqrt() - 1.0 / w.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn conj_grid_oracle_general_parameters() {
        for &(theta, a, b) in &[(2.5, 3.0, 0.5), (-1.2, 0.7, 2.0), (0.01, 1.0, 1.0)] {
            let v = conj_exp_square(theta, a, b).unwrap();
            let mut best = f64::NEG_INFINITY;
            for k in 0..=200_000 {
                let x = -10.0 + k as f64 * 1e-4;
                best = best.max(theta * x - b * (x * x / (2.0 * a)).exp());
            }
            assert!((v - best).abs() < 1e-6, "theta {theta}: {v} vs {best}");
            assert!(v <= conj_exp_square_upper(theta, a, b) + 1e-12);
        }
    }

    fn set_strategy() -> impl Strategy<Value = FeasibleSet> {
        prop_oneof![
            Just(FeasibleSet::All),
            (0.1..5.0f64).prop_map(|r| FeasibleSet::L2Ball { radius: r }),
            prop::collection::vec((-3.0..0.0f64, 0.0..3.0f64), 3).prop_map(|b| FeasibleSet::Box {
                lo: b.iter().map(|p| p.0).collect(),
                hi: b.iter().map(|p| p.1).collect()
            }),
            Just(FeasibleSet::Simplex { dim: 3 }),
        ]
    }

    fn point_in(set: &FeasibleSet, raw: &[f64]) -> Vec<f64> {
        project(set, raw).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn projection_is_idempotent(set in set_strategy(), v in prop::collection::vec(-10.0..10.0f64, 3)) {
            let p = project(&set, &v).unwrap();
            prop_assert!(set.contains(&p, 1e-12));
            prop_assert_eq!(project(&set, &p).unwrap(), p);
        }

        #[test]
        fn projection_contracts(set in set_strategy(), v in prop::collection::vec(-10.0..10.0f64, 3),
                                raw in prop::collection::vec(-10.0..10.0f64, 3)) {
            let y = point_in(&set, &raw);
            let p = project(&set, &v).unwrap();
            let lhs = norm2(&crate::vecops::sub(&p, &y));
            let rhs = norm2(&crate::vecops::sub(&v, &y));
            prop_assert!(rhs - lhs >= -1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn pnorm_bregman_strong_convexity(p in 1.05..2.0f64,
                                          x in prop::collection::vec(-3.0..3.0f64, 4),
                                          y in prop::collection::vec(-3.0..3.0f64, 4)) {
            let b = bregman(BregmanKind::HalfPNormSq { p }, &x, &y).unwrap();
            let dist = norm_p(&crate::vecops::sub(&x, &y), p);
            prop_assert!(b >= 0.5 * (p - 1.0) * dist * dist - 1e-9);
        }

        #[test]
        fn bregman_nonnegative(x in prop::collection::vec(0.01..3.0f64, 4), y in prop::collection::vec(0.01..3.0f64, 4)) {
            for kind in [BregmanKind::SquaredL2, BregmanKind::NegativeEntropy, BregmanKind::HalfPNormSq { p: 1.5 }] {
                prop_assert!(bregman(kind, &x, &y).unwrap() >= -1e-12);
            }
        }
    }

    fn brute_force_simplex(v: &[f64]) -> Vec<f64> {
        let n = 1000;
        let mut best = (f64::INFINITY, vec![]);
        let d = v.len();
        for i in 0..=n {
            let a = i as f64 / n as f64;
            if d == 2 {
                let x = [a, 1.0 - a];
                let e = (x[0] - v[0]).powi(2) + (x[1] - v[1]).powi(2);
                if e < best.0 {
                    best = (e, x.to_vec());
                }
            } else {
                for j in 0..=(n - i) {
                    let b = j as f64 / n as f64;
                    let x = [a, b, 1.0 - a - b];
                    let e: f64 = x.iter().zip(v).map(|(p, q)| (p - q).powi(2)).sum();
                    if e < best.0 {
                        best = (e, x.to_vec());
                    }
                }
            }
        }
        best.1
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn simplex_matches_grid_oracle(v in prop::collection::vec(-1.5..1.5f64, 2..=3)) {
            let set = FeasibleSet::simplex(v.len()).unwrap();
            let p = project(&set, &v).unwrap();
            let b = brute_force_simplex(&v);
            prop_assert!(close(&p, &b, 2e-3), "{:?} vs {:?}", p, b);
        }
    }
}
