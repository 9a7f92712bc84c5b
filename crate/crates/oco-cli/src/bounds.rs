//! Closed-form regret bounds evaluated at every prefix length.

use oco::bandit::{etc_bound, exp3_bound, tsallis_bound, ucb_bound};

use crate::config::BoundName;
use crate::error::CliError;

/// Quantities a bound may need. Gradient-driven bounds read `gradients`, one per round.
#[derive(Debug, Clone, Default)]
pub struct BoundMeta {
    pub horizon: usize,
    pub dim: usize,
    pub diameter: Option<f64>,
    pub lipschitz: Option<f64>,
    /// Per-coordinate widths `D_i` of a box.
    pub widths: Option<Vec<f64>>,
    pub coef: Option<f64>,
    pub linf: Option<f64>,
    /// `KL(u; prior)` of the competitor.
    pub kl: Option<f64>,
    pub gaps: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub gradients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub values: Vec<f64>,
    /// Whether the bound holds at every prefix or only at the horizon it was tuned for.
    pub anytime: bool,
}

fn need<T: Clone>(field: &Option<T>, name: &str, bound: BoundName) -> Result<T, CliError> {
    field.clone().ok_or_else(|| CliError::config(format!("bound {bound:?} needs `{name}`")))
}

fn gradients(meta: &BoundMeta, bound: BoundName) -> Result<&[Vec<f64>], CliError> {
    if meta.gradients.len() != meta.horizon {
        return Err(CliError::config(format!(
            "bound {bound:?} needs one gradient per round ({} of {})",
            meta.gradients.len(),
            meta.horizon
        )));
    }
    Ok(&meta.gradients)
}

fn per_round(horizon: usize, anytime: bool, f: impl Fn(usize) -> f64) -> BoundCurve {
    BoundCurve { values: (1..=horizon).map(f).collect(), anytime }
}

/// Running sums of `f(g_t)`.
fn running(gs: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut acc = 0.0;
    gs.iter()
        .map(|g| {
            acc += f(g);
            acc
        })
        .collect()
}

/// The bound curve of `bound`, or `None` for [`BoundName::None`].
pub fn bound_curve(bound: BoundName, meta: &BoundMeta) -> Result<Option<BoundCurve>, CliError> {
    let t_max = meta.horizon;
    let d = meta.dim as f64;
    let curve = match bound {
        BoundName::None => return Ok(None),
        BoundName::OsdDecaying => {
            let (dia, lip) = (need(&meta.diameter, "diameter", bound)?, need(&meta.lipschitz, "lipschitz", bound)?);
            per_round(t_max, true, |t| 1.5 * dia * lip * (t as f64).sqrt())
        }
        BoundName::SqrtT => {
            let c = need(&meta.coef, "bound_coef", bound)?;
            per_round(t_max, true, |t| c * (t as f64).sqrt())
        }
        BoundName::AdaptiveGlobal => {
            let dia = need(&meta.diameter, "diameter", bound)?;
            let sq = running(gradients(meta, bound)?, |g| g.iter().map(|v| v * v).sum());
            BoundCurve { values: sq.iter().map(|s| 2f64.sqrt() * dia * s.sqrt()).collect(), anytime: true }
        }
        BoundName::Adagrad => {
            let widths = need(&meta.widths, "box widths", bound)?;
            let gs = gradients(meta, bound)?;
            let mut per_coord = vec![0.0; widths.len()];
            let values = gs
                .iter()
                .map(|g| {
                    for (acc, v) in per_coord.iter_mut().zip(g) {
                        *acc += v * v;
                    }
                    widths.iter().zip(&per_coord).map(|(w, s)| 2f64.sqrt() * w * s.sqrt()).sum()
                })
                .collect();
            BoundCurve { values, anytime: true }
        }
        BoundName::Eg => per_round(t_max, false, |t| 0.5 * 2f64.sqrt() * (t as f64 * d.ln()).sqrt()),
        BoundName::Adahedge => {
            let sq = running(gradients(meta, bound)?, |g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())).powi(2));
            BoundCurve { values: sq.iter().map(|s| 2.0 * ((4.0 + d.ln()) * s).sqrt()).collect(), anytime: true }
        }
        BoundName::FtlGuessing => per_round(t_max, true, |t| 4.0 + 4.0 * (t as f64).ln()),
        BoundName::Experts => {
            let kl = need(&meta.kl, "kl", bound)?;
            per_round(t_max, false, |t| (4.0 * t as f64 * (kl + 0.5 * 2f64.ln())).sqrt())
        }
        BoundName::Exp3 => {
            let linf = need(&meta.linf, "linf", bound)?;
            per_round(t_max, false, |t| exp3_bound(meta.dim, t, linf))
        }
        BoundName::Tsallis => per_round(t_max, false, |t| tsallis_bound(meta.dim, t)),
        BoundName::Ucb => {
            let (alpha, gaps) = (need(&meta.alpha, "alpha", bound)?, need(&meta.gaps, "gaps", bound)?);
            per_round(t_max, false, |t| ucb_bound(alpha, &gaps, t))
        }
        BoundName::Etc => {
            let gaps = need(&meta.gaps, "gaps", bound)?;
            let gap = gaps.iter().copied().filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
            if gaps.len() != 2 || !gap.is_finite() {
                return Err(CliError::config("the etc bound needs two arms with a positive gap"));
            }
            per_round(t_max, false, |t| etc_bound(t, gap))
        }
    };
    Ok(Some(curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adagrad_zero_gradients_give_zero_curve() {
        let meta = BoundMeta { horizon: 5, dim: 3, widths: Some(vec![2.0; 3]), gradients: vec![vec![0.0; 3]; 5], ..Default::default() };
        let curve = bound_curve(BoundName::Adagrad, &meta).unwrap().unwrap();
        assert_eq!(curve.values, vec![0.0; 5]);
        assert!(curve.anytime);
    }

    #[test]
    fn ucb_curve_matches_closed_form() {
        let meta = BoundMeta { horizon: 10_000, dim: 2, alpha: Some(3.0), gaps: Some(vec![0.0, 0.5]), ..Default::default() };
        let curve = bound_curve(BoundName::Ucb, &meta).unwrap().unwrap();
        let expected = 3.0 * 0.5 + 48.0 * 10_000f64.ln();
        assert!((curve.values[9999] - expected).abs() < 1e-9);
        assert!((curve.values[9999] - 443.6).abs() < 0.1);
    }

    #[test]
    fn eg_curve_at_two_thousand_rounds() {
        let meta = BoundMeta { horizon: 2000, dim: 10, ..Default::default() };
        let curve = bound_curve(BoundName::Eg, &meta).unwrap().unwrap();
        let expected = (2000.0 * 10f64.ln() / 2.0).sqrt();
        assert!((curve.values[1999] - expected).abs() < 1e-9);
        assert!((curve.values[1999] - 47.96).abs() < 0.05);
        assert!(!curve.anytime);
    }

    #[test]
    fn adaptive_and_adahedge_follow_gradients() {
        let gs = vec![vec![3.0, 4.0], vec![0.0, -1.0]];
        let meta = BoundMeta { horizon: 2, dim: 2, diameter: Some(2.0), gradients: gs, ..Default::default() };
        let ag = bound_curve(BoundName::AdaptiveGlobal, &meta).unwrap().unwrap();
        assert!((ag.values[0] - 2f64.sqrt() * 2.0 * 5.0).abs() < 1e-12);
        assert!((ag.values[1] - 2f64.sqrt() * 2.0 * 26f64.sqrt()).abs() < 1e-12);
        let ah = bound_curve(BoundName::Adahedge, &meta).unwrap().unwrap();
        assert!((ah.values[1] - 2.0 * ((4.0 + 2f64.ln()) * 17.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn missing_metadata_is_an_error() {
        let meta = BoundMeta { horizon: 3, dim: 2, ..Default::default() };
        assert!(bound_curve(BoundName::OsdDecaying, &meta).is_err());
        assert!(bound_curve(BoundName::Ucb, &meta).is_err());
        assert!(bound_curve(BoundName::AdaptiveGlobal, &BoundMeta { diameter: Some(1.0), ..meta.clone() }).is_err());
        assert!(bound_curve(BoundName::None, &meta).unwrap().is_none());
        let ftl = bound_curve(BoundName::FtlGuessing, &meta).unwrap().unwrap();
        assert_eq!(ftl.values[0], 4.0);
    }
}
