//! Ordered/disordered verdicts on the Nishimori sheet and threshold scans.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::locate::TcEstimate;
use super::stats::std_dev;
use crate::error::{Error, Result};
use crate::geometry::Family;
use crate::nishimori::nishimori_temperature;
use crate::scalar::Real;
use crate::seed::chacha_seed;

/// Gap significance, in standard errors, for a definite verdict.
pub const VERDICT_SIGMAS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Ordered,
    Disordered,
    Marginal,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ordered => "ordered",
            Verdict::Disordered => "disordered",
            Verdict::Marginal => "marginal",
        }
    }
}

/// Tc of one system size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SizeTc<R: Real> {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub tc: TcEstimate<R>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VerdictReport<R: Real> {
    pub verdict: Verdict,
    /// `None` for the clean point, where no Nishimori temperature exists.
    pub nishimori_temperature: Option<R>,
    /// `Tc − T_N` per size, ordered by increasing size.
    pub gaps: Vec<(usize, usize, R, R)>,
    pub reason: String,
}

/// Whether `(p, q)` lies in the ordered phase: `Tc − T_N` must exceed
/// `2σ` at the largest size and not shrink significantly with size.
///
/// The clean point `p = q = 0` is ordered by definition. Any inconclusive
/// Tc makes the verdict marginal.
pub fn ordered_at_nishimori<R: Real>(p: R, q: R, sizes: &[SizeTc<R>]) -> Result<VerdictReport<R>> {
    if p == R::zero() && q == R::zero() {
        return Ok(VerdictReport {
            verdict: Verdict::Ordered,
            nishimori_temperature: None,
            gaps: Vec::new(),
            reason: "clean model: ordered by definition below Tc".into(),
        });
    }
    let t_n = nishimori_temperature(q)?;
    if sizes.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            found: sizes.len(),
        });
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_by_key(|s| (s.l, s.m));
    let gaps: Vec<(usize, usize, R, R)> = sorted.iter().map(|s| (s.l, s.m, s.tc.tc - t_n, s.tc.error)).collect();
    let report = |verdict, reason: String| VerdictReport {
        verdict,
        nishimori_temperature: Some(t_n),
        gaps: gaps.clone(),
        reason,
    };
    if let Some(s) = sorted.iter().find(|s| s.tc.inconclusive || !s.tc.error.is_finite()) {
        return Ok(report(
            Verdict::Marginal,
            format!("Tc at L={} M={} is inconclusive", s.l, s.m),
        ));
    }
    let k = R::lit(VERDICT_SIGMAS);
    let &(l, m, gap, err) = gaps.last().expect("at least two sizes");
    if gap < -k * err {
        return Ok(report(
            Verdict::Disordered,
            format!("Tc - T_N = {gap} below -{VERDICT_SIGMAS} sigma ({err}) at L={l} M={m}"),
        ));
    }
    if !(gap > k * err) {
        return Ok(report(
            Verdict::Marginal,
            format!("Tc - T_N = {gap} within {VERDICT_SIGMAS} sigma ({err}) at L={l} M={m}"),
        ));
    }
    for w in gaps.windows(2) {
        let (small, large) = (w[0], w[1]);
        let combined = (small.3 * small.3 + large.3 * large.3).sqrt();
        if small.2 - large.2 > k * combined {
            return Ok(report(
                Verdict::Marginal,
                format!(
                    "gap shrinks from {} (L={}) to {} (L={}) beyond {VERDICT_SIGMAS} sigma",
                    small.2, small.0, large.2, large.0
                ),
            ));
        }
    }
    Ok(report(
        Verdict::Ordered,
        format!("Tc - T_N = {gap} above {VERDICT_SIGMAS} sigma ({err}) at L={l} M={m} and not shrinking"),
    ))
}

/// Tc against T_N at one point of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScanPoint<R: Real> {
    pub p: R,
    pub q: R,
    pub tc: R,
    pub tc_error: R,
    pub nishimori_temperature: R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ThresholdEstimate<R: Real> {
    pub family: Family,
    pub alpha: R,
    pub p_star: R,
    pub p_star_error: R,
    /// Points sorted by `p`.
    pub points: Vec<ScanPoint<R>>,
    /// Perturbation replicates that bracketed a crossing.
    pub replicates_used: usize,
}

/// First `+ → −` sign change of `Tc − T_N` along increasing `p`, linearly
/// interpolated.
fn crossing<R: Real>(p: &[R], d: &[R]) -> Option<R> {
    (0..p.len() - 1).find_map(|i| {
        let (d0, d1) = (d[i], d[i + 1]);
        if d0 >= R::zero() && d1 < R::zero() {
            Some(p[i] + d0 * (p[i + 1] - p[i]) / (d0 - d1))
        } else {
            None
        }
    })
}

/// Crossing rate `p*` where `Tc(p) − T_N(p)` changes sign along a path.
///
/// The error is the spread of `p*` when every Tc is redrawn from a normal
/// distribution with its standard error (`resamples` times, seeded). Points
/// are sorted by `p` first, so the result does not depend on input order.
pub fn threshold_scan<R: Real>(
    family: Family,
    alpha: R,
    points: &[ScanPoint<R>],
    resamples: usize,
    seed: u64,
) -> Result<ThresholdEstimate<R>> {
    if points.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            found: points.len(),
        });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.p.partial_cmp(&b.p).expect("finite rates"));
    if sorted.windows(2).any(|w| w[0].p == w[1].p) {
        return Err(Error::InvalidPath("duplicate p on the scan grid".into()));
    }
    let p: Vec<R> = sorted.iter().map(|s| s.p).collect();
    let d: Vec<R> = sorted.iter().map(|s| s.tc - s.nishimori_temperature).collect();
    let p_star = crossing(&p, &d).ok_or_else(|| Error::NoCrossing {
        hint: if d.iter().all(|&x| x >= R::zero()) {
            "ordered at every grid point; extend the grid to larger p".into()
        } else if d.iter().all(|&x| x < R::zero()) {
            "disordered at every grid point; extend the grid to smaller p".into()
        } else {
            "Tc - T_N rises with p; check the Tc estimates".into()
        },
    })?;
    let mut rng = ChaCha8Rng::from_seed(chacha_seed(&[seed, 0x5CA4]));
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let dd: Vec<R> = sorted
            .iter()
            .map(|s| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s.tc + R::lit(z) * s.tc_error - s.nishimori_temperature
            })
            .collect();
        if let Some(x) = crossing(&p, &dd) {
            draws.push(x);
        }
    }
    Ok(ThresholdEstimate {
        family,
        alpha,
        p_star,
        p_star_error: std_dev(&draws),
        points: sorted,
        replicates_used: draws.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::locate::Method;
    use approx::assert_relative_eq;

    fn tc(value: f64, error: f64) -> TcEstimate<f64> {
        TcEstimate {
            method: Method::Peak,
            tc: value,
            error,
            inconclusive: false,
            replicates_used: 1000,
        }
    }

    fn sizes(a: TcEstimate<f64>, b: TcEstimate<f64>) -> Vec<SizeTc<f64>> {
        vec![SizeTc { l: 6, m: 6, tc: b }, SizeTc { l: 4, m: 4, tc: a }]
    }

    #[test]
    fn verdict_examples() {
        // T_N(0.03) = 0.5754.
        let v = ordered_at_nishimori(0.03, 0.03, &sizes(tc(0.70, 0.02), tc(0.70, 0.02))).unwrap();
        assert_eq!(v.verdict, Verdict::Ordered);
        let v = ordered_at_nishimori(0.03, 0.03, &sizes(tc(0.57, 0.02), tc(0.57, 0.02))).unwrap();
        assert_eq!(v.verdict, Verdict::Marginal);
        let v = ordered_at_nishimori(0.03, 0.03, &sizes(tc(0.45, 0.02), tc(0.45, 0.02))).unwrap();
        assert_eq!(v.verdict, Verdict::Disordered);
        let v = ordered_at_nishimori(0.0, 0.0, &[]).unwrap();
        assert_eq!(v.verdict, Verdict::Ordered);
    }

    #[test]
    fn shrinking_gap_is_marginal() {
        let v = ordered_at_nishimori(0.03, 0.03, &sizes(tc(0.90, 0.01), tc(0.66, 0.01))).unwrap();
        assert_eq!(v.verdict, Verdict::Marginal);
        assert_eq!(v.gaps[0].0, 4);
        // A statistically insignificant decrease is tolerated.
        let v = ordered_at_nishimori(0.03, 0.03, &sizes(tc(0.71, 0.02), tc(0.70, 0.02))).unwrap();
        assert_eq!(v.verdict, Verdict::Ordered);
    }

    #[test]
    fn inconclusive_propagates() {
        let mut bad = tc(0.8, 0.01);
        bad.inconclusive = true;
        let v = ordered_at_nishimori(0.03, 0.03, &sizes(bad, tc(0.8, 0.01))).unwrap();
        assert_eq!(v.verdict, Verdict::Marginal);
        assert!(ordered_at_nishimori(0.03, 0.03, &[SizeTc { l: 4, m: 4, tc: bad }]).is_err());
        assert!(ordered_at_nishimori(0.03, 0.0, &sizes(bad, bad)).is_err());
    }

    fn synthetic(grid: &[f64]) -> Vec<ScanPoint<f64>> {
        grid.iter()
            .map(|&p| ScanPoint {
                p,
                q: p,
                tc: 0.7 - 10.0 * (p - 0.04),
                tc_error: 0.01,
                nishimori_temperature: 0.575,
            })
            .collect()
    }

    #[test]
    fn synthetic_crossing() {
        let est = threshold_scan(Family::Toric, 1.0, &synthetic(&[0.02, 0.03, 0.04, 0.05, 0.06, 0.07]), 1000, 1)
            .unwrap();
        assert_relative_eq!(est.p_star, 0.0525, max_relative = 1e-12);
        // Slope 10 per unit p: dp* ≈ 0.01 / 10 / sqrt(2)-ish.
        assert!(est.p_star_error > 0.0002 && est.p_star_error < 0.002, "{}", est.p_star_error);
    }

    #[test]
    fn scan_is_order_invariant() {
        let grid = [0.02, 0.03, 0.04, 0.05, 0.06, 0.07];
        let a = threshold_scan(Family::Color, 0.5, &synthetic(&grid), 300, 7).unwrap();
        let mut shuffled = synthetic(&grid);
        shuffled.reverse();
        shuffled.swap(1, 4);
        let b = threshold_scan(Family::Color, 0.5, &shuffled, 300, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bracket_failures() {
        let err = threshold_scan(Family::Toric, 1.0, &synthetic(&[0.01, 0.02]), 10, 1).unwrap_err();
        assert!(err.to_string().contains("larger p"), "{err}");
        let err = threshold_scan(Family::Toric, 1.0, &synthetic(&[0.08, 0.09]), 10, 1).unwrap_err();
        assert!(err.to_string().contains("smaller p"), "{err}");
    }
}
