//! Error rates to couplings and temperature on the Nishimori sheet.
//!
//! The sheet is `exp(-2J/T) = p/(1-p)` and `exp(-2K/T) = q/(1-q)`. Only the
//! ratios `J/T` and `K/T` are fixed, so couplings are normalised to `K = 1`:
//!
//! ```text
//! J   = ln((1-p)/p) / ln((1-q)/q)
//! T_N = 2 / ln((1-q)/q)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Couplings;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NishimoriPoint<R> {
    pub p: R,
    pub q: R,
    pub j: R,
    pub k: R,
    pub temperature: R,
}

impl<R: Real> NishimoriPoint<R> {
    pub fn couplings(&self) -> Couplings<R> {
        Couplings { j: self.j, k: self.k }
    }

    /// Error rates implied by the couplings and temperature.
    pub fn recovered_rates(&self) -> (R, R) {
        let two = R::lit(2.0);
        let rate = |c: R| R::one() / (R::one() + (two * c / self.temperature).exp());
        (rate(self.j), rate(self.k))
    }
}

fn log_odds<R: Real>(x: R) -> R {
    ((R::one() - x) / x).ln()
}

fn check_rate<R: Real>(name: &'static str, x: R) -> Result<()> {
    let half = R::lit(0.5);
    if !(x >= R::zero() && x < half) {
        return Err(Error::ProbabilityOutOfRange {
            name,
            value: x.as_f64(),
        });
    }
    Ok(())
}

pub fn nishimori_point<R: Real>(p: R, q: R) -> Result<NishimoriPoint<R>> {
    check_rate("p", p)?;
    check_rate("q", q)?;
    if q == R::zero() {
        return Err(Error::PerfectMeasurements);
    }
    if p == R::zero() {
        return Err(Error::InfiniteCoupling);
    }
    let lq = log_odds(q);
    Ok(NishimoriPoint {
        p,
        q,
        j: log_odds(p) / lq,
        k: R::one(),
        temperature: R::lit(2.0) / lq,
    })
}

/// Nishimori temperature alone; defined for `p = 0` as long as `q > 0`.
pub fn nishimori_temperature<R: Real>(q: R) -> Result<R> {
    check_rate("q", q)?;
    if q == R::zero() {
        return Err(Error::PerfectMeasurements);
    }
    Ok(R::lit(2.0) / log_odds(q))
}

/// Points along `q = alpha * p`.
pub fn sheet_path<R: Real>(alpha: R, p_grid: &[R]) -> Result<Vec<NishimoriPoint<R>>> {
    if !(alpha > R::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidPath(format!("alpha must be positive, got {alpha}")));
    }
    p_grid
        .iter()
        .map(|&p| {
            let q = alpha * p;
            let open = |x: R| x > R::zero() && x < R::lit(0.5);
            if !open(p) || !open(q) {
                return Err(Error::InvalidPath(format!(
                    "rates p={p}, q={q} leave the open interval (0, 0.5)"
                )));
            }
            nishimori_point(p, q)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equal_rates_are_isotropic() {
        for p in [0.01, 0.03, 0.2, 0.45] {
            let point = nishimori_point(p, p).unwrap();
            assert_eq!(point.j, 1.0);
            assert_eq!(point.k, 1.0);
        }
    }

    #[test]
    fn closed_form_values() {
        let point = nishimori_point(0.03f64, 0.03).unwrap();
        assert_relative_eq!(point.temperature, 2.0 / (0.97f64 / 0.03).ln(), max_relative = 1e-15);
        assert_relative_eq!(point.temperature, 0.575_36, epsilon = 5e-6);

        let point = nishimori_point(0.02f64, 0.04).unwrap();
        assert_relative_eq!(point.j, 49f64.ln() / 24f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(point.j, 1.224_59, epsilon = 5e-6);
        assert_relative_eq!(point.temperature, 2.0 / 24f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(point.temperature, 0.629_32, epsilon = 5e-6);
    }

    #[test]
    fn paths() {
        let pts = sheet_path(1.0f64, &[0.02, 0.03]).unwrap();
        assert!(pts.iter().all(|p| p.j == 1.0 && p.k == 1.0));

        let pts = sheet_path(2.0f64, &[0.02]).unwrap();
        assert_relative_eq!(pts[0].q, 0.04);
        assert_relative_eq!(pts[0].j, 49f64.ln() / 24f64.ln(), max_relative = 1e-14);

        let pts = sheet_path(0.5f64, &[0.06]).unwrap();
        assert_relative_eq!(pts[0].q, 0.03);
        let expected = (0.94f64 / 0.06).ln() / (0.97f64 / 0.03).ln();
        assert_relative_eq!(pts[0].j, expected, max_relative = 1e-14);
        assert_relative_eq!(pts[0].j, 0.791_56, epsilon = 5e-5);

        assert!(sheet_path(2.0f64, &[0.3]).is_err());
        assert!(sheet_path(-1.0f64, &[0.1]).is_err());
        assert!(sheet_path(1.0f64, &[0.0]).is_err());
    }

    #[test]
    fn rejects_boundaries() {
        assert!(matches!(nishimori_point(0.1f64, 0.0), Err(Error::PerfectMeasurements)));
        assert!(matches!(nishimori_point(0.0f64, 0.1), Err(Error::InfiniteCoupling)));
        assert!(nishimori_point(0.5f64, 0.1).is_err());
        assert!(nishimori_point(0.1f64, 0.5).is_err());
        assert!(nishimori_temperature(0.1f64).is_ok());
    }

    #[test]
    fn single_precision_path() {
        let point = nishimori_point(0.02f32, 0.04f32).unwrap();
        assert!((point.j - 1.224_59).abs() < 1e-5);
    }

    #[test]
    fn monotonicity() {
        let qs: Vec<f64> = (1..100).map(|i| i as f64 * 0.005).collect();
        let temps: Vec<f64> = qs.iter().map(|&q| nishimori_point(0.1, q).unwrap().temperature).collect();
        assert!(temps.windows(2).all(|w| w[1] > w[0]));
        let js: Vec<f64> = qs.iter().map(|&p| nishimori_point(p, 0.1).unwrap().j).collect();
        assert!(js.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn recovered_rates_round_trip() {
        for i in 1..50 {
            for k in 1..50 {
                let (p, q) = (i as f64 * 0.01, k as f64 * 0.0099);
                let point = nishimori_point(p, q).unwrap();
                let (pr, qr) = point.recovered_rates();
                assert_relative_eq!(pr, p, max_relative = 1e-12);
                assert_relative_eq!(qr, q, max_relative = 1e-12);
            }
        }
    }
}
