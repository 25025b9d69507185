//! Transition temperature from the specific-heat peak or the Wilson-loop
//! skewness feature.

use serde::{Deserialize, Serialize};

use super::stats::{mean, std_dev};
use super::table::ObservableTable;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum grid points for either locator.
pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Vertex of a quadratic fit to the five points around the maximum of C(T).
    Peak,
    /// Steepest change of the smoothed |skewness| of the Wilson distribution.
    Skewness,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Peak => "peak",
            Method::Skewness => "skewness",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "peak" => Ok(Method::Peak),
            "skewness" => Ok(Method::Skewness),
            other => Err(format!("unknown locator '{other}' (expected peak or skewness)")),
        }
    }
}

/// Feature location on one curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Location<R: Real> {
    pub temperature: R,
    /// The feature sits at the edge of the grid or the fit is not a maximum.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TcEstimate<R: Real> {
    pub method: Method,
    pub tc: R,
    pub error: R,
    pub inconclusive: bool,
    /// Bootstrap replicates with a conclusive location.
    pub replicates_used: usize,
}

/// Least-squares parabola `a x² + b x + c`; returns `(a, b, c)`.
fn fit_parabola<R: Real>(x: &[R], y: &[R]) -> (R, R, R) {
    // Centre x for conditioning.
    let x0 = mean(x);
    let mut s = [R::zero(); 5];
    let mut t = [R::zero(); 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let d = xi - x0;
        let mut p = R::one();
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = *sk + p;
            if k < 3 {
                t[k] = t[k] + p * yi;
            }
            p = p * d;
        }
    }
    // Normal equations [[s4 s3 s2] [s3 s2 s1] [s2 s1 s0]] (a b c) = (t2 t1 t0).
    let m = [[s[4], s[3], s[2]], [s[3], s[2], s[1]], [s[2], s[1], s[0]]];
    let rhs = [t[2], t[1], t[0]];
    let det = |m: [[R; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    let solve = |col: usize| {
        let mut mm = m;
        for r in 0..3 {
            mm[r][col] = rhs[r];
        }
        det(mm) / d
    };
    let (a, b, c) = (solve(0), solve(1), solve(2));
    // Shift back: a(x-x0)² + b(x-x0) + c.
    (a, b - R::lit(2.0) * a * x0, a * x0 * x0 - b * x0 + c)
}

/// Vertex of the parabola through three points.
fn vertex3<R: Real>(x: [R; 3], y: [R; 3]) -> Option<R> {
    let (a, b, _) = fit_parabola(&x, &y);
    (a < R::zero()).then(|| -b / (R::lit(2.0) * a))
}

fn locate_peak<R: Real>(temps: &[R], values: &[R]) -> Location<R> {
    let n = temps.len();
    let imax = (0..n).fold(0, |best, i| if values[i] > values[best] { i } else { best });
    let lo = imax.saturating_sub(2).min(n - MIN_POINTS);
    let window = lo..lo + MIN_POINTS;
    let (a, b, _) = fit_parabola(&temps[window.clone()], &values[window.clone()]);
    let edge = imax < 2 || imax + 2 >= n;
    if !(a < R::zero()) {
        return Location {
            temperature: temps[imax],
            inconclusive: true,
        };
    }
    let vertex = -b / (R::lit(2.0) * a);
    let inside = vertex >= temps[lo] && vertex <= temps[lo + MIN_POINTS - 1];
    Location {
        temperature: if inside { vertex } else { temps[imax] },
        inconclusive: edge || !inside,
    }
}

fn locate_skewness<R: Real>(temps: &[R], values: &[Option<R>]) -> Result<Location<R>> {
    let (t, s): (Vec<R>, Vec<R>) = temps
        .iter()
        .zip(values)
        .filter_map(|(&t, v)| v.map(|v| (t, v.abs())))
        .unzip();
    let n = t.len();
    if n < MIN_POINTS {
        return Err(Error::TooFewValues {
            needed: MIN_POINTS,
            found: n,
        });
    }
    // Three-point moving average over interior points; the ends are dropped
    // rather than one-sidedly averaged, which would flatten edge slopes.
    let t = &t[1..n - 1];
    let smooth: Vec<R> = s.windows(3).map(mean).collect();
    // Finite differences at interval midpoints.
    let mid: Vec<R> = t.windows(2).map(|w| (w[0] + w[1]) / R::lit(2.0)).collect();
    let slope: Vec<R> = (0..t.len() - 1)
        .map(|i| ((smooth[i + 1] - smooth[i]) / (t[i + 1] - t[i])).abs())
        .collect();
    let k = (0..slope.len()).fold(0, |best, i| if slope[i] > slope[best] { i } else { best });
    if k == 0 || k + 1 == slope.len() {
        return Ok(Location {
            temperature: mid[k],
            inconclusive: true,
        });
    }
    let refined = vertex3([mid[k - 1], mid[k], mid[k + 1]], [slope[k - 1], slope[k], slope[k + 1]])
        .filter(|&v| v >= mid[k - 1] && v <= mid[k + 1])
        .unwrap_or(mid[k]);
    Ok(Location {
        temperature: refined,
        inconclusive: false,
    })
}

/// Locates the C(T) peak on a bare curve.
pub fn peak_location<R: Real>(temps: &[R], values: &[R]) -> Result<Location<R>> {
    check_grid(temps, values.len())?;
    Ok(locate_peak(temps, values))
}

/// Locates the skewness feature on a bare curve; undefined points are skipped.
pub fn skewness_location<R: Real>(temps: &[R], values: &[Option<R>]) -> Result<Location<R>> {
    check_grid(temps, values.len())?;
    locate_skewness(temps, values)
}

fn check_grid<R: Real>(temps: &[R], values: usize) -> Result<()> {
    if temps.len() != values {
        return Err(Error::ShapeMismatch {
            what: "observable curve",
            expected: temps.len(),
            found: values,
        });
    }
    if temps.len() < MIN_POINTS {
        return Err(Error::TooFewValues {
            needed: MIN_POINTS,
            found: temps.len(),
        });
    }
    if !temps.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidLadder("temperatures must be strictly increasing".into()));
    }
    Ok(())
}

/// Tc from a table, with the bootstrap spread of the locator over the
/// table's replicates as error bar.
///
/// The estimate is inconclusive when the central curve's feature is
/// inconclusive or fewer than half of the replicates locate it.
pub fn locate_tc<R: Real>(table: &ObservableTable<R>, method: Method) -> Result<TcEstimate<R>> {
    let temps = table.temperatures();
    let locate = |c: &[R], s: &[Option<R>]| match method {
        Method::Peak => peak_location(&temps, c),
        Method::Skewness => skewness_location(&temps, s),
    };
    let central = locate(&table.specific_heat(), &table.skewness())?;
    let located: Vec<R> = table
        .replicates
        .iter()
        .filter_map(|r| locate(&r.specific_heat, &r.skewness).ok())
        .filter(|l| !l.inconclusive)
        .map(|l| l.temperature)
        .collect();
    let enough = 2 * located.len() >= table.replicates.len() && located.len() >= 2;
    Ok(TcEstimate {
        method,
        tc: central.temperature,
        error: if located.len() >= 2 { std_dev(&located) } else { R::nan() },
        inconclusive: central.inconclusive || !enough,
        replicates_used: located.len(),
    })
}

/// Both locators side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TcPair<R: Real> {
    pub peak: TcEstimate<R>,
    pub skewness: TcEstimate<R>,
}

/// Agreement tolerance between the locators, in combined standard errors.
pub const LOCATOR_AGREEMENT_SIGMAS: f64 = 2.0;

impl<R: Real> TcPair<R> {
    pub fn of(table: &ObservableTable<R>) -> Result<Self> {
        Ok(Self {
            peak: locate_tc(table, Method::Peak)?,
            skewness: locate_tc(table, Method::Skewness)?,
        })
    }

    /// `|Tc_peak − Tc_skew| <= 2 sqrt(σ_peak² + σ_skew²)`.
    pub fn agree(&self) -> bool {
        let combined = (self.peak.error.powi(2) + self.skewness.error.powi(2)).sqrt();
        (self.peak.tc - self.skewness.tc).abs() <= R::lit(LOCATOR_AGREEMENT_SIGMAS) * combined
    }

    /// The C(T) estimate, flagged unless both locators are conclusive and agree.
    pub fn combined(&self) -> TcEstimate<R> {
        TcEstimate {
            inconclusive: self.peak.inconclusive || self.skewness.inconclusive || !self.agree(),
            ..self.peak
        }
    }
}
