//! Moments, skewness and the bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::chacha_seed;

/// Bootstrap resamples used for every error bar unless configured otherwise.
pub const DEFAULT_RESAMPLES: usize = 1000;

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Estimate<R: Real> {
    pub value: R,
    pub error: R,
}

impl<R: Real> Estimate<R> {
    pub fn new(value: R, error: R) -> Self {
        Self { value, error }
    }
}

pub fn mean<R: Real>(values: &[R]) -> R {
    values.iter().copied().sum::<R>() / R::from_usize_lossy(values.len())
}

/// Sample standard deviation (`n - 1` denominator); zero for fewer than two values.
pub fn std_dev<R: Real>(values: &[R]) -> R {
    if values.len() < 2 {
        return R::zero();
    }
    let m = mean(values);
    let ss = values.iter().map(|&v| (v - m) * (v - m)).sum::<R>();
    (ss / R::from_usize_lossy(values.len() - 1)).sqrt()
}

/// Population skewness `m3 / m2^(3/2)` from raw moments `E[x]`, `E[x²]`,
/// `E[x³]`. `None` when the variance vanishes.
pub fn skewness_from_moments<R: Real>(m1: R, m2: R, m3: R) -> Option<R> {
    let two = R::lit(2.0);
    let three = R::lit(3.0);
    let var = m2 - m1 * m1;
    // Relative cutoff: raw moments of ±1-bounded data carry rounding of order eps.
    if !(var > R::epsilon() * R::lit(16.0) * m2.abs().max(R::one())) {
        return None;
    }
    let third = m3 - three * m1 * m2 + two * m1 * m1 * m1;
    Some(third / var.powf(R::lit(1.5)))
}

/// Population skewness of a sample. `Ok(None)` when all values are equal.
pub fn skewness<R: Real>(values: &[R]) -> Result<Option<R>> {
    if values.len() < 3 {
        return Err(Error::TooFewValues {
            needed: 3,
            found: values.len(),
        });
    }
    let m = mean(values);
    let n = R::from_usize_lossy(values.len());
    let m2 = values.iter().map(|&v| (v - m).powi(2)).sum::<R>() / n;
    let m3 = values.iter().map(|&v| (v - m).powi(3)).sum::<R>() / n;
    if m2 == R::zero() {
        return Ok(None);
    }
    Ok(Some(m3 / m2.powf(R::lit(1.5))))
}

/// Draws `resamples` index multisets of size `n` (with replacement) and maps
/// each through `statistic`. Deterministic in `seed`.
pub fn bootstrap<T, F>(n: usize, resamples: usize, seed: u64, mut statistic: F) -> Vec<T>
where
    F: FnMut(&[usize]) -> T,
{
    let mut rng = ChaCha8Rng::from_seed(chacha_seed(&[seed, 0xB007]));
    let mut idx = vec![0usize; n];
    (0..resamples)
        .map(|_| {
            for slot in idx.iter_mut() {
                *slot = rng.gen_range(0..n);
            }
            statistic(&idx)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn skewness_examples() {
        let sym: Vec<f64> = [-1.0, 1.0].repeat(10);
        assert_eq!(skewness(&sym).unwrap(), Some(0.0));
        // m2 = 0.75, m3 = -0.75.
        let s = skewness(&[1.0f64, 1.0, 1.0, -1.0]).unwrap().unwrap();
        assert_relative_eq!(s, -0.75 / 0.75f64.powf(1.5), max_relative = 1e-14);
        assert_relative_eq!(s, -1.154_700_538_379_251_5, max_relative = 1e-14);
        assert_eq!(skewness(&[0.3f64; 5]).unwrap(), None);
        assert!(skewness(&[1.0f64, 2.0]).is_err());
    }

    #[test]
    fn moments_form_agrees() {
        let values = [1.0f64, 1.0, 1.0, -1.0, 0.5, -0.25];
        let n = values.len() as f64;
        let m1 = values.iter().sum::<f64>() / n;
        let m2 = values.iter().map(|v| v * v).sum::<f64>() / n;
        let m3 = values.iter().map(|v| v * v * v).sum::<f64>() / n;
        let direct = skewness(&values).unwrap().unwrap();
        assert_relative_eq!(skewness_from_moments(m1, m2, m3).unwrap(), direct, max_relative = 1e-12);
        assert_eq!(skewness_from_moments(1.0f64, 1.0, 1.0), None);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let stat = |idx: &[usize]| idx.iter().map(|&i| data[i]).sum::<f64>();
        assert_eq!(bootstrap(50, 20, 3, stat), bootstrap(50, 20, 3, stat));
        assert_ne!(bootstrap(50, 20, 3, stat), bootstrap(50, 20, 4, stat));
    }

    #[test]
    fn bootstrap_error_scales_as_inverse_sqrt_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sizes = [25usize, 50, 100, 200, 400, 800, 1600];
        let mut logs = Vec::new();
        for &n in &sizes {
            // Average over independent data sets to tame the noise of one estimate.
            let mut errs = Vec::new();
            for rep in 0..8 {
                let data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let means = bootstrap(n, 400, rep, |idx| idx.iter().map(|&i| data[i]).sum::<f64>() / n as f64);
                errs.push(std_dev(&means));
            }
            logs.push(((n as f64).ln(), mean(&errs).ln()));
        }
        let (xm, ym) = (
            logs.iter().map(|l| l.0).sum::<f64>() / logs.len() as f64,
            logs.iter().map(|l| l.1).sum::<f64>() / logs.len() as f64,
        );
        let slope = logs.iter().map(|l| (l.0 - xm) * (l.1 - ym)).sum::<f64>()
            / logs.iter().map(|l| (l.0 - xm).powi(2)).sum::<f64>();
        assert!((-0.6..=-0.4).contains(&slope), "slope {slope}");
    }
}
