use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Strictly increasing temperatures, one per replica slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TemperatureLadder<R: Real> {
    temperatures: Vec<R>,
}

impl<R: Real> TemperatureLadder<R> {
    pub fn new(temperatures: Vec<R>) -> Result<Self> {
        if temperatures.len() < 2 {
            return Err(Error::InvalidLadder(format!(
                "need at least 2 temperatures, got {}",
                temperatures.len()
            )));
        }
        if !(temperatures[0] > R::zero()) || !temperatures.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidLadder("temperatures must be finite and positive".into()));
        }
        if temperatures.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidLadder("temperatures must be strictly increasing".into()));
        }
        Ok(Self { temperatures })
    }

    /// `count` points evenly spaced in `T` from `t_min` to `t_max` inclusive.
    pub fn linear(t_min: R, t_max: R, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidLadder(format!("need at least 2 temperatures, got {count}")));
        }
        let step = (t_max - t_min) / R::from_usize_lossy(count - 1);
        let mut temperatures: Vec<R> = (0..count)
            .map(|i| t_min + step * R::from_usize_lossy(i))
            .collect();
        temperatures[count - 1] = t_max;
        Self::new(temperatures)
    }

    pub fn temperatures(&self) -> &[R] {
        &self.temperatures
    }

    pub fn betas(&self) -> Vec<R> {
        self.temperatures.iter().map(|t| t.recip()).collect()
    }

    pub fn len(&self) -> usize {
        self.temperatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty()
    }

    pub fn t_min(&self) -> R {
        self.temperatures[0]
    }

    pub fn t_max(&self) -> R {
        self.temperatures[self.temperatures.len() - 1]
    }
}
