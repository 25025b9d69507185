//! Logarithmic binning and the equilibration test.
//!
//! Bin `k` holds sweeps `[2^k, 2^(k+1))` (sweeps counted from 1). A run is
//! deemed equilibrated when, for every tracked observable, the means of the
//! last three bins agree pairwise: `|m_a - m_b| <= 2 (s_a + s_b)` with `s`
//! the standard error of a bin mean estimated from block means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum number of complete bins before a verdict is given.
pub const MIN_BINS: usize = 8;

/// Error bars count as agreeing within this many standard errors each.
pub const AGREEMENT_SIGMAS: f64 = 2.0;

/// Default number of blocks per bin for error estimates.
pub const DEFAULT_BLOCKS: usize = 64;

/// Block sums of a set of observables over one bin of known length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BlockAccumulator<R: Real> {
    len: u64,
    block_len: u64,
    filled: u64,
    /// `sums[obs][block]`
    sums: Vec<Vec<R>>,
}

impl<R: Real> BlockAccumulator<R> {
    /// Accumulator for `len` values split into `min(blocks, len)` blocks.
    /// `len` must be a multiple of the block count.
    pub fn new(len: u64, observables: usize, blocks: usize) -> Self {
        let count = (blocks as u64).min(len).max(1);
        let count = if len.is_multiple_of(count) { count } else { 1 };
        Self {
            len,
            block_len: len / count,
            filled: 0,
            sums: vec![vec![R::zero(); count as usize]; observables],
        }
    }

    /// Accumulator for log bin `k` (length `2^k`).
    pub fn for_bin(k: u32, observables: usize, blocks: usize) -> Self {
        Self::new(1u64 << k, observables, blocks)
    }

    pub fn push(&mut self, values: &[R]) {
        debug_assert!(self.filled < self.len);
        let block = (self.filled / self.block_len) as usize;
        for (sums, &v) in self.sums.iter_mut().zip(values) {
            sums[block] = sums[block] + v;
        }
        self.filled += 1;
    }

    pub fn is_complete(&self) -> bool {
        self.filled == self.len
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn block_len(&self) -> u64 {
        self.block_len
    }

    pub fn num_blocks(&self) -> usize {
        self.sums.first().map_or(0, Vec::len)
    }

    /// Block means of observable `obs`.
    pub fn block_means(&self, obs: usize) -> Vec<R> {
        let n = R::from_u64(self.block_len).expect("block length representable");
        self.sums[obs].iter().map(|&s| s / n).collect()
    }

    /// Mean and standard error of observable `obs`.
    pub fn mean_and_error(&self, obs: usize) -> (R, R) {
        mean_and_error(&self.block_means(obs))
    }
}

/// Mean and standard error of the mean (sample standard deviation / sqrt n).
pub fn mean_and_error<R: Real>(values: &[R]) -> (R, R) {
    let n = values.len();
    if n == 0 {
        return (R::nan(), R::nan());
    }
    let nr = R::from_usize_lossy(n);
    let mean = values.iter().copied().sum::<R>() / nr;
    if n == 1 {
        return (mean, R::zero());
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<R>() / R::from_usize_lossy(n - 1);
    (mean, (var / nr).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BinSummary<R: Real> {
    pub bin: u32,
    pub means: Vec<R>,
    pub errors: Vec<R>,
}

impl<R: Real> BinSummary<R> {
    pub fn of(bin: u32, acc: &BlockAccumulator<R>) -> Self {
        let (means, errors) = (0..acc.sums.len()).map(|o| acc.mean_and_error(o)).unzip();
        Self { bin, means, errors }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EquilibrationStatus<R: Real> {
    pub bins: Vec<BinSummary<R>>,
    pub converged: bool,
}

fn agree<R: Real>(a: R, sa: R, b: R, sb: R) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= R::lit(AGREEMENT_SIGMAS) * (sa + sb)
}

/// Verdict over complete bins, ordered by bin index.
pub fn check_equilibration<R: Real>(bins: &[BinSummary<R>]) -> Result<EquilibrationStatus<R>> {
    if bins.len() < MIN_BINS {
        return Err(Error::InsufficientHistory {
            needed: MIN_BINS,
            found: bins.len(),
        });
    }
    let last = &bins[bins.len() - 3..];
    let observables = last[0].means.len();
    let converged = (0..observables).all(|o| {
        (0..3).all(|a| {
            (a + 1..3).all(|b| agree(last[a].means[o], last[a].errors[o], last[b].means[o], last[b].errors[o]))
        })
    });
    Ok(EquilibrationStatus {
        bins: bins.to_vec(),
        converged,
    })
}

/// Log-bins raw time series (one slice per observable, equal lengths).
/// Entry `i` is sweep `i + 1`; a trailing incomplete bin is dropped.
pub fn log_bins<R: Real>(series: &[&[R]], blocks: usize) -> Vec<BinSummary<R>> {
    let n = series.first().map_or(0, |s| s.len());
    let mut out = Vec::new();
    let mut k = 0u32;
    while (1usize << (k + 1)) - 1 <= n {
        let start = (1usize << k) - 1;
        let len = 1usize << k;
        let mut acc = BlockAccumulator::for_bin(k, series.len(), blocks);
        let mut row = vec![R::zero(); series.len()];
        for i in start..start + len {
            for (slot, s) in row.iter_mut().zip(series) {
                *slot = s[i];
            }
            acc.push(&row);
        }
        out.push(BinSummary::of(k, &acc));
        k += 1;
    }
    out
}

/// Convenience: log-bin the series and test the last three bins.
pub fn check_series<R: Real>(series: &[&[R]], blocks: usize) -> Result<EquilibrationStatus<R>> {
    check_equilibration(&log_bins(series, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_stream_converges() {
        let series = vec![0.25f64; (1 << 12) - 1];
        let status = check_series(&[&series], DEFAULT_BLOCKS).unwrap();
        assert_eq!(status.bins.len(), 12);
        assert!(status.converged);
    }

    #[test]
    fn drifting_stream_does_not_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let series: Vec<f64> = (0..(1 << 12) - 1)
            .map(|i| 1e-3 * i as f64 + 0.01 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        assert!(!check_series(&[&series], DEFAULT_BLOCKS).unwrap().converged);
    }

    #[test]
    fn insufficient_history() {
        let series = vec![1.0f64; 100];
        assert!(matches!(
            check_series(&[&series], DEFAULT_BLOCKS),
            Err(Error::InsufficientHistory { needed: 8, found: 6 })
        ));
    }

    #[test]
    fn bins_follow_powers_of_two() {
        let series: Vec<f64> = (1..=((1 << 9) - 1)).map(|s| s as f64).collect();
        let bins = log_bins(&[&series], 4);
        assert_eq!(bins.len(), 9);
        for (k, bin) in bins.iter().enumerate() {
            // mean of sweeps 2^k ..= 2^(k+1)-1
            let expected = ((1u64 << k) + (1u64 << (k + 1)) - 1) as f64 / 2.0;
            assert_eq!(bin.means[0], expected);
        }
    }

    #[test]
    fn zero_variance_mismatch_is_not_agreement() {
        assert!(agree(1.0f64, 0.0, 1.0, 0.0));
        assert!(!agree(1.0f64, 0.0, 1.1, 0.0));
    }

    #[test]
    fn accumulator_blocks() {
        let mut acc = BlockAccumulator::<f64>::new(8, 1, 4);
        for v in [1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0] {
            acc.push(&[v]);
        }
        assert!(acc.is_complete());
        assert_eq!(acc.block_means(0), vec![2.0, 6.0, 10.0, 14.0]);
        let (m, e) = acc.mean_and_error(0);
        assert_eq!(m, 8.0);
        assert!((e - (80.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }
}
