//! Metropolis sweeps with parallel tempering over one disorder sample.

pub mod equilibration;
pub mod ladder;

use std::ops::ControlFlow;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSample;
use crate::error::{Error, Result};
use crate::geometry::GaugeModel;
use crate::model::{wilson_sum, Couplings, EnergyCounts, Incidence, ReplicaState, SpinConfiguration};
use crate::scalar::Real;

pub use equilibration::{check_equilibration, BinSummary, BlockAccumulator, EquilibrationStatus};
pub use ladder::TemperatureLadder;

/// Per-temperature observables recorded every sweep: E, E², W, W², W³.
pub const THERMAL_OBSERVABLES: usize = 5;

/// Swap acceptance outside this window suggests a badly spaced ladder.
pub const SWAP_ACCEPTANCE_WINDOW: (f64, f64) = (0.05, 0.95);

/// Metropolis acceptance `min(1, exp(-beta dE))` for every reachable change
/// in unsatisfied counts.
#[derive(Debug, Clone)]
pub struct AcceptanceTable<R> {
    max_q: i32,
    max_m: i32,
    probs: Vec<R>,
}

impl<R: Real> AcceptanceTable<R> {
    pub fn new(beta: R, couplings: &Couplings<R>, max_q: usize, max_m: usize) -> Self {
        let (max_q, max_m) = (max_q as i32, max_m as i32);
        let two = R::lit(2.0);
        let mut probs = Vec::with_capacity(((2 * max_q + 1) * (2 * max_m + 1)) as usize);
        for dq in -max_q..=max_q {
            for dm in -max_m..=max_m {
                let de = two * couplings.j * R::lit(dq as f64) + two * couplings.k * R::lit(dm as f64);
                probs.push((-beta * de).exp().min(R::one()));
            }
        }
        Self { max_q, max_m, probs }
    }

    #[inline]
    pub fn get(&self, dq: i32, dm: i32) -> R {
        self.probs[((dq + self.max_q) * (2 * self.max_m + 1) + dm + self.max_m) as usize]
    }
}

/// `min(1, exp((beta_i - beta_j)(E_i - E_j)))`.
pub fn swap_probability<R: Real>(beta_i: R, beta_j: R, e_i: R, e_j: R) -> R {
    ((beta_i - beta_j) * (e_i - e_j)).exp().min(R::one())
}

#[inline]
fn metropolis_step<R: Real>(
    incidence: &Incidence,
    table: &AcceptanceTable<R>,
    replica: &mut ReplicaState,
    rng: &mut ChaCha8Rng,
    spin: usize,
) -> bool {
    let delta = replica.flip_delta(incidence, spin);
    let prob = table.get(delta.0, delta.1);
    if prob >= R::one() || R::lit(rng.gen::<f64>()) < prob {
        replica.flip(incidence, spin, delta);
        true
    } else {
        false
    }
}

/// Mutable part of an ensemble; everything a checkpoint has to carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    /// Indexed by temperature slot.
    pub replicas: Vec<ReplicaState>,
    /// One stream per temperature slot; streams never move with swaps.
    pub rngs: Vec<ChaCha8Rng>,
    pub swap_rng: ChaCha8Rng,
    pub sweeps: u64,
    pub swap_passes: u64,
    pub swap_attempts: Vec<u64>,
    pub swap_accepts: Vec<u64>,
}

pub struct Ensemble<'a, R: Real> {
    model: &'a GaugeModel,
    incidence: &'a Incidence,
    sample: &'a DisorderSample,
    couplings: Couplings<R>,
    ladder: TemperatureLadder<R>,
    betas: Vec<R>,
    tables: Vec<AcceptanceTable<R>>,
    state: EnsembleState,
}

impl<'a, R: Real> Ensemble<'a, R> {
    /// Random initial spins in every slot, drawn from that slot's stream.
    pub fn hot_start(
        model: &'a GaugeModel,
        incidence: &'a Incidence,
        sample: &'a DisorderSample,
        couplings: Couplings<R>,
        ladder: TemperatureLadder<R>,
        seed: [u8; 32],
    ) -> Result<Self> {
        sample.check_model(model)?;
        let n = ladder.len();
        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|slot| {
                let mut rng = ChaCha8Rng::from_seed(seed);
                rng.set_stream(slot as u64);
                rng
            })
            .collect();
        let mut swap_rng = ChaCha8Rng::from_seed(seed);
        swap_rng.set_stream(n as u64);
        let replicas = rngs
            .iter_mut()
            .map(|rng| {
                let spins = (0..model.num_spins()).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
                ReplicaState::new(model, sample, SpinConfiguration::new(spins)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let state = EnsembleState {
            replicas,
            rngs,
            swap_rng,
            sweeps: 0,
            swap_passes: 0,
            swap_attempts: vec![0; n - 1],
            swap_accepts: vec![0; n - 1],
        };
        Self::from_state(model, incidence, sample, couplings, ladder, state)
    }

    pub fn from_state(
        model: &'a GaugeModel,
        incidence: &'a Incidence,
        sample: &'a DisorderSample,
        couplings: Couplings<R>,
        ladder: TemperatureLadder<R>,
        state: EnsembleState,
    ) -> Result<Self> {
        sample.check_model(model)?;
        let n = ladder.len();
        if state.replicas.len() != n || state.rngs.len() != n || state.swap_attempts.len() != n - 1 {
            return Err(Error::ShapeMismatch {
                what: "ensemble replicas",
                expected: n,
                found: state.replicas.len(),
            });
        }
        let betas = ladder.betas();
        let tables = betas
            .iter()
            .map(|&b| {
                AcceptanceTable::new(b, &couplings, incidence.max_qubit_degree(), incidence.max_measurement_degree())
            })
            .collect();
        let ensemble = Self {
            model,
            incidence,
            sample,
            couplings,
            ladder,
            betas,
            tables,
            state,
        };
        if !ensemble.is_consistent() {
            return Err(Error::Format {
                what: "ensemble state",
                reason: "cached term signs disagree with the spins".into(),
            });
        }
        Ok(ensemble)
    }

    pub fn state(&self) -> &EnsembleState {
        &self.state
    }

    pub fn into_state(self) -> EnsembleState {
        self.state
    }

    pub fn ladder(&self) -> &TemperatureLadder<R> {
        &self.ladder
    }

    pub fn len(&self) -> usize {
        self.ladder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ladder.is_empty()
    }

    pub fn replica(&self, slot: usize) -> &ReplicaState {
        &self.state.replicas[slot]
    }

    pub fn counts(&self, slot: usize) -> EnergyCounts {
        self.state.replicas[slot].counts()
    }

    pub fn energy(&self, slot: usize) -> R {
        self.counts(slot)
            .energy(&self.couplings, self.model.num_qubit_terms(), self.model.num_measurement_terms())
    }

    /// Mean Wilson product over all `size x size` patches of the slot's replica.
    pub fn wilson_mean(&self, slot: usize, size: usize) -> R {
        let sum = wilson_sum(self.model, self.state.replicas[slot].signs(), size);
        let patches = self.model.layer_size() * self.model.layer_size() * self.model.layers();
        R::lit(sum as f64) / R::from_usize_lossy(patches)
    }

    /// One proposed flip per spin in index order. Returns accepted flips.
    pub fn metropolis_sweep(&mut self, slot: usize) -> usize {
        let incidence = self.incidence;
        let table = &self.tables[slot];
        let replica = &mut self.state.replicas[slot];
        let rng = &mut self.state.rngs[slot];
        (0..incidence.num_spins())
            .filter(|&spin| metropolis_step(incidence, table, replica, rng, spin))
            .count()
    }

    /// Single Metropolis proposal for `spin` in `slot`.
    pub fn propose(&mut self, slot: usize, spin: usize) -> bool {
        metropolis_step(
            self.incidence,
            &self.tables[slot],
            &mut self.state.replicas[slot],
            &mut self.state.rngs[slot],
            spin,
        )
    }

    /// Replica exchange between adjacent slots; even pairs on even passes,
    /// odd pairs on odd passes.
    pub fn pt_swap_pass(&mut self) {
        let n = self.len();
        let start = (self.state.swap_passes % 2) as usize;
        for i in (start..n.saturating_sub(1)).step_by(2) {
            let prob = swap_probability(self.betas[i], self.betas[i + 1], self.energy(i), self.energy(i + 1));
            self.state.swap_attempts[i] += 1;
            if prob >= R::one() || R::lit(self.state.swap_rng.gen::<f64>()) < prob {
                self.state.replicas.swap(i, i + 1);
                self.state.swap_accepts[i] += 1;
            }
        }
        self.state.swap_passes += 1;
    }

    /// A Metropolis sweep of every slot followed by one swap pass.
    pub fn sweep(&mut self) {
        for slot in 0..self.len() {
            self.metropolis_sweep(slot);
        }
        self.pt_swap_pass();
        self.state.sweeps += 1;
    }

    pub fn sweeps(&self) -> u64 {
        self.state.sweeps
    }

    /// Acceptance ratio per adjacent pair (`NaN` before any attempt).
    pub fn swap_acceptance(&self) -> Vec<R> {
        self.state
            .swap_attempts
            .iter()
            .zip(&self.state.swap_accepts)
            .map(|(&a, &s)| {
                if a == 0 {
                    R::nan()
                } else {
                    R::lit(s as f64 / a as f64)
                }
            })
            .collect()
    }

    pub fn is_consistent(&self) -> bool {
        self.state.replicas.iter().all(|r| r.is_consistent(self.model, self.sample))
    }
}

/// Sweep budget and bookkeeping for [`run_sample`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// First equilibration verdict after `2^min_log2` sweeps.
    pub min_log2: u32,
    /// Never run `2^max_log2` sweeps or more.
    pub max_log2: u32,
    /// Blocks per bin for error estimates.
    pub blocks: usize,
    /// Sweeps between consistency checks and checkpoint callbacks.
    pub checkpoint_interval: u64,
    /// Wilson patch edge; `floor(L/2)` when unset.
    pub wilson_size: Option<usize>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            min_log2: 15,
            max_log2: 22,
            blocks: equilibration::DEFAULT_BLOCKS,
            checkpoint_interval: 1 << 10,
            wilson_size: None,
        }
    }
}

impl Schedule {
    pub fn with_budget(b: u32) -> Self {
        Self {
            min_log2: b,
            max_log2: b + 1,
            ..Self::default()
        }
    }

    /// Index of the first bin that may end the run.
    fn first_verdict_bin(&self) -> u32 {
        self.min_log2.max(equilibration::MIN_BINS as u32 - 1)
    }

    /// Largest bin allowed by the sweep cap.
    fn last_bin(&self) -> u32 {
        self.max_log2.saturating_sub(1).max(self.first_verdict_bin())
    }
}

/// Block-averaged time series of one temperature over the measurement bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ThermalBlocks<R: Real> {
    pub block_len: u64,
    pub energy: Vec<R>,
    pub energy_sq: Vec<R>,
    pub wilson: Vec<R>,
    pub wilson_sq: Vec<R>,
    pub wilson_cube: Vec<R>,
}

impl<R: Real> ThermalBlocks<R> {
    fn of(acc: &BlockAccumulator<R>) -> Self {
        Self {
            block_len: acc.block_len(),
            energy: acc.block_means(0),
            energy_sq: acc.block_means(1),
            wilson: acc.block_means(2),
            wilson_sq: acc.block_means(3),
            wilson_cube: acc.block_means(4),
        }
    }

    pub fn samples(&self) -> u64 {
        self.block_len * self.energy.len() as u64
    }
}

/// Measurement-phase output of one disorder sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeasurementSet<R: Real> {
    pub temperatures: Vec<R>,
    pub num_terms: usize,
    pub wilson_size: usize,
    pub thermal: Vec<ThermalBlocks<R>>,
    pub equilibration: EquilibrationStatus<R>,
    pub equilibrated: bool,
    /// Sweeps before the measurement bin.
    pub t_eq: u64,
    pub total_sweeps: u64,
    pub swap_acceptance: Vec<R>,
}

/// Checkpointable progress of [`SampleRun`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RunState<R: Real> {
    pub ensemble: EnsembleState,
    pub bin: u32,
    /// Per temperature, accumulators of the bin in progress.
    pub current: Vec<BlockAccumulator<R>>,
    /// Equilibration history at the lowest temperature.
    pub history: Vec<BinSummary<R>>,
}

pub enum Progress<R: Real> {
    Finished(MeasurementSet<R>),
    Halted(RunState<R>),
}

/// Resumable run of one disorder sample.
pub struct SampleRun<'a, R: Real> {
    model: &'a GaugeModel,
    ensemble: Ensemble<'a, R>,
    schedule: Schedule,
    wilson_size: usize,
    bin: u32,
    current: Vec<BlockAccumulator<R>>,
    history: Vec<BinSummary<R>>,
}

impl<'a, R: Real> SampleRun<'a, R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &'a GaugeModel,
        incidence: &'a Incidence,
        sample: &'a DisorderSample,
        couplings: Couplings<R>,
        ladder: TemperatureLadder<R>,
        schedule: Schedule,
        seed: [u8; 32],
    ) -> Result<Self> {
        let ensemble = Ensemble::hot_start(model, incidence, sample, couplings, ladder, seed)?;
        let current = Self::fresh_bin(0, ensemble.len(), schedule.blocks);
        Self::assemble(model, ensemble, schedule, 0, current, Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn resume(
        model: &'a GaugeModel,
        incidence: &'a Incidence,
        sample: &'a DisorderSample,
        couplings: Couplings<R>,
        ladder: TemperatureLadder<R>,
        schedule: Schedule,
        state: RunState<R>,
    ) -> Result<Self> {
        let ensemble = Ensemble::from_state(model, incidence, sample, couplings, ladder, state.ensemble)?;
        if state.current.len() != ensemble.len() {
            return Err(Error::ShapeMismatch {
                what: "bin accumulators",
                expected: ensemble.len(),
                found: state.current.len(),
            });
        }
        Self::assemble(model, ensemble, schedule, state.bin, state.current, state.history)
    }

    fn assemble(
        model: &'a GaugeModel,
        ensemble: Ensemble<'a, R>,
        schedule: Schedule,
        bin: u32,
        current: Vec<BlockAccumulator<R>>,
        history: Vec<BinSummary<R>>,
    ) -> Result<Self> {
        let wilson_size = schedule.wilson_size.unwrap_or_else(|| model.default_patch_size());
        if wilson_size == 0 || wilson_size > model.layer_size() {
            return Err(Error::InvalidPatch(format!("size {wilson_size} outside 1..={}", model.layer_size())));
        }
        if schedule.checkpoint_interval == 0 {
            return Err(Error::InvalidLadder("checkpoint interval must be positive".into()));
        }
        Ok(Self {
            model,
            ensemble,
            schedule,
            wilson_size,
            bin,
            current,
            history,
        })
    }

    fn fresh_bin(k: u32, temperatures: usize, blocks: usize) -> Vec<BlockAccumulator<R>> {
        (0..temperatures)
            .map(|_| BlockAccumulator::for_bin(k, THERMAL_OBSERVABLES, blocks))
            .collect()
    }

    pub fn snapshot(&self) -> RunState<R> {
        RunState {
            ensemble: self.ensemble.state().clone(),
            bin: self.bin,
            current: self.current.clone(),
            history: self.history.clone(),
        }
    }

    pub fn sweeps(&self) -> u64 {
        self.ensemble.sweeps()
    }

    fn record(&mut self) {
        for slot in 0..self.ensemble.len() {
            let e = self.ensemble.energy(slot);
            let w = self.ensemble.wilson_mean(slot, self.wilson_size);
            self.current[slot].push(&[e, e * e, w, w * w, w * w * w]);
        }
    }

    fn close_bin(&mut self) -> BinSummary<R> {
        let n = R::from_usize_lossy(self.model.num_terms());
        let (e, se) = self.current[0].mean_and_error(0);
        let (w, sw) = self.current[0].mean_and_error(2);
        BinSummary {
            bin: self.bin,
            means: vec![e / n, w],
            errors: vec![se / n, sw],
        }
    }

    fn finish(&self, status: EquilibrationStatus<R>) -> MeasurementSet<R> {
        let swap_acceptance = self.ensemble.swap_acceptance();
        let (lo, hi) = SWAP_ACCEPTANCE_WINDOW;
        for (i, a) in swap_acceptance.iter().enumerate() {
            let a = a.as_f64();
            if !(a > lo && a < hi) {
                warn!(
                    "swap acceptance {a:.3} between T={} and T={} outside ({lo}, {hi})",
                    self.ensemble.ladder().temperatures()[i],
                    self.ensemble.ladder().temperatures()[i + 1]
                );
            }
        }
        MeasurementSet {
            temperatures: self.ensemble.ladder().temperatures().to_vec(),
            num_terms: self.model.num_terms(),
            wilson_size: self.wilson_size,
            thermal: self.current.iter().map(ThermalBlocks::of).collect(),
            equilibrated: status.converged,
            equilibration: status,
            t_eq: 1u64 << self.bin,
            total_sweeps: self.ensemble.sweeps(),
            swap_acceptance,
        }
    }

    /// Runs until the measurement bin is complete or `on_checkpoint` breaks.
    ///
    /// `on_checkpoint` sees the state every `checkpoint_interval` sweeps,
    /// after the incremental energies were verified against recomputation.
    pub fn run<F>(&mut self, mut on_checkpoint: F) -> Result<Progress<R>>
    where
        F: FnMut(&RunState<R>) -> ControlFlow<()>,
    {
        let first_verdict = self.schedule.first_verdict_bin();
        let last_bin = self.schedule.last_bin();
        loop {
            self.ensemble.sweep();
            self.record();
            if self.current[0].is_complete() {
                let summary = self.close_bin();
                self.history.push(summary);
                if self.bin >= first_verdict {
                    let status = check_equilibration(&self.history)?;
                    if status.converged || self.bin >= last_bin {
                        return Ok(Progress::Finished(self.finish(status)));
                    }
                }
                self.bin += 1;
                self.current = Self::fresh_bin(self.bin, self.ensemble.len(), self.schedule.blocks);
            }
            if self.ensemble.sweeps().is_multiple_of(self.schedule.checkpoint_interval) {
                if !self.ensemble.is_consistent() {
                    return Err(Error::Format {
                        what: "ensemble state",
                        reason: format!("incremental energy drifted at sweep {}", self.ensemble.sweeps()),
                    });
                }
                if on_checkpoint(&self.snapshot()).is_break() {
                    return Ok(Progress::Halted(self.snapshot()));
                }
            }
        }
    }
}

/// Runs one sample to completion without checkpoints.
pub fn run_sample<R: Real>(
    model: &GaugeModel,
    incidence: &Incidence,
    sample: &DisorderSample,
    couplings: Couplings<R>,
    ladder: TemperatureLadder<R>,
    schedule: Schedule,
    seed: [u8; 32],
) -> Result<MeasurementSet<R>> {
    let mut run = SampleRun::new(model, incidence, sample, couplings, ladder, schedule, seed)?;
    match run.run(|_| ControlFlow::Continue(()))? {
        Progress::Finished(set) => Ok(set),
        Progress::Halted(_) => unreachable!("checkpoint hook never breaks"),
    }
}
