//! Disordered gauge Hamiltonian, gauge transformations and Wilson products.
//!
//! Energies are tracked as counts of unsatisfied terms (`τ Πσ = -1`) per kind
//! and converted with `E = -J (N_Q - 2 u_Q) - K (N_M - 2 u_M)`.

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSample;
use crate::error::{Error, Result};
use crate::geometry::{GaugeModel, Patch, TermKind};

/// ±1 value per gauge spin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfiguration(Vec<i8>);

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad));
        }
        Ok(Self(spins))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }

    pub fn flip(&mut self, index: usize) {
        self.0[index] = -self.0[index];
    }
}

/// Term strengths: `J` for qubit terms, `K` for measurement terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings<S> {
    pub j: S,
    pub k: S,
}

impl<S: Num + Copy + PartialOrd> Couplings<S> {
    pub fn new(j: S, k: S) -> Result<Self> {
        // `c - c` is NaN for NaN and infinities, zero otherwise.
        #[allow(clippy::eq_op)]
        let finite = |c: S| c - c == S::zero();
        if !finite(j) || !finite(k) || j < S::zero() || k < S::zero() {
            return Err(Error::InvalidCouplings);
        }
        Ok(Self { j, k })
    }

    pub fn isotropic() -> Self {
        Self {
            j: S::one(),
            k: S::one(),
        }
    }
}

/// Unsatisfied-term counts per kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnergyCounts {
    pub qubit: u32,
    pub measurement: u32,
}

impl EnergyCounts {
    pub fn energy<S: Num + Copy + FromPrimitive>(
        self,
        couplings: &Couplings<S>,
        num_qubit: usize,
        num_measurement: usize,
    ) -> S {
        let int = |n: i64| S::from_i64(n).expect("integer representable");
        let sat_q = int(num_qubit as i64 - 2 * self.qubit as i64);
        let sat_m = int(num_measurement as i64 - 2 * self.measurement as i64);
        S::zero() - couplings.j * sat_q - couplings.k * sat_m
    }
}

fn check_shapes(model: &GaugeModel, sample: &DisorderSample, config: &SpinConfiguration) -> Result<()> {
    sample.check_model(model)?;
    if config.len() != model.num_spins() {
        return Err(Error::ShapeMismatch {
            what: "spin configuration",
            expected: model.num_spins(),
            found: config.len(),
        });
    }
    Ok(())
}

#[inline]
fn term_sign(spins: &[u32], tau: i8, config: &[i8]) -> i8 {
    spins.iter().fold(tau, |acc, &s| acc * config[s as usize])
}

pub fn energy_counts(model: &GaugeModel, sample: &DisorderSample, config: &SpinConfiguration) -> Result<EnergyCounts> {
    check_shapes(model, sample, config)?;
    let mut counts = EnergyCounts::default();
    for (term, &tau) in model.terms().iter().zip(&sample.tau) {
        if term_sign(&term.spins, tau, config.as_slice()) < 0 {
            match term.kind {
                TermKind::Qubit => counts.qubit += 1,
                TermKind::Measurement => counts.measurement += 1,
            }
        }
    }
    Ok(counts)
}

pub fn energy<S: Num + Copy + FromPrimitive>(
    model: &GaugeModel,
    sample: &DisorderSample,
    couplings: &Couplings<S>,
    config: &SpinConfiguration,
) -> Result<S> {
    let counts = energy_counts(model, sample, config)?;
    Ok(counts.energy(couplings, model.num_qubit_terms(), model.num_measurement_terms()))
}

/// Spin-to-term incidence in compressed row form, split by term kind.
#[derive(Debug, Clone)]
pub struct Incidence {
    qubit_offsets: Vec<u32>,
    qubit_terms: Vec<u32>,
    measurement_offsets: Vec<u32>,
    measurement_terms: Vec<u32>,
    max_qubit_degree: usize,
    max_measurement_degree: usize,
}

impl Incidence {
    pub fn new(model: &GaugeModel) -> Self {
        let n = model.num_spins();
        let mut qubit: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut meas: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, term) in model.terms().iter().enumerate() {
            for &s in &term.spins {
                match term.kind {
                    TermKind::Qubit => qubit[s as usize].push(i as u32),
                    TermKind::Measurement => meas[s as usize].push(i as u32),
                }
            }
        }
        let flatten = |lists: &[Vec<u32>]| {
            let mut offsets = Vec::with_capacity(lists.len() + 1);
            let mut flat = Vec::new();
            offsets.push(0);
            for list in lists {
                flat.extend_from_slice(list);
                offsets.push(flat.len() as u32);
            }
            (offsets, flat)
        };
        let max_qubit_degree = qubit.iter().map(Vec::len).max().unwrap_or(0);
        let max_measurement_degree = meas.iter().map(Vec::len).max().unwrap_or(0);
        let (qubit_offsets, qubit_terms) = flatten(&qubit);
        let (measurement_offsets, measurement_terms) = flatten(&meas);
        Self {
            qubit_offsets,
            qubit_terms,
            measurement_offsets,
            measurement_terms,
            max_qubit_degree,
            max_measurement_degree,
        }
    }

    #[inline]
    pub fn qubit_terms(&self, spin: usize) -> &[u32] {
        &self.qubit_terms[self.qubit_offsets[spin] as usize..self.qubit_offsets[spin + 1] as usize]
    }

    #[inline]
    pub fn measurement_terms(&self, spin: usize) -> &[u32] {
        &self.measurement_terms
            [self.measurement_offsets[spin] as usize..self.measurement_offsets[spin + 1] as usize]
    }

    pub fn max_qubit_degree(&self) -> usize {
        self.max_qubit_degree
    }

    pub fn max_measurement_degree(&self) -> usize {
        self.max_measurement_degree
    }

    pub fn num_spins(&self) -> usize {
        self.qubit_offsets.len() - 1
    }
}

/// Energy change from flipping `spin`, touching only its incident terms.
pub fn delta_energy<S: Num + Copy + FromPrimitive>(
    model: &GaugeModel,
    incidence: &Incidence,
    sample: &DisorderSample,
    couplings: &Couplings<S>,
    config: &SpinConfiguration,
    spin: usize,
) -> Result<S> {
    check_shapes(model, sample, config)?;
    if spin >= model.num_spins() {
        return Err(Error::ShapeMismatch {
            what: "spin index",
            expected: model.num_spins(),
            found: spin,
        });
    }
    let terms = model.terms();
    let sum = |list: &[u32]| -> i64 {
        list.iter()
            .map(|&t| {
                let t = t as usize;
                term_sign(&terms[t].spins, sample.tau[t], config.as_slice()) as i64
            })
            .sum()
    };
    let two = |n: i64| S::from_i64(2 * n).expect("integer representable");
    Ok(couplings.j * two(sum(incidence.qubit_terms(spin)))
        + couplings.k * two(sum(incidence.measurement_terms(spin))))
}

/// Negates every spin of `generator`.
pub fn apply_gauge(config: &mut SpinConfiguration, generator: &[u32]) {
    for &s in generator {
        config.flip(s as usize);
    }
}

/// Product of `τ Πσ` over the terms of `patch`.
pub fn wilson_loop(
    model: &GaugeModel,
    sample: &DisorderSample,
    config: &SpinConfiguration,
    patch: &Patch,
) -> Result<i8> {
    check_shapes(model, sample, config)?;
    let terms = model.patch_terms(patch)?;
    Ok(terms.iter().fold(1i8, |acc, &t| {
        acc * term_sign(&model.terms()[t].spins, sample.tau[t], config.as_slice())
    }))
}

/// Mutable spin state with cached term signs and unsatisfied counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaState {
    spins: Vec<i8>,
    signs: Vec<i8>,
    counts: EnergyCounts,
}

impl ReplicaState {
    pub fn new(model: &GaugeModel, sample: &DisorderSample, config: SpinConfiguration) -> Result<Self> {
        check_shapes(model, sample, &config)?;
        let spins = config.into_inner();
        let mut counts = EnergyCounts::default();
        let signs = model
            .terms()
            .iter()
            .zip(&sample.tau)
            .map(|(term, &tau)| {
                let sign = term_sign(&term.spins, tau, &spins);
                if sign < 0 {
                    match term.kind {
                        TermKind::Qubit => counts.qubit += 1,
                        TermKind::Measurement => counts.measurement += 1,
                    }
                }
                sign
            })
            .collect();
        Ok(Self { spins, signs, counts })
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn counts(&self) -> EnergyCounts {
        self.counts
    }

    pub fn config(&self) -> SpinConfiguration {
        SpinConfiguration(self.spins.clone())
    }

    /// Change in unsatisfied (qubit, measurement) counts if `spin` flipped.
    #[inline]
    pub fn flip_delta(&self, incidence: &Incidence, spin: usize) -> (i32, i32) {
        let dq: i32 = incidence.qubit_terms(spin).iter().map(|&t| self.signs[t as usize] as i32).sum();
        let dm: i32 = incidence
            .measurement_terms(spin)
            .iter()
            .map(|&t| self.signs[t as usize] as i32)
            .sum();
        (dq, dm)
    }

    #[inline]
    pub fn flip(&mut self, incidence: &Incidence, spin: usize, delta: (i32, i32)) {
        self.spins[spin] = -self.spins[spin];
        for &t in incidence.qubit_terms(spin) {
            self.signs[t as usize] = -self.signs[t as usize];
        }
        for &t in incidence.measurement_terms(spin) {
            self.signs[t as usize] = -self.signs[t as usize];
        }
        self.counts.qubit = (self.counts.qubit as i32 + delta.0) as u32;
        self.counts.measurement = (self.counts.measurement as i32 + delta.1) as u32;
    }

    /// Recomputes every term from scratch and compares with the cache.
    pub fn is_consistent(&self, model: &GaugeModel, sample: &DisorderSample) -> bool {
        match ReplicaState::new(model, sample, SpinConfiguration(self.spins.clone())) {
            Ok(fresh) => fresh == *self,
            Err(_) => false,
        }
    }
}

/// Sum over every translate of the `size x size` patch, in every layer, of
/// the patch's Wilson product. Lies in `[-L²M, L²M]`.
pub fn wilson_sum(model: &GaugeModel, signs: &[i8], size: usize) -> i64 {
    let l = model.layer_size();
    let orientations = model.wilson_orientations();
    let mut cell = vec![0i8; l * l];
    let mut rows = vec![0i8; l * l];
    let mut total = 0i64;
    for t in 0..model.layers() {
        for y in 0..l {
            for x in 0..l {
                let base = 3 * model.cell(x, y, t);
                cell[y * l + x] = orientations.iter().fold(1, |acc, o| acc * signs[base + o]);
            }
        }
        // Window products along x; signs are their own inverses.
        for y in 0..l {
            let row = &cell[y * l..(y + 1) * l];
            let mut w = row[..size].iter().product::<i8>();
            for x in 0..l {
                rows[y * l + x] = w;
                w *= row[x] * row[(x + size) % l];
            }
        }
        for x in 0..l {
            let mut w = (0..size).map(|y| rows[y * l + x]).product::<i8>();
            for y in 0..l {
                total += w as i64;
                w *= rows[y * l + x] * rows[((y + size) % l) * l + x];
            }
        }
    }
    total
}
