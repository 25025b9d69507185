//! Exact thermodynamics of small instances by exhaustive enumeration.
//!
//! Configurations are visited in Gray-code order, so each step flips a single
//! spin. Only the integer histogram of unsatisfied counts `(u_Q, u_M)` and the
//! integer moments of the Wilson sum per histogram cell are accumulated; every
//! temperature is then evaluated from the histogram with a log-sum-exp.
//! Nothing here shares code with the Monte Carlo kernel beyond the geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSample;
use crate::error::{Error, Result};
use crate::geometry::{GaugeModel, Patch, TermKind};
use crate::model::{energy_counts, Couplings, SpinConfiguration};

/// Largest spin count [`enumerate`] accepts.
pub const ENUMERATION_CAP: usize = 28;

/// Enumeration is split into `2^CHUNK_COUNT_LOG2` Gray-code segments.
const CHUNK_COUNT_LOG2: usize = 8;

/// Largest gauge rank whose orbit [`gauge_orbit_check`] walks explicitly.
pub const ORBIT_WALK_CAP: usize = 24;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HistogramCell {
    pub count: u64,
    /// Sums of `S`, `S²`, `S³` for the Wilson sum `S` of each configuration.
    pub wilson: [i128; 3],
}

/// Exact density of states keyed by unsatisfied counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub num_qubit: usize,
    pub num_measurement: usize,
    pub num_patches: usize,
    pub wilson_size: usize,
    /// Row-major in `(u_Q, u_M)` with `num_measurement + 1` columns.
    pub cells: Vec<HistogramCell>,
}

impl Histogram {
    pub fn cell(&self, u_q: usize, u_m: usize) -> &HistogramCell {
        &self.cells[u_q * (self.num_measurement + 1) + u_m]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum()
    }
}

/// Exact canonical averages at one temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactPoint {
    pub temperature: f64,
    pub log_z: f64,
    /// Total energy `⟨E⟩` and `⟨E²⟩`, not per term.
    pub energy: f64,
    pub energy_sq: f64,
    /// `β²(⟨E²⟩ − ⟨E⟩²) / N_terms`.
    pub specific_heat: f64,
    /// Moments of the lattice-averaged Wilson product.
    pub wilson: f64,
    pub wilson_sq: f64,
    pub wilson_cube: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub histogram: Histogram,
    pub points: Vec<ExactPoint>,
}

struct Walker {
    /// Terms touching each spin.
    spin_terms: Vec<Vec<usize>>,
    /// Patches containing each term.
    term_patches: Vec<Vec<usize>>,
    signs: Vec<i8>,
    patches: Vec<i8>,
    kinds: Vec<TermKind>,
    u_q: usize,
    u_m: usize,
    wilson: i64,
}

impl Walker {
    /// Walker positioned at the configuration whose set bits are down spins.
    fn new(model: &GaugeModel, sample: &DisorderSample, wilson_size: usize, down: u64) -> Result<Self> {
        let mut spin_terms = vec![Vec::new(); model.num_spins()];
        for (t, term) in model.terms().iter().enumerate() {
            for &s in &term.spins {
                spin_terms[s as usize].push(t);
            }
        }
        let mut term_patches = vec![Vec::new(); model.num_terms()];
        let mut patch_count = 0;
        let l = model.layer_size();
        for layer in 0..model.layers() {
            for y0 in 0..l {
                for x0 in 0..l {
                    let patch = Patch {
                        layer,
                        x0,
                        y0,
                        size: wilson_size,
                    };
                    for t in model.patch_terms(&patch)? {
                        term_patches[t].push(patch_count);
                    }
                    patch_count += 1;
                }
            }
        }
        let signs: Vec<i8> = model
            .terms()
            .iter()
            .zip(&sample.tau)
            .map(|(term, &tau)| {
                let flipped = term.spins.iter().filter(|&&s| down >> s & 1 == 1).count();
                if flipped % 2 == 0 {
                    tau
                } else {
                    -tau
                }
            })
            .collect();
        let kinds: Vec<TermKind> = model.terms().iter().map(|t| t.kind).collect();
        let mut patches = vec![1i8; patch_count];
        for (t, owners) in term_patches.iter().enumerate() {
            for &p in owners {
                patches[p] *= signs[t];
            }
        }
        let mut walker = Self {
            spin_terms,
            term_patches,
            signs,
            patches,
            kinds,
            u_q: 0,
            u_m: 0,
            wilson: 0,
        };
        for t in 0..walker.signs.len() {
            if walker.signs[t] < 0 {
                walker.bump(t, 1);
            }
        }
        walker.wilson = walker.patches.iter().map(|&w| w as i64).sum();
        Ok(walker)
    }

    fn bump(&mut self, term: usize, by: isize) {
        let slot = match self.kinds[term] {
            TermKind::Qubit => &mut self.u_q,
            TermKind::Measurement => &mut self.u_m,
        };
        *slot = slot.wrapping_add_signed(by);
    }

    fn flip(&mut self, spin: usize) {
        for i in 0..self.spin_terms[spin].len() {
            let t = self.spin_terms[spin][i];
            self.signs[t] = -self.signs[t];
            self.bump(t, if self.signs[t] < 0 { 1 } else { -1 });
            for &p in &self.term_patches[t] {
                self.patches[p] = -self.patches[p];
                self.wilson += 2 * self.patches[p] as i64;
            }
        }
    }
}

/// Exact histogram of `(u_Q, u_M)` and Wilson-sum moments over all `2^N`
/// configurations. `wilson_size` defaults to `floor(L/2)`.
pub fn histogram(model: &GaugeModel, sample: &DisorderSample, wilson_size: Option<usize>) -> Result<Histogram> {
    sample.check_model(model)?;
    let n = model.num_spins();
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            cap: ENUMERATION_CAP,
            found: n,
        });
    }
    let wilson_size = wilson_size.unwrap_or_else(|| model.default_patch_size());
    let cols = model.num_measurement_terms() + 1;
    let len = (model.num_qubit_terms() + 1) * cols;
    // Independent Gray-code segments; integer sums make the merge exact.
    let chunk_log2 = n.saturating_sub(CHUNK_COUNT_LOG2);
    let chunks = 1u64 << (n - chunk_log2);
    let partials: Vec<(Vec<HistogramCell>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(Vec<HistogramCell>, usize)> {
            let start = c << chunk_log2;
            let end = start + (1u64 << chunk_log2);
            let mut walker = Walker::new(model, sample, wilson_size, start ^ (start >> 1))?;
            let mut cells = vec![HistogramCell::default(); len];
            let mut record = |w: &Walker| {
                let cell = &mut cells[w.u_q * cols + w.u_m];
                let s = w.wilson as i128;
                cell.count += 1;
                cell.wilson[0] += s;
                cell.wilson[1] += s * s;
                cell.wilson[2] += s * s * s;
            };
            record(&walker);
            for i in start + 1..end {
                walker.flip(i.trailing_zeros() as usize);
                record(&walker);
            }
            Ok((cells, walker.patches.len()))
        })
        .collect::<Result<_>>()?;
    let num_patches = partials[0].1;
    let mut cells = vec![HistogramCell::default(); len];
    for (part, _) in &partials {
        for (total, c) in cells.iter_mut().zip(part) {
            total.count += c.count;
            for k in 0..3 {
                total.wilson[k] += c.wilson[k];
            }
        }
    }
    Ok(Histogram {
        num_qubit: model.num_qubit_terms(),
        num_measurement: model.num_measurement_terms(),
        num_patches,
        wilson_size,
        cells,
    })
}

/// Canonical averages from an exact histogram.
pub fn evaluate(hist: &Histogram, couplings: &Couplings<f64>, temperature: f64) -> ExactPoint {
    let beta = 1.0 / temperature;
    let cols = hist.num_measurement + 1;
    let levels: Vec<(f64, &HistogramCell)> = hist
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.count > 0)
        .map(|(i, c)| {
            let (u_q, u_m) = ((i / cols) as f64, (i % cols) as f64);
            let e = -couplings.j * (hist.num_qubit as f64 - 2.0 * u_q)
                - couplings.k * (hist.num_measurement as f64 - 2.0 * u_m);
            (e, c)
        })
        .collect();
    let shift = levels
        .iter()
        .map(|(e, c)| (c.count as f64).ln() - beta * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let weight = |e: f64| (-beta * e - shift).exp();
    let z: f64 = levels.iter().map(|(e, c)| c.count as f64 * weight(*e)).sum();
    let avg = |f: &dyn Fn(f64, &HistogramCell) -> f64| -> f64 {
        levels.iter().map(|(e, c)| weight(*e) * f(*e, c)).sum::<f64>() / z
    };
    let energy = avg(&|e, c| c.count as f64 * e);
    let energy_sq = avg(&|e, c| c.count as f64 * e * e);
    let variance = avg(&|e, c| c.count as f64 * (e - energy).powi(2));
    let p = hist.num_patches as f64;
    let num_terms = (hist.num_qubit + hist.num_measurement) as f64;
    ExactPoint {
        temperature,
        log_z: z.ln() + shift,
        energy,
        energy_sq,
        specific_heat: beta * beta * variance / num_terms,
        wilson: avg(&|_, c| c.wilson[0] as f64) / p,
        wilson_sq: avg(&|_, c| c.wilson[1] as f64) / (p * p),
        wilson_cube: avg(&|_, c| c.wilson[2] as f64) / (p * p * p),
    }
}

/// Exact averages of one sample on a temperature grid.
pub fn enumerate(
    model: &GaugeModel,
    sample: &DisorderSample,
    couplings: &Couplings<f64>,
    temperatures: &[f64],
    wilson_size: Option<usize>,
) -> Result<ExactResult> {
    if let Some(&t) = temperatures.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidLadder(format!("temperature {t} must be positive and finite")));
    }
    let histogram = histogram(model, sample, wilson_size)?;
    let points = temperatures.iter().map(|&t| evaluate(&histogram, couplings, t)).collect();
    Ok(ExactResult { histogram, points })
}

/// Rank over GF(2) of a set of subsets of `0..n`.
pub fn gf2_rank(n: usize, rows: &[Vec<u32>]) -> usize {
    let words = n.div_ceil(64);
    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for row in rows {
        let mut v = vec![0u64; words];
        for &i in row {
            v[i as usize / 64] ^= 1 << (i % 64);
        }
        for (b, &pivot) in basis.iter().zip(&pivots) {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                v.iter_mut().zip(b).for_each(|(x, y)| *x ^= y);
            }
        }
        if let Some(w) = v.iter().position(|&x| x != 0) {
            pivots.push(w * 64 + v[w].trailing_zeros() as usize);
            basis.push(v);
        }
    }
    basis.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaugeOrbitReport {
    pub generators: usize,
    pub rank: usize,
    /// Every generator flips an even number of spins in every term.
    pub preserves_terms: bool,
    /// Size of the orbit walked, `2^rank` when it was walked.
    pub orbit_walked: Option<u64>,
    /// Every walked orbit element had the reference energy counts.
    pub energy_invariant: bool,
}

impl GaugeOrbitReport {
    pub fn orbit_log2(&self) -> usize {
        self.rank
    }

    pub fn passed(&self) -> bool {
        self.preserves_terms && self.energy_invariant
    }
}

/// Checks gauge invariance of the couplings: the generator rank, the orbit
/// size `2^rank`, and (for ranks up to [`ORBIT_WALK_CAP`]) that every element
/// of the orbit of `config` is distinct and has the same energy counts.
pub fn gauge_orbit_check(
    model: &GaugeModel,
    sample: &DisorderSample,
    config: &SpinConfiguration,
) -> Result<GaugeOrbitReport> {
    let generators = model.generators();
    let rank = gf2_rank(model.num_spins(), generators);
    let preserves_terms = model.generators_preserve_terms();
    let reference = energy_counts(model, sample, config)?;
    let mut energy_invariant = true;
    for g in generators {
        let mut c = config.clone();
        crate::model::apply_gauge(&mut c, g);
        energy_invariant &= energy_counts(model, sample, &c)? == reference;
    }
    let mut orbit_walked = None;
    if rank <= ORBIT_WALK_CAP {
        let basis = independent_subset(model.num_spins(), generators);
        let mut current = config.clone();
        let mut seen = std::collections::HashSet::with_capacity(1 << rank);
        seen.insert(current.as_slice().to_vec());
        for i in 1u64..(1u64 << rank) {
            crate::model::apply_gauge(&mut current, &basis[i.trailing_zeros() as usize]);
            energy_invariant &= energy_counts(model, sample, &current)? == reference;
            seen.insert(current.as_slice().to_vec());
        }
        energy_invariant &= seen.len() as u64 == 1u64 << rank;
        orbit_walked = Some(seen.len() as u64);
    }
    Ok(GaugeOrbitReport {
        generators: generators.len(),
        rank,
        preserves_terms,
        orbit_walked,
        energy_invariant,
    })
}

fn independent_subset(n: usize, rows: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = Vec::new();
    for row in rows {
        out.push(row.clone());
        if gf2_rank(n, &out) < out.len() {
            out.pop();
        }
    }
    out
}
