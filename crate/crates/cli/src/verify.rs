//! Monte Carlo against exact enumeration and gauge-orbit checks on
//! instances small enough to enumerate.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ftgauge::analysis::{build_table, exact_rows, CsvRow, TableKey};
use ftgauge::disorder::generate;
use ftgauge::montecarlo::{run_sample, TemperatureLadder};
use ftgauge::oracle::{enumerate, gauge_orbit_check};
use ftgauge::seed::chacha_seed;
use ftgauge::{Family, Incidence, Schedule, SpinConfiguration};

use crate::pipeline::couplings;

/// Agreement threshold in standard errors.
pub const Z_MAX: f64 = 3.0;
/// Fraction of (temperature, observable) comparisons that must agree.
pub const MIN_AGREEMENT: f64 = 0.95;

/// Extra doublings allowed beyond the budget for samples that have not
/// equilibrated.
pub const EXTENSION_LOG2: u32 = 4;

/// One Monte Carlo estimate next to its exact value.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub temperature: f64,
    pub observable: &'static str,
    pub mc: f64,
    pub error: f64,
    pub exact: f64,
}

impl Comparison {
    pub fn z(&self) -> f64 {
        (self.mc - self.exact).abs() / self.error
    }

    pub fn agrees(&self) -> bool {
        self.z() <= Z_MAX
    }
}

/// A single disorder sample simulated and enumerated.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub key: TableKey,
    pub sample_index: u64,
    pub comparisons: Vec<Comparison>,
    pub exact_rows: Vec<CsvRow>,
}

/// Simulates one sample with a single chain and compares the energy per term
/// and specific heat with enumeration at every ladder temperature.
pub fn compare_sample(
    key: TableKey,
    sample_index: u64,
    ladder: &TemperatureLadder<f64>,
    budget: u32,
    seed: u64,
) -> Result<OracleRun> {
    let model = key.family.build(key.l, key.m)?;
    let incidence = Incidence::new(&model);
    let sample = generate(&model, key.p, key.q, seed, sample_index)?;
    let couplings = couplings(key.p, key.q)?;
    let set = run_sample(
        &model,
        &incidence,
        &sample,
        couplings,
        ladder.clone(),
        Schedule {
            min_log2: budget,
            max_log2: budget + EXTENSION_LOG2,
            ..Schedule::default()
        },
        chacha_seed(&[seed, 0x5652, sample_index]),
    )?;
    let table = build_table(key, &[set], ftgauge::analysis::DEFAULT_RESAMPLES, seed)?;
    let exact = enumerate(&model, &sample, &couplings, ladder.temperatures(), None)?;
    let num_terms = model.num_terms() as f64;
    let mut comparisons = Vec::new();
    for (row, point) in table.rows.iter().zip(&exact.points) {
        comparisons.push(Comparison {
            temperature: row.temperature,
            observable: "energy_per_term",
            mc: row.energy.value,
            error: row.energy.error,
            exact: point.energy / num_terms,
        });
        comparisons.push(Comparison {
            temperature: row.temperature,
            observable: "specific_heat",
            mc: row.specific_heat.value,
            error: row.specific_heat.error,
            exact: point.specific_heat,
        });
    }
    Ok(OracleRun {
        key,
        sample_index,
        comparisons,
        exact_rows: exact_rows(&key, &exact),
    })
}

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {:<36} {}", self.name, self.detail)
    }
}

fn agreement_check(name: String, runs: &[OracleRun]) -> Check {
    let all: Vec<&Comparison> = runs.iter().flat_map(|r| &r.comparisons).collect();
    let agree = all.iter().filter(|c| c.agrees()).count();
    let worst = all.iter().map(|c| c.z()).fold(0.0, f64::max);
    let fraction = agree as f64 / all.len() as f64;
    Check {
        name,
        passed: fraction >= MIN_AGREEMENT,
        detail: format!(
            "{agree}/{} within {Z_MAX} sigma ({:.1}%), worst {worst:.2} sigma",
            all.len(),
            100.0 * fraction
        ),
    }
}

/// Oracle instances: family, L, M, p, q.
pub const INSTANCES: [(Family, usize, usize, f64, f64); 5] = [
    (Family::Toric, 2, 2, 0.0, 0.0),
    (Family::Toric, 2, 2, 0.1, 0.1),
    (Family::Toric, 2, 2, 0.05, 0.2),
    (Family::Color, 2, 2, 0.0, 0.0),
    (Family::Color, 2, 2, 0.05, 0.05),
];

/// Temperature ladder of the oracle runs.
pub fn oracle_ladder() -> TemperatureLadder<f64> {
    TemperatureLadder::linear(0.8, 3.0, 12).expect("valid ladder")
}

/// Runs the full suite; `samples` disorder samples per disordered instance.
pub fn oracle_suite(seed: u64, samples: u64, budget: u32) -> Result<(Vec<Check>, Vec<CsvRow>)> {
    let ladder = oracle_ladder();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (family, l, m, p, q) in INSTANCES {
        let key = TableKey { family, l, m, p, q };
        let n = if p == 0.0 && q == 0.0 { 1 } else { samples };
        let runs = (0..n)
            .map(|i| compare_sample(key, i, &ladder, budget, seed))
            .collect::<Result<Vec<_>>>()?;
        rows.extend(runs.iter().flat_map(|r| r.exact_rows.iter().cloned()));
        checks.push(agreement_check(
            format!("mc-vs-exact {family} L={l} M={m} p={p} q={q}"),
            &runs,
        ));
    }
    for (family, l, m) in [(Family::Toric, 2, 2), (Family::Color, 2, 2), (Family::Color, 3, 2)] {
        let model = family.build(l, m)?;
        let sample = generate(&model, 0.1, 0.1, seed, 0)?;
        let mut rng = ChaCha8Rng::from_seed(chacha_seed(&[seed, 0x4741]));
        let spins = (0..model.num_spins()).map(|_| if rng.gen() { 1 } else { -1 }).collect();
        let report = gauge_orbit_check(&model, &sample, &SpinConfiguration::new(spins)?)?;
        checks.push(Check {
            name: format!("gauge-orbit {family} L={l} M={m}"),
            passed: report.passed(),
            detail: format!(
                "rank {} of {} generators, orbit {}",
                report.rank,
                report.generators,
                report.orbit_walked.map_or("not walked".into(), |n| n.to_string())
            ),
        });
    }
    Ok((checks, rows))
}
