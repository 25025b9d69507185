//! Disorder-averaged observables per temperature with bootstrap errors.

use serde::{Deserialize, Serialize};

use super::stats::{bootstrap, mean, skewness_from_moments, std_dev, Estimate};
use crate::error::{Error, Result};
use crate::geometry::Family;
use crate::montecarlo::MeasurementSet;
use crate::scalar::Real;

/// Identifies one simulated point of parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableKey {
    pub family: Family,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub p: f64,
    pub q: f64,
}

/// What the bootstrap resampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSource {
    /// Disorder samples (the default).
    Disorder,
    /// Thermal blocks of the single usable sample.
    Thermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ObservableRow<R: Real> {
    pub temperature: R,
    /// Energy per term.
    pub energy: Estimate<R>,
    /// `β²(⟨E²⟩ − ⟨E⟩²) / N_terms`, averaged over disorder.
    pub specific_heat: Estimate<R>,
    pub wilson: Estimate<R>,
    /// `None` when the pooled Wilson distribution has zero variance.
    pub skewness: Option<Estimate<R>>,
}

/// The `C(T)` and skewness curves of one bootstrap replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Curves<R: Real> {
    pub specific_heat: Vec<R>,
    pub skewness: Vec<Option<R>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ObservableTable<R: Real> {
    pub key: TableKey,
    pub num_terms: usize,
    pub wilson_size: usize,
    /// Samples entering the averages.
    pub n_samples: usize,
    /// Samples excluded because they failed the equilibration test.
    pub n_flagged: usize,
    pub error_source: ErrorSource,
    pub rows: Vec<ObservableRow<R>>,
    /// Bootstrap replicates, kept for error bars of derived quantities.
    pub replicates: Vec<Curves<R>>,
}

impl<R: Real> ObservableTable<R> {
    pub fn temperatures(&self) -> Vec<R> {
        self.rows.iter().map(|r| r.temperature).collect()
    }

    pub fn specific_heat(&self) -> Vec<R> {
        self.rows.iter().map(|r| r.specific_heat.value).collect()
    }

    pub fn skewness(&self) -> Vec<Option<R>> {
        self.rows.iter().map(|r| r.skewness.map(|s| s.value)).collect()
    }
}

/// Per-temperature means of E, E², W, W², W³ for one resampling unit.
type Unit<R> = Vec<[R; 5]>;

struct Point<R> {
    energy: R,
    specific_heat: R,
    wilson: R,
    skewness: Option<R>,
}

/// Observables of a multiset of units. With `pooled` the fluctuation
/// formula is applied to the pooled moments (thermal blocks of one sample);
/// otherwise per unit and then averaged (disorder samples).
fn evaluate<R: Real>(units: &[Unit<R>], idx: &[usize], betas: &[R], num_terms: R, pooled: bool) -> Vec<Point<R>> {
    let n = R::from_usize_lossy(idx.len());
    betas
        .iter()
        .enumerate()
        .map(|(t, &beta)| {
            let mut sums = [R::zero(); 5];
            let mut c = R::zero();
            for &i in idx {
                let u = &units[i][t];
                for (s, &v) in sums.iter_mut().zip(u) {
                    *s = *s + v;
                }
                c = c + beta * beta * (u[1] - u[0] * u[0]);
            }
            let m = sums.map(|s| s / n);
            let specific_heat = if pooled {
                beta * beta * (m[1] - m[0] * m[0]) / num_terms
            } else {
                c / n / num_terms
            };
            Point {
                energy: m[0] / num_terms,
                specific_heat,
                wilson: m[2],
                skewness: skewness_from_moments(m[2], m[3], m[4]),
            }
        })
        .collect()
}

/// Aggregates measurement sets of one `(family, L, M, p, q)` point.
///
/// Samples whose `equilibrated` flag is false are excluded and counted.
/// Errors are bootstrap standard deviations over disorder samples; with a
/// single usable sample the thermal blocks are resampled instead.
pub fn build_table<R: Real>(
    key: TableKey,
    sets: &[MeasurementSet<R>],
    resamples: usize,
    seed: u64,
) -> Result<ObservableTable<R>> {
    let first = sets.first().ok_or(Error::TooFewValues { needed: 1, found: 0 })?;
    for set in sets {
        if set.temperatures != first.temperatures || set.num_terms != first.num_terms {
            return Err(Error::Format {
                what: "measurement sets",
                reason: "samples of one table must share ladder and model".into(),
            });
        }
    }
    let usable: Vec<&MeasurementSet<R>> = sets.iter().filter(|s| s.equilibrated).collect();
    let n_flagged = sets.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::NoUsableSamples { flagged: n_flagged });
    }
    let temperatures = first.temperatures.clone();
    let betas: Vec<R> = temperatures.iter().map(|&t| R::one() / t).collect();
    let num_terms = R::from_usize_lossy(first.num_terms);

    let (units, error_source): (Vec<Unit<R>>, _) = if usable.len() > 1 {
        let units = usable
            .iter()
            .map(|s| {
                s.thermal
                    .iter()
                    .map(|b| {
                        [
                            mean(&b.energy),
                            mean(&b.energy_sq),
                            mean(&b.wilson),
                            mean(&b.wilson_sq),
                            mean(&b.wilson_cube),
                        ]
                    })
                    .collect()
            })
            .collect();
        (units, ErrorSource::Disorder)
    } else {
        let s = usable[0];
        let blocks = s.thermal[0].energy.len();
        let units = (0..blocks)
            .map(|k| {
                s.thermal
                    .iter()
                    .map(|b| [b.energy[k], b.energy_sq[k], b.wilson[k], b.wilson_sq[k], b.wilson_cube[k]])
                    .collect()
            })
            .collect();
        (units, ErrorSource::Thermal)
    };
    let pooled = error_source == ErrorSource::Thermal;
    let all: Vec<usize> = (0..units.len()).collect();
    let central = evaluate(&units, &all, &betas, num_terms, pooled);
    let replicas = bootstrap(units.len(), resamples, seed, |idx| {
        evaluate(&units, idx, &betas, num_terms, pooled)
    });

    let spread = |f: &dyn Fn(&Point<R>) -> Option<R>, t: usize| -> Option<R> {
        let values: Vec<R> = replicas.iter().filter_map(|r| f(&r[t])).collect();
        (values.len() >= 2).then(|| std_dev(&values))
    };
    let rows = central
        .iter()
        .enumerate()
        .map(|(t, c)| {
            let err = |f: &dyn Fn(&Point<R>) -> Option<R>| spread(f, t).unwrap_or_else(R::zero);
            ObservableRow {
                temperature: temperatures[t],
                energy: Estimate::new(c.energy, err(&|p| Some(p.energy))),
                specific_heat: Estimate::new(c.specific_heat, err(&|p| Some(p.specific_heat))),
                wilson: Estimate::new(c.wilson, err(&|p| Some(p.wilson))),
                skewness: c.skewness.map(|s| Estimate::new(s, err(&|p| p.skewness))),
            }
        })
        .collect();
    let replicates = replicas
        .iter()
        .map(|r| Curves {
            specific_heat: r.iter().map(|p| p.specific_heat).collect(),
            skewness: r.iter().map(|p| p.skewness).collect(),
        })
        .collect();
    Ok(ObservableTable {
        key,
        num_terms: first.num_terms,
        wilson_size: first.wilson_size,
        n_samples: usable.len(),
        n_flagged,
        error_source,
        rows,
        replicates,
    })
}
