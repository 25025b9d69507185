//! Sample jobs, aggregation and the run manifest.

use std::fs;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ftgauge::analysis::{
    build_table, ordered_at_nishimori, table_rows, threshold_scan, write_csv, PhaseDiagram, PhasePoint, ScanPoint,
    SizeEntry, SizeTc, TableKey, TcPair,
};
use ftgauge::disorder::generate;
use ftgauge::model::Couplings;
use ftgauge::montecarlo::{Progress, SampleRun};
use ftgauge::nishimori::{nishimori_point, nishimori_temperature};
use ftgauge::seed::{chacha_seed, key as seed_key};
use ftgauge::{Family, Incidence, Schedule};

use crate::config::{InvalidConfig, RunConfig};
use crate::store::{self, CONFIG_FILE, CONFIG_HASH_FILE, CSV_FILE, MANIFEST_FILE, PHASE_FILE};

/// Stream tags keeping the Monte Carlo and bootstrap seeds apart from the
/// disorder keys.
const MC_STREAM: u64 = 0x4D43;
const BOOTSTRAP_STREAM: u64 = 0x4253;

fn family_tag(family: Family) -> u64 {
    match family {
        Family::Toric => 0,
        Family::Color => 1,
    }
}

/// One disorder sample of one point and size.
#[derive(Debug, Clone, Copy)]
pub struct Job {
    pub point: usize,
    pub size: usize,
    pub key: TableKey,
    pub sample_index: u64,
}

pub fn jobs(config: &RunConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for (pi, point) in config.points.iter().enumerate() {
        for (si, size) in point.sizes.iter().enumerate() {
            let key = TableKey {
                family: config.family,
                l: size.l,
                m: size.m,
                p: point.p,
                q: point.q,
            };
            out.extend((0..size.nsa as u64).map(|sample_index| Job {
                point: pi,
                size: si,
                key,
                sample_index,
            }));
        }
    }
    out
}

/// Couplings with `K = 1` on the Nishimori sheet; isotropic for the clean model.
pub fn couplings(p: f64, q: f64) -> ftgauge::Result<Couplings<f64>> {
    if p == 0.0 && q == 0.0 {
        return Ok(Couplings::isotropic());
    }
    Ok(nishimori_point(p, q)?.couplings())
}

fn mc_seed(config: &RunConfig, key: &TableKey, index: u64) -> [u8; 32] {
    chacha_seed(&[
        config.master_seed,
        MC_STREAM,
        family_tag(key.family),
        key.l as u64,
        key.m as u64,
        key.p.to_bits(),
        key.q.to_bits(),
        index,
    ])
}

fn bootstrap_seed(config: &RunConfig, key: &TableKey) -> u64 {
    seed_key(&[
        config.master_seed,
        BOOTSTRAP_STREAM,
        family_tag(key.family),
        key.l as u64,
        key.m as u64,
        key.p.to_bits(),
        key.q.to_bits(),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum Outcome {
    Finished { equilibrated: bool, sweeps: u64 },
    Existing,
    Halted { sweeps: u64 },
    Failed { reason: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Checkpoint and stop every sample once it reaches this many sweeps.
    pub halt_after_sweeps: Option<u64>,
}

fn run_job(config: &RunConfig, hash: &str, job: &Job, opts: &RunOptions) -> Result<Outcome> {
    let dir = &config.output;
    let (key, index) = (&job.key, job.sample_index);
    if store::measurement_path(dir, key, index).exists() {
        return Ok(Outcome::Existing);
    }
    let point = &config.points[job.point];
    let size = &point.sizes[job.size];
    let model = key.family.build(key.l, key.m)?;
    let incidence = Incidence::new(&model);
    let sample = generate(&model, key.p, key.q, config.master_seed, index)?;
    let couplings = couplings(key.p, key.q)?;
    let ladder = point.ladder.ladder()?;
    let schedule = Schedule {
        min_log2: size.b,
        max_log2: config.max_log2,
        wilson_size: config.wilson_size,
        ..Schedule::default()
    };
    let checkpoint = store::checkpoint_path(dir, key, index);
    let mut run = if checkpoint.exists() {
        let state = store::read_checkpoint(dir, hash, key, index)?;
        info!("resuming {} sample {index} at sweep {}", store::point_dir(key), state.ensemble.sweeps);
        SampleRun::resume(&model, &incidence, &sample, couplings, ladder, schedule, state)?
    } else {
        SampleRun::new(&model, &incidence, &sample, couplings, ladder, schedule, mc_seed(config, key, index))?
    };
    let every = 1u64 << config.checkpoint_log2;
    let mut write_error = None;
    let progress = run.run(|state| {
        let sweeps = state.ensemble.sweeps;
        let halt = opts.halt_after_sweeps.is_some_and(|h| sweeps >= h);
        if halt || sweeps % every == 0 {
            if let Err(e) = store::write_checkpoint(dir, hash, key, index, state) {
                write_error = Some(e);
                return ControlFlow::Break(());
            }
        }
        if halt {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    match progress {
        Progress::Halted(state) => Ok(Outcome::Halted {
            sweeps: state.ensemble.sweeps,
        }),
        Progress::Finished(set) => {
            store::write_measurement(dir, hash, key, index, &set)?;
            if checkpoint.exists() {
                fs::remove_file(&checkpoint).with_context(|| format!("removing {}", checkpoint.display()))?;
            }
            if !set.equilibrated {
                warn!(
                    "{} sample {index} did not equilibrate within 2^{} sweeps; it is flagged and excluded",
                    store::point_dir(key),
                    config.max_log2
                );
            }
            Ok(Outcome::Finished {
                equilibrated: set.equilibrated,
                sweeps: set.total_sweeps,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub point: String,
    pub sample_index: u64,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<SampleRecord>,
    pub halted: bool,
    pub manifest: Option<Manifest>,
}

/// Creates or checks the output directory against `config`.
fn prepare_dir(config: &RunConfig, hash: &str) -> Result<()> {
    let dir = &config.output;
    let hash_path = dir.join(CONFIG_HASH_FILE);
    if hash_path.exists() {
        let recorded = fs::read_to_string(&hash_path)?.trim().to_string();
        if recorded != hash {
            return Err(InvalidConfig(format!(
                "{} holds a run with configuration {} but this configuration hashes to {}; use a new --output",
                dir.display(),
                &recorded[..12.min(recorded.len())],
                &hash[..12]
            ))
            .into());
        }
        return Ok(());
    }
    store::write_atomic(&dir.join(CONFIG_FILE), config.to_json().as_bytes())?;
    store::write_atomic(&hash_path, format!("{hash}\n").as_bytes())?;
    Ok(())
}

/// Runs every pending sample, then aggregates unless halted.
pub fn execute(config: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let started = Instant::now();
    let hash = config.hash();
    prepare_dir(config, &hash)?;
    let jobs = jobs(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .context("building worker pool")?;
    info!(
        "running {} samples on {} workers into {}",
        jobs.len(),
        pool.current_num_threads(),
        config.output.display()
    );
    let records: Vec<SampleRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let outcome = run_job(config, &hash, job, opts).unwrap_or_else(|e| {
                    warn!("{} sample {} failed: {e:#}", store::point_dir(&job.key), job.sample_index);
                    Outcome::Failed {
                        reason: format!("{e:#}"),
                    }
                });
                SampleRecord {
                    point: store::point_dir(&job.key),
                    sample_index: job.sample_index,
                    outcome,
                }
            })
            .collect()
    });
    let failed = records.iter().filter(|r| matches!(r.outcome, Outcome::Failed { .. })).count();
    if failed == records.len() {
        let reason = match &records.first().map(|r| &r.outcome) {
            Some(Outcome::Failed { reason }) => reason.clone(),
            _ => "no samples".into(),
        };
        bail!("all {failed} samples failed; first error: {reason}");
    }
    let halted = records.iter().any(|r| matches!(r.outcome, Outcome::Halted { .. }));
    if halted {
        return Ok(RunReport {
            records,
            halted,
            manifest: None,
        });
    }
    let manifest = aggregate(config, &records, started)?;
    Ok(RunReport {
        records,
        halted,
        manifest: Some(manifest),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: String,
    pub expected: usize,
    pub completed: usize,
    pub flagged: usize,
    pub missing: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub seeding: String,
    pub wall_time_seconds: f64,
    pub samples_expected: usize,
    pub samples_completed: usize,
    pub samples_flagged: usize,
    pub points: Vec<PointSummary>,
    pub failures: Vec<SampleRecord>,
    pub notes: Vec<String>,
    pub files: Vec<FileEntry>,
}

fn file_entry(dir: &Path, path: &Path) -> Result<FileEntry> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileEntry {
        path: path.strip_prefix(dir).unwrap_or(path).to_string_lossy().replace('\\', "/"),
        sha256: store::sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Builds tables, Tc estimates, verdicts and threshold scans from the
/// measurement files and writes CSV, phase diagram and manifest.
pub fn aggregate(config: &RunConfig, records: &[SampleRecord], started: Instant) -> Result<Manifest> {
    let dir = &config.output;
    let hash = config.hash();
    let mut rows = Vec::new();
    let mut diagram = PhaseDiagram::new(config.family);
    let mut summaries = Vec::new();
    let mut notes = Vec::new();
    let mut files = vec![
        file_entry(dir, &dir.join(CONFIG_FILE))?,
        file_entry(dir, &dir.join(CONFIG_HASH_FILE))?,
    ];
    let mut scan = Vec::new();

    for point in &config.points {
        let mut entries = Vec::new();
        let mut size_tcs = Vec::new();
        for size in &point.sizes {
            let key = TableKey {
                family: config.family,
                l: size.l,
                m: size.m,
                p: point.p,
                q: point.q,
            };
            let mut sets = Vec::new();
            let mut missing = Vec::new();
            for index in 0..size.nsa as u64 {
                let path = store::measurement_path(dir, &key, index);
                if !path.exists() {
                    missing.push(index);
                    continue;
                }
                sets.push(store::read_measurement(dir, &hash, &key, index)?);
                files.push(file_entry(dir, &path)?);
            }
            let flagged = sets.iter().filter(|s| !s.equilibrated).count();
            summaries.push(PointSummary {
                point: store::point_dir(&key),
                expected: size.nsa,
                completed: sets.len(),
                flagged,
                missing: missing.clone(),
            });
            if !missing.is_empty() {
                notes.push(format!(
                    "{}: {} of {} samples missing",
                    store::point_dir(&key),
                    missing.len(),
                    size.nsa
                ));
            }
            if flagged > 0 {
                notes.push(format!(
                    "{}: {flagged} of {} samples flagged as not equilibrated and excluded",
                    store::point_dir(&key),
                    sets.len()
                ));
            }
            let table = match build_table(key, &sets, config.resamples, bootstrap_seed(config, &key)) {
                Ok(t) => t,
                Err(e) => {
                    notes.push(format!("{}: no table: {e}", store::point_dir(&key)));
                    continue;
                }
            };
            let tc = match TcPair::of(&table) {
                Ok(tc) => Some(tc),
                Err(e) => {
                    notes.push(format!("{}: no Tc estimate: {e}", store::point_dir(&key)));
                    None
                }
            };
            rows.extend(table_rows(&table, tc.as_ref()));
            if let Some(tc) = tc {
                let combined = tc.combined();
                size_tcs.push(SizeTc {
                    l: size.l,
                    m: size.m,
                    tc: combined,
                });
                entries.push(SizeEntry {
                    l: size.l,
                    m: size.m,
                    n_samples: table.n_samples,
                    n_flagged: table.n_flagged,
                    conclusive: !combined.inconclusive,
                    tc,
                });
            }
        }
        let clean = point.p == 0.0 && point.q == 0.0;
        let t_n = if clean { None } else { Some(nishimori_temperature(point.q)?) };
        let verdict = if clean || size_tcs.len() >= 2 {
            Some(ordered_at_nishimori(point.p, point.q, &size_tcs)?)
        } else {
            notes.push(format!(
                "p={}, q={}: a verdict needs Tc at two or more sizes",
                point.p, point.q
            ));
            None
        };
        if let (Some(t_n), Some(largest)) = (t_n, size_tcs.iter().max_by_key(|s| (s.l, s.m))) {
            scan.push(ScanPoint {
                p: point.p,
                q: point.q,
                tc: largest.tc.tc,
                tc_error: largest.tc.error,
                nishimori_temperature: t_n,
            });
        }
        diagram.points.push(PhasePoint {
            p: point.p,
            q: point.q,
            alpha: config.alpha,
            nishimori_temperature: t_n,
            sizes: entries,
            verdict: verdict.as_ref().map(|v| v.verdict),
            verdict_reason: verdict.map(|v| v.reason),
        });
    }
    if let Some(alpha) = config.alpha {
        if scan.len() >= 2 {
            match threshold_scan(config.family, alpha, &scan, config.resamples, config.master_seed) {
                Ok(t) => diagram.thresholds.push(t),
                Err(e) => notes.push(format!("threshold scan along q = {alpha} p: {e}")),
            }
        }
    }
    diagram.notes = notes.clone();

    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    store::write_atomic(&dir.join(CSV_FILE), &csv)?;
    store::write_atomic(&dir.join(PHASE_FILE), (diagram.to_json()? + "\n").as_bytes())?;
    files.push(file_entry(dir, &dir.join(CSV_FILE))?);
    files.push(file_entry(dir, &dir.join(PHASE_FILE))?);
    files.sort_by(|a, b| a.path.cmp(&b.path));

    let manifest = Manifest {
        format: "ftgauge-manifest".into(),
        version: 1,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        master_seed: config.master_seed,
        seeding: "disorder: splitmix64 key(master_seed, sample_index, term_index); \
                  Monte Carlo: ChaCha8 per temperature slot"
            .into(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        samples_expected: config.total_samples(),
        samples_completed: summaries.iter().map(|s| s.completed).sum(),
        samples_flagged: summaries.iter().map(|s| s.flagged).sum(),
        points: summaries,
        failures: records
            .iter()
            .filter(|r| matches!(r.outcome, Outcome::Failed { .. }))
            .cloned()
            .collect(),
        notes,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    store::write_atomic(&dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

/// Loads `config.json` from a run directory and checks it against the hash
/// recorded at creation.
pub fn load_run(dir: &Path) -> Result<RunConfig> {
    let config_path = dir.join(CONFIG_FILE);
    if !config_path.exists() {
        return Err(InvalidConfig(format!("nothing to resume: {} has no {CONFIG_FILE}", dir.display())).into());
    }
    let text = fs::read_to_string(&config_path)?;
    let mut config = RunConfig::from_json(&text)?;
    let recorded = fs::read_to_string(dir.join(CONFIG_HASH_FILE))
        .map(|s| s.trim().to_string())
        .unwrap_or_default();
    let hash = config.hash();
    if recorded != hash {
        return Err(InvalidConfig(format!(
            "{} was edited after the run started (hash {} recorded, {} now); refusing to resume",
            config_path.display(),
            &recorded[..12.min(recorded.len())],
            &hash[..12]
        ))
        .into());
    }
    config.output = dir.to_path_buf();
    Ok(config)
}

/// Samples of a run directory without a measurement file.
pub fn pending(config: &RunConfig) -> Vec<Job> {
    jobs(config)
        .into_iter()
        .filter(|j| !store::measurement_path(&config.output, &j.key, j.sample_index).exists())
        .collect()
}
