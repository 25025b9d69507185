//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! overnight bracketing run (criterion 5) only runs with `--ignored` or
//! `--include-ignored`; a name filter such as `c4` selects criteria.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use ftgauge::analysis::{build_table, TableKey, TcPair, DEFAULT_RESAMPLES};
use ftgauge::disorder::generate;
use ftgauge::geometry::Patch;
use ftgauge::model::{apply_gauge, energy_counts, wilson_loop, Couplings};
use ftgauge::montecarlo::equilibration::{check_series, DEFAULT_BLOCKS};
use ftgauge::montecarlo::{run_sample, TemperatureLadder};
use ftgauge::nishimori::nishimori_point;
use ftgauge::seed::chacha_seed;
use ftgauge::{DisorderSample, Family, Incidence, Schedule, SpinConfiguration};
use ftgauge_cli::config::{resolve, Preset, Request};
use ftgauge_cli::pipeline::{execute, RunOptions};
use ftgauge_cli::store::PHASE_FILE;
use ftgauge_cli::verify::{compare_sample, oracle_ladder};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

/// Criterion 1: Monte Carlo against exact enumeration on toric L = M = 2.
fn c1() -> Result<Outcome> {
    let ladder = oracle_ladder();
    let (mut pairs, mut agree) = (0usize, 0usize);
    let mut worst = 0.0f64;
    for (p, q) in [(0.0, 0.0), (0.1, 0.1), (0.05, 0.2)] {
        let key = TableKey {
            family: Family::Toric,
            l: 2,
            m: 2,
            p,
            q,
        };
        for sample in 0..5 {
            let run = compare_sample(key, sample, &ladder, 16, 2024)?;
            // Comparisons come in (energy, specific heat) order per temperature.
            for both in run.comparisons.chunks(2) {
                pairs += 1;
                agree += both.iter().all(|c| c.agrees()) as usize;
                worst = both.iter().map(|c| c.z()).fold(worst, f64::max);
            }
        }
    }
    let fraction = agree as f64 / pairs as f64;
    outcome(
        fraction >= 0.95,
        format!(
            "{agree}/{pairs} (sample, T) pairs with E and C within 3 sigma ({:.1}%, need 95%); worst {worst:.2} sigma",
            100.0 * fraction
        ),
    )
}

/// Criterion 2: gauge generators leave energy and Wilson loops unchanged.
fn c2() -> Result<Outcome> {
    const PAIRS: usize = 10_000;
    let mut rng = ChaCha8Rng::from_seed(chacha_seed(&[2]));
    let mut report = Vec::new();
    let mut violations = 0usize;
    for family in [Family::Toric, Family::Color] {
        let mut checked = 0usize;
        for (l, m) in [(3, 2), (3, 6), (6, 2), (6, 6)] {
            let model = family.build(l, m)?;
            let sample = generate(&model, 0.1, 0.1, 7, l as u64 * 10 + m as u64)?;
            for _ in 0..PAIRS / 4 {
                let config = SpinConfiguration::new(
                    (0..model.num_spins()).map(|_| if rng.gen() { 1 } else { -1 }).collect(),
                )?;
                let generator = &model.generators()[rng.gen_range(0..model.generators().len())];
                let patch = Patch {
                    layer: rng.gen_range(0..m),
                    x0: rng.gen_range(0..l),
                    y0: rng.gen_range(0..l),
                    size: rng.gen_range(1..=l),
                };
                let mut moved = config.clone();
                apply_gauge(&mut moved, generator);
                let same_energy = energy_counts(&model, &sample, &config)? == energy_counts(&model, &sample, &moved)?;
                let same_wilson =
                    wilson_loop(&model, &sample, &config, &patch)? == wilson_loop(&model, &sample, &moved, &patch)?;
                violations += !(same_energy && same_wilson) as usize;
                checked += 1;
            }
        }
        report.push(format!("{family}: {checked} pairs"));
    }
    outcome(
        violations == 0,
        format!("{}; {violations} with nonzero energy or Wilson change", report.join(", ")),
    )
}

/// Criterion 3: both Nishimori equalities on a 40 x 25 grid of (p, q).
fn c3() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut points = 0;
    for i in 0..40 {
        let p = 0.001 + 0.498 * i as f64 / 39.0;
        for k in 0..25 {
            let q = 0.001 + 0.498 * k as f64 / 24.0;
            let n = nishimori_point(p, q)?;
            let rel = |lhs: f64, rhs: f64| ((lhs - rhs) / rhs).abs();
            worst = worst
                .max(rel((-2.0 * n.j / n.temperature).exp(), p / (1.0 - p)))
                .max(rel((-2.0 * n.k / n.temperature).exp(), q / (1.0 - q)));
            points += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{points} points, worst relative deviation {worst:.2e} (need <= 1e-12)"),
    )
}

/// Criterion 4: clean toric L = M = 6, one sample, Table I window.
fn c4() -> Result<Outcome> {
    let model = Family::Toric.build(6, 6)?;
    let incidence = Incidence::new(&model);
    let sample = DisorderSample::clean(&model);
    let ladder = TemperatureLadder::linear(1.2, 2.0, 64)?;
    let schedule = Schedule {
        min_log2: 15,
        max_log2: 22,
        ..Schedule::default()
    };
    let set = run_sample(&model, &incidence, &sample, Couplings::isotropic(), ladder, schedule, chacha_seed(&[4]))?;
    ensure!(set.equilibrated, "clean L=6 run did not equilibrate");
    let key = TableKey {
        family: Family::Toric,
        l: 6,
        m: 6,
        p: 0.0,
        q: 0.0,
    };
    let table = build_table(key, &[set], DEFAULT_RESAMPLES, 4)?;
    let tc = TcPair::of(&table)?;
    let in_window = |t: f64| (1.2..=2.0).contains(&t);
    let bracketed = !tc.peak.inconclusive && in_window(tc.peak.tc);
    let skew_ok = !tc.skewness.inconclusive && in_window(tc.skewness.tc);
    let combined = (tc.peak.error.powi(2) + tc.skewness.error.powi(2)).sqrt();
    outcome(
        bracketed && skew_ok && tc.agree(),
        format!(
            "Tc(peak) = {:.4} +- {:.4}, Tc(skewness) = {:.4} +- {:.4}; in [1.20, 2.00]: {}; \
             |difference| = {:.4} = {:.1} combined sigma (agree within 2: {})",
            tc.peak.tc,
            tc.peak.error,
            tc.skewness.tc,
            tc.skewness.error,
            bracketed && skew_ok,
            (tc.peak.tc - tc.skewness.tc).abs(),
            (tc.peak.tc - tc.skewness.tc).abs() / combined,
            tc.agree()
        ),
    )
}

fn verdicts(dir: &Path) -> Result<BTreeMap<String, String>> {
    let diagram: Value = serde_json::from_str(&fs::read_to_string(dir.join(PHASE_FILE))?)?;
    let mut out = BTreeMap::new();
    for point in diagram["points"].as_array().context("points")? {
        let sizes: Vec<String> = point["sizes"]
            .as_array()
            .context("sizes")?
            .iter()
            .map(|s| {
                let (peak, skew) = (&s["tc"]["peak"], &s["tc"]["skewness"]);
                format!(
                    "L={} Tc(peak) {:.3}+-{:.3} Tc(skew) {:.3}+-{:.3}",
                    s["L"],
                    peak["tc"].as_f64().unwrap_or(f64::NAN),
                    peak["error"].as_f64().unwrap_or(f64::NAN),
                    skew["tc"].as_f64().unwrap_or(f64::NAN),
                    skew["error"].as_f64().unwrap_or(f64::NAN)
                )
            })
            .collect();
        out.insert(
            format!("{}", point["p"]),
            format!(
                "{} ({}; T_N {:.3}; {})",
                point["verdict"].as_str().unwrap_or("none"),
                point["verdict_reason"].as_str().unwrap_or(""),
                point["nishimori_temperature"].as_f64().unwrap_or(f64::NAN),
                sizes.join(", ")
            ),
        );
    }
    Ok(out)
}

/// Criterion 5: ordered/disordered bracketing at L in {4, 6}, 100 samples, b = 15.
fn c5() -> Result<Outcome> {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-c5");
    let mut lines = Vec::new();
    let mut passed = true;
    for (family, ps, expect) in [
        (Family::Toric, vec![0.02, 0.06], vec![Some("ordered"), Some("disordered")]),
        (Family::Color, vec![0.04], vec![None]),
    ] {
        let request = Request {
            family: Some(family),
            alpha: Some(1.0),
            p: ps.clone(),
            l: vec![4, 6],
            m: vec![4, 6],
            nsa: Some(100),
            b: Some(15),
            max_log2: Some(17),
            seed: 5,
            preset: Some(Preset::Paper),
            output: Some(root.join(family.to_string())),
            ..Request::default()
        };
        let config = resolve(&request)?;
        let started = Instant::now();
        execute(&config, &RunOptions::default())?;
        let found = verdicts(&config.output)?;
        for (p, want) in ps.iter().zip(expect) {
            let got = found.get(&format!("{p}")).cloned().unwrap_or_else(|| "missing".into());
            let ok = match want {
                Some(w) => got.starts_with(w),
                None => !got.starts_with("disordered"),
            };
            passed &= ok;
            lines.push(format!(
                "{family} p=q={p}: {got} [want {}]",
                want.map_or("not disordered".to_string(), str::to_string)
            ));
        }
        lines.push(format!("{family} took {:.0} s", started.elapsed().as_secs_f64()));
    }
    outcome(passed, lines.join("; "))
}

fn ftgauge(args: &[&str]) -> Result<std::process::Output> {
    Ok(Command::new(env!("CARGO_BIN_EXE_ftgauge"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()?)
}

/// Every output file of a run directory; the manifest without its wall time.
fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir)?.to_string_lossy().into_owned();
            let mut bytes = fs::read(&path)?;
            if rel == "manifest.json" {
                let mut v: Value = serde_json::from_slice(&bytes)?;
                v.as_object_mut().context("manifest")?.remove("wall_time_seconds");
                bytes = serde_json::to_vec(&v)?;
            }
            out.insert(rel, bytes);
        }
    }
    Ok(out)
}

/// Criterion 6: repeated runs and interrupted runs give identical outputs.
fn c6() -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let dir = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let base = [
        "simulate", "--family", "toric", "--p", "0.02,0.04", "--L", "3,4", "--M", "3,4", "--nsa", "2", "--b", "13",
        "--tmin", "0.7", "--tmax", "1.6", "--nt", "8", "--seed", "6", "--resamples", "200", "--checkpoint-log2", "11",
    ];
    let run = |out: &str, extra: &[&str]| -> Result<std::process::Output> {
        let mut args: Vec<&str> = base.to_vec();
        args.extend(["--output", out]);
        args.extend(extra);
        ftgauge(&args)
    };
    let mut checks = Vec::new();
    let (a, b, c) = (dir("a"), dir("b"), dir("c"));
    checks.push(("first run exits 0", run(&a, &["--workers", "1"])?.status.code() == Some(0)));
    checks.push(("repeat exits 0", run(&b, &["--workers", "2"])?.status.code() == Some(0)));
    checks.push(("repeat byte-identical", snapshot(a.as_ref())? == snapshot(b.as_ref())?));

    let halted = run(&c, &["--halt-after-sweeps", "4096"])?;
    let has_checkpoints = fs::read_dir(Path::new(&c).join("samples"))?
        .flatten()
        .any(|d| fs::read_dir(d.path()).is_ok_and(|f| f.flatten().any(|f| f.path().extension().is_some_and(|e| e == "ckpt"))));
    checks.push(("halt at 2^12 leaves checkpoints", halted.status.success() && has_checkpoints));
    checks.push(("resume exits 0", ftgauge(&["resume", &c])?.status.code() == Some(0)));
    checks.push(("resumed run byte-identical", snapshot(a.as_ref())? == snapshot(c.as_ref())?));

    // A checkpointed run whose configuration was edited afterwards.
    let d = dir("d");
    run(&d, &["--halt-after-sweeps", "4096"])?;
    let config_path = Path::new(&d).join("config.json");
    let edited = fs::read_to_string(&config_path)?.replace("\"master_seed\": 6", "\"master_seed\": 7");
    fs::write(&config_path, edited)?;
    let refused = ftgauge(&["resume", &d])?;
    checks.push(("edited config refused with exit 2", refused.status.code() == Some(2)));

    let empty = dir("empty");
    fs::create_dir_all(&empty)?;
    let nothing = ftgauge(&["resume", &empty])?;
    let stderr = String::from_utf8_lossy(&nothing.stderr);
    checks.push((
        "empty dir: 'nothing to resume'",
        nothing.status.code() == Some(2) && stderr.contains("nothing to resume"),
    ));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks: {}", checks.len(), checks.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "))
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

/// Criterion 7: the equilibration rule on synthetic series of 2^12 - 1
/// sweeps, 500 relaxing towards equilibrium and 500 stationary.
fn c7() -> Result<Outcome> {
    const LEN: usize = (1 << 12) - 1;
    const TAU: f64 = 1024.0;
    let mut rng = ChaCha8Rng::from_seed(chacha_seed(&[7]));
    let noise = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let (mut false_alarms, mut misses) = (0, 0);
    for trial in 0..1000 {
        let drifting = trial % 2 == 0;
        let series: Vec<f64> = (0..LEN)
            .map(|i| {
                let relax = if drifting { (-(i as f64 + 1.0) / TAU).exp() } else { 0.0 };
                relax + noise(&mut rng)
            })
            .collect();
        let converged = check_series(&[&series], DEFAULT_BLOCKS)?.converged;
        match (drifting, converged) {
            (true, true) => misses += 1,
            (false, false) => false_alarms += 1,
            _ => {}
        }
    }
    let correct = 1000 - misses - false_alarms;
    outcome(
        correct >= 990,
        format!(
            "{correct}/1000 correct (need 990): {misses}/500 drifting series accepted, \
             {false_alarms}/500 stationary series rejected"
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Result<Outcome>, bool);

const CRITERIA: [Criterion; 7] = [
    ("c1", "oracle equivalence", c1, false),
    ("c2", "gauge invariance", c2, false),
    ("c3", "Nishimori closed forms", c3, false),
    ("c4", "clean transition bracket", c4, false),
    ("c5", "threshold bracketing (overnight)", c5, true),
    ("c6", "determinism and resume", c6, false),
    ("c7", "equilibration detector", c7, false),
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ignored_only = args.iter().any(|a| a == "--ignored");
    let include_ignored = ignored_only || args.iter().any(|a| a == "--include-ignored");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| a == "--list") {
        for (name, title, _, ignored) in CRITERIA {
            println!("{name}_{}: test{}", title.replace(' ', "_"), if ignored { " (ignored)" } else { "" });
        }
        return;
    }
    let mut failures = 0;
    for (i, (name, title, run, ignored)) in CRITERIA.into_iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        if (ignored && !include_ignored) || (!ignored && ignored_only) {
            println!("criterion {} ({title}): SKIPPED (run with --ignored)", i + 1);
            continue;
        }
        let started = Instant::now();
        let line = match run() {
            Ok(o) => {
                failures += !o.passed as usize;
                format!("{}  {}", if o.passed { "PASS" } else { "FAIL" }, o.detail)
            }
            Err(e) => {
                failures += 1;
                format!("FAIL  error: {e:#}")
            }
        };
        println!(
            "criterion {} ({title}): {line} [{:.1} s]",
            i + 1,
            started.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
