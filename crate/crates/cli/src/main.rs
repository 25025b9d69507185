use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::warn;

use ftgauge::analysis::write_csv;
use ftgauge::geometry::export_json;
use ftgauge::Family;
use ftgauge_cli::config::{resolve, InvalidConfig, Preset, Request, RunConfig, DESK_WARNING, OUTPUT_ENV};
use ftgauge_cli::pipeline::{self, RunOptions};
use ftgauge_cli::store::{self, MANIFEST_FILE};
use ftgauge_cli::verify::oracle_suite;

/// Monte Carlo thresholds of the toric and color codes with faulty measurements.
#[derive(Debug, Parser)]
#[command(name = "ftgauge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every (p, q, L, M) point, then aggregate observables.
    Simulate(SimulateArgs),
    /// Rebuild tables, Tc estimates and verdicts from a run directory.
    Analyze {
        /// Run directory written by `simulate`.
        dir: PathBuf,
    },
    /// Continue an interrupted run from its checkpoints.
    Resume {
        /// Run directory written by `simulate`.
        dir: PathBuf,
        #[arg(long, hide = true)]
        halt_after_sweeps: Option<u64>,
    },
    /// Check the simulator against exact enumeration on small instances.
    Verify(VerifyArgs),
    /// Write the interaction graph of one lattice as JSON.
    ExportGraph {
        #[arg(long, default_value = "toric")]
        family: Family,
        #[arg(long = "L")]
        l: usize,
        #[arg(long = "M")]
        m: usize,
        /// Output file; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Read the whole configuration from a JSON file instead of flags.
    #[arg(long, conflicts_with_all = ["family", "p", "q", "alpha", "preset"])]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    /// Path q = alpha p; defaults to 1 when no --q is given.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    q: Vec<f64>,
    #[arg(long = "L", num_args = 1.., value_delimiter = ',')]
    l: Vec<usize>,
    #[arg(long = "M", num_args = 1.., value_delimiter = ',')]
    m: Vec<usize>,
    /// Disorder samples per point and size.
    #[arg(long)]
    nsa: Option<usize>,
    /// log2 of the minimum sweep budget.
    #[arg(long)]
    b: Option<u32>,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// log2 of the sweep cap for samples that have not equilibrated.
    #[arg(long)]
    max_log2: Option<u32>,
    /// Side of the Wilson-loop patch; floor(L/2) when absent.
    #[arg(long)]
    wilson_size: Option<usize>,
    #[arg(long)]
    resamples: Option<usize>,
    /// log2 of the sweep interval between checkpoints.
    #[arg(long)]
    checkpoint_log2: Option<u32>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Parameter defaults: `paper` (Table I) or `desk` (reduced statistics).
    #[arg(long)]
    preset: Option<Preset>,
    /// Run directory; defaults to $FTGAUGE_OUTPUT/ftgauge-<config hash>.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, hide = true)]
    halt_after_sweeps: Option<u64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Run the Monte Carlo against exact enumeration.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Disorder samples per disordered instance.
    #[arg(long, default_value_t = 5)]
    samples: u64,
    /// log2 sweep budget per sample.
    #[arg(long, default_value_t = 16)]
    budget: u32,
    /// Also write the exact observables as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl SimulateArgs {
    fn request(&self) -> Request {
        Request {
            family: self.family,
            alpha: self.alpha,
            p: self.p.clone(),
            q: self.q.clone(),
            l: self.l.clone(),
            m: self.m.clone(),
            nsa: self.nsa,
            b: self.b,
            tmin: self.tmin,
            tmax: self.tmax,
            nt: self.nt,
            seed: self.seed,
            max_log2: self.max_log2,
            wilson_size: self.wilson_size,
            resamples: self.resamples,
            checkpoint_log2: self.checkpoint_log2,
            workers: self.workers,
            preset: self.preset,
            output: self.output.clone(),
        }
    }

    fn config(&self) -> Result<RunConfig> {
        let Some(path) = &self.config else {
            if self.preset == Some(Preset::Desk) {
                warn!("{DESK_WARNING}");
            }
            return Ok(resolve(&self.request())?);
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = RunConfig::from_json(&text)?;
        config.workers = self.workers;
        config.output = match &self.output {
            Some(dir) => dir.clone(),
            None => {
                let root = std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
                root.join(format!("ftgauge-{}", &config.hash()[..12]))
            }
        };
        Ok(config)
    }
}

fn report(run: &pipeline::RunReport, dir: &std::path::Path) {
    if run.halted {
        println!("halted; checkpoints written to {}", dir.display());
        return;
    }
    if let Some(m) = &run.manifest {
        println!(
            "{} of {} samples complete ({} flagged, {} failed); outputs in {}",
            m.samples_completed,
            m.samples_expected,
            m.samples_flagged,
            m.failures.len(),
            dir.display()
        );
        for note in &m.notes {
            println!("note: {note}");
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let config = args.config()?;
            let opts = RunOptions {
                halt_after_sweeps: args.halt_after_sweeps,
            };
            let report_ = pipeline::execute(&config, &opts)?;
            report(&report_, &config.output);
        }
        Command::Analyze { dir } => {
            let config = pipeline::load_run(&dir)?;
            let manifest = pipeline::aggregate(&config, &[], Instant::now())?;
            println!(
                "aggregated {} samples ({} flagged) into {}",
                manifest.samples_completed,
                manifest.samples_flagged,
                dir.display()
            );
        }
        Command::Resume { dir, halt_after_sweeps } => {
            let mut config = pipeline::load_run(&dir)?;
            let hash = config.hash();
            for path in store::list_checkpoints(&dir) {
                if store::recorded_hash(&path)? != hash {
                    return Err(InvalidConfig(format!(
                        "{} was written by a different configuration; refusing to resume",
                        path.display()
                    ))
                    .into());
                }
            }
            let pending = pipeline::pending(&config);
            if pending.is_empty() && dir.join(MANIFEST_FILE).exists() {
                println!("nothing to resume: every sample in {} is finished", dir.display());
                return Ok(());
            }
            config.workers = 0;
            let report_ = pipeline::execute(&config, &RunOptions { halt_after_sweeps })?;
            report(&report_, &dir);
        }
        Command::Verify(args) => {
            if !args.oracle {
                return Err(InvalidConfig("nothing to verify; pass --oracle".into()).into());
            }
            let (checks, rows) = oracle_suite(args.seed, args.samples, args.budget)?;
            for check in &checks {
                println!("{check}");
            }
            if let Some(path) = &args.csv {
                let mut bytes = Vec::new();
                write_csv(&rows, &mut bytes)?;
                store::write_atomic(path, &bytes)?;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                anyhow::bail!("{failed} of {} oracle checks failed", checks.len());
            }
            println!("all {} oracle checks passed", checks.len());
        }
        Command::ExportGraph { family, l, m, output } => {
            let model = family.build(l, m)?;
            let json = export_json(&model)? + "\n";
            match output {
                Some(path) => store::write_atomic(&path, json.as_bytes())?,
                None => print!("{json}"),
            }
        }
    }
    Ok(())
}

/// Invalid configurations exit with 2, everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    use ftgauge::Error as E;
    for cause in err.chain() {
        if cause.is::<InvalidConfig>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            if matches!(
                e,
                E::DegenerateLattice { .. }
                    | E::ProbabilityOutOfRange { .. }
                    | E::PerfectMeasurements
                    | E::InfiniteCoupling
                    | E::InvalidCouplings
                    | E::InvalidPatch(_)
                    | E::InvalidLadder(_)
            ) {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
