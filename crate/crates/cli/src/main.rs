use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use swarm_core::engine::{run, WorldConfig};
use swarm_core::io::{
    load_config, metrics_from_trace, to_json_pretty, write_atomic, write_manifest, ManifestPaths, RunManifest,
    TraceWriter,
};
use swarm_core::metrics::{histogram_csv, MetricsAccumulator, SpeedTracking, DEFAULT_TRANSIENT_CUTOFF};
use swarm_core::oracle::{
    check_delaunay, check_lemmas, check_solver, OracleReport, LEMMA_GRID, SOLVER_GRID, SOLVER_TOLERANCE,
};

#[derive(Debug, Parser)]
#[command(name = "swarm", version, about = "Constraint-driven flocking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate and write trace.csv, metrics.json, histogram.csv and manifest.json.
    Run {
        /// JSON config; omitted fields and a missing flag use the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        predator: Option<Toggle>,
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRANSIENT_CUTOFF)]
        transient_cutoff: f64,
    },
    /// Recompute metrics from a trace file.
    Metrics {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Config the trace was produced with; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TRANSIENT_CUTOFF)]
        transient_cutoff: f64,
    },
    /// Compare the control solver against a grid search on random instances.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cross-check triangulation and corner predicates against slow references.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    Oracle(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Oracle(_) => 3,
        }
    }
}

fn config_or_default(path: Option<&Path>) -> Result<WorldConfig, Failure> {
    match path {
        Some(p) => load_config(p)
            .with_context(|| format!("loading {}", p.display()))
            .map_err(Failure::Config),
        None => Ok(WorldConfig::default()),
    }
}

fn run_command(
    config: Option<&Path>,
    seed: Option<u64>,
    predator: Option<Toggle>,
    duration: Option<f64>,
    out: &Path,
    transient_cutoff: f64,
) -> Result<(), Failure> {
    let mut cfg = config_or_default(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(toggle) = predator {
        cfg.predator_enabled = matches!(toggle, Toggle::On);
    }
    if let Some(duration) = duration {
        cfg.duration = duration;
    }
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;

    let runtime = |e: anyhow::Error| Failure::Runtime(e);
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(runtime)?;
    let paths = ManifestPaths {
        trace: out.join("trace.csv"),
        metrics: out.join("metrics.json"),
        manifest: out.join("manifest.json"),
    };

    let started = Instant::now();
    info!("running {} steps with seed {}", cfg.n_steps(), cfg.seed);
    let file = fs::File::create(&paths.trace)
        .with_context(|| format!("creating {}", paths.trace.display()))
        .map_err(runtime)?;
    let mut writer = TraceWriter::new(BufWriter::new(file)).map_err(|e| runtime(e.into()))?;
    let mut metrics = MetricsAccumulator::new(&cfg, transient_cutoff);
    let sim = run(&cfg).map_err(|e| Failure::Config(e.into()))?;
    for step in sim {
        let step = step.map_err(|e| runtime(e.into()))?;
        writer.write_step(&step).map_err(|e| runtime(e.into()))?;
        metrics.push_trace(&step).map_err(|e| runtime(e.into()))?;
    }
    writer
        .finish()
        .and_then(|mut w| Ok(w.flush()?))
        .map_err(|e| runtime(e.into()))?;

    let speed_tracking = SpeedTracking::default();
    let (speed_tracking_ok, metrics_json, histogram) = match metrics.finish() {
        Ok(m) => (
            speed_tracking.check(&m, cfg.v_star),
            to_json_pretty(&m),
            histogram_csv(&m),
        ),
        Err(e) => {
            warn!("{e}; metrics left empty");
            (None, "null\n".to_string(), "degree,count\n".to_string())
        }
    };
    if speed_tracking_ok == Some(false) {
        warn!("speed tracking outside the calibrated band");
    }
    write_atomic(&paths.metrics, metrics_json.as_bytes()).map_err(|e| runtime(e.into()))?;
    write_atomic(&out.join("histogram.csv"), histogram.as_bytes()).map_err(|e| runtime(e.into()))?;

    let manifest = RunManifest {
        seed: cfg.seed,
        config: cfg,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: paths,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        speed_tracking,
        speed_tracking_ok,
    };
    write_manifest(&manifest).map_err(|e| runtime(e.into()))?;
    info!("done in {:.2} s", manifest.wall_clock_seconds);
    Ok(())
}

fn metrics_command(trace: &Path, out: &Path, config: Option<&Path>, transient_cutoff: f64) -> Result<(), Failure> {
    let cfg = config_or_default(config)?;
    let m = metrics_from_trace(trace, &cfg, transient_cutoff)
        .with_context(|| format!("reading {}", trace.display()))
        .map_err(Failure::Runtime)?;
    write_atomic(out, to_json_pretty(&m).as_bytes()).map_err(|e| Failure::Runtime(e.into()))
}

fn summarize(report: &OracleReport) -> Result<(), Failure> {
    println!(
        "{}: {} checked, {} skipped, {} mismatches",
        report.name,
        report.checked,
        report.skipped,
        report.mismatches.len()
    );
    for m in report.mismatches.iter().take(5) {
        println!("  case {}: {}", m.case, m.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Oracle(format!("{} check failed", report.name)))
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            seed,
            predator,
            duration,
            out,
            transient_cutoff,
        } => run_command(config.as_deref(), seed, predator, duration, &out, transient_cutoff),
        Command::Metrics {
            trace,
            out,
            config,
            transient_cutoff,
        } => metrics_command(&trace, &out, config.as_deref(), transient_cutoff),
        Command::Oracle { instances, seed } => {
            let report = check_solver(seed, instances, SOLVER_GRID, SOLVER_TOLERANCE);
            println!("max excess over grid optimum: {:e}", report.max_excess);
            summarize(&report.report)
        }
        Command::Selfcheck { seed } => {
            let mut outcome = summarize(&check_delaunay(seed, 3..=12, 200));
            for report in check_lemmas(seed, 500, LEMMA_GRID) {
                outcome = outcome.and(summarize(&report));
            }
            outcome
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWARM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Config(e) | Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Oracle(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
