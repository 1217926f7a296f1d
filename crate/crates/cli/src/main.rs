//! `sphere-trace`: run Monte Carlo energy and mass experiments and write
//! their series next to the exact oracle curves.

mod presets;
mod report;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use sphere_trace_core::field_synth::GridSpec;
use sphere_trace_core::run_experiment;
use thiserror::Error;

use settings::Settings;

const THREADS_VAR: &str = "SPHERE_TRACE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sphere_trace_core::Error),
}

#[derive(Parser)]
#[command(name = "sphere-trace", version, about = "Stochastic PDEs on the sphere: energy and mass experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write series.csv, config.txt and manifest.txt.
    Run(RunArgs),
    /// Run an experiment and compare every point with the exact oracle.
    Check(RunArgs),
    /// List the built-in presets.
    ListPresets,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Start from a built-in preset.
    #[arg(long)]
    preset: Option<String>,
    /// Config file with key=value lines, applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the full sample count of the full-size experiments.
    #[arg(long)]
    paper_scale: bool,
    /// Override any config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    equation: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    quantity: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long = "T")]
    t_end: Option<String>,
    #[arg(long = "N")]
    steps: Option<String>,
    #[arg(long = "M")]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Simulate without the Maxwell monopole channels.
    #[arg(long)]
    no_monopole: bool,
    /// Compare against the oracle and set the exit status accordingly.
    #[arg(long)]
    check: bool,
    /// Write field snapshots of the first sample every this many steps.
    #[arg(long, value_name = "STEPS")]
    snapshot_every: Option<usize>,
    /// Snapshot grid as N_THETAxN_PHI.
    #[arg(long, default_value = "33x64")]
    grid: String,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = Settings::default();
        if let Some(name) = &self.preset {
            let preset = presets::find(name).ok_or_else(|| CliError::Config {
                key: "preset".into(),
                reason: format!("unknown preset `{name}` (see list-presets)"),
            })?;
            s.apply_text(&presets::text(preset))?;
        }
        if self.paper_scale {
            s.samples = presets::FULL_SAMPLES;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            s.apply_text(&text)?;
        }
        for a in &self.set {
            s.apply_assignment(a)?;
        }
        let flags = [
            ("equation", &self.equation),
            ("scheme", &self.scheme),
            ("quantity", &self.quantity),
            ("kappa", &self.kappa),
            ("T", &self.t_end),
            ("N", &self.steps),
            ("M", &self.samples),
            ("seed", &self.seed),
            ("record_every", &self.record_every),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        if self.no_monopole {
            s.monopole = false;
        }
        Ok(s)
    }

    fn grid(&self) -> Result<GridSpec, CliError> {
        let bad = || CliError::Config {
            key: "grid".into(),
            reason: format!("expected N_THETAxN_PHI, got `{}`", self.grid),
        };
        let (a, b) = self.grid.split_once('x').ok_or_else(bad)?;
        let (a, b) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        GridSpec::new(a, b).map_err(|e| CliError::Config {
            key: "grid".into(),
            reason: e.to_string(),
        })
    }
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config {
                key: THREADS_VAR.into(),
                reason: format!("expected a positive integer, got `{v}`"),
            }),
        },
        Err(_) => Ok(None),
    }
}

/// Returns whether the check passed (always true without `--check`).
fn run(args: &RunArgs, check: bool) -> Result<bool, CliError> {
    let settings = args.settings()?;
    let config = settings.experiment()?;
    let grid = args.grid()?;
    if args.snapshot_every == Some(0) {
        return Err(CliError::Config {
            key: "snapshot-every".into(),
            reason: "must be positive".into(),
        });
    }
    if let Some(n) = thread_cap()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
    }

    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let series = run_experiment(&config)?;

    let dir = &settings.out_dir;
    report::create_dir(dir)?;
    let config_text = settings.echo();
    let series_path = dir.join("series.csv");
    let config_path = dir.join("config.txt");
    report::write_file(&series_path, series.to_csv().as_bytes())?;
    report::write_file(&config_path, config_text.as_bytes())?;
    let mut outputs = vec![series_path, config_path];
    if let Some(every) = args.snapshot_every {
        outputs.extend(report::write_snapshots(&config, every, grid, &dir.join("snapshots"))?);
    }

    let oracle_trace_note = if series.oracle_trace.is_some() {
        "available".to_string()
    } else {
        format!(
            "unavailable: no closed form for {} under {}{}",
            config.quantity,
            config.scheme,
            if config.levy.is_mean_zero() { "" } else { " with nonzero-mean noise" }
        )
    };
    let manifest = report::Manifest {
        config_text,
        outputs,
        oracle_trace_note,
        started_unix,
        wall_seconds: clock.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    report::write_file(&dir.join("manifest.txt"), manifest.render().as_bytes())?;
    println!("wrote {}", dir.join("series.csv").display());

    if check {
        let r = report::check(&series);
        println!("{}", r.line());
        return Ok(r.passed());
    }
    Ok(true)
}

fn list_presets() {
    println!("default sample count M=2000; --paper-scale uses M={}", presets::FULL_SAMPLES);
    for p in presets::PRESETS {
        let mut s = Settings::default();
        s.apply_text(&presets::text(p)).expect("built-in presets parse");
        let l = s.spectrum;
        println!(
            "{:<24} {}: equation={} scheme={} quantity={} kappa={} T={} N={} M={} levy.kind={} levy.gamma_spectrum={} {} {}",
            p.name,
            p.summary,
            s.equation,
            s.scheme,
            s.quantity(),
            s.kappa,
            s.t_end,
            s.steps,
            s.samples,
            settings::levy_kind_name(s.levy_kind),
            l.a0,
            l.exponent,
            l.scale
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ListPresets => {
            list_presets();
            Ok(true)
        }
        Command::Run(args) => run(args, args.check),
        Command::Check(args) => run(args, true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("sphere-trace: {e}");
            ExitCode::from(2)
        }
    }
}
