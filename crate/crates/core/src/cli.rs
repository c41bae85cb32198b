//! `mixed-hk run` and `mixed-hk check`.
//!
//! Exit status: 0 success, 1 runtime error, 2 usage or config error,
//! 3 a contract failed.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::engine::{World, WorldConfig, run};
use crate::monitors::MonitorKind;
use crate::scenario::{Overrides, Scenario, ScenarioReport, check, find, library};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONTRACT: i32 = 3;

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "BC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mixed-hk", version, about = "Mixed Hegselmann-Krause simulator and property checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one configuration and write trace and monitor CSVs.
    Run(RunArgs),
    /// Run scenarios with their declared contracts and write a JSON report.
    Check(CheckArgs),
    /// List the shipped scenarios.
    List,
}

#[derive(Debug, Args)]
struct Common {
    /// Override the horizon (or steps per trial for randomized suites).
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to $BC_OUT_DIR, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated monitor names.
    #[arg(long, value_delimiter = ',')]
    monitors: Option<Vec<MonitorKind>>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<String>,
    /// World config or scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Scenario name or `all`.
    #[arg(conflicts_with_all = ["scenario", "config"])]
    target: Option<String>,
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per mode for randomized suites.
    #[arg(long)]
    trials: Option<u64>,
    #[command(flatten)]
    common: Common,
}

impl Common {
    fn overrides(&self, trials: Option<u64>) -> Overrides {
        Overrides { steps: self.steps, seed: self.seed, trials, monitors: self.monitors.clone() }
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Parse `args` (including the program name), execute, and return the exit status.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Check(a) => cmd_check(&a),
        Command::List => {
            for s in library() {
                println!("{:<22} {}", s.name, s.description);
            }
            EXIT_OK
        }
    }
}

fn load_config_file(path: &Path) -> Result<(String, WorldConfig, Option<Scenario>), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if value.get("name").is_some() {
        let s = Scenario::parse(&path.display().to_string(), &text).map_err(|e| e.to_string())?;
        let cfg = s.config.clone().ok_or_else(|| format!("scenario {} has no single run", s.name))?;
        return Ok((s.name.clone(), cfg, Some(s)));
    }
    let cfg: WorldConfig = serde_json::from_value(value).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((stem, cfg, None))
}

fn cmd_run(a: &RunArgs) -> i32 {
    let (name, mut cfg) = if let Some(path) = &a.config {
        match load_config_file(path) {
            Ok((name, cfg, _)) => (name, cfg),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    } else {
        let name = a.scenario.as_deref().expect("clap requires one of the two");
        match find(name).and_then(|s| s.run_config(&Overrides::default())) {
            Ok(cfg) => (name.to_string(), cfg),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    };
    a.common.overrides(None).apply(&mut cfg);
    if let Err(e) = World::init(&cfg) {
        eprintln!("error: invalid config: {e}");
        return EXIT_CONFIG;
    }
    let trace = match run(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let dir = a.common.out_dir();
    let write = || -> std::io::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(&dir)?;
        let trace_path = dir.join(format!("{name}_trace.csv"));
        let monitor_path = dir.join(format!("{name}_monitors.csv"));
        trace.write_trace_csv(BufWriter::new(File::create(&trace_path)?))?;
        trace.write_monitor_csv(BufWriter::new(File::create(&monitor_path)?))?;
        Ok((trace_path, monitor_path))
    };
    match write() {
        Ok((t, m)) => {
            println!("{name}: {} steps, wrote {} and {}", cfg.horizon, t.display(), m.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: writing output to {}: {e}", dir.display());
            EXIT_RUNTIME
        }
    }
}

#[derive(Debug, Serialize)]
struct CheckReport<'a> {
    pass: bool,
    scenarios: &'a [ScenarioReport],
}

fn cmd_check(a: &CheckArgs) -> i32 {
    let scenarios: Vec<Scenario> = if let Some(path) = &a.config {
        match Scenario::load(path) {
            Ok(s) => vec![s],
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    } else {
        let name = a.target.as_deref().or(a.scenario.as_deref()).unwrap_or("all");
        if name == "all" {
            library()
        } else {
            match find(name) {
                Ok(s) => vec![s],
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            }
        }
    };
    let ov = a.common.overrides(a.trials);
    for s in &scenarios {
        if let Ok(mut cfg) = s.run_config(&Overrides::default()) {
            ov.apply(&mut cfg);
            if let Err(e) = World::init(&cfg) {
                eprintln!("error: scenario {}: invalid config: {e}", s.name);
                return EXIT_CONFIG;
            }
        }
    }
    // Scenarios are independent; results are collected in library order.
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(|| check(s, &ov)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("check thread panicked")).collect()
    });
    let mut reports = Vec::with_capacity(results.len());
    for (s, r) in scenarios.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                eprintln!("error: scenario {}: {e}", s.name);
                return EXIT_RUNTIME;
            }
        }
    }
    for rep in &reports {
        let checked: u64 = rep.tally.values().map(|t| t.checked).sum();
        match &rep.first_failure {
            None => println!("PASS {:<22} {checked} checks", rep.scenario),
            Some(f) => println!("FAIL {:<22} {} at t={}: {}", rep.scenario, f.contract, f.t, f.detail),
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    let dir = a.common.out_dir();
    let path = dir.join("check_report.json");
    let written = fs::create_dir_all(&dir).and_then(|_| {
        let f = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(f, &CheckReport { pass, scenarios: &reports }).map_err(std::io::Error::other)
    });
    if let Err(e) = written {
        eprintln!("error: writing {}: {e}", path.display());
        return EXIT_RUNTIME;
    }
    if pass { EXIT_OK } else { EXIT_CONTRACT }
}
