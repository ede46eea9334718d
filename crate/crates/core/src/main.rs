use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etsim::events::EventFormat;
use etsim::harness::config::{BackendChoice, ConfigDocument, ExperimentConfig};
use etsim::harness::run::{read_event_file, RunMode};
use etsim::harness::selftest::run_selftest;
use etsim::harness::{analyze_events, build_experiment, compare_events, run_experiment};
use etsim::{Error, Result};

/// Energy-time entangled pairs through a Fabry-Perot filter: standard
/// quantum mechanics versus nonlocal collapse.
#[derive(Parser)]
#[command(name = "etsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute densities, sample Monte Carlo events and write a report.
    Simulate(RunArgs),
    /// Compute densities and the report without sampling.
    Densities(RunArgs),
    /// Analyze an event file against both models.
    Analyze {
        /// Event file (binary or text).
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Decide whether two event files come from the same model.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Event file format (detected from the file when omitted).
        #[arg(long)]
        format: Option<EventFormat>,
    },
    /// Check the numerics against closed forms and quadrature oracles.
    Selftest(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    backend: Option<BackendChoice>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of triggers to simulate.
    #[arg(long)]
    events: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Event file format.
    #[arg(long)]
    format: Option<EventFormat>,
    /// Skip the tau_s << tau_g << tau_FP check.
    #[arg(long)]
    allow_weak_hierarchy: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(path) => fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
            None => String::new(),
        };
        let mut doc = ConfigDocument::parse(&text)?;
        let overrides = [
            ("run.backend", self.backend.map(|b| b.to_string())),
            ("run.seed", self.seed.map(|s| s.to_string())),
            ("run.n_triggers", self.events.map(|n| n.to_string())),
            (
                "output.dir",
                self.out.as_ref().map(|p| p.display().to_string()),
            ),
            ("output.format", self.format.map(|f| f.to_string())),
            (
                "allow_weak_hierarchy",
                self.allow_weak_hierarchy.then(|| "true".to_string()),
            ),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                doc.set(key, v)?;
            }
        }
        let cfg = doc.resolve()?;
        for w in &cfg.warnings {
            eprintln!("warning: {w}");
        }
        Ok(cfg)
    }
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let out = run_experiment(&cfg, RunMode::Simulate)?;
            print!("{}", out.report.to_text());
            eprintln!(
                "wrote {} files to {}",
                out.files.len(),
                cfg.output.dir.display()
            );
        }
        Command::Densities(args) => {
            let cfg = args.resolve()?;
            let out = run_experiment(&cfg, RunMode::DensitiesOnly)?;
            print!("{}", out.report.to_text());
            eprintln!(
                "wrote {} files to {}",
                out.files.len(),
                cfg.output.dir.display()
            );
        }
        Command::Analyze { file, run } => {
            let batch = read_event_file(&file, run.format)?;
            let mut cfg = run.resolve()?;
            cfg.run.backend = BackendChoice::Both;
            let exp = build_experiment(&cfg)?;
            let report = analyze_events(&batch, &exp.results)?;
            print!("{}", report.to_text());
            if let Some(dir) = &run.out {
                write_out(dir, "analysis.txt", &report.to_text())?;
                write_out(dir, "histograms.csv", &report.histograms_csv())?;
            }
        }
        Command::Compare { a, b, format } => {
            let a = read_event_file(&a, format)?;
            let b = read_event_file(&b, format)?;
            print!("{}", compare_events(&a, &b)?.to_text());
        }
        Command::Selftest(args) => {
            let cfg = args.resolve()?;
            let checks = run_selftest(&cfg)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.passed != Some(false)));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
