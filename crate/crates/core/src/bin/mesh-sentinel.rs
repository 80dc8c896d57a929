use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mesh_sentinel::sim::{self, replay_file, run_with, RunOptions, SweepSpec};
use mesh_sentinel::{ScenarioConfig, Strategy};

#[derive(Parser)]
#[command(
    name = "mesh-sentinel",
    version,
    about = "Selfish-node detection on a simulated AODV mesh"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and print its metrics as JSON.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write metrics here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the event trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sweep drop probabilities and print mean/sd rates per point as CSV.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated drop probabilities (default 1.0 down to 0.1).
        #[arg(long, value_delimiter = ',')]
        drop_probs: Option<Vec<f64>>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Worker threads; results are ordered by cell regardless.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the seed scheme and per-cell errors as JSON.
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Re-run detection over a recorded trace and print its metrics as JSON.
    Replay {
        trace: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; absent fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `on` or `off`.
    #[arg(long, value_parser = parse_switch)]
    crosscheck: Option<bool>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    drop_prob: Option<f64>,
    #[arg(long)]
    selfish_fraction: Option<f64>,
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected on/off, got `{other}`")),
    }
}

impl ScenarioArgs {
    fn resolve(&self) -> mesh_sentinel::Result<ScenarioConfig> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(on) = self.crosscheck {
            config.crosscheck_enabled = on;
        }
        if let Some(strategy) = self.strategy {
            config.strategy = strategy;
        }
        if let Some(p) = self.drop_prob {
            config.drop_prob = p;
        }
        if let Some(f) = self.selfish_fraction {
            config.selfish_fraction = f;
        }
        config.validate()?;
        Ok(config)
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cli: Cli) -> mesh_sentinel::Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            trace,
        } => {
            let config = scenario.resolve()?;
            let result = run_with(
                &config,
                RunOptions {
                    record_trace: trace.is_some(),
                    keep_details: false,
                },
            )?;
            if let Some(path) = &trace {
                sim::write_trace(BufWriter::new(File::create(path)?), &result.trace)?;
            }
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", result.metrics.to_json()?)?;
            w.flush()?;
        }
        Command::Sweep {
            scenario,
            drop_probs,
            runs,
            jobs,
            out,
            metadata,
        } => {
            let config = scenario.resolve()?;
            let mut spec = SweepSpec::new(config.clone(), config.strategy);
            if let Some(probs) = drop_probs {
                spec.drop_probs = probs;
            }
            spec.runs_per_point = runs;
            spec.jobs = jobs;
            let result = sim::sweep(&spec)?;
            let mut w = output(out.as_deref())?;
            result.write_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = metadata {
                std::fs::write(path, result.metadata_json()?)?;
            }
            let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
            if failed > 0 {
                eprintln!("warning: {failed} sweep cell(s) failed; see metadata for details");
            }
        }
        Command::Replay {
            trace,
            scenario,
            out,
        } => {
            let config = scenario.resolve()?;
            let result = replay_file(&trace, &config)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", result.metrics.to_json()?)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
