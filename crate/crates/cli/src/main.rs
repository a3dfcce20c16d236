use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use multilink_cli::config::{RandomSuite, Scenario};
use multilink_cli::csv::TrajectoryTable;
use multilink_cli::{parse_config, run_scenario, ScenarioConfig};
use multilink_core::analysis::{fit_power_law, FitMode};

#[derive(Parser)]
#[command(name = "multilink", version, about = "Simulate and analyse multilink wheeled vehicles driven by an internal rotor")]
struct Cli {
    /// Overrides `outputs.directory` from the config.
    #[arg(long, global = true, env = "MULTILINK_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config.
    Simulate { config: PathBuf },
    /// Enumerate and classify the equilibria of the config's vehicle.
    FixedPoints {
        config: PathBuf,
        /// Also classify this many random parameter draws per N.
        #[arg(long)]
        draws: Option<usize>,
        /// Largest N for the random draws.
        #[arg(long, default_value_t = 4)]
        max_links: usize,
    },
    /// Least-squares power-law fit to one column of a trajectory CSV.
    Fit {
        csv: PathBuf,
        #[arg(long, default_value = "v1")]
        column: String,
        /// Time window as `from:to`.
        #[arg(long, default_value = "1e3:1e5", value_parser = parse_window)]
        window: (f64, f64),
        /// Fit per-period maxima of |x| instead of the raw samples.
        #[arg(long)]
        envelope_period: Option<f64>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected `from:to`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(a > 0.0 && b > a) {
        return Err("need 0 < from < to".into());
    }
    Ok((a, b))
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<()> {
    let out = run_scenario(cfg, dir)?;
    print!("{}", out.report);
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for a in &out.artifacts {
        eprintln!("wrote {}", a.display());
    }
    Ok(())
}

fn fit(csv: &Path, column: &str, window: (f64, f64), period: Option<f64>) -> Result<()> {
    let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let table = TrajectoryTable::parse(&text).with_context(|| format!("in {}", csv.display()))?;
    let Some(values) = table.column(column) else {
        bail!("no column `{column}` in {}", csv.display());
    };
    let times = table.column("t").expect("header always has t");
    let mode = match period {
        Some(p) if p > 0.0 => FitMode::Envelope { period: p },
        Some(p) => bail!("envelope period must be positive, got {p}"),
        None => FitMode::Raw,
    };
    let f = fit_power_law(&times, &values, window, mode)?;
    println!("column {column}: |x| ~ {:.6e} t^{:.6}  (r^2 {:.6}, {} samples)", f.prefactor, f.exponent, f.r_squared, f.samples);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let dir = cli.output_dir.as_deref();
    let result = match &cli.command {
        Command::Simulate { config } => load(config, cli.seed).and_then(|cfg| execute(&cfg, dir)),
        Command::FixedPoints { config, draws, max_links } => load(config, cli.seed).and_then(|mut cfg| {
            let suite = match (draws, &cfg.scenario) {
                (Some(d), _) => Some(RandomSuite { draws: *d, max_links: *max_links }),
                (None, Scenario::FixedPoints { suite }) => *suite,
                (None, _) => None,
            };
            cfg.scenario = Scenario::FixedPoints { suite };
            execute(&cfg, dir)
        }),
        Command::Fit { csv, column, window, envelope_period } => fit(csv, column, *window, *envelope_period),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
