use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use windbid_core::harness::{self, data, write_outputs, write_sweep_csv, McPool};
use windbid_core::{Error, ExperimentConfig, SweepParam};

#[derive(Parser)]
#[command(name = "windbid", version, about = "Contextual bandit bidding experiments for a price-maker wind producer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        ExperimentConfig::load(&self.config, &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Writes synthetic ground truth as `market.csv` plus hourly curve files.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Runs one experiment and writes records, regret curves and summaries.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeats the experiment over values of one parameter and all seeds.
    Sweep {
        /// One of deviation, context_dim, batch, sigma, xi.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Builds the context-conditional oracle table from recorded data.
    OracleBuild {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn gen_data(config: &ExperimentConfig, out: &Path, seed: u64) -> Result<(), Error> {
    let hours = config.warm_up + config.horizon;
    let truths = data::synthetic_truths(&config.generator()?, harness::derive_seed(seed, data::STREAM_MARKET), hours)?;
    data::write_dataset(out, &truths, data::synthetic_epoch())?;
    info!("wrote {hours} hours to {}", out.display());
    Ok(())
}

fn oracle_build(config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let dataset = data::prepare(config, config.seed)?;
    let table = McPool::from_hours(&dataset.hours, config.deviation, config.regret_grid)?.oracle_table()?;
    table.write_csv(out)?;
    info!("{} of 1331 context cells filled from {} auctions", table.filled_cells(), dataset.hours.len());
    Ok(())
}

fn parse_values(list: &str) -> Result<Vec<f64>, Error> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("sweep value {s:?} is not a number"))))
        .collect()
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenData { config, out, seed } => {
            let c = config.load()?;
            gen_data(&c, &out, seed.unwrap_or(c.seed))
        }
        Command::Run { config, out, seed } => {
            let c = config.load()?;
            let report = harness::run_experiment(&c, seed.unwrap_or(c.seed))?;
            write_outputs(&out, &report)?;
            for s in &report.strategies {
                info!("{:<14} avg revenue {:.2}", s.name, s.avg_revenue());
            }
            Ok(())
        }
        Command::Sweep { param, values, config, out } => {
            let c = config.load()?;
            let param: SweepParam = param.parse()?;
            let rows = harness::sweep(&c, param, &parse_values(&values)?)?;
            write_sweep_csv(&out.join("sweep.csv"), &rows)
        }
        Command::OracleBuild { data, out, config, overrides } => {
            let mut c = match &config {
                Some(path) => ExperimentConfig::load(path, &overrides)?,
                None => ExperimentConfig::from_toml_str_with("", &overrides)?,
            };
            c.data = Some(data);
            // The whole recording feeds the table.
            c.horizon = usize::MAX;
            oracle_build(&c, &out)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io { .. } | Error::Csv { .. } | Error::Clearing { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
