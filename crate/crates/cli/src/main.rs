use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairfed::data::{CsvSchema, PartitionOptions, Scheme, SyntheticParams};
use fairfed_cli::check::Suite;
use fairfed_cli::{commands, seed_override, CliError, CliResult};

/// Minimax group-fair federated learning simulator.
#[derive(Parser)]
#[command(name = "fairfed", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SchemaArgs {
    /// Number of classes; inferred from the labels when omitted.
    #[arg(long)]
    classes: Option<usize>,
    /// Number of groups; inferred from the group column when omitted.
    #[arg(long)]
    groups: Option<usize>,
}

impl SchemaArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            num_classes: self.classes,
            num_groups: self.groups,
        }
    }
}

#[derive(Args)]
struct RateArgs {
    /// P(y = 1) for group 0 when x <= 0.
    #[arg(long, default_value_t = 0.3)]
    u0l: f64,
    /// P(y = 1) for group 0 when x > 0.
    #[arg(long, default_value_t = 0.6)]
    u0h: f64,
    /// P(y = 1) for group 1 when x <= 0.
    #[arg(long, default_value_t = 0.1)]
    u1l: f64,
    /// P(y = 1) for group 1 when x > 0.
    #[arg(long, default_value_t = 0.9)]
    u1h: f64,
}

impl RateArgs {
    fn params(&self, n_samples: usize, seed: u64) -> SyntheticParams {
        SyntheticParams {
            u0_low: self.u0l,
            u1_low: self.u1l,
            u0_high: self.u0h,
            u1_high: self.u1h,
            n_samples,
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the two-group synthetic dataset as CSV.
    GenData {
        #[arg(long, default_value_t = 6000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a CSV dataset into per-client CSV files.
    Partition {
        #[arg(long)]
        data: PathBuf,
        /// esg, ssg or psg.
        #[arg(long, value_parser = commands::parse_scheme)]
        scheme: Scheme,
        #[arg(long, default_value_t = 40)]
        clients: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        imbalance_period: usize,
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the methods of an experiment spec and write reports.
    Train {
        spec: PathBuf,
        /// Overrides the experiment spec's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train the experiment spec's methods concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Per-group risk of a saved model, or the synthetic oracle with --oracle.
    Eval {
        #[arg(long, required_unless_present = "oracle")]
        model: Option<PathBuf>,
        #[arg(long, required_unless_present = "oracle")]
        data: Option<PathBuf>,
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long, conflicts_with_all = ["model", "data"])]
        oracle: bool,
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long, default_value_t = 1000)]
        resolution: usize,
    },
    /// Run the invariant suites.
    Check {
        /// projection, gradient, risk-identity or equivalence; repeatable.
        #[arg(long = "suite")]
        suites: Vec<String>,
        /// Give the centralized learner a different step size (must fail equivalence).
        #[arg(long)]
        inject_lr_mismatch: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData { n, seed, rates, out } => commands::gen_data(&rates.params(n, seed), &out),
        Command::Partition {
            data,
            scheme,
            clients,
            seed,
            imbalance_period,
            schema,
            out,
        } => {
            if clients == 0 || imbalance_period == 0 {
                return Err(CliError::Usage("--clients and --imbalance-period must be >= 1".into()));
            }
            let mut opts = PartitionOptions::new(scheme, clients, seed);
            opts.imbalance_period = imbalance_period;
            commands::partition_data(&data, schema.schema(), &opts, &out)
        }
        Command::Train { spec, out, parallel } => commands::train(&spec, out, parallel, seed_override()?),
        Command::Eval {
            model,
            data,
            schema,
            oracle,
            rates,
            resolution,
        } => {
            if oracle {
                commands::eval_oracle(&rates.params(1, 0), resolution)
            } else {
                let (model, data) = model.zip(data).expect("clap enforces both");
                commands::eval_model(&model, &data, schema.schema())
            }
        }
        Command::Check {
            suites,
            inject_lr_mismatch,
        } => {
            let suites = suites.iter().map(|s| s.parse()).collect::<CliResult<Vec<Suite>>>()?;
            let factor = if inject_lr_mismatch { 1.5 } else { 1.0 };
            commands::check(&suites, factor).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
