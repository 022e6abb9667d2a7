//! Argument parsing and dispatch for the `qcra` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use qcra_core::objective::ComparatorMode;
use qcra_core::uncertainty::{Encoding, Variant};

use crate::{cmd_analyze, cmd_compare, cmd_distribution, cmd_resources, CliError, EstimatorKind, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "qcra",
    version,
    about = "Credit-risk VaR with iterative amplitude estimation on a statevector simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// VaR, expected loss and economic capital as a JSON report
    Analyze(CommonArgs),
    /// Exact loss distribution as CSV
    Distribution(CommonArgs),
    /// Qubit and gate counts as JSON
    Resources(CommonArgs),
    /// Exact, classical, IQAE and Monte Carlo cdf side by side
    Compare(CommonArgs),
}

/// Parse a snake_case enum value through its serde representation.
fn from_label<T: DeserializeOwned>(s: String) -> T {
    serde_json::from_value(serde_json::Value::String(s)).expect("value restricted by the parser")
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = PossibleValuesParser::new(["exact", "iqae", "classical"]).map(from_label::<EstimatorKind>))]
    pub estimator: Option<EstimatorKind>,
    #[arg(long, value_parser = PossibleValuesParser::new(["multi_rotation", "single_rotation", "single_factor"]).map(from_label::<Variant>))]
    pub variant: Option<Variant>,
    #[arg(long, value_parser = PossibleValuesParser::new(["exact", "linear"]).map(from_label::<Encoding>))]
    pub encoding: Option<Encoding>,
    #[arg(long, value_parser = PossibleValuesParser::new(["s_free", "weighted_sum"]).map(from_label::<ComparatorMode>))]
    pub mode: Option<ComparatorMode>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            estimator: self.estimator,
            variant: self.variant,
            encoding: self.encoding,
            mode: self.mode,
        }
    }
}

/// Parse `args`, run the command, and return the process exit status.
/// Reports go to `--output` when given, otherwise to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (cmd, a): (fn(_, _, _) -> _, _) = match &cli.command {
        Command::Analyze(a) => (cmd_analyze, a),
        Command::Distribution(a) => (cmd_distribution, a),
        Command::Resources(a) => (cmd_resources, a),
        Command::Compare(a) => (cmd_compare, a),
    };
    let result = cmd(a.config.as_path(), a.output.as_deref(), &a.overrides());
    let stdout = std::io::stdout();
    match result {
        Ok(text) => {
            if a.output.is_none() {
                let _ = stdout.lock().write_all(text.as_bytes());
            }
            0
        }
        Err(e) => {
            if let CliError::Estimation { partial, .. } = &e {
                if a.output.is_none() && !partial.is_empty() {
                    let _ = stdout.lock().write_all(partial.as_bytes());
                }
            }
            eprintln!("qcra: {e}");
            e.exit_code()
        }
    }
}
