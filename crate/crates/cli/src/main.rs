//! `heatctl`: command-line front end for the heat-control toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heatctl::app::{self, AppError, Command, Config, Overrides, EXIT_CONFIG};
use heatctl::fullctl::SeriesVariant;

#[derive(Parser, Debug)]
#[command(
    name = "heatctl",
    version,
    about = "Spectral control of the 1-D heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Heat kernel diagnostics and the observation-norm identity.
    Kernel(Common),
    /// Free heat flow of the initial state.
    Flow(Common),
    /// Essentially time-independent control on the whole domain.
    ControlFull(Common),
    /// Null control from a subdomain on a finite eigenspace.
    ControlSub(Common),
    /// Backward inversion of the heat semigroup.
    Invert(Common),
    /// Run the invariant suite.
    Verify(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration; the built-in default problem is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed of the random test fields.
    #[arg(long)]
    seed: Option<u64>,
    /// Series realising the control factor.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Number of eigenmodes N.
    #[arg(long)]
    modes: Option<usize>,
    /// Number of grid nodes M.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Integers,
    Dyadic,
}

impl From<VariantArg> for SeriesVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Integers => SeriesVariant::AllIntegers,
            VariantArg::Dyadic => SeriesVariant::DyadicAsPrinted,
        }
    }
}

fn execute(command: Command, args: &Common) -> Result<i32, AppError> {
    let mut config = match &args.config {
        Some(path) => app::load_config(path)?,
        None => Config::default(),
    };
    config.apply(&Overrides {
        seed: args.seed,
        variant: args.variant.map(Into::into),
        modes: args.modes,
        grid: args.grid,
    });
    let outcome = app::run(command, &config, &args.out)?;
    if command == Command::Verify {
        if let Some(checks) = outcome.summary["report"]["checks"].as_array() {
            for c in checks {
                let status = if c["passed"].as_bool() == Some(true) {
                    "PASS"
                } else {
                    "FAIL"
                };
                println!(
                    "{status} {}::{} {}",
                    c["module"].as_str().unwrap_or(""),
                    c["name"].as_str().unwrap_or(""),
                    c["detail"].as_str().unwrap_or("")
                );
            }
        }
        let r = &outcome.summary["report"];
        println!("{} passed, {} failed", r["passed"], r["failed"]);
    } else {
        println!(
            "{}",
            serde_json::to_string_pretty(&outcome.summary).unwrap_or_default()
        );
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (command, args) = match &cli.command {
        Cmd::Kernel(a) => (Command::Kernel, a),
        Cmd::Flow(a) => (Command::Flow, a),
        Cmd::ControlFull(a) => (Command::ControlFull, a),
        Cmd::ControlSub(a) => (Command::ControlSub, a),
        Cmd::Invert(a) => (Command::Invert, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    match execute(command, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
