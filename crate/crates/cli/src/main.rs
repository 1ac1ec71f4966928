//! Command-line front end: single runs, parameter sweeps and the invariant suite.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use risloc::harness::{self, Format, MethodSet, ScenarioConfig, SweepAxis, SweepOutcome};
use risloc::Error;

#[derive(Parser)]
#[command(name = "risloc", version, about = "Near-field RIS localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo trials of one configuration.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the run across values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
    },
    /// Check model and estimator invariants for the configuration.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        desk_scale: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON check list here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON scenario file; defaults to the full-size profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Shrink the scenario to the desk profile.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
    /// Write every trial record as JSON lines.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nf,
    Ff,
    Both,
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(config: Option<&Path>, desk: bool, seed: Option<u64>, trials: Option<usize>) -> risloc::Result<ScenarioConfig> {
    let mut cfg = match config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::full_size(),
    };
    if desk {
        cfg = cfg.desk_scaled();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_outcome(outcome: &SweepOutcome, common: &Common) -> risloc::Result<()> {
    let format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    match &common.out {
        Some(p) => outcome.report.emit(format, p)?,
        None => {
            let text = match format {
                Format::Csv => outcome.report.to_csv_string(),
                Format::Json => outcome.report.to_json_string() + "\n",
            };
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    if let Some(p) = &common.dump {
        let mut w = BufWriter::new(File::create(p).map_err(io_err(p))?);
        for batch in &outcome.batches {
            for t in &batch.trials {
                let line = serde_json::json!({ "axis": batch.axis, "trial": t });
                writeln!(w, "{line}").map_err(io_err(p))?;
            }
        }
        w.flush().map_err(io_err(p))?;
    }
    Ok(())
}

fn methods(m: MethodArg) -> MethodSet {
    match m {
        MethodArg::Nf => MethodSet::Nf,
        MethodArg::Ff => MethodSet::Ff,
        MethodArg::Both => MethodSet::Both,
    }
}

fn execute(cli: Cli) -> risloc::Result<bool> {
    match cli.command {
        Command::Run { common } => {
            let cfg = load(common.config.as_deref(), common.desk_scale, common.seed, common.trials)?;
            let outcome = harness::run(&cfg, methods(common.method))?;
            write_outcome(&outcome, &common)?;
            Ok(true)
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let cfg = load(common.config.as_deref(), common.desk_scale, common.seed, common.trials)?;
            let outcome = harness::sweep(&cfg, axis, &values, methods(common.method))?;
            write_outcome(&outcome, &common)?;
            Ok(true)
        }
        Command::Validate {
            config,
            desk_scale,
            seed,
            out,
        } => {
            let cfg = load(config.as_deref(), desk_scale, seed, None)?;
            let report = harness::validate(&cfg)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            match out {
                Some(p) => std::fs::write(&p, text).map_err(io_err(&p))?,
                None => print!("{text}"),
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let rec = serde_json::json!({
                "kind": "validation",
                "message": "one or more invariant checks failed",
            });
            eprintln!("{rec}");
            ExitCode::from(1)
        }
        Err(e) => {
            let rec = serde_json::json!({ "kind": e.kind(), "message": e.to_string() });
            eprintln!("{rec}");
            ExitCode::from(2)
        }
    }
}
