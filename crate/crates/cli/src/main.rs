//! `qready`: scan decompiled Android sources for crypto API use, report
//! post-quantum readiness, migrate legacy primitives and score the results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod eval;
mod failure;
mod migrate;
mod report;
mod scan;

use failure::Failure;

#[derive(Parser)]
#[command(name = "qready", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Timestamp written into reports instead of the current time.
    #[arg(long, global = true, value_name = "RFC3339")]
    fixed_clock: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a corpus of app directories and write findings.jsonl.
    Scan(scan::ScanArgs),
    /// Aggregate findings.jsonl into a corpus report.
    Report(report::ReportArgs),
    /// Plan, perform and validate migrations for the findings.
    Migrate(Box<migrate::MigrateArgs>),
    /// Summarize validation reports of a migrate run into eval.json.
    Eval(eval::EvalArgs),
}

/// Options shared by subcommands that classify.
#[derive(Args, Clone)]
struct RulesArg {
    /// Ruleset JSON; defaults to the built-in ruleset.
    #[arg(long = "rules", value_name = "PATH")]
    path: Option<PathBuf>,
}

impl RulesArg {
    fn load(&self) -> Result<qready_core::ruleset::Ruleset, Failure> {
        qready_core::ruleset::load_ruleset(self.path.as_deref()).map_err(Failure::config)
    }
}

pub(crate) struct Clock(Option<String>);

impl Clock {
    fn now(&self) -> String {
        match &self.0 {
            Some(fixed) => fixed.clone(),
            None => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    if let Some(ts) = &cli.fixed_clock {
        if chrono::DateTime::parse_from_rfc3339(ts).is_err() {
            eprintln!("error: --fixed-clock {ts:?} is not an RFC 3339 timestamp");
            return ExitCode::from(2);
        }
    }
    let clock = Clock(cli.fixed_clock);
    let result = match cli.command {
        Command::Scan(args) => scan::run(args),
        Command::Report(args) => report::run(args, &clock),
        Command::Migrate(args) => migrate::run(*args),
        Command::Eval(args) => eval::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
