use std::path::PathBuf;

use clap::Args;
use qready_core::report::{aggregate, load_findings, render, ReportFormat};

use crate::failure::{write_file, Failure};
use crate::Clock;

#[derive(Args)]
pub struct ReportArgs {
    /// findings.jsonl written by `scan`.
    findings: PathBuf,
    /// json, csv or markdown.
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    /// Output directory; the file is named report.<ext>.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

pub fn run(args: ReportArgs, clock: &Clock) -> Result<(), Failure> {
    let file = load_findings(&args.findings).map_err(Failure::data)?;
    let report = aggregate(&file.findings, &file.context(&clock.now()));
    let path = args.out.join(format!("report.{}", args.format.extension()));
    write_file(&path, render(&report, args.format))?;
    println!("rows={} wrote {}", report.rows.len(), path.display());
    Ok(())
}
