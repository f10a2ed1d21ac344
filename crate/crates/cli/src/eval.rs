use std::path::PathBuf;

use clap::Args;
use qready_core::migrate::{score_run, ValidationReport};

use crate::failure::{write_json, Failure};

#[derive(Args)]
pub struct EvalArgs {
    /// Output directory of a `migrate` run.
    run_dir: PathBuf,
    /// Where to write the summary; defaults to <run_dir>/eval.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<(), Failure> {
    let entries = std::fs::read_dir(&args.run_dir).map_err(|e| Failure::io(&args.run_dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path().join("validation.json"))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::data(format!(
            "{}: no validation reports found",
            args.run_dir.display()
        )));
    }
    let mut reports = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
        let report: ValidationReport = serde_json::from_str(&text).map_err(|e| Failure::io(p, e))?;
        reports.push(report);
    }
    reports.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let summary = score_run(&reports);
    let out = args.out.unwrap_or_else(|| args.run_dir.join("eval.json"));
    write_json(&out, &summary)?;
    for (kind, k) in &summary.per_kind {
        println!("{kind}: {}/{} passed ({:.2})", k.passed, k.attempted, k.pass_rate);
    }
    Ok(())
}
