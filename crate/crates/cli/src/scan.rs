use std::path::PathBuf;

use clap::Args;
use qready_core::pipeline::{scan_corpus, PipelineError, ScanOptions};
use qready_core::report::{persist_findings, FindingsHeader};

use crate::failure::{create_dir, Failure};
use crate::RulesArg;

#[derive(Args)]
pub struct ScanArgs {
    /// Directory holding one subdirectory per app.
    corpus_root: PathBuf,
    #[command(flatten)]
    rules: RulesArg,
    /// Output directory for findings.jsonl.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overwrite an existing findings.jsonl.
    #[arg(long)]
    force: bool,
}

pub fn run(args: ScanArgs) -> Result<(), Failure> {
    let rules = args.rules.load()?;
    let target = args.out.join("findings.jsonl");
    if target.exists() && !args.force {
        return Err(Failure::data(format!(
            "{} exists; pass --force to overwrite",
            target.display()
        )));
    }
    let options = ScanOptions { jobs: args.jobs, ..Default::default() };
    let scan = scan_corpus(&args.corpus_root, &rules, &options).map_err(|e| match e {
        PipelineError::ThreadPool(_) => Failure::config(e),
        _ => Failure::data(e),
    })?;
    for d in &scan.diagnostics {
        eprintln!("warning: {d}");
    }
    create_dir(&args.out)?;
    let header = FindingsHeader::new(&scan.corpus_root, &scan.apps);
    persist_findings(&target, &header, &scan.findings).map_err(Failure::data)?;
    println!(
        "apps={} findings={} unresolved={}",
        scan.apps.len(),
        scan.findings.len(),
        scan.unresolved_count()
    );
    Ok(())
}
