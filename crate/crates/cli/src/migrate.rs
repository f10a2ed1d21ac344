use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use qready_core::gateway::{Backend, Dialect, Gateway, ModelConfig};
use qready_core::migrate::{
    apply_hash_upgrade, build_prompt, load_context, plan_tasks, validate_patch, ExemplarLibrary,
    KindFilter, MigrationTask, PromptMode, ValidationReport, Verdict,
};
use qready_core::patch::{apply_patch, render_patch, FileSet, Patch};
use qready_core::report::load_findings;
use qready_core::ruleset::Ruleset;
use qready_core::scanner::{load_app, WalkOptions};
use rayon::prelude::*;

use crate::failure::{create_dir, write_file, write_json, Failure};
use crate::RulesArg;

#[derive(Args)]
pub struct MigrateArgs {
    /// findings.jsonl written by `scan`.
    findings: PathBuf,
    /// Corpus root; defaults to the one recorded in the findings header.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    rules: RulesArg,
    /// hash, pqc or all.
    #[arg(long, default_value = "all")]
    kind: KindFilter,
    /// scripted:<id>, replay:<dir> or http:<url>.
    #[arg(long)]
    backend: Option<Backend>,
    /// Model name sent to an http backend.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the http bearer token.
    #[arg(long)]
    auth_env: Option<String>,
    /// Response shape of an http backend: minimal or chat-completions.
    #[arg(long)]
    dialect: Option<Dialect>,
    /// Save http conversations here in replay format.
    #[arg(long)]
    record: Option<PathBuf>,
    /// edit or agentic.
    #[arg(long, default_value = "edit")]
    mode: PromptMode,
    /// Send hash upgrades to the backend instead of the built-in transformer.
    #[arg(long)]
    via_model: bool,
    /// Directory of <kind>/<name>.diff reference changes.
    #[arg(long)]
    exemplars: Option<PathBuf>,
    #[arg(long, default_value_t = qready_core::gateway::DEFAULT_TIMEOUT_S)]
    timeout: u64,
    #[arg(long, default_value_t = qready_core::gateway::DEFAULT_MAX_RETRIES)]
    max_retries: u32,
    /// Determinism hint forwarded to the backend.
    #[arg(long)]
    seed: Option<u64>,
    /// Tool calls allowed per agentic task; defaults to the ruleset setting.
    #[arg(long)]
    tool_budget: Option<usize>,
    /// Output directory; one subdirectory per task.
    #[arg(long, default_value = "migrate-out")]
    out: PathBuf,
    /// Tasks processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

struct Outcome {
    report: ValidationReport,
    after: Option<FileSet>,
    patch: Option<Patch>,
    response: Option<String>,
}

fn model_config(args: &MigrateArgs, rules: &Ruleset) -> Option<ModelConfig> {
    let mut backend = args.backend.clone()?;
    if let Backend::HttpJson { model_name, auth_env_var, dialect, .. } = &mut backend {
        if let Some(m) = &args.model {
            *model_name = m.clone();
        }
        if let Some(v) = &args.auth_env {
            *auth_env_var = Some(v.clone());
        }
        if let Some(d) = args.dialect {
            *dialect = d;
        }
    }
    let mut config = ModelConfig::new(backend);
    config.timeout_s = args.timeout;
    config.max_retries = args.max_retries;
    config.seed = args.seed;
    config.tool_budget = args.tool_budget.unwrap_or(rules.migration.agentic_tool_budget);
    config.record_dir = args.record.clone();
    Some(config)
}

fn fail_v1(task: &MigrationTask, before: &FileSet, reason: &str, rules: &Ruleset) -> ValidationReport {
    validate_patch(task, before, Err(reason), rules)
}

fn run_task(
    task: &MigrationTask,
    before: &FileSet,
    rules: &Ruleset,
    gateway: Option<&Gateway>,
    mode: PromptMode,
    via_model: bool,
    exemplars: &ExemplarLibrary,
) -> Outcome {
    let mut response_text = None;
    let patch: Result<Patch, String> = if !task.kind.is_pqc() && !via_model {
        apply_hash_upgrade(task, before, rules).map_err(|e| e.to_string())
    } else {
        let gateway = gateway.expect("backend checked before planning");
        build_prompt(task, mode, before, exemplars)
            .map_err(|e| e.to_string())
            .and_then(|bundle| gateway.complete(&bundle).map_err(|e| e.to_string()))
            .and_then(|resp| {
                response_text = Some(resp.raw_text.clone());
                resp.patch().cloned()
            })
    };
    let patch = match patch {
        Ok(p) => p,
        Err(reason) => {
            log::warn!("{}: {reason}", task.task_id);
            return Outcome {
                report: fail_v1(task, before, &reason, rules),
                after: None,
                patch: None,
                response: response_text,
            };
        }
    };
    match apply_patch(before, &patch) {
        Ok(after) => Outcome {
            report: validate_patch(task, before, Ok(&after), rules),
            after: Some(after),
            patch: Some(patch),
            response: response_text,
        },
        Err(e) => Outcome {
            report: fail_v1(task, before, &e.to_string(), rules),
            after: None,
            patch: Some(patch),
            response: response_text,
        },
    }
}

fn write_tree(root: &Path, files: &FileSet) -> Result<(), Failure> {
    create_dir(root)?;
    for (rel, content) in files {
        write_file(&root.join(rel), content)?;
    }
    Ok(())
}

fn write_artifacts(dir: &Path, task: &MigrationTask, before: &FileSet, outcome: &Outcome) -> Result<(), Failure> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    write_tree(&dir.join("before"), before)?;
    if let Some(after) = &outcome.after {
        write_tree(&dir.join("after"), after)?;
    }
    if let Some(patch) = &outcome.patch {
        write_file(&dir.join("patch.diff"), render_patch(patch))?;
    }
    if let Some(text) = &outcome.response {
        write_file(&dir.join("response.txt"), text)?;
    }
    write_json(&dir.join("task.json"), task)?;
    write_json(&dir.join("validation.json"), &outcome.report)
}

pub fn run(args: MigrateArgs) -> Result<(), Failure> {
    let rules = args.rules.load()?;
    let file = load_findings(&args.findings).map_err(Failure::data)?;
    let corpus = args
        .corpus
        .clone()
        .unwrap_or_else(|| PathBuf::from(&file.header.corpus_root));

    let mut app_files: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for app in &file.header.apps {
        let root = corpus.join(app);
        if !root.is_dir() {
            return Err(Failure::data(format!("app directory {} not found", root.display())));
        }
        app_files.insert(app.clone(), load_app(&root, &WalkOptions::default()).all_files);
    }
    let tasks = plan_tasks(&file.findings, &rules, args.kind, &app_files);
    println!("{} tasks planned", tasks.len());
    if tasks.is_empty() {
        return Ok(());
    }

    let needs_model = tasks.iter().any(|t| t.kind.is_pqc()) || args.via_model;
    let config = model_config(&args, &rules);
    if needs_model && config.is_none() {
        return Err(Failure::config("PQC tasks and --via-model need --backend"));
    }
    let gateway = match config {
        Some(c) if needs_model => Some(Gateway::new(c, &rules).map_err(Failure::config)?),
        _ => None,
    };
    let exemplars = match &args.exemplars {
        Some(dir) => ExemplarLibrary::load(dir).map_err(Failure::data)?,
        None => ExemplarLibrary::default(),
    };

    let mut contexts = Vec::with_capacity(tasks.len());
    for t in &tasks {
        contexts.push(load_context(&corpus, t).map_err(Failure::data)?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(Failure::config)?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        tasks
            .par_iter()
            .zip(contexts.par_iter())
            .map(|(task, before)| {
                run_task(task, before, &rules, gateway.as_ref(), args.mode, args.via_model, &exemplars)
            })
            .collect()
    });

    create_dir(&args.out)?;
    let mut passed = 0;
    for ((task, before), outcome) in tasks.iter().zip(&contexts).zip(&outcomes) {
        write_artifacts(&args.out.join(&task.task_id), task, before, outcome)?;
        if outcome.report.overall == Verdict::Pass {
            passed += 1;
        }
    }
    println!("passed={passed} failed={}", tasks.len() - passed);
    Ok(())
}
