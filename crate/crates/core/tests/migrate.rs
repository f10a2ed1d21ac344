use std::collections::BTreeMap;

use qready_core::gateway::{complete, Backend, ModelConfig};
use qready_core::migrate::{
    apply_hash_upgrade, build_prompt, plan_tasks, score_run, validate_patch, CheckId,
    ExemplarLibrary, KindFilter, MigrateError, MigrationTask, PromptMode, TaskKind, Verdict,
};
use qready_core::patch::{apply_patch, FileSet};
use qready_core::pipeline::analyze_units;
use qready_core::ruleset::Ruleset;
use qready_core::scanner::SourceUnit;

const APP: &str = "demo";

const HASHER: &str = "package com.demo;

import java.security.MessageDigest;

public class Hasher {
    private static final String ALGO = \"SHA-1\";

    public byte[] a(byte[] in) throws Exception {
        return MessageDigest.getInstance(ALGO).digest(in);
    }

    public byte[] b(byte[] in) throws Exception {
        MessageDigest md = MessageDigest.getInstance(\"MD5\");
        return md.digest(in);
    }
}
";

const SIGNER: &str = "package com.demo;

import java.security.KeyPair;
import java.security.Signature;

public class Signer {
    public byte[] sign(KeyPair kp, byte[] data) throws Exception {
        Signature s = Signature.getInstance(\"SHA256withRSA\");
        s.initSign(kp.getPrivate());
        s.update(data);
        return s.sign();
    }
}
";

const GRADLE: &str = "plugins {
    id 'com.android.application'
}

dependencies {
    implementation 'androidx.core:core:1.12.0'
}
";

fn app() -> FileSet {
    let mut files = FileSet::new();
    files.insert("src/com/demo/Hasher.java".into(), HASHER.into());
    files.insert("src/com/demo/Signer.java".into(), SIGNER.into());
    files.insert("build.gradle".into(), GRADLE.into());
    files
}

fn plan(files: &FileSet, filter: KindFilter) -> Vec<MigrationTask> {
    let rules = Ruleset::builtin();
    let units = files
        .iter()
        .filter_map(|(p, c)| SourceUnit::new(APP, p, c.as_str()))
        .collect();
    let (findings, _) = analyze_units(units, rules);
    let mut app_files = BTreeMap::new();
    app_files.insert(APP.to_string(), files.keys().cloned().collect());
    plan_tasks(&findings, rules, filter, &app_files)
}

fn context(files: &FileSet, task: &MigrationTask) -> FileSet {
    task.context_files.iter().map(|p| (p.clone(), files[p].clone())).collect()
}

#[test]
fn plans_hash_and_signature_tasks() {
    let tasks = plan(&app(), KindFilter::All);
    let ids: Vec<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    assert_eq!(ids, ["demo-hash-md5-01", "demo-hash-sha1-01", "demo-pqc-sig-01"]);
    let sig = &tasks[2];
    assert!(matches!(sig.kind, TaskKind::PqcSignatureIntegration { .. }));
    assert!(sig.context_files.contains(&"build.gradle".to_string()));
    assert!(sig.expected_dependency_marker.is_some());
}

#[test]
fn sha256_only_plans_nothing() {
    let mut files = FileSet::new();
    files.insert(
        "A.java".into(),
        "class A { void f() throws Exception { java.security.MessageDigest.getInstance(\"SHA-256\"); } }\n".into(),
    );
    assert!(plan(&files, KindFilter::All).is_empty());
}

#[test]
fn hash_upgrade_edits_the_constant_and_passes_validation() {
    let files = app();
    let rules = Ruleset::builtin();
    let tasks = plan(&files, KindFilter::Hash);
    assert_eq!(tasks.len(), 2);
    let mut after_all = files.clone();
    for task in &tasks {
        let before = context(&after_all, task);
        let patch = apply_hash_upgrade(task, &before, rules).unwrap();
        let after = apply_patch(&before, &patch).unwrap();
        let report = validate_patch(task, &before, Ok(&after), rules);
        assert_eq!(report.overall, Verdict::Pass, "{report:#?}");
        assert_eq!(report.check(CheckId::V6DependencyDeclared).unwrap().verdict, Verdict::Skip);
        after_all.extend(after);
    }
    let hasher = &after_all["src/com/demo/Hasher.java"];
    assert!(hasher.contains("ALGO = \"SHA-256\""));
    assert!(hasher.contains("getInstance(\"SHA-256\")"));
    assert!(plan(&after_all, KindFilter::Hash).is_empty());
}

#[test]
fn unresolved_target_is_rejected() {
    let files = app();
    let mut task = plan(&files, KindFilter::Hash).remove(0);
    task.target_findings[0].resolution = qready_core::model::ResolutionStatus::Unresolved;
    let err = apply_hash_upgrade(&task, &context(&files, &task), Ruleset::builtin()).unwrap_err();
    assert!(matches!(err, MigrateError::UnresolvedTarget { .. }));
}

#[test]
fn failed_apply_skips_remaining_checks() {
    let files = app();
    let task = plan(&files, KindFilter::Hash).remove(0);
    let before = context(&files, &task);
    let report = validate_patch(&task, &before, Err("context mismatch"), Ruleset::builtin());
    assert_eq!(report.overall, Verdict::Fail);
    assert_eq!(report.checks.len(), 7);
    assert!(report.checks[1..].iter().all(|c| c.verdict == Verdict::Skip));
}

#[test]
fn prompt_modes() {
    let files = app();
    let task = plan(&files, KindFilter::Pqc).remove(0);
    let before = context(&files, &task);
    let mut lib = ExemplarLibrary::default();
    lib.insert("pqc-signature", "--- a/X.java\n+++ b/X.java\n@@ -1 +1 @@\n-a\n+b\n".into());
    let edit = build_prompt(&task, PromptMode::Edit, &before, &lib).unwrap();
    assert_eq!(edit.files.len(), before.len());
    assert_eq!(edit.exemplar_diffs.len(), 1);
    assert!(edit.instructions.contains("unified diff only"));
    let agentic = build_prompt(&task, PromptMode::Agentic, &before, &lib).unwrap();
    assert!(agentic.files.is_empty());
    assert_eq!(agentic.manifest.len(), before.len());
    assert!(agentic.tool_protocol.as_deref().unwrap().contains("read_file"));
    assert_ne!(edit.content_hash(), agentic.content_hash());
    assert_eq!(edit.content_hash(), build_prompt(&task, PromptMode::Edit, &before, &lib).unwrap().content_hash());

    let mut missing = before.clone();
    missing.remove("build.gradle");
    assert!(matches!(
        build_prompt(&task, PromptMode::Edit, &missing, &lib),
        Err(MigrateError::MissingContextFile(_))
    ));
}

fn run_script(script: &str, mode: PromptMode) -> qready_core::migrate::ValidationReport {
    let files = app();
    let rules = Ruleset::builtin();
    let task = plan(&files, KindFilter::Pqc).remove(0);
    let before = context(&files, &task);
    let bundle = build_prompt(&task, mode, &before, &ExemplarLibrary::default()).unwrap();
    let config = ModelConfig::new(Backend::Scripted { script_id: script.into() });
    let response = complete(&bundle, &config, rules).unwrap();
    let applied = response
        .patch()
        .map_err(|e| e.to_string())
        .and_then(|p| apply_patch(&before, p).map_err(|e| e.to_string()));
    validate_patch(&task, &before, applied.as_ref().map_err(String::as_str), rules)
}

fn failed(report: &qready_core::migrate::ValidationReport) -> Vec<CheckId> {
    report.failed_checks().collect()
}

#[test]
fn scripted_pqc_behaviors() {
    for mode in [PromptMode::Edit, PromptMode::Agentic] {
        let r = run_script("complete-pqc", mode);
        assert_eq!(r.overall, Verdict::Pass, "{mode:?} {r:#?}");
        assert_eq!(failed(&run_script("placeholder-pqc", mode)), [CheckId::V5NoPlaceholders]);
        assert_eq!(failed(&run_script("missing-import-pqc", mode)), [CheckId::V4ImportsResolve]);
        assert_eq!(failed(&run_script("no-dependency-pqc", mode)), [CheckId::V6DependencyDeclared]);
        assert_eq!(failed(&run_script("perfect-hash-fixer", mode)), [CheckId::V1Applies]);
    }
}

#[test]
fn perfect_hash_fixer_matches_transformer() {
    let files = app();
    let rules = Ruleset::builtin();
    for task in plan(&files, KindFilter::Hash) {
        let before = context(&files, &task);
        let expected = apply_hash_upgrade(&task, &before, rules).unwrap();
        for mode in [PromptMode::Edit, PromptMode::Agentic] {
            let bundle = build_prompt(&task, mode, &before, &ExemplarLibrary::default()).unwrap();
            let config = ModelConfig::new(Backend::Scripted { script_id: "perfect-hash-fixer".into() });
            let response = complete(&bundle, &config, rules).unwrap();
            assert_eq!(response.patch().unwrap(), &expected);
        }
    }
}

#[test]
fn replay_miss_names_the_hash() {
    let files = app();
    let task = plan(&files, KindFilter::Pqc).remove(0);
    let before = context(&files, &task);
    let bundle = build_prompt(&task, PromptMode::Edit, &before, &ExemplarLibrary::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let config = ModelConfig::new(Backend::Replay { directory: dir.path().into() });
    let err = complete(&bundle, &config, Ruleset::builtin()).unwrap_err();
    assert!(err.to_string().contains(&bundle.content_hash()));

    let record = serde_json::json!({
        "content_hash": bundle.content_hash(),
        "turns": [{ "text": "no idea" }]
    });
    std::fs::write(
        dir.path().join(format!("{}.json", bundle.content_hash())),
        record.to_string(),
    )
    .unwrap();
    let a = complete(&bundle, &config, Ruleset::builtin()).unwrap();
    let b = complete(&bundle, &config, Ruleset::builtin()).unwrap();
    assert_eq!(a, b);
    assert!(a.extracted_patch.is_none());
}

#[test]
fn agentic_budget_is_enforced() {
    let files = app();
    let task = plan(&files, KindFilter::Pqc).remove(0);
    let before = context(&files, &task);
    let bundle = build_prompt(&task, PromptMode::Agentic, &before, &ExemplarLibrary::default()).unwrap();
    let mut config = ModelConfig::new(Backend::Scripted { script_id: "complete-pqc".into() });
    config.tool_budget = 2;
    let err = complete(&bundle, &config, Ruleset::builtin()).unwrap_err();
    assert!(matches!(err, qready_core::gateway::GatewayError::BudgetExceeded { budget: 2 }));
}

#[test]
fn scoring() {
    assert_eq!(score_run(&[]).per_kind.len(), 0);
    let reports = vec![
        run_script("complete-pqc", PromptMode::Edit),
        run_script("placeholder-pqc", PromptMode::Edit),
        run_script("placeholder-pqc", PromptMode::Agentic),
        run_script("missing-import-pqc", PromptMode::Edit),
    ];
    let summary = score_run(&reports);
    let sig = &summary.per_kind["PqcSignatureIntegration"];
    assert_eq!((sig.attempted, sig.passed), (4, 1));
    assert_eq!(summary.dominant_failure("PqcSignatureIntegration"), Some("V5_no_placeholders"));
    let failing: usize = reports.iter().map(|r| r.failed_checks().count()).sum();
    assert_eq!(summary.failure_histogram.values().sum::<usize>(), failing);
    let mut shuffled = reports.clone();
    shuffled.reverse();
    assert_eq!(score_run(&shuffled), summary);
}

fn validate_edit(edit: impl Fn(&str) -> String) -> qready_core::migrate::ValidationReport {
    let files = app();
    let task = plan(&files, KindFilter::Pqc).remove(0);
    let before = context(&files, &task);
    let mut after = before.clone();
    let signer = after.get_mut("src/com/demo/Signer.java").unwrap();
    *signer = edit(signer);
    validate_patch(&task, &before, Ok(&after), Ruleset::builtin())
}

#[test]
fn empty_method_body_is_a_placeholder() {
    let r = validate_edit(|s| s.replace("public class Signer {\n", "public class Signer {\n    void kyberInit() {}\n"));
    assert_eq!(r.check(CheckId::V5NoPlaceholders).unwrap().verdict, Verdict::Fail);
    let r = validate_edit(|s| s.replace("s.update(data);\n", "s.update(data);\n        if (data == null) {}\n"));
    assert_eq!(r.check(CheckId::V5NoPlaceholders).unwrap().verdict, Verdict::Pass);
}

#[test]
fn unbalanced_braces_fail_well_formedness() {
    let r = validate_edit(|s| s.replace("return s.sign();\n    }", "return s.sign();\n"));
    assert_eq!(r.check(CheckId::V7WellFormed).unwrap().verdict, Verdict::Fail);
    let r = validate_edit(|s| s.replace("s.update(data);", "s.update(\"data);"));
    assert_eq!(r.check(CheckId::V7WellFormed).unwrap().verdict, Verdict::Fail);
}

#[test]
fn unimported_type_fails_import_check() {
    let r = validate_edit(|s| s.replace("s.update(data);\n", "s.update(data);\n        DilithiumSigner d = new DilithiumSigner();\n"));
    let v4 = r.check(CheckId::V4ImportsResolve).unwrap();
    assert_eq!(v4.verdict, Verdict::Fail);
    assert!(v4.detail.contains("DilithiumSigner"));
}
