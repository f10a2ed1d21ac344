//! Programmed backends that stand in for good and bad models.

use std::collections::BTreeSet;

use crate::lexer::Language;
use crate::migrate::{
    apply_literal_rewrites, hash_rewrites, literal_contents, LiteralRewrite, MigrationTask, TaskKind,
};
use crate::patch::FileSet;
use crate::ruleset::Ruleset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Script {
    /// Rewrites hash literals exactly like the deterministic transformer.
    PerfectHashFixer,
    /// Swaps the algorithm, registers the provider, imports it and declares
    /// the dependency.
    CompletePqc,
    /// Like `CompletePqc` but leaves a TODO marker behind.
    PlaceholderPqc,
    /// Like `CompletePqc` without the imports.
    MissingImportPqc,
    /// Like `CompletePqc` without the build-manifest dependency.
    NoDependencyPqc,
}

pub const SCRIPT_IDS: &[&str] = &[
    "perfect-hash-fixer",
    "complete-pqc",
    "placeholder-pqc",
    "missing-import-pqc",
    "no-dependency-pqc",
];

impl std::str::FromStr for Script {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "perfect-hash-fixer" => Script::PerfectHashFixer,
            "complete-pqc" => Script::CompletePqc,
            "placeholder-pqc" => Script::PlaceholderPqc,
            "missing-import-pqc" => Script::MissingImportPqc,
            "no-dependency-pqc" => Script::NoDependencyPqc,
            other => return Err(format!("unknown script {other:?}; known: {}", SCRIPT_IDS.join(", "))),
        })
    }
}

const PROVIDER_IMPORTS: &[&str] = &[
    "java.security.Security",
    "org.bouncycastle.pqc.jcajce.provider.BouncyCastlePQCProvider",
];
const DEPENDENCY_VERSION: &str = "1.78.1";

/// The files the script would leave behind, or the reply it gives instead of
/// a patch.
pub fn scripted_after(
    script: Script,
    task: &MigrationTask,
    files: &FileSet,
    rules: &Ruleset,
) -> Result<FileSet, String> {
    match (&task.kind, script) {
        (TaskKind::HashUpgrade { .. }, _) => {
            let rewrites = hash_rewrites(task, files, rules).map_err(|e| e.to_string())?;
            Ok(apply_literal_rewrites(files, &rewrites))
        }
        (_, Script::PerfectHashFixer) => {
            Err("This task is not a hash upgrade; no change proposed.".to_string())
        }
        (kind, script) => Ok(pqc_after(script, kind, task, files, rules)),
    }
}

fn pqc_after(
    script: Script,
    kind: &TaskKind,
    task: &MigrationTask,
    files: &FileSet,
    rules: &Ruleset,
) -> FileSet {
    let target = kind.target().display_name();
    let mut seen = BTreeSet::new();
    let mut rewrites = Vec::new();
    for f in &task.target_findings {
        let Some(o) = &f.literal_origin else { continue };
        let Some(content) = files.get(&o.file_path) else { continue };
        if let Some((end, _)) = literal_contents(content, o.start) {
            if seen.insert((o.file_path.clone(), o.start)) {
                rewrites.push(LiteralRewrite {
                    file_path: o.file_path.clone(),
                    start: o.start,
                    end,
                    replacement: target.clone(),
                });
            }
        }
    }
    let mut out = apply_literal_rewrites(files, &rewrites);

    let mut first_line: std::collections::BTreeMap<&str, u32> = Default::default();
    for f in &task.target_findings {
        let e = first_line.entry(f.location.file_path.as_str()).or_insert(f.location.line);
        *e = (*e).min(f.location.line);
    }
    for (path, line) in first_line {
        let Some(lang) = Language::from_path(path).filter(|l| *l != Language::Smali) else {
            continue;
        };
        let Some(content) = out.get_mut(path) else { continue };
        let mut lines: Vec<String> = content.split_inclusive('\n').map(str::to_string).collect();
        let idx = (line as usize).saturating_sub(1).min(lines.len());
        let indent: String = lines
            .get(idx)
            .map(|l| l.chars().take_while(|c| c.is_whitespace() && *c != '\n').collect())
            .unwrap_or_default();
        let register = match lang {
            Language::Kotlin => "Security.addProvider(BouncyCastlePQCProvider())",
            _ => "Security.addProvider(new BouncyCastlePQCProvider());",
        };
        let mut inserted = vec![format!("{indent}{register}\n")];
        if script == Script::PlaceholderPqc {
            inserted.insert(0, format!("{indent}// TODO: integrate {target} key handling\n"));
        }
        lines.splice(idx..idx, inserted);
        if script != Script::MissingImportPqc {
            add_imports(&mut lines, lang);
        }
        *content = lines.concat();
    }

    if script != Script::NoDependencyPqc {
        if let Some(marker) = &task.expected_dependency_marker {
            for (path, content) in out.iter_mut() {
                if rules.migration.is_manifest(path) && !content.contains(marker.as_str()) {
                    *content = add_dependency(content, marker, path.ends_with(".kts"));
                }
            }
        }
    }
    out
}

fn add_imports(lines: &mut Vec<String>, lang: Language) {
    let semi = if lang == Language::Kotlin { "" } else { ";" };
    let anchor = lines
        .iter()
        .rposition(|l| l.trim_start().starts_with("import "))
        .or_else(|| lines.iter().position(|l| l.trim_start().starts_with("package ")));
    let missing: Vec<String> = PROVIDER_IMPORTS
        .iter()
        .filter(|imp| !lines.iter().any(|l| l.contains(&format!("import {imp}"))))
        .map(|imp| format!("import {imp}{semi}\n"))
        .collect();
    match anchor {
        Some(i) => {
            let at = i + 1;
            if lines[i].trim_start().starts_with("package ") {
                lines.insert(at, "\n".to_string());
                lines.splice(at + 1..at + 1, missing);
            } else {
                lines.splice(at..at, missing);
            }
        }
        None => {
            lines.splice(0..0, missing);
        }
    }
}

fn add_dependency(content: &str, marker: &str, kotlin_dsl: bool) -> String {
    let line = if kotlin_dsl {
        format!("    implementation(\"{marker}:{DEPENDENCY_VERSION}\")\n")
    } else {
        format!("    implementation '{marker}:{DEPENDENCY_VERSION}'\n")
    };
    let mut lines: Vec<&str> = content.split_inclusive('\n').collect();
    if let Some(i) = lines.iter().position(|l| l.trim_start().starts_with("dependencies {")) {
        lines.insert(i + 1, &line);
        return lines.concat();
    }
    let mut out = content.to_string();
    if !out.is_empty() && !out.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("\ndependencies {\n");
    out.push_str(&line);
    out.push_str("}\n");
    out
}
