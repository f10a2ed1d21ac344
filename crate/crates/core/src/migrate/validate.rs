use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{MigrationTask, TaskKind};
use crate::lexer::{strip_noncode, Language};
use crate::model::{canonical_algorithm_key, ApiKind, Finding, Label, Primitive};
use crate::patch::FileSet;
use crate::pipeline::analyze_units;
use crate::ruleset::Ruleset;
use crate::scanner::SourceUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckId {
    #[serde(rename = "V1_applies")]
    V1Applies,
    #[serde(rename = "V2_target_eliminated")]
    V2TargetEliminated,
    #[serde(rename = "V3_no_new_vulnerable")]
    V3NoNewVulnerable,
    #[serde(rename = "V4_imports_resolve")]
    V4ImportsResolve,
    #[serde(rename = "V5_no_placeholders")]
    V5NoPlaceholders,
    #[serde(rename = "V6_dependency_declared")]
    V6DependencyDeclared,
    #[serde(rename = "V7_well_formed")]
    V7WellFormed,
}

impl CheckId {
    pub const ALL: [CheckId; 7] = [
        CheckId::V1Applies,
        CheckId::V2TargetEliminated,
        CheckId::V3NoNewVulnerable,
        CheckId::V4ImportsResolve,
        CheckId::V5NoPlaceholders,
        CheckId::V6DependencyDeclared,
        CheckId::V7WellFormed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::V1Applies => "V1_applies",
            CheckId::V2TargetEliminated => "V2_target_eliminated",
            CheckId::V3NoNewVulnerable => "V3_no_new_vulnerable",
            CheckId::V4ImportsResolve => "V4_imports_resolve",
            CheckId::V5NoPlaceholders => "V5_no_placeholders",
            CheckId::V6DependencyDeclared => "V6_dependency_declared",
            CheckId::V7WellFormed => "V7_well_formed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: CheckId,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub task_id: String,
    pub task_kind: String,
    pub checks: Vec<CheckResult>,
    /// Pass iff every non-skipped check passes.
    pub overall: Verdict,
}

impl ValidationReport {
    pub fn check(&self, id: CheckId) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check_id == id)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = CheckId> + '_ {
        self.checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| c.check_id)
    }
}

fn result(check_id: CheckId, verdict: Verdict, detail: impl Into<String>) -> CheckResult {
    CheckResult { check_id, verdict, detail: detail.into() }
}

fn pass_or_fail(check_id: CheckId, problems: Vec<String>, ok: &str) -> CheckResult {
    if problems.is_empty() {
        result(check_id, Verdict::Pass, ok)
    } else {
        result(check_id, Verdict::Fail, problems.join("; "))
    }
}

/// Language used for token checks; Gradle scripts lex as Java or Kotlin.
fn check_language(path: &str) -> Option<Language> {
    Language::from_path(path).or_else(|| {
        let name = path.rsplit('/').next().unwrap_or(path);
        if name.ends_with(".gradle") {
            Some(Language::Java)
        } else if name.ends_with(".gradle.kts") {
            Some(Language::Kotlin)
        } else {
            None
        }
    })
}

fn scan(app_id: &str, files: &FileSet, rules: &Ruleset) -> Vec<Finding> {
    let units: Vec<SourceUnit> = files
        .iter()
        .filter_map(|(path, content)| SourceUnit::new(app_id, path, content.as_str()))
        .collect();
    analyze_units(units, rules).0
}

fn matches_target(f: &Finding, kind: &TaskKind) -> bool {
    let Some(p) = f.primitive() else {
        return false;
    };
    match kind {
        TaskKind::HashUpgrade { from, .. } => f.api_kind == ApiKind::DigestFactory && p == from,
        TaskKind::PqcKemIntegration { .. } => {
            matches!(f.api_kind, ApiKind::CipherFactory | ApiKind::KeyPairGeneratorFactory)
                && *p == Primitive::Rsa
        }
        TaskKind::PqcSignatureIntegration { .. } => {
            f.api_kind == ApiKind::SignatureFactory
                && matches!(p, Primitive::Rsa | Primitive::Dsa | Primitive::Ec)
        }
    }
}

fn vulnerable_counts(findings: &[Finding]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for f in findings {
        if f.names_algorithm() && f.safety.label == Label::QuantumVulnerable {
            if let Some(spec) = &f.spec {
                *out.entry(canonical_algorithm_key(spec)).or_default() += 1;
            }
        }
    }
    out
}

/// 0-based indices of lines present in `after` but not in `before`.
fn added_lines(before: &str, after: &str) -> BTreeSet<usize> {
    let diff = similar::TextDiff::from_lines(before, after);
    diff.iter_all_changes()
        .filter(|c| c.tag() == similar::ChangeTag::Insert)
        .filter_map(|c| c.new_index())
        .collect()
}

struct Changed<'a> {
    path: &'a str,
    content: &'a str,
    added: BTreeSet<usize>,
}

fn changed_files<'a>(before: &FileSet, after: &'a FileSet) -> Vec<Changed<'a>> {
    after
        .iter()
        .filter_map(|(path, content)| {
            let old = before.get(path).map_or("", String::as_str);
            (old != content).then(|| Changed {
                path,
                content,
                added: added_lines(old, content),
            })
        })
        .collect()
}

const BUILTIN_TYPES: &[&str] = &[
    // java.lang
    "Object", "String", "StringBuilder", "StringBuffer", "CharSequence", "Integer", "Long",
    "Short", "Byte", "Boolean", "Character", "Double", "Float", "Number", "Math", "System",
    "Thread", "Runnable", "Throwable", "Exception", "RuntimeException", "Error",
    "IllegalStateException", "IllegalArgumentException", "UnsupportedOperationException",
    "NullPointerException", "IndexOutOfBoundsException", "ArrayIndexOutOfBoundsException",
    "SecurityException", "InterruptedException", "ClassNotFoundException",
    "NumberFormatException", "Class", "Void", "Enum", "Record", "Iterable", "Comparable",
    "Cloneable", "AutoCloseable", "Override", "Deprecated", "SuppressWarnings",
    "FunctionalInterface", "SafeVarargs", "Runtime", "Process", "ThreadLocal",
    // kotlin
    "Any", "Unit", "Nothing", "Int", "Char", "Array", "ByteArray", "IntArray", "CharArray",
    "List", "MutableList", "Map", "MutableMap", "Set", "MutableSet", "Pair", "Triple",
    "Lazy", "Regex", "Result", "Sequence", "Suppress", "JvmStatic", "JvmField", "Throws",
];

static IMPORT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^[ \t]*import\s+(?:static\s+)?([\w.$]+(?:\.\*)?)(?:\s+as\s+(\w+))?").unwrap()
});
static PACKAGE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*package\s+([\w.]+)").unwrap());
static DECLARATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:class|interface|enum|record|object|typealias)\s+([A-Za-z_$][\w$]*)").unwrap()
});
static IDENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z_$][\w$]*").unwrap());

struct FileScope {
    names: BTreeSet<String>,
    wildcard: bool,
}

fn file_scope(masked: &str) -> FileScope {
    let mut scope = FileScope { names: BTreeSet::new(), wildcard: false };
    for c in IMPORT_LINE.captures_iter(masked) {
        let path = &c[1];
        if path.ends_with(".*") {
            scope.wildcard = true;
        }
        let simple = c.get(2).map_or_else(
            || path.rsplit('.').next().unwrap_or(path).to_string(),
            |a| a.as_str().to_string(),
        );
        scope.names.insert(simple);
    }
    for c in DECLARATION.captures_iter(masked) {
        scope.names.insert(c[1].to_string());
    }
    scope
}

fn check_imports(after: &FileSet, changed: &[Changed]) -> CheckResult {
    // Declarations visible through the package of each file.
    let mut package_decls: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (path, content) in after {
        let Some(lang) = Language::from_path(path).filter(|l| *l != Language::Smali) else {
            continue;
        };
        let masked = strip_noncode(content, lang).text;
        let pkg = PACKAGE_LINE.captures(&masked).map(|c| c[1].to_string()).unwrap_or_default();
        package_decls
            .entry(pkg)
            .or_default()
            .extend(DECLARATION.captures_iter(&masked).map(|c| c[1].to_string()));
    }
    let mut problems = Vec::new();
    for ch in changed {
        let Some(lang) = Language::from_path(ch.path).filter(|l| *l != Language::Smali) else {
            continue;
        };
        let masked = strip_noncode(ch.content, lang).text;
        let scope = file_scope(&masked);
        if scope.wildcard {
            continue;
        }
        let pkg = PACKAGE_LINE.captures(&masked).map(|c| c[1].to_string()).unwrap_or_default();
        let same_package = package_decls.get(&pkg);
        let mut unresolved = BTreeSet::new();
        for (idx, line) in masked.split_inclusive('\n').enumerate() {
            if !ch.added.contains(&idx) {
                continue;
            }
            for m in IDENT.find_iter(line) {
                let name = m.as_str();
                let capitalized = name.starts_with(|c: char| c.is_ascii_uppercase())
                    && name.chars().any(|c| c.is_ascii_lowercase());
                if !capitalized || line[..m.start()].trim_end().ends_with('.') {
                    continue;
                }
                let known = scope.names.contains(name)
                    || same_package.is_some_and(|s| s.contains(name))
                    || BUILTIN_TYPES.contains(&name);
                if !known {
                    unresolved.insert(format!("{}:{} {name}", ch.path, idx + 1));
                }
            }
        }
        problems.extend(unresolved);
    }
    pass_or_fail(CheckId::V4ImportsResolve, problems, "all new type references resolve")
}

static EMPTY_BODY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\s*\}").unwrap());
static METHOD_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\)\s*(?:throws\s+[\w.,\s]+|:\s*[\w.<>?,\s]+)?$").unwrap()
});
const CONTROL_WORDS: &[&str] = &[
    "if", "for", "while", "catch", "switch", "synchronized", "try", "else", "do", "when",
    "finally", "static", "init",
];

fn check_placeholders(changed: &[Changed], markers: &[String]) -> CheckResult {
    let markers: Vec<String> = markers.iter().map(|m| m.to_lowercase()).collect();
    let mut problems = Vec::new();
    for ch in changed {
        for (idx, line) in ch.content.split_inclusive('\n').enumerate() {
            if !ch.added.contains(&idx) {
                continue;
            }
            let lower = line.to_lowercase();
            if let Some(m) = markers.iter().find(|m| lower.contains(m.as_str())) {
                problems.push(format!("{}:{} contains {m:?}", ch.path, idx + 1));
            }
        }
        let Some(lang) = Language::from_path(ch.path).filter(|l| *l != Language::Smali) else {
            continue;
        };
        let masked = strip_noncode(ch.content, lang).text;
        if DECLARATION.captures_iter(&masked).count() > 0 && masked.contains("interface ") {
            continue;
        }
        for m in EMPTY_BODY.find_iter(&masked) {
            let line_idx = masked[..m.start()].matches('\n').count();
            if !ch.added.contains(&line_idx) {
                continue;
            }
            let head_start = masked[..m.start()].rfind([';', '{', '}']).map_or(0, |i| i + 1);
            let header = masked[head_start..m.start()].trim();
            let first = header.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("");
            let is_method = METHOD_HEADER.is_match(header)
                && !CONTROL_WORDS.contains(&first)
                && !header.contains("new ")
                && !header.contains("->");
            if is_method {
                problems.push(format!("{}:{} adds an empty method body", ch.path, line_idx + 1));
            }
        }
    }
    pass_or_fail(CheckId::V5NoPlaceholders, problems, "no placeholder markers in changed lines")
}

fn check_well_formed(changed: &[Changed]) -> CheckResult {
    let mut problems = Vec::new();
    for ch in changed {
        let Some(lang) = check_language(ch.path) else {
            continue;
        };
        let masked = strip_noncode(ch.content, lang);
        for w in &masked.warnings {
            problems.push(format!("{}: {w:?}", ch.path));
        }
        if lang == Language::Smali {
            continue;
        }
        let mut stack = Vec::new();
        for (i, b) in masked.text.bytes().enumerate() {
            match b {
                b'(' | b'[' | b'{' => stack.push((b, i)),
                b')' | b']' | b'}' => {
                    let want = match b {
                        b')' => b'(',
                        b']' => b'[',
                        _ => b'{',
                    };
                    if stack.pop().map(|(o, _)| o) != Some(want) {
                        let line = masked.text[..i].matches('\n').count() + 1;
                        problems.push(format!("{}:{line} unbalanced {:?}", ch.path, b as char));
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some((b, i)) = stack.last() {
            let line = masked.text[..*i].matches('\n').count() + 1;
            problems.push(format!("{}:{line} unclosed {:?}", ch.path, *b as char));
        }
    }
    pass_or_fail(CheckId::V7WellFormed, problems, "changed files are well formed")
}

/// Runs V1–V7. `applied` is the post-patch file set, or the reason the patch
/// did not apply.
pub fn validate_patch(
    task: &MigrationTask,
    before: &FileSet,
    applied: Result<&FileSet, &str>,
    rules: &Ruleset,
) -> ValidationReport {
    let mut checks = Vec::new();
    let after = match applied {
        Ok(after) => {
            checks.push(result(CheckId::V1Applies, Verdict::Pass, "patch applied cleanly"));
            after
        }
        Err(reason) => {
            checks.push(result(CheckId::V1Applies, Verdict::Fail, reason));
            for id in &CheckId::ALL[1..] {
                checks.push(result(*id, Verdict::Skip, "patch did not apply"));
            }
            return finish(task, checks);
        }
    };

    let before_findings = scan(&task.app_id, before, rules);
    let after_findings = scan(&task.app_id, after, rules);
    let count = |fs: &[Finding]| fs.iter().filter(|f| matches_target(f, &task.kind)).count();
    let (b, a) = (count(&before_findings), count(&after_findings));
    let allowed = b.saturating_sub(task.target_findings.len());
    checks.push(if a <= allowed {
        result(
            CheckId::V2TargetEliminated,
            Verdict::Pass,
            format!("{} target finding(s) eliminated", b - a),
        )
    } else {
        result(
            CheckId::V2TargetEliminated,
            Verdict::Fail,
            format!("{} of {} target finding(s) remain", a - allowed, task.target_findings.len()),
        )
    });

    let vb = vulnerable_counts(&before_findings);
    let va = vulnerable_counts(&after_findings);
    let new_vulnerable: Vec<String> = va
        .iter()
        .filter(|(k, n)| **n > vb.get(*k).copied().unwrap_or(0))
        .map(|(k, n)| format!("{k}: {} -> {n}", vb.get(k).copied().unwrap_or(0)))
        .collect();
    checks.push(pass_or_fail(
        CheckId::V3NoNewVulnerable,
        new_vulnerable,
        "no new quantum-vulnerable findings",
    ));

    let changed = changed_files(before, after);
    checks.push(check_imports(after, &changed));
    checks.push(check_placeholders(&changed, &rules.migration.placeholder_markers));

    checks.push(match &task.expected_dependency_marker {
        None => result(CheckId::V6DependencyDeclared, Verdict::Skip, "not a PQC task"),
        Some(marker) => {
            let manifests: Vec<&String> =
                after.keys().filter(|p| rules.migration.is_manifest(p)).collect();
            if manifests.is_empty() {
                result(CheckId::V6DependencyDeclared, Verdict::Fail, "no build manifest in context")
            } else if let Some(m) = manifests.iter().find(|p| after[**p].contains(marker.as_str())) {
                result(CheckId::V6DependencyDeclared, Verdict::Pass, format!("{marker} declared in {m}"))
            } else {
                result(CheckId::V6DependencyDeclared, Verdict::Fail, format!("{marker} not declared"))
            }
        }
    });

    checks.push(check_well_formed(&changed));
    finish(task, checks)
}

fn finish(task: &MigrationTask, checks: Vec<CheckResult>) -> ValidationReport {
    let overall = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    ValidationReport {
        task_id: task.task_id.clone(),
        task_kind: task.kind.label().to_string(),
        checks,
        overall,
    }
}
