//! Scan → resolve → classify over a corpus of app directories.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classify::{classify, detect_pqc_references, flag_misuse, NO_MATCH_RULE_ID};
use crate::dataflow::{build_constant_table, resolve_argument, resolve_key_bits, ConstantTable};
use crate::lexer::line_bounds;
use crate::model::{
    make_evidence, parse_transformation_with, ApiKind, Diagnostic, Finding, MisuseFlag,
    ResolutionStatus, SafetyLabel, NOT_APPLICABLE_RULE_ID, UNRESOLVED_RULE_ID,
};
use crate::ruleset::Ruleset;
use crate::scanner::{load_app, CallSite, PreparedUnit, Scanner, SourceUnit, WalkOptions};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("corpus root {path}: {source}")]
    CorpusRoot {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corpus root {0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Worker threads; 0 means rayon's default.
    pub jobs: usize,
    pub walk: WalkOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            walk: WalkOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusScan {
    pub corpus_root: String,
    pub apps: Vec<String>,
    pub findings: Vec<Finding>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CorpusScan {
    /// Algorithm-naming findings whose argument did not resolve.
    pub fn unresolved_count(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| f.names_algorithm() && f.resolution == ResolutionStatus::Unresolved)
            .count()
    }
}

/// One app per top-level directory, sorted by name; hidden entries skipped.
pub fn discover_apps(root: &Path) -> Result<Vec<(String, PathBuf)>, PipelineError> {
    let meta = std::fs::metadata(root).map_err(|source| PipelineError::CorpusRoot {
        path: root.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(PipelineError::NotADirectory(root.to_path_buf()));
    }
    let entries = std::fs::read_dir(root).map_err(|source| PipelineError::CorpusRoot {
        path: root.to_path_buf(),
        source,
    })?;
    let mut apps: Vec<(String, PathBuf)> = entries
        .filter_map(Result::ok)
        .filter(|e| e.file_type().map(|t| t.is_dir()).unwrap_or(false))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .filter(|(name, _)| !name.starts_with('.'))
        .collect();
    apps.sort();
    Ok(apps)
}

/// Findings for a set of units that belong to one app.
pub fn analyze_units(units: Vec<SourceUnit>, rules: &Ruleset) -> (Vec<Finding>, Vec<Diagnostic>) {
    let scanner = Scanner::new(rules);
    analyze_with(units, rules, &scanner)
}

fn analyze_with(
    units: Vec<SourceUnit>,
    rules: &Ruleset,
    scanner: &Scanner,
) -> (Vec<Finding>, Vec<Diagnostic>) {
    let prepared: Vec<PreparedUnit> = units.into_par_iter().map(PreparedUnit::new).collect();
    let (table, mut diagnostics) = build_constant_table(&prepared);
    let per_unit: Vec<(Vec<Finding>, Vec<Diagnostic>)> = prepared
        .par_iter()
        .map(|unit| analyze_unit(unit, &table, rules, scanner))
        .collect();
    let mut findings = Vec::new();
    for (f, d) in per_unit {
        findings.extend(f);
        diagnostics.extend(d);
    }
    sort_findings(&mut findings);
    diagnostics.sort();
    (findings, diagnostics)
}

pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        (&a.location, a.api_kind, &a.evidence).cmp(&(&b.location, b.api_kind, &b.evidence))
    });
}

fn evidence_at(unit: &PreparedUnit, offset: usize) -> String {
    let (s, e) = line_bounds(&unit.unit.content, offset);
    make_evidence(&unit.masked.without_comments(&unit.unit.content, s, e))
}

fn analyze_unit(
    unit: &PreparedUnit,
    table: &ConstantTable,
    rules: &Ruleset,
    scanner: &Scanner,
) -> (Vec<Finding>, Vec<Diagnostic>) {
    let scan = scanner.scan(unit);
    let mut diagnostics = scan.diagnostics;
    let mut findings: Vec<Finding> = scan
        .sites
        .iter()
        .map(|site| site_finding(site, unit, table, rules, &mut diagnostics))
        .collect();
    for r in detect_pqc_references(unit, rules) {
        let mut misuse_flags = std::collections::BTreeSet::new();
        if !r.used {
            misuse_flags.insert(MisuseFlag::UnusedPqcImport);
        }
        findings.push(Finding {
            location: r.location,
            api_kind: ApiKind::PqcLibraryReference,
            resolution: ResolutionStatus::Unresolved,
            spec: None,
            safety: SafetyLabel::unknown(NOT_APPLICABLE_RULE_ID),
            misuse_flags,
            evidence: evidence_at(unit, r.offset),
            resolution_steps: Vec::new(),
            literal_origin: None,
        });
    }
    (findings, diagnostics)
}

fn site_finding(
    site: &CallSite,
    unit: &PreparedUnit,
    table: &ConstantTable,
    rules: &Ruleset,
    diagnostics: &mut Vec<Diagnostic>,
) -> Finding {
    let mut finding = Finding {
        location: site.location.clone(),
        api_kind: site.api_kind,
        resolution: ResolutionStatus::Unresolved,
        spec: None,
        safety: SafetyLabel::unknown(NOT_APPLICABLE_RULE_ID),
        misuse_flags: Default::default(),
        evidence: evidence_at(unit, site.offset),
        resolution_steps: Vec::new(),
        literal_origin: None,
    };
    if site.api_kind.names_algorithm() {
        finding.safety = SafetyLabel::unknown(UNRESOLVED_RULE_ID);
        let res = resolve_argument(site, unit, table, rules);
        diagnostics.extend(res.diagnostics);
        let parsed = res.value.as_deref().map(|v| parse_transformation_with(v, &rules.aliases));
        match parsed {
            Some(Ok(spec)) => {
                let key_bits = if site.api_kind.takes_key_size() {
                    resolve_key_bits(site, unit, table)
                } else {
                    None
                };
                let spec = spec.with_key_bits(key_bits);
                finding.safety = match classify(&spec, None, rules) {
                    Ok(label) => label,
                    Err(e) => {
                        diagnostics.push(Diagnostic::new(
                            &unit.unit.app_id,
                            &unit.unit.file_path,
                            Some(site.location.line),
                            e.to_string(),
                        ));
                        SafetyLabel::unknown(NO_MATCH_RULE_ID)
                    }
                };
                finding.resolution = res.status;
                finding.resolution_steps = res.steps;
                finding.literal_origin = res.origin;
                finding.spec = Some(spec);
            }
            Some(Err(e)) => diagnostics.push(Diagnostic::new(
                &unit.unit.app_id,
                &unit.unit.file_path,
                Some(site.location.line),
                format!("unparseable transformation: {e}"),
            )),
            None => {}
        }
    }
    finding.misuse_flags = flag_misuse(site, finding.spec.as_ref(), unit, table);
    finding
}

/// Scans every app under `root`. Output order is independent of `jobs`.
pub fn scan_corpus(
    root: &Path,
    rules: &Ruleset,
    options: &ScanOptions,
) -> Result<CorpusScan, PipelineError> {
    let apps = discover_apps(root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
    let scanner = Scanner::new(rules);
    let per_app: Vec<(Vec<Finding>, Vec<Diagnostic>)> = pool.install(|| {
        apps.par_iter()
            .map(|(_, path)| {
                let loaded = load_app(path, &options.walk);
                let (findings, mut diags) = analyze_with(loaded.units, rules, &scanner);
                diags.extend(loaded.diagnostics);
                (findings, diags)
            })
            .collect()
    });
    let mut out = CorpusScan {
        corpus_root: root.to_string_lossy().into_owned(),
        apps: apps.into_iter().map(|(name, _)| name).collect(),
        ..Default::default()
    };
    for (f, d) in per_app {
        out.findings.extend(f);
        out.diagnostics.extend(d);
    }
    sort_findings(&mut out.findings);
    out.diagnostics.sort();
    Ok(out)
}
