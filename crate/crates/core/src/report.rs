//! Corpus aggregation, report rendering and the `findings.jsonl` format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{
    canonical_algorithm_key, Finding, Label, MisuseFlag, ResolutionStatus, SafetyLabel,
    UNRESOLVED_RULE_ID,
};

pub const SCHEMA_VERSION: &str = "1.0";
pub const UNRESOLVED_ROW: &str = "UNRESOLVED";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: schema version {found} is newer than supported {supported}")]
    SchemaVersionMismatch {
        path: PathBuf,
        found: String,
        supported: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm_key: String,
    pub instance_count: usize,
    pub app_count: usize,
    pub safety: SafetyLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AppSummary {
    pub vulnerable_count: usize,
    pub safe_count: usize,
    pub conditional_count: usize,
    pub unknown_count: usize,
    pub misuse_counts: BTreeMap<MisuseFlag, usize>,
    pub pqc_reference_count: usize,
}

/// Table-1-shaped summary. Rows and label counts cover findings that name an
/// algorithm; IV, RNG and PQC-reference findings only feed misuse and PQC counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub generated_at: String,
    pub corpus_root: String,
    pub total_apps: usize,
    pub total_findings: usize,
    pub rows: Vec<ReportRow>,
    pub per_app: BTreeMap<String, AppSummary>,
}

/// Corpus facts that do not come from the findings themselves.
#[derive(Debug, Clone, Default)]
pub struct ReportContext {
    pub corpus_root: String,
    pub apps: Vec<String>,
    pub generated_at: String,
}

fn empty_summary() -> AppSummary {
    AppSummary {
        misuse_counts: MisuseFlag::ALL.iter().map(|f| (*f, 0)).collect(),
        ..Default::default()
    }
}

fn row_key(f: &Finding) -> String {
    match (&f.spec, f.resolution) {
        (Some(spec), r) if r != ResolutionStatus::Unresolved => canonical_algorithm_key(spec),
        _ => UNRESOLVED_ROW.to_string(),
    }
}

pub fn aggregate(findings: &[Finding], ctx: &ReportContext) -> CorpusReport {
    let mut per_app: BTreeMap<String, AppSummary> =
        ctx.apps.iter().map(|a| (a.clone(), empty_summary())).collect();
    struct Acc {
        count: usize,
        apps: BTreeSet<String>,
        safety: SafetyLabel,
    }
    let mut groups: BTreeMap<String, Acc> = BTreeMap::new();
    let mut total = 0;
    for f in findings {
        let app = f.location.app_id.clone();
        let summary = per_app.entry(app.clone()).or_insert_with(empty_summary);
        for flag in &f.misuse_flags {
            *summary.misuse_counts.entry(*flag).or_default() += 1;
        }
        if f.api_kind == crate::model::ApiKind::PqcLibraryReference {
            summary.pqc_reference_count += 1;
        }
        if !f.names_algorithm() {
            continue;
        }
        total += 1;
        match f.safety.label {
            Label::QuantumVulnerable => summary.vulnerable_count += 1,
            Label::QuantumSafe => summary.safe_count += 1,
            Label::ConditionallySafe => summary.conditional_count += 1,
            Label::Unknown => summary.unknown_count += 1,
        }
        let key = row_key(f);
        let safety = if key == UNRESOLVED_ROW {
            SafetyLabel::unknown(UNRESOLVED_RULE_ID)
        } else {
            f.safety.clone()
        };
        let acc = groups.entry(key).or_insert_with(|| Acc {
            count: 0,
            apps: BTreeSet::new(),
            safety: safety.clone(),
        });
        acc.count += 1;
        acc.apps.insert(app);
        // Mixed labels in one row: keep the most cautious, ties by rule id.
        let replace = (safety.label.caution_rank(), &acc.safety.rationale_rule_id)
            > (acc.safety.label.caution_rank(), &safety.rationale_rule_id);
        if replace {
            acc.safety = safety;
        }
    }
    let mut rows: Vec<ReportRow> = groups
        .into_iter()
        .map(|(algorithm_key, acc)| ReportRow {
            algorithm_key,
            instance_count: acc.count,
            app_count: acc.apps.len(),
            safety: acc.safety,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.instance_count
            .cmp(&a.instance_count)
            .then_with(|| a.algorithm_key.cmp(&b.algorithm_key))
    });
    CorpusReport {
        generated_at: ctx.generated_at.clone(),
        corpus_root: ctx.corpus_root.clone(),
        total_apps: per_app.len(),
        total_findings: total,
        rows,
        per_app,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub fn render(report: &CorpusReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s.into_bytes()
        }
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report).into_bytes(),
    }
}

fn render_csv(report: &CorpusReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "instances",
        "apps",
        "label",
        "symbol",
        "condition",
        "rationale_rule_id",
    ])
    .expect("in-memory csv");
    for row in &report.rows {
        w.write_record([
            row.algorithm_key.as_str(),
            &row.instance_count.to_string(),
            &row.app_count.to_string(),
            &format!("{:?}", row.safety.label),
            row.safety.label.symbol(),
            row.safety.condition.as_deref().unwrap_or(""),
            &row.safety.rationale_rule_id,
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn render_markdown(report: &CorpusReport) -> String {
    let mut out = String::new();
    out.push_str("| Algorithm | # of instances | # of Apps | Post-Quantum-Safe |\n");
    out.push_str("|---|---:|---:|:---:|\n");
    let mut conditions = BTreeSet::new();
    for row in &report.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            row.algorithm_key,
            row.instance_count,
            row.app_count,
            row.safety.label.symbol()
        );
        if let Some(c) = &row.safety.condition {
            conditions.insert(c.clone());
        }
    }
    if !conditions.is_empty() {
        out.push('\n');
        for c in conditions {
            let _ = writeln!(out, "\\* {c}");
        }
    }
    out
}

/// First line of `findings.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingsHeader {
    pub schema_version: String,
    pub corpus_root: String,
    pub apps: Vec<String>,
}

impl FindingsHeader {
    pub fn new(corpus_root: &str, apps: &[String]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            corpus_root: corpus_root.to_string(),
            apps: apps.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FindingsFile {
    pub header: FindingsHeader,
    pub findings: Vec<Finding>,
}

impl FindingsFile {
    pub fn context(&self, generated_at: &str) -> ReportContext {
        ReportContext {
            corpus_root: self.header.corpus_root.clone(),
            apps: self.header.apps.clone(),
            generated_at: generated_at.to_string(),
        }
    }
}

pub fn write_findings<W: Write>(
    mut w: W,
    header: &FindingsHeader,
    findings: &[Finding],
) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for f in findings {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn persist_findings(
    path: &Path,
    header: &FindingsHeader,
    findings: &[Finding],
) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_findings(BufWriter::new(file), header, findings).map_err(io)
}

fn major(version: &str) -> Option<u32> {
    version.split('.').next()?.parse().ok()
}

pub fn load_findings(path: &Path) -> Result<FindingsFile, ReportError> {
    let file = std::fs::File::open(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_findings(BufReader::new(file), path)
}

pub fn read_findings<R: BufRead>(reader: R, path: &Path) -> Result<FindingsFile, ReportError> {
    let schema = |line: usize, message: String| ReportError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut header: Option<FindingsHeader> = None;
    let mut findings = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| schema(line_no, e.to_string()))?;
            let Some(version) = value.get("schema_version").and_then(|v| v.as_str()) else {
                return Err(schema(line_no, "missing schema_version header".into()));
            };
            let supported = major(SCHEMA_VERSION);
            match major(version) {
                Some(m) if Some(m) > supported => {
                    return Err(ReportError::SchemaVersionMismatch {
                        path: path.to_path_buf(),
                        found: version.to_string(),
                        supported: SCHEMA_VERSION.to_string(),
                    })
                }
                None => return Err(schema(line_no, format!("bad schema_version {version:?}"))),
                _ => {}
            }
            header = Some(
                serde_json::from_value(value).map_err(|e| schema(line_no, e.to_string()))?,
            );
            continue;
        }
        let f: Finding = serde_json::from_str(&line).map_err(|e| schema(line_no, e.to_string()))?;
        findings.push(f);
    }
    Ok(FindingsFile {
        header: header.unwrap_or_else(|| FindingsHeader::new("", &[])),
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_transformation, ApiKind, SourceLocation};

    fn finding(app: &str, raw: &str, label: Label) -> Finding {
        Finding {
            location: SourceLocation {
                app_id: app.into(),
                file_path: "A.java".into(),
                line: 1,
                column: 1,
            },
            api_kind: ApiKind::DigestFactory,
            resolution: ResolutionStatus::ResolvedLiteral,
            spec: Some(parse_transformation(raw).unwrap()),
            safety: SafetyLabel {
                label,
                condition: None,
                rationale_rule_id: "r".into(),
            },
            misuse_flags: Default::default(),
            evidence: String::new(),
            resolution_steps: Vec::new(),
            literal_origin: None,
        }
    }

    fn ctx() -> ReportContext {
        ReportContext {
            corpus_root: "c".into(),
            apps: vec!["A".into(), "B".into(), "C".into()],
            generated_at: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn three_app_example() {
        let v = Label::QuantumVulnerable;
        let fs = vec![
            finding("A", "MD5", v),
            finding("A", "MD5", v),
            finding("A", "SHA-256", Label::QuantumSafe),
            finding("B", "MD5", v),
            finding("C", "RSA", v),
        ];
        let r = aggregate(&fs, &ctx());
        let got: Vec<_> = r
            .rows
            .iter()
            .map(|r| (r.algorithm_key.as_str(), r.instance_count, r.app_count))
            .collect();
        assert_eq!(got, vec![("MD5", 3, 2), ("RSA", 1, 1), ("SHA-256", 1, 1)]);
        assert_eq!(r.total_findings, 5);
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = aggregate(&[], &ctx());
        assert!(r.rows.is_empty());
        assert_eq!(r.total_apps, 3);
        let md = String::from_utf8(render(&r, ReportFormat::Markdown)).unwrap();
        assert_eq!(md.lines().count(), 2);
        assert!(md.starts_with("| Algorithm | # of instances | # of Apps | Post-Quantum-Safe |"));
    }

    #[test]
    fn all_unresolved_single_row() {
        let mut f = finding("A", "MD5", Label::Unknown);
        f.resolution = ResolutionStatus::Unresolved;
        f.spec = None;
        let r = aggregate(&[f.clone(), f], &ctx());
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].algorithm_key, UNRESOLVED_ROW);
    }

    #[test]
    fn round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("findings.jsonl");
        let fs = vec![finding("A", "MD5", Label::QuantumVulnerable)];
        let header = FindingsHeader::new("c", &["A".to_string()]);
        persist_findings(&path, &header, &fs).unwrap();
        let back = load_findings(&path).unwrap();
        assert_eq!(back.findings, fs);
        assert_eq!(back.header, header);

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 10]).unwrap();
        match load_findings(&path) {
            Err(ReportError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }

        std::fs::write(&path, "{\"schema_version\":\"2.0\",\"corpus_root\":\"\",\"apps\":[]}\n").unwrap();
        assert!(matches!(load_findings(&path), Err(ReportError::SchemaVersionMismatch { .. })));

        std::fs::write(&path, "").unwrap();
        assert!(load_findings(&path).unwrap().findings.is_empty());
    }
}
