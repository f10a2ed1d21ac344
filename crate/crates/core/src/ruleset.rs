//! Data-driven ruleset: call-site triggers, algorithm aliases, quantum-safety
//! classification rules, PQC package markers and migration settings.
//!
//! The built-in ruleset is compiled from `data/default_ruleset.json`; a custom
//! file with the same schema replaces it wholesale.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{AlgorithmSpec, AliasTable, ApiKind, Label, Mode, Primitive};

const BUILTIN_JSON: &str = include_str!("../data/default_ruleset.json");

/// Highest schema major version this build understands.
pub const SUPPORTED_MAJOR_VERSION: u32 = 1;

static BUILTIN: LazyLock<Ruleset> = LazyLock::new(|| {
    Ruleset::from_json_str(BUILTIN_JSON).expect("built-in ruleset must validate")
});

#[derive(Debug, Error)]
pub enum RulesetError {
    #[error("cannot read ruleset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ruleset parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("duplicate trigger pattern_id {0:?}")]
    DuplicatePatternId(String),
    #[error("duplicate classification rule_id {0:?}")]
    DuplicateRuleId(String),
    #[error("trigger {0:?} is a factory kind but has no arg_index_of_algorithm")]
    MissingAlgorithmIndex(String),
    #[error("unknown primitive {name:?} in {context}")]
    UnknownPrimitive { context: String, name: String },
    #[error("unsupported ruleset version {0:?}")]
    UnsupportedVersion(String),
    #[error("rule {rule_id:?}: {reason}")]
    InvalidRule { rule_id: String, reason: String },
    #[error("rules {first:?} and {second:?} share priority {priority} and can match the same spec")]
    AmbiguousRules {
        first: String,
        second: String,
        priority: i32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerForm {
    /// `Receiver.member(` in Java or Kotlin.
    Call,
    /// `new Type(` in Java, `Type(` in Kotlin.
    Constructor,
    /// `invoke-* {..}, Lpkg/Type;->member(` in smali.
    Smali,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub pattern_id: String,
    pub api_kind: ApiKind,
    pub receiver_name: String,
    pub member_name: String,
    #[serde(default)]
    pub arg_index_of_algorithm: Option<usize>,
    /// Minimum number of call arguments for the site to count (seeded RNG constructors).
    #[serde(default)]
    pub min_args: usize,
}

impl Trigger {
    pub fn form(&self) -> TriggerForm {
        if self.receiver_name.starts_with('L') && self.receiver_name.ends_with(';') {
            TriggerForm::Smali
        } else if self.receiver_name == "new" {
            TriggerForm::Constructor
        } else {
            TriggerForm::Call
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrimitiveMatch {
    Any,
    AnyOther,
    Exact(Primitive),
}

impl PrimitiveMatch {
    fn matches(&self, p: &Primitive) -> bool {
        match self {
            PrimitiveMatch::Any => true,
            PrimitiveMatch::AnyOther => matches!(p, Primitive::Other(_)),
            PrimitiveMatch::Exact(q) => q == p,
        }
    }

    fn overlaps(&self, other: &PrimitiveMatch) -> bool {
        use PrimitiveMatch::*;
        match (self, other) {
            (Any, _) | (_, Any) => true,
            (AnyOther, AnyOther) => true,
            (AnyOther, Exact(p)) | (Exact(p), AnyOther) => matches!(p, Primitive::Other(_)),
            (Exact(a), Exact(b)) => a == b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationRule {
    pub rule_id: String,
    pub primitive: PrimitiveMatch,
    pub mode: Option<Mode>,
    pub min_key_bits: Option<u32>,
    pub max_key_bits: Option<u32>,
    pub label: Label,
    pub condition: Option<String>,
    pub priority: i32,
    pub rationale: String,
}

impl ClassificationRule {
    pub fn matches(&self, spec: &AlgorithmSpec, key_bits: Option<u32>) -> bool {
        if !self.primitive.matches(&spec.primitive) {
            return false;
        }
        if let Some(mode) = &self.mode {
            if spec.mode.as_ref() != Some(mode) {
                return false;
            }
        }
        if self.min_key_bits.is_some() || self.max_key_bits.is_some() {
            let Some(bits) = key_bits else {
                return false;
            };
            if self.min_key_bits.is_some_and(|min| bits < min)
                || self.max_key_bits.is_some_and(|max| bits > max)
            {
                return false;
            }
        }
        true
    }

    fn key_range(&self) -> (u32, u32) {
        (
            self.min_key_bits.unwrap_or(0),
            self.max_key_bits.unwrap_or(u32::MAX),
        )
    }

    /// Conservative test for "some spec matches both rules".
    pub fn overlaps(&self, other: &ClassificationRule) -> bool {
        if !self.primitive.overlaps(&other.primitive) {
            return false;
        }
        if let (Some(a), Some(b)) = (&self.mode, &other.mode) {
            if a != b {
                return false;
            }
        }
        let (a_lo, a_hi) = self.key_range();
        let (b_lo, b_hi) = other.key_range();
        a_lo <= b_hi && b_lo <= a_hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default)]
pub struct MigrationConfig {
    pub hash_target: String,
    pub kem_dependency_marker: String,
    pub signature_dependency_marker: String,
    pub manifest_globs: Vec<String>,
    pub placeholder_markers: Vec<String>,
    pub agentic_tool_budget: usize,
}

impl Default for MigrationConfig {
    fn default() -> Self {
        Self {
            hash_target: "SHA256".into(),
            kem_dependency_marker: "org.bouncycastle:bcprov-jdk18on".into(),
            signature_dependency_marker: "org.bouncycastle:bcprov-jdk18on".into(),
            manifest_globs: vec!["build.gradle*".into()],
            placeholder_markers: vec![
                "TODO".into(),
                "FIXME".into(),
                "placeholder".into(),
                "not implemented".into(),
            ],
            agentic_tool_budget: 32,
        }
    }
}

impl MigrationConfig {
    pub fn hash_target_primitive(&self) -> Primitive {
        Primitive::from_name(&self.hash_target).unwrap_or(Primitive::Sha256)
    }

    pub fn is_manifest(&self, file_path: &str) -> bool {
        let name = file_path.rsplit('/').next().unwrap_or(file_path);
        self.manifest_globs.iter().any(|g| {
            glob::Pattern::new(g)
                .map(|p| p.matches(name) || p.matches(file_path))
                .unwrap_or(false)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ruleset {
    pub version: String,
    pub triggers: Vec<Trigger>,
    pub aliases: AliasTable,
    pub classification_rules: Vec<ClassificationRule>,
    pub pqc_markers: Vec<String>,
    pub migration: MigrationConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRuleset {
    version: String,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
    triggers: Vec<Trigger>,
    #[serde(default)]
    classification_rules: Vec<RawRule>,
    #[serde(default)]
    pqc_markers: Vec<String>,
    #[serde(default)]
    migration: MigrationConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    rule_id: String,
    primitive: String,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    min_key_bits: Option<u32>,
    #[serde(default)]
    max_key_bits: Option<u32>,
    label: Label,
    #[serde(default)]
    condition: Option<String>,
    priority: i32,
    #[serde(default)]
    rationale: String,
}

fn parse_primitive_name(name: &str, context: &str) -> Result<Primitive, RulesetError> {
    if name.starts_with("OTHER(") {
        return Ok(name.parse().unwrap_or_else(|e: std::convert::Infallible| match e {}));
    }
    Primitive::from_name(name).ok_or_else(|| RulesetError::UnknownPrimitive {
        context: context.to_string(),
        name: name.to_string(),
    })
}

impl RawRule {
    fn into_rule(self) -> Result<ClassificationRule, RulesetError> {
        let primitive = match self.primitive.as_str() {
            "*" => PrimitiveMatch::Any,
            "OTHER" => PrimitiveMatch::AnyOther,
            name => PrimitiveMatch::Exact(parse_primitive_name(
                name,
                &format!("rule {:?}", self.rule_id),
            )?),
        };
        let invalid = |reason: &str| RulesetError::InvalidRule {
            rule_id: self.rule_id.clone(),
            reason: reason.to_string(),
        };
        if (self.label == Label::ConditionallySafe) != self.condition.is_some() {
            return Err(invalid("condition must be present iff label is ConditionallySafe"));
        }
        if let (Some(lo), Some(hi)) = (self.min_key_bits, self.max_key_bits) {
            if lo > hi {
                return Err(invalid("min_key_bits exceeds max_key_bits"));
            }
        }
        let mode = self
            .mode
            .as_deref()
            .map(|m| m.parse::<Mode>().unwrap_or_else(|e| match e {}));
        Ok(ClassificationRule {
            rule_id: self.rule_id,
            primitive,
            mode,
            min_key_bits: self.min_key_bits,
            max_key_bits: self.max_key_bits,
            label: self.label,
            condition: self.condition,
            priority: self.priority,
            rationale: self.rationale,
        })
    }
}

impl Ruleset {
    /// The ruleset shipped with the crate.
    pub fn builtin() -> &'static Ruleset {
        &BUILTIN
    }

    pub fn from_json_str(text: &str) -> Result<Ruleset, RulesetError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let raw: RawRuleset = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            RulesetError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        Self::validate(raw)
    }

    fn validate(raw: RawRuleset) -> Result<Ruleset, RulesetError> {
        let major = raw
            .version
            .split('.')
            .next()
            .and_then(|m| m.parse::<u32>().ok())
            .ok_or_else(|| RulesetError::UnsupportedVersion(raw.version.clone()))?;
        if major > SUPPORTED_MAJOR_VERSION {
            return Err(RulesetError::UnsupportedVersion(raw.version));
        }

        let mut seen = BTreeSet::new();
        for t in &raw.triggers {
            if !seen.insert(t.pattern_id.as_str()) {
                return Err(RulesetError::DuplicatePatternId(t.pattern_id.clone()));
            }
            if t.api_kind.is_factory() && t.arg_index_of_algorithm.is_none() {
                return Err(RulesetError::MissingAlgorithmIndex(t.pattern_id.clone()));
            }
        }

        let mut aliases = AliasTable::new();
        for (alias, target) in &raw.aliases {
            let p = parse_primitive_name(target, &format!("alias {alias:?}"))?;
            aliases.insert(alias, p);
        }

        let mut rules = Vec::with_capacity(raw.classification_rules.len());
        let mut ids = BTreeSet::new();
        for r in raw.classification_rules {
            if !ids.insert(r.rule_id.clone()) {
                return Err(RulesetError::DuplicateRuleId(r.rule_id));
            }
            rules.push(r.into_rule()?);
        }
        for (i, a) in rules.iter().enumerate() {
            for b in &rules[i + 1..] {
                if a.priority == b.priority && a.overlaps(b) {
                    let (first, second) = if a.rule_id <= b.rule_id { (a, b) } else { (b, a) };
                    return Err(RulesetError::AmbiguousRules {
                        first: first.rule_id.clone(),
                        second: second.rule_id.clone(),
                        priority: a.priority,
                    });
                }
            }
        }

        Ok(Ruleset {
            version: raw.version,
            triggers: raw.triggers,
            aliases,
            classification_rules: rules,
            pqc_markers: raw.pqc_markers,
            migration: raw.migration,
        })
    }

    pub fn rule(&self, rule_id: &str) -> Option<&ClassificationRule> {
        self.classification_rules.iter().find(|r| r.rule_id == rule_id)
    }

    pub fn trigger(&self, pattern_id: &str) -> Option<&Trigger> {
        self.triggers.iter().find(|t| t.pattern_id == pattern_id)
    }
}

/// Reads a ruleset file, or returns the built-in one when `path` is `None`.
pub fn load_ruleset(path: Option<&Path>) -> Result<Ruleset, RulesetError> {
    match path {
        None => Ok(Ruleset::builtin().clone()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| RulesetError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ruleset::from_json_str(&text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ApiKind;

    #[test]
    fn builtin_has_cipher_trigger_on_first_argument() {
        let rules = Ruleset::builtin();
        let t = rules
            .triggers
            .iter()
            .find(|t| t.receiver_name == "Cipher" && t.member_name == "getInstance")
            .unwrap();
        assert_eq!(t.arg_index_of_algorithm, Some(0));
        assert_eq!(t.api_kind, ApiKind::CipherFactory);
    }

    #[test]
    fn builtin_covers_every_call_kind_in_both_forms() {
        let rules = Ruleset::builtin();
        for kind in ApiKind::ALL {
            if kind == ApiKind::PqcLibraryReference {
                assert!(!rules.pqc_markers.is_empty());
                continue;
            }
            assert!(
                rules.triggers.iter().any(|t| t.api_kind == kind && t.form() == TriggerForm::Smali),
                "{kind:?} lacks a smali trigger"
            );
            assert!(
                rules.triggers.iter().any(|t| t.api_kind == kind && t.form() != TriggerForm::Smali),
                "{kind:?} lacks a source trigger"
            );
        }
    }

    #[test]
    fn missing_api_kind_is_a_parse_error() {
        let text = r#"{"version":"1.0","triggers":[{"pattern_id":"x","receiver_name":"Cipher","member_name":"getInstance"}]}"#;
        match Ruleset::from_json_str(text) {
            Err(RulesetError::Parse { field, message, .. }) => {
                assert!(message.contains("api_kind"), "{message}");
                assert!(field.starts_with("triggers"), "{field}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_pattern_id_is_rejected() {
        let text = r#"{"version":"1.0","triggers":[
            {"pattern_id":"md-1","api_kind":"DigestFactory","receiver_name":"MessageDigest","member_name":"getInstance","arg_index_of_algorithm":0},
            {"pattern_id":"md-1","api_kind":"DigestFactory","receiver_name":"MD","member_name":"getInstance","arg_index_of_algorithm":0}
        ]}"#;
        assert!(matches!(
            Ruleset::from_json_str(text),
            Err(RulesetError::DuplicatePatternId(id)) if id == "md-1"
        ));
    }

    #[test]
    fn factory_without_index_is_rejected() {
        let text = r#"{"version":"1.0","triggers":[
            {"pattern_id":"c","api_kind":"CipherFactory","receiver_name":"Cipher","member_name":"getInstance"}]}"#;
        assert!(matches!(
            Ruleset::from_json_str(text),
            Err(RulesetError::MissingAlgorithmIndex(_))
        ));
    }

    #[test]
    fn same_priority_overlap_is_rejected() {
        let text = r#"{"version":"1.0","triggers":[],"classification_rules":[
            {"rule_id":"a","primitive":"AES","label":"QuantumSafe","priority":5},
            {"rule_id":"b","primitive":"AES","min_key_bits":128,"label":"QuantumVulnerable","priority":5}
        ]}"#;
        assert!(matches!(
            Ruleset::from_json_str(text),
            Err(RulesetError::AmbiguousRules { .. })
        ));
    }

    #[test]
    fn disjoint_same_priority_rules_are_fine() {
        let text = r#"{"version":"1.0","triggers":[],"classification_rules":[
            {"rule_id":"a","primitive":"AES","max_key_bits":127,"label":"QuantumVulnerable","priority":5},
            {"rule_id":"b","primitive":"AES","min_key_bits":128,"label":"QuantumSafe","priority":5},
            {"rule_id":"c","primitive":"AES","mode":"ECB","max_key_bits":127,"label":"QuantumVulnerable","priority":6}
        ]}"#;
        assert!(Ruleset::from_json_str(text).is_ok());
    }

    #[test]
    fn newer_major_version_is_rejected() {
        let text = r#"{"version":"2.0","triggers":[]}"#;
        assert!(matches!(
            Ruleset::from_json_str(text),
            Err(RulesetError::UnsupportedVersion(_))
        ));
    }

    #[test]
    fn manifest_globs_match_gradle_files() {
        let cfg = MigrationConfig::default();
        assert!(cfg.is_manifest("build.gradle"));
        assert!(cfg.is_manifest("app/build.gradle.kts"));
        assert!(!cfg.is_manifest("src/Build.java"));
    }
}
