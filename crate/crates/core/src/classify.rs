//! Quantum-safety labels, classical misuse flags and PQC library references.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::dataflow::{argument_is_constant, argument_is_constant_array, ConstantTable};
use crate::lexer::{is_ident_byte, Language};
use crate::model::{AlgorithmSpec, ApiKind, MisuseFlag, Mode, Primitive, SafetyLabel, SourceLocation};
use crate::ruleset::Ruleset;
use crate::scanner::{CallSite, PreparedUnit};

/// Rationale id used when a custom ruleset has no rule matching a spec.
pub const NO_MATCH_RULE_ID: &str = "builtin:no-match";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("rules {rule_ids:?} match {algorithm} at the same priority {priority}")]
    AmbiguousRuleMatch {
        algorithm: String,
        priority: i32,
        rule_ids: Vec<String>,
    },
    #[error("no classification rule matches {0}")]
    NoMatchingRule(String),
}

/// Label from the highest-priority matching rule. `key_bits`, when given,
/// takes precedence over `spec.key_bits`.
pub fn classify(
    spec: &AlgorithmSpec,
    key_bits: Option<u32>,
    rules: &Ruleset,
) -> Result<SafetyLabel, ClassifyError> {
    let bits = key_bits.or(spec.key_bits);
    let matching: Vec<_> = rules
        .classification_rules
        .iter()
        .filter(|r| r.matches(spec, bits))
        .collect();
    let Some(top) = matching.iter().map(|r| r.priority).max() else {
        return Err(ClassifyError::NoMatchingRule(spec.primitive.name()));
    };
    let mut winners: Vec<_> = matching.into_iter().filter(|r| r.priority == top).collect();
    if winners.len() > 1 {
        let mut rule_ids: Vec<String> = winners.iter().map(|r| r.rule_id.clone()).collect();
        rule_ids.sort();
        return Err(ClassifyError::AmbiguousRuleMatch {
            algorithm: spec.primitive.name(),
            priority: top,
            rule_ids,
        });
    }
    let rule = winners.pop().expect("one winner");
    Ok(SafetyLabel {
        label: rule.label,
        condition: rule.condition.clone(),
        rationale_rule_id: rule.rule_id.clone(),
    })
}

fn short_asymmetric(primitive: &Primitive, bits: u32) -> bool {
    match primitive {
        Primitive::Rsa | Primitive::Dsa | Primitive::Dh => bits < 2048,
        Primitive::Ec => bits < 224,
        _ => false,
    }
}

/// Classical misuse flags for one call site. `spec` carries any resolved key size.
pub fn flag_misuse(
    site: &CallSite,
    spec: Option<&AlgorithmSpec>,
    unit: &PreparedUnit,
    table: &ConstantTable,
) -> BTreeSet<MisuseFlag> {
    let mut flags = BTreeSet::new();
    if let Some(spec) = spec {
        if spec.mode == Some(Mode::Ecb) {
            flags.insert(MisuseFlag::EcbMode);
        }
        if let Some(bits) = spec.key_bits {
            if short_asymmetric(&spec.primitive, bits) {
                flags.insert(MisuseFlag::ShortAsymmetricKey);
            }
        }
    }
    match site.api_kind {
        ApiKind::IvConstruction if argument_is_constant_array(site, unit, table, 0) => {
            flags.insert(MisuseFlag::StaticIv);
        }
        ApiKind::RandomConstruction if argument_is_constant(site, unit, table, 0) => {
            flags.insert(MisuseFlag::SeededInsecureRandom);
        }
        _ => {}
    }
    flags
}

/// An import or fully-qualified use of a PQC library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PqcReference {
    pub location: SourceLocation,
    pub marker: String,
    /// The imported or referenced qualified name.
    pub name: String,
    pub used: bool,
    /// Byte offset of `name` in the unit.
    pub offset: usize,
}

static IMPORT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^[ \t]*import\s+(?:static\s+)?([A-Za-z_$][\w$]*(?:\s*\.\s*(?:[A-Za-z_$][\w$]*|\*))*)(?:\s+as\s+([A-Za-z_$][\w$]*))?")
        .unwrap()
});
static PACKAGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*package\s+[\w.]+").unwrap());
static QUALIFIED_USE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b[a-z_][\w$]*(?:\.[a-z_][\w$]*)+\.[A-Z][\w$]*").unwrap()
});
static SMALI_TYPE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"L([A-Za-z_$][\w$/-]*);").unwrap());

fn find_marker<'a>(name: &str, markers: &'a [String]) -> Option<&'a String> {
    let lower = name.to_ascii_lowercase();
    markers
        .iter()
        .find(|m| lower.contains(&m.to_ascii_lowercase()))
}

fn contains_word(text: &str, word: &str) -> bool {
    let b = text.as_bytes();
    text.match_indices(word).any(|(i, _)| {
        let e = i + word.len();
        (i == 0 || !is_ident_byte(b[i - 1])) && (e >= b.len() || !is_ident_byte(b[e]))
    })
}

/// PQC imports and qualified uses in `unit`. An import is `used` when its
/// simple name (or alias) appears in code outside import lines; wildcard
/// imports are treated as used.
pub fn detect_pqc_references(unit: &PreparedUnit, rules: &Ruleset) -> Vec<PqcReference> {
    let markers = &rules.pqc_markers;
    if markers.is_empty() {
        return Vec::new();
    }
    let masked = unit.masked.text.as_str();
    let mut out = Vec::new();
    if unit.unit.language == Language::Smali {
        let mut pos = 0;
        for line in masked.split_inclusive('\n') {
            for caps in SMALI_TYPE.captures_iter(line) {
                let m = caps.get(1).unwrap();
                let dotted = m.as_str().replace('/', ".");
                if let Some(marker) = find_marker(&dotted, markers) {
                    let offset = pos + m.start() - 1;
                    out.push(PqcReference {
                        location: unit.location(offset),
                        marker: marker.clone(),
                        name: dotted,
                        used: true,
                        offset,
                    });
                    break;
                }
            }
            pos += line.len();
        }
        return out;
    }

    // Blank import and package lines to search for uses elsewhere.
    let mut body = masked.as_bytes().to_vec();
    let mut imports = Vec::new();
    for caps in IMPORT.captures_iter(masked) {
        let whole = caps.get(0).unwrap();
        body[whole.range()].iter_mut().for_each(|c| *c = b' ');
        imports.push(caps);
    }
    for m in PACKAGE.find_iter(masked) {
        body[m.range()].iter_mut().for_each(|c| *c = b' ');
    }
    let body = String::from_utf8(body).expect("ascii blanking keeps utf-8");

    for caps in imports {
        let path_m = caps.get(1).unwrap();
        let path: String = path_m.as_str().split_whitespace().collect();
        let Some(marker) = find_marker(&path, markers) else {
            continue;
        };
        let simple = match caps.get(2) {
            Some(alias) => alias.as_str().to_string(),
            None => path.rsplit('.').next().unwrap_or(&path).to_string(),
        };
        let used = simple == "*" || contains_word(&body, &simple);
        out.push(PqcReference {
            location: unit.location(path_m.start()),
            marker: marker.clone(),
            name: path,
            used,
            offset: path_m.start(),
        });
    }
    let mut seen_lines = BTreeSet::new();
    for m in QUALIFIED_USE.find_iter(&body) {
        let Some(marker) = find_marker(m.as_str(), markers) else {
            continue;
        };
        if m.start() > 0 && body.as_bytes()[m.start() - 1] == b'.' {
            continue;
        }
        let location = unit.location(m.start());
        if !seen_lines.insert(location.line) {
            continue;
        }
        out.push(PqcReference {
            location,
            marker: marker.clone(),
            name: m.as_str().to_string(),
            used: true,
            offset: m.start(),
        });
    }
    out.sort_by_key(|r| r.offset);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_transformation, Label};
    use crate::scanner::SourceUnit;

    fn label(raw: &str, bits: Option<u32>) -> SafetyLabel {
        classify(&parse_transformation(raw).unwrap(), bits, Ruleset::builtin()).unwrap()
    }

    #[test]
    fn table_rows() {
        assert_eq!(label("RSA", None).label, Label::QuantumVulnerable);
        assert_eq!(label("SHA-256", None).label, Label::QuantumSafe);
        assert_eq!(label("SHA-1", None).label, Label::QuantumVulnerable);
        assert_eq!(label("MD5", None).label, Label::QuantumVulnerable);
        assert_eq!(label("AES/CBC/PKCS5Padding", Some(256)).label, Label::QuantumSafe);
        let cond = label("AES/CBC/PKCS5Padding", None);
        assert_eq!(cond.label, Label::ConditionallySafe);
        assert_eq!(cond.condition.as_deref(), Some("requires 256-bit key"));
        assert_eq!(label("AES", Some(128)).label, Label::ConditionallySafe);
        assert_eq!(label("Frobnicate/XYZ", None).label, Label::Unknown);
        assert_eq!(label("DESede/CBC/NoPadding", None).label, Label::QuantumVulnerable);
        assert_eq!(label("Kyber", None).label, Label::QuantumSafe);
    }

    #[test]
    fn key_bits_argument_overrides_spec() {
        let spec = parse_transformation("AES").unwrap().with_key_bits(Some(128));
        let l = classify(&spec, Some(256), Ruleset::builtin()).unwrap();
        assert_eq!(l.label, Label::QuantumSafe);
    }

    #[test]
    fn same_priority_tie_is_an_error() {
        let mut rules = Ruleset::builtin().clone();
        let mut dup = rules.rule("rsa-shor").unwrap().clone();
        dup.rule_id = "rsa-again".into();
        rules.classification_rules.push(dup);
        let err = classify(&parse_transformation("RSA").unwrap(), None, &rules).unwrap_err();
        assert!(matches!(err, ClassifyError::AmbiguousRuleMatch { .. }));
    }

    fn prep(path: &str, src: &str) -> PreparedUnit {
        PreparedUnit::new(SourceUnit::new("app", path, src).unwrap())
    }

    #[test]
    fn unused_and_used_imports() {
        let src = "package a;\nimport org.bouncycastle.pqc.jcajce.provider.BouncyCastlePQCProvider;\nimport org.bouncycastle.pqc.jcajce.spec.KyberParameterSpec;\nclass A {\n  // KyberParameterSpec in a comment\n  Object p = new BouncyCastlePQCProvider();\n}\n";
        let refs = detect_pqc_references(&prep("A.java", src), Ruleset::builtin());
        assert_eq!(refs.len(), 2);
        assert!(refs[0].used);
        assert!(!refs[1].used);
        assert_eq!(refs[1].location.line, 3);
    }

    #[test]
    fn qualified_use_and_kotlin_alias() {
        let java = "class A { Object k = new org.bouncycastle.pqc.crypto.crystals.kyber.KyberKeyPairGenerator(); }";
        let refs = detect_pqc_references(&prep("A.java", java), Ruleset::builtin());
        assert_eq!(refs.len(), 1);
        assert!(refs[0].used);
        let kt = "import org.openquantumsafe.KeyEncapsulation as Kem\nfun f() = 1\n";
        let refs = detect_pqc_references(&prep("K.kt", kt), Ruleset::builtin());
        assert_eq!(refs.len(), 1);
        assert!(!refs[0].used);
    }

    #[test]
    fn no_markers_no_references() {
        let refs = detect_pqc_references(&prep("A.java", "import java.util.List;\nclass A {}"), Ruleset::builtin());
        assert!(refs.is_empty());
    }

    #[test]
    fn rsa_2048_is_not_short() {
        assert!(!short_asymmetric(&Primitive::Rsa, 2048));
        assert!(short_asymmetric(&Primitive::Rsa, 1024));
        assert!(short_asymmetric(&Primitive::Ec, 192));
        assert!(!short_asymmetric(&Primitive::Ec, 256));
    }
}
