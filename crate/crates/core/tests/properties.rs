use std::path::Path;

use proptest::prelude::*;
use qready_core::classify::classify;
use qready_core::lexer::{strip_noncode, Language};
use qready_core::model::{canonical_algorithm_key, parse_transformation, AlgorithmSpec, Primitive};
use qready_core::patch::{apply_patch, diff_files, parse_patch, render_patch, FileSet};
use qready_core::pipeline::{analyze_units, scan_corpus, ScanOptions};
use qready_core::report::{load_findings, persist_findings, FindingsHeader};
use qready_core::ruleset::Ruleset;
use qready_core::scanner::SourceUnit;

fn rules() -> &'static Ruleset {
    Ruleset::builtin()
}

fn corpus() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

/// Names the default ruleset knows, in their canonical spelling.
const NAMES: &[&str] = &[
    "MD5", "SHA-1", "SHA1", "SHA-256", "SHA-512", "AES", "DES", "DESede", "RSA", "DSA", "EC",
    "ECDSA", "DH", "HmacSHA1", "HmacSHA256", "Kyber", "Kyber768", "Dilithium", "ML-DSA",
    "SHA256withRSA", "SHA1withDSA", "SHA256withECDSA", "PBKDF2WithHmacSHA256", "Blowfish",
];
const MODES: &[&str] = &["ECB", "CBC", "GCM", "CTR", "CFB", "OFB", "NONE"];
const PADDINGS: &[&str] = &["PKCS5Padding", "NoPadding", "OAEPWithSHA-256AndMGF1Padding", "PKCS1Padding"];

fn transformation() -> impl Strategy<Value = String> {
    (
        prop::sample::select(NAMES),
        prop::option::of((prop::sample::select(MODES), prop::sample::select(PADDINGS))),
    )
        .prop_map(|(name, rest)| match rest {
            Some((m, p)) => format!("{name}/{m}/{p}"),
            None => name.to_string(),
        })
}

fn flip_case(s: &str, mask: u64) -> String {
    s.chars()
        .enumerate()
        .map(|(i, c)| if mask >> (i % 64) & 1 == 1 { c.to_ascii_lowercase() } else { c.to_ascii_uppercase() })
        .collect()
}

fn without_raw(mut s: AlgorithmSpec) -> AlgorithmSpec {
    s.raw.clear();
    s
}

fn lines() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "", "  d;", "}"]), 0..12)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn join(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// A Java class built from crypto and filler statements.
fn java_source() -> impl Strategy<Value = String> {
    let stmt = prop_oneof![
        transformation().prop_map(|t| format!("Cipher c = Cipher.getInstance(\"{t}\");")),
        prop::sample::select(NAMES).prop_map(|n| format!("MessageDigest.getInstance(\"{n}\");")),
        prop::sample::select(NAMES).prop_map(|n| format!("String a = \"{n}\"; Mac.getInstance(a);")),
        Just("new Random(42);".to_string()),
        Just("new IvParameterSpec(new byte[16]);".to_string()),
        Just("// Cipher.getInstance(\"DES\")".to_string()),
        Just("int x = 1;".to_string()),
    ];
    prop::collection::vec(stmt, 0..8).prop_map(|stmts| {
        let body: String = stmts.iter().map(|s| format!("        {s}\n")).collect();
        format!("package p;\n\nclass C {{\n    void f() throws Exception {{\n{body}    }}\n}}\n")
    })
}

proptest! {
    #[test]
    fn transformation_raw_round_trips(s in transformation()) {
        let spec = parse_transformation(&s).unwrap();
        prop_assert_eq!(&spec.raw, &s);
        prop_assert_eq!(parse_transformation(&spec.raw).unwrap(), spec);
    }

    #[test]
    fn alias_spelling_only_changes_raw(name in prop::sample::select(NAMES), mask in any::<u64>()) {
        let a = parse_transformation(name).unwrap();
        // Unknown names keep their spelling; only known names and aliases fold.
        prop_assume!(!matches!(a.primitive, Primitive::Other(_)));
        let b = parse_transformation(&flip_case(name, mask)).unwrap();
        prop_assert_eq!(without_raw(a), without_raw(b));
    }

    #[test]
    fn canonical_key_ignores_padding(
        name in prop::sample::select(NAMES),
        mode in prop::sample::select(MODES),
        p1 in prop::sample::select(PADDINGS),
        p2 in prop::sample::select(PADDINGS),
    ) {
        let a = parse_transformation(&format!("{name}/{mode}/{p1}")).unwrap();
        let b = parse_transformation(&format!("{name}/{mode}/{p2}")).unwrap();
        prop_assert_eq!(canonical_algorithm_key(&a), canonical_algorithm_key(&b));
    }

    #[test]
    fn rule_order_does_not_change_labels(
        order in Just(rules().classification_rules.clone()).prop_shuffle(),
        s in transformation(),
        bits in prop::option::of(prop::sample::select(vec![64u32, 128, 192, 256, 1024, 2048])),
    ) {
        let permuted = Ruleset { classification_rules: order, ..rules().clone() };
        let spec = parse_transformation(&s).unwrap();
        prop_assert_eq!(classify(&spec, bits, rules()).unwrap(), classify(&spec, bits, &permuted).unwrap());
    }

    #[test]
    fn masking_preserves_length(s in "[ -~\n]{0,200}", kotlin in any::<bool>()) {
        let lang = if kotlin { Language::Kotlin } else { Language::Java };
        prop_assert_eq!(strip_noncode(&s, lang).text.len(), s.len());
    }

    #[test]
    fn diff_render_parse_apply_round_trips(a in lines(), b in lines()) {
        let mut before = FileSet::new();
        before.insert("src/A.java".into(), join(&a));
        let mut after = FileSet::new();
        after.insert("src/A.java".into(), join(&b));
        let patch = diff_files(&before, &after);
        prop_assert_eq!(patch.is_empty(), a == b);
        prop_assume!(!patch.is_empty());
        let parsed = parse_patch(&render_patch(&patch)).unwrap();
        prop_assert_eq!(&parsed, &patch);
        prop_assert_eq!(apply_patch(&before, &parsed).unwrap(), after);
    }

    #[test]
    fn scanning_ignores_unit_order(sources in prop::collection::vec(java_source(), 1..4)) {
        let units: Vec<SourceUnit> = sources
            .iter()
            .enumerate()
            .map(|(i, s)| SourceUnit::new("app", &format!("p/C{i}.java"), s.clone()).unwrap())
            .collect();
        let mut reversed = units.clone();
        reversed.reverse();
        let (a, da) = analyze_units(units, rules());
        let (b, db) = analyze_units(reversed, rules());
        prop_assert_eq!(a, b);
        prop_assert_eq!(da, db);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn persisted_findings_load_back(keep in prop::collection::vec(any::<bool>(), 70)) {
        let scan = scan_corpus(&corpus(), rules(), &ScanOptions::default()).unwrap();
        let subset: Vec<_> = scan
            .findings
            .iter()
            .zip(keep.iter().cycle())
            .filter(|(_, k)| **k)
            .map(|(f, _)| f.clone())
            .collect();
        let header = FindingsHeader::new(&scan.corpus_root, &scan.apps);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("findings.jsonl");
        persist_findings(&path, &header, &subset).unwrap();
        let loaded = load_findings(&path).unwrap();
        prop_assert_eq!(loaded.findings, subset);
        prop_assert_eq!(loaded.header, header);
    }
}

#[test]
fn corpus_scan_is_independent_of_thread_count() {
    let one = scan_corpus(&corpus(), rules(), &ScanOptions { jobs: 1, ..Default::default() }).unwrap();
    let many = scan_corpus(&corpus(), rules(), &ScanOptions { jobs: 8, ..Default::default() }).unwrap();
    assert_eq!(one.findings, many.findings);
    assert_eq!(one.diagnostics, many.diagnostics);
}
