use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qready_bench::{dataflow_heavy_source, fixture_corpus};
use qready_core::pipeline::{analyze_units, scan_corpus, ScanOptions};
use qready_core::report::{aggregate, ReportContext};
use qready_core::ruleset::Ruleset;
use qready_core::scanner::SourceUnit;

fn scan(c: &mut Criterion) {
    let rules = Ruleset::builtin();
    let root = fixture_corpus();
    let options = ScanOptions { jobs: 1, ..Default::default() };
    c.bench_function("scan_fixture_corpus", |b| {
        b.iter(|| scan_corpus(black_box(&root), rules, &options).unwrap())
    });
}

fn resolve(c: &mut Criterion) {
    let rules = Ruleset::builtin();
    let source = dataflow_heavy_source(200);
    c.bench_function("resolve_400_sites", |b| {
        b.iter(|| {
            let unit = SourceUnit::new("bench", "bench/Heavy.java", source.clone()).unwrap();
            analyze_units(vec![unit], rules)
        })
    });
}

fn aggregate_findings(c: &mut Criterion) {
    let rules = Ruleset::builtin();
    let options = ScanOptions { jobs: 1, ..Default::default() };
    let scan = scan_corpus(&fixture_corpus(), rules, &options).unwrap();
    // 1000 apps' worth of findings.
    let mut findings = Vec::new();
    let mut apps = Vec::new();
    for i in 0..1000 {
        for f in &scan.findings {
            let mut f = f.clone();
            f.location.app_id = format!("{}-{i}", f.location.app_id);
            findings.push(f);
        }
        apps.extend(scan.apps.iter().map(|a| format!("{a}-{i}")));
    }
    let ctx = ReportContext {
        corpus_root: "bench".into(),
        apps,
        generated_at: "2026-01-01T00:00:00Z".into(),
    };
    c.bench_function("aggregate_70k_findings", |b| b.iter(|| aggregate(black_box(&findings), &ctx)));
}

criterion_group!(benches, scan, resolve, aggregate_findings);
criterion_main!(benches);
