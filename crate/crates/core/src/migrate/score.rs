use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::validate::{CheckId, ValidationReport, Verdict};

pub const PASS_CRITERION: &str = "a task passes when every non-skipped validation check passes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub attempted: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub failure_histogram: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub pass_criterion: String,
    pub total_tasks: usize,
    pub per_kind: BTreeMap<String, KindSummary>,
    pub failure_histogram: BTreeMap<String, usize>,
}

impl EvalSummary {
    /// Check with the most failures for `kind`; `None` when nothing failed
    /// or when two checks tie.
    pub fn dominant_failure(&self, kind: &str) -> Option<&str> {
        let hist = &self.per_kind.get(kind)?.failure_histogram;
        let max = *hist.values().max()?;
        if max == 0 {
            return None;
        }
        let mut top = hist.iter().filter(|(_, n)| **n == max);
        let (id, _) = top.next()?;
        top.next().is_none().then_some(id.as_str())
    }
}

fn empty_histogram() -> BTreeMap<String, usize> {
    CheckId::ALL.iter().map(|c| (c.as_str().to_string(), 0)).collect()
}

/// Pass rates per task kind and per-check failure counts. Order-independent.
pub fn score_run(reports: &[ValidationReport]) -> EvalSummary {
    let mut per_kind: BTreeMap<String, KindSummary> = BTreeMap::new();
    let mut total_hist = empty_histogram();
    for r in reports {
        let k = per_kind.entry(r.task_kind.clone()).or_insert_with(|| KindSummary {
            attempted: 0,
            passed: 0,
            pass_rate: 0.0,
            failure_histogram: empty_histogram(),
        });
        k.attempted += 1;
        if r.overall == Verdict::Pass {
            k.passed += 1;
        }
        for id in r.failed_checks() {
            *k.failure_histogram.entry(id.as_str().to_string()).or_default() += 1;
            *total_hist.entry(id.as_str().to_string()).or_default() += 1;
        }
    }
    for k in per_kind.values_mut() {
        k.pass_rate = k.passed as f64 / k.attempted as f64;
    }
    EvalSummary {
        pass_criterion: PASS_CRITERION.to_string(),
        total_tasks: reports.len(),
        per_kind,
        failure_histogram: if reports.is_empty() { BTreeMap::new() } else { total_hist },
    }
}
