use std::collections::{BTreeMap, BTreeSet};

use super::{MigrationTask, TaskBlocker, TaskKind};
use crate::model::{ApiKind, Finding, Label, LiteralOrigin, Primitive, ResolutionStatus};
use crate::ruleset::Ruleset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KindFilter {
    Hash,
    Pqc,
    #[default]
    All,
}

impl KindFilter {
    fn admits(self, kind: &TaskKind) -> bool {
        match self {
            KindFilter::Hash => !kind.is_pqc(),
            KindFilter::Pqc => kind.is_pqc(),
            KindFilter::All => true,
        }
    }
}

impl std::str::FromStr for KindFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hash" => Ok(KindFilter::Hash),
            "pqc" => Ok(KindFilter::Pqc),
            "all" => Ok(KindFilter::All),
            other => Err(format!("unknown task kind filter {other:?}")),
        }
    }
}

fn task_kind(f: &Finding, rules: &Ruleset) -> Option<TaskKind> {
    if f.resolution == ResolutionStatus::Unresolved || f.safety.label == Label::Unknown {
        return None;
    }
    let primitive = f.primitive()?;
    match (f.api_kind, primitive) {
        (ApiKind::DigestFactory, Primitive::Sha1 | Primitive::Md5) => Some(TaskKind::HashUpgrade {
            from: primitive.clone(),
            to: rules.migration.hash_target_primitive(),
        }),
        (ApiKind::CipherFactory | ApiKind::KeyPairGeneratorFactory, Primitive::Rsa) => {
            Some(TaskKind::PqcKemIntegration { target: Primitive::Kyber })
        }
        (ApiKind::SignatureFactory, Primitive::Rsa | Primitive::Dsa | Primitive::Ec) => {
            Some(TaskKind::PqcSignatureIntegration { target: Primitive::Dilithium })
        }
        _ => None,
    }
}

fn origin_key(o: &LiteralOrigin) -> (String, usize) {
    (o.file_path.clone(), o.start)
}

/// Connected components over the files each finding touches.
fn clusters(findings: Vec<Finding>) -> Vec<Vec<Finding>> {
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
        let p = parent.get(x).cloned().unwrap_or_else(|| x.to_string());
        if p == x {
            parent.insert(x.to_string(), p.clone());
            return p;
        }
        let root = find(parent, &p);
        parent.insert(x.to_string(), root.clone());
        root
    }
    let files_of = |f: &Finding| {
        let mut v = vec![f.location.file_path.clone()];
        if let Some(o) = &f.literal_origin {
            v.push(o.file_path.clone());
        }
        v
    };
    for f in &findings {
        let files = files_of(f);
        let a = find(&mut parent, &files[0]);
        for other in &files[1..] {
            let b = find(&mut parent, other);
            if a != b {
                let (lo, hi) = if a < b { (a.clone(), b) } else { (b, a.clone()) };
                parent.insert(hi, lo);
            }
        }
    }
    let mut groups: BTreeMap<String, Vec<Finding>> = BTreeMap::new();
    for f in findings {
        let root = find(&mut parent, &f.location.file_path);
        groups.entry(root).or_default().push(f);
    }
    groups.into_values().collect()
}

/// Plans one task per (app, kind, file cluster). `app_files` lists every file
/// of each app so build manifests can be attached.
pub fn plan_tasks(
    findings: &[Finding],
    rules: &Ruleset,
    filter: KindFilter,
    app_files: &BTreeMap<String, Vec<String>>,
) -> Vec<MigrationTask> {
    let mut by_origin: BTreeMap<(String, String, usize), Vec<&Finding>> = BTreeMap::new();
    for f in findings {
        if let Some(o) = &f.literal_origin {
            let (file, start) = origin_key(o);
            by_origin.entry((f.location.app_id.clone(), file, start)).or_default().push(f);
        }
    }

    let mut groups: BTreeMap<(String, TaskKind), Vec<Finding>> = BTreeMap::new();
    for f in findings {
        if let Some(kind) = task_kind(f, rules) {
            if filter.admits(&kind) {
                groups.entry((f.location.app_id.clone(), kind)).or_default().push(f.clone());
            }
        }
    }

    let mut tasks = Vec::new();
    for ((app, kind), targets) in groups {
        let mut clean = Vec::new();
        let mut blocked: BTreeMap<String, (TaskBlocker, Vec<Finding>)> = BTreeMap::new();
        for f in targets {
            let blocker = if kind.is_pqc() {
                None
            } else {
                match &f.literal_origin {
                    None => Some(TaskBlocker::NoDefiningLiteral),
                    Some(o) => {
                        let (file, start) = origin_key(o);
                        let sharers: Vec<String> = by_origin[&(app.clone(), file, start)]
                            .iter()
                            .filter(|s| task_kind(s, rules).as_ref() != Some(&kind))
                            .map(|s| format!("{}:{}", s.location.file_path, s.location.line))
                            .collect();
                        (!sharers.is_empty()).then(|| TaskBlocker::SharedLiteral {
                            file_path: o.file_path.clone(),
                            line: o.line,
                            sharers,
                        })
                    }
                }
            };
            match blocker {
                None => clean.push(f),
                Some(b) => {
                    let key = serde_json::to_string(&b).expect("blocker serializes");
                    blocked.entry(key).or_insert_with(|| (b, Vec::new())).1.push(f);
                }
            }
        }
        let manifests: Vec<String> = app_files
            .get(&app)
            .map(|files| {
                files
                    .iter()
                    .filter(|p| rules.migration.is_manifest(p))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default();
        let marker = match &kind {
            TaskKind::HashUpgrade { .. } => None,
            TaskKind::PqcKemIntegration { .. } => Some(rules.migration.kem_dependency_marker.clone()),
            TaskKind::PqcSignatureIntegration { .. } => {
                Some(rules.migration.signature_dependency_marker.clone())
            }
        };
        let mut units: Vec<(Vec<Finding>, Option<TaskBlocker>)> =
            clusters(clean).into_iter().map(|c| (c, None)).collect();
        units.extend(blocked.into_values().map(|(b, fs)| (fs, Some(b))));
        for (n, (mut targets, blocker)) in units.into_iter().enumerate() {
            crate::pipeline::sort_findings(&mut targets);
            let mut context: BTreeSet<String> = BTreeSet::new();
            for f in &targets {
                context.insert(f.location.file_path.clone());
                if let Some(o) = &f.literal_origin {
                    context.insert(o.file_path.clone());
                }
            }
            context.extend(manifests.iter().cloned());
            tasks.push(MigrationTask {
                task_id: format!("{app}-{}-{:02}", kind.slug(), n + 1),
                app_id: app.clone(),
                kind: kind.clone(),
                target_findings: targets,
                context_files: context.into_iter().collect(),
                expected_dependency_marker: marker.clone(),
                blocker,
            });
        }
    }
    tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    tasks
}
