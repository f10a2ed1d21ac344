//! Migration planning, the deterministic hash upgrade, prompt bundles,
//! patch validation and run scoring.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{Finding, Primitive};
use crate::patch::{check_path, FileSet, PatchError};

mod hash;
mod plan;
mod prompt;
mod score;
mod validate;

pub(crate) use hash::literal_contents;
pub use hash::{apply_hash_upgrade, apply_literal_rewrites, hash_rewrites, LiteralRewrite};
pub use plan::{plan_tasks, KindFilter};
pub use prompt::{build_prompt, BundleFile, ExemplarLibrary, PromptBundle, PromptMode, TOOL_PROTOCOL};
pub use score::{score_run, EvalSummary, KindSummary, PASS_CRITERION};
pub use validate::{validate_patch, CheckId, CheckResult, ValidationReport, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TaskKind {
    HashUpgrade { from: Primitive, to: Primitive },
    PqcKemIntegration { target: Primitive },
    PqcSignatureIntegration { target: Primitive },
}

impl TaskKind {
    /// Grouping name used in eval output.
    pub fn label(&self) -> &'static str {
        match self {
            TaskKind::HashUpgrade { .. } => "HashUpgrade",
            TaskKind::PqcKemIntegration { .. } => "PqcKemIntegration",
            TaskKind::PqcSignatureIntegration { .. } => "PqcSignatureIntegration",
        }
    }

    /// Task-id fragment: `hash-sha1`, `pqc-kem`, `pqc-sig`.
    pub fn slug(&self) -> String {
        match self {
            TaskKind::HashUpgrade { from, .. } => format!("hash-{}", from.name().to_ascii_lowercase()),
            TaskKind::PqcKemIntegration { .. } => "pqc-kem".into(),
            TaskKind::PqcSignatureIntegration { .. } => "pqc-sig".into(),
        }
    }

    /// Exemplar library subdirectory.
    pub fn exemplar_dir(&self) -> &'static str {
        match self {
            TaskKind::HashUpgrade { .. } => "hash",
            TaskKind::PqcKemIntegration { .. } => "pqc-kem",
            TaskKind::PqcSignatureIntegration { .. } => "pqc-signature",
        }
    }

    pub fn is_pqc(&self) -> bool {
        !matches!(self, TaskKind::HashUpgrade { .. })
    }

    /// Primitive the migration introduces.
    pub fn target(&self) -> &Primitive {
        match self {
            TaskKind::HashUpgrade { to, .. } => to,
            TaskKind::PqcKemIntegration { target } | TaskKind::PqcSignatureIntegration { target } => {
                target
            }
        }
    }
}

/// Why a task was split off from its cluster and cannot be transformed locally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskBlocker {
    /// The defining literal is also read by findings outside the task.
    SharedLiteral { file_path: String, line: u32, sharers: Vec<String> },
    /// The value is assembled from several literals.
    NoDefiningLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationTask {
    pub task_id: String,
    pub app_id: String,
    pub kind: TaskKind,
    pub target_findings: Vec<Finding>,
    pub context_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dependency_marker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocker: Option<TaskBlocker>,
}

#[derive(Debug, thiserror::Error)]
pub enum MigrateError {
    #[error("{task_id}: target at {location} has no resolved algorithm")]
    UnresolvedTarget { task_id: String, location: String },
    #[error("{task_id}: literal at {file_path}:{line} is shared with {sharers:?}")]
    SharedLiteralConflict {
        task_id: String,
        file_path: String,
        line: u32,
        sharers: Vec<String>,
    },
    #[error("{task_id}: target value is not defined by a single literal")]
    NoDefiningLiteral { task_id: String },
    #[error("{task_id}: expected an algorithm literal at {file_path}:{line}, found {found:?}")]
    LiteralMismatch {
        task_id: String,
        file_path: String,
        line: u32,
        found: String,
    },
    #[error("{task_id}: not a hash-upgrade task")]
    NotHashUpgrade { task_id: String },
    #[error("missing context file {0}")]
    MissingContextFile(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Patch(#[from] PatchError),
}

/// Reads a task's context files from `<corpus_root>/<app_id>/`.
pub fn load_context(corpus_root: &Path, task: &MigrationTask) -> Result<FileSet, MigrateError> {
    let app_root = corpus_root.join(&task.app_id);
    let mut files = FileSet::new();
    for rel in &task.context_files {
        let rel = check_path(rel)?;
        let path = app_root.join(&rel);
        match std::fs::read(&path) {
            Ok(bytes) => {
                files.insert(rel, String::from_utf8_lossy(&bytes).into_owned());
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(MigrateError::MissingContextFile(rel));
            }
            Err(source) => return Err(MigrateError::Io { path, source }),
        }
    }
    Ok(files)
}
