use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MigrateError, MigrationTask, TaskKind};
use crate::patch::FileSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptMode {
    Edit,
    Agentic,
}

impl std::str::FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edit" => Ok(PromptMode::Edit),
            "agentic" => Ok(PromptMode::Agentic),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub path: String,
    pub content: String,
}

/// Everything a model backend sees for one task.
///
/// Edit mode inlines every context file in `files`. Agentic mode leaves
/// `files` empty and lists paths in `manifest`; the backend serves file
/// bodies from `workspace` through the tool protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task: MigrationTask,
    pub mode: PromptMode,
    pub instructions: String,
    pub files: Vec<BundleFile>,
    pub manifest: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_protocol: Option<String>,
    pub exemplar_diffs: Vec<String>,
    #[serde(skip)]
    pub workspace: FileSet,
}

pub const TOOL_PROTOCOL: &str = "\
Reply with one JSON object per turn.
Request a tool: {\"tool\": \"list_files\"} | {\"tool\": \"read_file\", \"path\": P} | {\"tool\": \"write_file\", \"path\": P, \"content\": C}
Finish: {\"done\": true}
Paths are relative to the app root and limited to the manifest and its directories.
Written files become the patch.";

impl PromptBundle {
    /// SHA-256 over the canonical JSON of mode, instructions, files, manifest,
    /// exemplars and workspace contents. Keys the replay store.
    pub fn content_hash(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            mode: PromptMode,
            instructions: &'a str,
            files: &'a [BundleFile],
            manifest: &'a [String],
            exemplar_diffs: &'a [String],
            workspace: &'a FileSet,
        }
        let canonical = Canonical {
            mode: self.mode,
            instructions: &self.instructions,
            files: &self.files,
            manifest: &self.manifest,
            exemplar_diffs: &self.exemplar_diffs,
            workspace: &self.workspace,
        };
        let bytes = serde_json::to_vec(&canonical).expect("bundle serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// The prompt as plain text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.instructions);
        out.push('\n');
        for ex in &self.exemplar_diffs {
            let _ = write!(out, "\nReference change:\n```diff\n{ex}```\n");
        }
        match self.mode {
            PromptMode::Edit => {
                for f in &self.files {
                    let _ = write!(out, "\nFile: {}\n```\n{}```\n", f.path, f.content);
                }
            }
            PromptMode::Agentic => {
                out.push_str("\nFiles:\n");
                for p in &self.manifest {
                    let _ = writeln!(out, "- {p}");
                }
                if let Some(protocol) = &self.tool_protocol {
                    let _ = write!(out, "\n{protocol}\n");
                }
            }
        }
        out
    }
}

/// Reference diffs stored as `<dir>/<kind>/<name>.diff`.
#[derive(Debug, Clone, Default)]
pub struct ExemplarLibrary {
    by_kind: BTreeMap<String, Vec<String>>,
}

impl ExemplarLibrary {
    pub fn load(dir: &Path) -> Result<Self, MigrateError> {
        let mut lib = Self::default();
        for kind in ["hash", "pqc-kem", "pqc-signature"] {
            let pattern = dir.join(kind).join("*.diff");
            let Ok(paths) = glob::glob(&pattern.to_string_lossy()) else {
                continue;
            };
            let mut paths: Vec<_> = paths.filter_map(Result::ok).collect();
            paths.sort();
            for p in paths {
                let text = std::fs::read_to_string(&p)
                    .map_err(|source| MigrateError::Io { path: p.clone(), source })?;
                lib.by_kind.entry(kind.to_string()).or_default().push(text);
            }
        }
        Ok(lib)
    }

    pub fn insert(&mut self, kind_dir: &str, diff: String) {
        self.by_kind.entry(kind_dir.to_string()).or_default().push(diff);
    }

    pub fn for_kind(&self, kind: &TaskKind) -> &[String] {
        self.by_kind
            .get(kind.exemplar_dir())
            .map(Vec::as_slice)
            .unwrap_or_default()
    }
}

fn instructions(task: &MigrationTask) -> String {
    let mut out = String::new();
    match &task.kind {
        TaskKind::HashUpgrade { from, to } => {
            let _ = writeln!(
                out,
                "Replace the {} message digest with {} at the call sites below.",
                from.display_name(),
                to.display_name()
            );
            out.push_str(
                "Edit the string literal that names the algorithm; when it is a shared constant, edit the constant declaration.\n",
            );
        }
        TaskKind::PqcKemIntegration { .. } => {
            out.push_str("Replace the RSA encryption or key-pair use below with Kyber key encapsulation.\n");
        }
        TaskKind::PqcSignatureIntegration { .. } => {
            out.push_str("Replace the classical signature use below with Dilithium signatures.\n");
        }
    }
    if let Some(marker) = &task.expected_dependency_marker {
        let _ = writeln!(out, "Declare the provider dependency `{marker}` in the build manifest.");
        out.push_str("Import every class you reference and leave no placeholder code.\n");
    }
    out.push_str("Produce a unified diff only.\nTargets:\n");
    for f in &task.target_findings {
        let _ = writeln!(out, "- {}:{}: {}", f.location.file_path, f.location.line, f.evidence);
    }
    out
}

/// Builds a deterministic bundle from the task's context files.
pub fn build_prompt(
    task: &MigrationTask,
    mode: PromptMode,
    files: &FileSet,
    exemplars: &ExemplarLibrary,
) -> Result<PromptBundle, MigrateError> {
    let mut workspace = FileSet::new();
    for path in &task.context_files {
        let content = files
            .get(path)
            .ok_or_else(|| MigrateError::MissingContextFile(path.clone()))?;
        workspace.insert(path.clone(), content.clone());
    }
    let inline = match mode {
        PromptMode::Edit => workspace
            .iter()
            .map(|(path, content)| BundleFile { path: path.clone(), content: content.clone() })
            .collect(),
        PromptMode::Agentic => Vec::new(),
    };
    Ok(PromptBundle {
        task: task.clone(),
        mode,
        instructions: instructions(task),
        files: inline,
        manifest: workspace.keys().cloned().collect(),
        tool_protocol: (mode == PromptMode::Agentic).then(|| TOOL_PROTOCOL.to_string()),
        exemplar_diffs: exemplars.for_kind(&task.kind).to_vec(),
        workspace,
    })
}
