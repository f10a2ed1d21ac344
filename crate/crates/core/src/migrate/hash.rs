use std::collections::BTreeMap;

use super::{MigrateError, MigrationTask, TaskBlocker, TaskKind};
use crate::model::{parse_transformation_with, ResolutionStatus};
use crate::patch::{diff_files, FileSet, Patch};
use crate::ruleset::Ruleset;

/// Replacement of one literal's contents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LiteralRewrite {
    pub file_path: String,
    /// Byte range of the literal contents, quotes excluded.
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

/// Contents of the string literal starting at `start` in `content`, if the
/// byte before is a quote.
pub(crate) fn literal_contents(content: &str, start: usize) -> Option<(usize, &str)> {
    if start == 0 || content.as_bytes().get(start - 1) != Some(&b'"') {
        return None;
    }
    let rest = content.get(start..)?;
    let mut escaped = false;
    for (i, c) in rest.char_indices() {
        match c {
            '\\' if !escaped => escaped = true,
            '"' if !escaped => return Some((start + i, &rest[..i])),
            '\n' => return None,
            _ => escaped = false,
        }
    }
    None
}

/// Literal edits performing `task`. Literals already naming the target are skipped.
pub fn hash_rewrites(
    task: &MigrationTask,
    files: &FileSet,
    rules: &Ruleset,
) -> Result<Vec<LiteralRewrite>, MigrateError> {
    let TaskKind::HashUpgrade { from, to } = &task.kind else {
        return Err(MigrateError::NotHashUpgrade { task_id: task.task_id.clone() });
    };
    match &task.blocker {
        Some(TaskBlocker::SharedLiteral { file_path, line, sharers }) => {
            return Err(MigrateError::SharedLiteralConflict {
                task_id: task.task_id.clone(),
                file_path: file_path.clone(),
                line: *line,
                sharers: sharers.clone(),
            })
        }
        Some(TaskBlocker::NoDefiningLiteral) => {
            return Err(MigrateError::NoDefiningLiteral { task_id: task.task_id.clone() })
        }
        None => {}
    }
    let replacement = to.display_name();
    let mut edits: BTreeMap<(String, usize), LiteralRewrite> = BTreeMap::new();
    for f in &task.target_findings {
        if f.resolution == ResolutionStatus::Unresolved || f.spec.is_none() {
            return Err(MigrateError::UnresolvedTarget {
                task_id: task.task_id.clone(),
                location: format!("{}:{}", f.location.file_path, f.location.line),
            });
        }
        let Some(origin) = &f.literal_origin else {
            return Err(MigrateError::NoDefiningLiteral { task_id: task.task_id.clone() });
        };
        let content = files
            .get(&origin.file_path)
            .ok_or_else(|| MigrateError::MissingContextFile(origin.file_path.clone()))?;
        let mismatch = |found: &str| MigrateError::LiteralMismatch {
            task_id: task.task_id.clone(),
            file_path: origin.file_path.clone(),
            line: origin.line,
            found: found.to_string(),
        };
        let (end, text) = literal_contents(content, origin.start).ok_or_else(|| mismatch(""))?;
        let current = parse_transformation_with(text, &rules.aliases)
            .map_err(|_| mismatch(text))?
            .primitive;
        if &current == to {
            continue;
        }
        if &current != from {
            return Err(mismatch(text));
        }
        edits.insert(
            (origin.file_path.clone(), origin.start),
            LiteralRewrite {
                file_path: origin.file_path.clone(),
                start: origin.start,
                end,
                replacement: replacement.clone(),
            },
        );
    }
    Ok(edits.into_values().collect())
}

/// Applies non-overlapping rewrites, last offset first within each file.
pub fn apply_literal_rewrites(files: &FileSet, rewrites: &[LiteralRewrite]) -> FileSet {
    let mut out = files.clone();
    let mut sorted = rewrites.to_vec();
    sorted.sort();
    for r in sorted.iter().rev() {
        if let Some(content) = out.get_mut(&r.file_path) {
            content.replace_range(r.start..r.end, &r.replacement);
        }
    }
    out
}

/// The deterministic baseline: rewrite each target's defining literal.
pub fn apply_hash_upgrade(
    task: &MigrationTask,
    files: &FileSet,
    rules: &Ruleset,
) -> Result<Patch, MigrateError> {
    let rewrites = hash_rewrites(task, files, rules)?;
    let after = apply_literal_rewrites(files, &rewrites);
    Ok(diff_files(files, &after))
}
