//! Unified diffs: parsing, rendering, generation and exact-context application.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::model::normalize_rel_path;

/// Relative path → file content.
pub type FileSet = BTreeMap<String, String>;

const NO_NEWLINE: &str = "\\ No newline at end of file";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatchError {
    #[error("context mismatch in {file} at line {line}")]
    ContextMismatch { file: String, line: usize },
    #[error("malformed diff: {0}")]
    MalformedDiff(String),
    #[error("path escapes the task context: {0}")]
    PathEscape(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HunkLine {
    Context(String),
    Remove(String),
    Add(String),
}

impl HunkLine {
    /// Line text including its terminator, if any.
    pub fn text(&self) -> &str {
        match self {
            HunkLine::Context(s) | HunkLine::Remove(s) | HunkLine::Add(s) => s,
        }
    }

    fn text_mut(&mut self) -> &mut String {
        match self {
            HunkLine::Context(s) | HunkLine::Remove(s) | HunkLine::Add(s) => s,
        }
    }

    fn prefix(&self) -> char {
        match self {
            HunkLine::Context(_) => ' ',
            HunkLine::Remove(_) => '-',
            HunkLine::Add(_) => '+',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    fn old_lines(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|l| match l {
            HunkLine::Context(s) | HunkLine::Remove(s) => Some(s.as_str()),
            HunkLine::Add(_) => None,
        })
    }

    fn new_lines(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|l| match l {
            HunkLine::Context(s) | HunkLine::Add(s) => Some(s.as_str()),
            HunkLine::Remove(_) => None,
        })
    }
}

/// Changes to one file. `old_path` is `None` for a created file and
/// `new_path` is `None` for a deleted one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    pub fn is_new_file(&self) -> bool {
        self.old_path.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Patch {
    pub files: Vec<FilePatch>,
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn touched_paths(&self) -> BTreeSet<String> {
        self.files.iter().map(|f| f.path().to_string()).collect()
    }

    /// Files created by the patch with their full content.
    pub fn new_files(&self) -> Vec<(String, String)> {
        self.files
            .iter()
            .filter(|f| f.is_new_file())
            .map(|f| {
                let content: String = f.hunks.iter().flat_map(|h| h.new_lines()).collect();
                (f.path().to_string(), content)
            })
            .collect()
    }
}

fn header_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == "/dev/null" {
        return None;
    }
    let stripped = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(stripped.to_string())
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<(usize, usize, usize, usize)> {
    let rest = line.strip_prefix("@@ -")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(" +")?;
    let (os, ol) = parse_range(old)?;
    let (ns, nl) = parse_range(new)?;
    Some((os, ol, ns, nl))
}

/// Parses one or more file sections. Text before the first `---` header is ignored.
pub fn parse_patch(text: &str) -> Result<Patch, PatchError> {
    let malformed = |m: String| PatchError::MalformedDiff(m);
    let lines: Vec<&str> = text.lines().collect();
    let mut files = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if !(line.starts_with("--- ") && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ "))) {
            i += 1;
            continue;
        }
        let old_path = header_path(&line[4..]);
        let new_path = header_path(&lines[i + 1][4..]);
        if old_path.is_none() && new_path.is_none() {
            return Err(malformed(format!("line {}: both paths are /dev/null", i + 1)));
        }
        i += 2;
        let mut hunks = Vec::new();
        while i < lines.len() && lines[i].starts_with("@@") {
            let (old_start, old_len, new_start, new_len) = parse_hunk_header(lines[i])
                .ok_or_else(|| malformed(format!("line {}: bad hunk header", i + 1)))?;
            i += 1;
            let mut hunk = Hunk { old_start, old_len, new_start, new_len, lines: Vec::new() };
            let (mut old_seen, mut new_seen) = (0, 0);
            while old_seen < old_len || new_seen < new_len {
                let Some(&l) = lines.get(i) else {
                    return Err(malformed(format!("hunk at line {} is truncated", i)));
                };
                let (tag, body) = match l.chars().next() {
                    Some(c @ (' ' | '-' | '+')) => (c, &l[1..]),
                    None => (' ', ""),
                    Some('\\') => {
                        i += 1;
                        continue;
                    }
                    Some(_) => return Err(malformed(format!("line {}: unexpected {l:?} in hunk", i + 1))),
                };
                let text = format!("{body}\n");
                match tag {
                    ' ' => {
                        old_seen += 1;
                        new_seen += 1;
                        hunk.lines.push(HunkLine::Context(text));
                    }
                    '-' => {
                        old_seen += 1;
                        hunk.lines.push(HunkLine::Remove(text));
                    }
                    _ => {
                        new_seen += 1;
                        hunk.lines.push(HunkLine::Add(text));
                    }
                }
                i += 1;
                if lines.get(i).is_some_and(|l| l.starts_with(NO_NEWLINE)) {
                    hunk.lines.last_mut().expect("just pushed").text_mut().pop();
                    i += 1;
                }
            }
            if old_seen != old_len || new_seen != new_len {
                return Err(malformed(format!("hunk ending at line {i} has wrong line counts")));
            }
            hunks.push(hunk);
        }
        if hunks.is_empty() {
            return Err(malformed(format!("file section before line {} has no hunks", i + 1)));
        }
        files.push(FilePatch { old_path, new_path, hunks });
    }
    if files.is_empty() {
        return Err(malformed("no file headers".into()));
    }
    Ok(Patch { files })
}

pub fn render_patch(patch: &Patch) -> String {
    let mut out = String::new();
    for f in &patch.files {
        let old = f.old_path.as_ref().map_or("/dev/null".to_string(), |p| format!("a/{p}"));
        let new = f.new_path.as_ref().map_or("/dev/null".to_string(), |p| format!("b/{p}"));
        let _ = writeln!(out, "--- {old}\n+++ {new}");
        for h in &f.hunks {
            let _ = writeln!(
                out,
                "@@ -{},{} +{},{} @@",
                h.old_start, h.old_len, h.new_start, h.new_len
            );
            for l in &h.lines {
                out.push(l.prefix());
                let text = l.text();
                match text.strip_suffix('\n') {
                    Some(t) => {
                        out.push_str(t);
                        out.push('\n');
                    }
                    None => {
                        out.push_str(text);
                        out.push('\n');
                        out.push_str(NO_NEWLINE);
                        out.push('\n');
                    }
                }
            }
        }
    }
    out
}

/// Diff between two file sets, three lines of context, paths in sorted order.
pub fn diff_files(before: &FileSet, after: &FileSet) -> Patch {
    let mut text = String::new();
    let paths: BTreeSet<&String> = before.keys().chain(after.keys()).collect();
    for path in paths {
        let old = before.get(path);
        let new = after.get(path);
        if old == new {
            continue;
        }
        let diff = similar::TextDiff::from_lines(
            old.map_or("", String::as_str),
            new.map_or("", String::as_str),
        );
        let old_name = if old.is_some() { format!("a/{path}") } else { "/dev/null".into() };
        let new_name = if new.is_some() { format!("b/{path}") } else { "/dev/null".into() };
        let unified = diff
            .unified_diff()
            .context_radius(3)
            .header(&old_name, &new_name)
            .to_string();
        text.push_str(&unified);
    }
    if text.is_empty() {
        return Patch::default();
    }
    parse_patch(&text).expect("generated diff parses")
}

/// Validates a patch path: relative, no `..`, normalized separators.
pub fn check_path(path: &str) -> Result<String, PatchError> {
    if path.starts_with('/') || path.contains('\\') || path.contains(':') {
        return Err(PatchError::PathEscape(path.to_string()));
    }
    normalize_rel_path(path).ok_or_else(|| PatchError::PathEscape(path.to_string()))
}

fn parent_dir(path: &str) -> &str {
    path.rsplit_once('/').map_or("", |(d, _)| d)
}

fn split_lines(content: &str) -> Vec<&str> {
    content.split_inclusive('\n').collect()
}

/// Applies `patch` to `files` with exact context. Only paths in `files` may be
/// modified or deleted; a created file must sit in a directory that already
/// holds one of them.
pub fn apply_patch(files: &FileSet, patch: &Patch) -> Result<FileSet, PatchError> {
    let dirs: BTreeSet<&str> = files.keys().map(|p| parent_dir(p)).collect();
    let mut out = files.clone();
    for fp in &patch.files {
        for p in [&fp.old_path, &fp.new_path].into_iter().flatten() {
            check_path(p)?;
        }
        if let (Some(a), Some(b)) = (&fp.old_path, &fp.new_path) {
            if a != b {
                return Err(PatchError::MalformedDiff(format!("rename {a} -> {b} is not supported")));
            }
        }
        let path = check_path(fp.path())?;
        let original = match &fp.old_path {
            Some(_) => out
                .get(&path)
                .ok_or_else(|| PatchError::PathEscape(path.clone()))?
                .clone(),
            None => {
                if out.contains_key(&path) {
                    return Err(PatchError::ContextMismatch { file: path, line: 0 });
                }
                if !dirs.contains(parent_dir(&path)) {
                    return Err(PatchError::PathEscape(path));
                }
                String::new()
            }
        };
        let patched = apply_hunks(&path, &original, &fp.hunks)?;
        match &fp.new_path {
            Some(_) => {
                out.insert(path, patched);
            }
            None => {
                if !patched.is_empty() {
                    return Err(PatchError::MalformedDiff(format!("deletion of {path} leaves content")));
                }
                out.remove(&path);
            }
        }
    }
    Ok(out)
}

fn apply_hunks(path: &str, original: &str, hunks: &[Hunk]) -> Result<String, PatchError> {
    let src = split_lines(original);
    let mut out = String::with_capacity(original.len());
    let mut cursor = 0usize;
    for h in hunks {
        // A zero-length old range names the line *after which* to insert.
        let start = if h.old_len == 0 { h.old_start } else { h.old_start.saturating_sub(1) };
        if h.old_len > 0 && h.old_start == 0 {
            return Err(PatchError::MalformedDiff(format!("{path}: hunk starts at line 0")));
        }
        if start < cursor {
            return Err(PatchError::MalformedDiff(format!("{path}: overlapping hunks")));
        }
        if start > src.len() {
            return Err(PatchError::ContextMismatch { file: path.to_string(), line: h.old_start });
        }
        for l in &src[cursor..start] {
            out.push_str(l);
        }
        for (k, expected) in h.old_lines().enumerate() {
            let actual = src.get(start + k).copied();
            if actual != Some(expected) {
                return Err(PatchError::ContextMismatch {
                    file: path.to_string(),
                    line: start + k + 1,
                });
            }
        }
        for l in h.new_lines() {
            out.push_str(l);
        }
        cursor = start + h.old_len;
    }
    for l in &src[cursor.min(src.len())..] {
        out.push_str(l);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[(&str, &str)]) -> FileSet {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn generate_render_parse_apply() {
        let before = set(&[("src/A.java", "a\nb\nc\nd\ne\nf\ng\nh\n")]);
        let after = set(&[
            ("src/A.java", "a\nb\nc\nD\ne\nf\ng\nh\n"),
            ("src/New.java", "class New {}"),
        ]);
        let patch = diff_files(&before, &after);
        assert_eq!(patch.files.len(), 2);
        let text = render_patch(&patch);
        assert!(text.contains("--- /dev/null"));
        assert!(text.contains(NO_NEWLINE));
        let reparsed = parse_patch(&text).unwrap();
        assert_eq!(reparsed, patch);
        assert_eq!(apply_patch(&before, &reparsed).unwrap(), after);
    }

    #[test]
    fn drifted_context_is_rejected() {
        let before = set(&[("A.java", "x\ny\nz\n")]);
        let after = set(&[("A.java", "x\nY\nz\n")]);
        let patch = diff_files(&before, &after);
        let drifted = set(&[("A.java", "w\nx\ny\nz\n")]);
        assert!(matches!(
            apply_patch(&drifted, &patch),
            Err(PatchError::ContextMismatch { .. })
        ));
    }

    #[test]
    fn parent_segments_escape() {
        let text = "--- a/../outside.java\n+++ b/../outside.java\n@@ -1,1 +1,1 @@\n-a\n+b\n";
        let patch = parse_patch(text).unwrap();
        let files = set(&[("A.java", "a\n")]);
        assert!(matches!(apply_patch(&files, &patch), Err(PatchError::PathEscape(_))));
    }

    #[test]
    fn new_file_outside_context_dirs_escapes() {
        let files = set(&[("src/A.java", "a\n")]);
        let after = set(&[("src/A.java", "a\n"), ("elsewhere/B.java", "b\n")]);
        let patch = diff_files(&files, &after);
        assert!(matches!(apply_patch(&files, &patch), Err(PatchError::PathEscape(_))));
    }

    #[test]
    fn prose_is_not_a_diff() {
        assert!(matches!(parse_patch("just words"), Err(PatchError::MalformedDiff(_))));
        let truncated = "--- a/A\n+++ b/A\n@@ -1,2 +1,2 @@\n-a\n";
        assert!(matches!(parse_patch(truncated), Err(PatchError::MalformedDiff(_))));
    }

    #[test]
    fn untouched_files_identical() {
        let before = set(&[("A.java", "a\n"), ("B.java", "b\n")]);
        let after = set(&[("A.java", "A\n"), ("B.java", "b\n")]);
        let out = apply_patch(&before, &diff_files(&before, &after)).unwrap();
        assert_eq!(out["B.java"], before["B.java"]);
    }
}
