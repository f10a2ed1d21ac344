use crate::patch::{parse_patch, Patch};

fn looks_like_diff(block: &str) -> bool {
    let mut lines = block.lines();
    while let Some(l) = lines.next() {
        if l.starts_with("--- ") {
            if let Some(next) = lines.clone().next() {
                if next.starts_with("+++ ") {
                    return true;
                }
            }
        }
    }
    false
}

fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end();
        match &mut current {
            None if trimmed.starts_with("```") => current = Some(String::new()),
            None => {}
            Some(body) if trimmed == "```" => {
                blocks.push(std::mem::take(body));
                current = None;
            }
            Some(body) => body.push_str(line),
        }
    }
    blocks
}

fn is_diff_body_line(line: &str) -> bool {
    line.is_empty()
        || line.starts_with([' ', '+', '-', '\\'])
        || line.starts_with("@@")
        || line.starts_with("diff ")
        || line.starts_with("index ")
        || line.starts_with("new file mode")
        || line.starts_with("deleted file mode")
}

/// Unfenced diffs: runs of diff-shaped lines starting at a `---`/`+++` pair.
fn bare_blocks(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let starts = lines[i].starts_with("--- ")
            && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ "));
        let git_header = lines[i].starts_with("diff --git ");
        if !(starts || git_header) {
            i += 1;
            continue;
        }
        let mut block = String::new();
        while i < lines.len() && is_diff_body_line(lines[i].trim_end_matches(['\n', '\r'])) {
            block.push_str(lines[i]);
            i += 1;
        }
        blocks.push(block);
    }
    blocks
}

/// The single unified diff in `raw_text`. Zero or several diff blocks yield
/// `None` with a diagnostic.
pub fn extract_patch(raw_text: &str) -> (Option<Patch>, Option<String>) {
    let mut blocks: Vec<String> = fenced_blocks(raw_text)
        .into_iter()
        .filter(|b| looks_like_diff(b))
        .collect();
    if blocks.is_empty() {
        blocks = bare_blocks(raw_text).into_iter().filter(|b| looks_like_diff(b)).collect();
    }
    match blocks.len() {
        0 => (None, Some("no patch in response".to_string())),
        1 => match parse_patch(&blocks[0]) {
            Ok(p) if !p.is_empty() => (Some(p), None),
            Ok(_) => (None, Some("no patch in response".to_string())),
            Err(e) => (None, Some(e.to_string())),
        },
        n => (None, Some(format!("ambiguous patch: {n} diff blocks"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIFF: &str = "--- a/A.java\n+++ b/A.java\n@@ -1 +1 @@\n-x\n+y\n";

    #[test]
    fn one_fenced_block() {
        let text = format!("Here you go:\n```diff\n{DIFF}```\nDone.");
        let (p, diag) = extract_patch(&text);
        assert!(p.is_some(), "{diag:?}");
    }

    #[test]
    fn bare_block() {
        let text = format!("Patch follows.\n{DIFF}\nThanks");
        assert!(extract_patch(&text).0.is_some());
    }

    #[test]
    fn prose_only() {
        let (p, diag) = extract_patch("I could not find anything to change.");
        assert!(p.is_none());
        assert_eq!(diag.as_deref(), Some("no patch in response"));
    }

    #[test]
    fn two_blocks_are_ambiguous() {
        let text = format!("```diff\n{DIFF}```\nor\n```diff\n{DIFF}```\n");
        let (p, diag) = extract_patch(&text);
        assert!(p.is_none());
        assert!(diag.unwrap().starts_with("ambiguous patch"));
    }
}
