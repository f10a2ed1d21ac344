//! Comment and string masking.
//!
//! Matching runs over a copy of the source in which comments and the interiors
//! of string/char literals are replaced by spaces. Byte length and newlines are
//! preserved, so every offset in the masked text is an offset in the original.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    Java,
    Kotlin,
    Smali,
}

impl Language {
    pub fn from_path(path: &str) -> Option<Language> {
        let ext = path.rsplit_once('.')?.1;
        match ext.to_ascii_lowercase().as_str() {
            "java" => Some(Language::Java),
            "kt" | "kts" => Some(Language::Kotlin),
            "smali" => Some(Language::Smali),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiteralKind {
    Str,
    Char,
}

/// A literal in the original text. `start..end` spans the delimiters;
/// `content_start..content_end` the characters between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralSpan {
    pub start: usize,
    pub end: usize,
    pub content_start: usize,
    pub content_end: usize,
    pub kind: LiteralKind,
    /// Escape-decoded value.
    pub value: String,
    /// Kotlin `$name` / `${...}` interpolation present.
    pub templated: bool,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexWarning {
    UnterminatedComment { line: u32 },
    UnterminatedString { line: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masked {
    pub text: String,
    pub literals: Vec<LiteralSpan>,
    pub comments: Vec<(usize, usize)>,
    pub warnings: Vec<LexWarning>,
}

impl Masked {
    /// The literal whose delimiters start exactly at `offset`.
    pub fn literal_at(&self, offset: usize) -> Option<&LiteralSpan> {
        self.literals
            .binary_search_by_key(&offset, |l| l.start)
            .ok()
            .map(|i| &self.literals[i])
    }

    /// True when `offset` lies inside a comment or a literal (delimiters included).
    pub fn is_masked(&self, offset: usize) -> bool {
        self.comments.iter().any(|&(s, e)| s <= offset && offset < e)
            || self.literals.iter().any(|l| l.start <= offset && offset < l.end)
    }

    /// Copies `start..end` of `original`, dropping comment bytes.
    pub fn without_comments(&self, original: &str, start: usize, end: usize) -> String {
        let mut out = String::with_capacity(end.saturating_sub(start));
        let mut pos = start;
        for &(cs, ce) in &self.comments {
            if ce <= pos || cs >= end {
                continue;
            }
            if cs > pos {
                out.push_str(&original[pos..cs]);
            }
            pos = pos.max(ce);
        }
        if pos < end {
            out.push_str(&original[pos..end]);
        }
        out
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    out: Vec<u8>,
    pos: usize,
    line: u32,
    literals: Vec<LiteralSpan>,
    comments: Vec<(usize, usize)>,
    warnings: Vec<LexWarning>,
}

/// Blanks comments and literal interiors. Lexical problems are returned as
/// warnings; masking always completes.
pub fn strip_noncode(content: &str, language: Language) -> Masked {
    let mut lx = Lexer {
        src: content.as_bytes(),
        out: content.as_bytes().to_vec(),
        pos: 0,
        line: 1,
        literals: Vec::new(),
        comments: Vec::new(),
        warnings: Vec::new(),
    };
    match language {
        Language::Java | Language::Kotlin => lx.run_c_family(language == Language::Kotlin),
        Language::Smali => lx.run_smali(),
    }
    // Only ASCII bytes are ever written, and multi-byte sequences are blanked
    // whole, so the buffer stays valid UTF-8.
    let text = String::from_utf8(lx.out).unwrap_or_else(|e| {
        String::from_utf8_lossy(e.as_bytes()).into_owned()
    });
    Masked {
        text,
        literals: lx.literals,
        comments: lx.comments,
        warnings: lx.warnings,
    }
}

impl Lexer<'_> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.src.get(self.pos + ahead).copied()
    }

    fn blank(&mut self, start: usize, end: usize) {
        for i in start..end.min(self.out.len()) {
            if self.out[i] != b'\n' {
                self.out[i] = b' ';
            }
        }
    }

    fn advance(&mut self) {
        if self.src[self.pos] == b'\n' {
            self.line += 1;
        }
        self.pos += 1;
    }

    fn run_c_family(&mut self, kotlin: bool) {
        while self.pos < self.src.len() {
            match (self.src[self.pos], self.peek(1)) {
                (b'/', Some(b'/')) => self.line_comment(),
                (b'/', Some(b'*')) => self.block_comment(kotlin),
                (b'"', _) if self.peek(1) == Some(b'"') && self.peek(2) == Some(b'"') => {
                    self.raw_string(kotlin)
                }
                (b'"', _) => self.quoted(b'"', LiteralKind::Str, kotlin),
                (b'\'', _) => self.quoted(b'\'', LiteralKind::Char, false),
                _ => self.advance(),
            }
        }
    }

    fn run_smali(&mut self) {
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b'#' => self.line_comment(),
                b'"' => self.quoted(b'"', LiteralKind::Str, false),
                _ => self.advance(),
            }
        }
    }

    fn line_comment(&mut self) {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
            self.pos += 1;
        }
        self.blank(start, self.pos);
        self.comments.push((start, self.pos));
    }

    fn block_comment(&mut self, nested: bool) {
        let start = self.pos;
        let start_line = self.line;
        self.pos += 2;
        let mut depth = 1usize;
        while self.pos < self.src.len() {
            if self.src[self.pos] == b'*' && self.peek(1) == Some(b'/') {
                self.pos += 2;
                depth -= 1;
                if depth == 0 {
                    break;
                }
            } else if nested && self.src[self.pos] == b'/' && self.peek(1) == Some(b'*') {
                self.pos += 2;
                depth += 1;
            } else {
                self.advance();
            }
        }
        if depth > 0 {
            self.warnings
                .push(LexWarning::UnterminatedComment { line: start_line });
            self.pos = self.src.len();
        }
        self.blank(start, self.pos);
        self.comments.push((start, self.pos));
    }

    fn raw_string(&mut self, kotlin: bool) {
        let start = self.pos;
        let start_line = self.line;
        self.pos += 3;
        let content_start = self.pos;
        let mut templated = false;
        let mut terminated = false;
        while self.pos < self.src.len() {
            if self.src[self.pos..].starts_with(b"\"\"\"") {
                // A run of quotes closes on its last three.
                while self.peek(3) == Some(b'"') {
                    self.pos += 1;
                }
                terminated = true;
                break;
            }
            if kotlin && self.src[self.pos] == b'$' && self.is_template_start() {
                templated = true;
            }
            self.advance();
        }
        let content_end = self.pos.min(self.src.len());
        if terminated {
            self.pos += 3;
        } else {
            self.warnings
                .push(LexWarning::UnterminatedString { line: start_line });
        }
        self.blank(content_start, content_end);
        let value = String::from_utf8_lossy(&self.src[content_start..content_end]).into_owned();
        self.literals.push(LiteralSpan {
            start,
            end: self.pos,
            content_start,
            content_end,
            kind: LiteralKind::Str,
            value,
            templated,
            terminated,
        });
    }

    fn is_template_start(&self) -> bool {
        matches!(self.peek(1), Some(c) if c == b'{' || c == b'_' || c.is_ascii_alphabetic())
    }

    fn quoted(&mut self, quote: u8, kind: LiteralKind, kotlin: bool) {
        let start = self.pos;
        let start_line = self.line;
        self.pos += 1;
        let content_start = self.pos;
        let mut templated = false;
        let mut terminated = false;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c == b'\\' {
                self.pos += 1;
                if self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            if c == quote {
                terminated = true;
                break;
            }
            if c == b'\n' {
                break;
            }
            if kotlin && c == b'$' && self.is_template_start() {
                templated = true;
                if self.peek(1) == Some(b'{') {
                    self.skip_template_expr();
                    continue;
                }
            }
            self.pos += 1;
        }
        let content_end = self.pos;
        if terminated {
            self.pos += 1;
        } else {
            self.warnings
                .push(LexWarning::UnterminatedString { line: start_line });
        }
        self.blank(content_start, content_end);
        let value = decode_escapes(&String::from_utf8_lossy(
            &self.src[content_start..content_end],
        ));
        self.literals.push(LiteralSpan {
            start,
            end: self.pos,
            content_start,
            content_end,
            kind,
            value,
            templated,
            terminated,
        });
    }

    /// Skips `${ ... }` inside a Kotlin string, including nested quotes.
    fn skip_template_expr(&mut self) {
        self.pos += 2;
        let mut depth = 1usize;
        let mut in_str = false;
        while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
            let c = self.src[self.pos];
            if in_str {
                if c == b'\\' {
                    self.pos += 1;
                } else if c == b'"' {
                    in_str = false;
                }
            } else if c == b'"' {
                in_str = true;
            } else if c == b'{' {
                depth += 1;
            } else if c == b'}' {
                depth -= 1;
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
            }
            self.pos += 1;
        }
    }
}

fn decode_escapes(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('b') => out.push('\u{8}'),
            Some('f') => out.push('\u{c}'),
            Some('0') => out.push('\0'),
            Some('u') => {
                while chars.peek() == Some(&'u') {
                    chars.next();
                }
                let hex: String = chars.by_ref().take(4).collect();
                match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                    Some(ch) => out.push(ch),
                    None => {
                        out.push_str("\\u");
                        out.push_str(&hex);
                    }
                }
            }
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// 1-based line and character column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (u32, u32) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.bytes().filter(|&b| b == b'\n').count() as u32 + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let column = text[line_start..offset].chars().count() as u32 + 1;
    (line, column)
}

/// Byte range of the line containing `offset`, without the newline.
pub fn line_bounds(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let end = text[offset..].find('\n').map_or(text.len(), |i| offset + i);
    (start, end)
}

pub fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_is_masked() {
        let src = "x = 1; // MD5\n";
        let m = strip_noncode(src, Language::Java);
        assert_eq!(m.text.len(), src.len());
        assert!(!m.text.contains("MD5"));
        assert_eq!(m.text, "x = 1;       \n");
    }

    #[test]
    fn string_interior_is_masked_and_recorded() {
        let src = r#"s = "Cipher.getInstance";"#;
        let m = strip_noncode(src, Language::Java);
        assert!(!m.text.contains("Cipher"));
        assert_eq!(m.literals.len(), 1);
        assert_eq!(m.literals[0].value, "Cipher.getInstance");
        assert_eq!(&src[m.literals[0].start..m.literals[0].end], "\"Cipher.getInstance\"");
    }

    #[test]
    fn unterminated_block_comment_blanks_remainder() {
        let src = "int a;\n/* never closed\nMessageDigest.getInstance(\"MD5\");\n";
        let m = strip_noncode(src, Language::Java);
        assert_eq!(m.warnings, vec![LexWarning::UnterminatedComment { line: 2 }]);
        assert_eq!(m.text.len(), src.len());
        assert!(!m.text.contains("MessageDigest"));
        assert_eq!(m.text.lines().count(), src.lines().count());
    }

    #[test]
    fn unterminated_string_stops_at_newline() {
        let src = "a = \"open\nb = 1;\n";
        let m = strip_noncode(src, Language::Java);
        assert_eq!(m.warnings, vec![LexWarning::UnterminatedString { line: 1 }]);
        assert!(m.text.contains("b = 1;"));
    }

    #[test]
    fn escapes_decode() {
        let m = strip_noncode(r#"x("a\"b\\cA");"#, Language::Java);
        assert_eq!(m.literals[0].value, "a\"b\\cA");
    }

    #[test]
    fn kotlin_nested_comments_and_templates() {
        let src = "/* a /* b */ c */ val s = \"${map[\"k\"]}x\"\nval t = \"$name\"\n";
        let m = strip_noncode(src, Language::Kotlin);
        assert!(m.warnings.is_empty(), "{:?}", m.warnings);
        assert!(m.text.contains("val s"));
        assert_eq!(m.literals.len(), 2);
        assert!(m.literals.iter().all(|l| l.templated));
    }

    #[test]
    fn smali_hash_comments() {
        let src = "    # MD5 comment\n    const-string v0, \"MD5\"\n";
        let m = strip_noncode(src, Language::Smali);
        assert!(!m.text.contains("MD5"));
        assert_eq!(m.literals[0].value, "MD5");
    }

    #[test]
    fn multibyte_content_keeps_length() {
        let src = "// ünïcødé\nString s = \"κλειδί\";\n";
        let m = strip_noncode(src, Language::Java);
        assert_eq!(m.text.len(), src.len());
        assert_eq!(m.literals[0].value, "κλειδί");
    }

    #[test]
    fn line_col_counts_chars() {
        let text = "ab\nκx y";
        assert_eq!(line_col(text, 0), (1, 1));
        let y = text.find('y').unwrap();
        assert_eq!(line_col(text, y), (2, 4));
    }
}
