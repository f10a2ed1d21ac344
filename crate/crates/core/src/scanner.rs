//! Lexical call-site detection over Java, Kotlin and smali text.
//!
//! Matching is purely textual: a trigger fires on `Receiver.member(` (or
//! `new Type(`, or a smali `invoke-*` naming the member) outside comments and
//! string literals. No type resolution is attempted.

use std::ops::Range;
use std::path::{Path, PathBuf};

use regex::Regex;
use walkdir::WalkDir;

use crate::lexer::{is_ident_byte, line_col, strip_noncode, Language, LexWarning, Masked};
use crate::model::{normalize_rel_path, ApiKind, Diagnostic, SourceLocation};
use crate::ruleset::{Ruleset, Trigger, TriggerForm};
use crate::smali;

pub const DEFAULT_MAX_FILE_BYTES: u64 = 8 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub app_id: String,
    pub file_path: String,
    pub language: Language,
    pub content: String,
}

impl SourceUnit {
    /// Infers the language from the extension; `None` for unrecognized files.
    pub fn new(app_id: &str, file_path: &str, content: impl Into<String>) -> Option<Self> {
        let language = Language::from_path(file_path)?;
        Some(Self::with_language(app_id, file_path, language, content))
    }

    pub fn with_language(
        app_id: &str,
        file_path: &str,
        language: Language,
        content: impl Into<String>,
    ) -> Self {
        Self {
            app_id: app_id.to_string(),
            file_path: normalize_rel_path(file_path).unwrap_or_else(|| file_path.to_string()),
            language,
            content: content.into(),
        }
    }

    /// Decodes bytes as UTF-8, replacing invalid sequences and reporting it.
    pub fn from_bytes(
        app_id: &str,
        file_path: &str,
        bytes: &[u8],
    ) -> Option<(Self, Option<Diagnostic>)> {
        let language = Language::from_path(file_path)?;
        match std::str::from_utf8(bytes) {
            Ok(s) => Some((Self::with_language(app_id, file_path, language, s), None)),
            Err(_) => {
                let text = String::from_utf8_lossy(bytes).into_owned();
                let unit = Self::with_language(app_id, file_path, language, text);
                let diag = Diagnostic::new(
                    app_id,
                    &unit.file_path,
                    None,
                    "invalid UTF-8 replaced with U+FFFD",
                );
                Some((unit, Some(diag)))
            }
        }
    }
}

/// A unit together with its masked text.
#[derive(Debug, Clone)]
pub struct PreparedUnit {
    pub unit: SourceUnit,
    pub masked: Masked,
}

impl PreparedUnit {
    pub fn new(unit: SourceUnit) -> Self {
        let masked = strip_noncode(&unit.content, unit.language);
        Self { unit, masked }
    }

    pub fn location(&self, offset: usize) -> SourceLocation {
        let (line, column) = line_col(&self.unit.content, offset);
        SourceLocation {
            app_id: self.unit.app_id.clone(),
            file_path: self.unit.file_path.clone(),
            line,
            column,
        }
    }

    pub fn lex_diagnostics(&self) -> Vec<Diagnostic> {
        self.masked
            .warnings
            .iter()
            .map(|w| {
                let (line, msg) = match w {
                    LexWarning::UnterminatedComment { line } => (*line, "unterminated comment"),
                    LexWarning::UnterminatedString { line } => (*line, "unterminated string"),
                };
                Diagnostic::new(&self.unit.app_id, &self.unit.file_path, Some(line), msg)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    pub location: SourceLocation,
    pub api_kind: ApiKind,
    pub matched_pattern_id: String,
    pub argument_exprs: Vec<String>,
    /// Byte ranges of each argument in the original text (trimmed). For smali,
    /// the range of the register name in the invoke line.
    pub argument_spans: Vec<Range<usize>>,
    /// Byte range of the enclosing method body, or the whole file.
    pub enclosing_scope: Range<usize>,
    /// Byte offset where the match starts.
    pub offset: usize,
    /// Byte offset just past the closing parenthesis (end of line for smali).
    pub end_offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct UnitScan {
    pub sites: Vec<CallSite>,
    pub diagnostics: Vec<Diagnostic>,
}

struct SourceMatcher {
    trigger: Trigger,
    java: Regex,
    kotlin: Regex,
}

/// Triggers compiled once per ruleset.
pub struct Scanner {
    source: Vec<SourceMatcher>,
    smali: Vec<Trigger>,
}

const QUALIFIER: &str = r"(?:[A-Za-z_$][A-Za-z0-9_$]*\s*\.\s*)*";

impl Scanner {
    pub fn new(rules: &Ruleset) -> Self {
        let mut source = Vec::new();
        let mut smali_triggers = Vec::new();
        for t in &rules.triggers {
            let member = regex::escape(&t.member_name);
            match t.form() {
                TriggerForm::Smali => smali_triggers.push(t.clone()),
                TriggerForm::Call => {
                    let pat = format!(r"{}\s*\.\s*{member}\s*\(", regex::escape(&t.receiver_name));
                    let re = Regex::new(&pat).expect("escaped trigger regex");
                    source.push(SourceMatcher {
                        trigger: t.clone(),
                        java: re.clone(),
                        kotlin: re,
                    });
                }
                TriggerForm::Constructor => {
                    let java = format!(r"new\s+{QUALIFIER}{member}\s*(?:<[^>()]*>)?\s*\(");
                    let kotlin = format!(r"{QUALIFIER}{member}\s*(?:<[^>()]*>)?\s*\(");
                    source.push(SourceMatcher {
                        trigger: t.clone(),
                        java: Regex::new(&java).expect("escaped trigger regex"),
                        kotlin: Regex::new(&kotlin).expect("escaped trigger regex"),
                    });
                }
            }
        }
        Self {
            source,
            smali: smali_triggers,
        }
    }

    pub fn scan(&self, prepared: &PreparedUnit) -> UnitScan {
        let mut out = UnitScan {
            sites: Vec::new(),
            diagnostics: prepared.lex_diagnostics(),
        };
        match prepared.unit.language {
            Language::Smali => self.scan_smali(prepared, &mut out),
            lang => self.scan_source(prepared, lang, &mut out),
        }
        out.sites
            .sort_by(|a, b| (a.location.line, a.location.column, &a.matched_pattern_id)
                .cmp(&(b.location.line, b.location.column, &b.matched_pattern_id)));
        out
    }

    fn scan_source(&self, p: &PreparedUnit, lang: Language, out: &mut UnitScan) {
        let masked = p.masked.text.as_str();
        let bytes = masked.as_bytes();
        let braces = BraceMap::build(masked);
        for m in &self.source {
            let re = if lang == Language::Kotlin { &m.kotlin } else { &m.java };
            for hit in re.find_iter(masked) {
                let start = hit.start();
                if start > 0 && (is_ident_byte(bytes[start - 1])) {
                    continue;
                }
                if m.trigger.form() == TriggerForm::Constructor
                    && lang == Language::Kotlin
                    && !kotlin_constructor_context(masked, start)
                {
                    continue;
                }
                let open = hit.end() - 1;
                let (args, spans, end) = match split_arguments(masked, open) {
                    Some((spans, close)) => {
                        let exprs = spans
                            .iter()
                            .map(|r| p.masked.without_comments(&p.unit.content, r.start, r.end).trim().to_string())
                            .collect();
                        (exprs, spans, close + 1)
                    }
                    None => {
                        let (line, _) = line_col(masked, start);
                        out.diagnostics.push(Diagnostic::new(
                            &p.unit.app_id,
                            &p.unit.file_path,
                            Some(line),
                            "unbalanced argument list",
                        ));
                        (Vec::new(), Vec::new(), open + 1)
                    }
                };
                if args.len() < m.trigger.min_args {
                    continue;
                }
                out.sites.push(CallSite {
                    location: p.location(start),
                    api_kind: m.trigger.api_kind,
                    matched_pattern_id: m.trigger.pattern_id.clone(),
                    argument_exprs: args,
                    argument_spans: spans,
                    enclosing_scope: braces.enclosing_method(masked, start),
                    offset: start,
                    end_offset: end,
                });
            }
        }
    }

    fn scan_smali(&self, p: &PreparedUnit, out: &mut UnitScan) {
        let masked = p.masked.text.as_str();
        let mut pos = 0;
        for line in masked.split_inclusive('\n') {
            let line_start = pos;
            pos += line.len();
            let trimmed = line.trim_start();
            if !trimmed.starts_with("invoke-") {
                continue;
            }
            let Some(inv) = smali::parse_invoke(trimmed) else {
                continue;
            };
            let Some(t) = self
                .smali
                .iter()
                .find(|t| t.receiver_name == inv.class && t.member_name == inv.member)
            else {
                continue;
            };
            if inv.args.len() < t.min_args {
                continue;
            }
            let start = line_start + (line.len() - trimmed.len());
            let brace = start + trimmed.find('{').unwrap_or(0);
            let close = start + trimmed.find('}').unwrap_or(0);
            let spans = inv
                .args
                .iter()
                .map(|r| register_span(masked, brace, close, r))
                .collect();
            let scope = smali::method_bounds(masked, start)
                .map(|(s, e)| s..e)
                .unwrap_or(0..masked.len());
            out.sites.push(CallSite {
                location: p.location(start),
                api_kind: t.api_kind,
                matched_pattern_id: t.pattern_id.clone(),
                argument_exprs: inv.args.clone(),
                argument_spans: spans,
                enclosing_scope: scope,
                offset: start,
                end_offset: line_start + line.trim_end().len(),
            });
        }
    }
}

fn register_span(text: &str, open: usize, close: usize, reg: &str) -> Range<usize> {
    let inner = &text[open..close.max(open)];
    let mut search = 0;
    while let Some(i) = inner[search..].find(reg) {
        let s = open + search + i;
        let e = s + reg.len();
        let before_ok = s == 0 || !is_ident_byte(text.as_bytes()[s - 1]);
        let after_ok = e >= text.len() || !is_ident_byte(text.as_bytes()[e]);
        if before_ok && after_ok {
            return s..e;
        }
        search += i + reg.len();
    }
    // Registers inside a `..` range have no textual span of their own.
    open..close
}

/// Rejects Kotlin declarations (`fun Random(`, `class SecretKeySpec(`) and
/// member calls on other receivers.
fn kotlin_constructor_context(masked: &str, start: usize) -> bool {
    let before = masked[..start].trim_end();
    if before.ends_with('.') {
        return false;
    }
    let prev_word: String = before
        .chars()
        .rev()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    !matches!(
        prev_word.as_str(),
        "fun" | "class" | "interface" | "object" | "constructor" | "typealias" | "import"
    )
}

/// Splits the argument list whose `(` is at `open`. Returns trimmed argument
/// ranges and the offset of the closing `)`, or `None` when unbalanced.
pub fn split_arguments(masked: &str, open: usize) -> Option<(Vec<Range<usize>>, usize)> {
    let bytes = masked.as_bytes();
    debug_assert_eq!(bytes.get(open), Some(&b'('));
    let mut depth = 0i32;
    let mut args = Vec::new();
    let mut arg_start = open + 1;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    if b != b')' {
                        return None;
                    }
                    push_trimmed(masked, arg_start, i, &mut args);
                    if args.len() == 1 && args[0].is_empty() {
                        args.clear();
                    }
                    return Some((args, i));
                }
                if depth < 0 {
                    return None;
                }
            }
            b',' if depth == 1 => {
                push_trimmed(masked, arg_start, i, &mut args);
                arg_start = i + 1;
            }
            b';' if depth == 1 => return None,
            _ => {}
        }
    }
    None
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<Range<usize>>) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    let s = start + lead;
    let e = (end - trail).max(s);
    out.push(s..e);
}

/// Matched brace pairs of a masked source file.
pub struct BraceMap {
    pairs: Vec<(usize, usize)>,
}

impl BraceMap {
    pub fn build(masked: &str) -> Self {
        let mut stack = Vec::new();
        let mut pairs = Vec::new();
        for (i, b) in masked.bytes().enumerate() {
            match b {
                b'{' => stack.push(i),
                b'}' => {
                    if let Some(open) = stack.pop() {
                        pairs.push((open, i));
                    }
                }
                _ => {}
            }
        }
        // Unclosed braces extend to end of file.
        for open in stack {
            pairs.push((open, masked.len()));
        }
        pairs.sort();
        Self { pairs }
    }

    /// Enclosing pairs, outermost first.
    pub fn chain(&self, offset: usize) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .copied()
            .filter(|&(o, c)| o < offset && offset < c)
            .collect()
    }

    /// The method body containing `offset`: the block nested directly inside
    /// the innermost type body. Falls back to the type body itself, the
    /// outermost block, or the whole file.
    pub fn enclosing_method(&self, masked: &str, offset: usize) -> Range<usize> {
        let chain = self.chain(offset);
        let type_idx = chain
            .iter()
            .rposition(|&(open, _)| is_type_header(block_header(masked, open)));
        let pick = match type_idx {
            Some(i) => chain.get(i + 1).or(chain.get(i)).copied(),
            None => chain.first().copied(),
        };
        match pick {
            Some((o, c)) => o..(c + 1).min(masked.len()),
            None => 0..masked.len(),
        }
    }
}

/// Text between the previous statement/block boundary and the `{` at `open`.
pub fn block_header(masked: &str, open: usize) -> &str {
    let before = &masked[..open];
    let start = before
        .rfind([';', '{', '}'])
        .map_or(0, |i| i + 1);
    before[start..].trim()
}

fn is_type_header(header: &str) -> bool {
    header
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .any(|w| matches!(w, "class" | "interface" | "enum" | "object" | "record"))
}

/// Options for walking an app directory.
#[derive(Debug, Clone)]
pub struct WalkOptions {
    pub ignore_dirs: Vec<String>,
    pub max_file_bytes: u64,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self {
            ignore_dirs: vec!["build".into(), "node_modules".into()],
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
        }
    }
}

#[derive(Debug, Default)]
pub struct LoadedApp {
    pub app_id: String,
    pub units: Vec<SourceUnit>,
    /// Every regular file path relative to the app root, including
    /// non-source files such as build manifests.
    pub all_files: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads every recognized source file under `root`, sorted by normalized path.
/// The app id is the root directory's name.
pub fn load_app(root: &Path, options: &WalkOptions) -> LoadedApp {
    let app_id = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut loaded = LoadedApp {
        app_id: app_id.clone(),
        ..Default::default()
    };
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            if e.depth() == 0 {
                return true;
            }
            let name = e.file_name().to_string_lossy();
            if name.starts_with('.') {
                return false;
            }
            !(e.file_type().is_dir() && options.ignore_dirs.iter().any(|d| d == &*name))
        });
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for entry in walker {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                let rel = e.path().strip_prefix(root).unwrap_or(e.path());
                let rel = rel.to_string_lossy().replace('\\', "/");
                files.push((rel, e.path().to_path_buf()));
            }
            Ok(_) => {}
            Err(err) => {
                let path = err
                    .path()
                    .and_then(|p| p.strip_prefix(root).ok())
                    .map(|p| p.to_string_lossy().into_owned())
                    .unwrap_or_default();
                loaded
                    .diagnostics
                    .push(Diagnostic::new(&app_id, &path, None, format!("unreadable: {err}")));
            }
        }
    }
    files.sort();
    for (rel, path) in files {
        loaded.all_files.push(rel.clone());
        if Language::from_path(&rel).is_none() {
            continue;
        }
        let too_big = std::fs::metadata(&path)
            .map(|m| m.len() > options.max_file_bytes)
            .unwrap_or(false);
        if too_big {
            loaded.diagnostics.push(Diagnostic::new(
                &app_id,
                &rel,
                None,
                format!("skipped: larger than {} bytes", options.max_file_bytes),
            ));
            continue;
        }
        match std::fs::read(&path) {
            Ok(bytes) => {
                if let Some((unit, diag)) = SourceUnit::from_bytes(&app_id, &rel, &bytes) {
                    loaded.units.push(unit);
                    loaded.diagnostics.extend(diag);
                }
            }
            Err(err) => loaded
                .diagnostics
                .push(Diagnostic::new(&app_id, &rel, None, format!("unreadable: {err}"))),
        }
    }
    loaded
}

/// Scans one unit with a freshly compiled trigger set.
pub fn scan_unit(unit: &SourceUnit, rules: &Ruleset) -> UnitScan {
    Scanner::new(rules).scan(&PreparedUnit::new(unit.clone()))
}

/// Scans every recognized file of one app directory.
pub fn scan_app(root: &Path, rules: &Ruleset, options: &WalkOptions) -> UnitScan {
    let loaded = load_app(root, options);
    let scanner = Scanner::new(rules);
    let mut out = UnitScan {
        sites: Vec::new(),
        diagnostics: loaded.diagnostics,
    };
    for unit in loaded.units {
        let scan = scanner.scan(&PreparedUnit::new(unit));
        out.sites.extend(scan.sites);
        out.diagnostics.extend(scan.diagnostics);
    }
    out.sites.sort_by(|a, b| {
        (&a.location.file_path, a.location.line, a.location.column, &a.matched_pattern_id).cmp(&(
            &b.location.file_path,
            b.location.line,
            b.location.column,
            &b.matched_pattern_id,
        ))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_java(src: &str) -> UnitScan {
        let unit = SourceUnit::new("app", "A.java", src).unwrap();
        scan_unit(&unit, Ruleset::builtin())
    }

    #[test]
    fn digest_call_captures_literal_argument() {
        let scan = scan_java("class A { void f() throws Exception {\n  MessageDigest.getInstance(\"SHA-1\");\n} }\n");
        assert_eq!(scan.sites.len(), 1);
        let s = &scan.sites[0];
        assert_eq!(s.api_kind, ApiKind::DigestFactory);
        assert_eq!(s.argument_exprs, vec!["\"SHA-1\""]);
        assert_eq!((s.location.line, s.location.column), (2, 3));
    }

    #[test]
    fn comments_and_strings_do_not_trigger() {
        let scan = scan_java("class A {\n // Cipher.getInstance(\"AES\")\n String s = \"Cipher.getInstance(x)\";\n /* MessageDigest.getInstance(\"MD5\") */ }\n");
        assert!(scan.sites.is_empty());
    }

    #[test]
    fn qualified_and_spaced_calls_match_but_suffix_names_do_not() {
        let scan = scan_java("class A { void f() {\n javax.crypto.Cipher . getInstance ( \"AES\" );\n MyCipher.getInstance(\"AES\");\n} }");
        assert_eq!(scan.sites.len(), 1);
        assert_eq!(scan.sites[0].location.line, 2);
    }

    #[test]
    fn constructor_arguments_strip_comments() {
        let scan = scan_java("class A { void f(byte[] k) {\n new SecretKeySpec(k, /* algo */ \"AES\");\n new java.security.SecureRandom();\n new Random(42L);\n} }");
        let kinds: Vec<_> = scan.sites.iter().map(|s| s.api_kind).collect();
        assert_eq!(kinds, vec![ApiKind::SecretKeyConstruction, ApiKind::RandomConstruction]);
        assert_eq!(scan.sites[0].argument_exprs, vec!["k", "\"AES\""]);
        assert_eq!(scan.sites[1].argument_exprs, vec!["42L"]);
    }

    #[test]
    fn kotlin_constructor_without_new() {
        let unit = SourceUnit::new(
            "app",
            "K.kt",
            "class K {\n fun Random(x: Int) = 1\n fun f() { val r = java.util.Random(7)\n val s = SecureRandom(seed) }\n}\n",
        )
        .unwrap();
        let scan = scan_unit(&unit, Ruleset::builtin());
        assert_eq!(scan.sites.len(), 2, "{:?}", scan.sites);
        assert!(scan.sites.iter().all(|s| s.api_kind == ApiKind::RandomConstruction));
    }

    #[test]
    fn unbalanced_arguments_warn() {
        let scan = scan_java("class A { void f() { Cipher.getInstance(\"AES\"; } }");
        assert_eq!(scan.sites.len(), 1);
        assert!(scan.sites[0].argument_exprs.is_empty());
        assert!(scan.diagnostics.iter().any(|d| d.message.contains("unbalanced")));
    }

    #[test]
    fn enclosing_scope_is_method_body() {
        let src = "class A {\n  static final String X = \"a\";\n  void f() {\n    Runnable r = new Runnable() { public void run() {} };\n    Cipher.getInstance(X);\n  }\n}\n";
        let scan = scan_java(src);
        let scope = scan.sites[0].enclosing_scope.clone();
        let body = &src[scope];
        assert!(body.starts_with("{\n    Runnable"));
        assert!(body.ends_with("}"));
    }

    #[test]
    fn smali_invoke_is_detected() {
        let src = ".method public f()V\n    const-string v0, \"MD5\"\n    invoke-static {v0}, Ljava/security/MessageDigest;->getInstance(Ljava/lang/String;)Ljava/security/MessageDigest;\n    # invoke-static {v0}, Ljava/security/MessageDigest;->getInstance(Ljava/lang/String;)Ljava/security/MessageDigest;\n    return-void\n.end method\n";
        let unit = SourceUnit::new("app", "smali/A.smali", src).unwrap();
        let scan = scan_unit(&unit, Ruleset::builtin());
        assert_eq!(scan.sites.len(), 1);
        let s = &scan.sites[0];
        assert_eq!(s.api_kind, ApiKind::DigestFactory);
        assert_eq!(s.argument_exprs, vec!["v0"]);
        assert_eq!(s.location.line, 3);
        assert_eq!(&src[s.argument_spans[0].clone()], "v0");
    }

    #[test]
    fn file_without_triggers_yields_nothing() {
        assert!(scan_java("class A { int x = 1; }").sites.is_empty());
    }
}
