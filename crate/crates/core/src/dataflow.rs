//! Backward resolution of algorithm-name and key-size arguments.
//!
//! Resolution is intra-procedural plus an app-wide table of `static final` /
//! `const val` / smali static-final constants. Rules, applied recursively:
//!
//! 1. the argument is a string literal;
//! 2. it is a local identifier with exactly one textual assignment in the
//!    enclosing method, located before the use;
//! 3. it names an unambiguous constant (`NAME` or `Class.NAME`);
//! 4. it is `a + b + ...` where every operand resolves.
//!
//! Anything else, including ternaries and method calls, is unresolved.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use crate::lexer::{is_ident_byte, Language, LiteralKind, LiteralSpan};
use crate::model::{
    Diagnostic, LiteralOrigin, ResolutionRule, ResolutionStatus, ResolutionStep, SourceLocation,
};
use crate::ruleset::Ruleset;
use crate::scanner::{block_header, split_arguments, BraceMap, CallSite, PreparedUnit};
use crate::smali::{self, Def};

pub const MAX_RESOLUTION_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstValue {
    Str(String),
    Int(i64),
    /// A byte array of statically known length and content.
    Bytes(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantEntry {
    pub app_id: String,
    pub file_path: String,
    pub class_name: Option<String>,
    pub name: String,
    pub value: ConstValue,
    pub location: SourceLocation,
    pub origin: Option<LiteralOrigin>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BareEntry {
    Unique(ConstantEntry),
    /// Two or more declarations with different values; never used.
    Ambiguous(Vec<ConstantEntry>),
}

/// App-wide constants keyed by declaring file, by declaring class and by bare name.
#[derive(Debug, Clone, Default)]
pub struct ConstantTable {
    scoped: BTreeMap<(String, String, String), ConstantEntry>,
    by_class: BTreeMap<(String, String, String), Vec<ConstantEntry>>,
    bare: BTreeMap<(String, String), BareEntry>,
}

impl ConstantTable {
    pub fn is_empty(&self) -> bool {
        self.scoped.is_empty()
    }

    pub fn len(&self) -> usize {
        self.scoped.len()
    }

    pub fn scoped(&self, app_id: &str, file_path: &str, name: &str) -> Option<&ConstantEntry> {
        self.scoped
            .get(&(app_id.to_string(), file_path.to_string(), name.to_string()))
    }

    pub fn bare(&self, app_id: &str, name: &str) -> Option<&BareEntry> {
        self.bare.get(&(app_id.to_string(), name.to_string()))
    }

    pub fn is_ambiguous(&self, app_id: &str, name: &str) -> bool {
        matches!(self.bare(app_id, name), Some(BareEntry::Ambiguous(_)))
    }

    /// `Class.NAME` lookup; `None` unless exactly one value is declared.
    pub fn qualified(&self, app_id: &str, class: &str, name: &str) -> Option<&ConstantEntry> {
        let entries = self
            .by_class
            .get(&(app_id.to_string(), class.to_string(), name.to_string()))?;
        let first = entries.first()?;
        entries.iter().all(|e| e.value == first.value).then_some(first)
    }

    /// Same-file declaration first, then an unambiguous app-wide bare name.
    pub fn lookup(&self, app_id: &str, file_path: &str, name: &str) -> Option<&ConstantEntry> {
        if let Some(e) = self.scoped(app_id, file_path, name) {
            return Some(e);
        }
        match self.bare(app_id, name)? {
            BareEntry::Unique(e) => Some(e),
            BareEntry::Ambiguous(_) => None,
        }
    }

    pub fn insert(&mut self, entry: ConstantEntry) {
        let app = entry.app_id.clone();
        let name = entry.name.clone();
        self.scoped.insert(
            (app.clone(), entry.file_path.clone(), name.clone()),
            entry.clone(),
        );
        if let Some(class) = &entry.class_name {
            self.by_class
                .entry((app.clone(), class.clone(), name.clone()))
                .or_default()
                .push(entry.clone());
        }
        let slot = self.bare.entry((app, name));
        use std::collections::btree_map::Entry;
        match slot {
            Entry::Vacant(v) => {
                v.insert(BareEntry::Unique(entry));
            }
            Entry::Occupied(mut o) => {
                let next = match o.get() {
                    BareEntry::Unique(existing) if existing.value == entry.value => None,
                    BareEntry::Unique(existing) => {
                        Some(BareEntry::Ambiguous(vec![existing.clone(), entry]))
                    }
                    BareEntry::Ambiguous(list) => {
                        let mut list = list.clone();
                        list.push(entry);
                        Some(BareEntry::Ambiguous(list))
                    }
                };
                if let Some(n) = next {
                    o.insert(n);
                }
            }
        }
    }
}

static JAVA_FIELD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"((?:\b(?:public|private|protected|static|final|transient|volatile)\s+)+)([A-Za-z_$][\w$.]*(?:\s*<[^;=(){}]*>)?(?:\s*\[\s*\])*)\s+([A-Za-z_$][\w$]*)\s*(\[\s*\])?\s*=")
        .unwrap()
});
static KOTLIN_CONST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\bconst\s+val\s+([A-Za-z_][\w]*)\s*(?::\s*[\w.?<>]+)?\s*=").unwrap()
});
static SMALI_FIELD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^[ \t]*\.field\s+((?:[a-z-]+\s+)*)([A-Za-z_$][\w$-]*):(\S+)\s*=\s*(.*)$").unwrap()
});
static SMALI_CLASS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*\.class\s+(?:[a-z-]+\s+)*(L[^;\s]+;)").unwrap());
static INT_LITERAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^-?(?:0[xX][0-9a-fA-F_]+|[0-9][0-9_]*)[lL]?$").unwrap()
});
static IDENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_$][\w$]*$").unwrap());
static QUALIFIED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[A-Za-z_$][\w$]*\s*\.\s*)+[A-Za-z_$][\w$]*$").unwrap());

pub fn parse_int_literal(text: &str) -> Option<i64> {
    let t = text.trim();
    if !INT_LITERAL.is_match(t) {
        return None;
    }
    let t = t.trim_end_matches(['l', 'L']).replace('_', "");
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b.to_string()),
        None => (false, t.clone()),
    };
    let v = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        Some(hex) => i64::from_str_radix(hex, 16).ok()?,
        None => body.parse::<i64>().ok()?,
    };
    Some(if neg { -v } else { v })
}

fn origin_of(unit: &PreparedUnit, lit: &LiteralSpan) -> LiteralOrigin {
    let (line, _) = crate::lexer::line_col(&unit.unit.content, lit.start);
    LiteralOrigin {
        file_path: unit.unit.file_path.clone(),
        line,
        start: lit.content_start,
        end: lit.content_end,
    }
}

/// Name of the innermost named type whose body contains `offset`.
fn enclosing_type_name(masked: &str, braces: &BraceMap, offset: usize) -> Option<String> {
    static TYPE_NAME: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"\b(?:class|interface|enum|object|record)\s+([A-Za-z_$][\w$]*)").unwrap()
    });
    let chain = braces.chain(offset);
    chain.iter().rev().find_map(|&(open, _)| {
        let header = block_header(masked, open);
        TYPE_NAME
            .captures_iter(header)
            .last()
            .map(|c| c[1].to_string())
            .filter(|n| n != "companion" && n != "object")
    })
}

/// Collects constants declared anywhere in `units`.
pub fn build_constant_table(units: &[PreparedUnit]) -> (ConstantTable, Vec<Diagnostic>) {
    let mut table = ConstantTable::default();
    let mut diags = Vec::new();
    for unit in units {
        match unit.unit.language {
            Language::Java => collect_java(unit, &mut table, &mut diags),
            Language::Kotlin => collect_kotlin(unit, &mut table, &mut diags),
            Language::Smali => collect_smali(unit, &mut table, &mut diags),
        }
    }
    (table, diags)
}

fn collect_java(unit: &PreparedUnit, table: &mut ConstantTable, diags: &mut Vec<Diagnostic>) {
    let masked = unit.masked.text.as_str();
    let braces = BraceMap::build(masked);
    for caps in JAVA_FIELD.captures_iter(masked) {
        let mods = &caps[1];
        let has = |w: &str| mods.split_whitespace().any(|m| m == w);
        if !(has("static") && has("final")) {
            continue;
        }
        let ty = caps[2].to_string();
        let name_m = caps.get(3).unwrap();
        let eq_end = caps.get(0).unwrap().end();
        let Some(end) = statement_end(masked, eq_end, Language::Java) else {
            continue;
        };
        let class = enclosing_type_name(masked, &braces, name_m.start());
        declare(unit, table, diags, &ty, name_m.as_str(), name_m.start(), eq_end..end, class);
    }
}

fn collect_kotlin(unit: &PreparedUnit, table: &mut ConstantTable, diags: &mut Vec<Diagnostic>) {
    let masked = unit.masked.text.as_str();
    let braces = BraceMap::build(masked);
    for caps in KOTLIN_CONST.captures_iter(masked) {
        let name_m = caps.get(1).unwrap();
        let eq_end = caps.get(0).unwrap().end();
        let Some(end) = statement_end(masked, eq_end, Language::Kotlin) else {
            continue;
        };
        let class = enclosing_type_name(masked, &braces, name_m.start());
        declare(unit, table, diags, "", name_m.as_str(), name_m.start(), eq_end..end, class);
    }
}

#[allow(clippy::too_many_arguments)]
fn declare(
    unit: &PreparedUnit,
    table: &mut ConstantTable,
    diags: &mut Vec<Diagnostic>,
    declared_type: &str,
    name: &str,
    name_offset: usize,
    init: Range<usize>,
    class_name: Option<String>,
) {
    let evaluated = eval_constant_initializer(unit, table, init.clone());
    let Some((value, origin)) = evaluated else {
        let relevant = declared_type.is_empty()
            || matches!(declared_type, "String" | "int" | "long" | "byte[]" | "Integer");
        if relevant {
            let (line, _) = crate::lexer::line_col(&unit.unit.content, name_offset);
            diags.push(Diagnostic::new(
                &unit.unit.app_id,
                &unit.unit.file_path,
                Some(line),
                format!("constant {name} has a non-constant initializer; skipped"),
            ));
        }
        return;
    };
    table.insert(ConstantEntry {
        app_id: unit.unit.app_id.clone(),
        file_path: unit.unit.file_path.clone(),
        class_name,
        name: name.to_string(),
        value,
        location: unit.location(name_offset),
        origin,
    });
}

/// Literal-only evaluation used while the table is still being built.
fn eval_constant_initializer(
    unit: &PreparedUnit,
    table: &ConstantTable,
    init: Range<usize>,
) -> Option<(ConstValue, Option<LiteralOrigin>)> {
    let masked = unit.masked.text.as_str();
    let r = trim_parens(masked, init);
    if let Some(lit) = whole_literal(unit, r.clone()) {
        return Some((ConstValue::Str(lit.value.clone()), Some(origin_of(unit, lit))));
    }
    let text = unit.unit.content[r.clone()].trim();
    if let Some(v) = parse_int_literal(text) {
        return Some((ConstValue::Int(v), None));
    }
    if let Some(n) = byte_array_len(unit, r.clone()) {
        return Some((ConstValue::Bytes(n), None));
    }
    let parts = split_plus(masked, r.clone());
    if parts.len() > 1 {
        let mut out = String::new();
        for p in parts {
            let p = trim_parens(masked, p);
            if let Some(lit) = whole_literal(unit, p.clone()) {
                out.push_str(&lit.value);
            } else {
                let name = masked[p].trim();
                match table.lookup(&unit.unit.app_id, &unit.unit.file_path, name) {
                    Some(ConstantEntry { value: ConstValue::Str(s), .. }) => out.push_str(s),
                    _ => return None,
                }
            }
        }
        return Some((ConstValue::Str(out), None));
    }
    None
}

fn collect_smali(unit: &PreparedUnit, table: &mut ConstantTable, diags: &mut Vec<Diagnostic>) {
    let masked = unit.masked.text.as_str();
    let class = SMALI_CLASS
        .captures(masked)
        .map(|c| smali::simple_class_name(&c[1]).to_string());
    for caps in SMALI_FIELD.captures_iter(masked) {
        let flags = &caps[1];
        if !(flags.contains("static") && flags.contains("final")) {
            continue;
        }
        let name_m = caps.get(2).unwrap();
        let ty = &caps[3];
        let init = caps.get(4).unwrap();
        let value = if ty == "Ljava/lang/String;" {
            let quote = init.start() + init.as_str().find('"').unwrap_or(usize::MAX - init.start());
            unit.masked
                .literal_at(quote)
                .map(|lit| (ConstValue::Str(lit.value.clone()), Some(origin_of(unit, lit))))
        } else if matches!(ty, "I" | "J" | "S" | "B") {
            smali::parse_int(init.as_str()).map(|v| (ConstValue::Int(v), None))
        } else {
            continue;
        };
        let Some((value, origin)) = value else {
            let (line, _) = crate::lexer::line_col(&unit.unit.content, name_m.start());
            diags.push(Diagnostic::new(
                &unit.unit.app_id,
                &unit.unit.file_path,
                Some(line),
                format!("field {} has an unparseable initializer; skipped", name_m.as_str()),
            ));
            continue;
        };
        table.insert(ConstantEntry {
            app_id: unit.unit.app_id.clone(),
            file_path: unit.unit.file_path.clone(),
            class_name: class.clone(),
            name: name_m.as_str().to_string(),
            value,
            location: unit.location(name_m.start()),
            origin,
        });
    }
}

/// Offset of the `;` (or, for Kotlin, newline) ending the expression that
/// starts at `from`.
fn statement_end(masked: &str, from: usize, lang: Language) -> Option<usize> {
    let bytes = masked.as_bytes();
    let mut depth = 0i32;
    let mut i = from;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth < 0 {
                    return (lang == Language::Kotlin).then_some(i);
                }
            }
            b';' if depth == 0 => return Some(i),
            b'\n' if depth == 0 && lang == Language::Kotlin => {
                let so_far = masked[from..i].trim_end();
                let next = masked[i + 1..].trim_start();
                if !so_far.is_empty()
                    && !so_far.ends_with(['+', '=', '(', ','])
                    && !next.starts_with(['+', '.'])
                {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    (lang == Language::Kotlin).then_some(bytes.len())
}

fn trim_range(text: &str, r: Range<usize>) -> Range<usize> {
    let s = &text[r.clone()];
    let lead = s.len() - s.trim_start().len();
    let trail = s.len() - s.trim_end().len();
    (r.start + lead)..(r.end - trail).max(r.start + lead)
}

/// Trims whitespace and redundant enclosing parentheses.
fn trim_parens(masked: &str, r: Range<usize>) -> Range<usize> {
    let mut r = trim_range(masked, r);
    loop {
        let b = masked.as_bytes();
        if r.len() >= 2 && b[r.start] == b'(' && b[r.end - 1] == b')' {
            match split_arguments(masked, r.start) {
                Some((_, close)) if close == r.end - 1 => {
                    r = trim_range(masked, (r.start + 1)..(r.end - 1));
                    continue;
                }
                _ => {}
            }
        }
        return r;
    }
}

/// Splits on top-level binary `+`.
fn split_plus(masked: &str, r: Range<usize>) -> Vec<Range<usize>> {
    let b = masked.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = r.start;
    let mut i = r.start;
    while i < r.end {
        match b[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b'?' | b':' if depth == 0 => return vec![r],
            b'+' if depth == 0 => {
                if i + 1 < r.end && (b[i + 1] == b'+' || b[i + 1] == b'=') {
                    return vec![r];
                }
                if masked[start..i].trim().is_empty() {
                    return vec![r];
                }
                parts.push(start..i);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(start..r.end);
    parts.into_iter().map(|p| trim_range(masked, p)).collect()
}

fn whole_literal(unit: &PreparedUnit, r: Range<usize>) -> Option<&LiteralSpan> {
    let lit = unit.masked.literal_at(r.start)?;
    (lit.end == r.end && lit.kind == LiteralKind::Str && !lit.templated && lit.terminated)
        .then_some(lit)
}

/// Length of a statically constructed byte array expression, if any.
fn byte_array_len(unit: &PreparedUnit, r: Range<usize>) -> Option<usize> {
    static NEW_SIZED: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"^(?:new\s+byte\s*\[\s*(\w+)\s*\]|ByteArray\s*\(\s*(\w+)\s*\))$").unwrap()
    });
    static NEW_INIT: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"^(?:new\s+byte\s*\[\s*\]\s*)?\{(.*)\}$|^byteArrayOf\s*\((.*)\)$").unwrap()
    });
    static GET_BYTES: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"^(.*)\.\s*(?:getBytes|toByteArray)\s*\([^()]*\)$").unwrap()
    });
    let masked = &unit.masked.text[r.clone()];
    let compact: String = masked.split_whitespace().collect::<Vec<_>>().join(" ");
    let compact = compact.trim();
    if let Some(c) = NEW_SIZED.captures(compact) {
        let n = c.get(1).or(c.get(2))?.as_str();
        return parse_int_literal(n).and_then(|v| usize::try_from(v).ok());
    }
    if let Some(c) = NEW_INIT.captures(compact) {
        let inner = c.get(1).or(c.get(2))?.as_str().trim();
        if inner.is_empty() {
            return Some(0);
        }
        let items: Vec<&str> = inner.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let all_const = items.iter().all(|item| {
            let item = item.trim_start_matches("(byte)").trim();
            parse_int_literal(item).is_some() || item.starts_with('\'')
        });
        return all_const.then_some(items.len());
    }
    if let Some(c) = GET_BYTES.captures(compact) {
        let recv_len = c.get(1)?.as_str().len();
        let lead = masked.len() - masked.trim_start().len();
        let recv = trim_range(&unit.masked.text, (r.start + lead)..(r.start + lead + recv_len + 8).min(r.end));
        let lit = unit.masked.literal_at(recv.start)?;
        if lit.templated {
            return None;
        }
        return Some(lit.value.len());
    }
    None
}

/// Result of resolving one argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub status: ResolutionStatus,
    pub value: Option<String>,
    pub steps: Vec<ResolutionStep>,
    /// The single literal the value was read from, when there is one.
    pub origin: Option<LiteralOrigin>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Resolution {
    pub fn unresolved() -> Self {
        Self {
            status: ResolutionStatus::Unresolved,
            value: None,
            steps: Vec::new(),
            origin: None,
            diagnostics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    Str(String),
    Int(i64),
    Bytes(usize),
}

struct Resolved {
    value: Value,
    origin: Option<LiteralOrigin>,
}

struct Ctx<'a> {
    unit: &'a PreparedUnit,
    table: &'a ConstantTable,
    scope: Range<usize>,
    budget: usize,
    exceeded: bool,
}

impl Ctx<'_> {
    fn spend(&mut self) -> bool {
        if self.budget == 0 {
            self.exceeded = true;
            return false;
        }
        self.budget -= 1;
        true
    }

    fn masked(&self) -> &str {
        &self.unit.masked.text
    }

    fn loc(&self, offset: usize) -> SourceLocation {
        self.unit.location(offset)
    }

    /// Resolves the expression at `r`, used at `use_offset`. Spine steps are
    /// appended to `steps`; operands of a concatenation are not recorded.
    fn eval(
        &mut self,
        r: Range<usize>,
        use_offset: usize,
        steps: &mut Vec<ResolutionStep>,
    ) -> Option<Resolved> {
        if !self.spend() {
            return None;
        }
        let r = trim_parens(self.masked(), r);
        if r.is_empty() {
            return None;
        }
        if let Some(lit) = whole_literal(self.unit, r.clone()) {
            return Some(Resolved {
                value: Value::Str(lit.value.clone()),
                origin: Some(origin_of(self.unit, lit)),
            });
        }
        let text = self.unit.unit.content[r.clone()].trim().to_string();
        if let Some(v) = parse_int_literal(&text) {
            return Some(Resolved { value: Value::Int(v), origin: None });
        }
        if let Some(n) = byte_array_len(self.unit, r.clone()) {
            return Some(Resolved { value: Value::Bytes(n), origin: None });
        }
        let parts = split_plus(self.masked(), r.clone());
        if parts.len() > 1 {
            steps.push(ResolutionStep {
                location: self.loc(r.start),
                rule: ResolutionRule::Concatenation,
            });
            let mut out = String::new();
            for p in parts {
                let mut scratch = Vec::new();
                match self.eval(p, use_offset, &mut scratch)? {
                    Resolved { value: Value::Str(s), .. } => out.push_str(&s),
                    Resolved { value: Value::Int(i), .. } => out.push_str(&i.to_string()),
                    Resolved { value: Value::Bytes(_), .. } => return None,
                }
            }
            return Some(Resolved { value: Value::Str(out), origin: None });
        }
        if IDENT.is_match(&text) {
            return self.eval_ident(&text, r.start, use_offset, steps);
        }
        let compact: String = text.split_whitespace().collect();
        if QUALIFIED.is_match(&text) {
            let mut segs: Vec<&str> = compact.split('.').collect();
            let name = segs.pop()?;
            let class = segs.pop()?;
            if class == "this" {
                return self.eval_ident(name, r.start, use_offset, steps);
            }
            let entry = self.table.qualified(&self.unit.unit.app_id, class, name)?.clone();
            steps.push(ResolutionStep {
                location: entry.location.clone(),
                rule: ResolutionRule::StaticFinalConstant,
            });
            return Some(entry_value(&entry));
        }
        None
    }

    fn eval_ident(
        &mut self,
        name: &str,
        at: usize,
        use_offset: usize,
        steps: &mut Vec<ResolutionStep>,
    ) -> Option<Resolved> {
        let defs = local_defs(self.unit, self.scope.clone(), name);
        if !defs.is_empty() {
            if defs.len() != 1 {
                return None;
            }
            let d = &defs[0];
            if d.kind != DefKind::Simple || d.stmt_end > use_offset {
                return None;
            }
            steps.push(ResolutionStep {
                location: self.loc(d.name_offset),
                rule: ResolutionRule::LocalAssignment,
            });
            return self.eval(d.rhs.clone(), d.name_offset, steps);
        }
        if is_parameter(self.unit, self.scope.clone(), name) {
            return None;
        }
        let _ = at;
        let entry = self
            .table
            .lookup(&self.unit.unit.app_id, &self.unit.unit.file_path, name)?
            .clone();
        steps.push(ResolutionStep {
            location: entry.location.clone(),
            rule: ResolutionRule::StaticFinalConstant,
        });
        Some(entry_value(&entry))
    }
}

fn entry_value(entry: &ConstantEntry) -> Resolved {
    Resolved {
        value: match &entry.value {
            ConstValue::Str(s) => Value::Str(s.clone()),
            ConstValue::Int(i) => Value::Int(*i),
            ConstValue::Bytes(n) => Value::Bytes(*n),
        },
        origin: entry.origin.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DefKind {
    /// `x = expr` or a declaration with initializer.
    Simple,
    /// `x += ...`, `x++`, for-each binding and other writes.
    Opaque,
}

#[derive(Debug, Clone)]
struct LocalDef {
    name_offset: usize,
    rhs: Range<usize>,
    stmt_end: usize,
    kind: DefKind,
}

/// Every textual write to `name` inside `scope`.
fn local_defs(unit: &PreparedUnit, scope: Range<usize>, name: &str) -> Vec<LocalDef> {
    let masked = unit.masked.text.as_str();
    let b = masked.as_bytes();
    let lang = unit.unit.language;
    let mut out = Vec::new();
    let region = &masked[scope.clone()];
    let mut search = 0;
    while let Some(i) = region[search..].find(name) {
        let s = scope.start + search + i;
        let e = s + name.len();
        search += i + name.len();
        if (s > 0 && is_ident_byte(b[s - 1])) || (e < b.len() && is_ident_byte(b[e])) {
            continue;
        }
        let before = masked[..s].trim_end();
        if before.ends_with('.') {
            continue;
        }
        let mut j = e;
        while j < b.len() && (b[j] == b' ' || b[j] == b'\t') {
            j += 1;
        }
        if lang == Language::Kotlin && j < b.len() && b[j] == b':' {
            // `val x: Type = ...`
            let line_end = masked[j..].find('\n').map_or(b.len(), |k| j + k);
            match masked[j..line_end].find('=') {
                Some(k) if b.get(j + k + 1) != Some(&b'=') => j += k,
                _ => {
                    if before.ends_with("val") || before.ends_with("var") {
                        out.push(LocalDef { name_offset: s, rhs: e..e, stmt_end: e, kind: DefKind::Opaque });
                    }
                    continue;
                }
            }
        }
        if j >= b.len() {
            continue;
        }
        let next = b.get(j + 1).copied();
        match b[j] {
            b'=' if next != Some(b'=') => {
                let rhs_start = j + 1;
                let end = statement_end(masked, rhs_start, lang).unwrap_or(scope.end);
                out.push(LocalDef {
                    name_offset: s,
                    rhs: rhs_start..end,
                    stmt_end: end,
                    kind: DefKind::Simple,
                });
            }
            b'+' | b'-' | b'*' | b'/' | b'%' | b'&' | b'|' | b'^'
                if next == Some(b'=') || (next == Some(b[j]) && matches!(b[j], b'+' | b'-')) =>
            {
                out.push(LocalDef { name_offset: s, rhs: e..e, stmt_end: e, kind: DefKind::Opaque });
            }
            b':' if lang == Language::Java && next != Some(b':') => {
                // Enhanced-for binding.
                out.push(LocalDef { name_offset: s, rhs: e..e, stmt_end: e, kind: DefKind::Opaque });
            }
            _ => {
                let after_prefix = before.ends_with("++") || before.ends_with("--");
                if after_prefix {
                    out.push(LocalDef { name_offset: s, rhs: e..e, stmt_end: e, kind: DefKind::Opaque });
                }
            }
        }
    }
    out
}

/// True when `name` is declared in the method header's parameter list.
fn is_parameter(unit: &PreparedUnit, scope: Range<usize>, name: &str) -> bool {
    let masked = unit.masked.text.as_str();
    if scope.start >= masked.len() || masked.as_bytes()[scope.start] != b'{' {
        return false;
    }
    let header = block_header(masked, scope.start);
    let Some(open) = header.find('(') else {
        return false;
    };
    let params = &header[open..];
    params
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .any(|w| w == name)
}

fn algorithm_arg_index(site: &CallSite, rules: &Ruleset) -> Option<usize> {
    rules
        .trigger(&site.matched_pattern_id)
        .and_then(|t| t.arg_index_of_algorithm)
}

/// Resolves the algorithm-name argument of `site`.
pub fn resolve_argument(
    site: &CallSite,
    unit: &PreparedUnit,
    table: &ConstantTable,
    rules: &Ruleset,
) -> Resolution {
    let Some(idx) = algorithm_arg_index(site, rules) else {
        return Resolution::unresolved();
    };
    if idx >= site.argument_exprs.len() {
        return Resolution::unresolved();
    }
    let mut ctx = Ctx {
        unit,
        table,
        scope: site.enclosing_scope.clone(),
        budget: MAX_RESOLUTION_DEPTH,
        exceeded: false,
    };
    let mut steps = Vec::new();
    let (resolved, direct) = if unit.unit.language == Language::Smali {
        let reg = site.argument_exprs[idx].clone();
        let r = smali_eval(&mut ctx, &reg, site.offset, &mut steps);
        (r, steps.is_empty())
    } else {
        let r = site.argument_spans[idx].clone();
        let direct = whole_literal(unit, trim_parens(ctx.masked(), r.clone())).is_some();
        (ctx.eval(r, site.offset, &mut steps), direct)
    };
    let mut out = Resolution::unresolved();
    if ctx.exceeded {
        out.diagnostics.push(Diagnostic::new(
            &unit.unit.app_id,
            &unit.unit.file_path,
            Some(site.location.line),
            format!("resolution depth exceeded {MAX_RESOLUTION_DEPTH} steps"),
        ));
        return out;
    }
    if let Some(Resolved { value: Value::Str(s), origin }) = resolved {
        out.value = Some(s);
        out.origin = origin;
        if direct {
            out.status = ResolutionStatus::ResolvedLiteral;
        } else {
            out.status = ResolutionStatus::ResolvedViaDataflow;
            out.steps = steps;
        }
    }
    out
}

fn smali_eval(
    ctx: &mut Ctx<'_>,
    register: &str,
    before: usize,
    steps: &mut Vec<ResolutionStep>,
) -> Option<Resolved> {
    if !ctx.spend() {
        return None;
    }
    let found = smali::find_def(ctx.masked(), ctx.scope.start, before, register)?;
    match found.def {
        Def::ConstString { quote_offset } => {
            let lit = ctx.unit.masked.literal_at(quote_offset)?;
            Some(Resolved {
                value: Value::Str(lit.value.clone()),
                origin: Some(origin_of(ctx.unit, lit)),
            })
        }
        Def::ConstInt(v) => Some(Resolved { value: Value::Int(v), origin: None }),
        Def::Move { source } => {
            steps.push(ResolutionStep {
                location: ctx.loc(found.operand_offset),
                rule: ResolutionRule::LocalAssignment,
            });
            smali_eval(ctx, &source, found.line_offset, steps)
        }
        Def::StaticField { class, field } => {
            let simple = smali::simple_class_name(&class).to_string();
            let entry = ctx
                .table
                .qualified(&ctx.unit.unit.app_id, &simple, &field)?
                .clone();
            steps.push(ResolutionStep {
                location: entry.location.clone(),
                rule: ResolutionRule::StaticFinalConstant,
            });
            Some(entry_value(&entry))
        }
        Def::NewArray { size_register } => {
            let mut scratch = Vec::new();
            match smali_eval(ctx, &size_register, found.line_offset, &mut scratch)? {
                Resolved { value: Value::Int(n), .. } if n >= 0 => Some(Resolved {
                    value: Value::Bytes(n as usize),
                    origin: None,
                }),
                _ => None,
            }
        }
        Def::Opaque => None,
    }
}

fn eval_arg(
    site: &CallSite,
    unit: &PreparedUnit,
    table: &ConstantTable,
    idx: usize,
) -> Option<Value> {
    let mut ctx = Ctx {
        unit,
        table,
        scope: site.enclosing_scope.clone(),
        budget: MAX_RESOLUTION_DEPTH,
        exceeded: false,
    };
    let mut steps = Vec::new();
    if unit.unit.language == Language::Smali {
        let reg = site.argument_exprs.get(idx)?.clone();
        smali_eval(&mut ctx, &reg, site.offset, &mut steps).map(|r| r.value)
    } else {
        let r = site.argument_spans.get(idx)?.clone();
        ctx.eval(r, site.offset, &mut steps).map(|r| r.value)
    }
}

fn positive_bits(v: i64) -> Option<u32> {
    u32::try_from(v).ok().filter(|&b| b > 0)
}

fn curve_bits(name: &str) -> Option<u32> {
    let lower = name.to_ascii_lowercase();
    let digits: String = lower.chars().filter(|c| c.is_ascii_digit()).collect();
    let n: u32 = digits.get(..3).unwrap_or(&digits).parse().ok()?;
    match n {
        192 | 224 | 256 | 384 | 521 => Some(n),
        _ => None,
    }
}

/// Key size attached to a key-generator factory or a `SecretKeySpec`.
pub fn resolve_key_bits(
    site: &CallSite,
    unit: &PreparedUnit,
    table: &ConstantTable,
) -> Option<u32> {
    use crate::model::ApiKind::*;
    match site.api_kind {
        SecretKeyConstruction => match eval_arg(site, unit, table, 0)? {
            Value::Bytes(n) => positive_bits(8 * n as i64),
            _ => None,
        },
        KeyPairGeneratorFactory | KeyGeneratorFactory => {
            if unit.unit.language == Language::Smali {
                smali_key_bits(site, unit, table)
            } else {
                source_key_bits(site, unit, table)
            }
        }
        _ => None,
    }
}

fn source_key_bits(site: &CallSite, unit: &PreparedUnit, table: &ConstantTable) -> Option<u32> {
    static INIT_CALL: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(r"^\s*\.\s*(?:initialize|init)\s*\(").unwrap());
    let masked = unit.masked.text.as_str();
    let scope_end = site.enclosing_scope.end.min(masked.len());
    // Chained: `KeyGenerator.getInstance("AES").init(256)`.
    let open = if let Some(m) = INIT_CALL.find(&masked[site.end_offset.min(scope_end)..scope_end]) {
        site.end_offset + m.end() - 1
    } else {
        let var = assigned_variable(masked, site.offset)?;
        let pat = Regex::new(&format!(
            r"(?:^|[^\w$.]){}\s*\.\s*(?:initialize|init)\s*\(",
            regex::escape(&var)
        ))
        .ok()?;
        let m = pat.find(&masked[site.end_offset..scope_end])?;
        site.end_offset + m.end() - 1
    };
    let (spans, _) = split_arguments(masked, open)?;
    let first = spans.first()?.clone();
    let init_site = CallSite {
        argument_spans: vec![first.clone()],
        argument_exprs: vec![unit.unit.content[first.clone()].to_string()],
        offset: open,
        ..site.clone()
    };
    if let Some(Value::Int(v)) = eval_arg(&init_site, unit, table, 0) {
        return positive_bits(v);
    }
    // `new RSAKeyGenParameterSpec(2048, ...)` / `new ECGenParameterSpec("secp256r1")`.
    static SPEC_CTOR: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"^(?:new\s+)?(?:[\w$]+\s*\.\s*)*(RSAKeyGenParameterSpec|ECGenParameterSpec)\s*\(").unwrap()
    });
    let arg_masked = &masked[first.clone()];
    let c = SPEC_CTOR.captures(arg_masked)?;
    let inner_open = first.start + c.get(0)?.end() - 1;
    let (inner, _) = split_arguments(masked, inner_open)?;
    let inner_first = inner.first()?.clone();
    let inner_site = CallSite {
        argument_spans: vec![inner_first.clone()],
        argument_exprs: vec![unit.unit.content[inner_first].to_string()],
        offset: inner_open,
        ..site.clone()
    };
    match (&c[1], eval_arg(&inner_site, unit, table, 0)?) {
        ("RSAKeyGenParameterSpec", Value::Int(v)) => positive_bits(v),
        ("ECGenParameterSpec", Value::Str(curve)) => curve_bits(&curve),
        _ => None,
    }
}

/// `kpg = KeyPairGenerator.getInstance(..)` → `kpg`.
fn assigned_variable(masked: &str, call_offset: usize) -> Option<String> {
    let mut before = masked[..call_offset].trim_end();
    // Strip a package qualifier preceding the receiver.
    while before.ends_with('.') {
        before = before[..before.len() - 1].trim_end();
        before = before.trim_end_matches(|c: char| c.is_alphanumeric() || c == '_' || c == '$');
        before = before.trim_end();
    }
    let before = before.strip_suffix('=')?;
    if before.ends_with(['=', '!', '<', '>']) {
        return None;
    }
    let before = before.trim_end();
    let name: String = before
        .chars()
        .rev()
        .take_while(|c| c.is_alphanumeric() || *c == '_' || *c == '$')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    (!name.is_empty()).then_some(name)
}

fn smali_key_bits(site: &CallSite, unit: &PreparedUnit, table: &ConstantTable) -> Option<u32> {
    let masked = unit.masked.text.as_str();
    let scope_end = site.enclosing_scope.end.min(masked.len());
    let mut lines = masked[site.end_offset..scope_end].split_inclusive('\n');
    lines.next();
    let mut pos = site.end_offset;
    let mut receiver: Option<String> = None;
    for line in masked[site.end_offset..scope_end].split_inclusive('\n') {
        let line_start = pos;
        pos += line.len();
        let t = line.trim();
        if receiver.is_none() {
            if let Some(rest) = t.strip_prefix("move-result-object") {
                receiver = Some(rest.trim().to_string());
            }
            continue;
        }
        let Some(inv) = smali::parse_invoke(t) else {
            continue;
        };
        if inv.receiver.as_deref() != receiver.as_deref()
            || !matches!(inv.member.as_str(), "initialize" | "init")
        {
            continue;
        }
        let reg = inv.args.first()?.clone();
        let init_site = CallSite {
            argument_exprs: vec![reg],
            offset: line_start,
            ..site.clone()
        };
        return match eval_arg(&init_site, unit, table, 0)? {
            Value::Int(v) => positive_bits(v),
            _ => None,
        };
    }
    None
}

/// True when argument `idx` is a byte array whose contents are fixed at
/// compile time and not written between construction and this use.
pub fn argument_is_constant_array(
    site: &CallSite,
    unit: &PreparedUnit,
    table: &ConstantTable,
    idx: usize,
) -> bool {
    if !matches!(eval_arg(site, unit, table, idx), Some(Value::Bytes(_))) {
        return false;
    }
    !array_touched_before_use(site, unit, idx)
}

/// True when argument `idx` evaluates to a compile-time constant (number,
/// string or fixed byte array).
pub fn argument_is_constant(
    site: &CallSite,
    unit: &PreparedUnit,
    table: &ConstantTable,
    idx: usize,
) -> bool {
    match eval_arg(site, unit, table, idx) {
        Some(Value::Bytes(_)) => !array_touched_before_use(site, unit, idx),
        Some(_) => true,
        None => false,
    }
}

/// Detects `random.nextBytes(iv)` and similar writes between the array's
/// single definition and its use.
fn array_touched_before_use(site: &CallSite, unit: &PreparedUnit, idx: usize) -> bool {
    let masked = unit.masked.text.as_str();
    if unit.unit.language == Language::Smali {
        let Some(reg) = site.argument_exprs.get(idx) else {
            return false;
        };
        let Some(def) = smali::find_def(masked, site.enclosing_scope.start, site.offset, reg) else {
            return false;
        };
        let between = &masked[def.line_offset..site.offset];
        return between.lines().skip(1).any(|l| {
            let t = l.trim();
            !t.starts_with("fill-array-data") && t.starts_with("invoke") && mentions_register(t, reg)
        });
    }
    let Some(span) = site.argument_spans.get(idx) else {
        return false;
    };
    let name = masked[span.clone()].trim();
    if !IDENT.is_match(name) {
        return false;
    }
    let defs = local_defs(unit, site.enclosing_scope.clone(), name);
    let Some(def) = defs.first() else {
        return false;
    };
    let between = &masked[def.stmt_end.min(site.offset)..site.offset];
    let b = between.as_bytes();
    let mut search = 0;
    while let Some(i) = between[search..].find(name) {
        let s = search + i;
        let e = s + name.len();
        search = e;
        let bounded = (s == 0 || !is_ident_byte(b[s - 1])) && (e >= b.len() || !is_ident_byte(b[e]));
        if bounded {
            return true;
        }
    }
    false
}

fn mentions_register(line: &str, reg: &str) -> bool {
    let Some(open) = line.find('{') else {
        return false;
    };
    let close = line.find('}').unwrap_or(line.len());
    smali::expand_registers(&line[open + 1..close]).iter().any(|r| r == reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanner::{Scanner, SourceUnit};

    fn prep(path: &str, src: &str) -> PreparedUnit {
        PreparedUnit::new(SourceUnit::new("app", path, src).unwrap())
    }

    fn resolve_all(units: &[PreparedUnit]) -> Vec<Resolution> {
        let rules = Ruleset::builtin();
        let (table, _) = build_constant_table(units);
        let scanner = Scanner::new(rules);
        units
            .iter()
            .flat_map(|u| {
                scanner
                    .scan(u)
                    .sites
                    .into_iter()
                    .map(|s| resolve_argument(&s, u, &table, rules))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn direct_literal() {
        let u = prep("A.java", "class A { void f() { Cipher.getInstance(\"AES/CBC/PKCS5Padding\"); } }");
        let r = &resolve_all(&[u])[0];
        assert_eq!(r.status, ResolutionStatus::ResolvedLiteral);
        assert_eq!(r.value.as_deref(), Some("AES/CBC/PKCS5Padding"));
        assert!(r.steps.is_empty());
        assert!(r.origin.is_some());
    }

    #[test]
    fn local_assignment_then_concatenation() {
        let src = "class A {\n  void f() throws Exception {\n    String a = \"SHA-\";\n    String b = a + \"256\";\n    MessageDigest.getInstance(b);\n  }\n}\n";
        let r = &resolve_all(&[prep("A.java", src)])[0];
        assert_eq!(r.status, ResolutionStatus::ResolvedViaDataflow);
        assert_eq!(r.value.as_deref(), Some("SHA-256"));
        let rules: Vec<_> = r.steps.iter().map(|s| s.rule).collect();
        assert_eq!(rules, vec![ResolutionRule::LocalAssignment, ResolutionRule::Concatenation]);
        assert_eq!(r.steps[0].location.line, 4);
        assert!(r.origin.is_none());
    }

    #[test]
    fn dynamic_value_is_unresolved() {
        let u = prep("A.java", "class A { void f() { Cipher.getInstance(algorithmFromServer()); } }");
        assert_eq!(resolve_all(&[u])[0].status, ResolutionStatus::Unresolved);
    }

    #[test]
    fn ambiguous_constant_is_unresolved() {
        let a = prep("A.java", "class A { static final String ALGO = \"AES\"; }");
        let b = prep("B.java", "class B { static final String ALGO = \"DES\"; }");
        let c = prep("C.java", "class C { void f() { Cipher.getInstance(ALGO); } }");
        let (table, _) = build_constant_table(&[a.clone(), b.clone(), c.clone()]);
        assert!(table.is_ambiguous("app", "ALGO"));
        let r = resolve_all(&[a, b, c]);
        assert_eq!(r[0].status, ResolutionStatus::Unresolved);
    }

    #[test]
    fn constant_table_collects_all_languages() {
        let j = prep("A.java", "class A { private static final String ALGO = \"RSA\"; static final int BITS = 0x800; }");
        let k = prep("K.kt", "object K { const val HASH = \"SHA-1\" }");
        let s = prep(
            "smali/C.smali",
            ".class public Lcom/x/C;\n.super Ljava/lang/Object;\n.field public static final MODE:Ljava/lang/String; = \"ECB\"\n.field private static final SIZE:I = 0x10\n",
        );
        let (t, diags) = build_constant_table(&[j, k, s]);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(t.len(), 5);
        assert_eq!(t.lookup("app", "A.java", "ALGO").unwrap().value, ConstValue::Str("RSA".into()));
        assert_eq!(t.lookup("app", "X.java", "BITS").unwrap().value, ConstValue::Int(2048));
        assert_eq!(t.qualified("app", "K", "HASH").unwrap().value, ConstValue::Str("SHA-1".into()));
        assert_eq!(t.qualified("app", "C", "SIZE").unwrap().value, ConstValue::Int(16));
    }

    #[test]
    fn empty_corpus_gives_empty_table() {
        let (t, _) = build_constant_table(&[]);
        assert!(t.is_empty());
    }

    #[test]
    fn multiply_assigned_local_is_unresolved() {
        let src = "class A { void f(boolean x) { String a = \"MD5\"; if (x) { a = \"SHA-256\"; } MessageDigest.getInstance(a); } }";
        assert_eq!(resolve_all(&[prep("A.java", src)])[0].status, ResolutionStatus::Unresolved);
    }

    #[test]
    fn parameter_shadowing_constant_is_unresolved() {
        let src = "class A { static final String ALGO = \"AES\"; void f(String ALGO) { Cipher.getInstance(ALGO); } }";
        assert_eq!(resolve_all(&[prep("A.java", src)])[0].status, ResolutionStatus::Unresolved);
    }

    #[test]
    fn ternary_is_unresolved() {
        let src = "class A { void f(boolean x) { Cipher.getInstance(x ? \"AES\" : \"DES\"); } }";
        assert_eq!(resolve_all(&[prep("A.java", src)])[0].status, ResolutionStatus::Unresolved);
    }

    #[test]
    fn qualified_constant() {
        let a = prep("Consts.java", "public final class Consts { public static final String SIG = \"SHA256withRSA\"; }");
        let b = prep("B.java", "class B { void f() { Signature.getInstance(Consts.SIG); } }");
        let r = &resolve_all(&[a, b])[0];
        assert_eq!(r.value.as_deref(), Some("SHA256withRSA"));
        assert_eq!(r.steps[0].rule, ResolutionRule::StaticFinalConstant);
        assert_eq!(r.origin.as_ref().unwrap().file_path, "Consts.java");
    }

    #[test]
    fn self_reference_terminates() {
        let src = "class A { void f() { String a = a + \"x\"; Cipher.getInstance(a); } }";
        let r = &resolve_all(&[prep("A.java", src)])[0];
        assert_eq!(r.status, ResolutionStatus::Unresolved);
    }

    #[test]
    fn long_chain_hits_depth_cap() {
        let mut body = String::from("String v0 = \"AES\";\n");
        for i in 1..20 {
            body.push_str(&format!("String v{i} = v{};\n", i - 1));
        }
        let src = format!("class A {{ void f() {{\n{body}Cipher.getInstance(v19); }} }}");
        let r = &resolve_all(&[prep("A.java", &src)])[0];
        assert_eq!(r.status, ResolutionStatus::Unresolved);
        assert!(r.diagnostics[0].message.contains("depth"));
    }

    #[test]
    fn smali_move_and_sget() {
        let consts = prep(
            "smali/com/x/Consts.smali",
            ".class public final Lcom/x/Consts;\n.field public static final ALGO:Ljava/lang/String; = \"DES\"\n",
        );
        let user = prep(
            "smali/com/x/U.smali",
            ".class public Lcom/x/U;\n.method public f()V\n    const-string v1, \"MD5\"\n    move-object v0, v1\n    invoke-static {v0}, Ljava/security/MessageDigest;->getInstance(Ljava/lang/String;)Ljava/security/MessageDigest;\n    sget-object v2, Lcom/x/Consts;->ALGO:Ljava/lang/String;\n    invoke-static {v2}, Ljavax/crypto/Cipher;->getInstance(Ljava/lang/String;)Ljavax/crypto/Cipher;\n    return-void\n.end method\n",
        );
        let r = resolve_all(&[consts, user]);
        assert_eq!(r[0].value.as_deref(), Some("MD5"));
        assert_eq!(r[0].steps[0].rule, ResolutionRule::LocalAssignment);
        assert_eq!(r[1].value.as_deref(), Some("DES"));
        assert_eq!(r[1].steps[0].rule, ResolutionRule::StaticFinalConstant);
    }

    fn key_bits_of(path: &str, src: &str) -> Vec<Option<u32>> {
        let u = prep(path, src);
        let (table, _) = build_constant_table(std::slice::from_ref(&u));
        Scanner::new(Ruleset::builtin())
            .scan(&u)
            .sites
            .iter()
            .map(|s| resolve_key_bits(s, &u, &table))
            .collect()
    }

    #[test]
    fn key_bits_from_initialize() {
        let src = "class A { void f() throws Exception {\n KeyPairGenerator kpg = KeyPairGenerator.getInstance(\"RSA\");\n kpg.initialize(1024);\n} }";
        assert_eq!(key_bits_of("A.java", src), vec![Some(1024)]);
    }

    #[test]
    fn key_bits_from_secret_key_array() {
        let src = "class A { void f() { new SecretKeySpec(new byte[16], \"AES\"); } }";
        assert_eq!(key_bits_of("A.java", src), vec![Some(128)]);
    }

    #[test]
    fn key_bits_absent_without_init() {
        let src = "class A { void f() throws Exception { KeyGenerator kg = KeyGenerator.getInstance(\"AES\"); kg.generateKey(); } }";
        assert_eq!(key_bits_of("A.java", src), vec![None]);
    }

    #[test]
    fn key_bits_via_constant_chain_and_spec() {
        let src = "class A { static final int SIZE = 256;\n void f() throws Exception { KeyGenerator.getInstance(\"AES\").init(SIZE);\n KeyPairGenerator g = KeyPairGenerator.getInstance(\"EC\"); g.initialize(new ECGenParameterSpec(\"secp384r1\")); } }";
        assert_eq!(key_bits_of("A.java", src), vec![Some(256), Some(384)]);
    }

    #[test]
    fn smali_key_bits() {
        let src = ".class public La/B;\n.method public f()V\n    const-string v0, \"RSA\"\n    invoke-static {v0}, Ljava/security/KeyPairGenerator;->getInstance(Ljava/lang/String;)Ljava/security/KeyPairGenerator;\n    move-result-object v0\n    const/16 v1, 0x400\n    invoke-virtual {v0, v1}, Ljava/security/KeyPairGenerator;->initialize(I)V\n    return-void\n.end method\n";
        assert_eq!(key_bits_of("smali/a/B.smali", src), vec![Some(1024)]);
    }

    #[test]
    fn constant_array_detection() {
        let src = "class A { void f(SecureRandom r) {\n byte[] fixed = new byte[]{0,1,2,3};\n new IvParameterSpec(fixed);\n byte[] fresh = new byte[16];\n r.nextBytes(fresh);\n new IvParameterSpec(fresh);\n} }";
        let u = prep("A.java", src);
        let (table, _) = build_constant_table(std::slice::from_ref(&u));
        let sites = Scanner::new(Ruleset::builtin()).scan(&u).sites;
        assert!(argument_is_constant_array(&sites[0], &u, &table, 0));
        assert!(!argument_is_constant_array(&sites[1], &u, &table, 0));
    }
}
