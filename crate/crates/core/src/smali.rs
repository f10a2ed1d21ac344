//! Line-level helpers for smali disassembly: invoke parsing, method bounds and
//! backward register-definition lookup.

/// A parsed `invoke-*` instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invoke {
    pub opcode: String,
    pub class: String,
    pub member: String,
    pub descriptor: String,
    /// `this` register for non-static invokes.
    pub receiver: Option<String>,
    /// First register of each declared parameter, in order.
    pub args: Vec<String>,
}

/// Splits a method descriptor's parameter list into field types.
pub fn param_types(descriptor: &str) -> Vec<String> {
    let Some(inner) = descriptor
        .strip_prefix('(')
        .and_then(|d| d.split_once(')'))
        .map(|(p, _)| p)
    else {
        return Vec::new();
    };
    let bytes = inner.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        while i < bytes.len() && bytes[i] == b'[' {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'L' {
            while i < bytes.len() && bytes[i] != b';' {
                i += 1;
            }
        }
        i += 1;
        out.push(inner[start..i.min(inner.len())].to_string());
    }
    out
}

fn is_wide(ty: &str) -> bool {
    ty == "J" || ty == "D"
}

/// Expands `v0, v1` or `v0 .. v3` into individual register names.
pub fn expand_registers(list: &str) -> Vec<String> {
    let list = list.trim();
    if list.is_empty() {
        return Vec::new();
    }
    if let Some((lo, hi)) = list.split_once("..") {
        let (lo, hi) = (lo.trim(), hi.trim());
        let prefix = &lo[..1];
        if let (Ok(a), Ok(b)) = (lo[1..].parse::<u32>(), hi[1..].parse::<u32>()) {
            return (a..=b).map(|n| format!("{prefix}{n}")).collect();
        }
        return Vec::new();
    }
    list.split(',').map(|r| r.trim().to_string()).collect()
}

/// Parses a masked or raw smali line such as
/// `invoke-static {v0}, Ljava/security/MessageDigest;->getInstance(Ljava/lang/String;)Ljava/security/MessageDigest;`.
pub fn parse_invoke(line: &str) -> Option<Invoke> {
    let line = line.trim();
    let rest = line.strip_prefix("invoke-")?;
    let (kind, rest) = rest.split_once(char::is_whitespace)?;
    let rest = rest.trim_start().strip_prefix('{')?;
    let (regs, rest) = rest.split_once('}')?;
    let rest = rest.trim_start().strip_prefix(',')?.trim_start();
    let (class, rest) = rest.split_once("->")?;
    let paren = rest.find('(')?;
    let member = &rest[..paren];
    let descriptor = rest[paren..].trim_end();
    let registers = expand_registers(regs);
    let is_static = kind.starts_with("static");
    let mut iter = registers.into_iter();
    let receiver = if is_static { None } else { iter.next() };
    let remaining: Vec<String> = iter.collect();
    let mut args = Vec::new();
    let mut idx = 0;
    for ty in param_types(descriptor) {
        if idx >= remaining.len() {
            break;
        }
        args.push(remaining[idx].clone());
        idx += if is_wide(&ty) { 2 } else { 1 };
    }
    Some(Invoke {
        opcode: format!("invoke-{kind}"),
        class: class.trim().to_string(),
        member: member.to_string(),
        descriptor: descriptor.to_string(),
        receiver,
        args,
    })
}

/// Byte range from the `.method` line to the end of its `.end method` line.
pub fn method_bounds(text: &str, offset: usize) -> Option<(usize, usize)> {
    let mut start = None;
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.starts_with(".method") {
            start = Some(pos);
        }
        let end = pos + line.len();
        if trimmed.starts_with(".end method") {
            if let Some(s) = start {
                if s <= offset && offset < end {
                    return Some((s, end));
                }
            }
            start = None;
        }
        pos = end;
    }
    None
}

/// One instruction that writes a register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Def {
    /// `const-string vX, "..."`; carries the byte offset of the opening quote.
    ConstString { quote_offset: usize },
    /// `const/4 vX, 0x10` and friends.
    ConstInt(i64),
    /// `sget-object vX, Lpkg/Cls;->NAME:Ljava/lang/String;`
    StaticField { class: String, field: String },
    /// `move-object vX, vY`
    Move { source: String },
    /// `new-array vX, vSize, [B`
    NewArray { size_register: String },
    /// Any other writer.
    Opaque,
}

/// A definition found by [`find_def`], with the offset of its line start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundDef {
    pub def: Def,
    pub line_offset: usize,
    pub operand_offset: usize,
}

const NON_DEF_OPCODES: &[&str] = &[
    "invoke-", "fill-array-data", "aput", "iput", "sput", "if-", "return", "throw",
    "monitor-", "check-cast", "goto", "packed-switch", "sparse-switch", "nop",
    "filled-new-array",
];

/// Parses a signed smali integer literal (`0x10`, `-0x1`, `16`, `0x10L`).
pub fn parse_int(text: &str) -> Option<i64> {
    let t = text.trim().trim_end_matches(['L', 'l', 't', 's']);
    let (neg, t) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t),
    };
    let v = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        t.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn classify_def(opcode: &str, operands: &str, operand_offset: usize) -> Def {
    let parts: Vec<&str> = operands.splitn(2, ',').map(str::trim).collect();
    let second = parts.get(1).copied().unwrap_or("");
    if opcode == "const-string" || opcode == "const-string/jumbo" {
        let q = operands.find('"').map(|i| operand_offset + i);
        return match q {
            Some(quote_offset) => Def::ConstString { quote_offset },
            None => Def::Opaque,
        };
    }
    if opcode.starts_with("const") && !opcode.starts_with("const-class") {
        let Some(mut v) = parse_int(second) else {
            return Def::Opaque;
        };
        if opcode.ends_with("high16") {
            v <<= 16;
        }
        return Def::ConstInt(v);
    }
    if opcode.starts_with("sget") {
        if let Some((class, rest)) = second.split_once("->") {
            let field = rest.split(':').next().unwrap_or(rest);
            return Def::StaticField {
                class: class.to_string(),
                field: field.to_string(),
            };
        }
        return Def::Opaque;
    }
    if opcode.starts_with("move-object") || opcode == "move" || opcode.starts_with("move/") {
        return Def::Move {
            source: second.to_string(),
        };
    }
    if opcode == "new-array" {
        let size = second.split(',').next().unwrap_or("").trim();
        return Def::NewArray {
            size_register: size.to_string(),
        };
    }
    Def::Opaque
}

/// Walks backward from `before` (exclusive) to `scope_start`, returning the
/// nearest instruction writing `register`. Stops with `None` at a branch
/// target label, where more than one definition may reach.
pub fn find_def(
    masked: &str,
    scope_start: usize,
    before: usize,
    register: &str,
) -> Option<FoundDef> {
    let region = &masked[scope_start..before.min(masked.len())];
    let mut line_end = region.len();
    while line_end > 0 {
        let line_start = region[..line_end].rfind('\n').map_or(0, |i| i + 1);
        let line = &region[line_start..line_end];
        let abs_line = scope_start + line_start;
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        if trimmed.starts_with(':') {
            if !trimmed.starts_with(":try_") {
                return None;
            }
        } else if !trimmed.is_empty() && !trimmed.starts_with('.') {
            let opcode_end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
            let opcode = &trimmed[..opcode_end];
            let operands = trimmed[opcode_end..].trim_start();
            let first = operands.split(',').next().unwrap_or("").trim();
            let writes = first == register
                && !NON_DEF_OPCODES.iter().any(|p| opcode.starts_with(p));
            if writes {
                let operand_offset = abs_line + indent + (trimmed.len() - operands.len());
                let def = classify_def(opcode, operands, operand_offset);
                return Some(FoundDef {
                    def,
                    line_offset: abs_line,
                    operand_offset,
                });
            }
        }
        if line_start == 0 {
            break;
        }
        line_end = line_start - 1;
    }
    None
}

/// `Lcom/example/Consts;` → `Consts`.
pub fn simple_class_name(descriptor: &str) -> &str {
    let d = descriptor.trim().trim_start_matches('L').trim_end_matches(';');
    d.rsplit(['/', '$']).next().unwrap_or(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_static_invoke() {
        let inv = parse_invoke("    invoke-static {v0}, Ljava/security/MessageDigest;->getInstance(Ljava/lang/String;)Ljava/security/MessageDigest;").unwrap();
        assert_eq!(inv.class, "Ljava/security/MessageDigest;");
        assert_eq!(inv.member, "getInstance");
        assert_eq!(inv.args, vec!["v0"]);
        assert!(inv.receiver.is_none());
    }

    #[test]
    fn constructor_drops_receiver_and_respects_wide_args() {
        let inv = parse_invoke("invoke-direct {v0, v1, v2}, Ljava/util/Random;-><init>(J)V").unwrap();
        assert_eq!(inv.receiver.as_deref(), Some("v0"));
        assert_eq!(inv.args, vec!["v1"]);
        let inv = parse_invoke("invoke-direct/range {v3 .. v5}, Ljavax/crypto/spec/SecretKeySpec;-><init>([BLjava/lang/String;)V").unwrap();
        assert_eq!(inv.args, vec!["v4", "v5"]);
    }

    #[test]
    fn descriptor_params() {
        assert_eq!(
            param_types("([BLjava/lang/String;I[[J)V"),
            vec!["[B", "Ljava/lang/String;", "I", "[[J"]
        );
        assert!(param_types("()V").is_empty());
    }

    #[test]
    fn finds_const_string_definition() {
        let text = ".method a()V\n    const-string v0, \"MD5\"\n    invoke-static {v0}, LX;->y(Ljava/lang/String;)V\n.end method\n";
        let call = text.find("invoke").unwrap();
        let found = find_def(text, 0, call, "v0").unwrap();
        match found.def {
            Def::ConstString { quote_offset } => assert_eq!(&text[quote_offset..quote_offset + 5], "\"MD5\""),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn label_blocks_lookup() {
        let text = "    const-string v0, \"MD5\"\n    :cond_0\n    invoke-static {v0}, LX;->y()V\n";
        let call = text.find("invoke").unwrap();
        assert!(find_def(text, 0, call, "v0").is_none());
    }

    #[test]
    fn int_literals() {
        assert_eq!(parse_int("0x400"), Some(1024));
        assert_eq!(parse_int("-0x1"), Some(-1));
        assert_eq!(parse_int("16"), Some(16));
    }
}
