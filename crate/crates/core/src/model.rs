//! Domain types shared across the scanner, resolver, classifier and reporter,
//! plus the grammar for `algorithm/mode/padding` transformation strings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Cryptographic primitive named by the first transformation segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Aes,
    Des,
    TripleDes,
    Rsa,
    Dsa,
    Ec,
    Dh,
    Md5,
    Sha1,
    Sha256,
    Sha512,
    HmacSha1,
    HmacSha256,
    Pbkdf2,
    Kyber,
    Dilithium,
    Other(String),
}

const NAMED_PRIMITIVES: &[(Primitive, &str)] = &[
    (Primitive::Aes, "AES"),
    (Primitive::Des, "DES"),
    (Primitive::TripleDes, "TripleDES"),
    (Primitive::Rsa, "RSA"),
    (Primitive::Dsa, "DSA"),
    (Primitive::Ec, "EC"),
    (Primitive::Dh, "DH"),
    (Primitive::Md5, "MD5"),
    (Primitive::Sha1, "SHA1"),
    (Primitive::Sha256, "SHA256"),
    (Primitive::Sha512, "SHA512"),
    (Primitive::HmacSha1, "HMAC_SHA1"),
    (Primitive::HmacSha256, "HMAC_SHA256"),
    (Primitive::Pbkdf2, "PBKDF2"),
    (Primitive::Kyber, "KYBER"),
    (Primitive::Dilithium, "DILITHIUM"),
];

impl Primitive {
    /// Identifier used in serialized findings and rulesets (`"SHA1"`, `"OTHER(name)"`).
    pub fn name(&self) -> String {
        match self {
            Primitive::Other(name) => format!("OTHER({name})"),
            named => NAMED_PRIMITIVES
                .iter()
                .find(|(p, _)| p == named)
                .map(|(_, n)| (*n).to_string())
                .unwrap_or_default(),
        }
    }

    /// Looks up one of the enum's own names, case-insensitively. Does not consult aliases.
    pub fn from_name(name: &str) -> Option<Primitive> {
        NAMED_PRIMITIVES
            .iter()
            .find(|(_, n)| n.eq_ignore_ascii_case(name))
            .map(|(p, _)| p.clone())
    }

    pub fn is_digest(&self) -> bool {
        matches!(
            self,
            Primitive::Md5 | Primitive::Sha1 | Primitive::Sha256 | Primitive::Sha512
        )
    }

    pub fn is_block_cipher(&self) -> bool {
        matches!(self, Primitive::Aes | Primitive::Des | Primitive::TripleDes)
    }

    pub fn is_asymmetric(&self) -> bool {
        matches!(
            self,
            Primitive::Rsa | Primitive::Dsa | Primitive::Ec | Primitive::Dh
        )
    }

    /// Key sizes considered well-formed for this primitive; `None` means unconstrained.
    pub fn allowed_key_bits(&self) -> Option<&'static [u32]> {
        match self {
            Primitive::Aes => Some(&[128, 192, 256]),
            Primitive::Des => Some(&[56, 64]),
            Primitive::TripleDes => Some(&[112, 168, 192]),
            Primitive::Rsa => Some(&[512, 1024, 2048, 3072, 4096, 8192]),
            Primitive::Dsa => Some(&[512, 1024, 2048, 3072]),
            Primitive::Ec => Some(&[192, 224, 256, 384, 521]),
            Primitive::Dh => Some(&[512, 1024, 2048, 3072, 4096, 8192]),
            _ => None,
        }
    }

    /// Name used in report rows ("SHA-256", "DESede").
    pub fn display_name(&self) -> String {
        match self {
            Primitive::Md5 => "MD5".into(),
            Primitive::Sha1 => "SHA-1".into(),
            Primitive::Sha256 => "SHA-256".into(),
            Primitive::Sha512 => "SHA-512".into(),
            Primitive::TripleDes => "DESede".into(),
            Primitive::HmacSha1 => "HmacSHA1".into(),
            Primitive::HmacSha256 => "HmacSHA256".into(),
            Primitive::Kyber => "Kyber".into(),
            Primitive::Dilithium => "Dilithium".into(),
            Primitive::Other(name) => name.clone(),
            other => other.name(),
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses the serialized form produced by [`Primitive::name`].
impl FromStr for Primitive {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(inner) = s.strip_prefix("OTHER(").and_then(|r| r.strip_suffix(')')) {
            return Ok(Primitive::Other(inner.to_string()));
        }
        Ok(Primitive::from_name(s).unwrap_or_else(|| Primitive::Other(s.to_string())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Ecb,
    Cbc,
    Gcm,
    Ctr,
    Cfb,
    Ofb,
    None,
    Other(String),
}

const NAMED_MODES: &[(Mode, &str)] = &[
    (Mode::Ecb, "ECB"),
    (Mode::Cbc, "CBC"),
    (Mode::Gcm, "GCM"),
    (Mode::Ctr, "CTR"),
    (Mode::Cfb, "CFB"),
    (Mode::Ofb, "OFB"),
    (Mode::None, "NONE"),
];

impl Mode {
    pub fn name(&self) -> String {
        match self {
            Mode::Other(name) => format!("OTHER({name})"),
            named => NAMED_MODES
                .iter()
                .find(|(m, _)| m == named)
                .map(|(_, n)| (*n).to_string())
                .unwrap_or_default(),
        }
    }

    fn parse_segment(segment: &str) -> Mode {
        NAMED_MODES
            .iter()
            .find(|(_, n)| n.eq_ignore_ascii_case(segment))
            .map(|(m, _)| m.clone())
            .unwrap_or_else(|| Mode::Other(segment.to_string()))
    }

    fn display_name(&self) -> String {
        match self {
            Mode::Other(name) => name.clone(),
            named => named.name(),
        }
    }
}

impl FromStr for Mode {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(inner) = s.strip_prefix("OTHER(").and_then(|r| r.strip_suffix(')')) {
            return Ok(Mode::Other(inner.to_string()));
        }
        Ok(Mode::parse_segment(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Padding {
    Pkcs1,
    Pkcs5,
    Pkcs7,
    Oaep,
    NoPadding,
    Other(String),
}

impl Padding {
    pub fn name(&self) -> String {
        match self {
            Padding::Pkcs1 => "PKCS1".into(),
            Padding::Pkcs5 => "PKCS5".into(),
            Padding::Pkcs7 => "PKCS7".into(),
            Padding::Oaep => "OAEP".into(),
            Padding::NoPadding => "NOPADDING".into(),
            Padding::Other(name) => format!("OTHER({name})"),
        }
    }

    fn parse_segment(segment: &str) -> Padding {
        let upper = segment.to_ascii_uppercase();
        let stem = upper.strip_suffix("PADDING").unwrap_or(&upper);
        match stem {
            "PKCS1" => Padding::Pkcs1,
            "PKCS5" => Padding::Pkcs5,
            "PKCS7" => Padding::Pkcs7,
            "NO" | "NO_" | "NOPADDING" => Padding::NoPadding,
            s if s.starts_with("OAEP") => Padding::Oaep,
            _ => Padding::Other(segment.to_string()),
        }
    }
}

impl FromStr for Padding {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(inner) = s.strip_prefix("OTHER(").and_then(|r| r.strip_suffix(')')) {
            return Ok(Padding::Other(inner.to_string()));
        }
        Ok(Padding::parse_segment(s))
    }
}

macro_rules! serde_via_name {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.name())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                Ok(s.parse().unwrap_or_else(|e: std::convert::Infallible| match e {}))
            }
        }
    };
}

serde_via_name!(Primitive);
serde_via_name!(Mode);
serde_via_name!(Padding);

/// Case-insensitive map from spelled names ("SHA-1", "DESede") to primitives.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, Primitive>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: &str, primitive: Primitive) {
        self.entries.insert(alias.to_ascii_lowercase(), primitive);
    }

    pub fn get(&self, name: &str) -> Option<&Primitive> {
        self.entries.get(&name.to_ascii_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolves a primitive segment: enum names, then aliases, then the
    /// `<digest>with<algorithm>` signature form. Unknown names become `Other`.
    pub fn resolve(&self, segment: &str) -> Primitive {
        if let Some(p) = Primitive::from_name(segment) {
            return p;
        }
        if let Some(p) = self.get(segment) {
            return p.clone();
        }
        let lower = segment.to_ascii_lowercase();
        if let Some(idx) = lower.rfind("with") {
            let suffix = &segment[idx + 4..];
            if !suffix.is_empty() {
                if let Some(p) = Primitive::from_name(suffix).or_else(|| self.get(suffix).cloned())
                {
                    return p;
                }
            }
        }
        Primitive::Other(segment.to_string())
    }
}

static DEFAULT_ALIASES: LazyLock<AliasTable> =
    LazyLock::new(|| crate::ruleset::Ruleset::builtin().aliases.clone());

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformationError {
    #[error("transformation string is empty")]
    EmptyTransformation,
    #[error("transformation {0:?} has more than three '/' segments")]
    TooManySegments(String),
}

/// A parsed transformation such as `AES/CBC/PKCS5Padding`.
///
/// `key_bits` is never produced by parsing; the resolver attaches it from a
/// separate initialization call.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub raw: String,
    pub primitive: Primitive,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub padding: Option<Padding>,
    #[serde(default)]
    pub key_bits: Option<u32>,
}

impl AlgorithmSpec {
    /// Equality ignoring the original spelling.
    pub fn same_algorithm(&self, other: &AlgorithmSpec) -> bool {
        self.primitive == other.primitive
            && self.mode == other.mode
            && self.padding == other.padding
            && self.key_bits == other.key_bits
    }

    /// True when a key size is attached and falls outside the primitive's allowed set.
    pub fn key_bits_out_of_set(&self) -> bool {
        match (self.key_bits, self.primitive.allowed_key_bits()) {
            (Some(bits), Some(allowed)) => !allowed.contains(&bits),
            _ => false,
        }
    }

    pub fn with_key_bits(mut self, key_bits: Option<u32>) -> Self {
        self.key_bits = key_bits;
        self
    }
}

/// Parses with the built-in alias table.
pub fn parse_transformation(raw: &str) -> Result<AlgorithmSpec, TransformationError> {
    parse_transformation_with(raw, &DEFAULT_ALIASES)
}

pub fn parse_transformation_with(
    raw: &str,
    aliases: &AliasTable,
) -> Result<AlgorithmSpec, TransformationError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(TransformationError::EmptyTransformation);
    }
    let segments: Vec<&str> = trimmed.split('/').map(str::trim).collect();
    if segments.len() > 3 {
        return Err(TransformationError::TooManySegments(raw.to_string()));
    }
    let primitive = aliases.resolve(segments[0]);
    let (mode, padding) = if primitive.is_digest() {
        (None, None)
    } else {
        (
            segments.get(1).map(|s| Mode::parse_segment(s)),
            segments.get(2).map(|s| Padding::parse_segment(s)),
        )
    };
    Ok(AlgorithmSpec {
        raw: raw.to_string(),
        primitive,
        mode,
        padding,
        key_bits: None,
    })
}

/// Grouping key for corpus tables: digests and asymmetric primitives collapse
/// to the primitive, block ciphers to `primitive/mode`.
pub fn canonical_algorithm_key(spec: &AlgorithmSpec) -> String {
    let base = spec.primitive.display_name();
    if spec.primitive.is_block_cipher() {
        if let Some(mode) = &spec.mode {
            return format!("{base}/{}", mode.display_name());
        }
    }
    base
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApiKind {
    CipherFactory,
    DigestFactory,
    KeyPairGeneratorFactory,
    KeyGeneratorFactory,
    MacFactory,
    SignatureFactory,
    SecretKeyConstruction,
    IvConstruction,
    RandomConstruction,
    PqcLibraryReference,
}

impl ApiKind {
    pub const ALL: [ApiKind; 10] = [
        ApiKind::CipherFactory,
        ApiKind::DigestFactory,
        ApiKind::KeyPairGeneratorFactory,
        ApiKind::KeyGeneratorFactory,
        ApiKind::MacFactory,
        ApiKind::SignatureFactory,
        ApiKind::SecretKeyConstruction,
        ApiKind::IvConstruction,
        ApiKind::RandomConstruction,
        ApiKind::PqcLibraryReference,
    ];

    /// `getInstance`-style factories.
    pub fn is_factory(self) -> bool {
        matches!(
            self,
            ApiKind::CipherFactory
                | ApiKind::DigestFactory
                | ApiKind::KeyPairGeneratorFactory
                | ApiKind::KeyGeneratorFactory
                | ApiKind::MacFactory
                | ApiKind::SignatureFactory
        )
    }

    /// Kinds whose findings name an algorithm and therefore get a safety label
    /// and a row in corpus tables. The rest only carry misuse or PQC context.
    pub fn names_algorithm(self) -> bool {
        self.is_factory() || self == ApiKind::SecretKeyConstruction
    }

    pub fn takes_key_size(self) -> bool {
        matches!(
            self,
            ApiKind::KeyPairGeneratorFactory
                | ApiKind::KeyGeneratorFactory
                | ApiKind::SecretKeyConstruction
        )
    }
}

impl fmt::Display for ApiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceLocation {
    pub app_id: String,
    pub file_path: String,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocationError {
    #[error("line and column are 1-based, got {line}:{column}")]
    ZeroPosition { line: u32, column: u32 },
    #[error("path {0:?} escapes its root")]
    ParentSegment(String),
}

impl SourceLocation {
    pub fn new(
        app_id: impl Into<String>,
        file_path: &str,
        line: u32,
        column: u32,
    ) -> Result<Self, LocationError> {
        if line == 0 || column == 0 {
            return Err(LocationError::ZeroPosition { line, column });
        }
        let file_path = normalize_rel_path(file_path)
            .ok_or_else(|| LocationError::ParentSegment(file_path.to_string()))?;
        Ok(Self {
            app_id: app_id.into(),
            file_path,
            line,
            column,
        })
    }
}

/// Converts separators to `/`, drops `.` segments, and rejects `..` or absolute paths.
pub fn normalize_rel_path(path: &str) -> Option<String> {
    let unified = path.replace('\\', "/");
    if unified.starts_with('/') || unified.contains(':') && unified.chars().nth(1) == Some(':') {
        return None;
    }
    let mut parts = Vec::new();
    for seg in unified.split('/') {
        match seg {
            "" | "." => {}
            ".." => return None,
            s => parts.push(s),
        }
    }
    if parts.is_empty() {
        return None;
    }
    Some(parts.join("/"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    QuantumSafe,
    QuantumVulnerable,
    ConditionallySafe,
    Unknown,
}

impl Label {
    /// Table symbol: ✓, ✗, ✓*, ?
    pub fn symbol(self) -> &'static str {
        match self {
            Label::QuantumSafe => "✓",
            Label::QuantumVulnerable => "✗",
            Label::ConditionallySafe => "✓*",
            Label::Unknown => "?",
        }
    }

    /// Ordering used when one row mixes labels; the weakest claim wins.
    pub fn caution_rank(self) -> u8 {
        match self {
            Label::QuantumSafe => 0,
            Label::ConditionallySafe => 1,
            Label::Unknown => 2,
            Label::QuantumVulnerable => 3,
        }
    }
}

/// Rationale id stamped on findings that bypass classification because their
/// algorithm argument could not be resolved.
pub const UNRESOLVED_RULE_ID: &str = "builtin:unresolved";
/// Rationale id for IV, RNG and PQC-reference findings, which name no algorithm.
pub const NOT_APPLICABLE_RULE_ID: &str = "builtin:not-applicable";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SafetyLabel {
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    pub rationale_rule_id: String,
}

impl SafetyLabel {
    pub fn unknown(rationale_rule_id: &str) -> Self {
        Self {
            label: Label::Unknown,
            condition: None,
            rationale_rule_id: rationale_rule_id.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResolutionStatus {
    ResolvedLiteral,
    ResolvedViaDataflow,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MisuseFlag {
    EcbMode,
    StaticIv,
    SeededInsecureRandom,
    ShortAsymmetricKey,
    UnusedPqcImport,
}

impl MisuseFlag {
    pub const ALL: [MisuseFlag; 5] = [
        MisuseFlag::EcbMode,
        MisuseFlag::StaticIv,
        MisuseFlag::SeededInsecureRandom,
        MisuseFlag::ShortAsymmetricKey,
        MisuseFlag::UnusedPqcImport,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResolutionRule {
    DirectLiteral,
    LocalAssignment,
    StaticFinalConstant,
    Concatenation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResolutionStep {
    pub location: SourceLocation,
    pub rule: ResolutionRule,
}

/// The single string literal a resolved value was read from. Byte offsets
/// cover the literal's contents, excluding quotes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiteralOrigin {
    pub file_path: String,
    pub line: u32,
    pub start: usize,
    pub end: usize,
}

pub const EVIDENCE_MAX_CHARS: usize = 200;

/// A non-fatal problem noticed while scanning or resolving.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub app_id: String,
    pub file_path: String,
    pub line: Option<u32>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(app_id: &str, file_path: &str, line: Option<u32>, message: impl Into<String>) -> Self {
        Self {
            app_id: app_id.to_string(),
            file_path: file_path.to_string(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.app_id, self.file_path)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// One detected crypto API use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub location: SourceLocation,
    pub api_kind: ApiKind,
    pub resolution: ResolutionStatus,
    pub spec: Option<AlgorithmSpec>,
    pub safety: SafetyLabel,
    pub misuse_flags: BTreeSet<MisuseFlag>,
    pub evidence: String,
    #[serde(default)]
    pub resolution_steps: Vec<ResolutionStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal_origin: Option<LiteralOrigin>,
}

impl Finding {
    pub fn names_algorithm(&self) -> bool {
        self.api_kind.names_algorithm()
    }

    pub fn primitive(&self) -> Option<&Primitive> {
        self.spec.as_ref().map(|s| &s.primitive)
    }

    /// Checks the cross-field invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        if (self.resolution == ResolutionStatus::Unresolved) != self.spec.is_none() {
            return Err("spec must be absent iff unresolved".into());
        }
        if self.resolution == ResolutionStatus::Unresolved && self.safety.label != Label::Unknown {
            return Err("unresolved finding must be labeled Unknown".into());
        }
        if self.misuse_flags.contains(&MisuseFlag::EcbMode)
            && self.spec.as_ref().and_then(|s| s.mode.as_ref()) != Some(&Mode::Ecb)
        {
            return Err("EcbMode flag requires ECB mode".into());
        }
        if (self.safety.label == Label::ConditionallySafe) != self.safety.condition.is_some() {
            return Err("condition present iff ConditionallySafe".into());
        }
        if self.evidence.chars().count() > EVIDENCE_MAX_CHARS {
            return Err("evidence exceeds 200 characters".into());
        }
        Ok(())
    }
}

/// Trims and truncates a source line for `Finding::evidence`.
pub fn make_evidence(line: &str) -> String {
    line.trim().chars().take(EVIDENCE_MAX_CHARS).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(primitive: Primitive, mode: Option<Mode>, padding: Option<Padding>) -> AlgorithmSpec {
        AlgorithmSpec {
            raw: String::new(),
            primitive,
            mode,
            padding,
            key_bits: None,
        }
    }

    #[test]
    fn parses_full_transformation() {
        let s = parse_transformation("AES/CBC/PKCS5Padding").unwrap();
        assert_eq!(s.primitive, Primitive::Aes);
        assert_eq!(s.mode, Some(Mode::Cbc));
        assert_eq!(s.padding, Some(Padding::Pkcs5));
        assert_eq!(s.raw, "AES/CBC/PKCS5Padding");
    }

    #[test]
    fn digest_has_no_mode_or_padding() {
        let s = parse_transformation("MD5").unwrap();
        assert_eq!(s.primitive, Primitive::Md5);
        assert!(s.mode.is_none() && s.padding.is_none());
    }

    #[test]
    fn empty_and_overlong_inputs_fail() {
        assert_eq!(
            parse_transformation("   "),
            Err(TransformationError::EmptyTransformation)
        );
        assert_eq!(
            parse_transformation(""),
            Err(TransformationError::EmptyTransformation)
        );
        assert!(matches!(
            parse_transformation("A/B/C/D"),
            Err(TransformationError::TooManySegments(_))
        ));
    }

    #[test]
    fn unknown_names_are_preserved() {
        let s = parse_transformation("Frobnicate/XYZ").unwrap();
        assert_eq!(s.primitive, Primitive::Other("Frobnicate".into()));
        assert_eq!(s.mode, Some(Mode::Other("XYZ".into())));
        assert_eq!(s.padding, None);
    }

    #[test]
    fn aliases_and_signature_forms() {
        let a = parse_transformation("SHA1").unwrap();
        let b = parse_transformation("SHA-1").unwrap();
        let c = parse_transformation("sha-1").unwrap();
        assert!(a.same_algorithm(&b) && b.same_algorithm(&c));
        assert_eq!(
            parse_transformation("DESede/CBC/PKCS5Padding").unwrap().primitive,
            Primitive::TripleDes
        );
        assert_eq!(parse_transformation("3DES").unwrap().primitive, Primitive::TripleDes);
        assert_eq!(parse_transformation("SHA256withRSA").unwrap().primitive, Primitive::Rsa);
        assert_eq!(parse_transformation("SHA256withECDSA").unwrap().primitive, Primitive::Ec);
        let oaep = parse_transformation("RSA/ECB/OAEPWithSHA-256AndMGF1Padding").unwrap();
        assert_eq!(oaep.padding, Some(Padding::Oaep));
        assert_eq!(
            parse_transformation("AES/GCM/NoPadding").unwrap().padding,
            Some(Padding::NoPadding)
        );
    }

    #[test]
    fn canonical_keys_match_table_granularity() {
        let aes = parse_transformation("AES/CBC/PKCS5Padding").unwrap();
        assert_eq!(canonical_algorithm_key(&aes), "AES/CBC");
        let rsa = parse_transformation("RSA/ECB/PKCS1Padding").unwrap();
        assert_eq!(canonical_algorithm_key(&rsa), "RSA");
        assert_eq!(
            canonical_algorithm_key(&spec(Primitive::Sha256, None, None)),
            "SHA-256"
        );
        assert_eq!(canonical_algorithm_key(&parse_transformation("SHA-1").unwrap()), "SHA-1");
        assert_eq!(canonical_algorithm_key(&parse_transformation("AES").unwrap()), "AES");
        assert_eq!(
            canonical_algorithm_key(&parse_transformation("Frobnicate/XYZ").unwrap()),
            "Frobnicate"
        );
    }

    #[test]
    fn key_bits_outside_allowed_set_are_kept_but_flagged() {
        let s = parse_transformation("AES").unwrap().with_key_bits(Some(100));
        assert_eq!(s.key_bits, Some(100));
        assert!(s.key_bits_out_of_set());
        let ok = parse_transformation("AES").unwrap().with_key_bits(Some(256));
        assert!(!ok.key_bits_out_of_set());
    }

    #[test]
    fn location_rejects_parent_segments_and_zero() {
        assert!(SourceLocation::new("a", "src/../x.java", 1, 1).is_err());
        assert!(SourceLocation::new("a", "x.java", 0, 1).is_err());
        let loc = SourceLocation::new("a", "src\\main\\X.java", 3, 4).unwrap();
        assert_eq!(loc.file_path, "src/main/X.java");
    }

    #[test]
    fn serialized_names_round_trip() {
        for p in [Primitive::TripleDes, Primitive::HmacSha1, Primitive::Other("X/Y".into())] {
            let s = p.name();
            assert_eq!(s.parse::<Primitive>().unwrap(), p);
        }
        let spec = parse_transformation("Frobnicate/XYZ/Zap").unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: AlgorithmSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
