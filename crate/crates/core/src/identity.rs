//! Step identity: whitespace normalisation, the identity digest, and the
//! token-level views of a step used by the lexical baselines and the
//! score-free relabelling rules.

use crate::error::{Error, Result};
use crate::gherkin::{FeatureFile, StepKeyword};
use blake2::{Blake2b512, Digest};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Token emitted for quoted parameters, placeholders and numeric literals.
pub const PARAM: &str = "PARAM";

/// Collapse every whitespace run to one space and trim both ends.
pub fn whitespace_collapse(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// 128-bit step identity: the first 16 bytes of BLAKE2b-512 over the
/// normalised text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepDigest([u8; 16]);

impl StepDigest {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Display for StepDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for StepDigest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDigest(s.to_string());
        if s.len() != 32 || !s.is_ascii() {
            return Err(bad());
        }
        let mut out = [0u8; 16];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        Ok(StepDigest(out))
    }
}

impl Serialize for StepDigest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StepDigest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn step_identity(normalized_text: &str) -> StepDigest {
    let full = Blake2b512::digest(normalized_text.as_bytes());
    let mut out = [0u8; 16];
    out.copy_from_slice(&full[..16]);
    StepDigest(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LicenseClass {
    Permissive,
    Copyleft,
    Unknown,
    Unlicensed,
}

impl LicenseClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LicenseClass::Permissive => "permissive",
            LicenseClass::Copyleft => "copyleft",
            LicenseClass::Unknown => "unknown",
            LicenseClass::Unlicensed => "unlicensed",
        }
    }
}

impl FromStr for LicenseClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "permissive" => Ok(LicenseClass::Permissive),
            "copyleft" => Ok(LicenseClass::Copyleft),
            "unknown" => Ok(LicenseClass::Unknown),
            "unlicensed" => Ok(LicenseClass::Unlicensed),
            other => Err(Error::Invalid(format!("unknown license class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOccurrence {
    pub repo_id: String,
    pub path: String,
    pub line_no: usize,
    pub keyword: StepKeyword,
    pub raw_text: String,
    pub normalized_text: String,
    pub identity_digest: StepDigest,
    pub has_docstring: bool,
    pub has_datatable: bool,
    pub is_background: bool,
    pub is_outline: bool,
    pub license_class: LicenseClass,
}

impl StepOccurrence {
    /// Build an occurrence from its location and phrasing; attachment and
    /// block flags default to false.
    pub fn new(
        repo_id: &str,
        path: &str,
        line_no: usize,
        keyword: StepKeyword,
        raw_text: &str,
    ) -> Self {
        let normalized_text = whitespace_collapse(raw_text);
        StepOccurrence {
            repo_id: repo_id.to_string(),
            path: path.to_string(),
            line_no,
            keyword,
            raw_text: raw_text.to_string(),
            identity_digest: step_identity(&normalized_text),
            normalized_text,
            has_docstring: false,
            has_datatable: false,
            is_background: false,
            is_outline: false,
            license_class: LicenseClass::Unknown,
        }
    }
}

/// Flatten parsed files into the occurrence table, in file then line order.
pub fn occurrences_from_files<F>(files: &[FeatureFile], license_of: F) -> Vec<StepOccurrence>
where
    F: Fn(&str) -> LicenseClass,
{
    let mut out = Vec::new();
    for file in files {
        let license = license_of(&file.repo_id);
        for step in file.steps() {
            let mut occ = StepOccurrence::new(
                &file.repo_id,
                &file.path,
                step.line_no,
                step.keyword,
                &step.raw_text,
            );
            occ.has_docstring = step.has_docstring;
            occ.has_datatable = step.has_datatable;
            occ.is_background = step.is_background;
            occ.is_outline = step.is_outline;
            occ.license_class = license;
            out.push(occ);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    /// Only double-quoted spans become `PARAM`.
    QuotedOnly,
    /// Quoted spans, `<placeholder>`s and standalone numbers become `PARAM`.
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

enum Segment<'a> {
    Param,
    Text(&'a str),
}

fn segments(text: &str, mode: ParamMode) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        let next = rest.char_indices().find_map(|(i, c)| {
            let close = match c {
                '"' => '"',
                '<' if mode == ParamMode::Full => '>',
                _ => return None,
            };
            rest[i + 1..].find(close).map(|j| (i, i + 1 + j + 1))
        });
        match next {
            Some((start, end)) => {
                out.push(Segment::Text(&rest[..start]));
                out.push(Segment::Param);
                rest = &rest[end..];
            }
            None => {
                out.push(Segment::Text(rest));
                return out;
            }
        }
    }
}

fn is_url(word: &str) -> bool {
    word.contains("://") || word.starts_with("www.")
}

pub fn tokenize(text: &str, mode: ParamMode) -> TokenSequence {
    let mut tokens = Vec::new();
    for segment in segments(text, mode) {
        let chunk = match segment {
            Segment::Param => {
                tokens.push(PARAM.to_string());
                continue;
            }
            Segment::Text(chunk) => chunk,
        };
        for word in chunk.split_whitespace() {
            if is_url(word) {
                // A dangling quote (unterminated span) must not survive.
                tokens.push(word.replace('"', "").to_lowercase());
                continue;
            }
            let cleaned: String = word
                .chars()
                .filter_map(|c| match c {
                    '-' => Some(' '),
                    c if c.is_alphanumeric() || c == '_' => Some(c),
                    _ => None,
                })
                .collect();
            for piece in cleaned.split_whitespace() {
                let is_number = piece.chars().all(|c| c.is_ascii_digit());
                if mode == ParamMode::Full && is_number {
                    tokens.push(PARAM.to_string());
                } else {
                    tokens.push(piece.to_lowercase());
                }
            }
        }
    }
    TokenSequence { tokens }
}

/// Variant-to-canonical token map used by the score-free rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable {
    map: BTreeMap<String, String>,
}

impl SynonymTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build from `(variant, canonical)` pairs. Fails when a canonical token
    /// is itself a variant of something else.
    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (variant, canonical) in pairs {
            let variant = variant.into().to_lowercase();
            let canonical = canonical.into().to_lowercase();
            if let Some(prev) = map.insert(variant.clone(), canonical.clone()) {
                if prev != canonical {
                    return Err(Error::Synonyms(format!(
                        "`{variant}` maps to both `{prev}` and `{canonical}`"
                    )));
                }
            }
        }
        for canonical in map.values() {
            if let Some(target) = map.get(canonical) {
                if target != canonical {
                    return Err(Error::Synonyms(format!(
                        "canonical token `{canonical}` is itself mapped to `{target}`"
                    )));
                }
            }
        }
        Ok(SynonymTable { map })
    }

    /// Parse `variant -> canonical` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (variant, canonical) = line.split_once("->").ok_or_else(|| {
                Error::Synonyms(format!("line {}: expected `variant -> canonical`", idx + 1))
            })?;
            let (variant, canonical) = (variant.trim(), canonical.trim());
            if variant.is_empty()
                || canonical.is_empty()
                || variant.contains(char::is_whitespace)
                || canonical.contains(char::is_whitespace)
            {
                return Err(Error::Synonyms(format!(
                    "line {}: both sides must be single tokens",
                    idx + 1
                )));
            }
            pairs.push((variant.to_string(), canonical.to_string()));
        }
        Self::from_pairs(pairs)
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.map.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.map
            .iter()
            .map(|(v, c)| format!("{v} -> {c}\n"))
            .collect()
    }
}

/// Small built-in table of common BDD phrasing variants. This is a
/// reconstruction, not a published list; load a file to override it.
pub fn default_synonyms() -> SynonymTable {
    SynonymTable::from_pairs([
        ("click", "press"),
        ("tap", "press"),
        ("press", "press"),
        ("shown", "displayed"),
        ("visible", "displayed"),
        ("displayed", "displayed"),
        ("go", "navigate"),
        ("navigate", "navigate"),
        ("correct", "valid"),
        ("valid", "valid"),
    ])
    .expect("built-in synonym table is consistent")
}

pub fn canonicalize(tokens: &TokenSequence, synonyms: &SynonymTable) -> TokenSequence {
    tokens
        .iter()
        .map(|t| synonyms.get(t).unwrap_or(t).to_string())
        .collect()
}
