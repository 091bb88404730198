//! PEP 440 version parsing, normalization, and total ordering.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Pre-release phase, ordered alpha < beta < release candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PreTag {
    Alpha,
    Beta,
    Rc,
}

impl PreTag {
    fn as_str(self) -> &'static str {
        match self {
            PreTag::Alpha => "a",
            PreTag::Beta => "b",
            PreTag::Rc => "rc",
        }
    }
}

/// One dot-separated segment of a local version label. Numeric segments
/// compare greater than alphanumeric ones, so the variant order matters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum LocalSegment {
    Alpha(String),
    Num(u64),
}

impl fmt::Display for LocalSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalSegment::Alpha(s) => f.write_str(s),
            LocalSegment::Num(n) => write!(f, "{n}"),
        }
    }
}

/// A parsed PEP 440 version. Equality and ordering use the normalized form,
/// so `1.0` and `1.0.0` compare (and hash) equal; the original spelling is
/// kept in `raw`.
#[derive(Debug, Clone)]
pub struct VersionKey {
    raw: String,
    epoch: u64,
    release: Vec<u64>,
    pre: Option<(PreTag, u64)>,
    post: Option<u64>,
    dev: Option<u64>,
    local: Option<Vec<LocalSegment>>,
}

/// Ordering bound used to slot missing pre/post/dev parts around present ones.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Bound<T> {
    NegInf,
    Val(T),
    PosInf,
}

impl VersionKey {
    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn release(&self) -> &[u64] {
        &self.release
    }

    pub fn pre(&self) -> Option<(PreTag, u64)> {
        self.pre
    }

    pub fn post(&self) -> Option<u64> {
        self.post
    }

    pub fn dev(&self) -> Option<u64> {
        self.dev
    }

    pub fn has_local(&self) -> bool {
        self.local.is_some()
    }

    /// Pre-release in the installer sense: has a pre or dev segment.
    pub fn is_prerelease(&self) -> bool {
        self.pre.is_some() || self.dev.is_some()
    }

    /// Copy of this version without its local label, for non-`===` matching.
    pub fn without_local(&self) -> VersionKey {
        let mut v = self.clone();
        v.local = None;
        v
    }

    fn trimmed_release(&self) -> &[u64] {
        let mut end = self.release.len();
        while end > 1 && self.release[end - 1] == 0 {
            end -= 1;
        }
        &self.release[..end]
    }

    fn pre_key(&self) -> Bound<(PreTag, u64)> {
        match self.pre {
            Some(p) => Bound::Val(p),
            // A dev release without pre/post sorts before everything else in
            // the same release segment; a plain final sorts after pre ones.
            None if self.post.is_none() && self.dev.is_some() => Bound::NegInf,
            None => Bound::PosInf,
        }
    }

    fn key(&self) -> (u64, &[u64], Bound<(PreTag, u64)>, Bound<u64>, Bound<u64>, &Option<Vec<LocalSegment>>) {
        let post = match self.post {
            Some(n) => Bound::Val(n),
            None => Bound::NegInf,
        };
        let dev = match self.dev {
            Some(n) => Bound::Val(n),
            None => Bound::PosInf,
        };
        (self.epoch, self.trimmed_release(), self.pre_key(), post, dev, &self.local)
    }
}

impl PartialEq for VersionKey {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for VersionKey {}

impl PartialOrd for VersionKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VersionKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl Hash for VersionKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let (epoch, release, pre, post, dev, local) = self.key();
        epoch.hash(state);
        release.hash(state);
        pre.hash(state);
        post.hash(state);
        dev.hash(state);
        local.hash(state);
    }
}

impl fmt::Display for VersionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.epoch != 0 {
            write!(f, "{}!", self.epoch)?;
        }
        let parts: Vec<String> = self.release.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("."))?;
        if let Some((tag, n)) = self.pre {
            write!(f, "{}{}", tag.as_str(), n)?;
        }
        if let Some(n) = self.post {
            write!(f, ".post{n}")?;
        }
        if let Some(n) = self.dev {
            write!(f, ".dev{n}")?;
        }
        if let Some(local) = &self.local {
            let parts: Vec<String> = local.iter().map(|s| s.to_string()).collect();
            write!(f, "+{}", parts.join("."))?;
        }
        Ok(())
    }
}

impl Serialize for VersionKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for VersionKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_version(&raw).map_err(serde::de::Error::custom)
    }
}

impl FromStr for VersionKey {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_separator(&mut self) -> bool {
        match self.peek() {
            Some(b'.') | Some(b'-') | Some(b'_') => {
                self.pos += 1;
                true
            }
            _ => None::<u8>.is_some(),
        }
    }

    fn number(&mut self) -> Option<u64> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(b'a'..=b'z')) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("")
    }

    fn done(&self) -> bool {
        self.pos >= self.bytes.len()
    }
}

/// Parse a PEP 440 version string.
pub fn parse_version(raw: &str) -> Result<VersionKey, ModelError> {
    let err = |msg: &str| ModelError::MalformedVersion(raw.to_string(), msg.to_string());
    let lowered = raw.trim().to_ascii_lowercase();
    let mut s = lowered.as_str();
    if let Some(rest) = s.strip_prefix('v') {
        s = rest;
    }
    if s.is_empty() {
        return Err(err("empty"));
    }
    let mut cur = Cursor { bytes: s.as_bytes(), pos: 0 };

    let first = cur.number().ok_or_else(|| err("expected leading number"))?;
    let (epoch, mut release) = if cur.eat(b'!') {
        let lead = cur.number().ok_or_else(|| err("expected release after epoch"))?;
        (first, vec![lead])
    } else {
        (0, vec![first])
    };
    while cur.peek() == Some(b'.') {
        let save = cur.pos;
        cur.pos += 1;
        match cur.number() {
            Some(n) => release.push(n),
            None => {
                cur.pos = save;
                break;
            }
        }
    }

    // Pre segment: optional separator, tag word, optional separator, number.
    let mut pre = None;
    let save = cur.pos;
    let had_sep = cur.eat_separator();
    let tag = match cur.word() {
        "a" | "alpha" => Some(PreTag::Alpha),
        "b" | "beta" => Some(PreTag::Beta),
        "rc" | "c" | "pre" | "preview" => Some(PreTag::Rc),
        _ => None,
    };
    match tag {
        Some(t) => {
            cur.eat_separator();
            pre = Some((t, cur.number().unwrap_or(0)));
        }
        None => {
            cur.pos = save;
            let _ = had_sep;
        }
    }

    // Post segment: `.post1`, `rev`, `r`, or the implicit `-1` spelling.
    let mut post = None;
    let save = cur.pos;
    if cur.peek() == Some(b'-') {
        cur.pos += 1;
        match cur.number() {
            Some(n) => post = Some(n),
            None => cur.pos = save,
        }
    }
    if post.is_none() {
        let save = cur.pos;
        cur.eat_separator();
        match cur.word() {
            "post" | "rev" | "r" => {
                cur.eat_separator();
                post = Some(cur.number().unwrap_or(0));
            }
            _ => cur.pos = save,
        }
    }

    let mut dev = None;
    let save = cur.pos;
    cur.eat_separator();
    if cur.word() == "dev" {
        cur.eat_separator();
        dev = Some(cur.number().unwrap_or(0));
    } else {
        cur.pos = save;
    }

    let mut local = None;
    if cur.eat(b'+') {
        let mut segs = Vec::new();
        loop {
            let start = cur.pos;
            while matches!(cur.peek(), Some(b'a'..=b'z') | Some(b'0'..=b'9')) {
                cur.bump();
            }
            if cur.pos == start {
                return Err(err("empty local segment"));
            }
            let text = &s[start..cur.pos];
            segs.push(match text.parse::<u64>() {
                Ok(n) => LocalSegment::Num(n),
                Err(_) => LocalSegment::Alpha(text.to_string()),
            });
            if !cur.eat_separator() {
                break;
            }
        }
        local = Some(segs);
    }

    if !cur.done() {
        return Err(err("trailing characters"));
    }

    Ok(VersionKey { raw: raw.trim().to_string(), epoch, release, pre, post, dev, local })
}
