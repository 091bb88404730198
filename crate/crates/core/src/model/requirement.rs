//! PEP 508 requirement parsing: name, extras, version specifiers, marker.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::marker::{parse_marker, MarkerExpr};
use super::version::{parse_version, VersionKey};
use super::{ModelError, PackageName};

/// Version comparison operator. `~=` is expanded at parse time into its
/// `>=`/`== prefix.*` pair, so it never appears in a parsed requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    /// `===`: raw string equality.
    Arbitrary,
}

impl Operator {
    fn as_str(self) -> &'static str {
        match self {
            Operator::Lt => "<",
            Operator::Le => "<=",
            Operator::Eq => "==",
            Operator::Ne => "!=",
            Operator::Ge => ">=",
            Operator::Gt => ">",
            Operator::Arbitrary => "===",
        }
    }
}

/// One version constraint, e.g. `>=1.0.1` or `==1.4.*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Specifier {
    Cmp(Operator, VersionKey),
    /// `==X.Y.*` (`negated` for `!=X.Y.*`): release-prefix match.
    Prefix { negated: bool, version: VersionKey },
    /// `===<raw>`: verbatim string comparison against the candidate's raw form.
    Arbitrary(String),
}

impl Specifier {
    pub fn parse(raw: &str) -> Result<Vec<Specifier>, ModelError> {
        let err = |msg: &str| ModelError::MalformedRequirement(raw.to_string(), msg.to_string());
        let s = raw.trim();
        let (op, rest) = if let Some(r) = s.strip_prefix("===") {
            (Operator::Arbitrary, r)
        } else if let Some(r) = s.strip_prefix("==") {
            (Operator::Eq, r)
        } else if let Some(r) = s.strip_prefix("~=") {
            let v = parse_version(r.trim())?;
            if v.release().len() < 2 {
                return Err(err("~= needs at least two release segments"));
            }
            // ~=X.Y.Z  ==>  >=X.Y.Z, ==X.Y.*
            let mut prefix = v.release().to_vec();
            prefix.pop();
            let prefix_txt = if v.epoch() != 0 {
                format!(
                    "{}!{}",
                    v.epoch(),
                    prefix.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(".")
                )
            } else {
                prefix.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(".")
            };
            return Ok(vec![
                Specifier::Cmp(Operator::Ge, v),
                Specifier::Prefix { negated: false, version: parse_version(&prefix_txt)? },
            ]);
        } else if let Some(r) = s.strip_prefix("!=") {
            (Operator::Ne, r)
        } else if let Some(r) = s.strip_prefix("<=") {
            (Operator::Le, r)
        } else if let Some(r) = s.strip_prefix(">=") {
            (Operator::Ge, r)
        } else if let Some(r) = s.strip_prefix('<') {
            (Operator::Lt, r)
        } else if let Some(r) = s.strip_prefix('>') {
            (Operator::Gt, r)
        } else {
            return Err(err("missing comparison operator"));
        };
        let rest = rest.trim();
        if op == Operator::Arbitrary {
            if rest.is_empty() {
                return Err(err("=== needs a version string"));
            }
            return Ok(vec![Specifier::Arbitrary(rest.to_string())]);
        }
        if let Some(stem) = rest.strip_suffix(".*") {
            if !matches!(op, Operator::Eq | Operator::Ne) {
                return Err(err("wildcard suffix only valid with == or !="));
            }
            return Ok(vec![Specifier::Prefix {
                negated: op == Operator::Ne,
                version: parse_version(stem)?,
            }]);
        }
        Ok(vec![Specifier::Cmp(op, parse_version(rest)?)])
    }

    /// Whether this specifier explicitly names a pre-release, which lifts the
    /// default pre-release exclusion for the whole constraint set.
    pub fn names_prerelease(&self) -> bool {
        match self {
            Specifier::Cmp(_, v) => v.is_prerelease(),
            Specifier::Prefix { version, .. } => version.is_prerelease(),
            Specifier::Arbitrary(raw) => {
                parse_version(raw).map(|v| v.is_prerelease()).unwrap_or(false)
            }
        }
    }

    pub fn matches(&self, candidate: &VersionKey) -> bool {
        match self {
            Specifier::Arbitrary(raw) => candidate.raw().trim() == raw.trim(),
            Specifier::Cmp(op, bound) => {
                let c = candidate.without_local();
                let same_base = c.epoch() == bound.epoch() && {
                    let trim = |r: &[u64]| {
                        let mut n = r.len();
                        while n > 1 && r[n - 1] == 0 {
                            n -= 1;
                        }
                        r[..n].to_vec()
                    };
                    trim(c.release()) == trim(bound.release())
                };
                match op {
                    // `<V` must not match a pre-release of V itself, and `>V`
                    // must not match a post-release of V itself, unless V
                    // carries the corresponding segment.
                    Operator::Lt => {
                        c < *bound && !(c.is_prerelease() && !bound.is_prerelease() && same_base)
                    }
                    Operator::Gt => {
                        c > *bound && !(c.post().is_some() && bound.post().is_none() && same_base)
                    }
                    Operator::Le => c <= *bound,
                    Operator::Eq => c == *bound,
                    Operator::Ne => c != *bound,
                    Operator::Ge => c >= *bound,
                    Operator::Arbitrary => unreachable!("parsed as Specifier::Arbitrary"),
                }
            }
            Specifier::Prefix { negated, version } => {
                let c = candidate.without_local();
                let hit = c.epoch() == version.epoch() && {
                    let n = version.release().len();
                    let mut padded: Vec<u64> = c.release().to_vec();
                    padded.resize(n.max(padded.len()), 0);
                    padded[..n] == version.release()[..n]
                };
                hit != *negated
            }
        }
    }
}

impl fmt::Display for Specifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Specifier::Cmp(op, v) => write!(f, "{}{}", op.as_str(), v),
            Specifier::Prefix { negated, version } => {
                write!(f, "{}{}.*", if *negated { "!=" } else { "==" }, version)
            }
            Specifier::Arbitrary(raw) => write!(f, "==={raw}"),
        }
    }
}

/// One parsed `requires_dist` entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub name: PackageName,
    pub extras: BTreeSet<String>,
    pub specifiers: Vec<Specifier>,
    pub marker: Option<MarkerExpr>,
}

impl Requirement {
    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.extras.is_empty() {
            let list: Vec<&str> = self.extras.iter().map(|s| s.as_str()).collect();
            write!(f, "[{}]", list.join(","))?;
        }
        let specs: Vec<String> = self.specifiers.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", specs.join(","))?;
        if let Some(marker) = &self.marker {
            write!(f, "; {marker}")?;
        }
        Ok(())
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.'
}

/// Parse one requirement line from `requires_dist`.
pub fn parse_requirement(raw: &str) -> Result<Requirement, ModelError> {
    let err = |msg: &str| ModelError::MalformedRequirement(raw.to_string(), msg.to_string());
    let line = raw.trim();
    if line.is_empty() {
        return Err(err("empty"));
    }

    let (body, marker) = match line.split_once(';') {
        Some((b, m)) => (b.trim(), Some(parse_marker(m.trim(), raw)?)),
        None => (line, None),
    };

    let name_end = body.find(|c: char| !is_name_char(c)).unwrap_or(body.len());
    let name_raw = &body[..name_end];
    if name_raw.is_empty() || name_raw.starts_with(['-', '_', '.']) || name_raw.ends_with(['-', '_', '.'])
    {
        return Err(err("invalid package name"));
    }
    let name = PackageName::new(name_raw);
    let mut rest = body[name_end..].trim_start();

    let mut extras = BTreeSet::new();
    if let Some(r) = rest.strip_prefix('[') {
        let close = r.find(']').ok_or_else(|| err("unterminated extras"))?;
        for extra in r[..close].split(',') {
            let extra = extra.trim();
            if extra.is_empty() {
                return Err(err("empty extra name"));
            }
            if !extra.chars().all(is_name_char) {
                return Err(err("invalid extra name"));
            }
            extras.insert(PackageName::new(extra).as_str().to_string());
        }
        rest = r[close + 1..].trim_start();
    }

    // Specifiers may be wrapped in parentheses per PEP 508.
    let spec_text = if let Some(r) = rest.strip_prefix('(') {
        let close = r.rfind(')').ok_or_else(|| err("unterminated parenthesis"))?;
        if !r[close + 1..].trim().is_empty() {
            return Err(err("trailing characters after specifiers"));
        }
        r[..close].trim()
    } else {
        rest
    };
    let mut specifiers = Vec::new();
    if !spec_text.is_empty() {
        if spec_text.starts_with('@') {
            return Err(err("URL requirements are unsupported"));
        }
        for part in spec_text.split(',') {
            specifiers.extend(Specifier::parse(part)?);
        }
    }

    Ok(Requirement { name, extras, specifiers, marker })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_name() {
        let r = parse_requirement("ndjson").unwrap();
        assert_eq!(r.name.as_str(), "ndjson");
        assert!(r.specifiers.is_empty());
        assert!(r.marker.is_none());
        assert!(r.extras.is_empty());
    }

    #[test]
    fn exact_pin() {
        let r = parse_requirement("voxel51-eta==0.8.1").unwrap();
        assert_eq!(r.name.as_str(), "voxel51-eta");
        assert_eq!(r.specifiers.len(), 1);
        assert!(matches!(&r.specifiers[0], Specifier::Cmp(Operator::Eq, v) if v.raw() == "0.8.1"));
    }

    #[test]
    fn extra_marker() {
        let r = parse_requirement("patool; extra == 'utils'").unwrap();
        assert_eq!(r.name.as_str(), "patool");
        let marker = r.marker.as_ref().unwrap();
        assert!(marker.mentions_extra("utils"));
        // round-trip
        let again = parse_requirement(&r.render()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn extras_and_parenthesized_specs() {
        let r = parse_requirement("Pkg[Extra_One,two] (>=1.0, <2.0)").unwrap();
        assert_eq!(r.name.as_str(), "pkg");
        assert!(r.extras.contains("extra-one"));
        assert!(r.extras.contains("two"));
        assert_eq!(r.specifiers.len(), 2);
    }

    #[test]
    fn compatible_release_expands() {
        let r = parse_requirement("a~=1.4.2").unwrap();
        assert_eq!(r.specifiers.len(), 2);
        assert_eq!(r.render(), "a>=1.4.2,==1.4.*");
        let again = parse_requirement(&r.render()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "-leading", "name==", "name>=1.0,", "name @ https://x", "a[b"] {
            assert!(parse_requirement(bad).is_err(), "{bad:?} should fail");
        }
    }
}
