//! Core value types: package names, PEP 440 versions with a total order,
//! and PEP 508 requirement specifications.

mod marker;
mod requirement;
mod version;

pub use marker::{MarkerEnv, MarkerExpr, MarkerOp, MarkerOperand, MarkerVar};
pub use requirement::{parse_requirement, Operator, Requirement, Specifier};
pub use version::{parse_version, PreTag, VersionKey};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed version {0:?}: {1}")]
    MalformedVersion(String, String),
    #[error("malformed requirement {0:?}: {1}")]
    MalformedRequirement(String, String),
}

/// A normalized package name. Raw names that differ only in case or in runs
/// of `-`, `_`, `.` map to the same `PackageName`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PackageName(String);

impl PackageName {
    pub fn new(raw: &str) -> Self {
        let mut out = String::with_capacity(raw.len());
        let mut in_sep = false;
        for c in raw.trim().chars() {
            if c == '-' || c == '_' || c == '.' {
                in_sep = true;
            } else {
                if in_sep && !out.is_empty() {
                    out.push('-');
                }
                in_sep = false;
                for l in c.to_lowercase() {
                    out.push(l);
                }
            }
        }
        PackageName(out)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PackageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PackageName {
    fn from(raw: &str) -> Self {
        PackageName::new(raw)
    }
}

/// Identity of one release: a package name plus a version.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReleaseId {
    pub name: PackageName,
    pub version: VersionKey,
}

impl ReleaseId {
    pub fn new(name: PackageName, version: VersionKey) -> Self {
        ReleaseId { name, version }
    }
}

impl fmt::Display for ReleaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}=={}", self.name, self.version)
    }
}

/// True iff `v` satisfies every specifier in `specifiers`.
///
/// Pre-release (or dev) versions match only when `allow_prerelease` is set
/// or some specifier itself names a pre-release. Local version labels are
/// ignored by every operator except `===`.
pub fn constraint_matches(v: &VersionKey, specifiers: &[Specifier], allow_prerelease: bool) -> bool {
    let allow = allow_prerelease || specifiers.iter().any(|s| s.names_prerelease());
    if v.is_prerelease() && !allow {
        return false;
    }
    specifiers.iter().all(|s| s.matches(v))
}
