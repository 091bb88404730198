//! License normalization to SPDX identifiers, permissiveness categories, and
//! one-way incompatibility queries against a compatibility matrix.
//!
//! Normalization applies the steps in strict order: registry classifier tags,
//! exact license-field mapping, keyword rules, an optional external detector,
//! and finally `Unrecognizable`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ReleaseId;

/// Canonical SPDX license identifier, e.g. `Apache-2.0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpdxId(String);

impl SpdxId {
    pub fn new(id: &str) -> Self {
        SpdxId(id.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SpdxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SpdxId {
    fn from(s: &str) -> Self {
        SpdxId::new(s)
    }
}

/// Outcome of license normalization for one release.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LicenseInfo {
    Known(SpdxId),
    Unrecognizable,
}

impl LicenseInfo {
    pub fn known(id: &str) -> Self {
        LicenseInfo::Known(SpdxId::new(id))
    }

    pub fn spdx(&self) -> Option<&SpdxId> {
        match self {
            LicenseInfo::Known(id) => Some(id),
            LicenseInfo::Unrecognizable => None,
        }
    }
}

impl fmt::Display for LicenseInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LicenseInfo::Known(id) => f.write_str(id.as_str()),
            LicenseInfo::Unrecognizable => f.write_str("Unrecognizable"),
        }
    }
}

/// Permissiveness level, ordered least to most restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LicenseCategory {
    Permissive,
    WeakCopyleft,
    StrongCopyleft,
    Unknown,
}

impl LicenseCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            LicenseCategory::Permissive => "Permissive",
            LicenseCategory::WeakCopyleft => "Weak Copyleft",
            LicenseCategory::StrongCopyleft => "Strong Copyleft",
            LicenseCategory::Unknown => "Unknown",
        }
    }
}

/// Result of checking a dependency license against the root license.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompatibilityVerdict {
    Compatible,
    Incompatible,
    Unknown,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("license {0} is not covered by the loaded compatibility matrix")]
pub struct OutOfMatrix(pub SpdxId);

#[derive(Debug, Error)]
pub enum LicensingError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed data file {path}: {message}")]
    Malformed { path: String, message: String },
}

/// Lint findings over matrix data. Self-incompatibility is always an error;
/// a permissive license appearing as an incompatibility source is reported as
/// a warning because a small number of real pairs (the Apache-2.0 / GPL-2.0
/// patent clash) genuinely violate the rule of thumb.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum MatrixLint {
    SelfIncompatible(SpdxId),
    PermissiveSource { source: SpdxId, target: SpdxId },
    UncategorizedLicense(SpdxId),
}

#[derive(Debug, Deserialize)]
struct MatrixFile {
    #[serde(default)]
    version: Option<String>,
    licenses: Vec<String>,
    categories: BTreeMap<String, String>,
    incompatible: Vec<(String, String)>,
}

/// The set of licenses the tool reasons about, their categories, and the
/// ordered one-way incompatible pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatibilityMatrix {
    version: String,
    licenses: BTreeSet<SpdxId>,
    categories: BTreeMap<SpdxId, LicenseCategory>,
    incompatible: BTreeSet<(SpdxId, SpdxId)>,
}

const BUILTIN_MATRIX: &str = include_str!("../data/matrix.json");

impl CompatibilityMatrix {
    pub fn builtin() -> Self {
        Self::from_json_str(BUILTIN_MATRIX, "<builtin matrix>")
            .expect("builtin matrix data is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, LicensingError> {
        let text = std::fs::read_to_string(path).map_err(|source| LicensingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, LicensingError> {
        let file: MatrixFile =
            serde_json::from_str(text).map_err(|e| LicensingError::Malformed {
                path: origin.to_string(),
                message: e.to_string(),
            })?;
        let licenses: BTreeSet<SpdxId> =
            file.licenses.iter().map(|l| canonical_spdx(l)).collect();
        let mut categories = BTreeMap::new();
        for (id, cat) in &file.categories {
            let cat = match cat.as_str() {
                "permissive" => LicenseCategory::Permissive,
                "weak" => LicenseCategory::WeakCopyleft,
                "strong" => LicenseCategory::StrongCopyleft,
                other => {
                    return Err(LicensingError::Malformed {
                        path: origin.to_string(),
                        message: format!("unknown category {other:?} for {id}"),
                    })
                }
            };
            categories.insert(canonical_spdx(id), cat);
        }
        let incompatible = file
            .incompatible
            .iter()
            .map(|(a, b)| (canonical_spdx(a), canonical_spdx(b)))
            .collect();
        Ok(CompatibilityMatrix {
            version: file.version.unwrap_or_else(|| "unversioned".to_string()),
            licenses,
            categories,
            incompatible,
        })
    }

    /// Assemble a matrix from already-validated parts, e.g. for generated
    /// test universes.
    pub fn from_parts(
        version: &str,
        licenses: BTreeSet<SpdxId>,
        categories: BTreeMap<SpdxId, LicenseCategory>,
        incompatible: BTreeSet<(SpdxId, SpdxId)>,
    ) -> Self {
        CompatibilityMatrix { version: version.to_string(), licenses, categories, incompatible }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn licenses(&self) -> impl Iterator<Item = &SpdxId> {
        self.licenses.iter()
    }

    pub fn len(&self) -> usize {
        self.licenses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.licenses.is_empty()
    }

    pub fn contains(&self, id: &SpdxId) -> bool {
        self.licenses.contains(id)
    }

    /// Raw ordered pair lookup.
    pub fn pair_incompatible(&self, source: &SpdxId, target: &SpdxId) -> bool {
        self.incompatible.contains(&(source.clone(), target.clone()))
    }

    pub fn category_of(&self, id: &SpdxId) -> Option<LicenseCategory> {
        self.categories.get(id).copied()
    }

    pub fn lint(&self) -> Vec<MatrixLint> {
        let mut out = Vec::new();
        for id in &self.licenses {
            if self.incompatible.contains(&(id.clone(), id.clone())) {
                out.push(MatrixLint::SelfIncompatible(id.clone()));
            }
            if !self.categories.contains_key(id) {
                out.push(MatrixLint::UncategorizedLicense(id.clone()));
            }
        }
        for (source, target) in &self.incompatible {
            if self.categories.get(source) == Some(&LicenseCategory::Permissive) {
                out.push(MatrixLint::PermissiveSource {
                    source: source.clone(),
                    target: target.clone(),
                });
            }
        }
        out
    }
}

/// Unknown if either side is unrecognizable; Incompatible iff the ordered
/// (dependency, root) pair is in the matrix; out-of-matrix ids are an error
/// that callers surface as Unknown plus a diagnostic.
pub fn is_incompatible(
    dep_license: &LicenseInfo,
    root_license: &LicenseInfo,
    matrix: &CompatibilityMatrix,
) -> Result<CompatibilityVerdict, OutOfMatrix> {
    let (dep, root) = match (dep_license, root_license) {
        (LicenseInfo::Known(d), LicenseInfo::Known(r)) => (d, r),
        _ => return Ok(CompatibilityVerdict::Unknown),
    };
    for id in [dep, root] {
        if !matrix.contains(id) {
            return Err(OutOfMatrix(id.clone()));
        }
    }
    if matrix.pair_incompatible(dep, root) {
        Ok(CompatibilityVerdict::Incompatible)
    } else {
        Ok(CompatibilityVerdict::Compatible)
    }
}

pub fn categorize(
    license: &LicenseInfo,
    matrix: &CompatibilityMatrix,
) -> Result<LicenseCategory, OutOfMatrix> {
    match license {
        LicenseInfo::Unrecognizable => Ok(LicenseCategory::Unknown),
        LicenseInfo::Known(id) => matrix
            .category_of(id)
            .ok_or_else(|| OutOfMatrix(id.clone())),
    }
}

/// Registry classifier tags that encode a license, mapped to SPDX.
const CLASSIFIER_MAP: &[(&str, &str)] = &[
    ("License :: OSI Approved :: MIT License", "MIT"),
    ("License :: OSI Approved :: Apache Software License", "Apache-2.0"),
    ("License :: OSI Approved :: BSD License", "BSD-3-Clause"),
    ("License :: OSI Approved :: ISC License (ISCL)", "ISC"),
    ("License :: OSI Approved :: GNU General Public License v2 (GPLv2)", "GPL-2.0-only"),
    ("License :: OSI Approved :: GNU General Public License v2 or later (GPLv2+)", "GPL-2.0-or-later"),
    ("License :: OSI Approved :: GNU General Public License v3 (GPLv3)", "GPL-3.0-only"),
    ("License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)", "GPL-3.0-or-later"),
    ("License :: OSI Approved :: GNU Lesser General Public License v2 (LGPLv2)", "LGPL-2.1-only"),
    ("License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)", "LGPL-3.0-only"),
    ("License :: OSI Approved :: GNU Affero General Public License v3", "AGPL-3.0-only"),
    ("License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)", "AGPL-3.0-only"),
    ("License :: OSI Approved :: Mozilla Public License 2.0 (MPL 2.0)", "MPL-2.0"),
    ("License :: OSI Approved :: Eclipse Public License 1.0 (EPL-1.0)", "EPL-1.0"),
    ("License :: OSI Approved :: Python Software Foundation License", "Python-2.0"),
    ("License :: OSI Approved :: The Unlicense (Unlicense)", "Unlicense"),
];

/// Deprecated or shorthand SPDX spellings mapped to canonical ids, e.g.
/// `GPL-2.0+` to `GPL-2.0-or-later`.
const SPDX_ALIASES: &[(&str, &str)] = &[
    ("GPL-2.0", "GPL-2.0-only"),
    ("GPL-2.0+", "GPL-2.0-or-later"),
    ("GPL-3.0", "GPL-3.0-only"),
    ("GPL-3.0+", "GPL-3.0-or-later"),
    ("LGPL-2.1", "LGPL-2.1-only"),
    ("LGPL-2.1+", "LGPL-2.1-or-later"),
    ("LGPL-3.0", "LGPL-3.0-only"),
    ("LGPL-3.0+", "LGPL-3.0-or-later"),
    ("AGPL-3.0", "AGPL-3.0-only"),
    ("AGPL-3.0+", "AGPL-3.0-or-later"),
];

pub fn canonical_spdx(raw: &str) -> SpdxId {
    let trimmed = raw.trim();
    for (alias, canonical) in SPDX_ALIASES {
        if trimmed.eq_ignore_ascii_case(alias) {
            return SpdxId::new(canonical);
        }
    }
    SpdxId::new(trimmed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub license: SpdxId,
    pub name_keywords: Vec<String>,
    #[serde(default)]
    pub version_keywords: Vec<String>,
    #[serde(default)]
    pub must_have: Vec<String>,
    #[serde(default)]
    pub must_not_have: Vec<String>,
}

impl KeywordRule {
    fn fires(&self, haystack: &str) -> bool {
        let any = |kws: &[String]| kws.iter().any(|k| haystack.contains(k.as_str()));
        if !any(&self.name_keywords) {
            return false;
        }
        if !self.version_keywords.is_empty() && !any(&self.version_keywords) {
            return false;
        }
        if !self.must_have.iter().all(|k| haystack.contains(k.as_str())) {
            return false;
        }
        !any(&self.must_not_have)
    }
}

#[derive(Debug, Deserialize)]
struct KeywordFile {
    rules: Vec<KeywordRule>,
}

const BUILTIN_KEYWORDS: &str = include_str!("../data/keywords.json");

/// The lookup tables driving normalization. The field map starts empty and is
/// filled by [`build_field_mapping`] over a loaded index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizationTables {
    pub classifier_to_spdx: BTreeMap<String, SpdxId>,
    pub field_to_spdx: BTreeMap<String, SpdxId>,
    pub keyword_rules: Vec<KeywordRule>,
}

impl NormalizationTables {
    pub fn builtin() -> Self {
        Self::with_keyword_json(BUILTIN_KEYWORDS, "<builtin keywords>")
            .expect("builtin keyword data is valid")
    }

    pub fn with_keyword_file(path: &Path) -> Result<Self, LicensingError> {
        let text = std::fs::read_to_string(path).map_err(|source| LicensingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::with_keyword_json(&text, &path.display().to_string())
    }

    fn with_keyword_json(text: &str, origin: &str) -> Result<Self, LicensingError> {
        let file: KeywordFile =
            serde_json::from_str(text).map_err(|e| LicensingError::Malformed {
                path: origin.to_string(),
                message: e.to_string(),
            })?;
        Ok(NormalizationTables {
            classifier_to_spdx: CLASSIFIER_MAP
                .iter()
                .map(|(c, id)| (c.to_string(), SpdxId::new(id)))
                .collect(),
            field_to_spdx: BTreeMap::new(),
            keyword_rules: file.rules,
        })
    }

    /// SPDX ids derived from a release's classifier tags, deduplicated.
    fn classifier_ids(&self, classifiers: &[String]) -> BTreeSet<SpdxId> {
        classifiers
            .iter()
            .filter_map(|c| self.classifier_to_spdx.get(c.trim()))
            .cloned()
            .collect()
    }
}

/// Which normalization step produced a release's license.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizationStep {
    /// The record shipped a pre-normalized SPDX id.
    Preset,
    Classifier,
    FieldMap,
    Keyword,
    Detector,
    Unrecognized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedLicense {
    pub info: LicenseInfo,
    pub step: NormalizationStep,
    pub diagnostic: Option<String>,
}

/// Hook for an external file-scanning license detector (a ScanCode-like tool
/// driven via subprocess). Implementations receive the release identity and
/// are responsible for fetching whatever file tree they need.
pub trait LicenseDetector {
    fn detect(&self, release: &ReleaseId) -> Result<Option<SpdxId>, String>;
}

/// The raw licensing metadata of one release, before normalization.
#[derive(Debug, Clone, Default)]
pub struct RawLicenseMeta<'a> {
    /// Pre-normalized SPDX id, when the dump carries one.
    pub spdx: Option<&'a str>,
    pub classifiers: &'a [String],
    pub license_field: Option<&'a str>,
    pub release: Option<&'a ReleaseId>,
}

/// Run the normalization pipeline for one release and record which step fired.
pub fn normalize_license(
    meta: &RawLicenseMeta<'_>,
    tables: &NormalizationTables,
    detector: Option<&dyn LicenseDetector>,
) -> NormalizedLicense {
    if let Some(spdx) = meta.spdx {
        let trimmed = spdx.trim();
        if trimmed.eq_ignore_ascii_case("unrecognizable") {
            return NormalizedLicense {
                info: LicenseInfo::Unrecognizable,
                step: NormalizationStep::Preset,
                diagnostic: None,
            };
        }
        return NormalizedLicense {
            info: LicenseInfo::Known(canonical_spdx(trimmed)),
            step: NormalizationStep::Preset,
            diagnostic: None,
        };
    }

    // Step 1: classifier tags. Multiple distinct license tags are treated as
    // unmodeled multi-licensing.
    let ids = tables.classifier_ids(meta.classifiers);
    match ids.len() {
        1 => {
            return NormalizedLicense {
                info: LicenseInfo::Known(ids.into_iter().next().unwrap()),
                step: NormalizationStep::Classifier,
                diagnostic: None,
            }
        }
        n if n > 1 => {
            let list: Vec<&str> = ids.iter().map(|i| i.as_str()).collect();
            return NormalizedLicense {
                info: LicenseInfo::Unrecognizable,
                step: NormalizationStep::Unrecognized,
                diagnostic: Some(format!("multi-license classifiers: {}", list.join(", "))),
            };
        }
        _ => {}
    }

    if let Some(field) = meta.license_field {
        let key = field.trim().to_lowercase();
        if !key.is_empty() {
            // Step 2: exact mapping learned from classifier co-occurrence.
            if let Some(id) = tables.field_to_spdx.get(&key) {
                return NormalizedLicense {
                    info: LicenseInfo::Known(id.clone()),
                    step: NormalizationStep::FieldMap,
                    diagnostic: None,
                };
            }
            // Step 3: keyword rules, first hit wins.
            for rule in &tables.keyword_rules {
                if rule.fires(&key) {
                    return NormalizedLicense {
                        info: LicenseInfo::Known(rule.license.clone()),
                        step: NormalizationStep::Keyword,
                        diagnostic: None,
                    };
                }
            }
        }
    }

    // Step 4: external detector, failures degrade to unrecognizable.
    if let (Some(det), Some(release)) = (detector, meta.release) {
        match det.detect(release) {
            Ok(Some(id)) => {
                return NormalizedLicense {
                    info: LicenseInfo::Known(canonical_spdx(id.as_str())),
                    step: NormalizationStep::Detector,
                    diagnostic: None,
                }
            }
            Ok(None) => {}
            Err(e) => {
                return NormalizedLicense {
                    info: LicenseInfo::Unrecognizable,
                    step: NormalizationStep::Unrecognized,
                    diagnostic: Some(format!("detector failed: {e}")),
                }
            }
        }
    }

    NormalizedLicense {
        info: LicenseInfo::Unrecognizable,
        step: NormalizationStep::Unrecognized,
        diagnostic: None,
    }
}

/// Build the license-field map from classifier co-occurrence: each distinct
/// field value that appears together with classifier-derived ids maps to the
/// most frequent such id, ties broken toward the lexicographically smaller.
pub fn build_field_mapping<'a, I>(
    records: I,
    tables: &NormalizationTables,
) -> BTreeMap<String, SpdxId>
where
    I: IntoIterator<Item = (Option<&'a str>, &'a [String])>,
{
    let mut counts: BTreeMap<String, BTreeMap<SpdxId, u64>> = BTreeMap::new();
    for (field, classifiers) in records {
        let Some(field) = field else { continue };
        let key = field.trim().to_lowercase();
        if key.is_empty() {
            continue;
        }
        let ids = tables.classifier_ids(classifiers);
        if ids.len() != 1 {
            continue;
        }
        let id = ids.into_iter().next().unwrap();
        *counts.entry(key).or_default().entry(id).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(field, by_id)| {
            let best = by_id
                .into_iter()
                .max_by(|(id_a, n_a), (id_b, n_b)| n_a.cmp(n_b).then(id_b.cmp(id_a)))
                .map(|(id, _)| id)
                .expect("non-empty");
            (field, best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix() -> CompatibilityMatrix {
        CompatibilityMatrix::builtin()
    }

    #[test]
    fn paper_anchored_pairs() {
        let m = matrix();
        let gpl3 = LicenseInfo::known("GPL-3.0-only");
        let apache = LicenseInfo::known("Apache-2.0");
        let gpl2 = LicenseInfo::known("GPL-2.0-only");
        assert_eq!(is_incompatible(&gpl3, &apache, &m).unwrap(), CompatibilityVerdict::Incompatible);
        assert_eq!(is_incompatible(&apache, &gpl2, &m).unwrap(), CompatibilityVerdict::Incompatible);
        assert_eq!(is_incompatible(&gpl2, &apache, &m).unwrap(), CompatibilityVerdict::Incompatible);
        let mit = LicenseInfo::known("MIT");
        assert_eq!(is_incompatible(&mit, &mit, &m).unwrap(), CompatibilityVerdict::Compatible);
    }

    #[test]
    fn unrecognizable_is_unknown() {
        let m = matrix();
        let mit = LicenseInfo::known("MIT");
        let unk = LicenseInfo::Unrecognizable;
        assert_eq!(is_incompatible(&unk, &mit, &m).unwrap(), CompatibilityVerdict::Unknown);
        assert_eq!(is_incompatible(&mit, &unk, &m).unwrap(), CompatibilityVerdict::Unknown);
    }

    #[test]
    fn out_of_matrix_is_an_error() {
        let m = matrix();
        let exotic = LicenseInfo::known("WTFPL");
        let mit = LicenseInfo::known("MIT");
        assert!(is_incompatible(&exotic, &mit, &m).is_err());
        assert!(categorize(&exotic, &m).is_err());
    }

    #[test]
    fn categories_match_named_examples() {
        let m = matrix();
        assert_eq!(categorize(&LicenseInfo::known("MIT"), &m).unwrap(), LicenseCategory::Permissive);
        assert_eq!(
            categorize(&LicenseInfo::known("LGPL-3.0-only"), &m).unwrap(),
            LicenseCategory::WeakCopyleft
        );
        assert_eq!(
            categorize(&LicenseInfo::known("GPL-3.0-only"), &m).unwrap(),
            LicenseCategory::StrongCopyleft
        );
        assert_eq!(categorize(&LicenseInfo::Unrecognizable, &m).unwrap(), LicenseCategory::Unknown);
    }

    #[test]
    fn self_compatibility_holds_for_all_licenses() {
        let m = matrix();
        for id in m.licenses() {
            let l = LicenseInfo::Known(id.clone());
            assert_eq!(
                is_incompatible(&l, &l, &m).unwrap(),
                CompatibilityVerdict::Compatible,
                "{id} should be self-compatible"
            );
        }
    }

    #[test]
    fn lint_flags_only_the_documented_permissive_exception() {
        let lints = matrix().lint();
        let expected = vec![MatrixLint::PermissiveSource {
            source: SpdxId::new("Apache-2.0"),
            target: SpdxId::new("GPL-2.0-only"),
        }];
        assert_eq!(lints, expected);
    }

    #[test]
    fn classifier_step_beats_field_and_keywords() {
        let tables = NormalizationTables::builtin();
        let classifiers = vec!["License :: OSI Approved :: MIT License".to_string()];
        let meta = RawLicenseMeta {
            classifiers: &classifiers,
            license_field: Some("GPL-3.0"),
            ..Default::default()
        };
        let norm = normalize_license(&meta, &tables, None);
        assert_eq!(norm.info, LicenseInfo::known("MIT"));
        assert_eq!(norm.step, NormalizationStep::Classifier);
    }

    #[test]
    fn keyword_step_handles_noisy_apache_spellings() {
        let tables = NormalizationTables::builtin();
        for field in ["Apache v2", "Apache Version 2", "Apache 2", "Apache License 2.0"] {
            let meta = RawLicenseMeta { license_field: Some(field), ..Default::default() };
            let norm = normalize_license(&meta, &tables, None);
            assert_eq!(norm.info, LicenseInfo::known("Apache-2.0"), "{field}");
            assert_eq!(norm.step, NormalizationStep::Keyword);
        }
    }

    #[test]
    fn keyword_step_distinguishes_gpl_family() {
        let tables = NormalizationTables::builtin();
        let cases = [
            ("GPLv3", "GPL-3.0-only"),
            ("GNU General Public License v3 or later", "GPL-3.0-or-later"),
            ("GPLv2+", "GPL-2.0-or-later"),
            ("GPL-2.0", "GPL-2.0-only"),
            ("GNU Lesser General Public License v3", "LGPL-3.0-only"),
            ("GNU Affero General Public License v3", "AGPL-3.0-only"),
        ];
        for (field, expected) in cases {
            let meta = RawLicenseMeta { license_field: Some(field), ..Default::default() };
            let norm = normalize_license(&meta, &tables, None);
            assert_eq!(norm.info, LicenseInfo::known(expected), "{field}");
        }
    }

    #[test]
    fn empty_metadata_is_unrecognizable() {
        let tables = NormalizationTables::builtin();
        let norm = normalize_license(&RawLicenseMeta::default(), &tables, None);
        assert_eq!(norm.info, LicenseInfo::Unrecognizable);
        assert_eq!(norm.step, NormalizationStep::Unrecognized);
    }

    #[test]
    fn multi_license_classifiers_are_unrecognizable_with_diagnostic() {
        let tables = NormalizationTables::builtin();
        let classifiers = vec![
            "License :: OSI Approved :: MIT License".to_string(),
            "License :: OSI Approved :: Apache Software License".to_string(),
        ];
        let meta = RawLicenseMeta { classifiers: &classifiers, ..Default::default() };
        let norm = normalize_license(&meta, &tables, None);
        assert_eq!(norm.info, LicenseInfo::Unrecognizable);
        assert!(norm.diagnostic.unwrap().contains("multi-license"));
    }

    #[test]
    fn field_mapping_prefers_most_frequent_then_lexicographic() {
        let tables = NormalizationTables::builtin();
        let apache = vec!["License :: OSI Approved :: Apache Software License".to_string()];
        let gpl = vec!["License :: OSI Approved :: GNU General Public License v3 (GPLv3)".to_string()];
        let rows: Vec<(Option<&str>, &[String])> = vec![
            (Some("Apache v2"), &apache),
            (Some("Apache v2"), &apache),
            (Some("Apache v2"), &apache),
            (Some("Apache v2"), &gpl),
            (Some("odd field"), &apache),
            (Some("odd field"), &gpl),
            (None, &apache),
        ];
        let map = build_field_mapping(rows, &tables);
        assert_eq!(map.get("apache v2"), Some(&SpdxId::new("Apache-2.0")));
        // 50/50 tie: Apache-2.0 < GPL-3.0-only lexicographically
        assert_eq!(map.get("odd field"), Some(&SpdxId::new("Apache-2.0")));
        assert!(!map.contains_key("never seen"));
    }

    #[test]
    fn preset_spdx_short_circuits_and_normalizes_aliases() {
        let tables = NormalizationTables::builtin();
        let meta = RawLicenseMeta { spdx: Some("GPL-2.0+"), ..Default::default() };
        let norm = normalize_license(&meta, &tables, None);
        assert_eq!(norm.info, LicenseInfo::known("GPL-2.0-or-later"));
        assert_eq!(norm.step, NormalizationStep::Preset);
    }

    #[test]
    fn mit_keyword_does_not_fire_inside_words() {
        let tables = NormalizationTables::builtin();
        let meta = RawLicenseMeta {
            license_field: Some("Limited redistribution permitted"),
            ..Default::default()
        };
        let norm = normalize_license(&meta, &tables, None);
        assert_eq!(norm.info, LicenseInfo::Unrecognizable);
    }
}
