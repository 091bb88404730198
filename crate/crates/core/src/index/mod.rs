//! Package-index snapshot: ingestion from a JSON-lines dump, time-filtered
//! queries, and an optional live registry client with an on-disk cache.

pub mod registry;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::licensing::{
    build_field_mapping, normalize_license, LicenseDetector, LicenseInfo, NormalizationStep,
    NormalizationTables, RawLicenseMeta, SpdxId,
};
use crate::model::{parse_requirement, parse_version, PackageName, ReleaseId, Requirement};

/// UTC timestamp in integer milliseconds since the epoch. Parsed from
/// ISO-8601 strings; naive strings are taken as UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn parse(text: &str) -> Result<Self, String> {
        let trimmed = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(trimmed) {
            return Ok(Timestamp(dt.with_timezone(&Utc).timestamp_millis()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(trimmed, fmt) {
                return Ok(Timestamp(Utc.from_utc_datetime(&naive).timestamp_millis()));
            }
            if fmt == "%Y-%m-%d" {
                if let Ok(date) = chrono::NaiveDate::parse_from_str(trimmed, fmt) {
                    let naive = date.and_hms_opt(0, 0, 0).unwrap();
                    return Ok(Timestamp(Utc.from_utc_datetime(&naive).timestamp_millis()));
                }
            }
        }
        Err(format!("unrecognized timestamp {trimmed:?}"))
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn now() -> Self {
        Timestamp(Utc::now().timestamp_millis())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match Utc.timestamp_millis_opt(self.0).single() {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%S%.3fZ")),
            None => write!(f, "@{}", self.0),
        }
    }
}

/// One package release with parsed requirements and normalized license.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleaseRecord {
    pub id: ReleaseId,
    pub upload_time: Timestamp,
    pub requires_dist: Vec<Requirement>,
    pub license_field: Option<String>,
    pub classifiers: Vec<String>,
    pub license: LicenseInfo,
    pub license_step: NormalizationStep,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-line problems encountered during ingestion. Line numbers are 1-based.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadDiagnostics {
    pub skipped_records: u64,
    pub skipped_requirements: u64,
    pub merged_duplicate_requirements: u64,
    pub duplicate_releases: u64,
    pub messages: Vec<String>,
}

impl LoadDiagnostics {
    fn record(&mut self, line: usize, message: String) {
        self.skipped_records += 1;
        self.messages.push(format!("line {line}: {message}"));
    }
}

/// The on-disk record schema: one JSON object per line. Unknown keys are
/// ignored. A present `spdx` value short-circuits license normalization.
#[derive(Debug, Deserialize, Serialize)]
pub struct RawRecord {
    pub name: String,
    pub version: String,
    pub upload_time: Option<String>,
    #[serde(default)]
    pub requires_dist: Vec<String>,
    #[serde(default)]
    pub license: Option<String>,
    #[serde(default)]
    pub classifiers: Vec<String>,
    #[serde(default)]
    pub spdx: Option<String>,
}

/// Immutable snapshot of the package universe: per-package version-sorted
/// releases plus license popularity counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageIndex {
    packages: BTreeMap<PackageName, Vec<ReleaseRecord>>,
    license_popularity: BTreeMap<SpdxId, u64>,
    snapshot_hash: String,
}

impl PackageIndex {
    pub fn packages(&self) -> impl Iterator<Item = (&PackageName, &[ReleaseRecord])> {
        self.packages.iter().map(|(name, recs)| (name, recs.as_slice()))
    }

    pub fn package_count(&self) -> usize {
        self.packages.len()
    }

    pub fn release_count(&self) -> usize {
        self.packages.values().map(Vec::len).sum()
    }

    /// All releases of a package, version-ascending; empty if unknown.
    pub fn releases(&self, name: &PackageName) -> &[ReleaseRecord] {
        self.packages.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn release(&self, id: &ReleaseId) -> Option<&ReleaseRecord> {
        self.releases(&id.name).iter().find(|r| r.id.version == id.version)
    }

    /// Releases of `name` uploaded at or before `t`, version-ascending.
    pub fn releases_at(&self, name: &PackageName, t: Timestamp) -> Vec<&ReleaseRecord> {
        self.releases(name).iter().filter(|r| r.upload_time <= t).collect()
    }

    /// Count of releases in the snapshot per normalized license.
    pub fn license_popularity(&self) -> &BTreeMap<SpdxId, u64> {
        &self.license_popularity
    }

    pub fn popularity_of(&self, id: &SpdxId) -> u64 {
        self.license_popularity.get(id).copied().unwrap_or(0)
    }

    /// SHA-256 of the source file bytes, for report provenance footers.
    pub fn snapshot_hash(&self) -> &str {
        &self.snapshot_hash
    }
}

pub struct IndexLoader {
    tables: NormalizationTables,
    detector: Option<Box<dyn LicenseDetector>>,
}

impl IndexLoader {
    pub fn new(tables: NormalizationTables) -> Self {
        IndexLoader { tables, detector: None }
    }

    pub fn with_detector(mut self, detector: Box<dyn LicenseDetector>) -> Self {
        self.detector = Some(detector);
        self
    }

    pub fn load(&self, path: &Path) -> Result<(PackageIndex, LoadDiagnostics), IndexError> {
        let text = std::fs::read_to_string(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(self.load_str(&text))
    }

    /// Parse, validate, normalize, and sort a JSON-lines dump held in memory.
    pub fn load_str(&self, text: &str) -> (PackageIndex, LoadDiagnostics) {
        let mut diags = LoadDiagnostics::default();
        let mut parsed: Vec<(ReleaseId, Timestamp, Vec<Requirement>, RawRecord)> = Vec::new();

        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let raw: RawRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(e) => {
                    diags.record(lineno, format!("invalid JSON: {e}"));
                    continue;
                }
            };
            let name = PackageName::new(&raw.name);
            if name.as_str().is_empty() {
                diags.record(lineno, "empty package name".to_string());
                continue;
            }
            let version = match parse_version(&raw.version) {
                Ok(v) => v,
                Err(e) => {
                    diags.record(lineno, e.to_string());
                    continue;
                }
            };
            let upload_time = match &raw.upload_time {
                None => {
                    diags.record(lineno, "missing upload_time".to_string());
                    continue;
                }
                Some(t) => match Timestamp::parse(t) {
                    Ok(ts) => ts,
                    Err(e) => {
                        diags.record(lineno, e);
                        continue;
                    }
                },
            };

            let mut requirements: Vec<Requirement> = Vec::new();
            for req_line in &raw.requires_dist {
                match parse_requirement(req_line) {
                    Ok(req) => {
                        // Duplicate names merge by specifier conjunction; an
                        // unconditional duplicate drops the marker.
                        if let Some(existing) =
                            requirements.iter_mut().find(|r| r.name == req.name)
                        {
                            existing.specifiers.extend(req.specifiers);
                            existing.extras.extend(req.extras);
                            if req.marker.is_none() {
                                existing.marker = None;
                            }
                            diags.merged_duplicate_requirements += 1;
                        } else {
                            requirements.push(req);
                        }
                    }
                    Err(e) => {
                        diags.skipped_requirements += 1;
                        diags.messages.push(format!("line {lineno}: skipped requirement: {e}"));
                    }
                }
            }

            parsed.push((ReleaseId::new(name, version), upload_time, requirements, raw));
        }

        // License-field mapping needs the whole corpus before normalization.
        let field_rows = parsed
            .iter()
            .map(|(_, _, _, raw)| (raw.license.as_deref(), raw.classifiers.as_slice()));
        let mut tables = self.tables.clone();
        tables.field_to_spdx = build_field_mapping(field_rows, &tables);

        let mut packages: BTreeMap<PackageName, Vec<ReleaseRecord>> = BTreeMap::new();
        for (id, upload_time, requires_dist, raw) in parsed {
            let meta = RawLicenseMeta {
                spdx: raw.spdx.as_deref(),
                classifiers: &raw.classifiers,
                license_field: raw.license.as_deref(),
                release: Some(&id),
            };
            let norm = normalize_license(&meta, &tables, self.detector.as_deref());
            if let Some(diag) = norm.diagnostic {
                diags.messages.push(format!("{id}: {diag}"));
            }
            let slot = packages.entry(id.name.clone()).or_default();
            if slot.iter().any(|r| r.id.version == id.version) {
                diags.duplicate_releases += 1;
                diags.messages.push(format!("{id}: duplicate release skipped"));
                continue;
            }
            slot.push(ReleaseRecord {
                id,
                upload_time,
                requires_dist,
                license_field: raw.license,
                classifiers: raw.classifiers,
                license: norm.info,
                license_step: norm.step,
            });
        }

        for records in packages.values_mut() {
            records.sort_by(|a, b| a.id.version.cmp(&b.id.version));
        }

        let mut popularity: BTreeMap<SpdxId, u64> = BTreeMap::new();
        for records in packages.values() {
            for record in records {
                if let LicenseInfo::Known(id) = &record.license {
                    *popularity.entry(id.clone()).or_insert(0) += 1;
                }
            }
        }

        let snapshot_hash = format!("{:x}", Sha256::digest(text.as_bytes()));
        (PackageIndex { packages, license_popularity: popularity, snapshot_hash }, diags)
    }
}

/// Load an index with the builtin normalization tables and no detector.
pub fn load_index(path: &Path) -> Result<(PackageIndex, LoadDiagnostics), IndexError> {
    IndexLoader::new(NormalizationTables::builtin()).load(path)
}
