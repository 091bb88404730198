//! Live registry client: fetches one release's metadata from a PyPI-style
//! JSON API and caches it on disk so repeated runs are offline-reproducible.

use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use super::{RawRecord, ReleaseRecord, Timestamp};
use crate::licensing::{normalize_license, NormalizationTables, RawLicenseMeta};
use crate::model::{parse_requirement, parse_version, PackageName, ReleaseId};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("network failure fetching {url}: {message}")]
    NetworkFailure { url: String, message: String },
    #[error("release {0} not found in registry")]
    NotFound(ReleaseId),
    #[error("rate limited after {attempts} attempts fetching {url}")]
    RateLimited { url: String, attempts: u32 },
    #[error("registry returned malformed metadata for {id}: {message}")]
    Malformed { id: ReleaseId, message: String },
    #[error("cache I/O failure at {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub struct RegistryClient {
    base_url: String,
    cache_dir: PathBuf,
    tables: NormalizationTables,
    client: reqwest::blocking::Client,
    max_attempts: u32,
}

impl RegistryClient {
    pub fn new(base_url: &str, cache_dir: &Path) -> Self {
        RegistryClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            cache_dir: cache_dir.to_path_buf(),
            tables: NormalizationTables::builtin(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(30))
                .build()
                .expect("client construction"),
            max_attempts: 5,
        }
    }

    fn cache_path(&self, id: &ReleaseId) -> PathBuf {
        self.cache_dir.join(format!("{}--{}.json", id.name, id.version.raw()))
    }

    /// Fetch one release record, serving from the cache when possible.
    pub fn fetch_release(&self, name: &PackageName, version: &str) -> Result<ReleaseRecord, RegistryError> {
        let version_key = parse_version(version).map_err(|e| RegistryError::Malformed {
            id: ReleaseId::new(name.clone(), parse_version("0").unwrap()),
            message: e.to_string(),
        })?;
        let id = ReleaseId::new(name.clone(), version_key);

        let cache_path = self.cache_path(&id);
        if let Ok(text) = std::fs::read_to_string(&cache_path) {
            if let Ok(raw) = serde_json::from_str::<RawRecord>(&text) {
                return self.record_from_raw(&id, raw);
            }
        }

        let url = format!("{}/pypi/{}/{}/json", self.base_url, id.name, id.version.raw());
        let body = self.get_with_retry(&url, &id)?;
        let raw = parse_registry_json(&id, &body)?;

        std::fs::create_dir_all(&self.cache_dir).map_err(|source| RegistryError::CacheIo {
            path: self.cache_dir.display().to_string(),
            source,
        })?;
        let serialized = serde_json::to_string(&raw).expect("record serializes");
        std::fs::write(&cache_path, serialized).map_err(|source| RegistryError::CacheIo {
            path: cache_path.display().to_string(),
            source,
        })?;

        self.record_from_raw(&id, raw)
    }

    fn get_with_retry(&self, url: &str, id: &ReleaseId) -> Result<String, RegistryError> {
        let mut backoff = Duration::from_millis(100);
        let mut rate_limited = false;
        for attempt in 1..=self.max_attempts {
            match self.client.get(url).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 404 {
                        return Err(RegistryError::NotFound(id.clone()));
                    }
                    if status.is_success() {
                        return resp.text().map_err(|e| RegistryError::NetworkFailure {
                            url: url.to_string(),
                            message: e.to_string(),
                        });
                    }
                    rate_limited = status.as_u16() == 429;
                    if !(rate_limited || status.is_server_error()) {
                        return Err(RegistryError::NetworkFailure {
                            url: url.to_string(),
                            message: format!("unexpected status {status}"),
                        });
                    }
                }
                Err(e) => {
                    if attempt == self.max_attempts {
                        return Err(RegistryError::NetworkFailure {
                            url: url.to_string(),
                            message: e.to_string(),
                        });
                    }
                }
            }
            if attempt < self.max_attempts {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
        }
        if rate_limited {
            Err(RegistryError::RateLimited { url: url.to_string(), attempts: self.max_attempts })
        } else {
            Err(RegistryError::NetworkFailure {
                url: url.to_string(),
                message: "retries exhausted".to_string(),
            })
        }
    }

    fn record_from_raw(&self, id: &ReleaseId, raw: RawRecord) -> Result<ReleaseRecord, RegistryError> {
        let upload_time = match &raw.upload_time {
            Some(t) => Timestamp::parse(t).map_err(|message| RegistryError::Malformed {
                id: id.clone(),
                message,
            })?,
            None => {
                return Err(RegistryError::Malformed {
                    id: id.clone(),
                    message: "missing upload_time".to_string(),
                })
            }
        };
        let mut requires_dist = Vec::new();
        for line in &raw.requires_dist {
            if let Ok(req) = parse_requirement(line) {
                if requires_dist.iter().all(|r: &crate::model::Requirement| r.name != req.name) {
                    requires_dist.push(req);
                }
            }
        }
        let meta = RawLicenseMeta {
            spdx: raw.spdx.as_deref(),
            classifiers: &raw.classifiers,
            license_field: raw.license.as_deref(),
            release: Some(id),
        };
        let norm = normalize_license(&meta, &self.tables, None);
        Ok(ReleaseRecord {
            id: id.clone(),
            upload_time,
            requires_dist,
            license_field: raw.license,
            classifiers: raw.classifiers,
            license: norm.info,
            license_step: norm.step,
        })
    }
}

/// Convert a PyPI-style release JSON document into the dump record schema.
/// The upload time is the earliest distribution upload.
fn parse_registry_json(id: &ReleaseId, body: &str) -> Result<RawRecord, RegistryError> {
    let doc: serde_json::Value = serde_json::from_str(body).map_err(|e| RegistryError::Malformed {
        id: id.clone(),
        message: e.to_string(),
    })?;
    let info = doc.get("info").ok_or_else(|| RegistryError::Malformed {
        id: id.clone(),
        message: "missing info object".to_string(),
    })?;
    let str_list = |v: Option<&serde_json::Value>| -> Vec<String> {
        v.and_then(|v| v.as_array())
            .map(|a| a.iter().filter_map(|s| s.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    let upload_time = doc
        .get("urls")
        .and_then(|u| u.as_array())
        .map(|urls| {
            urls.iter()
                .filter_map(|u| {
                    u.get("upload_time_iso_8601")
                        .or_else(|| u.get("upload_time"))
                        .and_then(|t| t.as_str())
                })
                .min()
                .map(str::to_string)
        })
        .unwrap_or_default();
    Ok(RawRecord {
        name: info.get("name").and_then(|n| n.as_str()).unwrap_or(id.name.as_str()).to_string(),
        version: id.version.raw().to_string(),
        upload_time,
        requires_dist: str_list(info.get("requires_dist")),
        license: info.get("license").and_then(|l| l.as_str()).map(str::to_string),
        classifiers: str_list(info.get("classifiers")),
        spdx: None,
    })
}
