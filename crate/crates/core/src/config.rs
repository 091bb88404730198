//! Run configuration with layered sources: command-line flags beat
//! environment variables (handled by the argument parser), which beat the
//! optional config file, which beats the built-in defaults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::index::Timestamp;
use crate::model::MarkerEnv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected text or json)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config file {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

/// Partial configuration, as read from one layer.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub index: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub migrations: Option<PathBuf>,
    pub at: Option<String>,
    pub extras: Option<Vec<String>>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub c_migration: Option<i64>,
    pub c_removal: Option<i64>,
    pub timeout: Option<u64>,
    pub universe_cap: Option<usize>,
    pub format: Option<String>,
    pub python_version: Option<String>,
    pub sys_platform: Option<String>,
    pub os_name: Option<String>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Malformed {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Fill any unset field from the lower-precedence layer.
    pub fn or(mut self, lower: Overrides) -> Overrides {
        self.index = self.index.or(lower.index);
        self.matrix = self.matrix.or(lower.matrix);
        self.keywords = self.keywords.or(lower.keywords);
        self.migrations = self.migrations.or(lower.migrations);
        self.at = self.at.or(lower.at);
        self.extras = self.extras.or(lower.extras);
        self.n = self.n.or(lower.n);
        self.m = self.m.or(lower.m);
        self.c_migration = self.c_migration.or(lower.c_migration);
        self.c_removal = self.c_removal.or(lower.c_removal);
        self.timeout = self.timeout.or(lower.timeout);
        self.universe_cap = self.universe_cap.or(lower.universe_cap);
        self.format = self.format.or(lower.format);
        self.python_version = self.python_version.or(lower.python_version);
        self.sys_platform = self.sys_platform.or(lower.sys_platform);
        self.os_name = self.os_name.or(lower.os_name);
        self
    }
}

/// Fully resolved configuration. The numeric defaults are the tool's
/// operating constants: N = 5 plans, M = 3 licenses, migration cost 10,
/// removal cost 100, 300 s solver budget per iteration, 2,000-package
/// universe cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub index_path: Option<PathBuf>,
    pub matrix_path: Option<PathBuf>,
    pub keywords_path: Option<PathBuf>,
    pub migrations_path: Option<PathBuf>,
    pub at: Option<Timestamp>,
    pub extras: BTreeSet<String>,
    pub n_plans: usize,
    pub m_licenses: usize,
    pub c_migration: i64,
    pub c_removal: i64,
    pub solver_timeout_secs: u64,
    pub universe_cap: usize,
    pub format: OutputFormat,
    pub python_version: String,
    pub sys_platform: String,
    pub os_name: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            index_path: None,
            matrix_path: None,
            keywords_path: None,
            migrations_path: None,
            at: None,
            extras: BTreeSet::new(),
            n_plans: 5,
            m_licenses: 3,
            c_migration: 10,
            c_removal: 100,
            solver_timeout_secs: 300,
            universe_cap: 2000,
            format: OutputFormat::Text,
            python_version: "3.10".to_string(),
            sys_platform: "linux".to_string(),
            os_name: "posix".to_string(),
        }
    }
}

impl RunConfig {
    /// Resolve layered overrides (already merged highest-precedence-first)
    /// onto the defaults.
    pub fn resolve(layered: Overrides) -> Result<RunConfig, ConfigError> {
        let mut config = RunConfig::default();
        config.index_path = layered.index;
        config.matrix_path = layered.matrix;
        config.keywords_path = layered.keywords;
        config.migrations_path = layered.migrations;
        if let Some(at) = layered.at {
            let ts = Timestamp::parse(&at).map_err(|message| ConfigError::Invalid {
                field: "at".to_string(),
                message,
            })?;
            config.at = Some(ts);
        }
        if let Some(extras) = layered.extras {
            config.extras = extras.into_iter().collect();
        }
        if let Some(n) = layered.n {
            config.n_plans = n;
        }
        if let Some(m) = layered.m {
            config.m_licenses = m;
        }
        if let Some(c) = layered.c_migration {
            config.c_migration = c;
        }
        if let Some(c) = layered.c_removal {
            config.c_removal = c;
        }
        if let Some(t) = layered.timeout {
            config.solver_timeout_secs = t;
        }
        if let Some(cap) = layered.universe_cap {
            config.universe_cap = cap;
        }
        if let Some(format) = layered.format {
            config.format = format.parse().map_err(|message| ConfigError::Invalid {
                field: "format".to_string(),
                message,
            })?;
        }
        if let Some(v) = layered.python_version {
            config.python_version = v;
        }
        if let Some(v) = layered.sys_platform {
            config.sys_platform = v;
        }
        if let Some(v) = layered.os_name {
            config.os_name = v;
        }
        if config.c_migration < 0 || config.c_removal < 0 {
            return Err(ConfigError::Invalid {
                field: "costs".to_string(),
                message: "cost constants must be non-negative".to_string(),
            });
        }
        Ok(config)
    }

    pub fn marker_env(&self) -> MarkerEnv {
        MarkerEnv {
            extras: self.extras.clone(),
            python_version: self.python_version.clone(),
            sys_platform: self.sys_platform.clone(),
            os_name: self.os_name.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_operating_constants() {
        let c = RunConfig::default();
        assert_eq!(c.n_plans, 5);
        assert_eq!(c.m_licenses, 3);
        assert_eq!(c.c_migration, 10);
        assert_eq!(c.c_removal, 100);
        assert_eq!(c.solver_timeout_secs, 300);
        assert_eq!(c.universe_cap, 2000);
    }

    #[test]
    fn higher_layers_win() {
        let cli = Overrides { n: Some(7), ..Default::default() };
        let file = Overrides { n: Some(2), m: Some(1), ..Default::default() };
        let config = RunConfig::resolve(cli.or(file)).unwrap();
        assert_eq!(config.n_plans, 7, "CLI beats file");
        assert_eq!(config.m_licenses, 1, "file beats default");
        assert_eq!(config.c_migration, 10, "default used when unset");
    }

    #[test]
    fn file_parsing_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("licomp.toml");
        std::fs::write(&path, "n = 9\nformat = \"json\"\nextras = [\"fast\"]\n").unwrap();
        let config = RunConfig::resolve(Overrides::from_file(&path).unwrap()).unwrap();
        assert_eq!(config.n_plans, 9);
        assert_eq!(config.format, OutputFormat::Json);
        assert!(config.extras.contains("fast"));
    }

    #[test]
    fn bad_values_are_config_errors() {
        let bad_at = Overrides { at: Some("whenever".to_string()), ..Default::default() };
        assert!(RunConfig::resolve(bad_at).is_err());
        let bad_fmt = Overrides { format: Some("xml".to_string()), ..Default::default() };
        assert!(RunConfig::resolve(bad_fmt).is_err());
    }
}
