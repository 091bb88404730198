//! License incompatibility analysis and remediation for package dependency
//! graphs.
//!
//! The library ingests a package-index snapshot (JSON lines), resolves
//! time-aware dependency graphs the way an installer's breadth-first walk
//! would, normalizes noisy licensing metadata to SPDX identifiers, detects
//! one-way license incompatibilities against a compatibility matrix, and
//! recommends minimal-cost remediations (license changes, migrations,
//! removals, version pins) via exact finite-domain optimization.

pub mod config;
pub mod detector;
pub mod index;
pub mod licensing;
pub mod model;
pub mod remediator;
pub mod resolver;

pub use model::{PackageName, ReleaseId, Requirement, VersionKey};
