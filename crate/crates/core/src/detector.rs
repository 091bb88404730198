//! Release labeling (Compatible / Incompatible / Unknown), incompatibility
//! findings with graph positions, and ecosystem-level analytics.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{TimeZone, Utc};
use serde::Serialize;

use crate::index::{PackageIndex, ReleaseRecord, Timestamp};
use crate::licensing::{
    categorize, is_incompatible, CompatibilityMatrix, CompatibilityVerdict, LicenseCategory,
    LicenseInfo,
};
use crate::model::{MarkerEnv, ReleaseId};
use crate::resolver::{graph_metrics, resolve, witness_path, DependencyGraph};

/// One incompatible dependency, with its position in the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IncompatibilityFinding {
    pub dependency: ReleaseId,
    pub dep_license: LicenseInfo,
    pub depth: u32,
    pub in_degree: u32,
    pub out_degree: u32,
    pub witness_path: Vec<ReleaseId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CompatibilityLabel {
    Compatible,
    Incompatible,
    Unknown,
}

impl fmt::Display for CompatibilityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CompatibilityLabel::Compatible => "Compatible",
            CompatibilityLabel::Incompatible => "Incompatible",
            CompatibilityLabel::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DetectDiagnostics {
    /// Known license ids absent from the loaded matrix, treated as Unknown.
    pub out_of_matrix: Vec<String>,
}

/// Check every non-root node's license against the root's.
///
/// A root with an unrecognizable license labels the release Unknown with no
/// findings. Otherwise the label is Incompatible when any finding exists,
/// Unknown when some dependency's verdict is unknowable, else Compatible.
pub fn detect(
    g: &DependencyGraph,
    matrix: &CompatibilityMatrix,
) -> (CompatibilityLabel, Vec<IncompatibilityFinding>, DetectDiagnostics) {
    let mut diags = DetectDiagnostics::default();
    let root_license = g.license_of(&g.root).clone();
    if root_license == LicenseInfo::Unrecognizable {
        return (CompatibilityLabel::Unknown, Vec::new(), diags);
    }

    let mut findings = Vec::new();
    let mut saw_unknown = false;
    for node in &g.nodes {
        if node == &g.root {
            continue;
        }
        let dep_license = g.license_of(node);
        let verdict = match is_incompatible(dep_license, &root_license, matrix) {
            Ok(v) => v,
            Err(e) => {
                diags.out_of_matrix.push(e.0.to_string());
                CompatibilityVerdict::Unknown
            }
        };
        match verdict {
            CompatibilityVerdict::Incompatible => {
                let metrics = graph_metrics(g, node).expect("node is in graph");
                findings.push(IncompatibilityFinding {
                    dependency: node.clone(),
                    dep_license: dep_license.clone(),
                    depth: metrics.depth,
                    in_degree: metrics.in_degree,
                    out_degree: metrics.out_degree,
                    witness_path: witness_path(g, node).expect("node is in graph"),
                });
            }
            CompatibilityVerdict::Unknown => saw_unknown = true,
            CompatibilityVerdict::Compatible => {}
        }
    }

    let label = if !findings.is_empty() {
        CompatibilityLabel::Incompatible
    } else if saw_unknown {
        CompatibilityLabel::Unknown
    } else {
        CompatibilityLabel::Compatible
    };
    (label, findings, diags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChangeDirection {
    MorePermissive,
    LessPermissive,
    SameLevel,
    InvolvingUnknown,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ChangeSummary {
    pub more_permissive: u64,
    pub less_permissive: u64,
    pub same_level: u64,
    pub involving_unknown: u64,
    pub packages_with_one_change: u64,
    pub packages_with_multiple_changes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCount {
    pub count: u64,
    pub percentage: f64,
}

/// One cumulative distribution row: share of findings with metric <= bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfPoint {
    pub bound: u32,
    pub count: u64,
    pub cumulative_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub total_packages: u64,
    pub total_releases: u64,
    /// Releases actually labeled (sampled, with at least one requirement).
    pub analyzed_releases: u64,
    pub labels: BTreeMap<String, LabelCount>,
    /// year -> category name -> release count
    pub yearly_categories: BTreeMap<i32, BTreeMap<String, u64>>,
    pub changes: ChangeSummary,
    pub total_findings: u64,
    pub depth_cdf: Vec<CdfPoint>,
    pub in_degree_cdf: Vec<CdfPoint>,
    pub out_degree_cdf: Vec<CdfPoint>,
}

fn year_of(t: Timestamp) -> i32 {
    use chrono::Datelike;
    Utc.timestamp_millis_opt(t.millis())
        .single()
        .map(|dt| dt.year())
        .unwrap_or(0)
}

/// Latest release per package per year, the sampling the yearly analyses use.
fn sample_latest_per_year(records: &[ReleaseRecord]) -> Vec<&ReleaseRecord> {
    let mut by_year: BTreeMap<i32, &ReleaseRecord> = BTreeMap::new();
    for record in records {
        let year = year_of(record.upload_time);
        let keep = match by_year.get(&year) {
            Some(existing) => record.upload_time >= existing.upload_time,
            None => true,
        };
        if keep {
            by_year.insert(year, record);
        }
    }
    by_year.into_values().collect()
}

fn cdf(values: &[u32]) -> Vec<CdfPoint> {
    let total = values.len() as u64;
    let max = values.iter().copied().max().unwrap_or(0);
    let mut points = Vec::new();
    let mut cumulative = 0u64;
    for bound in 0..=max {
        cumulative += values.iter().filter(|v| **v == bound).count() as u64;
        points.push(CdfPoint {
            bound,
            count: cumulative,
            cumulative_percent: if total == 0 { 0.0 } else { 100.0 * cumulative as f64 / total as f64 },
        });
    }
    points
}

/// Ecosystem analytics: yearly category shares, licensing-change events,
/// compatibility labels over resolved graphs, and metric distributions over
/// all findings.
///
/// With `sample_latest` set, label and category counts use only the latest
/// release of each package per year; change detection always walks the full
/// version-ordered release list. Releases without requirements are excluded
/// from labeling.
pub fn ecosystem_stats(
    index: &PackageIndex,
    matrix: &CompatibilityMatrix,
    sample_latest: bool,
) -> StatsReport {
    let env = MarkerEnv::default();
    let mut labels: BTreeMap<String, u64> = BTreeMap::new();
    let mut yearly: BTreeMap<i32, BTreeMap<String, u64>> = BTreeMap::new();
    let mut changes = ChangeSummary::default();
    let mut depths = Vec::new();
    let mut in_degrees = Vec::new();
    let mut out_degrees = Vec::new();
    let mut analyzed = 0u64;

    for (_, records) in index.packages() {
        let selected: Vec<&ReleaseRecord> = if sample_latest {
            sample_latest_per_year(records)
        } else {
            records.iter().collect()
        };

        for record in &selected {
            let category = categorize(&record.license, matrix).unwrap_or(LicenseCategory::Unknown);
            *yearly
                .entry(year_of(record.upload_time))
                .or_default()
                .entry(category.as_str().to_string())
                .or_insert(0) += 1;

            if record.requires_dist.is_empty() {
                continue;
            }
            analyzed += 1;
            let (label, findings, _) = match resolve(index, &record.id, record.upload_time, &env) {
                Ok(g) => detect(&g, matrix),
                Err(_) => continue,
            };
            *labels.entry(label.to_string()).or_insert(0) += 1;
            for finding in findings {
                depths.push(finding.depth);
                in_degrees.push(finding.in_degree);
                out_degrees.push(finding.out_degree);
            }
        }

        // Change events over consecutive releases in version order.
        let mut events = 0u64;
        for pair in records.windows(2) {
            if pair[0].license == pair[1].license {
                continue;
            }
            events += 1;
            let from = categorize(&pair[0].license, matrix).unwrap_or(LicenseCategory::Unknown);
            let to = categorize(&pair[1].license, matrix).unwrap_or(LicenseCategory::Unknown);
            if from == LicenseCategory::Unknown || to == LicenseCategory::Unknown {
                changes.involving_unknown += 1;
            } else if to < from {
                changes.more_permissive += 1;
            } else if to > from {
                changes.less_permissive += 1;
            } else {
                changes.same_level += 1;
            }
        }
        match events {
            0 => {}
            1 => changes.packages_with_one_change += 1,
            _ => changes.packages_with_multiple_changes += 1,
        }
    }

    let label_counts = labels
        .into_iter()
        .map(|(label, count)| {
            (label, LabelCount {
                count,
                percentage: if analyzed == 0 { 0.0 } else { 100.0 * count as f64 / analyzed as f64 },
            })
        })
        .collect();

    StatsReport {
        total_packages: index.package_count() as u64,
        total_releases: index.release_count() as u64,
        analyzed_releases: analyzed,
        labels: label_counts,
        yearly_categories: yearly,
        changes,
        total_findings: depths.len() as u64,
        depth_cdf: cdf(&depths),
        in_degree_cdf: cdf(&in_degrees),
        out_degree_cdf: cdf(&out_degrees),
    }
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    /// Aligned-column text tables: label shares, then cumulative metric
    /// distributions, then category and change summaries.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Analyzed {} releases with dependencies ({} packages, {} releases total)\n\n",
            self.analyzed_releases, self.total_packages, self.total_releases
        ));

        out.push_str("Compatibility label      Count  Percentage\n");
        for label in ["Compatible", "Incompatible", "Unknown"] {
            let row = self
                .labels
                .get(label)
                .cloned()
                .unwrap_or(LabelCount { count: 0, percentage: 0.0 });
            out.push_str(&format!("{label:<22} {:>8}  {:>9.2}%\n", row.count, row.percentage));
        }

        out.push_str(&format!(
            "\nCumulative distribution over {} incompatible dependencies\n",
            self.total_findings
        ));
        out.push_str("Metric          =0    <=1    <=2    <=3    <=4    <=5\n");
        for (name, series) in [
            ("Depth", &self.depth_cdf),
            ("In-degree", &self.in_degree_cdf),
            ("Out-degree", &self.out_degree_cdf),
        ] {
            let mut cells = Vec::new();
            for bound in 0..=5u32 {
                let pct = series
                    .iter()
                    .filter(|p| p.bound <= bound)
                    .next_back()
                    .map(|p| p.cumulative_percent)
                    .unwrap_or(if series.is_empty() { 0.0 } else { 100.0 });
                cells.push(format!("{pct:>5.1}%"));
            }
            out.push_str(&format!("{name:<11} {}\n", cells.join(" ")));
        }

        out.push_str("\nYearly license categories\n");
        out.push_str("Year   Permissive  Weak Copyleft  Strong Copyleft  Unknown\n");
        for (year, cats) in &self.yearly_categories {
            let get = |k: &str| cats.get(k).copied().unwrap_or(0);
            out.push_str(&format!(
                "{year}   {:>9}  {:>13}  {:>15}  {:>7}\n",
                get("Permissive"),
                get("Weak Copyleft"),
                get("Strong Copyleft"),
                get("Unknown")
            ));
        }

        let c = &self.changes;
        out.push_str(&format!(
            "\nLicensing changes: {} more permissive, {} less permissive, {} same level, {} involving unknown\n",
            c.more_permissive, c.less_permissive, c.same_level, c.involving_unknown
        ));
        out.push_str(&format!(
            "Packages with one change: {}; with two or more: {}\n",
            c.packages_with_one_change, c.packages_with_multiple_changes
        ));
        out
    }
}
