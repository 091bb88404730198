//! Time-aware dependency resolution: breadth-first, latest satisfying
//! version, first resolution of a package wins, conflicts recorded but never
//! backtracked.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{PackageIndex, Timestamp};
use crate::licensing::LicenseInfo;
use crate::model::{constraint_matches, MarkerEnv, PackageName, ReleaseId, Requirement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("unknown root release {0}")]
    UnknownRoot(ReleaseId),
}

/// Why a requirement produced no resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnresolvedReason {
    /// The package was already resolved at a version violating this
    /// requirement; the earlier resolution is kept.
    ConflictIgnored,
    /// No release uploaded in time satisfies the constraint.
    Unsatisfiable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedRequirement {
    pub requirer: ReleaseId,
    pub requirement: String,
    pub reason: UnresolvedReason,
}

/// Rooted dependency graph of resolved releases at a timestamp. Nodes carry
/// their normalized license so downstream stages need no index lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    pub root: ReleaseId,
    /// Insertion-ordered: root first, then BFS discovery order.
    pub nodes: Vec<ReleaseId>,
    pub licenses: BTreeMap<ReleaseId, LicenseInfo>,
    /// Ordered outgoing edges per node, in requirement order.
    pub edges: BTreeMap<ReleaseId, Vec<ReleaseId>>,
    pub resolved_at: Timestamp,
    pub unresolved: Vec<UnresolvedRequirement>,
}

impl DependencyGraph {
    pub fn contains(&self, id: &ReleaseId) -> bool {
        self.nodes.contains(id)
    }

    pub fn node_for(&self, name: &PackageName) -> Option<&ReleaseId> {
        self.nodes.iter().find(|n| &n.name == name)
    }

    pub fn license_of(&self, id: &ReleaseId) -> &LicenseInfo {
        self.licenses.get(id).unwrap_or(&LicenseInfo::Unrecognizable)
    }

    pub fn out_edges(&self, id: &ReleaseId) -> &[ReleaseId] {
        self.edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("node {0} is not in the graph")]
pub struct NodeNotInGraph(pub ReleaseId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphMetrics {
    pub depth: u32,
    pub in_degree: u32,
    pub out_degree: u32,
}

/// Resolve the dependency graph of `root` at time `t`.
///
/// Walks requirements in `requires_dist` order with a FIFO queue. The first
/// resolution of a package is final: later requirements of the same package
/// add an edge to the existing node and, when violated, a conflict-ignored
/// entry. Requirements whose marker evaluates false under `env` (plus the
/// extras requested for the requiring node) are skipped. Candidate releases
/// are those uploaded at or before `t`; the highest satisfying version wins
/// and pre-releases are excluded unless a specifier names one.
pub fn resolve(
    index: &PackageIndex,
    root: &ReleaseId,
    t: Timestamp,
    env: &MarkerEnv,
) -> Result<DependencyGraph, ResolveError> {
    let root_record = index.release(root).ok_or_else(|| ResolveError::UnknownRoot(root.clone()))?;

    let mut nodes: Vec<ReleaseId> = vec![root_record.id.clone()];
    let mut licenses = BTreeMap::new();
    licenses.insert(root_record.id.clone(), root_record.license.clone());
    let mut resolved: HashMap<PackageName, ReleaseId> = HashMap::new();
    resolved.insert(root.name.clone(), root_record.id.clone());
    let mut edges: BTreeMap<ReleaseId, Vec<ReleaseId>> = BTreeMap::new();
    let mut unresolved = Vec::new();

    // Queue entries carry the extras activated for that node's requirements.
    let mut queue: VecDeque<(ReleaseId, Vec<String>)> = VecDeque::new();
    queue.push_back((root_record.id.clone(), env.extras.iter().cloned().collect()));

    while let Some((current, extras)) = queue.pop_front() {
        let record = index.release(&current).expect("queued nodes exist in index");
        let node_env = env.clone().with_extras(extras);
        for requirement in &record.requires_dist {
            if let Some(marker) = &requirement.marker {
                if !marker.eval(&node_env) {
                    continue;
                }
            }
            match resolved.get(&requirement.name) {
                Some(existing) => {
                    if !constraint_matches(&existing.version, &requirement.specifiers, false) {
                        unresolved.push(UnresolvedRequirement {
                            requirer: current.clone(),
                            requirement: requirement.render(),
                            reason: UnresolvedReason::ConflictIgnored,
                        });
                    }
                    let existing = existing.clone();
                    edges.entry(current.clone()).or_default().push(existing);
                }
                None => match pick_candidate(index, requirement, t) {
                    Some(chosen) => {
                        let id = chosen.id.clone();
                        resolved.insert(requirement.name.clone(), id.clone());
                        nodes.push(id.clone());
                        licenses.insert(id.clone(), chosen.license.clone());
                        edges.entry(current.clone()).or_default().push(id.clone());
                        queue.push_back((id, requirement.extras.iter().cloned().collect()));
                    }
                    None => unresolved.push(UnresolvedRequirement {
                        requirer: current.clone(),
                        requirement: requirement.render(),
                        reason: UnresolvedReason::Unsatisfiable,
                    }),
                },
            }
        }
    }

    Ok(DependencyGraph { root: root_record.id.clone(), nodes, licenses, edges, resolved_at: t, unresolved })
}

/// Highest version uploaded at or before `t` that satisfies the requirement.
fn pick_candidate<'a>(
    index: &'a PackageIndex,
    requirement: &Requirement,
    t: Timestamp,
) -> Option<&'a crate::index::ReleaseRecord> {
    index
        .releases_at(&requirement.name, t)
        .into_iter()
        .filter(|r| constraint_matches(&r.id.version, &requirement.specifiers, false))
        .max_by(|a, b| a.id.version.cmp(&b.id.version))
}

/// Shortest-path depth from the root, fan-in, and fan-out of one node.
pub fn graph_metrics(g: &DependencyGraph, node: &ReleaseId) -> Result<GraphMetrics, NodeNotInGraph> {
    if !g.contains(node) {
        return Err(NodeNotInGraph(node.clone()));
    }
    let depths = shortest_depths(g);
    let in_degree = g
        .edges
        .values()
        .map(|targets| targets.iter().filter(|t| *t == node).count() as u32)
        .sum();
    Ok(GraphMetrics {
        depth: depths.get(node).copied().unwrap_or(0),
        in_degree,
        out_degree: g.out_edges(node).len() as u32,
    })
}

/// BFS shortest path from root to `node`, inclusive of both endpoints.
/// Children are explored in edge order, so the witness is deterministic.
pub fn witness_path(g: &DependencyGraph, node: &ReleaseId) -> Result<Vec<ReleaseId>, NodeNotInGraph> {
    if !g.contains(node) {
        return Err(NodeNotInGraph(node.clone()));
    }
    let mut pred: HashMap<&ReleaseId, &ReleaseId> = HashMap::new();
    let mut visited: HashMap<&ReleaseId, ()> = HashMap::new();
    visited.insert(&g.root, ());
    let mut queue = VecDeque::new();
    queue.push_back(&g.root);
    while let Some(current) = queue.pop_front() {
        for target in g.out_edges(current) {
            if visited.insert(target, ()).is_none() {
                pred.insert(target, current);
                queue.push_back(target);
            }
        }
    }
    let mut path = vec![node.clone()];
    let mut cursor = node;
    while cursor != &g.root {
        match pred.get(cursor) {
            Some(p) => {
                path.push((*p).clone());
                cursor = p;
            }
            None => break,
        }
    }
    path.reverse();
    Ok(path)
}

fn shortest_depths(g: &DependencyGraph) -> HashMap<ReleaseId, u32> {
    let mut depths = HashMap::new();
    depths.insert(g.root.clone(), 0u32);
    let mut queue = VecDeque::new();
    queue.push_back(g.root.clone());
    while let Some(current) = queue.pop_front() {
        let d = depths[&current];
        for target in g.out_edges(&current) {
            if !depths.contains_key(target) {
                depths.insert(target.clone(), d + 1);
                queue.push_back(target.clone());
            }
        }
    }
    depths
}

/// Wire shape of a serialized graph.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphDocument {
    pub root: String,
    pub resolved_at: String,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(String, String)>,
    pub unresolved: Vec<UnresolvedRequirement>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphNode {
    pub name: String,
    pub version: String,
    pub license: String,
}

impl DependencyGraph {
    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            root: self.root.to_string(),
            resolved_at: self.resolved_at.to_string(),
            nodes: self
                .nodes
                .iter()
                .map(|id| GraphNode {
                    name: id.name.to_string(),
                    version: id.version.to_string(),
                    license: self.license_of(id).to_string(),
                })
                .collect(),
            edges: self
                .nodes
                .iter()
                .flat_map(|source| {
                    self.out_edges(source)
                        .iter()
                        .map(move |target| (source.to_string(), target.to_string()))
                })
                .collect(),
            unresolved: self.unresolved.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{IndexLoader, PackageIndex};
    use crate::licensing::NormalizationTables;
    use crate::model::parse_version;

    fn index_from(lines: &[serde_json::Value]) -> PackageIndex {
        let text: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        IndexLoader::new(NormalizationTables::builtin()).load_str(&text.join("\n")).0
    }

    fn rel(name: &str, version: &str) -> ReleaseId {
        ReleaseId::new(PackageName::new(name), parse_version(version).unwrap())
    }

    fn t(text: &str) -> Timestamp {
        Timestamp::parse(text).unwrap()
    }

    fn record(name: &str, version: &str, time: &str, reqs: &[&str]) -> serde_json::Value {
        serde_json::json!({
            "name": name, "version": version, "upload_time": time,
            "requires_dist": reqs, "spdx": "MIT",
        })
    }

    #[test]
    fn empty_requires_dist_yields_singleton_graph() {
        let index = index_from(&[record("solo", "1.0", "2020-01-01T00:00:00Z", &[])]);
        let g = resolve(&index, &rel("solo", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        assert_eq!(g.nodes, vec![rel("solo", "1.0")]);
        assert!(g.edges.is_empty());
        assert!(g.unresolved.is_empty());
    }

    #[test]
    fn unknown_root_is_an_error() {
        let index = index_from(&[record("solo", "1.0", "2020-01-01T00:00:00Z", &[])]);
        let err = resolve(&index, &rel("ghost", "1.0"), t("2021-01-01"), &MarkerEnv::default());
        assert!(matches!(err, Err(ResolveError::UnknownRoot(_))));
    }

    #[test]
    fn diamond_keeps_first_resolution_and_records_conflict() {
        let index = index_from(&[
            record("a", "1.0", "2020-01-01T00:00:00Z", &["b", "c"]),
            record("b", "1.0", "2020-01-01T00:00:00Z", &["d==1.0"]),
            record("c", "1.0", "2020-01-01T00:00:00Z", &["d==2.0"]),
            record("d", "1.0", "2020-01-01T00:00:00Z", &[]),
            record("d", "2.0", "2020-01-01T00:00:00Z", &[]),
        ]);
        let g = resolve(&index, &rel("a", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        // BFS reaches b's requirement first, so d resolves at 1.0.
        assert!(g.contains(&rel("d", "1.0")));
        assert!(!g.contains(&rel("d", "2.0")));
        assert_eq!(g.unresolved.len(), 1);
        assert_eq!(g.unresolved[0].reason, UnresolvedReason::ConflictIgnored);
        assert_eq!(g.unresolved[0].requirer, rel("c", "1.0"));
        // The conflicting edge still exists.
        assert_eq!(g.out_edges(&rel("c", "1.0")), &[rel("d", "1.0")]);
    }

    #[test]
    fn time_filter_excludes_later_uploads() {
        let index = index_from(&[
            record("a", "1.0", "2020-01-01T00:00:00Z", &["b"]),
            record("b", "1.0", "2020-01-01T00:00:00Z", &[]),
            record("b", "2.0", "2022-01-01T00:00:00Z", &[]),
        ]);
        let g = resolve(&index, &rel("a", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        assert!(g.contains(&rel("b", "1.0")));
        let g2 = resolve(&index, &rel("a", "1.0"), t("2023-01-01"), &MarkerEnv::default()).unwrap();
        assert!(g2.contains(&rel("b", "2.0")));
    }

    #[test]
    fn unsatisfiable_requirement_is_recorded_and_skipped() {
        let index = index_from(&[
            record("a", "1.0", "2020-01-01T00:00:00Z", &["b>=9.0"]),
            record("b", "1.0", "2020-01-01T00:00:00Z", &[]),
        ]);
        let g = resolve(&index, &rel("a", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.unresolved.len(), 1);
        assert_eq!(g.unresolved[0].reason, UnresolvedReason::Unsatisfiable);
    }

    #[test]
    fn extra_gated_requirement_needs_activation() {
        let index = index_from(&[
            record("a", "1.0", "2020-01-01T00:00:00Z", &["b[fast]"]),
            record("b", "1.0", "2020-01-01T00:00:00Z", &["c; extra == 'fast'", "d; extra == 'slow'"]),
            record("c", "1.0", "2020-01-01T00:00:00Z", &[]),
            record("d", "1.0", "2020-01-01T00:00:00Z", &[]),
        ]);
        let g = resolve(&index, &rel("a", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        assert!(g.contains(&rel("c", "1.0")), "requested extra activates the gated dep");
        assert!(!g.contains(&rel("d", "1.0")), "unrequested extra stays off");
    }

    #[test]
    fn cycles_terminate() {
        let index = index_from(&[
            record("a", "1.0", "2020-01-01T00:00:00Z", &["b"]),
            record("b", "1.0", "2020-01-01T00:00:00Z", &["a"]),
        ]);
        let g = resolve(&index, &rel("a", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.out_edges(&rel("b", "1.0")), &[rel("a", "1.0")]);
    }

    #[test]
    fn metrics_for_root_and_direct_dep() {
        let index = index_from(&[
            record("a", "1.0", "2020-01-01T00:00:00Z", &["b"]),
            record("b", "1.0", "2020-01-01T00:00:00Z", &["c"]),
            record("c", "1.0", "2020-01-01T00:00:00Z", &[]),
        ]);
        let g = resolve(&index, &rel("a", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        let root = graph_metrics(&g, &rel("a", "1.0")).unwrap();
        assert_eq!((root.depth, root.in_degree), (0, 0));
        let direct = graph_metrics(&g, &rel("b", "1.0")).unwrap();
        assert_eq!(direct.depth, 1);
        let transitive = graph_metrics(&g, &rel("c", "1.0")).unwrap();
        assert_eq!((transitive.depth, transitive.in_degree, transitive.out_degree), (2, 1, 0));
        assert!(graph_metrics(&g, &rel("zz", "9.9")).is_err());
        let path = witness_path(&g, &rel("c", "1.0")).unwrap();
        assert_eq!(path, vec![rel("a", "1.0"), rel("b", "1.0"), rel("c", "1.0")]);
    }

    #[test]
    fn graph_serializes_with_nodes_edges_and_unresolved() {
        let index = index_from(&[
            record("a", "1.0", "2020-01-01T00:00:00Z", &["b>=2.0", "b"]),
            record("b", "1.0", "2020-01-01T00:00:00Z", &[]),
        ]);
        let g = resolve(&index, &rel("a", "1.0"), t("2021-01-01"), &MarkerEnv::default()).unwrap();
        let json = g.to_json();
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(doc["root"], "a==1.0");
        assert!(doc["nodes"].as_array().unwrap().len() >= 1);
        assert!(doc["edges"].is_array());
        assert!(doc["unresolved"].is_array());
    }
}
