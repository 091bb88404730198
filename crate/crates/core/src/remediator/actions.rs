//! Diff interpretation: exact cost of an assignment under the objective,
//! conversion of solution diffs into developer-facing actions, and structural
//! reconstruction of the alternative graph from an assignment.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::index::{PackageIndex, Timestamp};
use crate::licensing::SpdxId;
use crate::model::{MarkerEnv, PackageName, ReleaseId, VersionKey};
use crate::resolver::DependencyGraph;

use super::vars::{active_requirements, VarTable};
use super::CostModel;

/// One recommended change. `ChangeLicense` renders as the report's first
/// item; the others make up dependency-change plans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum RemediationAction {
    ChangeLicense { targets: Vec<SpdxId> },
    Migrate { from: PackageName, to: PackageName, to_version: VersionKey },
    Remove { package: PackageName },
    Pin {
        package: PackageName,
        version: VersionKey,
        /// Depth of the package in the baseline graph; absent for additions.
        depth: Option<u32>,
    },
}

impl RemediationAction {
    /// The report phrasing: "Migrate X to Y", "Remove X", "Pin X to V".
    pub fn describe(&self) -> String {
        match self {
            RemediationAction::ChangeLicense { targets } => {
                format!("Change project license to {}", join_or(targets))
            }
            RemediationAction::Migrate { from, to, .. } => format!("Migrate {from} to {to}"),
            RemediationAction::Remove { package } => format!("Remove {package}"),
            RemediationAction::Pin { package, version, .. } => format!("Pin {package} to {version}"),
        }
    }
}

pub(super) fn join_or(ids: &[SpdxId]) -> String {
    match ids.len() {
        0 => String::new(),
        1 => ids[0].to_string(),
        2 => format!("{} or {}", ids[0], ids[1]),
        _ => {
            let head: Vec<String> = ids[..ids.len() - 1].iter().map(|i| i.to_string()).collect();
            format!("{}, or {}", head.join(", "), ids[ids.len() - 1])
        }
    }
}

/// Greedy migration pairing over a diff: removed sources in name order each
/// take the lexicographically smallest unpaired added target among their
/// rules. Returns (source var, target var) pairs.
pub(super) fn pair_migrations(
    vars: &VarTable,
    baseline: &[u32],
    assignment: &[u32],
    source_targets: &[Vec<usize>],
) -> Vec<(usize, usize)> {
    let mut removed: Vec<usize> = (0..vars.len())
        .filter(|&v| baseline[v] > 0 && assignment[v] == 0)
        .collect();
    removed.sort_by(|&a, &b| vars.vars[a].name.cmp(&vars.vars[b].name));
    let added: BTreeSet<usize> =
        (0..vars.len()).filter(|&v| baseline[v] == 0 && assignment[v] > 0).collect();

    let mut pairs = Vec::new();
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    for source in removed {
        let mut candidates: Vec<usize> = source_targets[source]
            .iter()
            .copied()
            .filter(|t| added.contains(t) && !taken.contains(t))
            .collect();
        candidates.sort_by(|&a, &b| vars.vars[a].name.cmp(&vars.vars[b].name));
        if let Some(&target) = candidates.first() {
            taken.insert(target);
            pairs.push((source, target));
        }
    }
    pairs
}

/// Total objective value of an assignment relative to the baseline:
/// `c_migration` per paired source/target, `c_removal` per unpaired removal,
/// version-slot distance for version changes, and slots-from-absent for
/// unpaired additions (the newest release is cheapest).
pub fn assignment_cost(
    vars: &VarTable,
    baseline: &[u32],
    assignment: &[u32],
    source_targets: &[Vec<usize>],
    cost: &CostModel,
) -> i64 {
    let pairs = pair_migrations(vars, baseline, assignment, source_targets);
    let paired_sources: BTreeSet<usize> = pairs.iter().map(|(s, _)| *s).collect();
    let paired_targets: BTreeSet<usize> = pairs.iter().map(|(_, t)| *t).collect();

    let mut total = cost.c_migration * pairs.len() as i64;
    for var in 0..vars.len() {
        let (b, a) = (baseline[var], assignment[var]);
        if a == b {
            continue;
        }
        if a == 0 {
            if !paired_sources.contains(&var) {
                total += cost.c_removal;
            }
        } else if b == 0 {
            if !paired_targets.contains(&var) {
                total += vars.vars[var].slots_from_absent(a);
            }
        } else {
            total += (a as i64 - b as i64).abs();
        }
    }
    total
}

/// Convert a solution into an ordered action list: direct-dependency actions
/// first, then by baseline depth, then lexicographic; additions last.
pub fn diff_to_actions(
    vars: &VarTable,
    baseline: &[u32],
    baseline_depths: &BTreeMap<PackageName, u32>,
    assignment: &[u32],
    source_targets: &[Vec<usize>],
) -> Vec<RemediationAction> {
    let pairs = pair_migrations(vars, baseline, assignment, source_targets);
    let paired_sources: BTreeSet<usize> = pairs.iter().map(|(s, _)| *s).collect();
    let paired_targets: BTreeSet<usize> = pairs.iter().map(|(_, t)| *t).collect();

    // (depth group, package name, action)
    let mut keyed: Vec<(u32, PackageName, RemediationAction)> = Vec::new();
    let depth_of = |var: usize| baseline_depths.get(&vars.vars[var].name).copied();

    for (source, target) in &pairs {
        let to_version = vars.vars[*target]
            .version_of(assignment[*target])
            .expect("paired target is present")
            .clone();
        keyed.push((
            depth_of(*source).unwrap_or(u32::MAX),
            vars.vars[*source].name.clone(),
            RemediationAction::Migrate {
                from: vars.vars[*source].name.clone(),
                to: vars.vars[*target].name.clone(),
                to_version,
            },
        ));
    }

    for var in 0..vars.len() {
        let (b, a) = (baseline[var], assignment[var]);
        if a == b {
            continue;
        }
        if a == 0 {
            if !paired_sources.contains(&var) {
                keyed.push((
                    depth_of(var).unwrap_or(u32::MAX),
                    vars.vars[var].name.clone(),
                    RemediationAction::Remove { package: vars.vars[var].name.clone() },
                ));
            }
        } else if b == 0 {
            if !paired_targets.contains(&var) {
                let version = vars.vars[var].version_of(a).expect("present value").clone();
                keyed.push((
                    u32::MAX,
                    vars.vars[var].name.clone(),
                    RemediationAction::Pin { package: vars.vars[var].name.clone(), version, depth: None },
                ));
            }
        } else {
            let version = vars.vars[var].version_of(a).expect("present value").clone();
            keyed.push((
                depth_of(var).unwrap_or(u32::MAX),
                vars.vars[var].name.clone(),
                RemediationAction::Pin {
                    package: vars.vars[var].name.clone(),
                    version,
                    depth: depth_of(var),
                },
            ));
        }
    }

    keyed.sort_by(|(da, na, _), (db, nb, _)| da.cmp(db).then_with(|| na.cmp(nb)));
    keyed.into_iter().map(|(_, _, action)| action).collect()
}

/// Rebuild the alternative graph structurally from an assignment: walk from
/// the root over its requirement targets plus present migration targets, then
/// follow each present release's active requirements. Root edges may violate
/// version constraints (that is what a pin is); non-root edges satisfy them
/// by construction.
pub fn assignment_to_graph(
    index: &PackageIndex,
    vars: &VarTable,
    assignment: &[u32],
    env: &MarkerEnv,
    resolved_at: Timestamp,
) -> DependencyGraph {
    let transitive_env = MarkerEnv { extras: Default::default(), ..env.clone() };
    let root_var = &vars.vars[vars.root_var];
    let root_id = ReleaseId::new(
        root_var.name.clone(),
        root_var.version_of(assignment[vars.root_var]).expect("root pinned").clone(),
    );

    let mut nodes: Vec<ReleaseId> = vec![root_id.clone()];
    let mut licenses = BTreeMap::new();
    let mut edges: BTreeMap<ReleaseId, Vec<ReleaseId>> = BTreeMap::new();
    let mut seen: BTreeSet<PackageName> = BTreeSet::new();
    seen.insert(root_id.name.clone());

    let record_of = |id: &ReleaseId| index.release(id).expect("assignment values exist in index");
    licenses.insert(root_id.clone(), record_of(&root_id).license.clone());

    let mut queue: Vec<ReleaseId> = vec![root_id.clone()];
    let mut qi = 0;
    while qi < queue.len() {
        let current = queue[qi].clone();
        qi += 1;
        let record = record_of(&current);
        let is_root = current == root_id;

        let mut targets: Vec<PackageName> = Vec::new();
        let req_env = if is_root { env } else { &transitive_env };
        for req in active_requirements(record, req_env) {
            targets.push(req.name.clone());
        }
        if is_root {
            // Present migration targets become new direct dependencies.
            let mut extra: Vec<PackageName> = vars
                .vars
                .iter()
                .enumerate()
                .filter(|(var, v)| {
                    v.root_option && assignment[*var] > 0 && !targets.contains(&v.name)
                })
                .map(|(_, v)| v.name.clone())
                .collect();
            extra.sort();
            targets.extend(extra);
        }

        for target in targets {
            let Some(var) = vars.index_of(&target) else { continue };
            let value = assignment[var];
            if value == 0 {
                continue;
            }
            let version = vars.vars[var].version_of(value).expect("present value").clone();
            let target_id = ReleaseId::new(target.clone(), version);
            edges.entry(current.clone()).or_default().push(target_id.clone());
            if seen.insert(target.clone()) {
                licenses.insert(target_id.clone(), record_of(&target_id).license.clone());
                nodes.push(target_id.clone());
                queue.push(target_id);
            }
        }
    }

    DependencyGraph { root: root_id, nodes, licenses, edges, resolved_at, unresolved: Vec::new() }
}
