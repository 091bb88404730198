//! Shared test support: randomized fixture generation and independent
//! oracles. The oracles are deliberately written from scratch against the
//! behavioral rules, not by calling into the code they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use licomp::index::{IndexLoader, PackageIndex, Timestamp};
use licomp::licensing::{
    CompatibilityMatrix, LicenseCategory, LicenseInfo, NormalizationTables, SpdxId,
};
use licomp::model::{constraint_matches, MarkerEnv, PackageName, ReleaseId, VersionKey};
use licomp::resolver::DependencyGraph;

use rand::Rng;

pub fn load_inline_index(lines: &[String]) -> PackageIndex {
    IndexLoader::new(NormalizationTables::builtin()).load_str(&lines.join("\n")).0
}

// ---------------------------------------------------------------------------
// Random index generation

pub struct GeneratedIndex {
    pub index: PackageIndex,
    pub root: ReleaseId,
    pub resolve_at: Timestamp,
}

const VERSION_POOL: &[&str] = &["0.5", "1.0", "1.1", "2.0", "2.5", "3.0", "4.0"];
const TIME_POOL: &[&str] = &[
    "2019-03-01T00:00:00Z",
    "2020-01-15T00:00:00Z",
    "2020-09-01T00:00:00Z",
    "2021-04-01T00:00:00Z",
    "2021-11-01T00:00:00Z",
    "2022-06-01T00:00:00Z",
];

fn random_specifier<R: Rng>(rng: &mut R) -> String {
    let version = VERSION_POOL[rng.gen_range(0..VERSION_POOL.len())];
    match rng.gen_range(0..6) {
        0 => String::new(),
        1 => format!(">={version}"),
        2 => format!("<{version}"),
        3 => format!("=={version}"),
        4 => format!("!={version}"),
        _ => format!(">={},<{}", VERSION_POOL[rng.gen_range(0..3)], VERSION_POOL[rng.gen_range(3..VERSION_POOL.len())]),
    }
}

/// Random index for resolver cross-checks: up to `max_packages` packages with
/// up to `max_versions` versions each, random constraints and upload times.
pub fn generate_resolver_fixture<R: Rng>(
    rng: &mut R,
    max_packages: usize,
    max_versions: usize,
) -> GeneratedIndex {
    let n = rng.gen_range(2..=max_packages);
    let names: Vec<String> = (0..n).map(|i| format!("pkg{i}")).collect();
    let mut lines = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let version_count = rng.gen_range(1..=max_versions);
        let mut picks: Vec<&str> = Vec::new();
        while picks.len() < version_count {
            let v = VERSION_POOL[rng.gen_range(0..VERSION_POOL.len())];
            if !picks.contains(&v) {
                picks.push(v);
            }
        }
        for version in picks {
            let dep_count = rng.gen_range(0..=2.min(n - 1));
            let mut reqs = Vec::new();
            for _ in 0..dep_count {
                let target = loop {
                    let t = rng.gen_range(0..n);
                    if t != i {
                        break t;
                    }
                };
                reqs.push(format!("{}{}", names[target], random_specifier(rng)));
            }
            lines.push(
                serde_json::json!({
                    "name": name,
                    "version": version,
                    "upload_time": TIME_POOL[rng.gen_range(0..TIME_POOL.len())],
                    "requires_dist": reqs,
                    "spdx": "MIT",
                })
                .to_string(),
            );
        }
    }
    let index = load_inline_index(&lines);
    let root_name = PackageName::new(&names[0]);
    let root_version = index.releases(&root_name).last().expect("root has releases").id.clone();
    let resolve_at = Timestamp::parse(TIME_POOL[rng.gen_range(2..TIME_POOL.len())]).unwrap();
    GeneratedIndex { index, root: root_version, resolve_at }
}

/// Deterministic ecosystem-scale index: a ternary-tree topology rooted at
/// `perf000` whose first eight packages are direct dependencies, four
/// versions per package, and the newest version of `incompatible` packages
/// licensed GPL-3.0-only under an Apache-2.0 root.
pub fn generate_perf_index(packages: usize, incompatible: usize) -> (PackageIndex, ReleaseId) {
    let versions = ["1.0", "1.1", "2.0", "2.1"];
    let times = [
        "2019-06-01T00:00:00Z",
        "2020-06-01T00:00:00Z",
        "2021-06-01T00:00:00Z",
        "2022-06-01T00:00:00Z",
    ];
    let mut lines = Vec::new();
    for i in 0..packages {
        let name = format!("perf{i:03}");
        let reqs: Vec<String> = if i == 0 {
            (1..=8.min(packages - 1)).map(|j| format!("perf{j:03}")).collect()
        } else {
            (1..=3)
                .map(|k| 3 * i + k)
                .filter(|&j| j < packages)
                .map(|j| format!("perf{j:03}"))
                .collect()
        };
        for (vi, version) in versions.iter().enumerate() {
            let gpl = i >= 40 && i < 40 + incompatible && *version == "2.1";
            let spdx = if i == 0 {
                "Apache-2.0"
            } else if gpl {
                "GPL-3.0-only"
            } else {
                "MIT"
            };
            lines.push(
                serde_json::json!({
                    "name": name,
                    "version": version,
                    "upload_time": times[vi],
                    "requires_dist": reqs,
                    "spdx": spdx,
                })
                .to_string(),
            );
        }
    }
    let index = load_inline_index(&lines);
    let root_name = PackageName::new("perf000");
    let root = index.releases(&root_name).last().unwrap().id.clone();
    (index, root)
}

// ---------------------------------------------------------------------------
// Brute-force resolver written directly from the resolution rules

#[derive(Debug, PartialEq, Eq)]
pub struct OracleGraph {
    pub nodes: BTreeSet<ReleaseId>,
    pub edges: BTreeMap<ReleaseId, Vec<ReleaseId>>,
    pub unresolved: Vec<(ReleaseId, String)>,
}

/// Breadth-first, first-resolution-wins, highest satisfying version uploaded
/// in time, conflicts recorded and ignored, no backtracking.
pub fn oracle_resolve(
    index: &PackageIndex,
    root: &ReleaseId,
    t: Timestamp,
    env: &MarkerEnv,
) -> OracleGraph {
    let mut chosen: BTreeMap<PackageName, VersionKey> = BTreeMap::new();
    chosen.insert(root.name.clone(), root.version.clone());
    let mut nodes: BTreeSet<ReleaseId> = BTreeSet::new();
    nodes.insert(root.clone());
    let mut edges: BTreeMap<ReleaseId, Vec<ReleaseId>> = BTreeMap::new();
    let mut unresolved: Vec<(ReleaseId, String)> = Vec::new();

    let mut frontier: VecDeque<(ReleaseId, BTreeSet<String>)> = VecDeque::new();
    frontier.push_back((root.clone(), env.extras.clone()));

    while let Some((current, extras)) = frontier.pop_front() {
        let record = index.release(&current).expect("node exists");
        let local_env = MarkerEnv { extras: extras.clone(), ..env.clone() };
        for req in &record.requires_dist {
            if let Some(marker) = &req.marker {
                if !marker.eval(&local_env) {
                    continue;
                }
            }
            if let Some(existing) = chosen.get(&req.name) {
                let target = ReleaseId::new(req.name.clone(), existing.clone());
                if !constraint_matches(existing, &req.specifiers, false) {
                    unresolved.push((current.clone(), "conflict-ignored".to_string()));
                }
                edges.entry(current.clone()).or_default().push(target);
                continue;
            }
            // highest satisfying version uploaded at or before t
            let mut best: Option<VersionKey> = None;
            for candidate in index.releases(&req.name) {
                if candidate.upload_time > t {
                    continue;
                }
                if !constraint_matches(&candidate.id.version, &req.specifiers, false) {
                    continue;
                }
                if best.as_ref().map(|b| candidate.id.version > *b).unwrap_or(true) {
                    best = Some(candidate.id.version.clone());
                }
            }
            match best {
                Some(version) => {
                    let target = ReleaseId::new(req.name.clone(), version.clone());
                    chosen.insert(req.name.clone(), version);
                    nodes.insert(target.clone());
                    edges.entry(current.clone()).or_default().push(target.clone());
                    frontier.push_back((target, req.extras.clone()));
                }
                None => unresolved.push((current.clone(), "unsatisfiable".to_string())),
            }
        }
    }

    OracleGraph { nodes, edges, unresolved }
}

pub fn graphs_agree(ours: &DependencyGraph, oracle: &OracleGraph) -> Result<(), String> {
    let our_nodes: BTreeSet<ReleaseId> = ours.nodes.iter().cloned().collect();
    if our_nodes != oracle.nodes {
        return Err(format!("node sets differ:\n ours: {our_nodes:?}\n oracle: {:?}", oracle.nodes));
    }
    for node in &ours.nodes {
        let our_edges: Vec<ReleaseId> = ours.out_edges(node).to_vec();
        let oracle_edges = oracle.edges.get(node).cloned().unwrap_or_default();
        if our_edges != oracle_edges {
            return Err(format!(
                "edges of {node} differ:\n ours: {our_edges:?}\n oracle: {oracle_edges:?}"
            ));
        }
    }
    let ours_unresolved: Vec<(ReleaseId, String)> = ours
        .unresolved
        .iter()
        .map(|u| {
            let reason = match u.reason {
                licomp::resolver::UnresolvedReason::ConflictIgnored => "conflict-ignored",
                licomp::resolver::UnresolvedReason::Unsatisfiable => "unsatisfiable",
            };
            (u.requirer.clone(), reason.to_string())
        })
        .collect();
    if ours_unresolved != oracle.unresolved {
        return Err(format!(
            "unresolved lists differ:\n ours: {ours_unresolved:?}\n oracle: {:?}",
            oracle.unresolved
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Random remediation problems and the exhaustive-enumeration optimizer

pub struct GeneratedProblem {
    pub index: PackageIndex,
    pub matrix: CompatibilityMatrix,
    pub root: ReleaseId,
    pub resolve_at: Timestamp,
    pub migrations: Vec<(String, String)>,
}

/// Random problem: a handful of packages with random dependencies, a random
/// license universe with random one-way incompatible pairs, and random
/// migration rules.
pub fn generate_problem<R: Rng>(rng: &mut R, max_packages: usize, max_versions: usize) -> GeneratedProblem {
    let license_names = ["L0", "L1", "L2", "L3", "L4", "L5"];
    let mut licenses = BTreeSet::new();
    let mut categories = BTreeMap::new();
    for l in license_names {
        licenses.insert(SpdxId::new(l));
        let cat = match rng.gen_range(0..3) {
            0 => LicenseCategory::Permissive,
            1 => LicenseCategory::WeakCopyleft,
            _ => LicenseCategory::StrongCopyleft,
        };
        categories.insert(SpdxId::new(l), cat);
    }
    let mut incompatible = BTreeSet::new();
    let pair_count = rng.gen_range(0..=10);
    for _ in 0..pair_count {
        let a = license_names[rng.gen_range(0..license_names.len())];
        let b = license_names[rng.gen_range(0..license_names.len())];
        if a != b {
            incompatible.insert((SpdxId::new(a), SpdxId::new(b)));
        }
    }
    let matrix = CompatibilityMatrix::from_parts("random", licenses, categories, incompatible);

    let n = rng.gen_range(2..=max_packages);
    let names: Vec<String> = (0..n).map(|i| format!("pkg{i}")).collect();
    let mut lines = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let version_count = rng.gen_range(1..=max_versions);
        let mut picks: Vec<&str> = Vec::new();
        while picks.len() < version_count {
            let v = VERSION_POOL[rng.gen_range(0..VERSION_POOL.len())];
            if !picks.contains(&v) {
                picks.push(v);
            }
        }
        for version in picks {
            let dep_count = rng.gen_range(0..=2.min(n - 1));
            let mut reqs = Vec::new();
            for _ in 0..dep_count {
                let target = loop {
                    let t = rng.gen_range(0..n);
                    if t != i {
                        break t;
                    }
                };
                reqs.push(format!("{}{}", names[target], random_specifier(rng)));
            }
            // root occasionally unrecognizable, deps drawn from the universe
            let spdx = if rng.gen_bool(0.1) {
                "Unrecognizable".to_string()
            } else {
                license_names[rng.gen_range(0..license_names.len())].to_string()
            };
            lines.push(
                serde_json::json!({
                    "name": name,
                    "version": version,
                    "upload_time": TIME_POOL[rng.gen_range(0..TIME_POOL.len())],
                    "requires_dist": reqs,
                    "spdx": spdx,
                })
                .to_string(),
            );
        }
    }
    let index = load_inline_index(&lines);
    let root_name = PackageName::new(&names[0]);
    let root = index.releases(&root_name).last().expect("root exists").id.clone();

    let mut migrations = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            migrations.push((names[a].clone(), names[b].clone()));
        }
    }
    migrations.sort();
    migrations.dedup();

    GeneratedProblem {
        index,
        matrix,
        root,
        resolve_at: Timestamp::parse("2023-01-01T00:00:00Z").unwrap(),
        migrations,
    }
}

/// A solution found by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OraclePlan {
    pub cost: i64,
    /// package -> new version (None = absent), for changed packages only
    pub changed: BTreeMap<String, Option<String>>,
}

struct Universe {
    /// name -> versions ascending
    packages: BTreeMap<String, Vec<VersionKey>>,
    root: ReleaseId,
}

/// Saturation identical in meaning to the problem definition: root's active
/// direct dependencies plus migration targets for direct sources, expanded
/// through every version's active requirements.
fn build_universe(
    index: &PackageIndex,
    root: &ReleaseId,
    migrations: &[(String, String)],
    env: &MarkerEnv,
) -> Universe {
    let quiet_env = MarkerEnv { extras: BTreeSet::new(), ..env.clone() };
    let root_record = index.release(root).expect("root exists");
    let mut pending: Vec<PackageName> = Vec::new();
    for req in &root_record.requires_dist {
        let active = req.marker.as_ref().map(|m| m.eval(env)).unwrap_or(true);
        if active {
            pending.push(req.name.clone());
            for (source, target) in migrations {
                if PackageName::new(source) == req.name {
                    pending.push(PackageName::new(target));
                }
            }
        }
    }

    let mut packages: BTreeMap<String, Vec<VersionKey>> = BTreeMap::new();
    packages.insert(
        root.name.to_string(),
        index.releases(&root.name).iter().map(|r| r.id.version.clone()).collect(),
    );
    while let Some(name) = pending.pop() {
        if packages.contains_key(name.as_str()) {
            continue;
        }
        let releases = index.releases(&name);
        if releases.is_empty() {
            continue;
        }
        packages.insert(name.to_string(), releases.iter().map(|r| r.id.version.clone()).collect());
        for record in releases {
            for req in &record.requires_dist {
                let active = req.marker.as_ref().map(|m| m.eval(&quiet_env)).unwrap_or(true);
                if active {
                    pending.push(req.name.clone());
                }
            }
        }
    }
    Universe { packages, root: root.clone() }
}

/// Exhaustively enumerate all valid assignments, returning up to `n` plans in
/// the canonical order with solution-exclusion applied between them.
pub fn oracle_top_n(
    index: &PackageIndex,
    matrix: &CompatibilityMatrix,
    baseline: &DependencyGraph,
    migrations: &[(String, String)],
    c_migration: i64,
    c_removal: i64,
    n: usize,
    env: &MarkerEnv,
) -> Vec<OraclePlan> {
    let quiet_env = MarkerEnv { extras: BTreeSet::new(), ..env.clone() };
    let universe = build_universe(index, &baseline.root, migrations, env);
    let names: Vec<String> = universe.packages.keys().cloned().collect();

    let baseline_of = |name: &str| -> Option<VersionKey> {
        baseline
            .nodes
            .iter()
            .find(|node| node.name.as_str() == name)
            .map(|node| node.version.clone())
    };

    let root_license = index.release(&universe.root).expect("root").license.clone();

    // Every candidate assignment: per package None or one version.
    let domains: Vec<Vec<Option<VersionKey>>> = names
        .iter()
        .map(|name| {
            if name == universe.root.name.as_str() {
                vec![Some(universe.root.version.clone())]
            } else {
                let mut d: Vec<Option<VersionKey>> = vec![None];
                d.extend(universe.packages[name].iter().cloned().map(Some));
                d
            }
        })
        .collect();

    let license_ok = |name: &str, version: &VersionKey| -> bool {
        if name == universe.root.name.as_str() {
            return true;
        }
        let id = ReleaseId::new(PackageName::new(name), version.clone());
        let record = index.release(&id).expect("version exists");
        match (&record.license, &root_license) {
            (LicenseInfo::Known(dep), LicenseInfo::Known(root))
                if matrix.contains(dep) && matrix.contains(root) =>
            {
                !matrix.pair_incompatible(dep, root)
            }
            _ => true,
        }
    };

    let deps_ok = |assignment: &BTreeMap<String, Option<VersionKey>>| -> bool {
        for (name, value) in assignment {
            let Some(version) = value else { continue };
            if name == universe.root.name.as_str() {
                continue; // root requirements are relaxed
            }
            let id = ReleaseId::new(PackageName::new(name), version.clone());
            let record = index.release(&id).expect("version exists");
            for req in &record.requires_dist {
                let active = req.marker.as_ref().map(|m| m.eval(&quiet_env)).unwrap_or(true);
                if !active {
                    continue;
                }
                let satisfied = match assignment.get(req.name.as_str()) {
                    Some(Some(dep_version)) => {
                        constraint_matches(dep_version, &req.specifiers, false)
                    }
                    _ => false,
                };
                if !satisfied {
                    return false;
                }
            }
        }
        true
    };

    let plan_cost = |assignment: &BTreeMap<String, Option<VersionKey>>| -> i64 {
        let mut removed: Vec<&String> = Vec::new();
        let mut added: Vec<&String> = Vec::new();
        let mut total = 0i64;
        for name in &names {
            let before = baseline_of(name);
            let after = assignment[name].clone();
            match (before, after) {
                (Some(_), None) => removed.push(name),
                (None, Some(_)) => added.push(name),
                (Some(b), Some(a)) if b != a => {
                    let versions = &universe.packages[name];
                    let bi = versions.iter().position(|v| *v == b).unwrap() as i64;
                    let ai = versions.iter().position(|v| *v == a).unwrap() as i64;
                    total += (ai - bi).abs();
                }
                _ => {}
            }
        }
        let mut paired: BTreeSet<&String> = BTreeSet::new();
        removed.sort();
        for source in &removed {
            let mut options: Vec<&String> = added
                .iter()
                .filter(|t| {
                    !paired.contains(**t)
                        && migrations.iter().any(|(s, tt)| {
                            PackageName::new(s).as_str() == source.as_str()
                                && PackageName::new(tt).as_str() == t.as_str()
                        })
                })
                .copied()
                .collect();
            options.sort();
            if let Some(target) = options.first() {
                paired.insert(target);
                total += c_migration;
            } else {
                total += c_removal;
            }
        }
        for target in &added {
            if !paired.contains(target) {
                let versions = &universe.packages[*target];
                let ai = versions.iter().position(|v| Some(v) == assignment[*target].as_ref()).unwrap();
                total += versions.len() as i64 - ai as i64;
            }
        }
        total
    };

    // canonical key: (cost, changed names, per-package preference)
    let plan_key = |assignment: &BTreeMap<String, Option<VersionKey>>| -> (i64, Vec<String>, Vec<i64>) {
        let cost = plan_cost(assignment);
        let mut changed: Vec<String> = names
            .iter()
            .filter(|name| baseline_of(name) != assignment[*name])
            .cloned()
            .collect();
        changed.sort();
        let pref: Vec<i64> = names
            .iter()
            .map(|name| match &assignment[name] {
                None => 0,
                Some(v) => {
                    let versions = &universe.packages[name];
                    let pos = versions.iter().position(|x| x == v).unwrap() as i64;
                    versions.len() as i64 - pos
                }
            })
            .collect();
        (cost, changed, pref)
    };

    let mut plans: Vec<OraclePlan> = Vec::new();
    let mut exclusions: Vec<Vec<String>> = Vec::new();

    'outer: while plans.len() < n {
        let mut best: Option<(i64, Vec<String>, Vec<i64>, BTreeMap<String, Option<VersionKey>>)> =
            None;
        let mut cursor = vec![0usize; names.len()];
        loop {
            let assignment: BTreeMap<String, Option<VersionKey>> = names
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), domains[i][cursor[i]].clone()))
                .collect();

            let valid = assignment.iter().all(|(name, value)| match value {
                Some(v) => license_ok(name, v),
                None => true,
            }) && deps_ok(&assignment)
                && exclusions.iter().all(|clause| {
                    clause.iter().any(|name| assignment[name].is_none())
                });
            if valid {
                let key = plan_key(&assignment);
                let better = match &best {
                    None => true,
                    Some((c, names_key, pref, _)) => {
                        (key.0, &key.1, &key.2) < (*c, names_key, pref)
                    }
                };
                if better {
                    best = Some((key.0, key.1, key.2, assignment));
                }
            }

            // odometer
            let mut i = 0;
            loop {
                if i == names.len() {
                    break;
                }
                cursor[i] += 1;
                if cursor[i] < domains[i].len() {
                    break;
                }
                cursor[i] = 0;
                i += 1;
            }
            if i == names.len() {
                break;
            }
        }

        match best {
            None => break 'outer,
            Some((cost, _, _, assignment)) => {
                let changed: BTreeMap<String, Option<String>> = names
                    .iter()
                    .filter(|name| baseline_of(name) != assignment[*name])
                    .map(|name| {
                        (name.clone(), assignment[name].as_ref().map(|v| v.to_string()))
                    })
                    .collect();
                let exclusion: Vec<String> = changed
                    .iter()
                    .filter(|(_, v)| v.is_some())
                    .map(|(k, _)| k.clone())
                    .collect();
                plans.push(OraclePlan { cost, changed });
                if exclusion.is_empty() {
                    break;
                }
                exclusions.push(exclusion);
            }
        }
    }
    plans
}
