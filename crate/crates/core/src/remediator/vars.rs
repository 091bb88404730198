//! Finite-domain variable construction: one variable per package that may
//! appear in an alternative graph, discovered by breadth-first saturation
//! from the root's direct dependencies and applicable migration targets.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::index::{PackageIndex, ReleaseRecord};
use crate::model::{MarkerEnv, PackageName, Requirement, VersionKey};

use super::{MigrationRule, RemediatorError};

/// One package variable. Integer values: 0 means absent; value `i` in
/// `1..=k` selects `versions[i-1]` (ascending), so the newest release is
/// value `k`. In slot terms value `i` is slot `i - (k+1)`, mapping the oldest
/// release to `-k` and the newest to `-1`.
#[derive(Debug, Clone)]
pub struct PackageVar {
    pub name: PackageName,
    pub versions: Vec<VersionKey>,
    pub is_root: bool,
    /// Direct dependency of the root or a migration target: these get a root
    /// edge in reconstructed graphs when present.
    pub root_option: bool,
}

impl PackageVar {
    pub fn domain_size(&self) -> u32 {
        self.versions.len() as u32 + 1
    }

    pub fn version_of(&self, value: u32) -> Option<&VersionKey> {
        if value == 0 {
            None
        } else {
            self.versions.get(value as usize - 1)
        }
    }

    pub fn value_for(&self, version: &VersionKey) -> Option<u32> {
        self.versions.iter().position(|v| v == version).map(|i| i as u32 + 1)
    }

    /// Cost distance of adding this package at `value`, in version slots from
    /// absence: the newest release is cheapest at 1.
    pub fn slots_from_absent(&self, value: u32) -> i64 {
        debug_assert!(value > 0);
        self.versions.len() as i64 + 1 - value as i64
    }
}

#[derive(Debug, Clone)]
pub struct VarTable {
    pub vars: Vec<PackageVar>,
    pub by_name: BTreeMap<PackageName, usize>,
    pub root_var: usize,
    pub root_value: u32,
}

impl VarTable {
    pub fn index_of(&self, name: &PackageName) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Requirements of one release that are active under `env`. Extras carried by
/// requirements themselves are not modeled here: the encoding matches the
/// plain distribution-time graph, so extra-gated requirements are active only
/// when the environment itself activates the extra.
pub fn active_requirements<'a>(record: &'a ReleaseRecord, env: &MarkerEnv) -> Vec<&'a Requirement> {
    record
        .requires_dist
        .iter()
        .filter(|req| req.marker.as_ref().map(|m| m.eval(env)).unwrap_or(true))
        .collect()
}

/// Build the variable table by saturation: seed with the root's direct
/// dependencies and every migration target whose source is one of them, then
/// follow every requirement of every version of every reached package until
/// no new package appears. Domains cover all releases in the index plus 0.
pub fn build_vars(
    index: &PackageIndex,
    root_record: &ReleaseRecord,
    migrations: &[MigrationRule],
    env: &MarkerEnv,
    universe_cap: usize,
) -> Result<VarTable, RemediatorError> {
    let transitive_env = MarkerEnv { extras: Default::default(), ..env.clone() };

    let mut vars: Vec<PackageVar> = Vec::new();
    let mut by_name: BTreeMap<PackageName, usize> = BTreeMap::new();
    let mut queue: VecDeque<PackageName> = VecDeque::new();

    let push = |name: &PackageName,
                    vars: &mut Vec<PackageVar>,
                    by_name: &mut BTreeMap<PackageName, usize>,
                    queue: &mut VecDeque<PackageName>,
                    root_option: bool| {
        if let Some(&existing) = by_name.get(name) {
            if root_option {
                vars[existing].root_option = true;
            }
            return;
        }
        let releases = index.releases(name);
        if releases.is_empty() {
            return;
        }
        let var = PackageVar {
            name: name.clone(),
            versions: releases.iter().map(|r| r.id.version.clone()).collect(),
            is_root: false,
            root_option,
        };
        by_name.insert(name.clone(), vars.len());
        vars.push(var);
        queue.push_back(name.clone());
    };

    // The root is variable 0, pinned later to its own version.
    let root_versions: Vec<VersionKey> =
        index.releases(&root_record.id.name).iter().map(|r| r.id.version.clone()).collect();
    let root_value = root_versions
        .iter()
        .position(|v| v == &root_record.id.version)
        .expect("root release is in the index") as u32
        + 1;
    by_name.insert(root_record.id.name.clone(), 0);
    vars.push(PackageVar {
        name: root_record.id.name.clone(),
        versions: root_versions,
        is_root: true,
        root_option: false,
    });

    let direct: Vec<PackageName> = active_requirements(root_record, env)
        .iter()
        .map(|req| req.name.clone())
        .collect();
    for name in &direct {
        push(name, &mut vars, &mut by_name, &mut queue, true);
    }
    let mut targets: Vec<PackageName> = migrations
        .iter()
        .filter(|rule| direct.contains(&rule.source))
        .map(|rule| rule.target.clone())
        .collect();
    targets.sort();
    targets.dedup();
    for name in &targets {
        push(name, &mut vars, &mut by_name, &mut queue, true);
    }

    while let Some(name) = queue.pop_front() {
        if vars.len() > universe_cap {
            return Err(RemediatorError::UniverseTooLarge { size: vars.len(), cap: universe_cap });
        }
        for record in index.releases(&name) {
            for req in active_requirements(record, &transitive_env) {
                push(&req.name, &mut vars, &mut by_name, &mut queue, false);
            }
        }
    }
    if vars.len() > universe_cap {
        return Err(RemediatorError::UniverseTooLarge { size: vars.len(), cap: universe_cap });
    }

    Ok(VarTable { vars, by_name, root_var: 0, root_value })
}
