//! Constraint encoding over the package variables: dependency implications
//! per (package, version), relaxed root freedom, license exclusions, the
//! root pin, and solution-exclusion clauses added during enumeration.

use crate::index::PackageIndex;
use crate::licensing::{CompatibilityMatrix, LicenseInfo};
use crate::model::{constraint_matches, MarkerEnv};

use super::vars::{active_requirements, VarTable};
use super::MigrationRule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Clause {
    /// (package = value) implies, for each requirement, that the dependency
    /// variable takes one of the allowed values. An empty allowed list
    /// forbids the (package, value) pair outright.
    DependencyImplication { package: usize, value: u32, requirements: Vec<(usize, Vec<u32>)> },
    /// A direct dependency of the root or a migration target may be absent or
    /// take any release version; vacuously true under the domain encoding but
    /// kept so the problem mirrors its formulation.
    RootFreedom { package: usize },
    /// The version's license is one-way incompatible with the root's; the
    /// variable must not take this value.
    LicenseExclusion { package: usize, value: u32 },
    /// At least one of these variables must be absent. Added after each found
    /// solution over its changed-and-present packages.
    SolutionExclusion { packages: Vec<usize> },
    /// The root variable is fixed to its original version.
    RootPinned { value: u32 },
}

#[derive(Debug, Clone, Default)]
pub struct EncodeDiagnostics {
    /// Known licenses outside the matrix, left unconstrained.
    pub out_of_matrix: Vec<String>,
    /// Dependencies with unrecognizable licenses, never excluded.
    pub unrecognizable: Vec<String>,
}

/// Build the full clause set for a problem. License exclusions compare every
/// (package, version) against the root's current license; unrecognizable and
/// out-of-matrix versions are never excluded, only reported.
pub fn build_constraints(
    index: &PackageIndex,
    vars: &VarTable,
    matrix: &CompatibilityMatrix,
    _migrations: &[MigrationRule],
    env: &MarkerEnv,
) -> (Vec<Clause>, EncodeDiagnostics) {
    let mut clauses = Vec::new();
    let mut diags = EncodeDiagnostics::default();

    let root_var = &vars.vars[vars.root_var];
    let root_version = root_var.version_of(vars.root_value).expect("root value valid");
    let root_license = index
        .release(&crate::model::ReleaseId::new(root_var.name.clone(), root_version.clone()))
        .map(|r| r.license.clone())
        .unwrap_or(LicenseInfo::Unrecognizable);

    clauses.push(Clause::RootPinned { value: vars.root_value });
    for (id, var) in vars.vars.iter().enumerate() {
        if var.root_option {
            clauses.push(Clause::RootFreedom { package: id });
        }
    }

    let transitive_env = MarkerEnv { extras: Default::default(), ..env.clone() };
    for (id, var) in vars.vars.iter().enumerate() {
        let records = index.releases(&var.name);
        for (pos, record) in records.iter().enumerate() {
            let value = pos as u32 + 1;

            if !var.is_root {
                if let LicenseInfo::Known(dep_id) = &record.license {
                    match &root_license {
                        LicenseInfo::Known(root_id)
                            if matrix.contains(dep_id) && matrix.contains(root_id) =>
                        {
                            if matrix.pair_incompatible(dep_id, root_id) {
                                clauses.push(Clause::LicenseExclusion { package: id, value });
                            }
                        }
                        LicenseInfo::Known(_) if !matrix.contains(dep_id) => {
                            diags.out_of_matrix.push(format!("{}=={}", var.name, record.id.version));
                        }
                        _ => {}
                    }
                } else {
                    diags.unrecognizable.push(format!("{}=={}", var.name, record.id.version));
                }
            }

            // The root's own requirements are relaxed; every other present
            // version must have each of its requirements satisfied.
            if var.is_root {
                continue;
            }
            let reqs = active_requirements(record, &transitive_env);
            if reqs.is_empty() {
                continue;
            }
            let mut requirements = Vec::with_capacity(reqs.len());
            for req in reqs {
                let allowed: Vec<u32> = match vars.index_of(&req.name) {
                    Some(dep) => vars.vars[dep]
                        .versions
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| constraint_matches(v, &req.specifiers, false))
                        .map(|(i, _)| i as u32 + 1)
                        .collect(),
                    // Requirement on a package outside the universe: this
                    // version can never be present.
                    None => Vec::new(),
                };
                requirements.push((vars.index_of(&req.name).unwrap_or(usize::MAX), allowed));
            }
            // Rewrite unknown-package entries to a self-forbidding empty
            // implication on a valid variable id.
            let requirements: Vec<(usize, Vec<u32>)> = requirements
                .into_iter()
                .map(|(dep, allowed)| if dep == usize::MAX { (id, Vec::new()) } else { (dep, allowed) })
                .collect();
            clauses.push(Clause::DependencyImplication { package: id, value, requirements });
        }
    }

    diags.out_of_matrix.sort();
    diags.out_of_matrix.dedup();
    diags.unrecognizable.sort();
    diags.unrecognizable.dedup();
    (clauses, diags)
}
