//! Remediation of license incompatibilities in a dependency graph:
//! compatible-license enumeration plus minimal-cost alternative graphs found
//! by exact finite-domain optimization, converted to action plans.

mod actions;
mod clauses;
mod report;
mod solver;
mod vars;

pub use actions::{assignment_cost, diff_to_actions, RemediationAction};
pub use clauses::{build_constraints, Clause, EncodeDiagnostics};
pub use report::{render_report, ReportDocument};
pub use solver::{SearchProblem, SlotSet, SolverOutcome};
pub use vars::{build_vars, PackageVar, VarTable};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{detect, CompatibilityLabel};
use crate::index::{PackageIndex, Timestamp};
use crate::licensing::{CompatibilityMatrix, LicenseInfo, SpdxId};
use crate::model::{MarkerEnv, PackageName, ReleaseId, VersionKey};
use crate::resolver::{resolve, DependencyGraph, ResolveError};

/// A known package replacement preserving functionality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationRule {
    pub source: PackageName,
    pub target: PackageName,
}

impl MigrationRule {
    pub fn new(source: PackageName, target: PackageName) -> Result<Self, String> {
        if source == target {
            return Err(format!("migration rule maps {source} to itself"));
        }
        Ok(MigrationRule { source, target })
    }
}

/// Load migration rules from a JSON-lines file of {"source", "target"}
/// objects. Self-mapping rules are skipped with a message.
pub fn load_migrations(path: &Path) -> Result<(Vec<MigrationRule>, Vec<String>), String> {
    #[derive(Deserialize)]
    struct Line {
        source: String,
        target: String,
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rules = Vec::new();
    let mut skipped = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(line)
            .map_err(|e| format!("{} line {}: {e}", path.display(), lineno + 1))?;
        match MigrationRule::new(PackageName::new(&parsed.source), PackageName::new(&parsed.target)) {
            Ok(rule) => rules.push(rule),
            Err(msg) => skipped.push(format!("line {}: {msg}", lineno + 1)),
        }
    }
    Ok((rules, skipped))
}

/// Change-cost constants of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostModel {
    pub c_migration: i64,
    pub c_removal: i64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { c_migration: 10, c_removal: 100 }
    }
}

#[derive(Debug, Error)]
pub enum RemediatorError {
    #[error("unknown root release {0}")]
    UnknownRoot(ReleaseId),
    #[error("package universe has {size} packages, exceeding the cap of {cap}; restrict the index")]
    UniverseTooLarge { size: usize, cap: usize },
    #[error("no alternative graph satisfies the constraints")]
    NoSolution,
    #[error("solver exceeded its {0:?} budget")]
    SolverTimeout(Duration),
    #[error("assignment violates a clause: {0}")]
    InconsistentSolution(String),
}

impl From<ResolveError> for RemediatorError {
    fn from(e: ResolveError) -> Self {
        match e {
            ResolveError::UnknownRoot(id) => RemediatorError::UnknownRoot(id),
        }
    }
}

/// The assembled finite-domain problem.
pub struct SolverProblem {
    pub vars: VarTable,
    pub clauses: Vec<Clause>,
    pub cost_model: CostModel,
    pub migrations: Vec<MigrationRule>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveParams {
    pub n_plans: usize,
    pub timeout: Duration,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { n_plans: 5, timeout: Duration::from_secs(300) }
    }
}

/// One alternative graph expressed as actions. `changed` holds the new value
/// of every package the solution moved away from the baseline (None =
/// removed), which is the diff the cost is defined over.
#[derive(Debug, Clone, Serialize)]
pub struct RemediationPlan {
    pub actions: Vec<RemediationAction>,
    pub total_cost: i64,
    pub changed: BTreeMap<PackageName, Option<VersionKey>>,
    #[serde(skip)]
    pub resulting_graph: DependencyGraph,
}

/// Licenses the root could adopt: every license in the matrix that no
/// dependency's license is one-way incompatible with, ordered by descending
/// index popularity then lexicographically, truncated to `m_limit`.
pub fn compatible_licenses(
    g: &DependencyGraph,
    matrix: &CompatibilityMatrix,
    popularity: &BTreeMap<SpdxId, u64>,
    m_limit: usize,
) -> Vec<SpdxId> {
    let dep_licenses: BTreeSet<&SpdxId> = g
        .nodes
        .iter()
        .filter(|n| **n != g.root)
        .filter_map(|n| match g.license_of(n) {
            LicenseInfo::Known(id) if matrix.contains(id) => Some(id),
            _ => None,
        })
        .collect();
    let mut candidates: Vec<SpdxId> = matrix
        .licenses()
        .filter(|l| dep_licenses.iter().all(|dep| !matrix.pair_incompatible(dep, l)))
        .cloned()
        .collect();
    candidates.sort_by(|a, b| {
        let pa = popularity.get(a).copied().unwrap_or(0);
        let pb = popularity.get(b).copied().unwrap_or(0);
        pb.cmp(&pa).then_with(|| a.cmp(b))
    });
    candidates.truncate(m_limit);
    candidates
}

/// Baseline value per variable: the version the baseline graph resolved, or
/// 0 for packages outside it.
fn baseline_values(vars: &VarTable, baseline: &DependencyGraph) -> Vec<u32> {
    vars.vars
        .iter()
        .map(|var| {
            baseline
                .nodes
                .iter()
                .find(|n| n.name == var.name)
                .and_then(|n| var.value_for(&n.version))
                .unwrap_or(0)
        })
        .collect()
}

fn baseline_depths(baseline: &DependencyGraph) -> BTreeMap<PackageName, u32> {
    let mut depths = BTreeMap::new();
    depths.insert(baseline.root.name.clone(), 0);
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(baseline.root.clone());
    let mut seen: BTreeSet<ReleaseId> = BTreeSet::new();
    seen.insert(baseline.root.clone());
    while let Some(current) = queue.pop_front() {
        let d = depths[&current.name];
        for target in baseline.out_edges(&current) {
            if seen.insert(target.clone()) {
                depths.entry(target.name.clone()).or_insert(d + 1);
                queue.push_back(target.clone());
            }
        }
    }
    depths
}

/// Fold clauses into a searchable problem. Unary clauses prune domains here;
/// implications with an empty disjunct forbid their (package, value) pair.
fn compile<'a>(
    problem: &'a SolverProblem,
    baseline: &[u32],
    exclusions: &[Vec<usize>],
    order: Vec<usize>,
) -> SearchProblem<'a> {
    let vars = &problem.vars;
    let n = vars.len();
    let mut domains: Vec<SlotSet> =
        vars.vars.iter().map(|v| SlotSet::full(v.domain_size())).collect();
    let mut implications: Vec<Vec<Vec<(usize, SlotSet)>>> = vars
        .vars
        .iter()
        .map(|v| vec![Vec::new(); v.versions.len()])
        .collect();

    for clause in &problem.clauses {
        match clause {
            Clause::RootPinned { value } => {
                let root = vars.root_var;
                let only = SlotSet::from_values(vars.vars[root].domain_size(), &[*value]);
                domains[root].intersect_with(&only);
            }
            Clause::LicenseExclusion { package, value } => {
                domains[*package].remove(*value);
            }
            Clause::DependencyImplication { package, value, requirements } => {
                if requirements.iter().any(|(_, allowed)| allowed.is_empty()) {
                    domains[*package].remove(*value);
                    continue;
                }
                for (dep, allowed) in requirements {
                    let set = SlotSet::from_values(vars.vars[*dep].domain_size(), allowed);
                    implications[*package][*value as usize - 1].push((*dep, set));
                }
            }
            Clause::RootFreedom { .. } | Clause::SolutionExclusion { .. } => {}
        }
    }

    let mut source_targets: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut target_sources: Vec<Vec<usize>> = vec![Vec::new(); n];
    for rule in &problem.migrations {
        if let (Some(s), Some(t)) = (vars.index_of(&rule.source), vars.index_of(&rule.target)) {
            if !source_targets[s].contains(&t) {
                source_targets[s].push(t);
                target_sources[t].push(s);
            }
        }
    }
    for list in source_targets.iter_mut().chain(target_sources.iter_mut()) {
        list.sort();
    }

    let mut name_order: Vec<usize> = (0..n).collect();
    name_order.sort_by(|&a, &b| vars.vars[a].name.cmp(&vars.vars[b].name));

    SearchProblem {
        vars,
        domains,
        implications,
        exclusions: exclusions.to_vec(),
        baseline: baseline.to_vec(),
        source_targets,
        target_sources,
        cost: problem.cost_model,
        order,
        name_order,
    }
}

/// Enumerate up to `n_plans` cost-minimal alternative graphs. After each
/// solution an exclusion clause over its changed-and-present packages is
/// added; enumeration stops at `n_plans`, on unsatisfiability, or when a
/// solution changes nothing to a present version (its exclusion would be
/// empty).
pub fn solve_top_n(
    index: &PackageIndex,
    problem: &SolverProblem,
    baseline: &DependencyGraph,
    params: &SolveParams,
    env: &MarkerEnv,
) -> Result<Vec<RemediationPlan>, RemediatorError> {
    let vars = &problem.vars;
    let base_values = baseline_values(vars, baseline);
    let depths = baseline_depths(baseline);

    // Branching order: root first (a pinned singleton), then baseline nodes
    // deepest-first so that a removed package conflicts with its requirer
    // immediately rather than after a long chronological backtrack, then the
    // rest by name.
    let mut order = vec![vars.root_var];
    let mut baseline_vars: Vec<usize> = Vec::new();
    for node in &baseline.nodes {
        if let Some(var) = vars.index_of(&node.name) {
            if var != vars.root_var && !baseline_vars.contains(&var) {
                baseline_vars.push(var);
            }
        }
    }
    baseline_vars.reverse();
    order.extend(baseline_vars);
    let mut rest: Vec<usize> = (0..vars.len()).filter(|v| !order.contains(v)).collect();
    rest.sort_by(|&a, &b| vars.vars[a].name.cmp(&vars.vars[b].name));
    order.extend(rest);

    let mut plans: Vec<RemediationPlan> = Vec::new();
    let mut exclusions: Vec<Vec<usize>> = Vec::new();

    while plans.len() < params.n_plans {
        let search = compile(problem, &base_values, &exclusions, order.clone());
        let deadline = Instant::now() + params.timeout;
        let assignment = match solver::find_solution(&search, deadline) {
            SolverOutcome::Solution(a) => a,
            SolverOutcome::Unsat => break,
            SolverOutcome::Timeout => return Err(RemediatorError::SolverTimeout(params.timeout)),
        };

        let total_cost = assignment_cost(
            vars,
            &base_values,
            &assignment,
            &search.source_targets,
            &problem.cost_model,
        );
        let actions =
            diff_to_actions(vars, &base_values, &depths, &assignment, &search.source_targets);
        let resulting_graph =
            actions::assignment_to_graph(index, vars, &assignment, env, baseline.resolved_at);
        let changed: BTreeMap<PackageName, Option<VersionKey>> = assignment
            .iter()
            .enumerate()
            .filter(|(var, value)| **value != base_values[*var])
            .map(|(var, &value)| {
                (vars.vars[var].name.clone(), vars.vars[var].version_of(value).cloned())
            })
            .collect();
        let exclusion: Vec<usize> = assignment
            .iter()
            .enumerate()
            .filter(|(var, value)| **value != base_values[*var] && **value != 0)
            .map(|(var, _)| var)
            .collect();

        plans.push(RemediationPlan { actions, total_cost, changed, resulting_graph });
        if exclusion.is_empty() {
            break;
        }
        exclusions.push(exclusion);
    }

    if plans.is_empty() {
        return Err(RemediatorError::NoSolution);
    }
    Ok(plans)
}

#[derive(Debug, Clone)]
pub struct RemediationRequest {
    pub root: ReleaseId,
    pub at: Timestamp,
    pub n_plans: usize,
    pub m_licenses: usize,
    pub cost_model: CostModel,
    pub solver_timeout: Duration,
    pub universe_cap: usize,
    pub migrations: Vec<MigrationRule>,
    pub env: MarkerEnv,
}

impl RemediationRequest {
    pub fn new(root: ReleaseId, at: Timestamp) -> Self {
        RemediationRequest {
            root,
            at,
            n_plans: 5,
            m_licenses: 3,
            cost_model: CostModel::default(),
            solver_timeout: Duration::from_secs(300),
            universe_cap: 2000,
            migrations: Vec::new(),
            env: MarkerEnv::default(),
        }
    }
}

#[derive(Debug)]
pub struct RemediationOutcome {
    pub release: ReleaseId,
    pub baseline_label: CompatibilityLabel,
    pub baseline: DependencyGraph,
    pub licenses: Vec<SpdxId>,
    pub plans: Vec<RemediationPlan>,
    pub warnings: Vec<String>,
}

/// End-to-end remediation: resolve the baseline, label it, and when it is
/// incompatible enumerate compatible licenses and alternative graphs.
pub fn remediate(
    index: &PackageIndex,
    matrix: &CompatibilityMatrix,
    request: &RemediationRequest,
) -> Result<RemediationOutcome, RemediatorError> {
    let baseline = resolve(index, &request.root, request.at, &request.env)?;
    let (label, _findings, detect_diags) = detect(&baseline, matrix);

    let mut warnings = Vec::new();
    if request.cost_model.c_removal < request.cost_model.c_migration {
        warnings.push(format!(
            "cost model has c_removal ({}) below c_migration ({}); removals will be preferred over migrations",
            request.cost_model.c_removal, request.cost_model.c_migration
        ));
    }
    for id in &detect_diags.out_of_matrix {
        warnings.push(format!("license {id} is outside the loaded matrix; treated as unknown"));
    }

    if label != CompatibilityLabel::Incompatible {
        return Ok(RemediationOutcome {
            release: request.root.clone(),
            baseline_label: label,
            baseline,
            licenses: Vec::new(),
            plans: Vec::new(),
            warnings,
        });
    }

    let licenses = compatible_licenses(&baseline, matrix, index.license_popularity(), request.m_licenses);

    let root_record =
        index.release(&request.root).ok_or_else(|| RemediatorError::UnknownRoot(request.root.clone()))?;
    let vars = build_vars(index, root_record, &request.migrations, &request.env, request.universe_cap)?;
    let (clauses, encode_diags) =
        build_constraints(index, &vars, matrix, &request.migrations, &request.env);
    for entry in &encode_diags.unrecognizable {
        warnings.push(format!("dependency {entry} has an unrecognizable license; not constrained"));
    }
    for entry in &encode_diags.out_of_matrix {
        warnings.push(format!("dependency {entry} has a license outside the matrix; not constrained"));
    }

    let problem = SolverProblem {
        vars,
        clauses,
        cost_model: request.cost_model,
        migrations: request.migrations.clone(),
    };
    let params = SolveParams { n_plans: request.n_plans, timeout: request.solver_timeout };
    let plans = match solve_top_n(index, &problem, &baseline, &params, &request.env) {
        Ok(plans) => plans,
        Err(RemediatorError::NoSolution) => {
            warnings.push("no alternative dependency graph satisfies the constraints".to_string());
            Vec::new()
        }
        Err(e) => return Err(e),
    };

    Ok(RemediationOutcome {
        release: request.root.clone(),
        baseline_label: label,
        baseline,
        licenses,
        plans,
        warnings,
    })
}
