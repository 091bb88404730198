//! Exact cost-minimal search over the finite-domain encoding: depth-first
//! branch and bound with forward checking. Each call returns the canonical
//! minimum under the total order (cost, sorted changed-package names,
//! version preference), so enumeration is fully deterministic.

use std::time::Instant;

use super::actions::assignment_cost;
use super::vars::VarTable;
use super::CostModel;

/// Small bitset over the values 0..=k of one variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSet {
    words: Vec<u64>,
}

impl SlotSet {
    pub fn empty(size: u32) -> Self {
        SlotSet { words: vec![0; (size as usize + 63) / 64] }
    }

    pub fn full(size: u32) -> Self {
        let mut set = Self::empty(size);
        for v in 0..size {
            set.insert(v);
        }
        set
    }

    pub fn from_values(size: u32, values: &[u32]) -> Self {
        let mut set = Self::empty(size);
        for &v in values {
            set.insert(v);
        }
        set
    }

    pub fn insert(&mut self, v: u32) {
        self.words[(v / 64) as usize] |= 1 << (v % 64);
    }

    pub fn remove(&mut self, v: u32) {
        self.words[(v / 64) as usize] &= !(1 << (v % 64));
    }

    pub fn contains(&self, v: u32) -> bool {
        let word = (v / 64) as usize;
        word < self.words.len() && self.words[word] & (1 << (v % 64)) != 0
    }

    pub fn intersect_with(&mut self, other: &SlotSet) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
        for w in self.words.iter_mut().skip(other.words.len()) {
            *w = 0;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(i, w)| {
            (0..64u32).filter_map(move |b| if w & (1 << b) != 0 { Some(i as u32 * 64 + b) } else { None })
        })
    }

    pub fn single(&self) -> Option<u32> {
        if self.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }
}

/// Compiled constraint problem ready for search. Unary clauses are already
/// folded into `domains`; implications hold only non-empty allowed sets.
pub struct SearchProblem<'a> {
    pub vars: &'a VarTable,
    pub domains: Vec<SlotSet>,
    /// per variable, per value-1: (dependency var, allowed values)
    pub implications: Vec<Vec<Vec<(usize, SlotSet)>>>,
    /// at least one listed var must be 0 in any solution
    pub exclusions: Vec<Vec<usize>>,
    pub baseline: Vec<u32>,
    /// migration structure: for var v, the target/source vars of rules
    pub source_targets: Vec<Vec<usize>>,
    pub target_sources: Vec<Vec<usize>>,
    pub cost: CostModel,
    /// static branching order
    pub order: Vec<usize>,
    /// vars sorted by package name, for canonical tie-breaking
    pub name_order: Vec<usize>,
}

pub enum SolverOutcome {
    Solution(Vec<u32>),
    Unsat,
    Timeout,
}

struct Incumbent {
    cost: i64,
    names: Vec<String>,
    pref: Vec<i64>,
    assignment: Vec<u32>,
}

/// For one exclusion-clause member: the set of variables forced absent when
/// the member is absent (every nonzero value of each closure variable
/// requires some other closure variable), with a removal-cost lower bound per
/// variable. `None` when the member can never be absent.
struct MemberClosure {
    vars: Vec<usize>,
    removal_lb: Vec<i64>,
}

/// Closure of `member` under "absent forces absent": start from the member
/// and repeatedly add variables all of whose present values require
/// something already in the set. Uses the initial domains, which every
/// branch only narrows, so membership stays valid during search.
fn member_closure(p: &SearchProblem<'_>, member: usize) -> Option<MemberClosure> {
    let n = p.vars.len();
    if !p.domains[member].contains(0) {
        return None;
    }

    // uncovered[v] = nonzero values of v with no requirement into the set yet
    let mut uncovered: Vec<u32> = vec![0; n];
    let mut covered: Vec<Vec<bool>> = Vec::with_capacity(n);
    let mut rev: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // dep -> (var, value idx)
    for v in 0..n {
        let k = p.vars.vars[v].versions.len();
        let mut flags = vec![false; k];
        for val in p.domains[v].iter().filter(|x| *x > 0) {
            uncovered[v] += 1;
            for (dep, _) in &p.implications[v][val as usize - 1] {
                rev[*dep].push((v, val as usize - 1));
            }
            flags[val as usize - 1] = false;
        }
        covered.push(flags);
    }

    let mut in_set = vec![false; n];
    in_set[member] = true;
    let mut set = vec![member];
    let mut queue = vec![member];
    while let Some(q) = queue.pop() {
        for &(v, val_idx) in &rev[q] {
            if in_set[v] || covered[v][val_idx] {
                continue;
            }
            if !p.domains[v].contains(val_idx as u32 + 1) {
                continue;
            }
            covered[v][val_idx] = true;
            uncovered[v] -= 1;
            if uncovered[v] == 0 {
                if !p.domains[v].contains(0) {
                    // a variable that can never be absent would be forced
                    // absent: the member itself can never be removed
                    return None;
                }
                in_set[v] = true;
                set.push(v);
                queue.push(v);
            }
        }
    }

    let removal_lb = set
        .iter()
        .map(|&v| {
            if p.baseline[v] == 0 {
                0
            } else {
                let pairable = p.source_targets[v].iter().any(|&t| p.baseline[t] == 0);
                if pairable {
                    p.cost.c_migration.min(p.cost.c_removal)
                } else {
                    p.cost.c_removal
                }
            }
        })
        .collect();
    Some(MemberClosure { vars: set, removal_lb })
}

struct Frame {
    domain_saves: Vec<(usize, SlotSet)>,
    lb_saves: Vec<(usize, i64)>,
    opt_before: i64,
    lb_before: i64,
}

struct Search<'a> {
    p: &'a SearchProblem<'a>,
    domains: Vec<SlotSet>,
    assigned: Vec<Option<u32>>,
    /// optimistic marginal charged for each assigned var
    charged: Vec<i64>,
    lb_cache: Vec<i64>,
    lb_sum: i64,
    opt_assigned: i64,
    /// per exclusion-clause member: its forced-absent closure
    closures: std::collections::BTreeMap<usize, Option<MemberClosure>>,
    incumbent: Option<Incumbent>,
    nodes: u64,
    deadline: Instant,
    timed_out: bool,
}

impl<'a> Search<'a> {
    /// Optimistic (never over-counting) marginal cost of `var = value`.
    /// Migration pairs are attributed to the removed source; paired additions
    /// count zero here and are settled exactly at leaves.
    fn marginal(&self, var: usize, value: u32) -> i64 {
        let baseline = self.p.baseline[var];
        if value == baseline {
            return 0;
        }
        if value == 0 {
            // A removal may still pair with an addable migration target.
            let pairable = self.p.source_targets[var].iter().any(|&t| {
                self.p.baseline[t] == 0
                    && match self.assigned[t] {
                        Some(v) => v > 0,
                        None => self.domains[t].iter().any(|v| v > 0),
                    }
            });
            if pairable {
                self.p.cost.c_migration.min(self.p.cost.c_removal)
            } else {
                self.p.cost.c_removal
            }
        } else if baseline == 0 {
            // An addition may be absorbed into a pair whose cost sits on the
            // removed source; only sources still removable count.
            let pairable = self.p.target_sources[var].iter().any(|&s| {
                self.p.baseline[s] > 0
                    && match self.assigned[s] {
                        Some(v) => v == 0,
                        None => self.domains[s].contains(0),
                    }
            });
            if pairable {
                0
            } else {
                self.p.vars.vars[var].slots_from_absent(value)
            }
        } else {
            (value as i64 - baseline as i64).abs()
        }
    }

    fn min_marginal(&self, var: usize) -> i64 {
        if self.domains[var].contains(self.p.baseline[var]) {
            return 0;
        }
        self.domains[var].iter().map(|v| self.marginal(var, v)).min().unwrap_or(0)
    }

    fn pick(&self) -> Option<usize> {
        let mut first_unassigned = None;
        for &var in &self.p.order {
            if self.assigned[var].is_none() {
                if self.domains[var].len() == 1 {
                    return Some(var);
                }
                if first_unassigned.is_none() {
                    first_unassigned = Some(var);
                }
            }
        }
        first_unassigned
    }

    fn save_domain(&mut self, frame: &mut Frame, var: usize) {
        if !frame.domain_saves.iter().any(|(v, _)| *v == var) {
            frame.domain_saves.push((var, self.domains[var].clone()));
        }
    }

    fn update_lb(&mut self, frame: &mut Frame, var: usize) {
        if self.assigned[var].is_some() {
            return;
        }
        let fresh = self.min_marginal(var);
        if fresh != self.lb_cache[var] {
            if !frame.lb_saves.iter().any(|(v, _)| *v == var) {
                frame.lb_saves.push((var, self.lb_cache[var]));
            }
            self.lb_sum += fresh - self.lb_cache[var];
            self.lb_cache[var] = fresh;
        }
    }

    /// Cheapest way any completion can satisfy every still-unsatisfied
    /// exclusion clause, assuming `hvar` takes `hval`: for each clause, the
    /// best member whose forced-absent closure is still coherent, charged the
    /// closure's removal bound beyond what the running bounds already count.
    /// Clauses may share a satisfier, so only the most expensive clause
    /// contributes.
    fn exclusion_extra(&self, hvar: usize, hval: u32) -> i64 {
        let mut worst = 0i64;
        for clause in &self.p.exclusions {
            let satisfied = clause.iter().any(|&m| {
                self.assigned[m] == Some(0) || (m == hvar && hval == 0)
            });
            if satisfied {
                continue;
            }
            let mut best: Option<i64> = None;
            'members: for &m in clause {
                if self.assigned[m].is_some() || m == hvar {
                    continue; // assigned nonzero, or hypothetically nonzero
                }
                if !self.domains[m].contains(0) {
                    continue;
                }
                let Some(Some(closure)) = self.closures.get(&m) else { continue };
                let mut extra = 0i64;
                for (i, &v) in closure.vars.iter().enumerate() {
                    let counted = if v == hvar {
                        // hypothetically assigned nonzero: removing m would
                        // contradict this branch
                        continue 'members;
                    } else {
                        match self.assigned[v] {
                            Some(val) if val > 0 => continue 'members,
                            Some(_) => self.charged[v],
                            None => self.lb_cache[v],
                        }
                    };
                    extra += closure.removal_lb[i] - counted;
                }
                let extra = extra.max(0);
                if best.map(|b| extra < b).unwrap_or(true) {
                    best = Some(extra);
                }
            }
            match best {
                // no member can satisfy this clause in the current branch
                None => return i64::MAX / 4,
                Some(extra) => worst = worst.max(extra),
            }
        }
        worst
    }

    /// Forward-check `var = value`; false on conflict. Mutations recorded in
    /// `frame` for undo.
    fn assign(&mut self, frame: &mut Frame, var: usize, value: u32) -> bool {
        self.assigned[var] = Some(value);
        self.charged[var] = self.marginal(var, value);
        self.lb_sum -= self.lb_cache[var];
        self.opt_assigned += self.marginal(var, value);

        if value > 0 {
            let implications = &self.p.implications[var][value as usize - 1];
            for (dep, allowed) in implications {
                let dep = *dep;
                match self.assigned[dep] {
                    Some(v) => {
                        if !allowed.contains(v) {
                            return false;
                        }
                    }
                    None => {
                        self.save_domain(frame, dep);
                        self.domains[dep].intersect_with(allowed);
                        if self.domains[dep].is_empty() {
                            return false;
                        }
                        self.update_lb(frame, dep);
                    }
                }
            }
            // Exclusion clauses: assigning nonzero may make a clause unit.
            for clause in &self.p.exclusions {
                if !clause.contains(&var) {
                    continue;
                }
                if clause.iter().any(|&m| self.assigned[m] == Some(0)) {
                    continue;
                }
                let candidates: Vec<usize> = clause
                    .iter()
                    .copied()
                    .filter(|&m| self.assigned[m].is_none() && self.domains[m].contains(0))
                    .collect();
                match candidates.len() {
                    0 => return false,
                    1 => {
                        let forced = candidates[0];
                        self.save_domain(frame, forced);
                        let mut only_zero = SlotSet::empty(self.p.vars.vars[forced].domain_size());
                        only_zero.insert(0);
                        self.domains[forced].intersect_with(&only_zero);
                        if self.domains[forced].is_empty() {
                            return false;
                        }
                        self.update_lb(frame, forced);
                    }
                    _ => {}
                }
            }
        }
        true
    }

    fn undo(&mut self, frame: Frame, var: usize) {
        self.assigned[var] = None;
        self.charged[var] = 0;
        for (v, set) in frame.domain_saves {
            self.domains[v] = set;
        }
        for (v, old) in frame.lb_saves {
            self.lb_cache[v] = old;
        }
        self.opt_assigned = frame.opt_before;
        self.lb_sum = frame.lb_before;
    }

    fn leaf(&mut self) {
        let assignment: Vec<u32> = self.assigned.iter().map(|a| a.expect("leaf is complete")).collect();
        let cost = assignment_cost(
            self.p.vars,
            &self.p.baseline,
            &assignment,
            &self.p.source_targets,
            &self.p.cost,
        );
        if let Some(best) = &self.incumbent {
            if cost > best.cost {
                return;
            }
        }
        let mut names: Vec<String> = assignment
            .iter()
            .enumerate()
            .filter(|(var, value)| **value != self.p.baseline[*var])
            .map(|(var, _)| self.p.vars.vars[var].name.to_string())
            .collect();
        names.sort();
        // Preference vector over name-sorted variables: prefer absent, then
        // newer versions.
        let pref: Vec<i64> = self
            .p
            .name_order
            .iter()
            .map(|&var| {
                let v = assignment[var];
                if v == 0 {
                    0
                } else {
                    self.p.vars.vars[var].domain_size() as i64 - v as i64
                }
            })
            .collect();
        let better = match &self.incumbent {
            None => true,
            Some(best) => (cost, &names, &pref) < (best.cost, &best.names, &best.pref),
        };
        if better {
            self.incumbent = Some(Incumbent { cost, names, pref, assignment });
        }
    }

    fn search(&mut self) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % 2048 == 0 && Instant::now() >= self.deadline {
            self.timed_out = true;
            return;
        }

        let Some(var) = self.pick() else {
            self.leaf();
            return;
        };

        let mut candidates: Vec<u32> = self.domains[var].iter().collect();
        candidates.sort_by_key(|&v| {
            let newer_first = if v == 0 {
                -1i64
            } else {
                self.p.vars.vars[var].domain_size() as i64 - v as i64
            };
            (self.marginal(var, v), newer_first)
        });

        for value in candidates {
            if let Some(best) = &self.incumbent {
                let bound = self.opt_assigned
                    + self.marginal(var, value)
                    + (self.lb_sum - self.lb_cache[var])
                    + self.exclusion_extra(var, value);
                if bound > best.cost {
                    continue;
                }
            }
            let mut frame = Frame {
                domain_saves: Vec::new(),
                lb_saves: Vec::new(),
                opt_before: self.opt_assigned,
                lb_before: self.lb_sum,
            };
            let ok = self.assign(&mut frame, var, value);
            if ok {
                self.search();
            }
            self.undo(frame, var);
            if self.timed_out {
                return;
            }
        }
    }
}

/// Find the canonical cost-minimal satisfying assignment, or report
/// unsatisfiability, within the wall-clock deadline.
pub fn find_solution(p: &SearchProblem<'_>, deadline: Instant) -> SolverOutcome {
    for domain in &p.domains {
        if domain.is_empty() {
            return SolverOutcome::Unsat;
        }
    }
    // An exclusion clause none of whose members can be 0 is unsatisfiable.
    for clause in &p.exclusions {
        if clause.is_empty() || clause.iter().all(|&m| !p.domains[m].contains(0)) {
            return SolverOutcome::Unsat;
        }
    }

    let n = p.vars.len();
    let mut closures = std::collections::BTreeMap::new();
    for clause in &p.exclusions {
        for &member in clause {
            closures.entry(member).or_insert_with(|| member_closure(p, member));
        }
    }
    let mut search = Search {
        p,
        domains: p.domains.clone(),
        assigned: vec![None; n],
        charged: vec![0; n],
        lb_cache: vec![0; n],
        lb_sum: 0,
        opt_assigned: 0,
        closures,
        incumbent: None,
        nodes: 0,
        deadline,
        timed_out: false,
    };
    for var in 0..n {
        search.lb_cache[var] = search.min_marginal(var);
        search.lb_sum += search.lb_cache[var];
    }
    search.search();
    if search.timed_out {
        return SolverOutcome::Timeout;
    }
    match search.incumbent {
        Some(best) => SolverOutcome::Solution(best.assignment),
        None => SolverOutcome::Unsat,
    }
}
