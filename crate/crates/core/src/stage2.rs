//! Cluster-to-extension pairing and fleet allocation.
//!
//! Maximizes `f = f1 - w2 * f2` where
//!
//! * `f1 = sum_l acc_l * x_l + sum_(l,k) acc_l^k * x_(l,ext)` over the regular
//!   lines and activated extensions, and
//! * `f2 = sum_(l,k) d_(l,k) * x_(l,ext)` is the extension distance term,
//!
//! subject to: every cluster served by exactly one extension and every
//! extension serving at most one cluster; `q_k <= cap * x` for the serving
//! extension; `1 <= x <= M` on activated extensions and `x = 0` elsewhere;
//! `x_l + x_a + x_b - N_l = n_l` with `n_l >= 0` per line family; and
//! `sum_l n_l <= N_max`.
//!
//! Given the pairing, the fleet problem is separable and linear, so its exact
//! optimum is available in closed form (see [`allocate_fleet`]). Pairings are
//! searched by depth-first branch and bound.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_model::{LineId, NetError, NetworkTag, Terminal, TransitNetwork};
use crate::scalar::{Coefficient, Scalar};
use crate::stage1::CandidateExtension;

#[derive(Debug, Error, PartialEq)]
pub enum Stage2Error {
    #[error("(19) capacity unreachable for cluster {cluster}: needs {needed} buses")]
    Infeasible { cluster: usize, needed: i64 },
    #[error("(20) cluster {0} has no candidate extension")]
    NoCandidate(usize),
    #[error("plan violates {0:?}")]
    InvalidPlan(Vec<Violation>),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One regular line family: the line and its two potential extensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family<C> {
    pub line: LineId,
    /// acc_l.
    pub score: C,
    /// N_l before remediation.
    pub base_fleet: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDemand<C> {
    pub id: usize,
    /// q_k.
    pub demand: C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate<C> {
    pub line: LineId,
    pub terminal: Terminal,
    pub cluster: usize,
    /// acc_l^k.
    pub score: C,
    /// d_(l,k) in km.
    pub length: C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem<C> {
    /// Ascending line id.
    pub families: Vec<Family<C>>,
    pub clusters: Vec<ClusterDemand<C>>,
    pub candidates: Vec<Candidate<C>>,
    /// Passengers per bus.
    pub cap: C,
    pub n_max: u32,
    /// Weight on f2.
    pub weight_f2: C,
    /// Lowest fleet kept on each regular line.
    pub regular_floor: u32,
}

impl<C: Coefficient> AllocationProblem<C> {
    /// M = N_max + sum_l N_l.
    pub fn big_m(&self) -> i64 {
        self.n_max as i64 + self.families.iter().map(|f| f.base_fleet as i64).sum::<i64>()
    }

    /// Buses cluster `k` needs from its serving extension: max(1, ceil(q_k / cap)).
    pub fn min_buses(&self, cluster: usize) -> i64 {
        let q = self.cluster(cluster).map_or(C::zero(), |c| c.demand);
        (q / self.cap).ceil_int().max(1)
    }

    fn cluster(&self, id: usize) -> Option<&ClusterDemand<C>> {
        self.clusters.iter().find(|c| c.id == id)
    }

    fn family_index(&self, line: LineId) -> Option<usize> {
        self.families.iter().position(|f| f.line == line)
    }

    /// Net value per bus on a candidate.
    pub fn candidate_value(&self, idx: usize) -> C {
        let c = &self.candidates[idx];
        c.score - self.weight_f2 * c.length
    }
}

/// Vehicles on one family after remediation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyFleet {
    pub line: LineId,
    /// x_l.
    pub regular: i64,
    /// x on the terminal-a extension.
    pub ext_a: i64,
    /// x on the terminal-b extension.
    pub ext_b: i64,
    /// n_l.
    pub added: i64,
}

impl FamilyFleet {
    pub fn extension(&self, terminal: Terminal) -> i64 {
        match terminal {
            Terminal::A => self.ext_a,
            Terminal::B => self.ext_b,
        }
    }

    fn extension_mut(&mut self, terminal: Terminal) -> &mut i64 {
        match terminal {
            Terminal::A => &mut self.ext_a,
            Terminal::B => &mut self.ext_b,
        }
    }
}

/// y: cluster served by candidate index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pairing {
    pub cluster: usize,
    pub candidate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemediationPlan<C> {
    /// Sorted by cluster id.
    pub pairings: Vec<Pairing>,
    /// Aligned with `problem.families`.
    pub fleets: Vec<FamilyFleet>,
    pub f1: C,
    pub f2: C,
    pub f: C,
}

impl<C: Coefficient> RemediationPlan<C> {
    /// x on the extension behind `candidate`, or zero when not activated.
    pub fn extension_fleet(&self, problem: &AllocationProblem<C>, candidate: usize) -> i64 {
        if !self.pairings.iter().any(|p| p.candidate == candidate) {
            return 0;
        }
        let c = &problem.candidates[candidate];
        self.fleets.iter().find(|f| f.line == c.line).map_or(0, |f| f.extension(c.terminal))
    }
}

/// f1 = sum acc_l * x_l + sum acc_l^k * x over activated pairings.
pub fn score_f1<C: Coefficient>(problem: &AllocationProblem<C>, pairings: &[Pairing], fleets: &[FamilyFleet]) -> C {
    let mut total = C::zero();
    for (family, fleet) in problem.families.iter().zip(fleets) {
        total += family.score * C::from_int(fleet.regular);
    }
    for p in pairings {
        let c = &problem.candidates[p.candidate];
        let x = fleets.iter().find(|f| f.line == c.line).map_or(0, |f| f.extension(c.terminal));
        total += c.score * C::from_int(x);
    }
    total
}

/// f2 = sum d * x over activated pairings.
pub fn score_f2<C: Coefficient>(problem: &AllocationProblem<C>, pairings: &[Pairing], fleets: &[FamilyFleet]) -> C {
    let mut total = C::zero();
    for p in pairings {
        let c = &problem.candidates[p.candidate];
        let x = fleets.iter().find(|f| f.line == c.line).map_or(0, |f| f.extension(c.terminal));
        total += c.length * C::from_int(x);
    }
    total
}

/// Constraint violated by a plan, tagged with its formulation number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub tag: String,
    pub detail: String,
}

fn violation(tag: &str, detail: String) -> Violation {
    Violation { tag: tag.to_string(), detail }
}

/// Check every stage-2 constraint. An empty result means feasible.
pub fn validate<C: Coefficient>(problem: &AllocationProblem<C>, plan: &RemediationPlan<C>) -> Vec<Violation> {
    let mut out = Vec::new();
    if plan.fleets.len() != problem.families.len() {
        out.push(violation("shape", format!("{} fleets for {} families", plan.fleets.len(), problem.families.len())));
        return out;
    }
    let m = problem.big_m();

    let mut served: BTreeMap<usize, usize> = BTreeMap::new();
    let mut used_ext: BTreeSet<(LineId, Terminal)> = BTreeSet::new();
    for p in &plan.pairings {
        let Some(c) = problem.candidates.get(p.candidate) else {
            out.push(violation("(20)", format!("candidate {} does not exist", p.candidate)));
            continue;
        };
        if c.cluster != p.cluster {
            out.push(violation("(20)", format!("candidate {} does not route cluster {}", p.candidate, p.cluster)));
        }
        *served.entry(p.cluster).or_default() += 1;
        if !used_ext.insert((c.line, c.terminal)) {
            out.push(violation("(20)", format!("extension {}{} serves more than one cluster", c.line, c.terminal)));
        }
    }
    for k in &problem.clusters {
        let n = served.get(&k.id).copied().unwrap_or(0);
        if n != 1 {
            out.push(violation("(20)", format!("cluster {} served by {n} extensions", k.id)));
        }
    }

    for p in &plan.pairings {
        let Some(c) = problem.candidates.get(p.candidate) else { continue };
        let x = plan.extension_fleet(problem, p.candidate);
        if problem.cluster(p.cluster).is_some_and(|k| k.demand > problem.cap * C::from_int(x)) {
            out.push(violation("(19)", format!("cluster {} needs more than {x} buses", p.cluster)));
        }
        if x < 1 {
            out.push(violation("(21)", format!("activated extension {}{} has no bus", c.line, c.terminal)));
        }
        if x > m {
            out.push(violation("(22)", format!("extension {}{} exceeds M = {m}", c.line, c.terminal)));
        }
    }

    let mut budget = 0i64;
    for (family, fleet) in problem.families.iter().zip(&plan.fleets) {
        if fleet.line != family.line {
            out.push(violation("shape", format!("fleet for {} listed under {}", fleet.line, family.line)));
        }
        for t in Terminal::BOTH {
            let active = used_ext.contains(&(family.line, t));
            if !active && fleet.extension(t) != 0 {
                out.push(violation(
                    "(22)",
                    format!("inactive extension {}{t} has {} buses", family.line, fleet.extension(t)),
                ));
            }
        }
        if fleet.regular < problem.regular_floor as i64 || fleet.regular < 0 {
            out.push(violation("floor", format!("line {} keeps {} buses", family.line, fleet.regular)));
        }
        if fleet.regular + fleet.ext_a + fleet.ext_b - family.base_fleet as i64 != fleet.added {
            out.push(violation("(17)", format!("line {} fleet does not balance", family.line)));
        }
        if fleet.added < 0 {
            out.push(violation("(17)", format!("line {} loses {} buses to other lines", family.line, -fleet.added)));
        }
        budget += fleet.added;
    }
    if budget > problem.n_max as i64 {
        out.push(violation("(18)", format!("adds {budget} buses, budget is {}", problem.n_max)));
    }
    out
}

/// Per-family allocation option: coefficient per bus and lower bound.
#[derive(Clone, Copy, Debug)]
struct Slot<C> {
    value: C,
    min: i64,
}

/// Options of one family: regular line, extension a, extension b.
type FamilySlots<C> = [Option<Slot<C>>; 3];

/// Exact fleet optimum for fixed options. Returns the allocation and its
/// value, or `None` when the mins cannot be met within the budget.
fn allocate_fleet<C: Coefficient>(
    problem: &AllocationProblem<C>,
    slots: &[FamilySlots<C>],
) -> Option<(Vec<[i64; 3]>, i64)> {
    let mut counts = Vec::with_capacity(slots.len());
    let mut required = 0i64;
    for (family, opts) in problem.families.iter().zip(slots) {
        let mut x = [0i64; 3];
        let mut total = 0;
        for (i, s) in opts.iter().enumerate() {
            if let Some(s) = s {
                x[i] = s.min;
                total += s.min;
            }
        }
        let base = family.base_fleet as i64;
        if total < base {
            let best = best_slot(opts).expect("regular slot always present");
            x[best] += base - total;
        } else {
            required += total - base;
        }
        counts.push(x);
    }
    let n_max = problem.n_max as i64;
    if required > n_max {
        return None;
    }
    let spare = n_max - required;
    if spare > 0 {
        let mut target: Option<(usize, usize, C)> = None;
        for (fi, opts) in slots.iter().enumerate() {
            if let Some(si) = best_slot(opts) {
                let v = opts[si].unwrap().value;
                if v > C::zero() && target.is_none_or(|(_, _, b)| v > b) {
                    target = Some((fi, si, v));
                }
            }
        }
        if let Some((fi, si, _)) = target {
            counts[fi][si] += spare;
        }
    }
    Some((counts, required))
}

fn best_slot<C: Coefficient>(opts: &FamilySlots<C>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in opts.iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|b| s.value > opts[b].unwrap().value) {
                best = Some(i);
            }
        }
    }
    best
}

fn slot_value<C: Coefficient>(slots: &[FamilySlots<C>], counts: &[[i64; 3]]) -> C {
    let mut total = C::zero();
    for (opts, x) in slots.iter().zip(counts) {
        for (s, &n) in opts.iter().zip(x) {
            if let Some(s) = s {
                total += s.value * C::from_int(n);
            }
        }
    }
    total
}

fn terminal_slot(t: Terminal) -> usize {
    match t {
        Terminal::A => 1,
        Terminal::B => 2,
    }
}

struct Search<'a, C> {
    problem: &'a AllocationProblem<C>,
    /// Cluster ids in branching order.
    order: Vec<usize>,
    /// Candidate indices per cluster id, in branching order.
    options: BTreeMap<usize, Vec<usize>>,
    best: Option<RemediationPlan<C>>,
    nodes: u64,
}

impl<'a, C: Coefficient> Search<'a, C> {
    fn base_slots(&self) -> Vec<FamilySlots<C>> {
        self.problem
            .families
            .iter()
            .map(|f| [Some(Slot { value: f.score, min: self.problem.regular_floor as i64 }), None, None])
            .collect()
    }

    fn slots_for(&self, chosen: &[Pairing]) -> Vec<FamilySlots<C>> {
        let mut slots = self.base_slots();
        for p in chosen {
            let c = &self.problem.candidates[p.candidate];
            let fi = self.problem.family_index(c.line).expect("candidate line is a family");
            slots[fi][terminal_slot(c.terminal)] =
                Some(Slot { value: self.problem.candidate_value(p.candidate), min: self.problem.min_buses(p.cluster) });
        }
        slots
    }

    /// Optimistic value of any completion of `chosen`.
    fn bound(&self, chosen: &[Pairing], depth: usize) -> Option<C> {
        let mut slots = self.slots_for(chosen);
        let taken: BTreeSet<(LineId, Terminal)> = chosen
            .iter()
            .map(|p| {
                let c = &self.problem.candidates[p.candidate];
                (c.line, c.terminal)
            })
            .collect();
        for &k in &self.order[depth..] {
            for &ci in &self.options[&k] {
                let c = &self.problem.candidates[ci];
                if taken.contains(&(c.line, c.terminal)) {
                    continue;
                }
                let fi = self.problem.family_index(c.line).expect("candidate line is a family");
                let v = self.problem.candidate_value(ci);
                let slot = &mut slots[fi][terminal_slot(c.terminal)];
                match slot {
                    Some(s) if s.value >= v => {}
                    _ => *slot = Some(Slot { value: v, min: 0 }),
                }
            }
        }
        let (counts, _) = allocate_fleet(self.problem, &slots)?;
        Some(slot_value(&slots, &counts))
    }

    fn leaf(&mut self, chosen: &[Pairing]) {
        let slots = self.slots_for(chosen);
        let Some((counts, _)) = allocate_fleet(self.problem, &slots) else { return };
        let fleets: Vec<FamilyFleet> = self
            .problem
            .families
            .iter()
            .zip(&counts)
            .map(|(f, x)| FamilyFleet {
                line: f.line,
                regular: x[0],
                ext_a: x[1],
                ext_b: x[2],
                added: x[0] + x[1] + x[2] - f.base_fleet as i64,
            })
            .collect();
        let mut pairings = chosen.to_vec();
        pairings.sort();
        let f1 = score_f1(self.problem, &pairings, &fleets);
        let f2 = score_f2(self.problem, &pairings, &fleets);
        let f = f1 - self.problem.weight_f2 * f2;
        if self.best.as_ref().is_none_or(|b| f > b.f) {
            self.best = Some(RemediationPlan { pairings, fleets, f1, f2, f });
        }
    }

    fn descend(&mut self, chosen: &mut Vec<Pairing>, depth: usize) {
        self.nodes += 1;
        if depth == self.order.len() {
            self.leaf(chosen);
            return;
        }
        let Some(ub) = self.bound(chosen, depth) else { return };
        if let Some(best) = &self.best {
            if ub < best.f - best.f.slack() {
                return;
            }
        }
        let k = self.order[depth];
        for ci in self.options[&k].clone() {
            let c = &self.problem.candidates[ci];
            let clash = chosen.iter().any(|p| {
                let o = &self.problem.candidates[p.candidate];
                o.line == c.line && o.terminal == c.terminal
            });
            if clash {
                continue;
            }
            chosen.push(Pairing { cluster: k, candidate: ci });
            self.descend(chosen, depth + 1);
            chosen.pop();
        }
    }
}

/// Search statistics of the last solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
}

/// Optimal plan by branch and bound over pairings, with the exact fleet
/// allocation at each leaf. The returned plan always passes [`validate`].
pub fn solve_allocation<C: Coefficient>(problem: &AllocationProblem<C>) -> Result<RemediationPlan<C>, Stage2Error> {
    solve_allocation_with_stats(problem).map(|(p, _)| p)
}

pub fn solve_allocation_with_stats<C: Coefficient>(
    problem: &AllocationProblem<C>,
) -> Result<(RemediationPlan<C>, SolveStats), Stage2Error> {
    let mut options: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in &problem.clusters {
        let mut cands: Vec<usize> = (0..problem.candidates.len())
            .filter(|&i| {
                problem.candidates[i].cluster == k.id && problem.family_index(problem.candidates[i].line).is_some()
            })
            .collect();
        if cands.is_empty() {
            return Err(Stage2Error::NoCandidate(k.id));
        }
        cands.sort_by(|&a, &b| {
            problem
                .candidate_value(b)
                .partial_cmp(&problem.candidate_value(a))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        options.insert(k.id, cands);
    }

    // each cluster alone must be coverable by some family
    for k in &problem.clusters {
        let need = problem.min_buses(k.id);
        let reachable = options[&k.id]
            .iter()
            .map(|&ci| {
                let fam = &problem.families[problem.family_index(problem.candidates[ci].line).unwrap()];
                fam.base_fleet as i64 - problem.regular_floor as i64 + problem.n_max as i64
            })
            .max()
            .unwrap_or(0);
        if need > reachable {
            return Err(Stage2Error::Infeasible { cluster: k.id, needed: need });
        }
    }

    let mut order: Vec<usize> = problem.clusters.iter().map(|k| k.id).collect();
    order.sort_by(|&a, &b| {
        let (qa, qb) = (problem.cluster(a).unwrap().demand, problem.cluster(b).unwrap().demand);
        qb.partial_cmp(&qa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });

    let mut search = Search { problem, order, options, best: None, nodes: 0 };
    search.descend(&mut Vec::new(), 0);
    let stats = SolveStats { nodes: search.nodes };
    match search.best {
        Some(plan) => {
            let violations = validate(problem, &plan);
            if violations.is_empty() {
                Ok((plan, stats))
            } else {
                Err(Stage2Error::InvalidPlan(violations))
            }
        }
        None => {
            let worst = problem
                .clusters
                .iter()
                .max_by(|a, b| a.demand.partial_cmp(&b.demand).unwrap_or(std::cmp::Ordering::Equal))
                .map_or(0, |k| k.id);
            Err(Stage2Error::Infeasible { cluster: worst, needed: problem.min_buses(worst) })
        }
    }
}

/// G^OURS: regular fleets set to x_l and every activated extension added
/// with its routed suffix and fleet.
pub fn realize_plan<C: Coefficient, T: Scalar>(
    disrupted: &TransitNetwork<T>,
    problem: &AllocationProblem<C>,
    plan: &RemediationPlan<C>,
    routes: &[CandidateExtension<T>],
) -> Result<TransitNetwork<T>, Stage2Error> {
    let violations = validate(problem, plan);
    if !violations.is_empty() {
        return Err(Stage2Error::InvalidPlan(violations));
    }
    let mut out = disrupted.clone();
    out.tag = NetworkTag::Ours;
    for fleet in &plan.fleets {
        out.set_fleet(fleet.line, fleet.regular as u32)?;
    }
    for p in &plan.pairings {
        let c = &problem.candidates[p.candidate];
        let route = &routes[p.candidate];
        debug_assert_eq!((route.line, route.terminal, route.cluster), (c.line, c.terminal, c.cluster));
        let x = plan.extension_fleet(problem, p.candidate);
        out.add_extension(c.line, c.terminal, &route.route.order, x as u32)?;
    }
    Ok(out)
}

/// Plan that keeps the disrupted network as is: no pairing, original fleets.
pub fn empty_plan<C: Coefficient>(problem: &AllocationProblem<C>) -> RemediationPlan<C> {
    let fleets: Vec<FamilyFleet> = problem
        .families
        .iter()
        .map(|f| FamilyFleet { line: f.line, regular: f.base_fleet as i64, ext_a: 0, ext_b: 0, added: 0 })
        .collect();
    let f1 = score_f1(problem, &[], &fleets);
    let f2 = C::zero();
    RemediationPlan { pairings: Vec::new(), fleets, f1, f2, f: f1 }
}

/// Move `count` buses of family `line` onto one of its extensions; test and
/// tooling helper that keeps (17) balanced.
pub fn shift_to_extension(fleet: &mut FamilyFleet, terminal: Terminal, count: i64) {
    fleet.regular -= count;
    *fleet.extension_mut(terminal) += count;
}
