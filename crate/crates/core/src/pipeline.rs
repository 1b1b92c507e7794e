//! End-to-end workflow: build, disrupt, baseline, remediate, evaluate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accessibility::{
    acc_cluster, acc_line, acc_pairing, accessibility_field, node_scores, AccessError, AccessibilityField,
};
use crate::disruption::{build_replacement, disrupt, gen_demand, DisruptionError};
use crate::full_ip::{IpInstance, PlanView};
use crate::net_model::{NetError, NodeId, Terminal, TransitNetwork};
use crate::report::{delta_field, ecdf, mean_ratio, operating_distance, ReportError, ReportSet};
use crate::router::{RouterError, RouterParams, RoutingGraph};
use crate::scalar::Scalar;
use crate::scenario::{Parameters, ScenarioConfig, ScenarioError};
use crate::stage1::{
    assign_consolidation, cluster_nodes, enumerate_candidates, extendable_lines, CandidateExtension, Cluster,
    ConsolidationAssignment, Stage1Error,
};
use crate::stage2::{
    realize_plan, solve_allocation, AllocationProblem, Candidate, ClusterDemand, Family, RemediationPlan, Stage2Error,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Access(#[from] AccessError),
    #[error(transparent)]
    Disruption(#[from] DisruptionError),
    #[error(transparent)]
    Stage1(#[from] Stage1Error),
    #[error(transparent)]
    Stage2(#[from] Stage2Error),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("no stations to remediate")]
    NothingDisrupted,
}

/// Accessibility field of a network snapshot.
pub fn evaluate<T: Scalar>(
    network: &TransitNetwork<T>,
    router: &RouterParams<T>,
) -> Result<AccessibilityField<T>, PipelineError> {
    let graph = RoutingGraph::build(network, router)?;
    Ok(accessibility_field(&graph)?)
}

/// G^O from a scenario.
pub fn build<T: Scalar>(config: &ScenarioConfig, amenities: &[[f64; 2]]) -> Result<TransitNetwork<T>, PipelineError> {
    Ok(config.build_network(amenities)?.0)
}

/// G^DISR and the station demand.
pub fn disrupt_scenario<T: Scalar>(
    original: &TransitNetwork<T>,
    config: &ScenarioConfig,
) -> Result<(TransitNetwork<T>, BTreeMap<NodeId, T>), PipelineError> {
    let line = original.line_by_name(&config.disrupted_line)?.id;
    let disrupted = disrupt(original, line)?;
    let demand = gen_demand(&disrupted.disrupted, &config.parameters.demand())?;
    Ok((disrupted, demand))
}

/// Stage 1 and stage 2 outputs.
#[derive(Clone, Debug)]
pub struct Remediation<T> {
    pub assignment: ConsolidationAssignment,
    pub clusters: Vec<Cluster<T>>,
    /// Aligned with `problem.candidates`.
    pub candidates: Vec<CandidateExtension<T>>,
    pub node_scores: BTreeMap<NodeId, T>,
    pub problem: AllocationProblem<T>,
    pub plan: RemediationPlan<T>,
    /// G^OURS.
    pub network: TransitNetwork<T>,
}

/// Stage 1 and the stage-2 allocation problem, without solving.
#[allow(clippy::type_complexity)]
pub fn prepare<T: Scalar>(
    disrupted: &TransitNetwork<T>,
    demand: &BTreeMap<NodeId, T>,
    params: &Parameters,
    n_max: u32,
) -> Result<
    (ConsolidationAssignment, Vec<Cluster<T>>, Vec<CandidateExtension<T>>, BTreeMap<NodeId, T>, AllocationProblem<T>),
    PipelineError,
> {
    if disrupted.disrupted.is_empty() {
        return Err(PipelineError::NothingDisrupted);
    }
    let assignment = assign_consolidation(disrupted, &disrupted.disrupted, T::lit(params.d_max_m));
    let clusters = cluster_nodes(disrupted, &assignment, demand, T::lit(params.eps_km), params.min_samples);
    let candidates = enumerate_candidates(disrupted, &clusters, params.max_exact, params.allow_heuristic)?;

    let graph = RoutingGraph::build(disrupted, &params.router())?;
    let lines = extendable_lines(disrupted);
    let mut scored_nodes = assignment.used.clone();
    for l in &lines {
        scored_nodes.extend(disrupted.lines[l].stops.iter().copied());
    }
    let scores = node_scores(&graph, &scored_nodes)?;
    let mut families = Vec::new();
    let mut line_scores = BTreeMap::new();
    for &l in &lines {
        let score = acc_line(&graph, l)?;
        line_scores.insert(l, score);
        families.push(Family { line: l, score, base_fleet: disrupted.lines[&l].fleet });
    }
    let mut cluster_scores = BTreeMap::new();
    for k in &clusters {
        let member: Vec<T> = k.members.iter().map(|n| scores[n]).collect();
        cluster_scores.insert(k.id, acc_cluster(&member)?);
    }
    let problem_candidates = candidates
        .iter()
        .map(|c| Candidate {
            line: c.line,
            terminal: c.terminal,
            cluster: c.cluster,
            score: acc_pairing(line_scores[&c.line], cluster_scores[&c.cluster]),
            length: c.route.length_km,
        })
        .collect();
    let problem = AllocationProblem {
        families,
        clusters: clusters.iter().map(|k| ClusterDemand { id: k.id, demand: k.demand }).collect(),
        candidates: problem_candidates,
        cap: T::lit(params.cap),
        n_max,
        weight_f2: T::lit(params.weight_f2),
        regular_floor: params.regular_floor,
    };
    Ok((assignment, clusters, candidates, scores, problem))
}

/// Both stages of the two-stage method, then G^OURS.
pub fn remediate<T: Scalar>(
    disrupted: &TransitNetwork<T>,
    demand: &BTreeMap<NodeId, T>,
    params: &Parameters,
    n_max: u32,
) -> Result<Remediation<T>, PipelineError> {
    let (assignment, clusters, candidates, node_scores, problem) = prepare(disrupted, demand, params, n_max)?;
    let plan = solve_allocation(&problem)?;
    let network = realize_plan(disrupted, &problem, &plan, &candidates)?;
    Ok(Remediation { assignment, clusters, candidates, node_scores, problem, plan, network })
}

impl<T: Scalar> Remediation<T> {
    /// The plan in full-model terms.
    pub fn plan_view(&self) -> PlanView {
        let extensions = self
            .plan
            .pairings
            .iter()
            .map(|p| {
                let c = &self.candidates[p.candidate];
                (c.line, c.terminal, c.route.order.clone(), self.plan.extension_fleet(&self.problem, p.candidate))
            })
            .collect();
        let regular = self.plan.fleets.iter().map(|f| (f.line, (f.regular, f.added))).collect();
        PlanView { consolidation: self.assignment.node_of.clone(), extensions, regular }
    }

    /// Full-model instance matching this remediation's inputs.
    pub fn ip_instance(
        &self,
        disrupted: &TransitNetwork<T>,
        demand: &BTreeMap<NodeId, T>,
        params: &Parameters,
    ) -> IpInstance<T> {
        let line_scores = self.problem.families.iter().map(|f| (f.line, f.score)).collect();
        IpInstance::from_network(
            disrupted,
            demand,
            &line_scores,
            &self.node_scores,
            T::lit(params.d_max_m),
            T::lit(params.cap),
            self.problem.n_max,
            T::lit(params.weight_f2),
        )
    }

    pub fn document(&self, disrupted: &TransitNetwork<T>) -> PlanDocument {
        let name = |n: &NodeId| disrupted.nodes[n.0].name.clone();
        let extensions = self
            .plan
            .pairings
            .iter()
            .map(|p| {
                let c = &self.candidates[p.candidate];
                ExtensionDoc {
                    line: disrupted.lines[&c.line].name.clone(),
                    terminal: c.terminal,
                    cluster: c.cluster,
                    route: c.route.order.iter().map(name).collect(),
                    length_km: c.route.length_km.to_real(),
                    exact_route: c.route.exact,
                    fleet: self.plan.extension_fleet(&self.problem, p.candidate),
                }
            })
            .collect();
        let fleets = self
            .plan
            .fleets
            .iter()
            .map(|f| FleetDoc {
                line: disrupted.lines[&f.line].name.clone(),
                base: disrupted.lines[&f.line].fleet,
                regular: f.regular,
                ext_a: f.ext_a,
                ext_b: f.ext_b,
                added: f.added,
            })
            .collect();
        PlanDocument {
            consolidation: self.assignment.node_of.iter().map(|(d, n)| (name(d), name(n))).collect(),
            clusters: self
                .clusters
                .iter()
                .map(|k| ClusterDoc {
                    id: k.id,
                    members: k.members.iter().map(name).collect(),
                    demand: k.demand.to_real(),
                })
                .collect(),
            extensions,
            fleets,
            n_max: self.problem.n_max,
            f1: self.plan.f1.to_real(),
            f2: self.plan.f2.to_real(),
            f: self.plan.f.to_real(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub id: usize,
    pub members: Vec<String>,
    pub demand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionDoc {
    pub line: String,
    pub terminal: Terminal,
    pub cluster: usize,
    pub route: Vec<String>,
    pub length_km: f64,
    pub exact_route: bool,
    pub fleet: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetDoc {
    pub line: String,
    pub base: u32,
    pub regular: i64,
    pub ext_a: i64,
    pub ext_b: i64,
    pub added: i64,
}

/// Human-readable remediation plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub consolidation: BTreeMap<String, String>,
    pub clusters: Vec<ClusterDoc>,
    pub extensions: Vec<ExtensionDoc>,
    pub fleets: Vec<FleetDoc>,
    pub n_max: u32,
    pub f1: f64,
    pub f2: f64,
    pub f: f64,
}

/// Median of each decile of `improvement`, with tiles ordered by `impact`
/// ascending (most negative impact first). Tiles missing either value are
/// skipped.
pub fn decile_medians<T: Scalar>(impact: &[Option<T>], improvement: &[Option<T>]) -> Vec<T> {
    let mut pairs: Vec<(T, T)> = impact.iter().zip(improvement).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.partial_cmp(&b.1).expect("finite")));
    let n = pairs.len();
    (0..10)
        .filter_map(|d| {
            let (lo, hi) = (d * n / 10, (d + 1) * n / 10);
            if lo == hi {
                return None;
            }
            let mut v: Vec<T> = pairs[lo..hi].iter().map(|p| p.1).collect();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let m = v.len();
            Some(if m % 2 == 1 { v[m / 2] } else { (v[m / 2 - 1] + v[m / 2]) / T::lit(2.0) })
        })
        .collect()
}

/// The four snapshots of a study with their fields and the plan.
#[derive(Clone, Debug)]
pub struct Snapshots<T> {
    pub extra_buses: u32,
    pub original: TransitNetwork<T>,
    pub disrupted: TransitNetwork<T>,
    pub replacement: TransitNetwork<T>,
    pub ours: TransitNetwork<T>,
    pub plan: PlanDocument,
    pub orig: AccessibilityField<T>,
    pub disr: AccessibilityField<T>,
    pub repl: AccessibilityField<T>,
    pub ours_field: AccessibilityField<T>,
}

/// One full run at a given number of extra buses.
#[derive(Clone, Debug)]
pub struct Study<T> {
    pub demand: BTreeMap<NodeId, T>,
    pub remediation: Remediation<T>,
    pub snapshots: Snapshots<T>,
}

pub fn run_study<T: Scalar>(
    config: &ScenarioConfig,
    amenities: &[[f64; 2]],
    extra_buses: u32,
) -> Result<Study<T>, PipelineError> {
    let router = config.parameters.router();
    let original = build::<T>(config, amenities)?;
    let (disrupted, demand) = disrupt_scenario(&original, config)?;
    let replacement = build_replacement(&disrupted, extra_buses)?;
    let remediation = remediate(&disrupted, &demand, &config.parameters, extra_buses)?;
    let snapshots = Snapshots {
        extra_buses,
        orig: evaluate(&original, &router)?,
        disr: evaluate(&disrupted, &router)?,
        repl: evaluate(&replacement, &router)?,
        ours_field: evaluate(&remediation.network, &router)?,
        plan: remediation.document(&disrupted),
        ours: remediation.network.clone(),
        original,
        disrupted,
        replacement,
    };
    Ok(Study { demand, remediation, snapshots })
}

/// Comparison reports over the four snapshots.
pub fn study_reports<T: Scalar>(s: &Snapshots<T>) -> Result<ReportSet<T>, PipelineError> {
    let b = s.extra_buses;
    let mut r = ReportSet::default();
    r.fields.insert("orig".into(), s.orig.clone());
    r.fields.insert("disr".into(), s.disr.clone());
    r.fields.insert(format!("repl_b{b}"), s.repl.clone());
    r.fields.insert(format!("ours_b{b}"), s.ours_field.clone());
    let disr_vs_orig = delta_field(&s.disr, &s.orig)?;
    let ours_vs_repl = delta_field(&s.ours_field, &s.repl)?;
    r.deltas.insert("disr_vs_orig".into(), disr_vs_orig.clone());
    r.deltas.insert(format!("repl_b{b}_vs_orig"), delta_field(&s.repl, &s.orig)?);
    r.deltas.insert(format!("ours_b{b}_vs_orig"), delta_field(&s.ours_field, &s.orig)?);
    r.deltas.insert(format!("ours_b{b}_vs_repl_b{b}"), ours_vs_repl.clone());
    for (label, field) in &r.fields {
        r.ecdfs.insert(label.clone(), ecdf(&field.values)?);
    }
    r.map_network = Some(s.ours.clone());
    r.plan = Some(serde_json::to_value(&s.plan).expect("plan serializes"));
    let m = &mut r.scalars;
    m.insert("extra_buses".into(), b as f64);
    m.insert("mean_acc_orig".into(), s.orig.mean.to_real());
    m.insert("mean_ratio_disr".into(), mean_ratio(&s.disr, &s.orig)?.to_real());
    m.insert(format!("mean_ratio_repl_b{b}"), mean_ratio(&s.repl, &s.orig)?.to_real());
    m.insert(format!("mean_ratio_ours_b{b}"), mean_ratio(&s.ours_field, &s.orig)?.to_real());
    m.insert("operating_km_per_h_orig".into(), operating_distance(&s.original)?.to_real());
    m.insert(format!("operating_km_per_h_repl_b{b}"), operating_distance(&s.replacement)?.to_real());
    m.insert(format!("operating_km_per_h_ours_b{b}"), operating_distance(&s.ours)?.to_real());
    m.insert("objective_f".into(), s.plan.f);
    let medians = decile_medians(&disr_vs_orig.values, &ours_vs_repl.values);
    for (i, v) in medians.iter().enumerate() {
        m.insert(format!("median_improvement_decile_{i}"), v.to_real());
    }
    Ok(r)
}
