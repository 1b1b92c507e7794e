//! The complete remediation integer program.
//!
//! The model covers consolidation (constraints 4-7), extension routing with
//! Miller-Tucker-Zemlin ordering (8-14), capacity (15, with the product
//! `z_dn * w_nl` linearized through `v_dnl`), activation (16), fleet balance
//! (17) and budget (18). It is serialized in CPLEX LP format and can be
//! solved exactly on tiny instances.
//!
//! Naming scheme, with node tokens `n<id>`, regular lines `l<id>` and their
//! extensions `l<id>a` / `l<id>b`; the terminal of an extension is the
//! dedicated vertex `t`:
//!
//! | variable    | meaning                                   |
//! |-------------|-------------------------------------------|
//! | `w_n_l`     | node n served by extension l              |
//! | `z_d_n`     | station d consolidated at node n          |
//! | `y_l`       | extension l activated                     |
//! | `x_l`       | vehicles on line l                        |
//! | `nadd_l`    | vehicles added to family l                |
//! | `u_i_l`     | position of vertex i on extension l       |
//! | `X_i_j_l`   | extension l runs from i directly to j     |
//! | `v_d_n_l`   | z_d_n * w_n_l                             |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_model::{LineId, Mode, NodeId, NodeKind, Terminal, TransitNetwork};
use crate::scalar::{Coefficient, Scalar};

#[derive(Debug, Error)]
pub enum IpError {
    #[error("model needs at least one {0}")]
    EmptySets(&'static str),
    #[error("{free} free binaries after presolve, limit is {limit}")]
    TooLarge { free: usize, limit: usize },
    #[error("model is infeasible")]
    Infeasible,
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("malformed LP file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Integer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: i64,
    pub ub: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint<C> {
    pub name: String,
    /// Formulation number (`"4"` ... `"18"`) or `"lin"` for the product
    /// linearization.
    pub tag: String,
    pub terms: Vec<(usize, C)>,
    pub sense: Sense,
    pub rhs: C,
}

impl<C: Coefficient> LinearConstraint<C> {
    pub fn activity(&self, values: &[i64]) -> C {
        self.terms.iter().fold(C::zero(), |acc, &(v, a)| acc + a * C::from_int(values[v]))
    }

    pub fn satisfied(&self, values: &[i64]) -> bool {
        let lhs = self.activity(values);
        let slack = self.rhs.slack().max_of(lhs.slack());
        match self.sense {
            Sense::Le => lhs <= self.rhs + slack,
            Sense::Ge => lhs >= self.rhs - slack,
            Sense::Eq => lhs <= self.rhs + slack && lhs >= self.rhs - slack,
        }
    }
}

/// Maximization model with integer variables only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpModel<C> {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint<C>>,
    pub objective: Vec<(usize, C)>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl<C: Coefficient> IpModel<C> {
    fn new() -> Self {
        IpModel { variables: Vec::new(), constraints: Vec::new(), objective: Vec::new(), index: BTreeMap::new() }
    }

    fn add_var(&mut self, name: String, kind: VarKind, lb: i64, ub: i64) -> usize {
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable { name, kind, lb, ub });
        id
    }

    fn add(&mut self, name: String, tag: &str, terms: Vec<(usize, C)>, sense: Sense, rhs: C) {
        self.constraints.push(LinearConstraint { name, tag: tag.to_string(), terms, sense, rhs });
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn count_tag(&self, tag: &str) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }

    pub fn objective_value(&self, values: &[i64]) -> C {
        self.objective.iter().fold(C::zero(), |acc, &(v, a)| acc + a * C::from_int(values[v]))
    }

    /// Violated constraints as `(tag, name)`, bound violations tagged `bounds`.
    pub fn check(&self, values: &[i64]) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (v, &x) in self.variables.iter().zip(values) {
            if x < v.lb || x > v.ub {
                out.push(("bounds".to_string(), v.name.clone()));
            }
        }
        for c in &self.constraints {
            if !c.satisfied(values) {
                out.push((c.tag.clone(), c.name.clone()));
            }
        }
        out
    }

    /// Value vector with every variable at zero and named entries overridden.
    pub fn assignment(&self, named: &BTreeMap<String, i64>) -> Result<Vec<i64>, IpError> {
        let mut values = vec![0; self.variables.len()];
        for (name, &v) in named {
            let id = self.var(name).ok_or_else(|| IpError::UnknownVariable(name.clone()))?;
            values[id] = v;
        }
        Ok(values)
    }
}

/// Linear stand-in for the accessibility objective, which is not linear in
/// the model variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    /// `sum acc_l x_l` over regular lines and extensions (an extension
    /// inherits its parent's score) `+ sum acc_n w_nl - w2 * sum d_ij X_ijl`.
    Surrogate,
    /// Feasibility only.
    Zero,
}

/// One regular line of the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpLine<C> {
    pub line: LineId,
    pub terminal_a: NodeId,
    pub terminal_b: NodeId,
    pub base_fleet: u32,
    pub score: C,
}

/// Everything the model needs, extracted from a network and scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpInstance<C> {
    /// D, ascending.
    pub stations: Vec<NodeId>,
    /// N: stations plus bus stops within `d_max_m` of a station, ascending.
    pub nodes: Vec<NodeId>,
    pub lines: Vec<IpLine<C>>,
    pub demand: BTreeMap<NodeId, C>,
    /// Symmetric distances in km between every pair of N plus terminals.
    pub dist_km: BTreeMap<(NodeId, NodeId), C>,
    pub node_scores: BTreeMap<NodeId, C>,
    pub d_max_m: C,
    pub cap: C,
    pub n_max: u32,
    pub weight_f2: C,
    pub objective: ObjectiveKind,
}

impl<C: Coefficient> IpInstance<C> {
    pub fn distance(&self, a: NodeId, b: NodeId) -> C {
        if a == b {
            return C::zero();
        }
        self.dist_km
            .get(&(a, b))
            .or_else(|| self.dist_km.get(&(b, a)))
            .copied()
            .expect("distance for every relevant pair")
    }

    /// Extensions in model order.
    pub fn extensions(&self) -> Vec<(usize, Terminal)> {
        (0..self.lines.len()).flat_map(|i| Terminal::BOTH.map(|t| (i, t))).collect()
    }

    pub fn terminal(&self, line: usize, t: Terminal) -> NodeId {
        match t {
            Terminal::A => self.lines[line].terminal_a,
            Terminal::B => self.lines[line].terminal_b,
        }
    }

    /// Instance over the regular bus lines of `network`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_network<T: Scalar>(
        network: &TransitNetwork<T>,
        demand: &BTreeMap<NodeId, T>,
        line_scores: &BTreeMap<LineId, T>,
        node_scores: &BTreeMap<NodeId, T>,
        d_max_m: T,
        cap: T,
        n_max: u32,
        weight_f2: T,
    ) -> Self {
        let stations = {
            let mut s = network.disrupted.clone();
            s.sort();
            s.dedup();
            s
        };
        let d_max_km = d_max_m / T::lit(1000.0);
        let mut nodes = stations.clone();
        for n in network.nodes.iter().filter(|n| n.kind == NodeKind::BusStop) {
            if stations.iter().any(|&d| network.road_km(d, n.id) <= d_max_km) {
                nodes.push(n.id);
            }
        }
        nodes.sort();
        nodes.dedup();
        let lines: Vec<IpLine<C>> = network
            .regular_lines()
            .filter(|l| l.mode == Mode::Bus)
            .map(|l| IpLine {
                line: l.id,
                terminal_a: l.terminal(Terminal::A),
                terminal_b: l.terminal(Terminal::B),
                base_fleet: l.fleet,
                score: C::from_real(line_scores.get(&l.id).copied().unwrap_or_default().to_real()),
            })
            .collect();
        let mut points: Vec<NodeId> = nodes.clone();
        for l in &lines {
            points.push(l.terminal_a);
            points.push(l.terminal_b);
        }
        points.sort();
        points.dedup();
        let mut dist_km = BTreeMap::new();
        for (i, &a) in points.iter().enumerate() {
            for &b in &points[i + 1..] {
                dist_km.insert((a, b), C::from_real(network.road_km(a, b).to_real()));
            }
        }
        let conv = |m: &BTreeMap<NodeId, T>| m.iter().map(|(&k, v)| (k, C::from_real(v.to_real()))).collect();
        IpInstance {
            stations,
            nodes,
            lines,
            demand: conv(demand),
            dist_km,
            node_scores: conv(node_scores),
            d_max_m: C::from_real(d_max_m.to_real()),
            cap: C::from_real(cap.to_real()),
            n_max,
            weight_f2: C::from_real(weight_f2.to_real()),
            objective: ObjectiveKind::Surrogate,
        }
    }
}

fn ext_token(line: LineId, t: Terminal) -> String {
    format!("{line}{t}")
}

/// `X_ij` arc: from (`None` is the terminal), to, variable index.
type Arc = (Option<NodeId>, NodeId, usize);

/// Build the full model. Variables and constraints are emitted in a fixed
/// order so that rebuilding from the same instance is byte-identical.
pub fn build_model<C: Coefficient>(inst: &IpInstance<C>) -> Result<IpModel<C>, IpError> {
    if inst.stations.is_empty() {
        return Err(IpError::EmptySets("disrupted station"));
    }
    if inst.nodes.is_empty() {
        return Err(IpError::EmptySets("consolidation node"));
    }
    if inst.lines.is_empty() {
        return Err(IpError::EmptySets("regular line"));
    }
    let mut m = IpModel::new();
    let nn = inst.nodes.len() as i64;
    let big_m = inst.n_max as i64 + inst.lines.iter().map(|l| l.base_fleet as i64).sum::<i64>();
    let exts = inst.extensions();
    let one = C::one();

    // variables
    let mut w = BTreeMap::new();
    for &n in &inst.nodes {
        for &(li, t) in &exts {
            let name = format!("w_{n}_{}", ext_token(inst.lines[li].line, t));
            w.insert((n, li, t), m.add_var(name, VarKind::Binary, 0, 1));
        }
    }
    let mut z = BTreeMap::new();
    for &d in &inst.stations {
        for &n in &inst.nodes {
            z.insert((d, n), m.add_var(format!("z_{d}_{n}"), VarKind::Binary, 0, 1));
        }
    }
    let mut y = BTreeMap::new();
    let mut x_ext = BTreeMap::new();
    let mut u_t = BTreeMap::new();
    let mut u = BTreeMap::new();
    let mut arcs: BTreeMap<(usize, Terminal), Vec<Arc>> = BTreeMap::new();
    for &(li, t) in &exts {
        let tok = ext_token(inst.lines[li].line, t);
        y.insert((li, t), m.add_var(format!("y_{tok}"), VarKind::Binary, 0, 1));
        x_ext.insert((li, t), m.add_var(format!("x_{tok}"), VarKind::Integer, 0, big_m));
        u_t.insert((li, t), m.add_var(format!("u_t_{tok}"), VarKind::Integer, 0, nn + 1));
        for &i in &inst.nodes {
            u.insert((i, li, t), m.add_var(format!("u_{i}_{tok}"), VarKind::Integer, 0, nn + 1));
        }
        let mut list = Vec::new();
        for &j in &inst.nodes {
            list.push((None, j, m.add_var(format!("X_t_{j}_{tok}"), VarKind::Binary, 0, 1)));
        }
        for &i in &inst.nodes {
            for &j in &inst.nodes {
                if i != j {
                    list.push((Some(i), j, m.add_var(format!("X_{i}_{j}_{tok}"), VarKind::Binary, 0, 1)));
                }
            }
        }
        arcs.insert((li, t), list);
    }
    let mut x_reg = Vec::new();
    let mut n_add = Vec::new();
    for l in &inst.lines {
        x_reg.push(m.add_var(format!("x_{}", l.line), VarKind::Integer, 0, big_m));
        n_add.push(m.add_var(format!("nadd_{}", l.line), VarKind::Integer, 0, inst.n_max as i64));
    }
    let mut v = BTreeMap::new();
    for &d in &inst.stations {
        for &n in &inst.nodes {
            for &(li, t) in &exts {
                let name = format!("v_{d}_{n}_{}", ext_token(inst.lines[li].line, t));
                v.insert((d, n, li, t), m.add_var(name, VarKind::Binary, 0, 1));
            }
        }
    }

    // (4) each node on at most one extension
    for &n in &inst.nodes {
        let terms = exts.iter().map(|&(li, t)| (w[&(n, li, t)], one)).collect();
        m.add(format!("c4_{n}"), "4", terms, Sense::Le, one);
    }
    // (5) each station consolidated exactly once
    for &d in &inst.stations {
        let terms = inst.nodes.iter().map(|&n| (z[&(d, n)], one)).collect();
        m.add(format!("c5_{d}"), "5", terms, Sense::Eq, one);
    }
    // (6) only at nodes served by an extension
    for &d in &inst.stations {
        for &n in &inst.nodes {
            let mut terms = vec![(z[&(d, n)], one)];
            terms.extend(exts.iter().map(|&(li, t)| (w[&(n, li, t)], -one)));
            m.add(format!("c6_{d}_{n}"), "6", terms, Sense::Le, C::zero());
        }
    }
    // (7) walking distance limit
    for &d in &inst.stations {
        for &n in &inst.nodes {
            let meters = inst.distance(d, n) * C::from_int(1000);
            m.add(format!("c7_{d}_{n}"), "7", vec![(z[&(d, n)], meters)], Sense::Le, inst.d_max_m);
        }
    }

    for &(li, t) in &exts {
        let tok = ext_token(inst.lines[li].line, t);
        let list = &arcs[&(li, t)];
        let out_of = |i: Option<NodeId>| list.iter().filter(move |a| a.0 == i).map(|a| a.2);
        let into = |j: NodeId| list.iter().filter(move |a| a.1 == j).map(|a| a.2);

        // (8) one arc leaves the terminal iff activated
        let mut terms: Vec<(usize, C)> = out_of(None).map(|a| (a, one)).collect();
        terms.push((y[&(li, t)], -one));
        m.add(format!("c8_{tok}"), "8", terms, Sense::Eq, C::zero());

        for &i in &inst.nodes {
            let wi = w[&(i, li, t)];
            // (9) flow: a node is left at most as often as it is entered
            let mut terms: Vec<(usize, C)> = into(i).map(|a| (a, one)).collect();
            terms.extend(out_of(Some(i)).map(|a| (a, -one)));
            m.add(format!("c9_{i}_{tok}"), "9", terms, Sense::Ge, C::zero());
            // (10) at most one outgoing arc, only from served nodes
            let mut terms: Vec<(usize, C)> = out_of(Some(i)).map(|a| (a, one)).collect();
            terms.push((wi, -one));
            m.add(format!("c10_{i}_{tok}"), "10", terms, Sense::Le, C::zero());
            // (11) served nodes are entered exactly once
            let mut terms: Vec<(usize, C)> = into(i).map(|a| (a, one)).collect();
            terms.push((wi, -one));
            m.add(format!("c11_{i}_{tok}"), "11", terms, Sense::Eq, C::zero());
        }
        // (12) MTZ ordering
        for &(from, j, arc) in list {
            let Some(i) = from else { continue };
            let terms = vec![
                (u[&(i, li, t)], one),
                (u[&(j, li, t)], -one),
                (arc, C::from_int(nn + 2)),
                (w[&(i, li, t)], -C::from_int(nn + 1)),
            ];
            m.add(format!("c12_{i}_{j}_{tok}"), "12", terms, Sense::Le, C::zero());
        }
        // (13) position bounds
        for &i in &inst.nodes {
            let ui = u[&(i, li, t)];
            let wi = w[&(i, li, t)];
            m.add(format!("c13lo_{i}_{tok}"), "13", vec![(ui, one), (wi, -C::from_int(2))], Sense::Ge, C::zero());
            m.add(format!("c13hi_{i}_{tok}"), "13", vec![(ui, one), (wi, -C::from_int(nn + 1))], Sense::Le, C::zero());
        }
        // (14) the terminal comes first
        m.add(format!("c14_{tok}"), "14", vec![(u_t[&(li, t)], one), (y[&(li, t)], -one)], Sense::Eq, C::zero());

        // (15) capacity over served stations, with v = z * w
        let mut terms = vec![(x_ext[&(li, t)], inst.cap)];
        for &d in &inst.stations {
            let q = inst.demand.get(&d).copied().unwrap_or_else(C::zero);
            for &n in &inst.nodes {
                terms.push((v[&(d, n, li, t)], -q));
            }
        }
        m.add(format!("c15_{tok}"), "15", terms, Sense::Ge, C::zero());
        for &d in &inst.stations {
            for &n in &inst.nodes {
                let (vv, zz, ww) = (v[&(d, n, li, t)], z[&(d, n)], w[&(n, li, t)]);
                m.add(format!("lin1_{d}_{n}_{tok}"), "lin", vec![(vv, one), (zz, -one)], Sense::Le, C::zero());
                m.add(format!("lin2_{d}_{n}_{tok}"), "lin", vec![(vv, one), (ww, -one)], Sense::Le, C::zero());
                m.add(format!("lin3_{d}_{n}_{tok}"), "lin", vec![(vv, one), (zz, -one), (ww, -one)], Sense::Ge, -one);
            }
        }
        // (16) vehicles only on activated extensions
        let (xe, ye) = (x_ext[&(li, t)], y[&(li, t)]);
        m.add(format!("c16lo_{tok}"), "16", vec![(xe, one), (ye, -one)], Sense::Ge, C::zero());
        m.add(format!("c16hi_{tok}"), "16", vec![(xe, one), (ye, -C::from_int(big_m))], Sense::Le, C::zero());
    }

    // (17) fleet balance per family
    for (li, l) in inst.lines.iter().enumerate() {
        let terms = vec![
            (n_add[li], one),
            (x_reg[li], -one),
            (x_ext[&(li, Terminal::A)], -one),
            (x_ext[&(li, Terminal::B)], -one),
        ];
        m.add(format!("c17_{}", l.line), "17", terms, Sense::Eq, -C::from_int(l.base_fleet as i64));
    }
    // (18) budget
    let terms = n_add.iter().map(|&n| (n, one)).collect();
    m.add("c18".to_string(), "18", terms, Sense::Le, C::from_int(inst.n_max as i64));

    if inst.objective == ObjectiveKind::Surrogate {
        for (li, l) in inst.lines.iter().enumerate() {
            m.objective.push((x_reg[li], l.score));
            for t in Terminal::BOTH {
                m.objective.push((x_ext[&(li, t)], l.score));
            }
        }
        for &n in &inst.nodes {
            let s = inst.node_scores.get(&n).copied().unwrap_or_else(C::zero);
            if s != C::zero() {
                for &(li, t) in &exts {
                    m.objective.push((w[&(n, li, t)], s));
                }
            }
        }
        for &(li, t) in &exts {
            let term = inst.terminal(li, t);
            for &(from, j, arc) in &arcs[&(li, t)] {
                let d = inst.distance(from.unwrap_or(term), j);
                if d != C::zero() {
                    m.objective.push((arc, -(inst.weight_f2 * d)));
                }
            }
        }
    }
    Ok(m)
}

/// Stage-1/2 solution expressed in model terms.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanView {
    /// n_d per station.
    pub consolidation: BTreeMap<NodeId, NodeId>,
    /// Activated extensions with visit order and fleet.
    pub extensions: Vec<(LineId, Terminal, Vec<NodeId>, i64)>,
    /// (x_l, n_l) per regular line.
    pub regular: BTreeMap<LineId, (i64, i64)>,
}

/// Translate a plan into a full variable assignment.
pub fn assignment_from_plan<C: Coefficient>(
    model: &IpModel<C>,
    inst: &IpInstance<C>,
    plan: &PlanView,
) -> Result<Vec<i64>, IpError> {
    let mut named: BTreeMap<String, i64> = BTreeMap::new();
    for (&d, &n) in &plan.consolidation {
        named.insert(format!("z_{d}_{n}"), 1);
    }
    for (line, t, order, fleet) in &plan.extensions {
        let tok = ext_token(*line, *t);
        named.insert(format!("y_{tok}"), 1);
        named.insert(format!("x_{tok}"), *fleet);
        named.insert(format!("u_t_{tok}"), 1);
        let mut prev: Option<NodeId> = None;
        for (pos, &n) in order.iter().enumerate() {
            named.insert(format!("w_{n}_{tok}"), 1);
            named.insert(format!("u_{n}_{tok}"), pos as i64 + 2);
            let arc = match prev {
                None => format!("X_t_{n}_{tok}"),
                Some(p) => format!("X_{p}_{n}_{tok}"),
            };
            named.insert(arc, 1);
            prev = Some(n);
            for (&d, &nd) in &plan.consolidation {
                if nd == n {
                    named.insert(format!("v_{d}_{n}_{tok}"), 1);
                }
            }
        }
    }
    for (line, &(x, n)) in &plan.regular {
        if inst.lines.iter().any(|l| l.line == *line) {
            named.insert(format!("x_{line}"), x);
            named.insert(format!("nadd_{line}"), n);
        }
    }
    model.assignment(&named)
}

/// Check that the product linearization is exact on all four binary vertices:
/// the only feasible `v` equals `z * w`.
pub fn linearization_is_exact() -> bool {
    let lin = |v: i64, z: i64, w: i64| v <= z && v <= w && v >= z + w - 1;
    (0..=1).all(|z| {
        (0..=1).all(|w| {
            let feasible: Vec<i64> = (0..=1).filter(|&v| lin(v, z, w)).collect();
            feasible == vec![z * w]
        })
    })
}

fn format_coef<C: Coefficient>(c: C) -> String {
    let x = c.to_real();
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn write_terms<C: Coefficient>(out: &mut String, model: &IpModel<C>, terms: &[(usize, C)]) {
    let mut col = 0;
    for (k, &(v, a)) in terms.iter().enumerate() {
        let neg = a < C::zero();
        let mag = format_coef(a.abs());
        let piece = match (k, neg) {
            (0, false) => format!("{mag} {}", model.variables[v].name),
            (0, true) => format!("- {mag} {}", model.variables[v].name),
            (_, false) => format!(" + {mag} {}", model.variables[v].name),
            (_, true) => format!(" - {mag} {}", model.variables[v].name),
        };
        if col + piece.len() > 200 {
            out.push_str("\n   ");
            col = 0;
        }
        col += piece.len();
        out.push_str(&piece);
    }
    if terms.is_empty() {
        out.push('0');
    }
}

/// CPLEX LP text of the model.
pub fn render_lp<C: Coefficient>(model: &IpModel<C>) -> String {
    let mut out = String::new();
    out.push_str("\\ remediation model\n");
    out.push_str("Maximize\n obj: ");
    if model.objective.is_empty() {
        out.push('0');
    } else {
        write_terms(&mut out, model, &model.objective);
    }
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}: ", c.name);
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), format_coef(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Integer) {
        let _ = writeln!(out, " {} <= {} <= {}", v.lb, v.name, v.ub);
    }
    out.push_str("Binaries\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("Generals\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Integer) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

pub fn write_model<C: Coefficient>(model: &IpModel<C>, path: &Path) -> Result<(), IpError> {
    fs::write(path, render_lp(model))?;
    Ok(())
}

/// Summary of an LP file, enough to cross-check a written model.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LpSummary {
    pub objective_terms: usize,
    pub constraints: Vec<String>,
    pub bounded: usize,
    pub binaries: usize,
    pub generals: usize,
}

/// Parse the LP subset produced by [`render_lp`].
pub fn parse_lp(text: &str) -> Result<LpSummary, IpError> {
    #[derive(PartialEq)]
    enum Section {
        Head,
        Objective,
        Constraints,
        Bounds,
        Binaries,
        Generals,
        Done,
    }
    let mut section = Section::Head;
    let mut summary = LpSummary::default();
    let count_terms =
        |s: &str| s.split_whitespace().filter(|t| t.chars().next().is_some_and(char::is_alphabetic)).count();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Maximize" | "Minimize" => section = Section::Objective,
            "Subject To" => section = Section::Constraints,
            "Bounds" => section = Section::Bounds,
            "Binaries" => section = Section::Binaries,
            "Generals" => section = Section::Generals,
            "End" => section = Section::Done,
            _ => match section {
                Section::Objective => {
                    let body = line.strip_prefix("obj:").unwrap_or(line);
                    summary.objective_terms += count_terms(body);
                }
                Section::Constraints => {
                    if let Some((name, _)) = line.split_once(':') {
                        if !name.contains(' ') {
                            summary.constraints.push(name.to_string());
                            continue;
                        }
                    }
                    if summary.constraints.is_empty() {
                        return Err(IpError::Parse(format!("continuation before any row: {line}")));
                    }
                }
                Section::Bounds => {
                    if !line.contains("<=") {
                        return Err(IpError::Parse(format!("bad bound: {line}")));
                    }
                    summary.bounded += 1;
                }
                Section::Binaries => summary.binaries += line.split_whitespace().count(),
                Section::Generals => summary.generals += line.split_whitespace().count(),
                Section::Head | Section::Done => return Err(IpError::Parse(format!("unexpected line: {line}"))),
            },
        }
    }
    if section != Section::Done {
        return Err(IpError::Parse("missing End".into()));
    }
    Ok(summary)
}

/// Default limit on free binaries for [`solve_tiny`].
pub const TINY_BINARY_LIMIT: usize = 30;

/// Optimal assignment found by [`solve_tiny`].
#[derive(Clone, Debug, PartialEq)]
pub struct TinySolution<C> {
    pub values: Vec<i64>,
    pub objective: C,
}

/// Exact optimum by depth-first enumeration with bound propagation. The
/// product variables `v_*` are excluded from the binary count since (lin)
/// fixes them once `z` and `w` are fixed.
pub fn solve_tiny<C: Coefficient>(model: &IpModel<C>, limit: usize) -> Result<TinySolution<C>, IpError> {
    let mut lb: Vec<i64> = model.variables.iter().map(|v| v.lb).collect();
    let mut ub: Vec<i64> = model.variables.iter().map(|v| v.ub).collect();
    if !propagate(model, &mut lb, &mut ub) {
        return Err(IpError::Infeasible);
    }
    let free = model
        .variables
        .iter()
        .enumerate()
        .filter(|(i, v)| v.kind == VarKind::Binary && !v.name.starts_with("v_") && lb[*i] < ub[*i])
        .count();
    if free > limit {
        return Err(IpError::TooLarge { free, limit });
    }
    let order = branching_order(model);
    let mut best: Option<TinySolution<C>> = None;
    dfs(model, &order, lb, ub, &mut best);
    best.ok_or(IpError::Infeasible)
}

fn branching_order<C: Coefficient>(model: &IpModel<C>) -> Vec<usize> {
    let rank = |name: &str| match name.split('_').next().unwrap_or("") {
        "y" => 0,
        "w" => 1,
        "z" => 2,
        "X" => 3,
        "x" => 4,
        "nadd" => 5,
        "u" => 6,
        _ => 7,
    };
    let mut order: Vec<usize> = (0..model.variables.len()).collect();
    order.sort_by_key(|&i| (rank(&model.variables[i].name), i));
    order
}

fn objective_bound<C: Coefficient>(model: &IpModel<C>, lb: &[i64], ub: &[i64]) -> C {
    model.objective.iter().fold(C::zero(), |acc, &(v, a)| {
        let pick = if a > C::zero() { ub[v] } else { lb[v] };
        acc + a * C::from_int(pick)
    })
}

fn dfs<C: Coefficient>(
    model: &IpModel<C>,
    order: &[usize],
    lb: Vec<i64>,
    ub: Vec<i64>,
    best: &mut Option<TinySolution<C>>,
) {
    if let Some(b) = best {
        if objective_bound(model, &lb, &ub) <= b.objective {
            return;
        }
    }
    let Some(&var) = order.iter().find(|&&v| lb[v] < ub[v]) else {
        let values = lb;
        if model.constraints.iter().all(|c| c.satisfied(&values)) {
            let objective = model.objective_value(&values);
            if best.as_ref().is_none_or(|b| objective > b.objective) {
                *best = Some(TinySolution { values, objective });
            }
        }
        return;
    };
    let coef = model.objective.iter().filter(|(v, _)| *v == var).fold(C::zero(), |a, &(_, c)| a + c);
    let values: Vec<i64> =
        if coef > C::zero() { (lb[var]..=ub[var]).rev().collect() } else { (lb[var]..=ub[var]).collect() };
    for value in values {
        let (mut l2, mut u2) = (lb.clone(), ub.clone());
        l2[var] = value;
        u2[var] = value;
        if propagate(model, &mut l2, &mut u2) {
            dfs(model, order, l2, u2, best);
        }
    }
}

/// Bound tightening to a fixpoint. Returns false on a proven conflict.
fn propagate<C: Coefficient>(model: &IpModel<C>, lb: &mut [i64], ub: &mut [i64]) -> bool {
    loop {
        let mut changed = false;
        for c in &model.constraints {
            let (min_act, max_act) = activity_range(c, lb, ub);
            let slack = c.rhs.slack();
            let check_le = matches!(c.sense, Sense::Le | Sense::Eq);
            let check_ge = matches!(c.sense, Sense::Ge | Sense::Eq);
            if check_le && min_act > c.rhs + slack {
                return false;
            }
            if check_ge && max_act < c.rhs - slack {
                return false;
            }
            for &(v, a) in &c.terms {
                if a == C::zero() {
                    continue;
                }
                let (lo, hi) = term_range(a, lb[v], ub[v]);
                if check_le {
                    // a * x <= rhs - (min_act - lo)
                    let room = c.rhs - (min_act - lo);
                    changed |= tighten(a, room, true, v, lb, ub);
                }
                if check_ge {
                    // a * x >= rhs - (max_act - hi)
                    let room = c.rhs - (max_act - hi);
                    changed |= tighten(a, room, false, v, lb, ub);
                }
                if lb[v] > ub[v] {
                    return false;
                }
            }
        }
        if !changed {
            return true;
        }
    }
}

fn term_range<C: Coefficient>(a: C, lo: i64, hi: i64) -> (C, C) {
    let (p, q) = (a * C::from_int(lo), a * C::from_int(hi));
    if p <= q {
        (p, q)
    } else {
        (q, p)
    }
}

fn activity_range<C: Coefficient>(c: &LinearConstraint<C>, lb: &[i64], ub: &[i64]) -> (C, C) {
    c.terms.iter().fold((C::zero(), C::zero()), |(lo, hi), &(v, a)| {
        let (p, q) = term_range(a, lb[v], ub[v]);
        (lo + p, hi + q)
    })
}

/// Apply `a * x <= room` (`upper`) or `a * x >= room` to the bounds of x.
fn tighten<C: Coefficient>(a: C, room: C, upper: bool, v: usize, lb: &mut [i64], ub: &mut [i64]) -> bool {
    let ratio = room / a;
    let positive = a > C::zero();
    // upper & positive: x <= ratio; upper & negative: x >= ratio; mirrored for lower
    let caps_above = upper == positive;
    if caps_above {
        let cap = ratio.floor_int();
        if cap < ub[v] {
            ub[v] = cap;
            return true;
        }
    } else {
        let floor = ratio.ceil_int();
        if floor > lb[v] {
            lb[v] = floor;
            return true;
        }
    }
    false
}
