//! Demand consolidation, clustering of consolidation nodes, and routing of
//! every candidate extension.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_model::{LineId, Mode, NodeId, NodeKind, Terminal, TransitNetwork};
use crate::scalar::Scalar;

/// Largest cluster routed exactly by default.
pub const DEFAULT_MAX_EXACT: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum Stage1Error {
    #[error(
        "cluster of {size} nodes exceeds the exact routing cap of {cap}; raise the cap or enable the heuristic fallback"
    )]
    ClusterTooLarge { size: usize, cap: usize },
    #[error("cluster has no members")]
    EmptyCluster,
}

/// Station to consolidation node mapping (`n_d`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsolidationAssignment {
    pub node_of: BTreeMap<NodeId, NodeId>,
    /// Distinct consolidation nodes in use, ascending.
    pub used: Vec<NodeId>,
}

/// For each station, the closest bus stop within `d_max_m`, or the station
/// itself when none is that close. Ties go to the lowest node id.
pub fn assign_consolidation<T: Scalar>(
    network: &TransitNetwork<T>,
    stations: &[NodeId],
    d_max_m: T,
) -> ConsolidationAssignment {
    let stops: Vec<NodeId> = network.nodes.iter().filter(|n| n.kind == NodeKind::BusStop).map(|n| n.id).collect();
    let d_max_km = d_max_m / T::lit(1000.0);
    let mut node_of = BTreeMap::new();
    for &d in stations {
        let mut best: Option<(T, NodeId)> = None;
        for &s in &stops {
            let dist = network.road_km(d, s);
            if dist <= d_max_km && best.is_none_or(|(b, _)| dist < b) {
                best = Some((dist, s));
            }
        }
        node_of.insert(d, best.map_or(d, |(_, s)| s));
    }
    let mut used: Vec<NodeId> = node_of.values().copied().collect();
    used.sort();
    used.dedup();
    ConsolidationAssignment { node_of, used }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Cluster<T = f64> {
    pub id: usize,
    /// Ascending node ids.
    pub members: Vec<NodeId>,
    /// q_k: summed demand of the stations consolidated onto the members.
    pub demand: T,
}

/// DBSCAN over `nodes` with an inclusive `eps_km` neighbourhood. Nodes that
/// end up as noise (only possible when `min_samples > 1`) become singleton
/// clusters, since every consolidation node must be served.
pub fn dbscan<T: Scalar>(
    nodes: &[NodeId],
    eps_km: T,
    min_samples: usize,
    dist: impl Fn(NodeId, NodeId) -> T,
) -> Vec<Vec<NodeId>> {
    let mut sorted = nodes.to_vec();
    sorted.sort();
    sorted.dedup();
    let n = sorted.len();
    let neighbours: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| dist(sorted[i], sorted[j]) <= eps_km).collect()).collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_samples.max(1)).collect();

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if label[start].is_some() || !core[start] {
            continue;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        let mut queue = vec![start];
        label[start] = Some(id);
        while let Some(p) = queue.pop() {
            members.push(p);
            if !core[p] {
                continue;
            }
            for &q in &neighbours[p] {
                if label[q].is_none() {
                    label[q] = Some(id);
                    queue.push(q);
                }
            }
        }
        clusters.push(members);
    }
    for (i, l) in label.iter().enumerate() {
        if l.is_none() {
            clusters.push(vec![i]);
        }
    }
    clusters
        .into_iter()
        .map(|mut c| {
            c.sort();
            c.into_iter().map(|i| sorted[i]).collect()
        })
        .collect()
}

/// Cluster the used consolidation nodes and aggregate station demand.
pub fn cluster_nodes<T: Scalar>(
    network: &TransitNetwork<T>,
    assignment: &ConsolidationAssignment,
    demand: &BTreeMap<NodeId, T>,
    eps_km: T,
    min_samples: usize,
) -> Vec<Cluster<T>> {
    let groups = dbscan(&assignment.used, eps_km, min_samples, |a, b| network.road_km(a, b));
    groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let demand = assignment
                .node_of
                .iter()
                .filter(|(_, n)| members.binary_search(n).is_ok())
                .map(|(d, _)| demand.get(d).copied().unwrap_or_else(T::zero))
                .sum();
            Cluster { id, members, demand }
        })
        .collect()
}

/// Visit order and one-way length of an open path from a terminal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Route<T = f64> {
    pub order: Vec<NodeId>,
    pub length_km: T,
    /// False when produced by the nearest-neighbour + 2-opt fallback.
    pub exact: bool,
}

/// Length of `start -> order[0] -> order[1] -> ...`, summed left to right.
pub fn path_length<T: Scalar>(start: NodeId, order: &[NodeId], dist: &impl Fn(NodeId, NodeId) -> T) -> T {
    let mut total = T::zero();
    let mut prev = start;
    for &n in order {
        total += dist(prev, n);
        prev = n;
    }
    total
}

/// Minimum-length Hamiltonian path from `start` through all `members`, open
/// at the far end. Exact subset DP up to `max_exact` members; beyond that the
/// heuristic is used when `allow_heuristic` is set.
pub fn route_extension<T: Scalar>(
    start: NodeId,
    members: &[NodeId],
    dist: impl Fn(NodeId, NodeId) -> T,
    max_exact: usize,
    allow_heuristic: bool,
) -> Result<Route<T>, Stage1Error> {
    if members.is_empty() {
        return Err(Stage1Error::EmptyCluster);
    }
    if members.len() > max_exact {
        if allow_heuristic {
            return Ok(heuristic_route(start, members, &dist));
        }
        return Err(Stage1Error::ClusterTooLarge { size: members.len(), cap: max_exact });
    }
    let order = held_karp_path(start, members, &dist);
    let length_km = path_length(start, &order, &dist);
    Ok(Route { order, length_km, exact: true })
}

fn held_karp_path<T: Scalar>(start: NodeId, members: &[NodeId], dist: &impl Fn(NodeId, NodeId) -> T) -> Vec<NodeId> {
    let n = members.len();
    let full = 1usize << n;
    let mut best = vec![T::infinity(); full * n];
    let mut parent = vec![usize::MAX; full * n];
    for j in 0..n {
        best[(1 << j) * n + j] = dist(start, members[j]);
    }
    for mask in 1..full {
        for last in 0..n {
            let cur = best[mask * n + last];
            if mask & (1 << last) == 0 || !cur.is_finite() {
                continue;
            }
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let m2 = mask | (1 << next);
                let cand = cur + dist(members[last], members[next]);
                if cand < best[m2 * n + next] {
                    best[m2 * n + next] = cand;
                    parent[m2 * n + next] = last;
                }
            }
        }
    }
    let last_mask = full - 1;
    let mut end = 0;
    for j in 1..n {
        if best[last_mask * n + j] < best[last_mask * n + end] {
            end = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = last_mask;
    let mut cur = end;
    loop {
        order.push(members[cur]);
        let p = parent[mask * n + cur];
        mask &= !(1 << cur);
        if p == usize::MAX {
            break;
        }
        cur = p;
    }
    order.reverse();
    order
}

fn heuristic_route<T: Scalar>(start: NodeId, members: &[NodeId], dist: &impl Fn(NodeId, NodeId) -> T) -> Route<T> {
    let mut left: Vec<NodeId> = members.to_vec();
    let mut order = Vec::with_capacity(left.len());
    let mut cur = start;
    while !left.is_empty() {
        let (idx, _) = left.iter().enumerate().fold((0, T::infinity()), |acc, (i, &n)| {
            if dist(cur, n) < acc.1 {
                (i, dist(cur, n))
            } else {
                acc
            }
        });
        cur = left.remove(idx);
        order.push(cur);
    }
    // 2-opt on the open path; reversing order[i..=j]
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..order.len() {
            for j in (i + 1)..order.len() {
                let mut cand = order.clone();
                cand[i..=j].reverse();
                if path_length(start, &cand, dist) < path_length(start, &order, dist) {
                    order = cand;
                    improved = true;
                }
            }
        }
    }
    let length_km = path_length(start, &order, dist);
    Route { order, length_km, exact: false }
}

/// `l_k^{EX,a}` / `l_k^{EX,b}`: line `line` extended from `terminal` through
/// cluster `cluster`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CandidateExtension<T = f64> {
    pub line: LineId,
    pub terminal: Terminal,
    pub cluster: usize,
    pub route: Route<T>,
}

/// Route both terminals of every regular bus line through every cluster.
/// Output order: line id, terminal a before b, cluster id.
pub fn enumerate_candidates<T: Scalar>(
    network: &TransitNetwork<T>,
    clusters: &[Cluster<T>],
    max_exact: usize,
    allow_heuristic: bool,
) -> Result<Vec<CandidateExtension<T>>, Stage1Error> {
    let mut jobs = Vec::new();
    for line in extendable_lines(network) {
        for terminal in Terminal::BOTH {
            for cluster in clusters {
                jobs.push((line, terminal, cluster));
            }
        }
    }
    jobs.par_iter()
        .map(|&(line, terminal, cluster)| {
            let start = network.lines[&line].terminal(terminal);
            let route =
                route_extension(start, &cluster.members, |a, b| network.road_km(a, b), max_exact, allow_heuristic)?;
            Ok(CandidateExtension { line, terminal, cluster: cluster.id, route })
        })
        .collect()
}

/// Regular bus lines, ascending id.
pub fn extendable_lines<T: Scalar>(network: &TransitNetwork<T>) -> Vec<LineId> {
    network.regular_lines().filter(|l| l.mode == Mode::Bus).map(|l| l.id).collect()
}
