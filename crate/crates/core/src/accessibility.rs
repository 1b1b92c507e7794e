//! Gravity accessibility with inverse travel-time decay.
//!
//! Units: travel times are minutes, so every score is in opportunities per
//! minute.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_model::{LineId, LineKind, NetworkTag, NodeId};
use crate::router::{RouterError, RoutingGraph, TravelTimeMatrix, TravelTimeTable};
use crate::scalar::Scalar;
use crate::tessellation::{Tile, TileId};

#[derive(Debug, Error, PartialEq)]
pub enum AccessError {
    #[error("non-positive travel time {time} from tile {from} to tile {to}")]
    NonPositiveTime { from: usize, to: usize, time: f64 },
    #[error("line {0} has no stops")]
    EmptyLine(LineId),
    #[error("line {0} is not a regular line")]
    NotRegular(LineId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("cluster has no members")]
    EmptyCluster,
    #[error(transparent)]
    Router(#[from] RouterError),
}

/// Per-centroid accessibility of one network snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AccessibilityField<T = f64> {
    pub network_tag: NetworkTag,
    /// Indexed by tile id.
    pub values: Vec<T>,
    pub mean: T,
}

impl<T: Scalar> AccessibilityField<T> {
    pub fn new(network_tag: NetworkTag, values: Vec<T>) -> Self {
        let mean = if values.is_empty() {
            T::zero()
        } else {
            values.iter().copied().sum::<T>() / T::from_int(values.len() as i64)
        };
        AccessibilityField { network_tag, values, mean }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// acc(c_i, G) = sum over c_j != c_i of O_{c_j} / T_G(c_i, c_j).
pub fn acc_centroid<T: Scalar>(
    origin: TileId,
    times: &TravelTimeTable<T>,
    tiles: &[Tile<T>],
) -> Result<T, AccessError> {
    let mut total = T::zero();
    for (j, tile) in tiles.iter().enumerate() {
        if j == origin.0 {
            continue;
        }
        let t = times.times[j];
        if t.is_nan() || t <= T::zero() {
            return Err(AccessError::NonPositiveTime { from: origin.0, to: j, time: t.to_real() });
        }
        if tile.opportunities > 0 {
            total += T::from_int(tile.opportunities as i64) / t;
        }
    }
    Ok(total)
}

pub fn field_from_matrix<T: Scalar>(
    tag: NetworkTag,
    matrix: &TravelTimeMatrix<T>,
    tiles: &[Tile<T>],
) -> Result<AccessibilityField<T>, AccessError> {
    let values = matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| acc_centroid(TileId(i), row, tiles))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AccessibilityField::new(tag, values))
}

/// Accessibility field of the snapshot behind `graph`.
pub fn accessibility_field<T: Scalar>(graph: &RoutingGraph<'_, T>) -> Result<AccessibilityField<T>, AccessError> {
    let net = graph.network();
    field_from_matrix(net.tag, &graph.all_centroid_times(), &net.tiles)
}

/// Sum over centroids.
pub fn acc_overall<T: Scalar>(field: &AccessibilityField<T>) -> T {
    field.values.iter().copied().sum()
}

/// Gravity sum from a stop or consolidation node, skipping the tile that
/// contains the node. Unreachable tiles contribute nothing.
pub fn node_gravity<T: Scalar>(graph: &RoutingGraph<'_, T>, node: NodeId) -> Result<T, AccessError> {
    let net = graph.network();
    if node.0 >= net.nodes.len() {
        return Err(AccessError::UnknownNode(node));
    }
    let own = net.node_tile(node);
    let times = graph.shortest_times(node)?;
    Ok(gravity_excluding(&times.times, &net.tiles, own))
}

fn gravity_excluding<T: Scalar>(times: &[T], tiles: &[Tile<T>], own: Option<TileId>) -> T {
    let mut total = T::zero();
    for (j, tile) in tiles.iter().enumerate() {
        if Some(TileId(j)) == own || tile.opportunities == 0 {
            continue;
        }
        let t = times[j];
        if t > T::zero() && t.is_finite() {
            total += T::from_int(tile.opportunities as i64) / t;
        }
    }
    total
}

/// acc_n of a consolidation node, on the disrupted network.
pub fn acc_node<T: Scalar>(graph: &RoutingGraph<'_, T>, node: NodeId) -> Result<T, AccessError> {
    node_gravity(graph, node)
}

/// acc_l: mean node gravity over the distinct stops of a regular line.
pub fn acc_line<T: Scalar>(graph: &RoutingGraph<'_, T>, line: LineId) -> Result<T, AccessError> {
    let l = graph.network().line(line).map_err(RouterError::from)?;
    if l.kind != LineKind::Regular {
        return Err(AccessError::NotRegular(line));
    }
    let mut stops = l.stops.clone();
    stops.sort();
    stops.dedup();
    if stops.is_empty() {
        return Err(AccessError::EmptyLine(line));
    }
    let scores = stops.iter().map(|&s| node_gravity(graph, s)).collect::<Result<Vec<_>, _>>()?;
    Ok(mean(&scores))
}

/// acc_k: mean member score of a cluster.
pub fn acc_cluster<T: Scalar>(member_scores: &[T]) -> Result<T, AccessError> {
    if member_scores.is_empty() {
        return Err(AccessError::EmptyCluster);
    }
    Ok(mean(member_scores))
}

/// acc_l^k = acc_l + acc_k.
pub fn acc_pairing<T: Scalar>(line_score: T, cluster_score: T) -> T {
    line_score + cluster_score
}

fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_int(values.len() as i64)
}

/// Node gravity for many nodes at once, computed in parallel.
pub fn node_scores<T: Scalar>(
    graph: &RoutingGraph<'_, T>,
    nodes: &[NodeId],
) -> Result<BTreeMap<NodeId, T>, AccessError> {
    let mut unique = nodes.to_vec();
    unique.sort();
    unique.dedup();
    unique
        .par_iter()
        .map(|&n| node_gravity(graph, n).map(|v| (n, v)))
        .collect::<Result<Vec<_>, _>>()
        .map(|v| v.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::net_model::{Line, Mode, NodeKind, TransitNetwork};
    use crate::router::RouterParams;
    use crate::tessellation::tessellate;

    fn tiles(opps: &[u64]) -> Vec<Tile<f64>> {
        let (_, mut tiles) = tessellate(&Rect::new(0.0, 0.0, 1000.0 * opps.len() as f64, 1000.0), 1.0).unwrap();
        for (t, &o) in tiles.iter_mut().zip(opps) {
            t.opportunities = o;
        }
        tiles
    }

    fn table(times: Vec<f64>) -> TravelTimeTable<f64> {
        TravelTimeTable { origin: NodeId(0), times, network_tag: NetworkTag::Original }
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(acc_centroid(TileId(0), &table(vec![0.0, 5.0, 9.0]), &tiles(&[3, 0, 0])).unwrap(), 0.0);
        assert_eq!(acc_centroid(TileId(0), &table(vec![0.0, 30.0]), &tiles(&[0, 60])).unwrap(), 2.0);
        // own tile is skipped even with opportunities
        assert_eq!(acc_centroid(TileId(1), &table(vec![10.0, 0.0]), &tiles(&[5, 60])).unwrap(), 0.5);
        assert!(matches!(
            acc_centroid(TileId(0), &table(vec![0.0, 0.0]), &tiles(&[0, 1])),
            Err(AccessError::NonPositiveTime { from: 0, to: 1, .. })
        ));
    }

    #[test]
    fn overall_and_mean() {
        let f = AccessibilityField::new(NetworkTag::Original, vec![0.0, 4.0, 0.0, 2.0]);
        assert_eq!(acc_overall(&f), 6.0);
        assert_eq!(f.mean, 1.5);
        let zero = AccessibilityField::new(NetworkTag::Original, vec![0.0; 3]);
        assert_eq!(acc_overall(&zero), 0.0);
    }

    #[test]
    fn cluster_and_pairing() {
        assert_eq!(acc_cluster(&[3.5]).unwrap(), 3.5);
        assert_eq!(acc_cluster(&[2.0, 2.0]).unwrap(), 2.0);
        assert_eq!(acc_cluster::<f64>(&[]), Err(AccessError::EmptyCluster));
        assert_eq!(acc_pairing(0.0, 4.0), 4.0);
        assert_eq!(acc_pairing(0.0, 0.0), 0.0);
        assert_eq!(acc_pairing(1.5, 2.0), 3.5);
    }

    fn corridor() -> TransitNetwork<f64> {
        let (grid, mut tiles) = tessellate(&Rect::new(0.0, 0.0, 4000.0, 1000.0), 1.0).unwrap();
        tiles[3].opportunities = 40;
        tiles[0].opportunities = 7;
        let mut net = TransitNetwork::new(grid, tiles);
        let a = net.add_node("a", NodeKind::BusStop, Point::new(600.0, 500.0));
        let b = net.add_node("b", NodeKind::BusStop, Point::new(3400.0, 500.0));
        net.add_line(Line::regular(LineId(0), "L", Mode::Bus, vec![a, b], 4), None).unwrap();
        net
    }

    #[test]
    fn line_and_node_scores() {
        let net = corridor();
        let graph = RoutingGraph::build(&net, &RouterParams::default()).unwrap();
        let a = NodeId(4);
        let b = NodeId(5);
        let ta = graph.shortest_times(a).unwrap().times;
        let tb = graph.shortest_times(b).unwrap().times;
        // a sits in tile 0, b in tile 3
        let acc_a = 40.0 / ta[3];
        let acc_b = 7.0 / tb[0];
        assert!((acc_node(&graph, a).unwrap() - acc_a).abs() < 1e-12);
        assert!((acc_node(&graph, b).unwrap() - acc_b).abs() < 1e-12);
        assert!((acc_line(&graph, LineId(0)).unwrap() - (acc_a + acc_b) / 2.0).abs() < 1e-12);
        assert_eq!(acc_node(&graph, NodeId(50)), Err(AccessError::UnknownNode(NodeId(50))));
    }

    #[test]
    fn zero_opportunity_line() {
        let (grid, tiles) = tessellate(&Rect::new(0.0, 0.0, 2000.0, 1000.0), 1.0).unwrap();
        let mut net = TransitNetwork::new(grid, tiles);
        let a = net.add_node("a", NodeKind::BusStop, Point::new(100.0, 100.0));
        let b = net.add_node("b", NodeKind::BusStop, Point::new(1900.0, 100.0));
        net.add_line(Line::regular(LineId(0), "L", Mode::Bus, vec![a, b], 1), None).unwrap();
        let graph = RoutingGraph::build(&net, &RouterParams::default()).unwrap();
        assert_eq!(acc_line(&graph, LineId(0)).unwrap(), 0.0);
    }
}
