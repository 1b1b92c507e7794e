//! One-to-many shortest travel times over a frequency-based network.
//!
//! The search runs on a boarding-expanded graph. Every active line is split
//! into two directions; each stop position of a direction has an *arrival*
//! and a *departure* vertex:
//!
//! ```text
//!   stop --(headway/2)--> depart(p) --(leg)--> arrive(p+1) --(0)--> stop'
//!                                              arrive(p+1) --(dwell)--> depart(p+1)
//! ```
//!
//! so a ride from position `i` to `j` costs the legs in between plus the dwell
//! at the stops strictly inside the ride. Walking arcs join every pair of
//! physical nodes within the walk radius, and every pair of centroids
//! regardless of distance.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::minutes_at;
use crate::net_model::{NetError, NetworkTag, NodeId, NodeKind, TransitNetwork};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum RouterError {
    #[error("unknown origin {0}")]
    UnknownOrigin(NodeId),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouterParams<T = f64> {
    pub walk_speed_kmh: T,
    /// Radius of node-to-node walking arcs. Centroid-to-centroid walking is
    /// always available.
    pub walk_radius_km: T,
}

impl<T: Scalar> Default for RouterParams<T> {
    fn default() -> Self {
        RouterParams { walk_speed_kmh: T::lit(3.5), walk_radius_km: T::lit(1.5) }
    }
}

/// Shortest times from one origin to every centroid, indexed by tile id.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeTable<T = f64> {
    pub origin: NodeId,
    pub times: Vec<T>,
    pub network_tag: NetworkTag,
}

/// Row `i` holds the times from the centroid of tile `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeMatrix<T = f64> {
    pub rows: Vec<TravelTimeTable<T>>,
}

impl<T: Scalar> TravelTimeMatrix<T> {
    pub fn get(&self, from: usize, to: usize) -> T {
        self.rows[from].times[to]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
struct Arc<T> {
    to: usize,
    cost: T,
}

/// Precomputed search graph for one network snapshot.
pub struct RoutingGraph<'a, T> {
    network: &'a TransitNetwork<T>,
    adjacency: Vec<Vec<Arc<T>>>,
}

impl<'a, T: Scalar> RoutingGraph<'a, T> {
    pub fn build(network: &'a TransitNetwork<T>, params: &RouterParams<T>) -> Result<Self, RouterError> {
        let n = network.nodes.len();
        let mut adjacency: Vec<Vec<Arc<T>>> = vec![Vec::new(); n];

        let radius_m = params.walk_radius_km * T::lit(1000.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&network.nodes[i], &network.nodes[j]);
                let dist_m = a.coord.distance_m(&b.coord);
                let both_centroids = a.kind == NodeKind::Centroid && b.kind == NodeKind::Centroid;
                if both_centroids || dist_m <= radius_m {
                    let cost = minutes_at(dist_m / T::lit(1000.0), params.walk_speed_kmh);
                    adjacency[i].push(Arc { to: j, cost });
                    adjacency[j].push(Arc { to: i, cost });
                }
            }
        }

        for line in network.active_lines() {
            let wait = network.headway(line.id)? / T::lit(2.0);
            let legs = network.legs(line.id)?;
            let stops = &line.stops;
            for forward in [true, false] {
                let order: Vec<usize> =
                    if forward { (0..stops.len()).collect() } else { (0..stops.len()).rev().collect() };
                let base = adjacency.len();
                // vertex 2k is arrive(k), 2k+1 is depart(k) along `order`
                adjacency.resize(base + 2 * order.len(), Vec::new());
                for (k, &pos) in order.iter().enumerate() {
                    let stop = stops[pos].0;
                    let arrive = base + 2 * k;
                    let depart = arrive + 1;
                    adjacency[arrive].push(Arc { to: stop, cost: T::zero() });
                    if k + 1 < order.len() {
                        let next = order[k + 1];
                        let leg = legs[pos.min(next)];
                        adjacency[stop].push(Arc { to: depart, cost: wait });
                        adjacency[arrive].push(Arc { to: depart, cost: line.dwell_min });
                        adjacency[depart].push(Arc { to: base + 2 * (k + 1), cost: leg });
                    }
                }
            }
        }

        Ok(RoutingGraph { network, adjacency })
    }

    pub fn network(&self) -> &TransitNetwork<T> {
        self.network
    }

    /// Minutes from `origin` to every physical node.
    pub fn node_times(&self, origin: NodeId) -> Result<Vec<T>, RouterError> {
        let physical = self.network.nodes.len();
        if origin.0 >= physical {
            return Err(RouterError::UnknownOrigin(origin));
        }
        let mut dist = vec![T::infinity(); self.adjacency.len()];
        let mut heap = BinaryHeap::new();
        dist[origin.0] = T::zero();
        heap.push(Reverse((Key(T::zero()), origin.0)));
        while let Some(Reverse((Key(d), v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for arc in &self.adjacency[v] {
                let nd = d + arc.cost;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    heap.push(Reverse((Key(nd), arc.to)));
                }
            }
        }
        dist.truncate(physical);
        Ok(dist)
    }

    /// T_G(origin, c_j) for every centroid.
    pub fn shortest_times(&self, origin: NodeId) -> Result<TravelTimeTable<T>, RouterError> {
        let all = self.node_times(origin)?;
        Ok(TravelTimeTable {
            origin,
            times: self.network.centroids.iter().map(|c| all[c.0]).collect(),
            network_tag: self.network.tag,
        })
    }

    pub fn all_centroid_times(&self) -> TravelTimeMatrix<T> {
        let rows = self
            .network
            .centroids
            .par_iter()
            .map(|&c| self.shortest_times(c).expect("centroid is a valid origin"))
            .collect();
        TravelTimeMatrix { rows }
    }
}

/// Total order over the scalar for the priority queue; NaN never occurs since
/// every arc cost is finite and nonnegative.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Key<T>(T);

impl<T: PartialOrd> Eq for Key<T> {}

impl<T: PartialOrd> PartialOrd for Key<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Key<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).unwrap_or(Ordering::Equal)
    }
}

pub fn shortest_times<T: Scalar>(
    network: &TransitNetwork<T>,
    params: &RouterParams<T>,
    origin: NodeId,
) -> Result<TravelTimeTable<T>, RouterError> {
    RoutingGraph::build(network, params)?.shortest_times(origin)
}

pub fn all_centroid_times<T: Scalar>(
    network: &TransitNetwork<T>,
    params: &RouterParams<T>,
) -> Result<TravelTimeMatrix<T>, RouterError> {
    Ok(RoutingGraph::build(network, params)?.all_centroid_times())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Rect};
    use crate::net_model::{Line, LineId, Mode};
    use crate::tessellation::tessellate;

    fn grid_net(w: f64, h: f64) -> TransitNetwork<f64> {
        let (grid, tiles) = tessellate(&Rect::new(0.0, 0.0, w, h), 1.0).unwrap();
        TransitNetwork::new(grid, tiles)
    }

    fn walk(a: Point<f64>, b: Point<f64>) -> f64 {
        minutes_at(a.distance_km(&b), 3.5)
    }

    #[test]
    fn walk_only_network() {
        let net = grid_net(3000.0, 3000.0);
        let m = all_centroid_times(&net, &RouterParams::default()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let expected = walk(net.tiles[i].centroid, net.tiles[j].centroid);
                assert!((m.get(i, j) - expected).abs() < 1e-9);
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn single_line_journey() {
        let mut net = grid_net(5000.0, 1000.0);
        let a = net.add_node("A", NodeKind::BusStop, Point::new(500.0, 500.0));
        let b = net.add_node("B", NodeKind::BusStop, Point::new(4500.0, 400.0));
        let id = net.add_line(Line::regular(LineId(0), "L", Mode::Bus, vec![a, b], 6), Some(vec![8.0])).unwrap();
        let table = shortest_times(&net, &RouterParams::default(), a).unwrap();
        let headway = net.headway(id).unwrap();
        let via_line = headway / 2.0 + 8.0 + walk(Point::new(4500.0, 400.0), net.tiles[4].centroid);
        let direct = walk(Point::new(500.0, 500.0), net.tiles[4].centroid);
        assert!(via_line < direct);
        assert!((table.times[4] - via_line).abs() < 1e-9);
    }

    #[test]
    fn unknown_origin() {
        let net = grid_net(1000.0, 1000.0);
        assert_eq!(
            shortest_times(&net, &RouterParams::default(), NodeId(99)).unwrap_err(),
            RouterError::UnknownOrigin(NodeId(99))
        );
    }

    #[test]
    fn inactive_lines_are_ignored() {
        let mut net = grid_net(5000.0, 1000.0);
        let a = net.add_node("A", NodeKind::BusStop, Point::new(500.0, 500.0));
        let b = net.add_node("B", NodeKind::BusStop, Point::new(4500.0, 500.0));
        net.add_line(Line::regular(LineId(0), "L", Mode::Bus, vec![a, b], 0), None).unwrap();
        let walk_only = all_centroid_times(&grid_net(5000.0, 1000.0), &RouterParams::default()).unwrap();
        assert_eq!(all_centroid_times(&net, &RouterParams::default()).unwrap(), walk_only);
    }

    #[test]
    fn dwell_counts_only_inside_the_ride() {
        let mut net = grid_net(3000.0, 1000.0);
        let stops: Vec<NodeId> = (0..4)
            .map(|k| net.add_node(format!("s{k}"), NodeKind::BusStop, Point::new(100.0 + 900.0 * k as f64, 10.0)))
            .collect();
        let mut line = Line::regular(LineId(0), "L", Mode::Bus, stops.clone(), 1);
        line.dwell_min = 1.0;
        net.add_line(line, Some(vec![10.0, 10.0, 10.0])).unwrap();
        let graph = RoutingGraph::build(&net, &RouterParams { walk_speed_kmh: 0.01, walk_radius_km: 0.0 }).unwrap();
        let times = graph.node_times(stops[0]).unwrap();
        // round trip 2*(30+2) = 64, one vehicle, wait 32
        assert!((times[stops[3].0] - (32.0 + 30.0 + 2.0)).abs() < 1e-9);
        assert!((times[stops[1].0] - (32.0 + 10.0)).abs() < 1e-9);
        let back = graph.node_times(stops[3]).unwrap();
        assert!((back[stops[0].0] - 64.0).abs() < 1e-9);
    }
}
