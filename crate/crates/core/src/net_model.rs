//! Public transport network snapshots: nodes, lines and per-line derived
//! quantities (round-trip time, headway, circle length).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{minutes_at, Point};
use crate::scalar::Scalar;
use crate::tessellation::{Grid, Tile, TileId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("line {0} has no vehicles, its headway is undefined")]
    ZeroFleet(String),
    #[error("line {line} has no travel time for leg {leg}")]
    MissingEdgeTime { line: String, leg: usize },
    #[error("no distance between nodes {0} and {1}")]
    MissingDistance(NodeId, NodeId),
    #[error("extension suffix is empty")]
    EmptySuffix,
    #[error("unknown terminal `{0}` (expected `a` or `b`)")]
    UnknownTerminal(String),
    #[error("line {0} needs at least two stops")]
    TooFewStops(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown line {0}")]
    UnknownLine(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineId(pub usize);

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Centroid,
    BusStop,
    RailStation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Node<T = f64> {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub coord: Point<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bus,
    Tram,
    Metro,
    Rer,
}

impl Mode {
    /// Commercial speed in km/h.
    pub fn default_speed_kmh(self) -> f64 {
        match self {
            Mode::Bus => 23.5,
            Mode::Tram | Mode::Metro => 35.0,
            Mode::Rer => 60.0,
        }
    }

    /// Dwell time in minutes at each intermediate station.
    pub fn default_dwell_min(self) -> f64 {
        match self {
            Mode::Bus | Mode::Tram => 0.5,
            Mode::Metro | Mode::Rer => 1.0,
        }
    }

    /// Typical peak headway in minutes, used to size fleets of synthetic lines.
    pub fn typical_headway_min(self) -> f64 {
        match self {
            Mode::Rer | Mode::Metro => 2.0,
            Mode::Tram => 4.11,
            Mode::Bus => 7.17,
        }
    }

    pub fn is_rail(self) -> bool {
        !matches!(self, Mode::Bus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Regular,
    ExtensionA,
    ExtensionB,
    Replacement,
}

/// Which end of a regular line an extension leaves from: `A` is the first
/// stop, `B` the last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Terminal {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
}

impl Terminal {
    pub const BOTH: [Terminal; 2] = [Terminal::A, Terminal::B];

    pub fn extension_kind(self) -> LineKind {
        match self {
            Terminal::A => LineKind::ExtensionA,
            Terminal::B => LineKind::ExtensionB,
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Terminal::A => "a",
            Terminal::B => "b",
        })
    }
}

impl FromStr for Terminal {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" | "A" => Ok(Terminal::A),
            "b" | "B" => Ok(Terminal::B),
            other => Err(NetError::UnknownTerminal(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Line<T = f64> {
    pub id: LineId,
    pub name: String,
    pub mode: Mode,
    pub kind: LineKind,
    pub stops: Vec<NodeId>,
    pub speed_kmh: T,
    pub dwell_min: T,
    pub fleet: u32,
    pub parent: Option<LineId>,
    pub extension_suffix: Vec<NodeId>,
}

impl<T: Scalar> Line<T> {
    pub fn regular(id: LineId, name: impl Into<String>, mode: Mode, stops: Vec<NodeId>, fleet: u32) -> Self {
        Line {
            id,
            name: name.into(),
            mode,
            kind: LineKind::Regular,
            stops,
            speed_kmh: T::lit(mode.default_speed_kmh()),
            dwell_min: T::lit(mode.default_dwell_min()),
            fleet,
            parent: None,
            extension_suffix: Vec::new(),
        }
    }

    pub fn is_active(&self) -> bool {
        self.fleet > 0
    }

    pub fn terminal(&self, terminal: Terminal) -> NodeId {
        match terminal {
            Terminal::A => self.stops[0],
            Terminal::B => self.stops[self.stops.len() - 1],
        }
    }
}

/// T_l: out-and-back over the stop sequence, counting dwell at intermediate
/// stops (and at both terminals when `dwell_at_terminals`).
pub fn round_trip_time<T: Scalar>(line: &Line<T>, legs: &[T], dwell_at_terminals: bool) -> Result<T, NetError> {
    if line.stops.len() < 2 {
        return Err(NetError::TooFewStops(line.name.clone()));
    }
    let expected = line.stops.len() - 1;
    if legs.len() < expected {
        return Err(NetError::MissingEdgeTime { line: line.name.clone(), leg: legs.len() });
    }
    let moving: T = legs[..expected].iter().copied().sum();
    let dwell_stops = line.stops.len() - 2;
    let mut one_way = moving + line.dwell_min * T::from_int(dwell_stops as i64);
    if dwell_at_terminals {
        one_way += line.dwell_min;
    }
    Ok(T::lit(2.0) * one_way)
}

/// t_l = T_l / N_l.
pub fn headway<T: Scalar>(line: &Line<T>, legs: &[T], dwell_at_terminals: bool) -> Result<T, NetError> {
    if line.fleet == 0 {
        return Err(NetError::ZeroFleet(line.name.clone()));
    }
    Ok(round_trip_time(line, legs, dwell_at_terminals)? / T::from_int(line.fleet as i64))
}

/// Pairwise distance source in km.
pub trait DistanceLookup<T> {
    fn km(&self, a: NodeId, b: NodeId) -> Option<T>;
}

impl<T: Copy> DistanceLookup<T> for BTreeMap<(NodeId, NodeId), T> {
    fn km(&self, a: NodeId, b: NodeId) -> Option<T> {
        self.get(&(a, b)).or_else(|| self.get(&(b, a))).copied()
    }
}

/// Circle length: twice the sum of consecutive stop distances.
pub fn line_length<T: Scalar>(line: &Line<T>, distances: &impl DistanceLookup<T>) -> Result<T, NetError> {
    let mut one_way = T::zero();
    for pair in line.stops.windows(2) {
        one_way += distances.km(pair[0], pair[1]).ok_or(NetError::MissingDistance(pair[0], pair[1]))?;
    }
    Ok(T::lit(2.0) * one_way)
}

/// Stop list of `parent` oriented so that it ends at `terminal`.
pub fn oriented_stops<T: Scalar>(parent: &Line<T>, terminal: Terminal) -> Vec<NodeId> {
    let mut stops = parent.stops.clone();
    if terminal == Terminal::A {
        stops.reverse();
    }
    stops
}

/// Extend `parent` beyond `terminal` through `suffix`. The returned line keeps
/// the parent's id as a placeholder; [`TransitNetwork::add_line`] assigns a
/// fresh one.
pub fn apply_extension<T: Scalar>(
    parent: &Line<T>,
    terminal: Terminal,
    suffix: &[NodeId],
    fleet: u32,
) -> Result<Line<T>, NetError> {
    if suffix.is_empty() {
        return Err(NetError::EmptySuffix);
    }
    let mut stops = oriented_stops(parent, terminal);
    stops.extend_from_slice(suffix);
    Ok(Line {
        id: parent.id,
        name: format!("{}+{}", parent.name, terminal),
        mode: parent.mode,
        kind: terminal.extension_kind(),
        stops,
        speed_kmh: parent.speed_kmh,
        dwell_min: parent.dwell_min,
        fleet,
        parent: Some(parent.id),
        extension_suffix: suffix.to_vec(),
    })
}

/// Symmetric sparse road-distance table in km.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoadDistances<T = f64> {
    entries: BTreeMap<(NodeId, NodeId), T>,
}

impl<T: Scalar> RoadDistances<T> {
    pub fn insert(&mut self, a: NodeId, b: NodeId, km: T) {
        self.entries.insert(ordered(a, b), km);
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<T> {
        self.entries.get(&ordered(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn ordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Scalar> Serialize for RoadDistances<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(NodeId, NodeId, T)> = self.entries.iter().map(|(&(a, b), &d)| (a, b, d)).collect();
        rows.serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for RoadDistances<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<(NodeId, NodeId, T)> = Vec::deserialize(deserializer)?;
        let mut out = RoadDistances::default();
        for (a, b, d) in rows {
            out.insert(a, b, d);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkTag {
    Original,
    Disrupted,
    Replacement,
    Ours,
}

impl fmt::Display for NetworkTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkTag::Original => "original",
            NetworkTag::Disrupted => "disrupted",
            NetworkTag::Replacement => "replacement",
            NetworkTag::Ours => "ours",
        })
    }
}

/// Immutable network snapshot. Every modification goes through a method that
/// returns or edits an owned copy; builders never share state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitNetwork<T = f64> {
    pub tag: NetworkTag,
    pub grid: Grid<T>,
    pub tiles: Vec<Tile<T>>,
    pub nodes: Vec<Node<T>>,
    /// Centroid node of each tile, indexed by tile id.
    pub centroids: Vec<NodeId>,
    pub lines: BTreeMap<LineId, Line<T>>,
    /// In-vehicle minutes of each leg, aligned with the line's stops.
    pub leg_times: BTreeMap<LineId, Vec<T>>,
    pub road_km: RoadDistances<T>,
    /// Stations of the disrupted rail line, in line order.
    pub disrupted: Vec<NodeId>,
    pub dwell_at_terminals: bool,
}

impl<T: Scalar> TransitNetwork<T> {
    /// Network over a tessellation with one centroid node per tile and no
    /// stops yet.
    pub fn new(grid: Grid<T>, tiles: Vec<Tile<T>>) -> Self {
        let mut net = TransitNetwork {
            tag: NetworkTag::Original,
            grid,
            tiles: Vec::new(),
            nodes: Vec::new(),
            centroids: Vec::new(),
            lines: BTreeMap::new(),
            leg_times: BTreeMap::new(),
            road_km: RoadDistances::default(),
            disrupted: Vec::new(),
            dwell_at_terminals: false,
        };
        for tile in &tiles {
            let id = net.add_node(format!("c{}", tile.id.0), NodeKind::Centroid, tile.centroid);
            net.centroids.push(id);
        }
        net.tiles = tiles;
        net
    }

    pub fn add_node(&mut self, name: impl Into<String>, kind: NodeKind, coord: Point<T>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { id, name: name.into(), kind, coord });
        id
    }

    pub fn node(&self, id: NodeId) -> Result<&Node<T>, NetError> {
        self.nodes.get(id.0).ok_or(NetError::UnknownNode(id))
    }

    pub fn line(&self, id: LineId) -> Result<&Line<T>, NetError> {
        self.lines.get(&id).ok_or_else(|| NetError::UnknownLine(id.to_string()))
    }

    pub fn line_by_name(&self, name: &str) -> Result<&Line<T>, NetError> {
        self.lines.values().find(|l| l.name == name).ok_or_else(|| NetError::UnknownLine(name.to_string()))
    }

    pub fn active_lines(&self) -> impl Iterator<Item = &Line<T>> {
        self.lines.values().filter(|l| l.is_active())
    }

    pub fn regular_lines(&self) -> impl Iterator<Item = &Line<T>> {
        self.lines.values().filter(|l| l.kind == LineKind::Regular)
    }

    pub fn next_line_id(&self) -> LineId {
        LineId(self.lines.keys().next_back().map_or(0, |id| id.0 + 1))
    }

    /// Road distance when the table has one, Euclidean otherwise.
    pub fn road_km(&self, a: NodeId, b: NodeId) -> T {
        if a == b {
            return T::zero();
        }
        self.road_km.get(a, b).unwrap_or_else(|| self.nodes[a.0].coord.distance_km(&self.nodes[b.0].coord))
    }

    /// Tile that contains the node's coordinate.
    pub fn node_tile(&self, id: NodeId) -> Option<TileId> {
        self.nodes.get(id.0).and_then(|n| self.grid.locate(&n.coord))
    }

    fn default_legs(&self, stops: &[NodeId], speed_kmh: T) -> Vec<T> {
        stops.windows(2).map(|p| minutes_at(self.road_km(p[0], p[1]), speed_kmh)).collect()
    }

    /// Insert a line under a fresh id. Leg times default to road distance over
    /// the line's speed unless given explicitly.
    pub fn add_line(&mut self, mut line: Line<T>, legs: Option<Vec<T>>) -> Result<LineId, NetError> {
        if line.stops.len() < 2 {
            return Err(NetError::TooFewStops(line.name));
        }
        for &s in &line.stops {
            self.node(s)?;
        }
        let legs = legs.unwrap_or_else(|| self.default_legs(&line.stops, line.speed_kmh));
        if legs.len() != line.stops.len() - 1 {
            return Err(NetError::MissingEdgeTime { line: line.name, leg: legs.len() });
        }
        let id = self.next_line_id();
        line.id = id;
        self.lines.insert(id, line);
        self.leg_times.insert(id, legs);
        Ok(id)
    }

    /// Add an extension of regular line `parent`. Legs on the parent's own
    /// stops are inherited; legs through the suffix use road distances.
    pub fn add_extension(
        &mut self,
        parent: LineId,
        terminal: Terminal,
        suffix: &[NodeId],
        fleet: u32,
    ) -> Result<LineId, NetError> {
        let parent_line = self.line(parent)?.clone();
        let line = apply_extension(&parent_line, terminal, suffix, fleet)?;
        let mut legs = self.leg_times.get(&parent).cloned().unwrap_or_default();
        if terminal == Terminal::A {
            legs.reverse();
        }
        let mut prev = parent_line.terminal(terminal);
        for &n in suffix {
            legs.push(minutes_at(self.road_km(prev, n), line.speed_kmh));
            prev = n;
        }
        self.add_line(line, Some(legs))
    }

    pub fn legs(&self, id: LineId) -> Result<&[T], NetError> {
        let line = self.line(id)?;
        self.leg_times
            .get(&id)
            .map(Vec::as_slice)
            .ok_or_else(|| NetError::MissingEdgeTime { line: line.name.clone(), leg: 0 })
    }

    pub fn round_trip_time(&self, id: LineId) -> Result<T, NetError> {
        round_trip_time(self.line(id)?, self.legs(id)?, self.dwell_at_terminals)
    }

    pub fn headway(&self, id: LineId) -> Result<T, NetError> {
        headway(self.line(id)?, self.legs(id)?, self.dwell_at_terminals)
    }

    /// Circle length in km over road distances (Euclidean fallback).
    pub fn line_length(&self, id: LineId) -> Result<T, NetError> {
        line_length(self.line(id)?, &NetworkDistances(self))
    }

    pub fn set_fleet(&mut self, id: LineId, fleet: u32) -> Result<(), NetError> {
        let line = self.lines.get_mut(&id).ok_or_else(|| NetError::UnknownLine(id.to_string()))?;
        line.fleet = fleet;
        Ok(())
    }

    /// Deterministic JSON rendering of the whole snapshot.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("network snapshot serializes")
    }
}

/// [`DistanceLookup`] view over a network's road metric.
pub struct NetworkDistances<'a, T>(pub &'a TransitNetwork<T>);

impl<T: Scalar> DistanceLookup<T> for NetworkDistances<'_, T> {
    fn km(&self, a: NodeId, b: NodeId) -> Option<T> {
        (a.0 < self.0.nodes.len() && b.0 < self.0.nodes.len()).then(|| self.0.road_km(a, b))
    }
}
