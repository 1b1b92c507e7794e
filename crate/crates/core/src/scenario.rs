//! Scenario files: study area, stops, lines, amenities and parameters.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "name": "suburb",
//!   "bounds": { "min_x": 0, "min_y": 0, "max_x": 15000, "max_y": 15000 },
//!   "nodes": [ { "name": "S1", "kind": "rail_station", "x": 1500, "y": 7500 } ],
//!   "lines": [ { "name": "RER", "mode": "rer", "stops": ["S1", "S2"], "fleet": 12 } ],
//!   "road_km": [ ["S1", "S2", 2.4] ],
//!   "amenities_file": "amenities.csv",
//!   "disrupted_line": "RER",
//!   "parameters": { "d_max_m": 500 }
//! }
//! ```
//!
//! Every entry of `parameters` is optional; defaults are the values of the
//! original case study. The amenities file is a CSV with `x,y` columns,
//! resolved relative to the scenario file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disruption::DemandParams;
use crate::geometry::{Point, Rect};
use crate::net_model::{Line, LineId, Mode, NetError, NodeId, NodeKind, TransitNetwork};
use crate::router::RouterParams;
use crate::scalar::Scalar;
use crate::tessellation::{count_opportunities, tessellate, OpportunityCount, TessellationError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid amenities file: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate node name {0}")]
    DuplicateNode(String),
    #[error("line {line} references unknown node {node}")]
    UnknownNode { line: String, node: String },
    #[error("invalid parameter {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Tessellation(#[from] TessellationError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKindSpec {
    BusStop,
    RailStation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKindSpec,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub name: String,
    pub mode: Mode,
    pub stops: Vec<String>,
    pub fleet: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_min: Option<f64>,
    /// Explicit in-vehicle minutes per leg.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_times_min: Option<Vec<f64>>,
}

/// Policy and model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    pub tile_len_km: f64,
    pub walk_speed_kmh: f64,
    pub walk_radius_km: f64,
    pub d_max_m: f64,
    pub cap: f64,
    pub eps_km: f64,
    pub min_samples: usize,
    pub k0: f64,
    pub s0: f64,
    pub mu: f64,
    pub days: u32,
    pub seed: u64,
    /// Weight on the extension-distance term f2.
    pub weight_f2: f64,
    /// Lowest fleet kept on a regular bus line.
    pub regular_floor: u32,
    pub dwell_at_terminals: bool,
    /// Largest cluster routed by exact subset DP.
    pub max_exact: usize,
    pub allow_heuristic: bool,
}

impl Default for Parameters {
    fn default() -> Self {
        let demand = DemandParams::default();
        Parameters {
            tile_len_km: 1.0,
            walk_speed_kmh: 3.5,
            walk_radius_km: 1.5,
            d_max_m: 500.0,
            cap: 120.0,
            eps_km: 2.0,
            min_samples: 1,
            k0: demand.k0,
            s0: demand.s0,
            mu: demand.mu,
            days: demand.days,
            seed: demand.seed,
            weight_f2: 1.0,
            regular_floor: 0,
            dwell_at_terminals: false,
            max_exact: crate::stage1::DEFAULT_MAX_EXACT,
            allow_heuristic: true,
        }
    }
}

impl Parameters {
    pub fn demand(&self) -> DemandParams {
        DemandParams { k0: self.k0, s0: self.s0, mu: self.mu, days: self.days, seed: self.seed }
    }

    pub fn router<T: Scalar>(&self) -> RouterParams<T> {
        RouterParams { walk_speed_kmh: T::lit(self.walk_speed_kmh), walk_radius_km: T::lit(self.walk_radius_km) }
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("tile_len_km", self.tile_len_km),
            ("walk_speed_kmh", self.walk_speed_kmh),
            ("d_max_m", self.d_max_m),
            ("cap", self.cap),
            ("eps_km", self.eps_km),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if self.walk_radius_km.is_nan() || self.walk_radius_km < 0.0 || self.weight_f2.is_nan() || self.weight_f2 < 0.0
        {
            return Err(ScenarioError::InvalidParameter("negative radius or weight".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub bounds: Rect<f64>,
    pub nodes: Vec<NodeSpec>,
    pub lines: Vec<LineSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub road_km: Vec<(String, String, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amenities_file: Option<PathBuf>,
    /// Inline amenity coordinates, added to the file's.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub amenities: Vec<[f64; 2]>,
    pub disrupted_line: String,
    #[serde(default)]
    pub parameters: Parameters,
}

#[derive(Debug, Deserialize)]
struct AmenityRecord {
    x: f64,
    y: f64,
}

/// Read `x,y` amenity records.
pub fn read_amenities(path: &Path) -> Result<Vec<[f64; 2]>, ScenarioError> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize::<AmenityRecord>().map(|r| r.map(|a| [a.x, a.y]).map_err(ScenarioError::from)).collect()
}

pub fn write_amenities(path: &Path, points: &[[f64; 2]]) -> Result<(), ScenarioError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["x", "y"])?;
    for p in points {
        writer.write_record([p[0].to_string(), p[1].to_string()])?;
    }
    writer.flush().map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

impl ScenarioConfig {
    /// Load a scenario and its amenity file.
    pub fn load(path: &Path) -> Result<(Self, Vec<[f64; 2]>), ScenarioError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let config: ScenarioConfig = serde_json::from_str(&text)?;
        config.parameters.check()?;
        let mut points = Vec::new();
        if let Some(file) = &config.amenities_file {
            let base = path.parent().unwrap_or(Path::new("."));
            points = read_amenities(&base.join(file))?;
        }
        points.extend(config.amenities.iter().copied());
        Ok((config, points))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    /// G^O: tessellation, opportunities, stops and lines.
    pub fn build_network<T: Scalar>(
        &self,
        amenities: &[[f64; 2]],
    ) -> Result<(TransitNetwork<T>, OpportunityCount), ScenarioError> {
        let p = &self.parameters;
        let b = &self.bounds;
        let bounds = Rect::new(T::lit(b.min_x), T::lit(b.min_y), T::lit(b.max_x), T::lit(b.max_y));
        let (grid, mut tiles) = tessellate(&bounds, T::lit(p.tile_len_km))?;
        let pts: Vec<Point<T>> = amenities.iter().map(|a| Point::new(T::lit(a[0]), T::lit(a[1]))).collect();
        let counted = count_opportunities(&grid, &mut tiles, &pts);
        let mut net = TransitNetwork::new(grid, tiles);
        net.dwell_at_terminals = p.dwell_at_terminals;

        let mut ids: BTreeMap<&str, NodeId> = BTreeMap::new();
        for n in &self.nodes {
            let kind = match n.kind {
                NodeKindSpec::BusStop => NodeKind::BusStop,
                NodeKindSpec::RailStation => NodeKind::RailStation,
            };
            let id = net.add_node(n.name.clone(), kind, Point::new(T::lit(n.x), T::lit(n.y)));
            if ids.insert(&n.name, id).is_some() {
                return Err(ScenarioError::DuplicateNode(n.name.clone()));
            }
        }
        let lookup = |line: &str, name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| ScenarioError::UnknownNode { line: line.to_string(), node: name.to_string() })
        };
        for (a, b, km) in &self.road_km {
            let (a, b) = (lookup("road_km", a)?, lookup("road_km", b)?);
            net.road_km.insert(a, b, T::lit(*km));
        }
        for spec in &self.lines {
            let stops = spec.stops.iter().map(|s| lookup(&spec.name, s)).collect::<Result<Vec<_>, _>>()?;
            let mut line = Line::regular(LineId(0), spec.name.clone(), spec.mode, stops, spec.fleet);
            if let Some(v) = spec.speed_kmh {
                line.speed_kmh = T::lit(v);
            }
            if let Some(v) = spec.dwell_min {
                line.dwell_min = T::lit(v);
            }
            let legs = spec.leg_times_min.as_ref().map(|l| l.iter().map(|&v| T::lit(v)).collect());
            net.add_line(line, legs)?;
        }
        Ok((net, counted))
    }
}
