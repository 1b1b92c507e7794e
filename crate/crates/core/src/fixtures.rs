//! Synthetic scenarios: the bundled suburb and seeded random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Rect;
use crate::net_model::Mode;
use crate::scenario::{LineSpec, NodeKindSpec, NodeSpec, Parameters, ScenarioConfig};

fn node(name: &str, kind: NodeKindSpec, x: f64, y: f64) -> NodeSpec {
    NodeSpec { name: name.to_string(), kind, x, y }
}

fn line(name: &str, mode: Mode, stops: Vec<String>, fleet: u32) -> LineSpec {
    LineSpec { name: name.to_string(), mode, stops, fleet, speed_kmh: None, dwell_min: None, leg_times_min: None }
}

/// Stops of a straight bus line from `from` to `to` with `n` stops.
fn straight(prefix: &str, from: (f64, f64), to: (f64, f64), n: usize, nodes: &mut Vec<NodeSpec>) -> Vec<String> {
    (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            let name = format!("{prefix}.{i}");
            let (x, y) = (from.0 + f * (to.0 - from.0), from.1 + f * (to.1 - from.1));
            nodes.push(node(&name, NodeKindSpec::BusStop, x.round(), y.round()));
            name
        })
        .collect()
}

/// Knobs of the suburb generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SuburbLayout {
    /// x of each rail station on the spine at y = 7500.
    pub stations: Vec<f64>,
    /// Gap between a feeder's terminal and its station, in meters.
    pub feeder_gap_m: f64,
    /// Target distance between consecutive bus stops.
    pub stop_spacing_m: f64,
    pub feeder_fleet: u32,
    pub crosstown_fleet: u32,
    pub rail_fleet: u32,
    /// Amenities drawn around each station.
    pub per_station: usize,
    /// Amenities drawn around each feeder's midpoint.
    pub per_corridor: usize,
    pub uniform: usize,
}

impl Default for SuburbLayout {
    fn default() -> Self {
        SuburbLayout {
            stations: vec![1500.0, 3200.0, 4900.0, 8000.0, 9700.0, 11400.0],
            feeder_gap_m: 400.0,
            stop_spacing_m: 700.0,
            feeder_fleet: 10,
            crosstown_fleet: 20,
            rail_fleet: 12,
            per_station: 100,
            per_corridor: 200,
            uniform: 1200,
        }
    }
}

/// 15 x 15 km suburb: an RER spine of six stations, six radial feeder bus
/// lines alternating north and south of the spine and two crosstown lines.
/// Amenities gather around the stations and the feeder corridors over a
/// uniform background.
pub fn suburb() -> (ScenarioConfig, Vec<[f64; 2]>) {
    suburb_with(&SuburbLayout::default())
}

pub fn suburb_with(layout: &SuburbLayout) -> (ScenarioConfig, Vec<[f64; 2]>) {
    const SPINE_Y: f64 = 7500.0;
    let mut nodes = Vec::new();
    let stations: Vec<String> = layout
        .stations
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let name = format!("S{}", i + 1);
            nodes.push(node(&name, NodeKindSpec::RailStation, x, SPINE_Y));
            name
        })
        .collect();
    let mut lines = vec![line("RER", Mode::Rer, stations, layout.rail_fleet)];
    let mut corridors = Vec::new();
    for (i, &x) in layout.stations.iter().enumerate() {
        let north = i % 2 == 0;
        let (far, near) =
            if north { (14000.0, SPINE_Y + layout.feeder_gap_m) } else { (1000.0, SPINE_Y - layout.feeder_gap_m) };
        let name = format!("B{}", i + 1);
        let n = ((far - near).abs() / layout.stop_spacing_m).round() as usize + 1;
        let stops = straight(&name, (x, far), (x, near), n.max(3), &mut nodes);
        lines.push(line(&name, Mode::Bus, stops, layout.feeder_fleet));
        corridors.push((x, (far + near) / 2.0));
    }
    let k = layout.stations.len();
    for (i, y) in [11000.0, 4000.0].into_iter().enumerate() {
        let name = format!("B{}", k + i + 1);
        let n = (13000.0 / layout.stop_spacing_m).round() as usize + 1;
        let stops = straight(&name, (1000.0, y), (14000.0, y), n, &mut nodes);
        lines.push(line(&name, Mode::Bus, stops, layout.crosstown_fleet));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spread = Normal::new(0.0, 900.0).expect("valid deviation");
    let mut amenities = Vec::new();
    let mut around = |cx: f64, cy: f64, count: usize, rng: &mut ChaCha8Rng| {
        for _ in 0..count {
            amenities.push([(cx + spread.sample(rng)).round(), (cy + spread.sample(rng)).round()]);
        }
    };
    for &x in &layout.stations {
        around(x, SPINE_Y, layout.per_station, &mut rng);
    }
    for &(x, y) in &corridors {
        around(x, y, layout.per_corridor, &mut rng);
    }
    for _ in 0..layout.uniform {
        amenities.push([rng.random_range(0.0..15000.0f64).round(), rng.random_range(0.0..15000.0f64).round()]);
    }

    let config = ScenarioConfig {
        name: "suburb".into(),
        bounds: Rect::new(0.0, 0.0, 15000.0, 15000.0),
        nodes,
        lines,
        road_km: Vec::new(),
        amenities_file: Some("suburb_amenities.csv".into()),
        amenities: Vec::new(),
        disrupted_line: "RER".into(),
        parameters: Parameters::default(),
    };
    (config, amenities)
}

/// Random scenario on an 8 x 8 km area: a rail line of 3-5 stations, 3-5
/// bus lines of 3-6 stops and 300 amenities. Fully determined by `seed`.
pub fn random_scenario(seed: u64) -> (ScenarioConfig, Vec<[f64; 2]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side: f64 = 8000.0;
    let mut nodes = Vec::new();
    let n_stations = rng.random_range(3..=5);
    let y0 = rng.random_range(2000.0..6000.0f64).round();
    let stations: Vec<String> = (0..n_stations)
        .map(|i| {
            let name = format!("S{i}");
            let x = 1000.0 + i as f64 * (6000.0 / (n_stations - 1) as f64);
            let y = (y0 + rng.random_range(-500.0..500.0f64)).round();
            nodes.push(node(&name, NodeKindSpec::RailStation, x.round(), y));
            name
        })
        .collect();
    let mode = if rng.random_bool(0.5) { Mode::Metro } else { Mode::Rer };
    let mut lines = vec![line("R", mode, stations, rng.random_range(4..=10))];
    let n_lines = rng.random_range(3..=5);
    for l in 0..n_lines {
        let n_stops = rng.random_range(3..=6);
        let stops = (0..n_stops)
            .map(|s| {
                let name = format!("B{l}.{s}");
                let p = (rng.random_range(0.0..side).round(), rng.random_range(0.0..side).round());
                nodes.push(node(&name, NodeKindSpec::BusStop, p.0, p.1));
                name
            })
            .collect();
        lines.push(line(&format!("B{l}"), Mode::Bus, stops, rng.random_range(1..=5)));
    }
    let amenities =
        (0..300).map(|_| [rng.random_range(0.0..side).round(), rng.random_range(0.0..side).round()]).collect();
    let config = ScenarioConfig {
        name: format!("random-{seed}"),
        bounds: Rect::new(0.0, 0.0, side, side),
        nodes,
        lines,
        road_km: Vec::new(),
        amenities_file: None,
        amenities: Vec::new(),
        disrupted_line: "R".into(),
        parameters: Parameters { seed, ..Parameters::default() },
    };
    (config, amenities)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suburb_shape() {
        let (c, a) = suburb();
        assert_eq!(c.lines.len(), 9);
        assert_eq!(c.lines.iter().filter(|l| l.mode == Mode::Bus).count(), 8);
        assert_eq!(c.lines[0].stops.len(), 6);
        assert_eq!(a.len(), 6 * 100 + 6 * 200 + 1200);
        let (net, _) = c.build_network::<f64>(&a).unwrap();
        assert_eq!(net.tiles.len(), 225);
    }

    #[test]
    fn random_is_seeded() {
        assert_eq!(random_scenario(3), random_scenario(3));
        assert_ne!(random_scenario(3).0, random_scenario(4).0);
        let (c, a) = random_scenario(11);
        c.build_network::<f64>(&a).unwrap();
    }
}
