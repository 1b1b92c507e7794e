//! Independent oracles and scenario drivers shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transit_remediation::geometry::{Point, Rect};
use transit_remediation::net_model::{Line, LineId, Mode, NodeId, NodeKind, Terminal, TransitNetwork};
use transit_remediation::router::RouterParams;
use transit_remediation::stage2::{AllocationProblem, Candidate, ClusterDemand, Family};
use transit_remediation::tessellation::tessellate;

/// Absolute slack for accessibility comparisons.
pub const SLACK: f64 = 1e-9;

pub fn walk_min(a: &Point<f64>, b: &Point<f64>, speed_kmh: f64) -> f64 {
    a.distance_km(b) / speed_kmh * 60.0
}

/// Random network of at most 12 physical nodes (6 centroids, up to 6
/// stops) and at most 3 lines.
pub fn small_network(seed: u64) -> (TransitNetwork<f64>, RouterParams<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (grid, tiles) = tessellate(&Rect::new(0.0, 0.0, 3000.0, 2000.0), 1.0).unwrap();
    let mut net = TransitNetwork::new(grid, tiles);
    let n_stops = rng.random_range(2..=6);
    let stops: Vec<NodeId> = (0..n_stops)
        .map(|i| {
            let p = Point::new(rng.random_range(0.0..3000.0f64).round(), rng.random_range(0.0..2000.0f64).round());
            net.add_node(format!("s{i}"), NodeKind::BusStop, p)
        })
        .collect();
    let n_lines = rng.random_range(1..=3);
    for l in 0..n_lines {
        let len = rng.random_range(2..=n_stops.min(4));
        let mut pool = stops.clone();
        let mut chosen = Vec::new();
        for _ in 0..len {
            chosen.push(pool.swap_remove(rng.random_range(0..pool.len())));
        }
        let mode = if rng.random_bool(0.7) { Mode::Bus } else { Mode::Metro };
        let line = Line::regular(LineId(l), format!("L{l}"), mode, chosen, rng.random_range(1..=6));
        net.add_line(line, None).unwrap();
    }
    let radius = [0.5, 1.0, 1.5][rng.random_range(0..3)];
    (net, RouterParams { walk_speed_kmh: 3.5, walk_radius_km: radius })
}

/// Shortest times from `origin` to every centroid by enumerating journeys of
/// at most `max_boardings` rides joined by shortest walks.
pub fn brute_force_times(
    net: &TransitNetwork<f64>,
    params: &RouterParams<f64>,
    origin: NodeId,
    max_boardings: usize,
) -> Vec<f64> {
    let n = net.nodes.len();
    let mut walk = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in walk.iter_mut().enumerate() {
        row[i] = 0.0;
        for j in 0..n {
            let (a, b) = (&net.nodes[i], &net.nodes[j]);
            let centroids = a.kind == NodeKind::Centroid && b.kind == NodeKind::Centroid;
            if i != j && (centroids || a.coord.distance_km(&b.coord) <= params.walk_radius_km) {
                row[j] = walk_min(&a.coord, &b.coord, params.walk_speed_kmh);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = walk[i][k] + walk[k][j];
                if via < walk[i][j] {
                    walk[i][j] = via;
                }
            }
        }
    }
    // (board, alight, minutes) for every ride on every line in both directions
    let mut rides = Vec::new();
    for line in net.lines.values().filter(|l| l.fleet > 0) {
        let legs = net.legs(line.id).unwrap();
        let wait = net.headway(line.id).unwrap() / 2.0;
        let s = line.stops.len();
        for i in 0..s {
            for j in 0..s {
                if i == j {
                    continue;
                }
                let (lo, hi) = (i.min(j), i.max(j));
                let ride: f64 = legs[lo..hi].iter().sum::<f64>() + line.dwell_min * (hi - lo - 1) as f64;
                rides.push((line.stops[i].0, line.stops[j].0, wait + ride));
            }
        }
    }
    let centroids: Vec<usize> = net.centroids.iter().map(|c| c.0).collect();
    let mut best: Vec<f64> = centroids.iter().map(|&c| walk[origin.0][c]).collect();
    fn extend(
        at: usize,
        t: f64,
        left: usize,
        walk: &[Vec<f64>],
        rides: &[(usize, usize, f64)],
        centroids: &[usize],
        best: &mut [f64],
    ) {
        for (k, &c) in centroids.iter().enumerate() {
            best[k] = best[k].min(t + walk[at][c]);
        }
        if left == 0 {
            return;
        }
        for &(a, b, cost) in rides {
            let reach = t + walk[at][a];
            if reach.is_finite() {
                extend(b, reach + cost, left - 1, walk, rides, centroids, best);
            }
        }
    }
    extend(origin.0, 0.0, max_boardings, &walk, &rides, &centroids, &mut best);
    best
}

/// Left-to-right length of `start -> order...`.
pub fn open_path(start: usize, order: &[usize], pts: &[(f64, f64)]) -> f64 {
    let d = |a: usize, b: usize| ((pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2)).sqrt() / 1000.0;
    let mut total = 0.0;
    let mut prev = start;
    for &n in order {
        total += d(prev, n);
        prev = n;
    }
    total
}

/// Random allocation instance with exact coefficients.
pub fn allocation_instance(seed: u64) -> AllocationProblem<Rational64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = |rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64| Rational64::new(rng.random_range(lo..=hi), den);
    let n_fam = rng.random_range(1..=4);
    let families: Vec<Family<Rational64>> = (0..n_fam)
        .map(|l| Family { line: LineId(l), score: r(&mut rng, 0, 40, 4), base_fleet: rng.random_range(0..=3) })
        .collect();
    let n_clusters = rng.random_range(1..=2);
    let clusters: Vec<ClusterDemand<Rational64>> =
        (0..n_clusters).map(|k| ClusterDemand { id: k, demand: r(&mut rng, 1, 400, 1) }).collect();
    let mut candidates = Vec::new();
    for k in 0..n_clusters {
        let start = candidates.len();
        for f in &families {
            for t in Terminal::BOTH {
                if rng.random_bool(0.6) {
                    candidates.push(Candidate {
                        line: f.line,
                        terminal: t,
                        cluster: k,
                        score: f.score + r(&mut rng, 0, 40, 4),
                        length: r(&mut rng, 1, 30, 5),
                    });
                }
            }
        }
        if candidates.len() == start {
            let f = &families[rng.random_range(0..families.len())];
            candidates.push(Candidate {
                line: f.line,
                terminal: Terminal::A,
                cluster: k,
                score: f.score + Rational64::from_integer(3),
                length: Rational64::from_integer(2),
            });
        }
    }
    let weights =
        [Rational64::from_integer(0), Rational64::new(1, 2), Rational64::from_integer(1), Rational64::from_integer(2)];
    AllocationProblem {
        families,
        clusters,
        candidates,
        cap: Rational64::from_integer(120),
        n_max: rng.random_range(0..=5),
        weight_f2: weights[rng.random_range(0..weights.len())],
        regular_floor: 0,
    }
}

/// Best objective by enumerating every pairing and every integer fleet
/// split; `None` when nothing is feasible.
pub fn exhaustive_allocation(p: &AllocationProblem<Rational64>) -> Option<Rational64> {
    let m = p.n_max as i64 + p.families.iter().map(|f| f.base_fleet as i64).sum::<i64>();
    let need = |k: usize| {
        let q = p.clusters.iter().find(|c| c.id == k).unwrap().demand / p.cap;
        q.ceil().to_integer().max(1)
    };
    let per_cluster: Vec<Vec<usize>> = p
        .clusters
        .iter()
        .map(|k| (0..p.candidates.len()).filter(|&i| p.candidates[i].cluster == k.id).collect())
        .collect();
    let mut best: Option<Rational64> = None;
    let mut choice = vec![0usize; per_cluster.len()];
    loop {
        let picked: Vec<usize> = choice.iter().enumerate().map(|(k, &c)| per_cluster[k][c]).collect();
        let mut ext: Vec<(LineId, Terminal)> =
            picked.iter().map(|&c| (p.candidates[c].line, p.candidates[c].terminal)).collect();
        ext.sort();
        let distinct = ext.windows(2).all(|w| w[0] != w[1]);
        if distinct {
            if let Some(v) = best_fleet(p, &picked, m, &need) {
                best = Some(best.map_or(v, |b: Rational64| b.max(v)));
            }
        }
        // odometer over cluster choices
        let mut k = 0;
        loop {
            if k == choice.len() {
                return best;
            }
            choice[k] += 1;
            if choice[k] < per_cluster[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn best_fleet(
    p: &AllocationProblem<Rational64>,
    picked: &[usize],
    m: i64,
    need: &dyn Fn(usize) -> i64,
) -> Option<Rational64> {
    // per family: best value for each number of added buses
    let mut tables: Vec<Vec<Option<Rational64>>> = Vec::new();
    for f in &p.families {
        let active: Vec<usize> = picked.iter().copied().filter(|&c| p.candidates[c].line == f.line).collect();
        let mut row = Vec::new();
        for added in 0..=p.n_max as i64 {
            let total = f.base_fleet as i64 + added;
            let mut best: Option<Rational64> = None;
            let mut split = |xs: &[i64]| {
                let used: i64 = xs.iter().sum();
                let regular = total - used;
                if regular < p.regular_floor as i64 {
                    return;
                }
                let mut v = f.score * Rational64::from_integer(regular);
                for (&c, &x) in active.iter().zip(xs) {
                    let cand = &p.candidates[c];
                    v += (cand.score - p.weight_f2 * cand.length) * Rational64::from_integer(x);
                }
                best = Some(best.map_or(v, |b| b.max(v)));
            };
            match active.len() {
                0 => split(&[]),
                1 => {
                    for x in need(p.candidates[active[0]].cluster)..=m {
                        split(&[x]);
                    }
                }
                _ => {
                    for x in need(p.candidates[active[0]].cluster)..=m {
                        for y in need(p.candidates[active[1]].cluster)..=m {
                            split(&[x, y]);
                        }
                    }
                }
            }
            row.push(best);
        }
        tables.push(row);
    }
    // distribute at most n_max added buses over the families
    let mut reach: BTreeMap<i64, Rational64> = BTreeMap::new();
    reach.insert(0, Rational64::from_integer(0));
    for row in &tables {
        let mut next: BTreeMap<i64, Rational64> = BTreeMap::new();
        for (&used, &v) in &reach {
            for (added, val) in row.iter().enumerate() {
                let total = used + added as i64;
                if let (Some(val), true) = (val, total <= p.n_max as i64) {
                    let e = next.entry(total).or_insert(v + *val);
                    if v + *val > *e {
                        *e = v + *val;
                    }
                }
            }
        }
        reach = next;
    }
    reach.values().copied().max()
}
