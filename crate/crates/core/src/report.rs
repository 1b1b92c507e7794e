//! Evaluation metrics and plot-ready output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::accessibility::AccessibilityField;
use crate::net_model::{NetError, TransitNetwork};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("fields cover {0} and {1} tiles")]
    TileMismatch(usize, usize),
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("cannot write {path}: {source}")]
    IoFailure { path: String, source: io::Error },
}

/// Per-centroid relative change `(A - B) / B`. Tiles with a zero denominator
/// are `None` and counted.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct DeltaField<T = f64> {
    pub values: Vec<Option<T>>,
    pub zero_denominators: usize,
}

impl<T: Scalar> DeltaField<T> {
    pub fn defined(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().flatten().copied()
    }
}

pub fn delta_field<T: Scalar>(
    a: &AccessibilityField<T>,
    b: &AccessibilityField<T>,
) -> Result<DeltaField<T>, ReportError> {
    if a.len() != b.len() {
        return Err(ReportError::TileMismatch(a.len(), b.len()));
    }
    let mut zero_denominators = 0;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| {
            if y > T::zero() {
                Some((x - y) / y)
            } else {
                zero_denominators += 1;
                None
            }
        })
        .collect();
    Ok(DeltaField { values, zero_denominators })
}

/// mean(A) / mean(base).
pub fn mean_ratio<T: Scalar>(a: &AccessibilityField<T>, base: &AccessibilityField<T>) -> Result<T, ReportError> {
    if a.len() != base.len() {
        return Err(ReportError::TileMismatch(a.len(), base.len()));
    }
    if base.mean <= T::zero() {
        return Err(ReportError::ZeroDenominator);
    }
    Ok(a.mean / base.mean)
}

/// Empirical CDF as `(value, fraction of samples <= value)` at each distinct
/// value, ascending.
pub fn ecdf<T: Scalar>(values: &[T]) -> Result<Vec<(T, T)>, ReportError> {
    if values.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = T::from_int(sorted.len() as i64);
    let mut out: Vec<(T, T)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = T::from_int(i as i64 + 1) / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    Ok(out)
}

/// Fleet-wide km per hour: sum over active lines of circle length times
/// runs per hour (60 / headway in minutes).
pub fn operating_distance<T: Scalar>(network: &TransitNetwork<T>) -> Result<T, ReportError> {
    let mut total = T::zero();
    for line in network.active_lines() {
        let length = network.line_length(line.id)?;
        let headway = network.headway(line.id)?;
        total += length * T::lit(60.0) / headway;
    }
    Ok(total)
}

/// Everything [`emit`] writes.
#[derive(Clone, Debug, Default)]
pub struct ReportSet<T = f64> {
    /// Accessibility per snapshot label, e.g. `orig`, `disr`, `repl_b10`.
    pub fields: BTreeMap<String, AccessibilityField<T>>,
    /// Deltas per comparison label, e.g. `disr_vs_orig`.
    pub deltas: BTreeMap<String, DeltaField<T>>,
    pub ecdfs: BTreeMap<String, Vec<(T, T)>>,
    /// Network whose tiles and lines go to the map file.
    pub map_network: Option<TransitNetwork<T>>,
    pub plan: Option<Value>,
    pub scalars: BTreeMap<String, f64>,
}

impl<T: Scalar> ReportSet<T> {
    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
            && self.deltas.is_empty()
            && self.ecdfs.is_empty()
            && self.map_network.is_none()
            && self.plan.is_none()
            && self.scalars.is_empty()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::IoFailure { path: path.display().to_string(), source })
}

fn num<T: Scalar>(v: T) -> String {
    format!("{}", v.to_real())
}

/// Tile and line features with planar coordinates.
pub fn geojson<T: Scalar>(network: &TransitNetwork<T>, deltas: &BTreeMap<String, DeltaField<T>>) -> Value {
    let half = network.grid.tile_len_m.to_real() / 2.0;
    let mut features = Vec::new();
    for tile in &network.tiles {
        let (cx, cy) = (tile.centroid.x.to_real(), tile.centroid.y.to_real());
        let ring = json!([
            [cx - half, cy - half],
            [cx + half, cy - half],
            [cx + half, cy + half],
            [cx - half, cy + half],
            [cx - half, cy - half]
        ]);
        let mut props = serde_json::Map::new();
        props.insert("tile".into(), json!(tile.id.0));
        props.insert("opportunities".into(), json!(tile.opportunities));
        for (label, d) in deltas {
            props.insert(label.clone(), json!(d.values.get(tile.id.0).copied().flatten().map(|v| v.to_real())));
        }
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": [ring] },
            "properties": props,
        }));
    }
    for line in network.lines.values() {
        let coords: Vec<Value> = line
            .stops
            .iter()
            .filter_map(|&s| network.node(s).ok())
            .map(|n| json!([n.coord.x.to_real(), n.coord.y.to_real()]))
            .collect();
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "LineString", "coordinates": coords },
            "properties": {
                "line": line.name,
                "mode": format!("{:?}", line.mode),
                "kind": format!("{:?}", line.kind),
                "fleet": line.fleet,
            },
        }));
    }
    json!({ "type": "FeatureCollection", "features": features })
}

/// Write the report files into `out_dir`:
///
/// * `acc_<label>.csv`: tile, accessibility
/// * `delta_<label>.csv`: tile, relative change (empty when undefined)
/// * `ecdf_<label>.csv`: value, cumulative fraction
/// * `map.geojson`, `plan.json` when present
/// * `summary.json`: scalar metrics, always written
///
/// Returns the written file names, sorted.
pub fn emit<T: Scalar>(reports: &ReportSet<T>, out_dir: &Path) -> Result<Vec<String>, ReportError> {
    fs::create_dir_all(out_dir)
        .map_err(|source| ReportError::IoFailure { path: out_dir.display().to_string(), source })?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<(), ReportError> {
        write_file(&out_dir.join(&name), &contents)?;
        written.push(name);
        Ok(())
    };
    for (label, field) in &reports.fields {
        let mut s = String::from("tile,accessibility\n");
        for (i, v) in field.values.iter().enumerate() {
            let _ = writeln!(s, "{i},{}", num(*v));
        }
        put(format!("acc_{label}.csv"), s)?;
    }
    for (label, delta) in &reports.deltas {
        let mut s = String::from("tile,delta\n");
        for (i, v) in delta.values.iter().enumerate() {
            let _ = writeln!(s, "{i},{}", v.map(num).unwrap_or_default());
        }
        put(format!("delta_{label}.csv"), s)?;
    }
    for (label, steps) in &reports.ecdfs {
        let mut s = String::from("value,fraction\n");
        for (v, f) in steps {
            let _ = writeln!(s, "{},{}", num(*v), num(*f));
        }
        put(format!("ecdf_{label}.csv"), s)?;
    }
    if let Some(net) = &reports.map_network {
        let text = serde_json::to_string_pretty(&geojson(net, &reports.deltas)).expect("json value");
        put("map.geojson".into(), text + "\n")?;
    }
    if let Some(plan) = &reports.plan {
        put("plan.json".into(), serde_json::to_string_pretty(plan).expect("json value") + "\n")?;
    }
    let mut summary = serde_json::Map::new();
    for (k, v) in &reports.scalars {
        summary.insert(k.clone(), json!(v));
    }
    for (label, delta) in &reports.deltas {
        if delta.zero_denominators > 0 {
            summary.insert(format!("zero_denominators_{label}"), json!(delta.zero_denominators));
        }
    }
    put("summary.json".into(), serde_json::to_string_pretty(&Value::Object(summary)).expect("json value") + "\n")?;
    written.sort();
    Ok(written)
}
