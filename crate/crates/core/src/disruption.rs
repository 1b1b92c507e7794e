//! Rail line disruption, station demand, and the replacement-bus baseline.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_model::{Line, LineId, LineKind, Mode, NetError, NetworkTag, NodeId, TransitNetwork};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum DisruptionError {
    #[error("line {0} is not a rail line")]
    NotRail(String),
    #[error("invalid demand parameters: {0}")]
    InvalidDemand(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Policy inputs of one disruption study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DisruptionScenario<T = f64> {
    pub disrupted_line: LineId,
    /// Passengers per unit time at each disrupted station.
    pub demand: BTreeMap<NodeId, T>,
    pub d_max_m: T,
    /// Passengers per bus.
    pub cap: T,
    /// Budget of additional buses.
    pub n_max: u32,
    pub rng_seed: u64,
}

/// Gamma-Poisson demand generator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandParams {
    /// Gamma shape.
    pub k0: f64,
    /// Gamma scale.
    pub s0: f64,
    /// Multiplier on the drawn rate.
    pub mu: f64,
    pub days: u32,
    pub seed: u64,
}

impl Default for DemandParams {
    fn default() -> Self {
        DemandParams { k0: 5.0, s0: 1.0, mu: 1.0, days: 7, seed: 42 }
    }
}

/// G^DISR: the rail line is removed and its stations recorded as disrupted.
/// The station nodes stay in place, so walking through them is unaffected.
pub fn disrupt<T: Scalar>(network: &TransitNetwork<T>, line: LineId) -> Result<TransitNetwork<T>, DisruptionError> {
    let target = network.line(line)?;
    if !target.mode.is_rail() {
        return Err(DisruptionError::NotRail(target.name.clone()));
    }
    let mut out = network.clone();
    let removed = out.lines.remove(&line).expect("line exists");
    out.leg_times.remove(&line);
    out.disrupted = removed.stops;
    out.tag = NetworkTag::Disrupted;
    Ok(out)
}

/// q_d per station: rate drawn from Gamma(k0, s0) times `mu`, then the mean
/// of one Poisson draw per day. Stations are visited in the given order with
/// a single ChaCha8 stream seeded from `params.seed`.
pub fn gen_demand<T: Scalar>(
    stations: &[NodeId],
    params: &DemandParams,
) -> Result<BTreeMap<NodeId, T>, DisruptionError> {
    if !(params.k0 > 0.0 && params.s0 > 0.0) || params.mu < 0.0 || params.days == 0 {
        return Err(DisruptionError::InvalidDemand(format!("{params:?}")));
    }
    let gamma = Gamma::new(params.k0, params.s0).map_err(|e| DisruptionError::InvalidDemand(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = BTreeMap::new();
    for &d in stations {
        let rate = gamma.sample(&mut rng) * params.mu;
        let q = if rate > 0.0 {
            let poisson = Poisson::new(rate).map_err(|e| DisruptionError::InvalidDemand(e.to_string()))?;
            let total: f64 = (0..params.days).map(|_| poisson.sample(&mut rng)).sum();
            total / params.days as f64
        } else {
            0.0
        };
        out.insert(d, T::lit(q));
    }
    Ok(out)
}

/// G^REPL: a bus retracing the disrupted stations at bus speed over road
/// distances. With zero buses the line is inactive and routing equals G^DISR.
pub fn build_replacement<T: Scalar>(
    disrupted: &TransitNetwork<T>,
    extra_buses: u32,
) -> Result<TransitNetwork<T>, DisruptionError> {
    let mut out = disrupted.clone();
    out.tag = NetworkTag::Replacement;
    if disrupted.disrupted.len() < 2 {
        return Ok(out);
    }
    let mut line = Line::regular(LineId(0), "replacement", Mode::Bus, disrupted.disrupted.clone(), extra_buses);
    line.kind = LineKind::Replacement;
    out.add_line(line, None)?;
    Ok(out)
}
