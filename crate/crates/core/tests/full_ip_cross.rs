mod common;

use std::collections::BTreeMap;

use transit_remediation::fixtures::random_scenario;
use transit_remediation::full_ip::{
    assignment_from_plan, build_model, linearization_is_exact, solve_tiny, IpInstance, IpLine, IpModel, ObjectiveKind,
    TINY_BINARY_LIMIT,
};
use transit_remediation::net_model::{LineId, NodeId};
use transit_remediation::pipeline::{build, disrupt_scenario, remediate};

/// Stage-2 plans of random scenarios, translated into model variables.
#[test]
fn stage2_plans_satisfy_every_constraint() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let (config, amenities) = random_scenario(seed);
        let original = build::<f64>(&config, &amenities).unwrap();
        let (disrupted, demand) = disrupt_scenario(&original, &config).unwrap();
        let Ok(rem) = remediate(&disrupted, &demand, &config.parameters, 3) else { continue };
        let inst = rem.ip_instance(&disrupted, &demand, &config.parameters);
        let model = build_model(&inst).unwrap();
        let values = assignment_from_plan(&model, &inst, &rem.plan_view()).unwrap();
        assert_eq!(model.check(&values), Vec::<(String, String)>::new(), "seed {seed}");
        checked += 1;
        if checked == 10 {
            break;
        }
    }
    assert_eq!(checked, 10);
    assert!(linearization_is_exact());
}

fn tiny() -> IpInstance<f64> {
    let mut dist = BTreeMap::new();
    dist.insert((NodeId(0), NodeId(10)), 1.0);
    dist.insert((NodeId(0), NodeId(11)), 2.5);
    dist.insert((NodeId(10), NodeId(11)), 1.5);
    IpInstance {
        stations: vec![NodeId(0)],
        nodes: vec![NodeId(0)],
        lines: vec![IpLine {
            line: LineId(0),
            terminal_a: NodeId(10),
            terminal_b: NodeId(11),
            base_fleet: 1,
            score: 2.0,
        }],
        demand: [(NodeId(0), 150.0)].into_iter().collect(),
        dist_km: dist,
        node_scores: [(NodeId(0), 4.0)].into_iter().collect(),
        d_max_m: 500.0,
        cap: 120.0,
        n_max: 1,
        weight_f2: 1.0,
        objective: ObjectiveKind::Surrogate,
    }
}

/// Best objective over every assignment inside the variable bounds.
fn enumerate(model: &IpModel<f64>) -> Option<f64> {
    let vars = &model.variables;
    let mut values: Vec<i64> = vars.iter().map(|v| v.lb).collect();
    let mut best: Option<f64> = None;
    loop {
        if model.check(&values).is_empty() {
            let f = model.objective_value(&values);
            best = Some(best.map_or(f, |b: f64| b.max(f)));
        }
        let mut k = 0;
        loop {
            if k == values.len() {
                return best;
            }
            values[k] += 1;
            if values[k] <= vars[k].ub {
                break;
            }
            values[k] = vars[k].lb;
            k += 1;
        }
    }
}

#[test]
fn tiny_solver_matches_enumeration() {
    let model = build_model(&tiny()).unwrap();
    let span: f64 = model.variables.iter().map(|v| (v.ub - v.lb + 1) as f64).product();
    assert!(span < 5e7, "enumeration space {span}");
    let sol = solve_tiny(&model, TINY_BINARY_LIMIT).unwrap();
    assert!(model.check(&sol.values).is_empty());
    let best = enumerate(&model).unwrap();
    assert!((sol.objective - best).abs() < 1e-9, "{} vs {best}", sol.objective);
}
