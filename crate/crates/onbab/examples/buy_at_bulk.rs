//! Single-sink buy-at-bulk with a pruned cable schedule: each terminal gets
//! a type from the density rule, joins one tree layer per type below it, and
//! routes along layer shortest paths with non-decreasing cable indices.

use onbab::bab::BabState;
use onbab::cables::{cost_report, CableSchedule, CableType};
use onbab::metric::{generate, GenParams, GeneratorKind, PointId};

fn main() {
    let schedule = CableSchedule::new(
        vec![
            CableType {
                sigma: 1.0,
                beta: 1.0,
            },
            CableType {
                sigma: 4.0,
                beta: 0.1,
            },
            CableType {
                sigma: 16.0,
                beta: 0.01,
            },
        ],
        1.0,
    )
    .unwrap();

    let inst = generate(
        GeneratorKind::Euclidean,
        &GenParams {
            n: 40,
            ..Default::default()
        },
        2,
    )
    .unwrap();
    let metric = inst.build_metric().unwrap();

    let mut s = BabState::new(schedule.clone());
    s.set_root(PointId(0), &metric);
    for i in 1..metric.len() {
        let ins = s.insert_terminal(PointId(i), &metric).unwrap();
        println!(
            "terminal {i:2}: type {}, route {} segment(s)",
            ins.tau,
            ins.route.segments.len()
        );
    }

    let rep = cost_report(&metric, &s.route_plan(), &schedule).unwrap();
    println!("\nfixed cost        {:.3}", rep.fixed);
    println!("incremental cost  {:.3}", rep.incremental);
    println!("total cost        {:.3}", rep.total);

    let id = s.algorithm_cost_identity(&metric);
    println!("accounting bound  {:.3} ≤ {:.3}", id.lhs, id.rhs_total);
    for (i, (buy, rent)) in id.rhs_terms.iter().enumerate() {
        println!(
            "  type {}: layer build {buy:.3}, prefix rent {rent:.3}",
            i + 1
        );
    }
    s.check_invariants(&metric).unwrap();
}
