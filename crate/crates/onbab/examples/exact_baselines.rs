//! Exact baselines on an oracle-sized instance: optimal Steiner tree, optimal
//! rent-or-buy, full brute-force routing, and the online algorithms' ratios
//! against them.

use onbab::harness::{self, Algorithm, RunConfig};
use onbab::metric::{generate, GenParams, GeneratorKind, PointId};
use onbab::oracles;

fn main() {
    let inst = generate(
        GeneratorKind::Euclidean,
        &GenParams {
            n: 5,
            ..Default::default()
        },
        17,
    )
    .unwrap();
    let metric = inst.build_metric().unwrap();
    let all: Vec<PointId> = (0..metric.len()).map(PointId).collect();
    let terminals = &all[1..];

    println!("mst                {:.4}", oracles::mst_cost(&metric, &all));
    println!(
        "greedy online      {:.4}",
        oracles::greedy_online_steiner(&metric, &all)
    );
    println!(
        "exact steiner      {:.4}",
        oracles::exact_steiner(&metric, &all, &all).unwrap()
    );

    let rob = oracles::exact_single_sink_rob(&metric, terminals, PointId(0), 3.0, 1.0).unwrap();
    println!(
        "exact rent-or-buy  {:.4}  (buy set {:?})",
        rob.cost, rob.buy_set
    );

    let schedule = harness::default_schedule();
    let opt = oracles::brute_force_routing_opt(&metric, terminals, PointId(0), &schedule).unwrap();
    println!("brute-force opt    {opt:.4}");

    println!("\nalgorithm vs baseline:");
    let cfg = RunConfig::new(Algorithm::Last);
    for row in harness::compare(&inst, &cfg).unwrap() {
        println!(
            "  {:10} {:8.4}  vs {:16} {:8.4}  ratio {:.3}",
            row.algorithm, row.alg_cost, row.baseline, row.baseline_cost, row.ratio
        );
    }
}
