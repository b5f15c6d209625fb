//! Online light approximate shortest-path tree on the adversarial comb:
//! teeth ε apart along a line, hub at distance cap/2 from every tooth.
//! Greedy-Steiner alone would pay huge root stretch; the direct edges cap it.

use onbab::last::LastState;
use onbab::metric::{generate, GenParams, GeneratorKind, PointId};

fn main() {
    let inst = generate(
        GeneratorKind::CappedComb,
        &GenParams {
            n: 120,
            eps: 0.1,
            cap: 2.0,
            ..Default::default()
        },
        0,
    )
    .unwrap();
    let metric = inst.build_metric().unwrap();

    let mut s = LastState::new();
    s.set_root(PointId(0));
    for i in 1..metric.len() {
        let ins = s.insert_terminal(PointId(i), &metric).unwrap();
        if ins.chose_direct {
            println!("tooth {i:3}: direct edge to the hub");
        }
    }

    let rep = s.stretch_and_cost_report(&metric);
    println!("\nterminals          {}", s.terminals().len());
    println!("greedy tree cost   {:.3}", rep.cost_t);
    println!("direct edge cost   {:.3}  (≤ 2·tree)", rep.cost_a);
    println!("total cost         {:.3}", rep.cost_h);
    println!("max root stretch   {:.3}  (≤ 7)", rep.max_root_stretch);
    println!("mst cost           {:.3}", rep.mst_cost);
    s.check_invariants(&metric).unwrap();
}
