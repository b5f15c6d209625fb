//! Multi-sink tree building: an interleaved source/sink stream where each
//! source connects up the class hierarchy and late-arriving sinks trigger
//! augmentation edges to restore the 3-stretch to the sink set.

use onbab::metric::{generate, ArrivalProfile, GenParams, GeneratorKind, PointId, Role};
use onbab::mlast::{MlastRole, MlastState};

fn main() {
    let inst = generate(
        GeneratorKind::Euclidean,
        &GenParams {
            n: 60,
            profile: ArrivalProfile::SourcesSinks,
            sink_prob: 0.2,
            ..Default::default()
        },
        5,
    )
    .unwrap();
    let metric = inst.build_metric().unwrap();

    let mut s = MlastState::new();
    for ev in &inst.arrivals {
        let role = match ev.role {
            Role::Sink => MlastRole::Sink,
            _ => MlastRole::Source,
        };
        let ins = s.insert(PointId(ev.id), role, &metric).unwrap();
        if !ins.new_a_edges.is_empty() {
            println!(
                "arrival {:3} ({role:?}): {} augmentation edge(s) {:?}",
                ev.id,
                ins.new_a_edges.len(),
                ins.new_a_edges
            );
        }
    }

    let rep = s.charging_report(&metric);
    println!(
        "\nsources / sinks     {} / {}",
        s.sources().len(),
        s.sinks().len()
    );
    println!("forest + aug cost   {:.3}", rep.cost_h);
    println!("Σ 2^class charge    {:.3}", rep.charge_sum);
    println!("cost / charge       {:.3}", rep.measured_constant);
    println!("max sink stretch    {:.3}  (≤ 3)", rep.max_sink_stretch);
    println!("class separation    {}", rep.class_separation_ok);
    println!("class bounds        {}", rep.class_bounds_ok);
    s.check_invariants(&metric).unwrap();
}
