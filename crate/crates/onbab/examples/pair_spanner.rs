//! Online multi-commodity spanner: terminal pairs arrive one by one; the
//! spanner promises bounded stretch per pair while the per-scale meta-graphs
//! keep large girth, which caps the edge count.

use onbab::metric::{generate, ArrivalProfile, GenParams, GeneratorKind, PointId};
use onbab::spanner::{KMode, SpannerState};

fn main() {
    let k = 40;
    let inst = generate(
        GeneratorKind::Euclidean,
        &GenParams {
            n: 2 * k,
            profile: ArrivalProfile::Pairs,
            ..Default::default()
        },
        9,
    )
    .unwrap();
    let metric = inst.build_metric().unwrap();

    let mut s = SpannerState::new(KMode::Known(k));
    for p in 0..k {
        let (u, v) = (PointId(2 * p), PointId(2 * p + 1));
        let ins = s.insert_pair(u, v, &metric).unwrap();
        if !ins.new_augmentation.is_empty() {
            println!(
                "pair {p:2} at scale {:3}: +{} augmentation, +{} bridge edges",
                ins.class,
                ins.new_augmentation.len(),
                ins.new_bridges.len()
            );
        }
    }

    let st = s.stats(&metric);
    println!("\npairs              {k}");
    println!(
        "edges              {}  ({:.2} per pair)",
        st.edge_count,
        st.edge_count as f64 / k as f64
    );
    println!("spanner length     {:.3}", st.cost_h);
    println!(
        "max pair stretch   {:.3}  (≤ 4·log₂k = {:.1})",
        st.max_pair_stretch,
        4.0 * (k as f64).log2()
    );
    println!("packing bound      {:.3}", s.steiner_forest_lower_bound());
    for sc in &st.per_scale {
        println!(
            "  scale {:3}: {:3} centers, {:2} aug, {:2} bridges, meta girth {:?}",
            sc.scale, sc.centers, sc.augmentation_edges, sc.bridge_edges, sc.girth
        );
    }
    s.check_invariants(&metric).unwrap();
}
