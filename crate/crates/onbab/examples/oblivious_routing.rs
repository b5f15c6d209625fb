//! Oblivious buy-at-bulk: routes are fixed before the cost function is
//! known. Compares the randomized type sampler with the two deterministic
//! density rules and prints the per-scale rent-or-buy cost decomposition.

use onbab::metric::{generate, GenParams, GeneratorKind, PointId};
use onbab::oblivious::{ObliviousState, Variant};
use onbab::spanner::KMode;

fn main() {
    let inst = generate(
        GeneratorKind::Euclidean,
        &GenParams {
            n: 48,
            ..Default::default()
        },
        13,
    )
    .unwrap();
    let metric = inst.build_metric().unwrap();
    let k = metric.len() - 1;

    for variant in [Variant::Rand, Variant::Det, Variant::DetImproved] {
        let mut s = ObliviousState::new(variant, KMode::Known(k), 42);
        s.set_root(PointId(0));
        for i in 1..metric.len() {
            s.insert_terminal(PointId(i), &metric).unwrap();
        }

        let mut taus: Vec<usize> = s
            .terminals()
            .iter()
            .map(|&v| s.tau_of(v).unwrap())
            .collect();
        taus.sort_unstable();
        let fallbacks: usize = s
            .trace()
            .iter()
            .flat_map(|st| &st.hops)
            .filter(|h| h.fallback)
            .count();

        println!("{variant:?}:");
        println!("  type histogram  {:?}", histogram(&taus));
        println!("  spanners built  {}", s.spanner_count());
        println!("  fallback hops   {fallbacks}");
        for row in s.cost_report(&metric) {
            println!(
                "  g_{}: cost {:8.3} ≤ buy {:8.3} + rent {:8.3}",
                row.i, row.cost_i, row.buy_part, row.rent_part
            );
        }
        s.check_invariants(&metric).unwrap();
    }
}

fn histogram(sorted: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &t in sorted {
        match out.last_mut() {
            Some((v, c)) if *v == t => *c += 1,
            _ => out.push((t, 1)),
        }
    }
    out
}
