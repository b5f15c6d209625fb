//! The instance generators: one of each kind, with digests showing that
//! generation is deterministic and the JSON round-trip is lossless.

use onbab::metric::{generate, ArrivalProfile, GenParams, GeneratorKind, Instance};

fn main() {
    let cases = [
        (GeneratorKind::Euclidean, ArrivalProfile::Rooted),
        (GeneratorKind::RandomMetric, ArrivalProfile::SourcesSinks),
        (GeneratorKind::CappedComb, ArrivalProfile::Rooted),
        (GeneratorKind::Circle, ArrivalProfile::Pairs),
    ];
    for (kind, profile) in cases {
        let params = GenParams {
            n: 12,
            profile,
            ..Default::default()
        };
        let inst = generate(kind, &params, 7).unwrap();
        let metric = inst.build_metric().unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst.digest().unwrap(), back.digest().unwrap());
        println!(
            "{kind:?} / {profile:?}: {} arrivals, diameter {:.3}, digest {}",
            inst.arrivals.len(),
            metric.diameter(),
            &inst.digest().unwrap()[..16],
        );
    }
}
