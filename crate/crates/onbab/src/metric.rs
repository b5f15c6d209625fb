//! Online metric model: points revealed one at a time together with their
//! distances to all previous points, plus instance generators and JSON I/O.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cables::CableType;
use crate::tol;

/// Index of a point in arrival order (0 = first arrival).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub usize);

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sink,
    Source,
    Terminal,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalEvent {
    pub id: usize,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mate: Option<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("distance list has length {got}, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("negative distance {0}")]
    NegativeDistance(f64),
    #[error("coincident points: zero distance between distinct points {0} and {1}")]
    CoincidentPoint(PointId, PointId),
    #[error("triangle violation: d({0},{2}) > d({0},{1}) + d({1},{2})")]
    TriangleViolation(PointId, PointId, PointId),
    #[error("no positive distances to normalize")]
    AllZeroDistances,
    #[error("bad generator params: {0}")]
    BadParams(String),
    #[error("bad instance: {0}")]
    BadInstance(String),
}

/// Growing symmetric metric. The only source of `d(·,·)` for all algorithms;
/// since only revealed points exist in the matrix, out-of-range queries panic,
/// which enforces the online access model structurally.
#[derive(Debug, Clone, Default)]
pub struct OnlineMetric {
    /// Row i holds distances from point i to points 0..i.
    rows: Vec<Vec<f64>>,
}

impl OnlineMetric {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> {
        (0..self.len()).map(PointId)
    }

    pub fn dist(&self, u: PointId, v: PointId) -> f64 {
        if u.0 == v.0 {
            assert!(u.0 < self.len(), "unrevealed point {u}");
            return 0.0;
        }
        let (lo, hi) = if u.0 < v.0 { (u.0, v.0) } else { (v.0, u.0) };
        self.rows[hi][lo]
    }

    /// Reveal the next point. `distances` maps index i (< current n) to the
    /// distance from the new point; the triangle inequality against every
    /// existing pair is validated before the point is admitted.
    pub fn reveal_point(&mut self, distances: &[f64]) -> Result<PointId, MetricError> {
        let n = self.len();
        if distances.len() != n {
            return Err(MetricError::WrongLength {
                expected: n,
                got: distances.len(),
            });
        }
        let w = PointId(n);
        for (i, &d) in distances.iter().enumerate() {
            if d < 0.0 || !d.is_finite() {
                return Err(MetricError::NegativeDistance(d));
            }
            if d == 0.0 {
                return Err(MetricError::CoincidentPoint(PointId(i), w));
            }
        }
        let t = tol();
        for u in 0..n {
            for v in 0..n {
                if u == v {
                    continue;
                }
                // d(u,w) ≤ d(u,v) + d(v,w)
                let duw = distances[u];
                if duw > self.dist(PointId(u), PointId(v)) + distances[v] + t * duw {
                    return Err(MetricError::TriangleViolation(PointId(u), PointId(v), w));
                }
                // d(u,v) ≤ d(u,w) + d(w,v)
                let duv = self.dist(PointId(u), PointId(v));
                if duv > distances[u] + distances[v] + t * duv {
                    return Err(MetricError::TriangleViolation(PointId(u), w, PointId(v)));
                }
            }
        }
        self.rows.push(distances.to_vec());
        Ok(w)
    }

    pub fn min_positive_distance(&self) -> Option<f64> {
        self.rows
            .iter()
            .flat_map(|r| r.iter().copied())
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp)
    }

    pub fn diameter(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().copied())
            .max_by(f64::total_cmp)
            .unwrap_or(0.0)
    }

    /// Divide all distances by the minimum positive distance so that every
    /// positive distance is ≥ 1. Returns the divisor; idempotent thereafter.
    pub fn normalize(&mut self) -> Result<f64, MetricError> {
        let scale = self
            .min_positive_distance()
            .ok_or(MetricError::AllZeroDistances)?;
        for row in &mut self.rows {
            for d in row.iter_mut() {
                *d /= scale;
            }
        }
        Ok(scale)
    }

    /// Distance from `v` to the nearest point of `set`; ties broken by the
    /// smallest id. `None` if the set is empty.
    pub fn nearest_in<'a>(
        &self,
        v: PointId,
        set: impl IntoIterator<Item = &'a PointId>,
    ) -> Option<(PointId, f64)> {
        let mut best: Option<(PointId, f64)> = None;
        for &u in set {
            let d = self.dist(v, u);
            let better = match best {
                None => true,
                Some((bu, bd)) => d < bd || (d == bd && u < bu),
            };
            if better {
                best = Some((u, d));
            }
        }
        best
    }

    pub fn full_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.dist(PointId(i), PointId(j))).collect())
            .collect()
    }
}

/// On-disk instance: a metric (explicit matrix or Euclidean coordinates), an
/// arrival sequence with roles, and an optional cable schedule.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Instance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    pub arrivals: Vec<ArrivalEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cables: Vec<CableType>,
}

impl Instance {
    pub fn distance_matrix(&self) -> Result<Vec<Vec<f64>>, MetricError> {
        if let Some(m) = &self.matrix {
            return Ok(m.clone());
        }
        let pts = self
            .points
            .as_ref()
            .ok_or_else(|| MetricError::BadInstance("neither matrix nor points given".into()))?;
        let n = pts.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let d: f64 = pts[i]
                    .iter()
                    .zip(&pts[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                m[i][j] = d;
            }
        }
        Ok(m)
    }

    /// Build the online metric by replaying arrivals. Arrival ids must be
    /// 0..n in order (generators always emit them that way), so `PointId(i)`
    /// is both the matrix index and the arrival position.
    pub fn build_metric(&self) -> Result<OnlineMetric, MetricError> {
        let m = self.distance_matrix()?;
        if self.arrivals.len() != m.len() {
            return Err(MetricError::BadInstance(format!(
                "{} arrivals but {} points",
                self.arrivals.len(),
                m.len()
            )));
        }
        for (i, ev) in self.arrivals.iter().enumerate() {
            if ev.id != i {
                return Err(MetricError::BadInstance(format!(
                    "arrival {i} has id {}; ids must follow arrival order",
                    ev.id
                )));
            }
            if let Some(mate) = ev.mate {
                if mate >= m.len() {
                    return Err(MetricError::BadInstance(format!(
                        "mate {mate} out of range"
                    )));
                }
            }
        }
        let mut metric = OnlineMetric::new();
        for i in 0..m.len() {
            metric.reveal_point(&m[i][..i])?;
        }
        Ok(metric)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Content digest over the canonical (matrix-form) representation.
    pub fn digest(&self) -> Result<String, MetricError> {
        use sha2::{Digest, Sha256};
        let canon = Instance {
            matrix: Some(self.distance_matrix()?),
            points: None,
            arrivals: self.arrivals.clone(),
            cables: self.cables.clone(),
        };
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canon).expect("serializes"));
        Ok(format!("{:x}", h.finalize()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Euclidean,
    RandomMetric,
    CappedComb,
    Circle,
}

/// How roles are assigned to generated arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalProfile {
    /// First arrival is the sink/root, the rest are terminals.
    Rooted,
    /// First arrival is a sink, the rest are sinks w.p. `sink_prob`, else sources.
    SourcesSinks,
    /// Consecutive points form mated pairs.
    Pairs,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub dim: usize,
    /// Comb tooth spacing.
    pub eps: f64,
    /// Comb distance cap.
    pub cap: f64,
    pub profile: ArrivalProfile,
    pub sink_prob: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n: 16,
            dim: 2,
            eps: 0.1,
            cap: 2.0,
            profile: ArrivalProfile::Rooted,
            sink_prob: 0.25,
        }
    }
}

/// Deterministic instance generation. The capped comb is `n` teeth with
/// d(v_i,v_j) = min(ε·|i−j|, c) plus a hub at distance c/2 from every tooth
/// (capping a metric at a constant preserves the triangle inequality).
/// Euclidean instances are rescaled so the minimum distance is 1.
pub fn generate(
    kind: GeneratorKind,
    params: &GenParams,
    seed: u64,
) -> Result<Instance, MetricError> {
    if params.n == 0 {
        return Err(MetricError::BadParams("n must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n;
    let mut instance = match kind {
        GeneratorKind::Euclidean => {
            if params.dim == 0 {
                return Err(MetricError::BadParams("dim must be ≥ 1".into()));
            }
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..params.dim).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let mut inst = Instance {
                points: Some(pts),
                ..Default::default()
            };
            // Store as a matrix scaled to min distance 1 so downstream
            // log₂-based class machinery is well defined.
            let mut m = inst.distance_matrix()?;
            if n > 1 {
                let dmin = m
                    .iter()
                    .flatten()
                    .copied()
                    .filter(|&d| d > 0.0)
                    .min_by(f64::total_cmp)
                    .ok_or(MetricError::AllZeroDistances)?;
                for row in &mut m {
                    for d in row.iter_mut() {
                        *d /= dmin;
                    }
                }
            }
            inst.points = None;
            inst.matrix = Some(m);
            inst
        }
        GeneratorKind::RandomMetric => {
            // Entries uniform in [1,2]: the triangle inequality is automatic.
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..i {
                    let d = 1.0 + rng.gen::<f64>();
                    m[i][j] = d;
                    m[j][i] = d;
                }
            }
            Instance {
                matrix: Some(m),
                ..Default::default()
            }
        }
        GeneratorKind::CappedComb => {
            if params.eps <= 0.0 || params.cap <= 0.0 {
                return Err(MetricError::BadParams(
                    "comb needs eps > 0 and cap > 0".into(),
                ));
            }
            // Point 0 is the hub, points 1..=n are teeth v_1..v_n.
            let total = n + 1;
            let mut m = vec![vec![0.0; total]; total];
            for i in 1..total {
                m[0][i] = params.cap / 2.0;
                m[i][0] = params.cap / 2.0;
                for j in 1..i {
                    let d = (params.eps * (i - j) as f64).min(params.cap);
                    m[i][j] = d;
                    m[j][i] = d;
                }
            }
            Instance {
                matrix: Some(m),
                ..Default::default()
            }
        }
        GeneratorKind::Circle => {
            if n < 2 {
                return Err(MetricError::BadParams("circle needs n ≥ 2".into()));
            }
            // Evenly spaced on a circle, radius chosen so the min chord is 1.
            let r = 0.5 / (std::f64::consts::PI / n as f64).sin();
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..i {
                    let k = (i - j).min(n - (i - j));
                    let d = 2.0 * r * (std::f64::consts::PI * k as f64 / n as f64).sin();
                    m[i][j] = d;
                    m[j][i] = d;
                }
            }
            Instance {
                matrix: Some(m),
                ..Default::default()
            }
        }
    };

    let total = instance.distance_matrix()?.len();
    instance.arrivals = match (kind, params.profile) {
        (GeneratorKind::CappedComb, _) | (_, ArrivalProfile::Rooted) => (0..total)
            .map(|i| ArrivalEvent {
                id: i,
                role: if i == 0 { Role::Sink } else { Role::Terminal },
                mate: None,
            })
            .collect(),
        (_, ArrivalProfile::SourcesSinks) => (0..total)
            .map(|i| ArrivalEvent {
                id: i,
                role: if i == 0 || rng.gen::<f64>() < params.sink_prob {
                    Role::Sink
                } else {
                    Role::Source
                },
                mate: None,
            })
            .collect(),
        (_, ArrivalProfile::Pairs) => {
            if total % 2 != 0 {
                return Err(MetricError::BadParams("pairs profile needs even n".into()));
            }
            (0..total)
                .map(|i| ArrivalEvent {
                    id: i,
                    role: Role::Pair,
                    mate: Some(if i % 2 == 0 { i + 1 } else { i - 1 }),
                })
                .collect()
        }
    };
    // Generated matrices must themselves be valid online metrics.
    instance.build_metric()?;
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reveal_basics() {
        let mut m = OnlineMetric::new();
        assert_eq!(m.reveal_point(&[]).unwrap(), PointId(0));
        assert_eq!(m.reveal_point(&[5.0]).unwrap(), PointId(1));
        assert_eq!(m.dist(PointId(0), PointId(1)), 5.0);
        assert_eq!(m.dist(PointId(1), PointId(0)), 5.0);
        assert_eq!(m.dist(PointId(1), PointId(1)), 0.0);
    }

    #[test]
    fn reveal_triangle_violation() {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        m.reveal_point(&[5.0]).unwrap();
        // 10 > 5 + 1
        let err = m.reveal_point(&[1.0, 10.0]).unwrap_err();
        assert_eq!(
            err,
            MetricError::TriangleViolation(PointId(1), PointId(0), PointId(2))
        );
    }

    #[test]
    fn reveal_rejects_bad_rows() {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        assert!(matches!(
            m.reveal_point(&[1.0, 2.0]),
            Err(MetricError::WrongLength {
                expected: 1,
                got: 2
            })
        ));
        assert!(matches!(
            m.reveal_point(&[-1.0]),
            Err(MetricError::NegativeDistance(_))
        ));
        assert!(matches!(
            m.reveal_point(&[0.0]),
            Err(MetricError::CoincidentPoint(..))
        ));
    }

    #[test]
    fn normalize_scales_and_is_idempotent() {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        m.reveal_point(&[0.5]).unwrap();
        m.reveal_point(&[2.0, 2.0]).unwrap();
        assert_eq!(m.normalize().unwrap(), 0.5);
        assert_eq!(m.dist(PointId(0), PointId(1)), 1.0);
        assert_eq!(m.dist(PointId(0), PointId(2)), 4.0);
        assert_eq!(m.normalize().unwrap(), 1.0);
        assert_eq!(m.dist(PointId(0), PointId(2)), 4.0);
    }

    #[test]
    fn normalize_single_pair() {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        m.reveal_point(&[0.25]).unwrap();
        assert_eq!(m.normalize().unwrap(), 0.25);
        assert_eq!(m.dist(PointId(0), PointId(1)), 1.0);
    }

    #[test]
    fn normalize_empty_errors() {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        assert_eq!(m.normalize(), Err(MetricError::AllZeroDistances));
    }

    #[test]
    fn capped_comb_distances() {
        let inst = generate(
            GeneratorKind::CappedComb,
            &GenParams {
                n: 3,
                eps: 0.1,
                cap: 2.0,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let m = inst.build_metric().unwrap();
        // hub is point 0, teeth are 1..=3
        assert!((m.dist(PointId(1), PointId(3)) - 0.2).abs() < 1e-12);
        assert!((m.dist(PointId(1), PointId(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generators_are_deterministic_and_valid() {
        for kind in [
            GeneratorKind::Euclidean,
            GeneratorKind::RandomMetric,
            GeneratorKind::Circle,
        ] {
            let p = GenParams {
                n: 8,
                ..Default::default()
            };
            let a = generate(kind, &p, 42).unwrap();
            let b = generate(kind, &p, 42).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "{kind:?} not deterministic");
            a.build_metric().unwrap();
        }
    }

    #[test]
    fn euclidean_min_distance_is_one() {
        let inst = generate(
            GeneratorKind::Euclidean,
            &GenParams {
                n: 12,
                ..Default::default()
            },
            7,
        )
        .unwrap();
        let m = inst.build_metric().unwrap();
        assert!((m.min_positive_distance().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gen_rejects_bad_params() {
        assert!(matches!(
            generate(
                GeneratorKind::Euclidean,
                &GenParams {
                    n: 0,
                    ..Default::default()
                },
                0
            ),
            Err(MetricError::BadParams(_))
        ));
    }

    #[test]
    fn instance_json_roundtrip_is_bit_exact() {
        let inst = generate(
            GeneratorKind::RandomMetric,
            &GenParams {
                n: 6,
                profile: ArrivalProfile::Pairs,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        let m1 = inst.build_metric().unwrap();
        let m2 = back.build_metric().unwrap();
        for i in 0..m1.len() {
            for j in 0..m1.len() {
                assert_eq!(
                    m1.dist(PointId(i), PointId(j)).to_bits(),
                    m2.dist(PointId(i), PointId(j)).to_bits()
                );
            }
        }
        assert_eq!(inst.digest().unwrap(), back.digest().unwrap());
    }

    #[test]
    fn points_form_deserializes() {
        let inst = Instance::from_json(
            r#"{"points": [[0,0],[3,4]],
                "arrivals": [{"id":0,"role":"sink"},{"id":1,"role":"terminal"}]}"#,
        )
        .unwrap();
        let m = inst.build_metric().unwrap();
        assert_eq!(m.dist(PointId(0), PointId(1)), 5.0);
    }
}
