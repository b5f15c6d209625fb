//! Online multicommodity spanner: terminal pairs arrive, each is classified by
//! ⌊log₂ d⌋, and per scale the terminals organize into 2^j/16-separated
//! centers with clusters. Pairs whose subgraph distance exceeds 4·log₂k times
//! the metric distance get an augmentation edge plus bridges to their centers.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{self, EdgeSet};
use crate::metric::{OnlineMetric, PointId};
use crate::strictly_greater;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KMode {
    /// Fixed pair count known up front; one global stretch threshold.
    Known(usize),
    /// Threshold per scale from the current center count |Z_j|.
    Unknown,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpannerError {
    #[error("pair ({0},{1}) has zero distance")]
    ZeroDistancePair(PointId, PointId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairInsert {
    pub class: i32,
    pub new_augmentation: Vec<(PointId, PointId)>,
    pub new_bridges: Vec<(PointId, PointId)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpannerStep {
    pub step: usize,
    pub pair: (PointId, PointId),
    pub class: i32,
    pub augmentations: Vec<(PointId, PointId)>,
    pub bridges: Vec<(PointId, PointId)>,
    pub k_per_scale: Vec<(i32, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleStats {
    pub scale: i32,
    pub centers: usize,
    pub augmentation_edges: usize,
    pub bridge_edges: usize,
    /// None = the meta-graph is a forest.
    pub girth: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpannerStats {
    pub cost_h: f64,
    pub edge_count: usize,
    pub max_pair_stretch: f64,
    pub per_scale: Vec<ScaleStats>,
}

#[derive(Debug, Default)]
struct Scale {
    centers: Vec<PointId>,
    /// member → its center; centers map to themselves.
    cluster: HashMap<usize, PointId>,
    a: Vec<(PointId, PointId, f64)>,
    b: Vec<(PointId, PointId, f64)>,
    /// Shadow meta-graph: one edge (center(u), center(v)) per augmentation.
    meta: Vec<(PointId, PointId)>,
}

#[derive(Debug)]
pub struct SpannerState {
    mode: KMode,
    h: EdgeSet,
    scales: BTreeMap<i32, Scale>,
    class: HashMap<usize, i32>,
    members: Vec<PointId>,
    arrival: HashMap<usize, usize>,
    pairs: Vec<(PointId, PointId)>,
    /// Pairs already within threshold at a scale stay that way: edges only
    /// accumulate and thresholds only grow.
    satisfied: HashSet<(i32, usize, usize)>,
    trace: Vec<SpannerStep>,
}

impl SpannerState {
    pub fn new(mode: KMode) -> Self {
        Self {
            mode,
            h: EdgeSet::new(),
            scales: BTreeMap::new(),
            class: HashMap::new(),
            members: Vec::new(),
            arrival: HashMap::new(),
            pairs: Vec::new(),
            satisfied: HashSet::new(),
            trace: Vec::new(),
        }
    }

    pub fn h(&self) -> &EdgeSet {
        &self.h
    }

    pub fn members(&self) -> &[PointId] {
        &self.members
    }

    pub fn pairs(&self) -> &[(PointId, PointId)] {
        &self.pairs
    }

    pub fn contains(&self, v: PointId) -> bool {
        self.arrival.contains_key(&v.0)
    }

    pub fn class_of(&self, v: PointId) -> Option<i32> {
        self.class.get(&v.0).copied()
    }

    pub fn trace(&self) -> &[SpannerStep] {
        &self.trace
    }

    pub fn threshold(&self, j: i32) -> f64 {
        let k = match self.mode {
            KMode::Known(k) => k as f64,
            KMode::Unknown => self.scales.get(&j).map_or(1.0, |s| s.centers.len() as f64),
        };
        4.0 * k.log2().max(1.0)
    }

    fn note_member(&mut self, v: PointId, cls: i32) {
        if !self.arrival.contains_key(&v.0) {
            self.arrival.insert(v.0, self.members.len());
            self.members.push(v);
        }
        let e = self.class.entry(v.0).or_insert(cls);
        *e = (*e).max(cls);
    }

    /// Bring every scale up to date: members of class ≥ j either become
    /// centers (≥ 2^j/16 from all existing ones) or join the nearest cluster.
    /// New scales replay the members in arrival order.
    fn sync_scales(&mut self, metric: &OnlineMetric) {
        let max_c = self.class.values().copied().max().unwrap_or(0);
        let min_c = self.class.values().copied().min().unwrap_or(0).min(0);
        for j in min_c..=max_c {
            let sep = (j as f64).exp2() / 16.0;
            let scale = self.scales.entry(j).or_default();
            for &m in &self.members {
                if self.class.get(&m.0).map_or(true, |&c| c < j) || scale.cluster.contains_key(&m.0)
                {
                    continue;
                }
                match metric.nearest_in(m, &scale.centers) {
                    Some((c, d)) if d < sep => {
                        scale.cluster.insert(m.0, c);
                    }
                    _ => {
                        scale.centers.push(m);
                        scale.cluster.insert(m.0, m);
                    }
                }
            }
        }
    }

    /// Eligible pairs at their own scale: min class ≥ ⌊log₂ d⌋, ordered by
    /// (arrival index of later endpoint, arrival index of earlier endpoint).
    fn eligible_by_scale(
        &self,
        metric: &OnlineMetric,
    ) -> BTreeMap<i32, Vec<(PointId, PointId, f64)>> {
        let mut by_scale: BTreeMap<i32, Vec<(usize, usize, PointId, PointId, f64)>> =
            BTreeMap::new();
        for (i, &u) in self.members.iter().enumerate() {
            for &v in &self.members[i + 1..] {
                let d = metric.dist(u, v);
                if d <= 0.0 {
                    continue;
                }
                let j = d.log2().floor() as i32;
                if self.class[&u.0] < j || self.class[&v.0] < j {
                    continue;
                }
                let (ia, ib) = (self.arrival[&u.0], self.arrival[&v.0]);
                by_scale
                    .entry(j)
                    .or_default()
                    .push((ia.max(ib), ia.min(ib), u, v, d));
            }
        }
        by_scale
            .into_iter()
            .map(|(j, mut v)| {
                v.sort_by_key(|&(a, b, ..)| (a, b));
                (j, v.into_iter().map(|(_, _, u, v, d)| (u, v, d)).collect())
            })
            .collect()
    }

    pub fn insert_pair(
        &mut self,
        s: PointId,
        t: PointId,
        metric: &OnlineMetric,
    ) -> Result<PairInsert, SpannerError> {
        let d = metric.dist(s, t);
        if d <= 0.0 {
            return Err(SpannerError::ZeroDistancePair(s, t));
        }
        let cls = d.log2().floor() as i32;
        self.note_member(s, cls);
        self.note_member(t, cls);
        self.pairs.push((s, t));
        self.sync_scales(metric);

        let mut new_aug = Vec::new();
        let mut new_bridges = Vec::new();
        let by_scale = self.eligible_by_scale(metric);
        // distance cache per source, flushed whenever an edge lands
        let mut dcache: HashMap<usize, Vec<f64>> = HashMap::new();
        let n = metric.len();
        for j in cls.min(0)..=cls {
            let Some(cands) = by_scale.get(&j) else {
                continue;
            };
            let thr = self.threshold(j);
            for &(u, v, duv) in cands {
                let key = (j, u.0.min(v.0), u.0.max(v.0));
                if self.satisfied.contains(&key) {
                    continue;
                }
                let du = dcache
                    .entry(u.0)
                    .or_insert_with(|| graph::dijkstra(n, &[&self.h], &[u]).0);
                if strictly_greater(du[v.0], thr * duv) {
                    self.h.insert(u, v, duv);
                    let scale = self.scales.get_mut(&j).unwrap();
                    scale.a.push((u, v, duv));
                    new_aug.push((u, v));
                    let (cu, cv) = (scale.cluster[&u.0], scale.cluster[&v.0]);
                    assert_ne!(cu, cv, "augmentation inside one cluster at scale {j}");
                    scale.meta.push((cu, cv));
                    for (x, cx) in [(u, cu), (v, cv)] {
                        if x != cx {
                            let dx = metric.dist(x, cx);
                            scale.b.push((x, cx, dx));
                            self.h.insert(x, cx, dx);
                            new_bridges.push((x, cx));
                        }
                    }
                    dcache.clear();
                }
                self.satisfied.insert(key);
            }
        }

        self.trace.push(SpannerStep {
            step: self.pairs.len(),
            pair: (s, t),
            class: cls,
            augmentations: new_aug.clone(),
            bridges: new_bridges.clone(),
            k_per_scale: self
                .scales
                .iter()
                .map(|(&j, sc)| (j, sc.centers.len()))
                .collect(),
        });
        Ok(PairInsert {
            class: cls,
            new_augmentation: new_aug,
            new_bridges: new_bridges,
        })
    }

    /// Single-sink driving mode: the first member seeds the structure (no
    /// pair); each later member arrives paired with its nearest predecessor.
    pub fn insert_member(
        &mut self,
        v: PointId,
        metric: &OnlineMetric,
    ) -> Result<Option<PairInsert>, SpannerError> {
        if self.contains(v) {
            return Ok(None);
        }
        if self.members.is_empty() {
            self.arrival.insert(v.0, 0);
            self.members.push(v);
            return Ok(None);
        }
        let (u, _) = metric.nearest_in(v, &self.members).unwrap();
        self.insert_pair(v, u, metric).map(Some)
    }

    /// The highest scale at which `v` would become a center were it inserted
    /// now (paired with its nearest member). None while empty or when every
    /// applicable scale already has a center within range.
    pub fn whatif_center_class(&self, v: PointId, metric: &OnlineMetric) -> Option<i32> {
        if let Some(&idx) = self.arrival.get(&v.0) {
            let _ = idx;
            return self.center_class(v);
        }
        let (_, d) = metric.nearest_in(v, &self.members)?;
        if d <= 0.0 {
            return None;
        }
        let cls = d.log2().floor() as i32;
        let mut best = None;
        for j in cls.min(0)..=cls {
            let sep = (j as f64).exp2() / 16.0;
            let is_center = match self.scales.get(&j) {
                Some(sc) => metric
                    .nearest_in(v, &sc.centers)
                    .map_or(true, |(_, dc)| dc >= sep),
                None => true,
            };
            if is_center {
                best = Some(j);
            }
        }
        best
    }

    /// Highest scale at which `v` actually is a center.
    pub fn center_class(&self, v: PointId) -> Option<i32> {
        self.scales
            .iter()
            .filter(|(_, sc)| sc.centers.contains(&v))
            .map(|(&j, _)| j)
            .max()
    }

    pub fn stats(&self, metric: &OnlineMetric) -> SpannerStats {
        let n = metric.len();
        let mut dcache: HashMap<usize, Vec<f64>> = HashMap::new();
        let max_pair_stretch = self
            .pairs
            .iter()
            .map(|&(s, t)| {
                let ds = dcache
                    .entry(s.0)
                    .or_insert_with(|| graph::dijkstra(n, &[&self.h], &[s]).0);
                ds[t.0] / metric.dist(s, t)
            })
            .fold(0.0, f64::max);
        let per_scale = self
            .scales
            .iter()
            .filter(|(_, sc)| !sc.cluster.is_empty())
            .map(|(&j, sc)| ScaleStats {
                scale: j,
                centers: sc.centers.len(),
                augmentation_edges: sc.a.len(),
                bridge_edges: sc.b.len(),
                girth: meta_girth(sc),
            })
            .collect();
        SpannerStats {
            cost_h: self.h.total_length(),
            edge_count: self.h.len(),
            max_pair_stretch,
            per_scale,
        }
    }

    /// Ball-packing bound: disjoint radius-2^j/32 balls around the centers of
    /// any one scale must each contain Steiner-forest cost.
    pub fn steiner_forest_lower_bound(&self) -> f64 {
        self.scales
            .iter()
            .map(|(&j, sc)| (j as f64).exp2() / 32.0 * sc.centers.len() as f64)
            .fold(0.0, f64::max)
    }

    pub fn check_invariants(&self, metric: &OnlineMetric) -> Result<(), String> {
        let n = metric.len();
        let mut dcache: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut dist_from = |h: &EdgeSet, s: PointId| -> Vec<f64> {
            dcache
                .entry(s.0)
                .or_insert_with(|| graph::dijkstra(n, &[h], &[s]).0)
                .clone()
        };
        // pair stretch against the mode's threshold
        for &(s, t) in &self.pairs {
            let d = metric.dist(s, t);
            let j = d.log2().floor() as i32;
            let thr = self.threshold(j);
            let dh = dist_from(&self.h, s)[t.0];
            if strictly_greater(dh, thr * d) {
                return Err(format!("stretch: d_H({s},{t}) = {dh} > {thr}·{d}"));
            }
        }
        for (&j, sc) in &self.scales {
            let sep = (j as f64).exp2() / 16.0;
            for (i, &z) in sc.centers.iter().enumerate() {
                for &z2 in &sc.centers[i + 1..] {
                    if strictly_greater(sep, metric.dist(z, z2)) {
                        return Err(format!("scale {j}: centers {z},{z2} closer than {sep}"));
                    }
                }
            }
            for (&m, &c) in &sc.cluster {
                let (m, d) = (PointId(m), metric.dist(PointId(m), c));
                if m != c && d >= sep * (1.0 + 1e-12) {
                    return Err(format!("scale {j}: member {m} outside its cluster radius"));
                }
                if self.class[&m.0] < j {
                    return Err(format!(
                        "scale {j}: member {m} has class {}",
                        self.class[&m.0]
                    ));
                }
            }
            for &(u, v, len) in &sc.a {
                if self.class[&u.0] < j || self.class[&v.0] < j {
                    return Err(format!("scale {j}: A-edge ({u},{v}) endpoint class < {j}"));
                }
                let lo = (j as f64).exp2();
                if len < lo * (1.0 - 1e-12) || len >= 2.0 * lo * (1.0 + 1e-12) {
                    return Err(format!(
                        "scale {j}: A-edge length {len} outside [{lo},{})",
                        2.0 * lo
                    ));
                }
            }
            for &(x, c, _) in &sc.b {
                if sc.cluster.get(&x.0) != Some(&c) {
                    return Err(format!("scale {j}: bridge ({x},{c}) not to own center"));
                }
            }
            if sc.b.len() > 2 * sc.a.len() {
                return Err(format!(
                    "scale {j}: {} bridges for {} augmentations",
                    sc.b.len(),
                    sc.a.len()
                ));
            }
            for &(cu, cv) in &sc.meta {
                if cu == cv {
                    return Err(format!("scale {j}: meta self-loop at {cu}"));
                }
            }
            if let KMode::Known(k) = self.mode {
                if let Some(g) = meta_girth(sc) {
                    let need = (k as f64).log2();
                    if (g as f64) < need - 1e-12 {
                        return Err(format!("scale {j}: meta girth {g} < log₂{k}"));
                    }
                }
            }
            // cluster-path bound: ℓ meta-hops between centers certify a
            // subgraph path of length < (3ℓ+1)·2^j
            let (hops, idx) = meta_hops(sc);
            for (a, &z) in sc.centers.iter().enumerate().take(4) {
                let dz = dist_from(&self.h, z);
                for (b, &z2) in sc.centers.iter().enumerate() {
                    let l = hops[idx[&z.0]][idx[&z2.0]];
                    let _ = (a, b);
                    if l == usize::MAX || l == 0 {
                        continue;
                    }
                    let bound = (3.0 * l as f64 + 1.0) * (j as f64).exp2();
                    if strictly_greater(dz[z2.0], bound) {
                        return Err(format!(
                            "scale {j}: d_H({z},{z2}) = {} exceeds (3·{l}+1)·2^{j}",
                            dz[z2.0]
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn meta_girth(sc: &Scale) -> Option<usize> {
    let mut idx = HashMap::new();
    for &z in &sc.centers {
        let next = idx.len();
        idx.insert(z.0, next);
    }
    let edges: Vec<(usize, usize)> = sc
        .meta
        .iter()
        .map(|&(u, v)| (idx[&u.0], idx[&v.0]))
        .collect();
    graph::girth(idx.len(), &edges)
}

/// Unweighted all-pairs hop distances in the meta-graph.
fn meta_hops(sc: &Scale) -> (Vec<Vec<usize>>, HashMap<usize, usize>) {
    let mut idx = HashMap::new();
    for &z in &sc.centers {
        let next = idx.len();
        idx.insert(z.0, next);
    }
    let n = idx.len();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in &sc.meta {
        let (a, b) = (idx[&u.0], idx[&v.0]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut hops = vec![vec![usize::MAX; n]; n];
    for s in 0..n {
        hops[s][s] = 0;
        let mut q = std::collections::VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if hops[s][v] == usize::MAX {
                    hops[s][v] = hops[s][u] + 1;
                    q.push_back(v);
                }
            }
        }
    }
    (hops, idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{generate, GenParams, GeneratorKind};

    fn metric_from(points: &[[f64; 2]]) -> OnlineMetric {
        let mut m = OnlineMetric::new();
        for (i, p) in points.iter().enumerate() {
            let row: Vec<f64> = points[..i]
                .iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .collect();
            m.reveal_point(&row).unwrap();
        }
        m
    }

    #[test]
    fn first_pair() {
        let m = metric_from(&[[0.0, 0.0], [1.0, 0.0]]);
        let mut s = SpannerState::new(KMode::Known(2));
        let ins = s.insert_pair(PointId(0), PointId(1), &m).unwrap();
        assert_eq!(ins.class, 0);
        assert_eq!(ins.new_augmentation, vec![(PointId(0), PointId(1))]);
        assert!(ins.new_bridges.is_empty());
        let st = s.stats(&m);
        assert_eq!(st.edge_count, 1);
        assert_eq!(st.max_pair_stretch, 1.0);
        assert_eq!(st.per_scale[0].girth, None);
        assert_eq!(s.steiner_forest_lower_bound(), 2.0 / 32.0);
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn zero_distance_pair_rejected() {
        let m = metric_from(&[[0.0, 0.0], [1.0, 0.0]]);
        let mut s = SpannerState::new(KMode::Known(1));
        assert_eq!(
            s.insert_pair(PointId(0), PointId(0), &m),
            Err(SpannerError::ZeroDistancePair(PointId(0), PointId(0)))
        );
    }

    #[test]
    fn far_pairs_stay_independent() {
        let m = metric_from(&[[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0]]);
        let mut s = SpannerState::new(KMode::Known(2));
        s.insert_pair(PointId(0), PointId(1), &m).unwrap();
        let ins = s.insert_pair(PointId(2), PointId(3), &m).unwrap();
        assert_eq!(ins.new_augmentation, vec![(PointId(2), PointId(3))]);
        assert_eq!(s.h().len(), 2);
        // four isolated centers at scale 0
        assert_eq!(s.steiner_forest_lower_bound(), 4.0 / 32.0);
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn satisfied_cross_pair_adds_nothing() {
        // unit square: the scan runs over every eligible member pair, so the
        // second arrival already stitches the two components together and the
        // later demand pairs find themselves within threshold
        let m = metric_from(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let mut s = SpannerState::new(KMode::Known(4));
        s.insert_pair(PointId(0), PointId(1), &m).unwrap();
        let ins = s.insert_pair(PointId(2), PointId(3), &m).unwrap();
        assert_eq!(
            ins.new_augmentation,
            vec![(PointId(0), PointId(2)), (PointId(0), PointId(3))]
        );
        let ins = s.insert_pair(PointId(0), PointId(2), &m).unwrap();
        assert!(ins.new_augmentation.is_empty());
        // (1,3) is eligible at scale 0 but d_H = 2 ≤ 8·1
        let ins = s.insert_pair(PointId(1), PointId(3), &m).unwrap();
        assert!(ins.new_augmentation.is_empty());
        assert_eq!(s.h().len(), 3);
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn whatif_matches_insertion() {
        let m = metric_from(&[[0.0, 0.0], [8.0, 0.0], [8.2, 0.1], [4.0, 3.0]]);
        let mut s = SpannerState::new(KMode::Unknown);
        s.insert_member(PointId(0), &m).unwrap();
        s.insert_member(PointId(1), &m).unwrap();
        for v in [2, 3] {
            let predicted = s.whatif_center_class(PointId(v), &m);
            s.insert_member(PointId(v), &m).unwrap();
            assert_eq!(s.center_class(PointId(v)), predicted, "v{v}");
        }
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn random_pair_streams_hold_invariants() {
        for seed in 0..3 {
            let inst = generate(
                GeneratorKind::Euclidean,
                &GenParams {
                    n: 30,
                    profile: crate::metric::ArrivalProfile::Pairs,
                    ..Default::default()
                },
                seed,
            )
            .unwrap();
            let m = inst.build_metric().unwrap();
            for mode in [KMode::Known(15), KMode::Unknown] {
                let mut s = SpannerState::new(mode);
                for p in 0..15 {
                    s.insert_pair(PointId(2 * p), PointId(2 * p + 1), &m)
                        .unwrap();
                    s.check_invariants(&m).unwrap();
                }
                let st = s.stats(&m);
                assert!(st.max_pair_stretch <= 4.0 * 15f64.log2() + 1e-9);
                assert!(st.cost_h >= s.steiner_forest_lower_bound());
            }
        }
    }
}
