//! Multi-sink LAST: sources and sinks arrive online; a backbone forest F
//! (each source hooks to the nearest strictly-higher-class terminal) plus
//! augmentation edges A keep every source within 3× of the current sink set.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{self, EdgeSet};
use crate::metric::{OnlineMetric, PointId};
use crate::nets::{Class, NetHierarchy};
use crate::strictly_greater;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MlastRole {
    Sink,
    Source,
}

#[derive(Debug, Error, PartialEq)]
pub enum MlastError {
    #[error("first terminal must be a sink")]
    FirstNotSink,
}

#[derive(Debug, Clone, Serialize)]
pub struct MlastStep {
    pub step: usize,
    pub terminal: PointId,
    pub role: MlastRole,
    pub class: Class,
    pub f_edge: Option<(PointId, PointId)>,
    pub a_edges_added: Vec<(PointId, PointId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlastInsert {
    pub class: Class,
    pub f_edge: Option<(PointId, PointId)>,
    pub new_a_edges: Vec<(PointId, PointId)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChargingReport {
    pub cost_h: f64,
    pub charge_sum: f64,
    pub measured_constant: f64,
    pub max_sink_stretch: f64,
    pub class_separation_ok: bool,
    pub class_bounds_ok: bool,
}

#[derive(Debug)]
pub struct MlastState {
    nets: NetHierarchy,
    f: EdgeSet,
    a: EdgeSet,
    /// F-edge target of each source (its parent in the forest).
    parent: HashMap<usize, PointId>,
    /// A-edges in addition order: (source, sink, length at addition).
    a_list: Vec<(PointId, PointId, f64)>,
    sources: Vec<PointId>,
    sinks: Vec<PointId>,
    /// Distance to the set of earlier terminals, frozen at arrival.
    d_arrival: HashMap<usize, f64>,
    /// Running spread estimate (maintained, not otherwise consumed).
    delta: f64,
    trace: Vec<MlastStep>,
}

impl MlastState {
    pub fn new() -> Self {
        Self {
            nets: NetHierarchy::new(1.0, false),
            f: EdgeSet::new(),
            a: EdgeSet::new(),
            parent: HashMap::new(),
            a_list: Vec::new(),
            sources: Vec::new(),
            sinks: Vec::new(),
            d_arrival: HashMap::new(),
            delta: 0.0,
            trace: Vec::new(),
        }
    }

    pub fn sources(&self) -> &[PointId] {
        &self.sources
    }

    pub fn sinks(&self) -> &[PointId] {
        &self.sinks
    }

    pub fn contains(&self, v: PointId) -> bool {
        self.nets.contains(v)
    }

    pub fn class_of(&self, v: PointId) -> Option<Class> {
        self.nets.class_of(v)
    }

    pub fn f_edges(&self) -> &EdgeSet {
        &self.f
    }

    pub fn a_edges(&self) -> &EdgeSet {
        &self.a
    }

    pub fn h(&self) -> EdgeSet {
        EdgeSet::union(&[&self.f, &self.a])
    }

    pub fn trace(&self) -> &[MlastStep] {
        &self.trace
    }

    fn terminals(&self) -> Vec<PointId> {
        self.nets.points().to_vec()
    }

    fn d_to_sinks(&self, metric: &OnlineMetric, v: PointId) -> f64 {
        metric
            .nearest_in(v, &self.sinks)
            .map_or(f64::INFINITY, |(_, d)| d)
    }

    pub fn insert(
        &mut self,
        v: PointId,
        role: MlastRole,
        metric: &OnlineMetric,
    ) -> Result<MlastInsert, MlastError> {
        if self.nets.is_empty() && role != MlastRole::Sink {
            return Err(MlastError::FirstNotSink);
        }
        let d_prev = metric
            .nearest_in(v, self.nets.points())
            .map_or(f64::INFINITY, |(_, d)| d);
        if d_prev.is_finite() {
            self.d_arrival.insert(v.0, d_prev);
            self.delta = self.delta.max(d_prev);
        }
        let class = self.nets.insert(v, metric);

        let mut f_edge = None;
        match role {
            MlastRole::Sink => self.sinks.push(v),
            MlastRole::Source => {
                // nearest terminal of strictly higher class; ties by higher
                // class, then smaller id
                let mut best: Option<(f64, Class, PointId)> = None;
                for &u in self.nets.points() {
                    if u == v {
                        continue;
                    }
                    let cu = self.nets.class_of(u).unwrap();
                    if cu <= class {
                        continue;
                    }
                    let d = metric.dist(v, u);
                    let better = match best {
                        None => true,
                        Some((bd, bc, bu)) => {
                            d < bd || (d == bd && (cu > bc || (cu == bc && u < bu)))
                        }
                    };
                    if better {
                        best = Some((d, cu, u));
                    }
                }
                let (d, _, u) = best.expect("a higher-class terminal always exists");
                self.f.insert(v, u, d);
                self.parent.insert(v.0, u);
                f_edge = Some((v, u));
                self.sources.push(v);
            }
        }

        // augmentation sweep over all sources in arrival order; additions are
        // visible to later checks within the same sweep
        let mut new_a_edges = Vec::new();
        let n = metric.len();
        let mut dist = graph::dijkstra(n, &[&self.f, &self.a], &self.sinks).0;
        for idx in 0..self.sources.len() {
            let x = self.sources[idx];
            let dm = self.d_to_sinks(metric, x);
            if strictly_greater(dist[x.0], 3.0 * dm) {
                let (s, d) = metric.nearest_in(x, &self.sinks).expect("sink exists");
                self.a.insert(x, s, d);
                self.a_list.push((x, s, d));
                new_a_edges.push((x, s));
                dist = graph::dijkstra(n, &[&self.f, &self.a], &self.sinks).0;
            }
        }

        self.trace.push(MlastStep {
            step: self.trace.len() + 1,
            terminal: v,
            role,
            class,
            f_edge,
            a_edges_added: new_a_edges.clone(),
        });
        Ok(MlastInsert {
            class,
            f_edge,
            new_a_edges,
        })
    }

    pub fn charging_report(&self, metric: &OnlineMetric) -> ChargingReport {
        let cost_h = self.h().total_length();
        let charge_sum: f64 = self
            .sources
            .iter()
            .map(|&v| self.nets.class_of(v).unwrap().pow2())
            .sum();
        let dist = graph::dijkstra(metric.len(), &[&self.f, &self.a], &self.sinks).0;
        let max_sink_stretch = self
            .sources
            .iter()
            .map(|&u| dist[u.0] / self.d_to_sinks(metric, u))
            .fold(0.0, f64::max);
        ChargingReport {
            cost_h,
            charge_sum,
            measured_constant: if charge_sum > 0.0 {
                cost_h / charge_sum
            } else {
                0.0
            },
            max_sink_stretch,
            class_separation_ok: self.check_class_separation(metric).is_ok(),
            class_bounds_ok: self.check_class_bounds(metric).is_ok(),
        }
    }

    fn check_class_separation(&self, metric: &OnlineMetric) -> Result<(), String> {
        let terms = self.terminals();
        for (i, &u) in terms.iter().enumerate() {
            for &w in &terms[i + 1..] {
                let (cu, cw) = (self.class_of(u).unwrap(), self.class_of(w).unwrap());
                if cu == cw {
                    if let Class::Finite(j) = cu {
                        if metric.dist(u, w) < (j as f64).exp2() {
                            return Err(format!(
                                "same-class terminals too close: d({u},{w}) = {} < 2^{j}",
                                metric.dist(u, w)
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_class_bounds(&self, metric: &OnlineMetric) -> Result<(), String> {
        let s_star = *self.terminals().first().ok_or("empty")?;
        for &u in &self.sources {
            let c = self.class_of(u).unwrap().pow2();
            let d_prev = self.d_arrival[&u.0];
            if c < d_prev / 2.0 * (1.0 - 1e-12) {
                return Err(format!("2^class({u}) = {c} < {}/2", d_prev));
            }
            if c > metric.dist(u, s_star) * (1.0 + 1e-12) {
                return Err(format!(
                    "2^class({u}) = {c} > d(u,s*) = {}",
                    metric.dist(u, s_star)
                ));
            }
        }
        Ok(())
    }

    /// Sum of F-edge lengths along the parent chain from `u` up to ancestor `z`.
    fn chain_dist(&self, metric: &OnlineMetric, u: PointId, z: PointId) -> Option<f64> {
        let mut cur = u;
        let mut total = 0.0;
        while cur != z {
            let p = *self.parent.get(&cur.0)?;
            total += metric.dist(cur, p);
            cur = p;
        }
        Some(total)
    }

    /// Ancestor chain of u: u, parent(u), ... up to a parentless terminal.
    fn chain(&self, u: PointId) -> Vec<PointId> {
        let mut out = vec![u];
        let mut cur = u;
        while let Some(&p) = self.parent.get(&cur.0) {
            out.push(p);
            cur = p;
        }
        out
    }

    /// The charging target of an A-edge at scale j: the source itself when its
    /// class is ≥ j−2; otherwise the parent of the highest ancestor of class
    /// ≤ j−3.
    fn phi(&self, u: PointId, j: i32) -> Option<PointId> {
        let cls = |x: PointId| self.class_of(x).unwrap();
        if cls(u) >= Class::Finite(j - 2) {
            return Some(u);
        }
        let chain = self.chain(u);
        let t_pos = chain
            .iter()
            .rposition(|&x| cls(x) <= Class::Finite(j - 3))?;
        chain.get(t_pos + 1).copied()
    }

    /// Every structural fact the cost argument rests on, checked exactly.
    pub fn check_invariants(&self, metric: &OnlineMetric) -> Result<(), String> {
        // 3-stretch against the current sink set
        let dist = graph::dijkstra(metric.len(), &[&self.f, &self.a], &self.sinks).0;
        for &u in &self.sources {
            let dm = self.d_to_sinks(metric, u);
            if strictly_greater(dist[u.0], 3.0 * dm) {
                return Err(format!("stretch: d_H({u},S) = {} > 3·{dm}", dist[u.0]));
            }
        }
        self.check_class_separation(metric)?;
        self.check_class_bounds(metric)?;

        // forest structure: every source has an F-edge to a strictly
        // higher-class terminal within 2^(class+1); chains end in sinks
        for &v in &self.sources {
            let u = *self
                .parent
                .get(&v.0)
                .ok_or_else(|| format!("{v} has no parent"))?;
            let (cv, cu) = (self.class_of(v).unwrap(), self.class_of(u).unwrap());
            if cu <= cv {
                return Err(format!("F-edge of {v} does not increase class"));
            }
            let bound = match cv {
                Class::Finite(j) => ((j + 1) as f64).exp2(),
                Class::Infinite => f64::INFINITY,
            };
            if metric.dist(v, u) > bound * (1.0 + 1e-12) {
                return Err(format!(
                    "F-edge of {v} too long: {} > 2^(class+1) = {bound}",
                    metric.dist(v, u)
                ));
            }
            let top = *self.chain(v).last().unwrap();
            if !self.sinks.contains(&top) {
                return Err(format!("leader of {v}'s tree is not a sink"));
            }
        }

        // descendant paths: if u = parent(v), every descendant t of v has
        // d_T(t,u) ≤ 2^(class(v)+2)
        for &t in &self.sources {
            let chain = self.chain(t);
            for w in chain.windows(2) {
                let (v, u) = (w[0], w[1]);
                if let Some(Class::Finite(jv)) = self.class_of(v) {
                    let d = self.chain_dist(metric, t, u).unwrap();
                    if d > ((jv + 2) as f64).exp2() * (1.0 + 1e-12) {
                        return Err(format!(
                            "chain length d_T({t},{u}) = {d} > 2^(class({v})+2)"
                        ));
                    }
                }
            }
        }

        // A-edges: endpoints are source/sink; per scale j the charging map is
        // well defined (source target, class ≥ j−2, chain distance ≤ 2^(j−1))
        // and injective
        let mut charged: HashMap<(i32, usize), (PointId, PointId)> = HashMap::new();
        for &(u, s, len) in &self.a_list {
            if !self.sources.contains(&u) || !self.sinks.contains(&s) {
                return Err(format!("A-edge ({u},{s}) endpoints have wrong roles"));
            }
            let j = len.log2().floor() as i32;
            let z = self
                .phi(u, j)
                .ok_or_else(|| format!("no charging ancestor for ({u},{s}) at scale {j}"))?;
            if !self.sources.contains(&z) {
                return Err(format!("charging target {z} of ({u},{s}) is not a source"));
            }
            if self.class_of(z).unwrap() < Class::Finite(j - 2) {
                return Err(format!("charging target {z} has class < {}", j - 2));
            }
            let dz = self.chain_dist(metric, u, z).unwrap();
            if u != z && dz > ((j - 1) as f64).exp2() * (1.0 + 1e-12) {
                return Err(format!("d_T({u},{z}) = {dz} > 2^({j}−1)"));
            }
            if let Some(prev) = charged.insert((j, z.0), (u, s)) {
                return Err(format!(
                    "two scale-{j} A-edges charge {z}: ({},{}) and ({u},{s})",
                    prev.0, prev.1
                ));
            }
        }
        Ok(())
    }
}

impl Default for MlastState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric_from(rows: &[&[f64]]) -> OnlineMetric {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        for r in rows {
            m.reveal_point(r).unwrap();
        }
        m
    }

    #[test]
    fn first_must_be_sink() {
        let m = metric_from(&[]);
        let mut s = MlastState::new();
        assert_eq!(
            s.insert(PointId(0), MlastRole::Source, &m),
            Err(MlastError::FirstNotSink)
        );
        s.insert(PointId(0), MlastRole::Sink, &m).unwrap();
    }

    #[test]
    fn single_source_example() {
        let m = metric_from(&[&[5.0]]);
        let mut s = MlastState::new();
        s.insert(PointId(0), MlastRole::Sink, &m).unwrap();
        let ins = s.insert(PointId(1), MlastRole::Source, &m).unwrap();
        assert_eq!(ins.class, Class::Finite(2));
        assert_eq!(ins.f_edge, Some((PointId(1), PointId(0))));
        assert!(ins.new_a_edges.is_empty());
        let rep = s.charging_report(&m);
        assert_eq!(rep.charge_sum, 4.0);
        assert_eq!(rep.cost_h, 5.0);
        assert_eq!(rep.measured_constant, 1.25);
        assert_eq!(rep.max_sink_stretch, 1.0);
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn late_sink_triggers_augmentation() {
        // sink s*, source u at 8; then sink s2 with d(u,s2)=1, d(s*,s2)=8
        let m = metric_from(&[&[8.0], &[8.0, 1.0]]);
        let mut s = MlastState::new();
        s.insert(PointId(0), MlastRole::Sink, &m).unwrap();
        s.insert(PointId(1), MlastRole::Source, &m).unwrap();
        let ins = s.insert(PointId(2), MlastRole::Sink, &m).unwrap();
        assert_eq!(ins.new_a_edges, vec![(PointId(1), PointId(2))]);
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn sinks_only_build_nothing() {
        let m = metric_from(&[&[5.0]]);
        let mut s = MlastState::new();
        s.insert(PointId(0), MlastRole::Sink, &m).unwrap();
        s.insert(PointId(1), MlastRole::Sink, &m).unwrap();
        assert!(s.f_edges().is_empty());
        assert!(s.a_edges().is_empty());
    }

    #[test]
    fn random_streams_hold_invariants() {
        use rand::{Rng, SeedableRng};
        for seed in 0..5 {
            let inst = crate::metric::generate(
                crate::metric::GeneratorKind::Euclidean,
                &crate::metric::GenParams {
                    n: 40,
                    ..Default::default()
                },
                seed,
            )
            .unwrap();
            let m = inst.build_metric().unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut s = MlastState::new();
            for i in 0..m.len() {
                let role = if i == 0 || rng.gen::<f64>() < 0.3 {
                    MlastRole::Sink
                } else {
                    MlastRole::Source
                };
                s.insert(PointId(i), role, &m).unwrap();
                s.check_invariants(&m).unwrap();
            }
            let rep = s.charging_report(&m);
            assert!(rep.max_sink_stretch <= 3.0 + 1e-9);
            assert!(rep.class_separation_ok && rep.class_bounds_ok);
        }
    }
}
