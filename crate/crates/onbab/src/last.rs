//! Online light approximate shortest-path tree: greedily attach each arriving
//! terminal to its nearest predecessor, and add a direct edge to the root
//! whenever the tree path would exceed 7× the metric distance.

use serde::Serialize;
use thiserror::Error;

use crate::graph::{self, EdgeSet};
use crate::metric::{OnlineMetric, PointId};
use crate::oracles;
use crate::strictly_greater;

#[derive(Debug, Error, PartialEq)]
pub enum LastError {
    #[error("no root set")]
    NoRoot,
}

#[derive(Debug, Clone, Serialize)]
pub struct LastStep {
    pub step: usize,
    pub terminal: PointId,
    pub chose_direct: bool,
    pub d_vr: f64,
    pub d_pv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LastInsert {
    pub tree_edge: (PointId, PointId),
    pub chose_direct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LastReport {
    pub max_root_stretch: f64,
    pub cost_t: f64,
    pub cost_a: f64,
    pub cost_h: f64,
    pub mst_cost: f64,
}

#[derive(Debug, Default)]
pub struct LastState {
    root: Option<PointId>,
    t: EdgeSet,
    a: EdgeSet,
    h: EdgeSet,
    terminals: Vec<PointId>,
    trace: Vec<LastStep>,
}

impl LastState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_root(&mut self, r: PointId) {
        assert!(self.root.is_none(), "root already set");
        self.root = Some(r);
    }

    pub fn root(&self) -> Option<PointId> {
        self.root
    }

    pub fn terminals(&self) -> &[PointId] {
        &self.terminals
    }

    pub fn tree_edges(&self) -> &EdgeSet {
        &self.t
    }

    pub fn direct_edges(&self) -> &EdgeSet {
        &self.a
    }

    pub fn h_edges(&self) -> &EdgeSet {
        &self.h
    }

    pub fn trace(&self) -> &[LastStep] {
        &self.trace
    }

    pub fn insert_terminal(
        &mut self,
        v: PointId,
        metric: &OnlineMetric,
    ) -> Result<LastInsert, LastError> {
        let r = self.root.ok_or(LastError::NoRoot)?;
        // greedy tree edge to the nearest previous terminal (root included)
        let mut prev = vec![r];
        prev.extend_from_slice(&self.terminals);
        let (u, du) = metric.nearest_in(v, &prev).expect("root exists");
        self.t.insert(v, u, du);

        let d_vr = metric.dist(v, r);
        let (_, d_pv, path) =
            graph::shortest_path_to_set(metric.len(), &[&self.t, &self.a], v, &[r])
                .expect("tree connects v to the root");
        let chose_direct = strictly_greater(d_pv, 7.0 * d_vr);
        if chose_direct {
            self.a.insert(v, r, d_vr);
            self.h.insert(v, r, d_vr);
        } else {
            for w in path.windows(2) {
                self.h.insert(w[0], w[1], metric.dist(w[0], w[1]));
            }
        }
        self.terminals.push(v);
        self.trace.push(LastStep {
            step: self.terminals.len(),
            terminal: v,
            chose_direct,
            d_vr,
            d_pv,
        });
        debug_assert!(
            !strictly_greater(
                graph::graph_dist(metric.len(), &[&self.h], v, r),
                7.0 * d_vr
            ),
            "stretch broken at {v}"
        );
        Ok(LastInsert {
            tree_edge: (v, u),
            chose_direct,
        })
    }

    pub fn stretch_and_cost_report(&self, metric: &OnlineMetric) -> LastReport {
        let r = self.root.expect("root set");
        let (dist, _) = graph::dijkstra(metric.len(), &[&self.h], &[r]);
        let max_root_stretch = self
            .terminals
            .iter()
            .map(|&v| dist[v.0] / metric.dist(v, r))
            .fold(0.0, f64::max);
        let mut pts = vec![r];
        pts.extend_from_slice(&self.terminals);
        LastReport {
            max_root_stretch,
            cost_t: self.t.total_length(),
            cost_a: self.a.total_length(),
            cost_h: self.h.total_length(),
            mst_cost: oracles::mst_cost(metric, &pts),
        }
    }

    /// Hard guarantees: stretch ≤ 7 for every terminal, c(A) ≤ 2·c(T), and
    /// the tree-separation property of direct-edge terminals.
    pub fn check_invariants(&self, metric: &OnlineMetric) -> Result<(), String> {
        let r = self.root.ok_or("no root")?;
        let (dist, _) = graph::dijkstra(metric.len(), &[&self.h], &[r]);
        for &v in &self.terminals {
            if strictly_greater(dist[v.0], 7.0 * metric.dist(v, r)) {
                return Err(format!(
                    "stretch: d_H({v},r) = {} > 7·{}",
                    dist[v.0],
                    metric.dist(v, r)
                ));
            }
        }
        let (ca, ct) = (self.a.total_length(), self.t.total_length());
        if strictly_greater(ca, 2.0 * ct) {
            return Err(format!("c(A) = {ca} > 2·c(T) = {}", 2.0 * ct));
        }
        // direct-edge terminals are pairwise far apart in T
        let z: Vec<PointId> = self
            .a
            .iter()
            .map(|(u, v, _)| if u == r { v } else { u })
            .collect();
        for (i, &v) in z.iter().enumerate() {
            let (dt, _) = graph::dijkstra(metric.len(), &[&self.t], &[v]);
            for &w in &z[i + 1..] {
                let bound = metric.dist(v, r) / 2.0 + metric.dist(w, r) / 2.0;
                if dt[w.0] < bound * (1.0 - 1e-9) {
                    return Err(format!(
                        "tree separation: d_T({v},{w}) = {} < {bound}",
                        dt[w.0]
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{generate, GenParams, GeneratorKind};

    #[test]
    fn single_terminal() {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        m.reveal_point(&[1.0]).unwrap();
        let mut s = LastState::new();
        assert_eq!(s.insert_terminal(PointId(1), &m), Err(LastError::NoRoot));
        s.set_root(PointId(0));
        let ins = s.insert_terminal(PointId(1), &m).unwrap();
        assert!(!ins.chose_direct);
        assert_eq!(ins.tree_edge, (PointId(1), PointId(0)));
        let rep = s.stretch_and_cost_report(&m);
        assert_eq!(rep.max_root_stretch, 1.0);
        assert_eq!(rep.cost_a, 0.0);
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn comb_first_direct_edge_at_62() {
        let inst = generate(
            GeneratorKind::CappedComb,
            &GenParams {
                n: 70,
                eps: 0.1,
                cap: 2.0,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let m = inst.build_metric().unwrap();
        let mut s = LastState::new();
        s.set_root(PointId(0));
        for i in 1..=70 {
            s.insert_terminal(PointId(i), &m).unwrap();
        }
        let directs: Vec<usize> = s
            .trace()
            .iter()
            .filter(|t| t.chose_direct)
            .map(|t| t.terminal.0)
            .collect();
        // path length reaches 0.1·61 + 1 = 7.1 > 7 first at tooth 62
        assert_eq!(directs.first(), Some(&62));
        // tooth 63 rides the new direct edge: no second direct until much later
        assert!(!directs.contains(&63));
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn euclidean_instances_hold_invariants() {
        for seed in 0..5 {
            let inst = generate(
                GeneratorKind::Euclidean,
                &GenParams {
                    n: 60,
                    ..Default::default()
                },
                seed,
            )
            .unwrap();
            let m = inst.build_metric().unwrap();
            let mut s = LastState::new();
            s.set_root(PointId(0));
            for i in 1..m.len() {
                s.insert_terminal(PointId(i), &m).unwrap();
            }
            s.check_invariants(&m).unwrap();
            let rep = s.stretch_and_cost_report(&m);
            assert!(rep.max_root_stretch <= 7.0 + 1e-9);
            assert!(rep.cost_h <= rep.cost_t + rep.cost_a + 1e-9);
            assert!(rep.mst_cost <= rep.cost_t + 1e-9);
        }
    }
}
