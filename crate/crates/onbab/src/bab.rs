//! Deterministic online single-sink buy-at-bulk: each arriving terminal gets
//! a cable type by ball counting, enters one backbone layer per type (sink for
//! lower layers, source for its own), and routes through layers of strictly
//! increasing type until it reaches the root.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::cables::{CableSchedule, PlannedRoute, RoutePlan, RouteSegment};
use crate::graph;
use crate::metric::{OnlineMetric, PointId};
use crate::mlast::{MlastRole, MlastState};

#[derive(Debug, Error, PartialEq)]
pub enum BabError {
    #[error("no root set")]
    NoRoot,
    #[error("terminal {0} already inserted")]
    AlreadyInserted(PointId),
    #[error("no higher-type terminal reachable in layer {0}")]
    Unreachable(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeProbe {
    pub tau: usize,
    /// per type i = 1..M: (d_i = distance to X_i, n_i = ball count)
    pub probes: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BabInsert {
    pub tau: usize,
    pub route: PlannedRoute,
    /// per layer: (type, edges the layer installed at this arrival)
    pub new_installed_edges: Vec<(usize, Vec<(PointId, PointId)>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostIdentity {
    pub lhs: f64,
    pub rhs_total: f64,
    /// per type i: (σ_i·d(H_i), Σ_v β_i·d(P_i(v)))
    pub rhs_terms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BabStep {
    pub step: usize,
    pub terminal: PointId,
    pub tau: usize,
    pub installed: Vec<(usize, Vec<(PointId, PointId)>)>,
    pub segments: Vec<(usize, Vec<PointId>)>,
}

#[derive(Debug)]
pub struct BabState {
    schedule: CableSchedule,
    root: Option<PointId>,
    /// layers[i-1] = H_i: sources = type-i terminals, sinks = X_{i+1}.
    layers: Vec<MlastState>,
    tau: HashMap<usize, usize>,
    terminals: Vec<PointId>,
    routes: Vec<PlannedRoute>,
    probes: HashMap<usize, Vec<(f64, usize)>>,
    trace: Vec<BabStep>,
}

impl BabState {
    pub fn new(schedule: CableSchedule) -> Self {
        let m = schedule.len();
        Self {
            schedule,
            root: None,
            layers: (0..m).map(|_| MlastState::new()).collect(),
            tau: HashMap::new(),
            terminals: Vec::new(),
            routes: Vec::new(),
            probes: HashMap::new(),
            trace: Vec::new(),
        }
    }

    pub fn set_root(&mut self, r: PointId, metric: &OnlineMetric) {
        assert!(self.root.is_none(), "root already set");
        self.root = Some(r);
        for layer in &mut self.layers {
            layer.insert(r, MlastRole::Sink, metric).unwrap();
        }
    }

    pub fn root(&self) -> Option<PointId> {
        self.root
    }

    pub fn schedule(&self) -> &CableSchedule {
        &self.schedule
    }

    pub fn terminals(&self) -> &[PointId] {
        &self.terminals
    }

    pub fn tau_of(&self, v: PointId) -> Option<usize> {
        self.tau.get(&v.0).copied()
    }

    pub fn probes_of(&self, v: PointId) -> Option<&[(f64, usize)]> {
        self.probes.get(&v.0).map(|p| p.as_slice())
    }

    pub fn layer(&self, i: usize) -> &MlastState {
        &self.layers[i - 1]
    }

    pub fn route_plan(&self) -> RoutePlan {
        RoutePlan {
            routes: self.routes.clone(),
        }
    }

    pub fn trace(&self) -> &[BabStep] {
        &self.trace
    }

    /// X_i = root plus every arrived terminal of type ≥ i.
    fn x_set(&self, i: usize) -> Vec<PointId> {
        let mut out = vec![self.root.expect("root set")];
        out.extend(
            self.terminals
                .iter()
                .filter(|t| self.tau[&t.0] >= i)
                .copied(),
        );
        out
    }

    /// Type by ball counting: τ = max{i : n_i(v) ≥ σ_i/β_{i−1}}, default 1.
    /// d_i(v) is measured against the current X_i; the ball B_i(v) of radius
    /// d_i(v)/8 counts all arrived terminals plus v itself.
    pub fn assign_type(&self, v: PointId, metric: &OnlineMetric) -> Result<TypeProbe, BabError> {
        self.root.ok_or(BabError::NoRoot)?;
        let mut probes = Vec::with_capacity(self.schedule.len());
        let mut tau = 1;
        for i in 1..=self.schedule.len() {
            let (_, d_i) = metric
                .nearest_in(v, &self.x_set(i))
                .expect("root is always in X_i");
            let n_i = 1 + self
                .terminals
                .iter()
                .filter(|&&u| u != v && metric.dist(u, v) <= d_i / 8.0)
                .count();
            if n_i as f64 >= self.schedule.threshold(i) {
                tau = i;
            }
            probes.push((d_i, n_i));
        }
        Ok(TypeProbe { tau, probes })
    }

    pub fn insert_terminal(
        &mut self,
        v: PointId,
        metric: &OnlineMetric,
    ) -> Result<BabInsert, BabError> {
        let root = self.root.ok_or(BabError::NoRoot)?;
        if v == root || self.tau.contains_key(&v.0) {
            return Err(BabError::AlreadyInserted(v));
        }
        let TypeProbe { tau, probes } = self.assign_type(v, metric)?;
        self.probes.insert(v.0, probes);
        self.tau.insert(v.0, tau);
        self.terminals.push(v);

        // enter the layers: sink wherever v belongs to X_{i+1}, source at τ
        let mut installed = Vec::new();
        for i in 1..=self.schedule.len() {
            let role = match i.cmp(&tau) {
                std::cmp::Ordering::Less => MlastRole::Sink,
                std::cmp::Ordering::Equal => MlastRole::Source,
                std::cmp::Ordering::Greater => continue,
            };
            let ins = self.layers[i - 1].insert(v, role, metric).unwrap();
            let mut edges: Vec<(PointId, PointId)> = ins.f_edge.into_iter().collect();
            edges.extend(ins.new_a_edges);
            if !edges.is_empty() {
                installed.push((i, edges));
            }
        }

        // route from v through layers of strictly increasing type
        let mut segments = Vec::new();
        let mut w = v;
        while w != root {
            let i = self.tau[&w.0];
            let sinks = self.x_set(i + 1);
            let layer_h = self.layers[i - 1].h();
            let (target, _, path) =
                graph::shortest_path_to_set(metric.len(), &[&layer_h], w, &sinks)
                    .ok_or(BabError::Unreachable(i))?;
            segments.push(RouteSegment { cable: i, path });
            w = target;
        }
        let route = PlannedRoute {
            terminal: v,
            segments,
        };
        self.routes.push(route.clone());
        self.trace.push(BabStep {
            step: self.terminals.len(),
            terminal: v,
            tau,
            installed: installed.clone(),
            segments: route
                .segments
                .iter()
                .map(|s| (s.cable, s.path.clone()))
                .collect(),
        });
        Ok(BabInsert {
            tau,
            route,
            new_installed_edges: installed,
        })
    }

    /// Cable-i segment length of a terminal's route (0 if none).
    fn segment_length(&self, route: &PlannedRoute, i: usize, metric: &OnlineMetric) -> f64 {
        route
            .segments
            .iter()
            .filter(|s| s.cable == i)
            .flat_map(|s| s.path.windows(2))
            .map(|w| metric.dist(w[0], w[1]))
            .sum()
    }

    /// Both sides of the per-type accounting bound: the plan's true cost never
    /// exceeds Σ_i (σ_i·d(H_i) + Σ_v β_i·d(P_i(v))).
    pub fn algorithm_cost_identity(&self, metric: &OnlineMetric) -> CostIdentity {
        if self.terminals.is_empty() {
            return CostIdentity {
                lhs: 0.0,
                rhs_total: 0.0,
                rhs_terms: Vec::new(),
            };
        }
        let plan = self.route_plan();
        let lhs = crate::cables::cost_report(metric, &plan, &self.schedule)
            .expect("routes are valid")
            .total;
        let mut rhs_terms = Vec::new();
        for i in 1..=self.schedule.len() {
            let buy = self.schedule.sigma(i) * self.layers[i - 1].h().total_length();
            let rent: f64 = self
                .routes
                .iter()
                .map(|r| self.schedule.beta(i) * self.segment_length(r, i, metric))
                .sum();
            rhs_terms.push((buy, rent));
        }
        CostIdentity {
            lhs,
            rhs_total: rhs_terms.iter().map(|(b, r)| b + r).sum(),
            rhs_terms,
        }
    }

    pub fn check_invariants(&self, metric: &OnlineMetric) -> Result<(), String> {
        let root = self.root.ok_or("no root")?;
        for (i, layer) in self.layers.iter().enumerate() {
            layer
                .check_invariants(metric)
                .map_err(|e| format!("layer {}: {e}", i + 1))?;
        }
        let m = self.schedule.len();
        for (route, &v) in self.routes.iter().zip(&self.terminals) {
            route.validate().map_err(|e| e.to_string())?;
            // strictly increasing cable types, ending at the root
            for w in route.segments.windows(2) {
                if w[1].cable <= w[0].cable {
                    return Err(format!("route of {v}: cable types not increasing"));
                }
            }
            if route.endpoint() != Some(root) {
                return Err(format!("route of {v} does not end at the root"));
            }
            // segment recursion: d(P_i(v)) ≤ Σ_{i′≤i} 3^{i−i′+1}·d_{i′+1}(v)
            let probes = &self.probes[&v.0];
            let d_next = |i: usize| {
                if i + 1 <= m {
                    probes[i].0 // d_{i+1}
                } else {
                    metric.dist(v, root)
                }
            };
            for i in 1..=m {
                let len = self.segment_length(route, i, metric);
                let bound: f64 = (1..=i)
                    .map(|ip| 3f64.powi((i - ip + 1) as i32) * d_next(ip))
                    .sum();
                if len > bound * (1.0 + 1e-9) {
                    return Err(format!(
                        "route of {v}: d(P_{i}) = {len} > recursion bound {bound}"
                    ));
                }
            }
            // type rule maximality: n_i < threshold for every i above τ
            let tau = self.tau[&v.0];
            for i in (tau + 1)..=m {
                let (_, n_i) = probes[i - 1];
                if n_i as f64 >= self.schedule.threshold(i) {
                    return Err(format!(
                        "{v}: ball at type {i} holds {n_i} ≥ σ_{i}/β_{} yet τ = {tau}",
                        i - 1
                    ));
                }
            }
        }
        let id = self.algorithm_cost_identity(metric);
        if id.lhs > id.rhs_total * (1.0 + 1e-9) {
            return Err(format!(
                "cost accounting: plan cost {} exceeds bound {}",
                id.lhs, id.rhs_total
            ));
        }
        Ok(())
    }
}
