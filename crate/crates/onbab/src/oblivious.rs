//! Oblivious single-sink buy-at-bulk: terminals pick a buy level (randomly,
//! or by ball counting against spanner center hierarchies), join one spanner
//! per level, and route ring-by-ring through waypoint ladders. The resulting
//! plan is simultaneously competitive for every g_i = min{x, 2^i}.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cables::{CostFunction, PlannedRoute, RoutePlan, RouteSegment};
use crate::graph;
use crate::metric::{OnlineMetric, PointId};
use crate::spanner::{KMode, SpannerState};
use crate::strictly_greater;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Rand,
    Det,
    DetImproved,
}

#[derive(Debug, Error, PartialEq)]
pub enum ObliviousError {
    #[error("no root set")]
    NoRoot,
    #[error("terminal {0} already inserted")]
    AlreadyInserted(PointId),
}

#[derive(Debug, Clone, Serialize)]
pub struct Hop {
    pub from: PointId,
    pub to: PointId,
    pub spanner: usize,
    /// True when the hop was not routed in the planned spanner (band gap or
    /// unreachable pair) and fell back to the lowest spanner holding both.
    pub fallback: bool,
    /// Forced closing hops (to the root or a phase end) sit outside the ring
    /// progression.
    pub forced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObliviousStep {
    pub step: usize,
    pub terminal: PointId,
    pub tau: usize,
    /// waypoint ladder: (level i, waypoint, d(v, waypoint))
    pub ladder: Vec<(usize, PointId, f64)>,
    pub hops: Vec<Hop>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObliviousInsert {
    pub tau: usize,
    pub route: PlannedRoute,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostRow {
    pub i: u32,
    pub cost_i: f64,
    pub buy_part: f64,
    pub rent_part: f64,
}

/// Per-level center-class and ball probes recorded for the det variants.
#[derive(Debug, Clone, Serialize)]
pub struct ClassProbe {
    pub level: usize,
    pub class: Option<i32>,
    pub ball: usize,
}

#[derive(Debug)]
pub struct ObliviousState {
    variant: Variant,
    kmode: KMode,
    rng: ChaCha8Rng,
    root: Option<PointId>,
    /// spanners[i-1] = F_i, created lazily; the root is every F_i's first member.
    spanners: Vec<SpannerState>,
    tau: HashMap<usize, usize>,
    terminals: Vec<PointId>,
    routes: Vec<PlannedRoute>,
    probes: HashMap<usize, Vec<ClassProbe>>,
    trace: Vec<ObliviousStep>,
}

impl ObliviousState {
    pub fn new(variant: Variant, kmode: KMode, seed: u64) -> Self {
        Self {
            variant,
            kmode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            root: None,
            spanners: Vec::new(),
            tau: HashMap::new(),
            terminals: Vec::new(),
            routes: Vec::new(),
            probes: HashMap::new(),
            trace: Vec::new(),
        }
    }

    pub fn set_root(&mut self, r: PointId) {
        assert!(self.root.is_none(), "root already set");
        self.root = Some(r);
    }

    pub fn root(&self) -> Option<PointId> {
        self.root
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn terminals(&self) -> &[PointId] {
        &self.terminals
    }

    pub fn tau_of(&self, v: PointId) -> Option<usize> {
        self.tau.get(&v.0).copied()
    }

    pub fn probes_of(&self, v: PointId) -> Option<&[ClassProbe]> {
        self.probes.get(&v.0).map(|p| p.as_slice())
    }

    pub fn spanner(&self, i: usize) -> Option<&SpannerState> {
        self.spanners.get(i - 1)
    }

    pub fn spanner_count(&self) -> usize {
        self.spanners.len()
    }

    pub fn route_plan(&self) -> RoutePlan {
        RoutePlan {
            routes: self.routes.clone(),
        }
    }

    pub fn trace(&self) -> &[ObliviousStep] {
        &self.trace
    }

    /// Highest buy level in play: ⌈log₂ k⌉+1 for the known pair budget, or
    /// grown from the arrivals so far.
    pub fn level_cap(&self) -> usize {
        let k = match self.kmode {
            KMode::Known(k) => k.max(2),
            KMode::Unknown => (self.terminals.len() + 1).max(2),
        };
        (k as f64).log2().ceil() as usize + 1
    }

    /// det-improved window width at level i.
    fn window(&self, i: usize) -> usize {
        match self.kmode {
            KMode::Known(k) => ((k.max(2) as f64).log2().sqrt().ceil() as usize).max(1),
            KMode::Unknown => (i as f64).sqrt().ceil() as usize,
        }
    }

    fn joins(&self, tau: usize, i: usize) -> bool {
        match self.variant {
            Variant::Rand | Variant::Det => i <= tau,
            Variant::DetImproved => i <= tau && i + self.window(i) >= tau,
        }
    }

    fn ensure_spanner(&mut self, i: usize, metric: &OnlineMetric) {
        let root = self.root.expect("root set");
        while self.spanners.len() < i {
            let mut sp = SpannerState::new(self.kmode);
            sp.insert_member(root, metric).unwrap();
            let idx = self.spanners.len() + 1;
            for t in self.terminals.clone() {
                if self.joins(self.tau[&t.0], idx) {
                    sp.insert_member(t, metric).unwrap();
                }
            }
            self.spanners.push(sp);
        }
    }

    fn sample_tau(&mut self) -> usize {
        let cap = self.level_cap();
        let mut t = 1;
        while t < cap && self.rng.gen::<bool>() {
            t += 1;
        }
        t
    }

    /// Center class of `v` against F_i's hierarchy, before insertion. Absent
    /// spanners hold only the root.
    fn class_probe(&self, v: PointId, i: usize, metric: &OnlineMetric) -> Option<i32> {
        let root = self.root.expect("root set");
        match self.spanners.get(i - 1) {
            Some(sp) => sp.whatif_center_class(v, metric),
            None => {
                let d = metric.dist(v, root);
                if d > 0.0 {
                    Some(d.log2().floor() as i32)
                } else {
                    None
                }
            }
        }
    }

    fn det_probes(&self, v: PointId, metric: &OnlineMetric) -> (usize, Vec<ClassProbe>) {
        let cap = self.level_cap();
        let mut tau = 1;
        let mut probes = Vec::with_capacity(cap);
        for i in 1..=cap {
            let class = self.class_probe(v, i, metric);
            let radius = class.map_or(0.0, |c| (c as f64).exp2() / 8.0);
            let ball = 1 + self
                .terminals
                .iter()
                .filter(|&&u| u != v && metric.dist(u, v) <= radius)
                .count();
            if ball as f64 >= (i as f64).exp2() {
                tau = i;
            }
            probes.push(ClassProbe {
                level: i,
                class,
                ball,
            });
        }
        (tau, probes)
    }

    /// X_i = root plus arrived terminals with τ ≥ i (rand/det waypoints).
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

    /// Waypoint ladder above τ: for each level i in (τ, cap], the nearest
    /// member of X_i (rand/det) or of F_i (det-improved).
    fn ladder(&self, v: PointId, tau: usize, metric: &OnlineMetric) -> Vec<(usize, PointId, f64)> {
        let root = self.root.expect("root set");
        let cap = self.level_cap();
        let mut out = Vec::new();
        for i in (tau + 1)..=cap {
            let (w, d) = match self.variant {
                Variant::Rand | Variant::Det => metric.nearest_in(v, &self.x_set(i)).unwrap(),
                Variant::DetImproved => match self.spanners.get(i - 1) {
                    Some(sp) => metric.nearest_in(v, sp.members()).unwrap(),
                    None => (root, metric.dist(v, root)),
                },
            };
            out.push((i, w, d));
        }
        out
    }

    /// Shortest path from `from` to `to`, preferring spanner `pref`; falls
    /// back to the lowest spanner containing both, then to the direct edge.
    fn hop_path(
        &self,
        from: PointId,
        to: PointId,
        pref: usize,
        metric: &OnlineMetric,
    ) -> (usize, Vec<PointId>, bool) {
        let n = metric.len();
        let in_spanner = |i: usize, p: PointId| {
            self.spanners
                .get(i - 1)
                .map_or(p == self.root.unwrap(), |sp| sp.contains(p))
        };
        let try_route = |i: usize| -> Option<Vec<PointId>> {
            if !(in_spanner(i, from) && in_spanner(i, to)) {
                return None;
            }
            let sp = self.spanners.get(i - 1)?;
            let (_, _, path) = graph::shortest_path_to_set(n, &[sp.h()], from, &[to])?;
            Some(path)
        };
        if let Some(path) = try_route(pref) {
            return (pref, path, false);
        }
        for i in 1..=self.spanners.len() {
            if i == pref {
                continue;
            }
            if let Some(path) = try_route(i) {
                return (i, path, true);
            }
        }
        (0, vec![from, to], true)
    }

    /// Ring-by-ring routing: ascending ring index, highest-type waypoint per
    /// ring, each hop in the spanner of the waypoint we are leaving.
    /// `band_hi` (det-improved) restricts eligible ladder levels.
    fn route_rings(
        &self,
        v: PointId,
        tau: usize,
        ladder: &[(usize, PointId, f64)],
        metric: &OnlineMetric,
    ) -> (Vec<RouteSegment>, Vec<Hop>) {
        let root = self.root.expect("root set");
        let mut segments = Vec::new();
        let mut hops = Vec::new();
        let mut cur = v;
        let mut cur_level = tau;

        let push_hop = |cur: &mut PointId,
                        cur_level: &mut usize,
                        target: PointId,
                        target_level: usize,
                        forced: bool,
                        segments: &mut Vec<RouteSegment>,
                        hops: &mut Vec<Hop>| {
            if *cur == target {
                *cur_level = (*cur_level).max(target_level);
                return;
            }
            let (used, path, fallback) = self.hop_path(*cur, target, *cur_level, metric);
            segments.push(RouteSegment { cable: used, path });
            hops.push(Hop {
                from: *cur,
                to: target,
                spanner: used,
                fallback,
                forced,
            });
            *cur = target;
            *cur_level = target_level;
        };

        match self.variant {
            Variant::Rand | Variant::Det => {
                let jmax = metric.dist(v, root).log2().floor() as i32;
                let mut rings: std::collections::BTreeMap<i32, Vec<&(usize, PointId, f64)>> =
                    Default::default();
                for e in ladder {
                    let j = e.2.log2().floor() as i32;
                    if j <= jmax {
                        rings.entry(j).or_default().push(e);
                    }
                }
                for (_, ring) in rings {
                    let best = ring.iter().filter(|e| e.0 > cur_level).max_by(|a, b| {
                        let (ta, tb) = (self.tau_rank(a.1), self.tau_rank(b.1));
                        ta.cmp(&tb).then(b.1 .0.cmp(&a.1 .0)).then(a.0.cmp(&b.0))
                    });
                    if let Some(&&(i, w, _)) = best {
                        push_hop(
                            &mut cur,
                            &mut cur_level,
                            w,
                            i,
                            false,
                            &mut segments,
                            &mut hops,
                        );
                    }
                }
                push_hop(
                    &mut cur,
                    &mut cur_level,
                    root,
                    self.level_cap(),
                    true,
                    &mut segments,
                    &mut hops,
                );
            }
            Variant::DetImproved => {
                let l = self.window(tau.max(1)).max(1);
                let cap = self.level_cap();
                let band_end = |t: usize| match self.kmode {
                    KMode::Known(_) => (t + 1) * l,
                    KMode::Unknown => (t + 1) * (t + 1),
                };
                let band_of = |i: usize| match self.kmode {
                    KMode::Known(_) => i / l,
                    KMode::Unknown => (i as f64).sqrt().floor() as usize,
                };
                let mut t = band_of(tau);
                let jmax = metric.dist(v, root).log2().floor() as i32;
                loop {
                    let hi = band_end(t);
                    let mut rings: std::collections::BTreeMap<i32, Vec<&(usize, PointId, f64)>> =
                        Default::default();
                    for e in ladder.iter().filter(|e| e.0 > cur_level && e.0 <= hi) {
                        let j = e.2.log2().floor() as i32;
                        if j <= jmax {
                            rings.entry(j).or_default().push(e);
                        }
                    }
                    for (_, ring) in rings {
                        let best = ring.iter().filter(|e| e.0 > cur_level).max_by(|a, b| {
                            let (ta, tb) = (self.tau_rank(a.1), self.tau_rank(b.1));
                            ta.cmp(&tb).then(b.1 .0.cmp(&a.1 .0)).then(a.0.cmp(&b.0))
                        });
                        if let Some(&&(i, w, _)) = best {
                            push_hop(
                                &mut cur,
                                &mut cur_level,
                                w,
                                i,
                                false,
                                &mut segments,
                                &mut hops,
                            );
                        }
                    }
                    if hi >= cap {
                        break;
                    }
                    // forced phase end at the band's top waypoint
                    if let Some(&(i, w, _)) = ladder.iter().find(|e| e.0 == hi) {
                        push_hop(
                            &mut cur,
                            &mut cur_level,
                            w,
                            i,
                            true,
                            &mut segments,
                            &mut hops,
                        );
                    }
                    t += 1;
                }
                push_hop(
                    &mut cur,
                    &mut cur_level,
                    root,
                    cap,
                    true,
                    &mut segments,
                    &mut hops,
                );
            }
        }
        (segments, hops)
    }

    /// Effective type for waypoint selection: the root outranks everything.
    fn tau_rank(&self, p: PointId) -> usize {
        if Some(p) == self.root {
            usize::MAX
        } else {
            self.tau.get(&p.0).copied().unwrap_or(0)
        }
    }

    pub fn insert_terminal(
        &mut self,
        v: PointId,
        metric: &OnlineMetric,
    ) -> Result<ObliviousInsert, ObliviousError> {
        let root = self.root.ok_or(ObliviousError::NoRoot)?;
        if v == root || self.tau.contains_key(&v.0) {
            return Err(ObliviousError::AlreadyInserted(v));
        }
        let tau = match self.variant {
            Variant::Rand => self.sample_tau(),
            Variant::Det | Variant::DetImproved => {
                let (tau, probes) = self.det_probes(v, metric);
                self.probes.insert(v.0, probes);
                tau
            }
        };
        self.ensure_spanner(tau, metric);
        for i in 1..=tau {
            if self.joins(tau, i) {
                self.spanners[i - 1].insert_member(v, metric).unwrap();
            }
        }
        self.tau.insert(v.0, tau);
        self.terminals.push(v);

        let ladder = self.ladder(v, tau, metric);
        let (segments, hops) = self.route_rings(v, tau, &ladder, metric);
        let route = PlannedRoute {
            terminal: v,
            segments,
        };
        self.routes.push(route.clone());
        self.trace.push(ObliviousStep {
            step: self.terminals.len(),
            terminal: v,
            tau,
            ladder,
            hops,
        });
        Ok(ObliviousInsert { tau, route })
    }

    /// Per-level cost decomposition: cost under g_i against the buy part
    /// (2^i times the total length of the spanners at level ≥ i) plus the
    /// rent part (route portions below level i).
    pub fn cost_report(&self, metric: &OnlineMetric) -> Vec<CostRow> {
        let plan = self.route_plan();
        let top = self.spanners.len() as u32 + 1;
        (0..=top)
            .map(|i| {
                let cost_i = crate::cables::cost_under(metric, &plan, CostFunction::Gi(i)).unwrap();
                let buy_part: f64 = (i.max(1) as usize..=self.spanners.len())
                    .map(|ip| (i as f64).exp2() * self.spanners[ip - 1].h().total_length())
                    .sum();
                let rent_part: f64 = self
                    .routes
                    .iter()
                    .map(|r| {
                        r.segments
                            .iter()
                            .filter(|s| s.cable == 0 || (s.cable as u32) < i)
                            .flat_map(|s| s.path.windows(2))
                            .map(|w| metric.dist(w[0], w[1]))
                            .sum::<f64>()
                    })
                    .sum();
                CostRow {
                    i,
                    cost_i,
                    buy_part,
                    rent_part,
                }
            })
            .collect()
    }

    pub fn check_invariants(&self, metric: &OnlineMetric) -> Result<(), String> {
        let root = self.root.ok_or("no root")?;
        for (idx, sp) in self.spanners.iter().enumerate() {
            sp.check_invariants(metric)
                .map_err(|e| format!("spanner F_{}: {e}", idx + 1))?;
        }
        // membership pattern per terminal
        for &v in &self.terminals {
            let tau = self.tau[&v.0];
            let mut joined = 0;
            for i in 1..=self.spanners.len() {
                let member = self.spanners[i - 1].contains(v);
                if member != self.joins(tau, i) {
                    return Err(format!("{v}: membership in F_{i} contradicts τ = {tau}"));
                }
                joined += member as usize;
            }
            if self.variant == Variant::DetImproved {
                if let KMode::Known(_) = self.kmode {
                    let l = self.window(1);
                    if joined > l + 1 {
                        return Err(format!(
                            "{v} joined {joined} spanners, window allows {}",
                            l + 1
                        ));
                    }
                }
            }
        }
        // routes: valid, end at root, ring progression geometric
        for (step, route) in self.trace.iter().zip(&self.routes) {
            route.validate().map_err(|e| e.to_string())?;
            if !route.segments.is_empty() && route.endpoint() != Some(root) {
                return Err(format!(
                    "route of {} does not end at the root",
                    step.terminal
                ));
            }
            // ring indices strictly increase within each phase (forced hops
            // delimit phases), so waypoint distances per phase telescope
            let v = step.terminal;
            let mut run: Vec<PointId> = Vec::new();
            let mut runs: Vec<Vec<PointId>> = Vec::new();
            for h in &step.hops {
                if h.forced {
                    if !run.is_empty() {
                        runs.push(std::mem::take(&mut run));
                    }
                } else {
                    run.push(h.to);
                }
            }
            if !run.is_empty() {
                runs.push(run);
            }
            for targets in runs {
                let mut last_ring = i32::MIN;
                for &w in &targets {
                    let j = metric.dist(v, w).log2().floor() as i32;
                    if j <= last_ring {
                        return Err(format!("{v}: ring indices not increasing at {w}"));
                    }
                    last_ring = j;
                }
                let last = *targets.last().unwrap();
                let sum: f64 = targets.iter().map(|&w| metric.dist(v, w)).sum();
                let bound = 4.0 * metric.dist(v, last);
                if strictly_greater(sum, bound) {
                    return Err(format!(
                        "{v}: waypoint distances {sum} exceed 4·d(v,last) = {bound}"
                    ));
                }
            }
        }
        // det payment-set separation: levels joined without meeting the ball
        // bar must sit strictly below the type's center class
        if self.variant != Variant::Rand {
            for &v in &self.terminals {
                let tau = self.tau[&v.0];
                let probes = &self.probes[&v.0];
                let rank = |c: Option<i32>| c.map_or(i64::MIN, |x| x as i64);
                let class_tau = rank(probes[tau - 1].class);
                for p in probes {
                    if p.level >= tau || !self.joins(tau, p.level) {
                        continue;
                    }
                    if (p.ball as f64) < (p.level as f64).exp2() && rank(p.class) >= class_tau {
                        return Err(format!(
                            "{v}: class at level {} ({:?}) not below class at τ={tau} ({:?})",
                            p.level,
                            p.class,
                            probes[tau - 1].class
                        ));
                    }
                }
            }
        }
        // cost decomposition holds at every level
        for row in self.cost_report(metric) {
            if strictly_greater(row.cost_i, row.buy_part + row.rent_part) {
                return Err(format!(
                    "cost_{} = {} exceeds {} + {}",
                    row.i, row.cost_i, row.buy_part, row.rent_part
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{generate, GenParams, GeneratorKind};

    fn run_stream(
        variant: Variant,
        kmode: KMode,
        seed: u64,
        n: usize,
    ) -> (ObliviousState, OnlineMetric) {
        let inst = generate(
            GeneratorKind::Euclidean,
            &GenParams {
                n,
                ..Default::default()
            },
            seed,
        )
        .unwrap();
        let m = inst.build_metric().unwrap();
        let mut s = ObliviousState::new(variant, kmode, seed);
        s.set_root(PointId(0));
        for i in 1..m.len() {
            s.insert_terminal(PointId(i), &m).unwrap();
        }
        (s, m)
    }

    #[test]
    fn single_terminal_direct_route() {
        let mut m = OnlineMetric::new();
        m.reveal_point(&[]).unwrap();
        m.reveal_point(&[1.0]).unwrap();
        let mut s = ObliviousState::new(Variant::Rand, KMode::Known(2), 1);
        assert_eq!(
            s.insert_terminal(PointId(1), &m),
            Err(ObliviousError::NoRoot)
        );
        s.set_root(PointId(0));
        let ins = s.insert_terminal(PointId(1), &m).unwrap();
        assert_eq!(ins.route.endpoint(), Some(PointId(0)));
        s.check_invariants(&m).unwrap();
        // the only usable edge is (v, root): every g_i sees cost 1
        for row in s.cost_report(&m) {
            assert!((row.cost_i - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rand_reproducible_given_seed() {
        let (a, _) = run_stream(Variant::Rand, KMode::Known(16), 5, 17);
        let (b, _) = run_stream(Variant::Rand, KMode::Known(16), 5, 17);
        let taus_a: Vec<usize> = a
            .terminals()
            .iter()
            .map(|&v| a.tau_of(v).unwrap())
            .collect();
        let taus_b: Vec<usize> = b
            .terminals()
            .iter()
            .map(|&v| b.tau_of(v).unwrap())
            .collect();
        assert_eq!(taus_a, taus_b);
        assert!(
            taus_a.iter().any(|&t| t > 1),
            "some coin should come up heads"
        );
    }

    #[test]
    fn all_variants_hold_invariants() {
        for variant in [Variant::Rand, Variant::Det, Variant::DetImproved] {
            for kmode in [KMode::Known(24), KMode::Unknown] {
                let (s, m) = run_stream(variant, kmode, 11, 25);
                s.check_invariants(&m)
                    .unwrap_or_else(|e| panic!("{variant:?}/{kmode:?}: {e}"));
            }
        }
    }

    #[test]
    fn det_cluster_promotes_type() {
        // a tight clique of terminals grows |B_2| past 4
        let mut pts: Vec<[f64; 2]> = vec![[0.0, 0.0]];
        for i in 0..6 {
            pts.push([40.0 + 0.02 * i as f64, 0.0]);
        }
        let mut m = OnlineMetric::new();
        for (i, p) in pts.iter().enumerate() {
            let row: Vec<f64> = pts[..i]
                .iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .collect();
            m.reveal_point(&row).unwrap();
        }
        let mut s = ObliviousState::new(Variant::Det, KMode::Known(8), 0);
        s.set_root(PointId(0));
        let mut taus = Vec::new();
        for i in 1..pts.len() {
            taus.push(s.insert_terminal(PointId(i), &m).unwrap().tau);
        }
        // the fourth clustermate sees |B_2| = 4 and promotes; once it joins
        // F_2 the later ones probe a tiny class against it and stay type 1
        assert_eq!(taus, vec![1, 1, 1, 2, 1, 1]);
        s.check_invariants(&m).unwrap();
    }

    #[test]
    fn det_improved_window_bound() {
        let (s, m) = run_stream(Variant::DetImproved, KMode::Known(64), 3, 40);
        let l = ((64f64).log2().sqrt().ceil()) as usize;
        for &v in s.terminals() {
            let joined = (1..=s.spanner_count())
                .filter(|&i| s.spanner(i).unwrap().contains(v))
                .count();
            assert!(joined <= l + 1, "{v} in {joined} spanners");
        }
        s.check_invariants(&m).unwrap();
    }
}
