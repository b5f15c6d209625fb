//! Nested 2^j-nets over an arriving point stream and the induced class(v).
//!
//! Levels are maintained lazily inside a window of scales that is extended as
//! the point set's spread grows. Below the window every point would join (the
//! separation threshold is under the minimum pairwise distance); above it only
//! the first point would. Newly materialized levels are populated by replaying
//! the arrival order, which yields exactly the content online maintenance
//! would have produced.

use std::collections::{BTreeMap, HashMap};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::metric::{OnlineMetric, PointId};

/// Net class: max level a point belongs to. The first point joins every
/// level, giving it the infinite sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Finite(i32),
    Infinite,
}

impl Class {
    pub fn finite(self) -> Option<i32> {
        match self {
            Class::Finite(j) => Some(j),
            Class::Infinite => None,
        }
    }

    /// 2^class, with ∞ mapped to f64::INFINITY.
    pub fn pow2(self) -> f64 {
        match self {
            Class::Finite(j) => (j as f64).exp2(),
            Class::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Class::Finite(j) => write!(f, "{j}"),
            Class::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Class {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Class::Finite(j) => s.serialize_i32(*j),
            Class::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("point {0} already inserted")]
    AlreadyInserted(PointId),
    #[error("level {0} outside maintained range")]
    LevelOutOfRange(i32),
}

#[derive(Debug, Clone)]
pub struct NetHierarchy {
    /// Separation threshold at level j is `separation_factor · 2^j`.
    separation_factor: f64,
    /// If set, a point may only join level j when it belongs to level j−1
    /// (or j is at most its base level ⌊log₂(d(v,S)/factor)⌋).
    nesting: bool,
    levels: BTreeMap<i32, Vec<PointId>>,
    class: HashMap<usize, Class>,
    caps: HashMap<usize, Option<i32>>,
    points: Vec<PointId>,
    window: Option<(i32, i32)>,
    /// Min over inserts of the distance to the nearest earlier point.
    dmin: f64,
    /// Max over inserts of the distance to the first point.
    dmax: f64,
}

impl NetHierarchy {
    pub fn new(separation_factor: f64, nesting: bool) -> Self {
        assert!(separation_factor > 0.0);
        Self {
            separation_factor,
            nesting,
            levels: BTreeMap::new(),
            class: HashMap::new(),
            caps: HashMap::new(),
            points: Vec::new(),
            window: None,
            dmin: f64::INFINITY,
            dmax: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn contains(&self, v: PointId) -> bool {
        self.class.contains_key(&v.0)
    }

    pub fn class_of(&self, v: PointId) -> Option<Class> {
        self.class.get(&v.0).copied()
    }

    pub fn level_bounds(&self) -> Option<(i32, i32)> {
        self.window
    }

    pub fn net_points(&self, j: i32) -> Result<&[PointId], NetError> {
        match self.window {
            Some((lo, hi)) if lo <= j && j <= hi => Ok(&self.levels[&j]),
            _ => Err(NetError::LevelOutOfRange(j)),
        }
    }

    fn window_for(&self, dmin: f64, dmax: f64) -> (i32, i32) {
        let f = self.separation_factor;
        let lo = if dmin.is_finite() {
            ((dmin / f).log2().floor() as i32 - 1).min(0)
        } else {
            0
        };
        let hi = if dmax > 0.0 {
            ((dmax / f).log2().ceil() as i32 + 1).max(0)
        } else {
            0
        };
        (lo, hi)
    }

    /// Base level of a candidate: every j at or below it passes the distance
    /// test automatically (d(v,S) ≥ factor·2^j).
    fn base_level(&self, d_to_set: f64) -> i32 {
        if d_to_set.is_infinite() {
            i32::MAX
        } else {
            (d_to_set / self.separation_factor).log2().floor() as i32
        }
    }

    fn joins(
        &self,
        metric: &OnlineMetric,
        q: PointId,
        cap: Option<i32>,
        j: i32,
        content: &[PointId],
        joined_below: bool,
        base: i32,
    ) -> bool {
        if cap.is_some_and(|c| j > c) {
            return false;
        }
        if self.nesting && j > base && !joined_below {
            return false;
        }
        let thr = self.separation_factor * (j as f64).exp2();
        content.iter().all(|&z| metric.dist(q, z) >= thr)
    }

    /// Populate a freshly materialized level by replaying arrival order.
    fn replay_level(&mut self, metric: &OnlineMetric, j: i32) {
        debug_assert!(!self.levels.contains_key(&j));
        let mut content: Vec<PointId> = Vec::new();
        for idx in 0..self.points.len() {
            let q = self.points[idx];
            let cap = self.caps[&q.0];
            let earlier = &self.points[..idx];
            let d_to_set = metric
                .nearest_in(q, earlier)
                .map_or(f64::INFINITY, |(_, d)| d);
            let base = self.base_level(d_to_set);
            // For nesting replay, membership one level down is consulted on
            // the already-final level j−1 (levels are materialized bottom-up).
            let below = self
                .levels
                .get(&(j - 1))
                .map_or(j - 1 < self.window.map_or(i32::MIN, |w| w.0), |l| {
                    l.contains(&q)
                });
            if self.joins(metric, q, cap, j, &content, below, base) {
                content.push(q);
            }
        }
        debug_assert!(
            self.window.map_or(true, |(_, hi)| j <= hi) || content.len() <= 1,
            "window margin violated at level {j}"
        );
        self.levels.insert(j, content);
    }

    fn extend_window(&mut self, metric: &OnlineMetric, lo: i32, hi: i32) {
        let (old_lo, old_hi) = self.window.unwrap_or((lo, hi));
        let lo = lo.min(old_lo);
        let hi = hi.max(old_hi);
        // bottom-up so nesting replay can consult level j−1
        for j in lo..=hi {
            if !self.levels.contains_key(&j) {
                self.replay_level(metric, j);
            }
        }
        self.window = Some((lo, hi));
    }

    pub fn insert(&mut self, v: PointId, metric: &OnlineMetric) -> Class {
        self.insert_capped(v, metric, None)
    }

    /// Insert with an optional max joinable level (the spanner caps centers
    /// at the pair class). Returns the assigned class.
    pub fn insert_capped(&mut self, v: PointId, metric: &OnlineMetric, cap: Option<i32>) -> Class {
        assert!(!self.contains(v), "point {v} already inserted");
        if self.points.is_empty() {
            self.points.push(v);
            self.caps.insert(v.0, cap);
            self.class.insert(v.0, Class::Infinite);
            self.window = Some((0, 0));
            self.levels.insert(0, vec![v]);
            return Class::Infinite;
        }
        let (_, dnear) = metric.nearest_in(v, &self.points).expect("nonempty");
        let dfirst = metric.dist(v, self.points[0]);
        self.dmin = self.dmin.min(dnear);
        self.dmax = self.dmax.max(dfirst);
        let (lo, hi) = self.window_for(self.dmin, self.dmax);
        self.extend_window(metric, lo, hi);

        let (lo, hi) = self.window.unwrap();
        let base = self.base_level(dnear);
        let mut best: Option<i32> = None;
        let mut joined_below = false;
        for j in lo..=hi {
            let content = self.levels.get(&j).expect("materialized");
            let joins = self.joins(metric, v, cap, j, content, joined_below, base);
            if joins {
                self.levels.get_mut(&j).unwrap().push(v);
                best = Some(j);
            }
            joined_below = joins;
        }
        let class = Class::Finite(best.unwrap_or(lo - 1));
        self.points.push(v);
        self.caps.insert(v.0, cap);
        self.class.insert(v.0, class);
        class
    }

    /// The class `insert_capped` would assign, without mutating anything.
    pub fn whatif_class(
        &self,
        v: PointId,
        metric: &OnlineMetric,
        cap: Option<i32>,
    ) -> Result<Class, NetError> {
        if self.contains(v) {
            return Err(NetError::AlreadyInserted(v));
        }
        if self.points.is_empty() {
            return Ok(Class::Infinite);
        }
        let (_, dnear) = metric.nearest_in(v, &self.points).expect("nonempty");
        let dfirst = metric.dist(v, self.points[0]);
        let (lo, hi) = self.window_for(self.dmin.min(dnear), self.dmax.max(dfirst));
        let (cur_lo, cur_hi) = self.window.expect("nonempty hierarchy has a window");
        let lo = lo.min(cur_lo);
        let hi = hi.max(cur_hi);
        let base = self.base_level(dnear);
        let all: Vec<PointId> = self.points.clone();
        let first = vec![self.points[0]];
        let mut best: Option<i32> = None;
        let mut joined_below = false;
        for j in lo..=hi {
            // levels outside the maintained window are trivial: below it every
            // point joins, above it only the first point does
            let content: &[PointId] = if j < cur_lo {
                &all
            } else if j > cur_hi {
                &first
            } else {
                self.levels.get(&j).expect("materialized")
            };
            let joins = self.joins(metric, v, cap, j, content, joined_below, base);
            if joins {
                best = Some(j);
            }
            joined_below = joins;
        }
        Ok(Class::Finite(best.unwrap_or(lo - 1)))
    }

    /// Packing at every maintained level; covering (non-nesting mode) among
    /// the points whose cap allows the level. Panic-free: returns the first
    /// violation as a message.
    pub fn check_invariants(&self, metric: &OnlineMetric) -> Result<(), String> {
        let Some((lo, hi)) = self.window else {
            return Ok(());
        };
        for j in lo..=hi {
            let z = &self.levels[&j];
            let thr = self.separation_factor * (j as f64).exp2();
            for (a, &u) in z.iter().enumerate() {
                for &w in &z[a + 1..] {
                    if metric.dist(u, w) < thr {
                        return Err(format!(
                            "packing violated at level {j}: d({u},{w}) = {} < {thr}",
                            metric.dist(u, w)
                        ));
                    }
                }
            }
            if !self.nesting {
                for &p in &self.points {
                    if self.caps[&p.0].is_some_and(|c| j > c) {
                        continue;
                    }
                    if z.contains(&p) {
                        continue;
                    }
                    let d = metric.nearest_in(p, z).map_or(f64::INFINITY, |(_, d)| d);
                    if d >= thr {
                        return Err(format!(
                            "covering violated at level {j}: d({p}, Z_{j}) = {d} ≥ {thr}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
