//! Cable schedules and cost accounting: pruning, rent-or-buy cost functions
//! (f_i, g_i), concave-function decomposition into the g_i basis, route-plan
//! costing, and optimal per-type evaluation on trees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{OnlineMetric, PointId};
use crate::oracles::TreeInstance;

/// One cable: fixed install cost σ per unit length, incremental cost β per
/// unit demand per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableType {
    pub sigma: f64,
    pub beta: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum CableError {
    #[error("empty cable list")]
    EmptyInput,
    #[error("cables not monotone: {0}")]
    NonMonotone(String),
    #[error("invalid route plan: {0}")]
    InvalidPlan(String),
    #[error("not a tree: {0}")]
    NotATree(String),
    #[error("bad concave function: {0}")]
    BadFunction(String),
    #[error("decomposition sandwich failed at x={x}: f={f}, sum={sum}")]
    SandwichFailed { x: f64, f: f64, sum: f64 },
    #[error("cable index {0} out of range")]
    BadIndex(usize),
}

/// Ordered cable types 1..M, plus a virtual cable 0 with σ₀ = 0 and a
/// configurable β₀ (default 1) used in thresholds σ_i/β_{i−1} and in f_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CableSchedule {
    cables: Vec<CableType>,
    beta0: f64,
}

fn validate_monotone(cables: &[CableType]) -> Result<(), CableError> {
    if cables.is_empty() {
        return Err(CableError::EmptyInput);
    }
    for (i, c) in cables.iter().enumerate() {
        if c.sigma < 0.0 || c.beta <= 0.0 {
            return Err(CableError::NonMonotone(format!(
                "cable {}: need σ ≥ 0 and β > 0",
                i + 1
            )));
        }
        if i > 0 {
            let p = cables[i - 1];
            if c.sigma <= p.sigma || c.beta >= p.beta {
                return Err(CableError::NonMonotone(format!(
                    "cable {}: σ must increase and β decrease",
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

impl CableSchedule {
    /// Accept a monotone cable list as-is (no pruning requirement).
    pub fn new(cables: Vec<CableType>, beta0: f64) -> Result<Self, CableError> {
        validate_monotone(&cables)?;
        if beta0 <= 0.0 {
            return Err(CableError::NonMonotone("β₀ must be > 0".into()));
        }
        Ok(Self { cables, beta0 })
    }

    /// Greedy pruning: keep cable 1, then keep cable i iff σ_i ≥ 3·σ_kept and
    /// β_i ≤ β_kept/9 relative to the last kept cable.
    pub fn prune(cables: &[CableType], beta0: f64) -> Result<Self, CableError> {
        validate_monotone(cables)?;
        let mut kept = vec![cables[0]];
        for c in &cables[1..] {
            let last = *kept.last().unwrap();
            if c.sigma >= 3.0 * last.sigma && c.beta <= last.beta / 9.0 {
                kept.push(*c);
            }
        }
        Self::new(kept, beta0)
    }

    /// σ_i ≥ 3σ_{i−1} and β_i ≤ β_{i−1}/9 for every retained i ≥ 2.
    pub fn is_pruned(&self) -> bool {
        self.cables
            .windows(2)
            .all(|w| w[1].sigma >= 3.0 * w[0].sigma && w[1].beta <= w[0].beta / 9.0)
    }

    /// Number of cable types M.
    pub fn len(&self) -> usize {
        self.cables.len()
    }

    pub fn is_empty(&self) -> bool {
        false // schedules always hold ≥ 1 cable
    }

    pub fn cables(&self) -> &[CableType] {
        &self.cables
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// 1-based accessors; index 0 is the virtual cable (σ=0, β=β₀).
    pub fn sigma(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.cables[i - 1].sigma
        }
    }

    pub fn beta(&self, i: usize) -> f64 {
        if i == 0 {
            self.beta0
        } else {
            self.cables[i - 1].beta
        }
    }

    /// Type threshold σ_i / β_{i−1}.
    pub fn threshold(&self, i: usize) -> f64 {
        self.sigma(i) / self.beta(i - 1)
    }

    /// Rent-or-buy basis f_i(x) = min{σ_i, β_{i−1}·x}.
    pub fn f_i(&self, i: usize, x: f64) -> f64 {
        self.sigma(i).min(self.beta(i - 1) * x)
    }

    /// Cheapest single cable for load x: min_i σ_i + β_i·x (0 at x = 0).
    pub fn cheapest(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (1..=self.len())
            .map(|i| self.sigma(i) + self.beta(i) * x)
            .min_by(f64::total_cmp)
            .unwrap()
    }

    /// Σ_i f_i(x) / cheapest(x): the pointwise constant behind the tree
    /// evaluation argument. Bounded by 1.5 on pruned schedules.
    pub fn rob_sum_ratio(&self, x: f64) -> f64 {
        let num: f64 = (1..=self.len()).map(|i| self.f_i(i, x)).sum();
        num / self.cheapest(x)
    }

    /// A random already-pruned schedule with M types (for tests/harness).
    pub fn random(m: usize, rng: &mut impl rand::Rng) -> Self {
        assert!(m >= 1);
        let beta0 = 1.0;
        let mut cables = Vec::with_capacity(m);
        let mut sigma = 0.5 + 1.5 * rng.gen::<f64>();
        let mut beta = beta0 * (0.1 + 0.9 * rng.gen::<f64>());
        for _ in 0..m {
            cables.push(CableType { sigma, beta });
            sigma *= 3.0 + 3.0 * rng.gen::<f64>();
            beta /= 9.0 + 9.0 * rng.gen::<f64>();
        }
        Self::new(cables, beta0).expect("construction is monotone")
    }
}

/// g_i(x) = min{x, 2^i}.
pub fn g_i(i: u32, x: f64) -> f64 {
    x.min((i as f64).exp2())
}

/// A cost function applied per edge to its total load.
#[derive(Debug, Clone, Copy)]
pub enum CostFunction<'a> {
    /// Full cable model: each used cable's σ is installed, demand rides the
    /// highest installed type.
    Schedule(&'a CableSchedule),
    /// Rent-or-buy power function g_i.
    Gi(u32),
    /// Rent-or-buy basis f_i of a schedule.
    Fi(&'a CableSchedule, usize),
    /// Arbitrary tabulated concave function.
    Concave(&'a ConcaveTable),
}

/// One routed segment: a path walked with a single cable type (1-based; 0 is
/// allowed for plans that carry no cable information, e.g. oblivious routes
/// evaluated under g_i).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteSegment {
    pub cable: usize,
    pub path: Vec<PointId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedRoute {
    pub terminal: PointId,
    pub segments: Vec<RouteSegment>,
}

impl PlannedRoute {
    pub fn endpoint(&self) -> Option<PointId> {
        self.segments.last().and_then(|s| s.path.last().copied())
    }

    /// Distinct edges walked by this route, with the cable declared for each
    /// (the highest if a later segment rewalks an edge).
    pub fn edges(&self) -> std::collections::BTreeMap<(usize, usize), usize> {
        let mut out = std::collections::BTreeMap::new();
        for seg in &self.segments {
            for w in seg.path.windows(2) {
                let k = if w[0].0 < w[1].0 {
                    (w[0].0, w[1].0)
                } else {
                    (w[1].0, w[0].0)
                };
                let e = out.entry(k).or_insert(seg.cable);
                *e = (*e).max(seg.cable);
            }
        }
        out
    }

    pub fn length(&self, metric: &OnlineMetric) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.path.windows(2))
            .map(|w| metric.dist(w[0], w[1]))
            .sum()
    }

    pub fn validate(&self) -> Result<(), CableError> {
        let mut prev_end: Option<PointId> = None;
        for seg in &self.segments {
            if seg.path.len() < 2 {
                return Err(CableError::InvalidPlan(format!(
                    "segment of {} has fewer than 2 points",
                    self.terminal
                )));
            }
            if seg.path.windows(2).any(|w| w[0] == w[1]) {
                return Err(CableError::InvalidPlan("repeated point in path".into()));
            }
            if let Some(pe) = prev_end {
                if seg.path[0] != pe {
                    return Err(CableError::InvalidPlan(format!(
                        "segments of {} do not chain",
                        self.terminal
                    )));
                }
            } else if seg.path[0] != self.terminal {
                return Err(CableError::InvalidPlan(format!(
                    "route of {} does not start at it",
                    self.terminal
                )));
            }
            prev_end = seg.path.last().copied();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RoutePlan {
    pub routes: Vec<PlannedRoute>,
}

impl RoutePlan {
    pub fn validate(&self) -> Result<(), CableError> {
        for r in &self.routes {
            r.validate()?;
        }
        Ok(())
    }

    /// Per-edge loads: (total distinct terminals on the edge, per-cable
    /// nominal terminal counts).
    fn edge_loads(
        &self,
    ) -> std::collections::BTreeMap<(usize, usize), (usize, std::collections::BTreeMap<usize, usize>)>
    {
        let mut loads: std::collections::BTreeMap<
            _,
            (usize, std::collections::BTreeMap<usize, usize>),
        > = std::collections::BTreeMap::new();
        for r in &self.routes {
            for (e, cable) in r.edges() {
                let entry = loads.entry(e).or_default();
                entry.0 += 1;
                *entry.1.entry(cable).or_default() += 1;
            }
        }
        loads
    }
}

/// Per-edge per-cable demand after the highest-installed-type reassignment.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub fixed: f64,
    pub incremental: f64,
    pub total: f64,
    /// cable index → (total length installed, total demand·length carried)
    pub per_cable: std::collections::BTreeMap<usize, (f64, f64)>,
    /// edge → (installed cables, effective load on the highest one)
    pub loads: std::collections::BTreeMap<(usize, usize), (Vec<usize>, usize)>,
}

/// Full cable-model cost of a plan: every cable declared on an edge is
/// installed (pays σ·d(e)); all demand on the edge rides the highest type.
pub fn cost_report(
    metric: &OnlineMetric,
    plan: &RoutePlan,
    schedule: &CableSchedule,
) -> Result<CostReport, CableError> {
    plan.validate()?;
    let mut fixed = 0.0;
    let mut incremental = 0.0;
    let mut per_cable: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
    let mut loads = std::collections::BTreeMap::new();
    for (e, (total, nominal)) in plan.edge_loads() {
        let d = metric.dist(PointId(e.0), PointId(e.1));
        let mut installed: Vec<usize> = nominal.keys().copied().collect();
        installed.sort_unstable();
        let &top = installed
            .last()
            .ok_or_else(|| CableError::InvalidPlan("edge with no cable".into()))?;
        if top == 0 || top > schedule.len() {
            return Err(CableError::BadIndex(top));
        }
        for &i in &installed {
            if i == 0 || i > schedule.len() {
                return Err(CableError::BadIndex(i));
            }
            fixed += schedule.sigma(i) * d;
            per_cable.entry(i).or_default().0 += d;
        }
        incremental += schedule.beta(top) * total as f64 * d;
        per_cable.entry(top).or_default().1 += total as f64 * d;
        loads.insert(e, (installed, total));
    }
    Ok(CostReport {
        fixed,
        incremental,
        total: fixed + incremental,
        per_cable,
        loads,
    })
}

/// Σ_e d(e)·fn(load(e)) for the simple functions; full model for `Schedule`.
pub fn cost_under(
    metric: &OnlineMetric,
    plan: &RoutePlan,
    f: CostFunction,
) -> Result<f64, CableError> {
    if let CostFunction::Schedule(s) = f {
        return Ok(cost_report(metric, plan, s)?.total);
    }
    plan.validate()?;
    let mut total = 0.0;
    for (e, (load, _)) in plan.edge_loads() {
        let d = metric.dist(PointId(e.0), PointId(e.1));
        let x = load as f64;
        total += d * match f {
            CostFunction::Gi(i) => g_i(i, x),
            CostFunction::Fi(s, i) => {
                if i == 0 || i > s.len() {
                    return Err(CableError::BadIndex(i));
                }
                s.f_i(i, x)
            }
            CostFunction::Concave(t) => t.eval(x),
            CostFunction::Schedule(_) => unreachable!(),
        };
    }
    Ok(total)
}

/// Piecewise-linear concave function given by breakpoints, with f(0) = 0;
/// extrapolated beyond the last breakpoint with the final slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcaveTable {
    pub breakpoints: Vec<(f64, f64)>,
}

impl ConcaveTable {
    pub fn new(mut breakpoints: Vec<(f64, f64)>) -> Result<Self, CableError> {
        if breakpoints.first().map(|&(x, _)| x > 0.0).unwrap_or(true) {
            breakpoints.insert(0, (0.0, 0.0));
        }
        if breakpoints[0] != (0.0, 0.0) {
            return Err(CableError::BadFunction("f(0) must be 0".into()));
        }
        let mut prev_slope = f64::INFINITY;
        for w in breakpoints.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if x1 <= x0 {
                return Err(CableError::BadFunction("x not increasing".into()));
            }
            if y1 < y0 {
                return Err(CableError::BadFunction("not monotone".into()));
            }
            let s = (y1 - y0) / (x1 - x0);
            if s > prev_slope * (1.0 + 1e-12) {
                return Err(CableError::BadFunction("not concave".into()));
            }
            prev_slope = s;
        }
        Ok(Self { breakpoints })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.breakpoints;
        if x <= 0.0 {
            return 0.0;
        }
        for w in pts.windows(2) {
            if x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        // beyond the table: continue with the last slope
        let n = pts.len();
        let (x0, y0) = pts[n - 2];
        let (x1, y1) = pts[n - 1];
        y1 + (x - x1) * (y1 - y0) / (x1 - x0)
    }

    /// Random concave monotone function with f(0)=0: a min of affine pieces
    /// sampled at 1 and powers of two up to `x_max`.
    pub fn random(rng: &mut impl rand::Rng, x_max: f64) -> Self {
        let pieces: Vec<(f64, f64)> = {
            let k = 2 + rng.gen_range(0..4);
            let mut slope = 0.5 + rng.gen::<f64>() * 2.0;
            let mut offset = 0.0;
            let mut v = Vec::new();
            for _ in 0..k {
                v.push((offset, slope));
                offset += rng.gen::<f64>() * x_max * slope / 4.0;
                slope *= 0.1 + 0.6 * rng.gen::<f64>();
            }
            v
        };
        let eval = |x: f64| {
            pieces
                .iter()
                .map(|&(a, b)| a + b * x)
                .min_by(f64::total_cmp)
                .unwrap()
        };
        let mut xs = vec![0.0, 1.0];
        let mut p = 2.0;
        while p < x_max {
            xs.push(p);
            p *= 2.0;
        }
        xs.push(x_max);
        Self::new(xs.into_iter().map(|x| (x, eval(x))).collect())
            .expect("sampled min-of-affine is concave")
    }
}

/// Decompose a concave f into the g_i basis: coefficients c (index i ↦ c_i)
/// with f(x) ≤ Σ_i c_i·g_i(x) ≤ 4·f(x), verified at all integers and powers
/// of two in [1, x_max] before returning.
///
/// Construction: interpolate f at 1 and powers of two with S = Σ c_i g_i
/// (so S ≤ f ≤ 2S by concavity), then scale up by the worst checkpoint ratio.
pub fn decompose_concave(f: &ConcaveTable, x_max: f64) -> Result<Vec<f64>, CableError> {
    if x_max < 1.0 {
        return Err(CableError::BadFunction("x_max must be ≥ 1".into()));
    }
    let big_i = (x_max.log2().ceil() as usize).max(1);
    // checkpoint loads t_m = min(2^m, x_max), m = 0..=I
    let t = |m: usize| ((m as f64).exp2()).min(x_max);
    // interval slopes s_m on [t_m, t_{m+1}]
    let mut s = vec![0.0; big_i];
    for m in 0..big_i {
        let (a, b) = (t(m), t(m + 1));
        s[m] = if b > a {
            (f.eval(b) - f.eval(a)) / (b - a)
        } else {
            0.0
        };
    }
    let mut c = vec![0.0; big_i + 1];
    c[big_i] = s[big_i - 1];
    for i in 1..big_i {
        c[i] = (s[i - 1] - s[i]).max(0.0);
    }
    c[0] = (f.eval(1.0) - s[0]).max(0.0);

    let sum_at = |c: &[f64], x: f64| -> f64 {
        c.iter()
            .enumerate()
            .map(|(i, ci)| ci * g_i(i as u32, x))
            .sum()
    };
    // scale so the sum dominates f at every checkpoint
    let mut lambda: f64 = 1.0;
    let mut checkpoints: Vec<f64> = (1..=(x_max.floor() as u64)).map(|x| x as f64).collect();
    for m in 0..=big_i {
        checkpoints.push(t(m));
    }
    for &x in &checkpoints {
        let sx = sum_at(&c, x);
        if sx > 0.0 {
            lambda = lambda.max(f.eval(x) / sx);
        }
    }
    for ci in &mut c {
        *ci *= lambda;
    }
    for &x in &checkpoints {
        let sx = sum_at(&c, x);
        let fx = f.eval(x);
        if sx < fx * (1.0 - 1e-9) || sx > 4.0 * fx * (1.0 + 1e-9) {
            return Err(CableError::SandwichFailed { x, f: fx, sum: sx });
        }
    }
    Ok(c)
}

/// Optimal cost of serving a tree's terminals with the single rent-or-buy
/// function f_i: Σ_e d(e)·min{σ_i, β_{i−1}·|X(e)|} with X(e) the terminals
/// below e.
pub fn tree_opt_i(
    tree: &TreeInstance,
    schedule: &CableSchedule,
    i: usize,
) -> Result<f64, CableError> {
    if i == 0 || i > schedule.len() {
        return Err(CableError::BadIndex(i));
    }
    let below = tree.terminals_below().map_err(CableError::NotATree)?;
    Ok(tree
        .edges
        .iter()
        .zip(below)
        .map(|(&(_, _, len), x)| len * schedule.sigma(i).min(schedule.beta(i - 1) * x as f64))
        .sum())
}

/// Optimal tree cost under the full schedule: Σ_e d(e)·min_j{σ_j + β_j·|X(e)|}.
pub fn tree_opt_full(tree: &TreeInstance, schedule: &CableSchedule) -> Result<f64, CableError> {
    let below = tree.terminals_below().map_err(CableError::NotATree)?;
    Ok(tree
        .edges
        .iter()
        .zip(below)
        .map(|(&(_, _, len), x)| len * schedule.cheapest(x as f64))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn ct(sigma: f64, beta: f64) -> CableType {
        CableType { sigma, beta }
    }

    #[test]
    fn prune_examples() {
        let s = CableSchedule::prune(&[ct(1.0, 1.0)], 1.0).unwrap();
        assert_eq!(s.cables(), &[ct(1.0, 1.0)]);

        let s = CableSchedule::prune(&[ct(1.0, 1.0), ct(2.0, 0.9), ct(10.0, 0.05)], 1.0).unwrap();
        assert_eq!(s.cables(), &[ct(1.0, 1.0), ct(10.0, 0.05)]);

        // third cable passes both checks: 81 ≥ 27 and 0.005 ≤ 0.05/9 ≈ 0.00556
        let s = CableSchedule::prune(&[ct(1.0, 1.0), ct(9.0, 0.05), ct(81.0, 0.005)], 1.0).unwrap();
        assert_eq!(s.cables(), &[ct(1.0, 1.0), ct(9.0, 0.05), ct(81.0, 0.005)]);
        assert!(s.is_pruned());
    }

    #[test]
    fn prune_rejects_bad_input() {
        assert_eq!(CableSchedule::prune(&[], 1.0), Err(CableError::EmptyInput));
        assert!(matches!(
            CableSchedule::prune(&[ct(1.0, 1.0), ct(0.5, 0.5)], 1.0),
            Err(CableError::NonMonotone(_))
        ));
        assert!(matches!(
            CableSchedule::prune(&[ct(1.0, 1.0), ct(2.0, 1.5)], 1.0),
            Err(CableError::NonMonotone(_))
        ));
    }

    #[test]
    fn random_schedules_are_pruned() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for m in 1..=4 {
            assert!(CableSchedule::random(m, &mut rng).is_pruned());
        }
    }

    #[test]
    fn rob_sum_ratio_bounded_on_pruned() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = CableSchedule::random(4, &mut rng);
            for x in 1..=1024u32 {
                let r = s.rob_sum_ratio(x as f64);
                assert!(r <= 1.5 + 1e-9, "ratio {r} at x={x}");
            }
        }
    }

    fn line_metric(pts: &[f64]) -> OnlineMetric {
        let mut m = OnlineMetric::new();
        for (i, &x) in pts.iter().enumerate() {
            let row: Vec<f64> = pts[..i].iter().map(|&y| (x - y).abs()).collect();
            m.reveal_point(&row).unwrap();
        }
        m
    }

    #[test]
    fn cost_under_simple_functions() {
        // points at 0 and 2: one edge of length 2 carrying 3 terminals
        let m = line_metric(&[0.0, 2.0]);
        let plan = RoutePlan {
            routes: (0..3)
                .map(|_| PlannedRoute {
                    terminal: PointId(1),
                    segments: vec![RouteSegment {
                        cable: 0,
                        path: vec![PointId(1), PointId(0)],
                    }],
                })
                .collect(),
        };
        assert_eq!(cost_under(&m, &plan, CostFunction::Gi(1)).unwrap(), 4.0);
        assert_eq!(cost_under(&m, &plan, CostFunction::Gi(5)).unwrap(), 6.0);
    }

    #[test]
    fn cost_under_schedule() {
        let m = line_metric(&[0.0, 1.0]);
        let s = CableSchedule::new(vec![ct(1.0, 1.0)], 1.0).unwrap();
        let plan = RoutePlan {
            routes: (0..2)
                .map(|_| PlannedRoute {
                    terminal: PointId(1),
                    segments: vec![RouteSegment {
                        cable: 1,
                        path: vec![PointId(1), PointId(0)],
                    }],
                })
                .collect(),
        };
        let r = cost_report(&m, &plan, &s).unwrap();
        assert_eq!(r.fixed, 1.0);
        assert_eq!(r.incremental, 2.0);
        assert_eq!(r.total, 3.0);
    }

    #[test]
    fn highest_type_carries_the_demand() {
        // edge (0,1) used with cable 1 by one terminal and cable 2 by another:
        // both σ installed, both demands ride cable 2's β
        let m = line_metric(&[0.0, 1.0]);
        let s = CableSchedule::new(vec![ct(1.0, 1.0), ct(9.0, 0.1)], 1.0).unwrap();
        let plan = RoutePlan {
            routes: vec![
                PlannedRoute {
                    terminal: PointId(1),
                    segments: vec![RouteSegment {
                        cable: 1,
                        path: vec![PointId(1), PointId(0)],
                    }],
                },
                PlannedRoute {
                    terminal: PointId(1),
                    segments: vec![RouteSegment {
                        cable: 2,
                        path: vec![PointId(1), PointId(0)],
                    }],
                },
            ],
        };
        let r = cost_report(&m, &plan, &s).unwrap();
        assert_eq!(r.fixed, 10.0);
        assert!((r.incremental - 0.2).abs() < 1e-12);
    }

    #[test]
    fn plan_validation_catches_broken_chains() {
        let m = line_metric(&[0.0, 1.0, 3.0]);
        let plan = RoutePlan {
            routes: vec![PlannedRoute {
                terminal: PointId(2),
                segments: vec![
                    RouteSegment {
                        cable: 0,
                        path: vec![PointId(2), PointId(1)],
                    },
                    RouteSegment {
                        cable: 0,
                        path: vec![PointId(2), PointId(0)], // does not chain from 1
                    },
                ],
            }],
        };
        assert!(matches!(
            cost_under(&m, &plan, CostFunction::Gi(0)),
            Err(CableError::InvalidPlan(_))
        ));
    }

    #[test]
    fn decompose_gi_is_exact() {
        // f = g_3 tabulated
        let f =
            ConcaveTable::new((0..=32).map(|x| (x as f64, (x as f64).min(8.0))).collect()).unwrap();
        let c = decompose_concave(&f, 32.0).unwrap();
        for (i, &ci) in c.iter().enumerate() {
            if i == 3 {
                assert!((ci - 1.0).abs() < 1e-12, "c_3 = {ci}");
            } else {
                assert!(ci.abs() < 1e-12, "c_{i} = {ci}");
            }
        }
    }

    #[test]
    fn decompose_linear_concentrates_at_top() {
        let f = ConcaveTable::new(vec![(0.0, 0.0), (64.0, 64.0)]).unwrap();
        let c = decompose_concave(&f, 64.0).unwrap();
        assert!((c[6] - 1.0).abs() < 1e-12);
        assert!(c[..6].iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn decompose_capped_linear() {
        let f =
            ConcaveTable::new((0..=32).map(|x| (x as f64, (x as f64).min(5.0))).collect()).unwrap();
        let c = decompose_concave(&f, 32.0).unwrap();
        for x in 1..=32 {
            let x = x as f64;
            let s: f64 = c
                .iter()
                .enumerate()
                .map(|(i, ci)| ci * g_i(i as u32, x))
                .sum();
            assert!(s >= f.eval(x) * (1.0 - 1e-9));
            assert!(s <= 4.0 * f.eval(x) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn decompose_random_functions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let f = ConcaveTable::random(&mut rng, 1024.0);
            let c = decompose_concave(&f, 1024.0).unwrap();
            for x in 1..=1024 {
                let x = x as f64;
                let s: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(i, ci)| ci * g_i(i as u32, x))
                    .sum();
                assert!(s >= f.eval(x) * (1.0 - 1e-9), "x={x}");
                assert!(s <= 4.0 * f.eval(x) * (1.0 + 1e-9), "x={x}");
            }
        }
    }

    #[test]
    fn tree_opt_examples() {
        let s1 = CableSchedule::new(vec![ct(1.0, 1.0)], 1.0).unwrap();
        // star with one leaf, length 1
        let star1 = TreeInstance {
            root: PointId(0),
            edges: vec![(PointId(0), PointId(1), 1.0)],
            terminals: vec![PointId(1)],
        };
        assert_eq!(tree_opt_i(&star1, &s1, 1).unwrap(), 1.0);

        // star with 4 leaves, σ=2: each leaf edge min(2, 1·1) = 1
        let s2 = CableSchedule::new(vec![ct(2.0, 1.0)], 1.0).unwrap();
        let star4 = TreeInstance {
            root: PointId(0),
            edges: (1..=4).map(|i| (PointId(0), PointId(i), 1.0)).collect(),
            terminals: (1..=4).map(PointId).collect(),
        };
        assert_eq!(tree_opt_i(&star4, &s2, 1).unwrap(), 4.0);

        // path r—a—b with terminals a,b: min(σ,2β₀) + min(σ,β₀)
        let path = TreeInstance {
            root: PointId(0),
            edges: vec![(PointId(0), PointId(1), 1.0), (PointId(1), PointId(2), 1.0)],
            terminals: vec![PointId(1), PointId(2)],
        };
        assert_eq!(tree_opt_i(&path, &s2, 1).unwrap(), 2.0 + 1.0);
    }

    #[test]
    fn per_type_sum_vs_full() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let s = CableSchedule::random(3, &mut rng);
            // random caterpillar tree
            let n = 8;
            let mut edges = Vec::new();
            for i in 1..n {
                let parent = rng.gen_range(0..i);
                edges.push((PointId(parent), PointId(i), 0.5 + rng.gen::<f64>()));
            }
            let tree = TreeInstance {
                root: PointId(0),
                edges,
                terminals: (1..n).map(PointId).collect(),
            };
            let sum: f64 = (1..=s.len())
                .map(|i| tree_opt_i(&tree, &s, i).unwrap())
                .sum();
            let full = tree_opt_full(&tree, &s).unwrap();
            assert!(sum <= 1.5 * full + 1e-9, "sum {sum} vs full {full}");
        }
    }
}
