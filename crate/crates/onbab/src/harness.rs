//! Execution harness: run any algorithm over an instance with full tracing,
//! re-check invariants against a saved report, and build ALG/OPT ratio tables
//! on oracle-sized instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bab::BabState;
use crate::cables::{self, CableSchedule, CableType, CostFunction};
use crate::graph::{self, EdgeSet};
use crate::last::LastState;
use crate::metric::{Instance, MetricError, OnlineMetric, PointId, Role};
use crate::mlast::{MlastRole, MlastState};
use crate::oblivious::{ObliviousState, Variant};
use crate::oracles;
use crate::spanner::{KMode, SpannerState};
use crate::strictly_greater;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Last,
    Mlast,
    Spanner,
    Bab,
    OblRand,
    OblDet,
    OblDet2,
}

impl std::str::FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s {
            "last" => Self::Last,
            "mlast" => Self::Mlast,
            "spanner" => Self::Spanner,
            "bab" => Self::Bab,
            "obl-rand" => Self::OblRand,
            "obl-det" => Self::OblDet,
            "obl-det2" => Self::OblDet2,
            other => return Err(HarnessError::UnknownAlgorithm(other.into())),
        })
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Last => "last",
            Self::Mlast => "mlast",
            Self::Spanner => "spanner",
            Self::Bab => "bab",
            Self::OblRand => "obl-rand",
            Self::OblDet => "obl-det",
            Self::OblDet2 => "obl-det2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KChoice {
    Known,
    Unknown,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),
    #[error("instance does not fit the algorithm: {0}")]
    InstanceRoleMismatch(String),
    #[error("instance too large for the oracle: {0}")]
    TooLargeForOracle(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("malformed report: {0}")]
    BadReport(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub kmode: KChoice,
    pub schedule: Option<CableSchedule>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            seed: 0,
            kmode: KChoice::Known,
            schedule: None,
        }
    }
}

/// Default 3-type schedule used when none is supplied: each step triples σ
/// and divides β by nine, so it is already pruned.
pub fn default_schedule() -> CableSchedule {
    CableSchedule::new(
        vec![
            CableType {
                sigma: 1.0,
                beta: 1.0,
            },
            CableType {
                sigma: 3.0,
                beta: 1.0 / 9.0,
            },
            CableType {
                sigma: 9.0,
                beta: 1.0 / 81.0,
            },
        ],
        1.0,
    )
    .unwrap()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub instance_digest: String,
    pub config: RunConfig,
    pub trace: Vec<Value>,
    pub summary: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub algorithm: String,
    pub alg_cost: f64,
    pub baseline: String,
    pub baseline_cost: f64,
    pub ratio: f64,
}

enum AlgState {
    Last(LastState),
    Mlast(MlastState),
    Spanner(SpannerState),
    Bab(BabState),
    Oblivious(ObliviousState),
}

impl AlgState {
    fn check_invariants(&self, metric: &OnlineMetric) -> Result<(), String> {
        match self {
            Self::Last(s) => s.check_invariants(metric),
            Self::Mlast(s) => s.check_invariants(metric),
            Self::Spanner(s) => s.check_invariants(metric),
            Self::Bab(s) => s.check_invariants(metric),
            Self::Oblivious(s) => s.check_invariants(metric),
        }
    }
}

fn edges_json(e: &EdgeSet) -> Value {
    json!(e.iter().map(|(u, v, l)| (u.0, v.0, l)).collect::<Vec<_>>())
}

fn edges_from(v: &Value) -> Result<EdgeSet, HarnessError> {
    let list: Vec<(usize, usize, f64)> =
        serde_json::from_value(v.clone()).map_err(|e| HarnessError::BadReport(e.to_string()))?;
    Ok(list
        .into_iter()
        .map(|(u, v, l)| (PointId(u), PointId(v), l))
        .collect())
}

fn require_rooted(inst: &Instance) -> Result<(), HarnessError> {
    if inst.arrivals.is_empty() {
        return Err(HarnessError::InstanceRoleMismatch("no arrivals".into()));
    }
    if inst
        .arrivals
        .iter()
        .any(|a| matches!(a.role, Role::Pair | Role::Source))
    {
        return Err(HarnessError::InstanceRoleMismatch(
            "rooted algorithm needs a sink-first terminal stream".into(),
        ));
    }
    if inst.arrivals[0].role != Role::Sink {
        return Err(HarnessError::InstanceRoleMismatch(
            "first arrival must be the root sink".into(),
        ));
    }
    Ok(())
}

fn spanner_pairs(inst: &Instance) -> Result<Vec<(PointId, PointId)>, HarnessError> {
    let mut pairs = Vec::new();
    for a in &inst.arrivals {
        if a.role != Role::Pair {
            return Err(HarnessError::InstanceRoleMismatch(
                "spanner needs a pairs instance".into(),
            ));
        }
        let mate = a.mate.ok_or_else(|| {
            HarnessError::InstanceRoleMismatch(format!("arrival {} has no mate", a.id))
        })?;
        if mate < a.id {
            pairs.push((PointId(mate), PointId(a.id)));
        }
    }
    Ok(pairs)
}

fn execute(
    inst: &Instance,
    cfg: &RunConfig,
    metric: &OnlineMetric,
) -> Result<(AlgState, Vec<Value>, Value), HarnessError> {
    fn to_vals<T: Serialize>(it: &[T]) -> Vec<Value> {
        it.iter()
            .map(|s| serde_json::to_value(s).unwrap())
            .collect()
    }
    match cfg.algorithm {
        Algorithm::Last => {
            require_rooted(inst)?;
            let mut s = LastState::new();
            s.set_root(PointId(inst.arrivals[0].id));
            for a in &inst.arrivals[1..] {
                s.insert_terminal(PointId(a.id), metric).unwrap();
            }
            let rep = s.stretch_and_cost_report(metric);
            let summary = json!({
                "report": rep,
                "edges": {
                    "t": edges_json(s.tree_edges()),
                    "a": edges_json(s.direct_edges()),
                    "h": edges_json(s.h_edges()),
                },
            });
            let trace = to_vals(s.trace());
            Ok((AlgState::Last(s), trace, summary))
        }
        Algorithm::Mlast => {
            if inst.arrivals.is_empty() || inst.arrivals[0].role != Role::Sink {
                return Err(HarnessError::InstanceRoleMismatch(
                    "mlast needs a sink-first source/sink stream".into(),
                ));
            }
            let mut s = MlastState::new();
            for a in &inst.arrivals {
                let role = match a.role {
                    Role::Sink => MlastRole::Sink,
                    Role::Source => MlastRole::Source,
                    _ => {
                        return Err(HarnessError::InstanceRoleMismatch(format!(
                            "arrival {} is neither source nor sink",
                            a.id
                        )))
                    }
                };
                s.insert(PointId(a.id), role, metric).unwrap();
            }
            let rep = s.charging_report(metric);
            let classes: Vec<(usize, Value)> = s
                .sources()
                .iter()
                .map(|&v| (v.0, serde_json::to_value(s.class_of(v).unwrap()).unwrap()))
                .collect();
            let summary = json!({
                "report": rep,
                "edges": { "f": edges_json(s.f_edges()), "a": edges_json(s.a_edges()) },
                "classes": classes,
            });
            let trace = to_vals(s.trace());
            Ok((AlgState::Mlast(s), trace, summary))
        }
        Algorithm::Spanner => {
            let pairs = spanner_pairs(inst)?;
            let mode = match cfg.kmode {
                KChoice::Known => KMode::Known(pairs.len().max(1)),
                KChoice::Unknown => KMode::Unknown,
            };
            let mut s = SpannerState::new(mode);
            for &(a, b) in &pairs {
                s.insert_pair(a, b, metric).unwrap();
            }
            let stats = s.stats(metric);
            let meta_stats: Vec<Value> = stats
                .per_scale
                .iter()
                .map(|ps| serde_json::to_value(ps).unwrap())
                .collect();
            let summary = json!({
                "stats": { "cost_h": stats.cost_h, "edge_count": stats.edge_count,
                           "max_pair_stretch": stats.max_pair_stretch, "per_scale": meta_stats },
                "lower_bound": s.steiner_forest_lower_bound(),
                "edges": { "h": edges_json(s.h()) },
                "pairs": pairs.iter().map(|&(a, b)| (a.0, b.0)).collect::<Vec<_>>(),
                "k": pairs.len(),
            });
            let trace = to_vals(s.trace());
            Ok((AlgState::Spanner(s), trace, summary))
        }
        Algorithm::Bab => {
            require_rooted(inst)?;
            let schedule = cfg.schedule.clone().unwrap_or_else(default_schedule);
            let mut s = BabState::new(schedule);
            s.set_root(PointId(inst.arrivals[0].id), metric);
            for a in &inst.arrivals[1..] {
                s.insert_terminal(PointId(a.id), metric).unwrap();
            }
            let id = s.algorithm_cost_identity(metric);
            let cost = if s.terminals().is_empty() {
                json!({"fixed": 0.0, "incremental": 0.0, "total": 0.0})
            } else {
                let r = cables::cost_report(metric, &s.route_plan(), s.schedule()).unwrap();
                json!({"fixed": r.fixed, "incremental": r.incremental, "total": r.total})
            };
            let layer_edges: Vec<Value> = (1..=s.schedule().len())
                .map(|i| json!([i, edges_json(&s.layer(i).h())]))
                .collect();
            let taus: Vec<(usize, usize)> = s
                .terminals()
                .iter()
                .map(|&v| (v.0, s.tau_of(v).unwrap()))
                .collect();
            let summary = json!({
                "identity": id,
                "cost": cost,
                "taus": taus,
                "layer_edges": layer_edges,
            });
            let trace = to_vals(s.trace());
            Ok((AlgState::Bab(s), trace, summary))
        }
        Algorithm::OblRand | Algorithm::OblDet | Algorithm::OblDet2 => {
            require_rooted(inst)?;
            let variant = match cfg.algorithm {
                Algorithm::OblRand => Variant::Rand,
                Algorithm::OblDet => Variant::Det,
                _ => Variant::DetImproved,
            };
            let k = inst.arrivals.len().saturating_sub(1).max(1);
            let mode = match cfg.kmode {
                KChoice::Known => KMode::Known(k),
                KChoice::Unknown => KMode::Unknown,
            };
            let mut s = ObliviousState::new(variant, mode, cfg.seed);
            s.set_root(PointId(inst.arrivals[0].id));
            for a in &inst.arrivals[1..] {
                s.insert_terminal(PointId(a.id), metric).unwrap();
            }
            let rows = s.cost_report(metric);
            let taus: Vec<(usize, usize)> = s
                .terminals()
                .iter()
                .map(|&v| (v.0, s.tau_of(v).unwrap()))
                .collect();
            let spanner_lengths: Vec<f64> = (1..=s.spanner_count())
                .map(|i| s.spanner(i).unwrap().h().total_length())
                .collect();
            let fallbacks: usize = s
                .trace()
                .iter()
                .flat_map(|st| &st.hops)
                .filter(|h| h.fallback)
                .count();
            let summary = json!({
                "rows": rows,
                "taus": taus,
                "spanner_lengths": spanner_lengths,
                "fallbacks": fallbacks,
            });
            let trace = to_vals(s.trace());
            Ok((AlgState::Oblivious(s), trace, summary))
        }
    }
}

/// Run an algorithm over an instance; the report is deterministic in
/// (instance, config).
pub fn run(inst: &Instance, cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    let metric = inst.build_metric()?;
    let (_, trace, summary) = execute(inst, cfg, &metric)?;
    Ok(RunReport {
        algorithm: cfg.algorithm,
        instance_digest: inst.digest()?,
        config: cfg.clone(),
        trace,
        summary,
    })
}

/// Replicated runs over several seeds, optionally in parallel.
pub fn run_seeds(
    inst: &Instance,
    base: &RunConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<RunReport>, HarnessError> {
    let work = |&seed: &u64| {
        let cfg = RunConfig {
            seed,
            ..base.clone()
        };
        run(inst, &cfg)
    };
    if jobs <= 1 {
        seeds.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| seeds.par_iter().map(work).collect())
    }
}

fn summary_f64(v: &Value, path: &[&str]) -> Result<f64, HarnessError> {
    let mut cur = v;
    for p in path {
        cur = cur
            .get(p)
            .ok_or_else(|| HarnessError::BadReport(format!("missing field {p}")))?;
    }
    cur.as_f64()
        .ok_or_else(|| HarnessError::BadReport(format!("{} not a number", path.join("."))))
}

/// Re-verify a saved report: reproducibility against a fresh run, plus the
/// hard invariants recomputed from the report's own edge lists (so a tampered
/// report fails) and from the reconstructed state.
pub fn check(
    inst: &Instance,
    report: &RunReport,
    which: &[String],
) -> Result<Vec<CheckResult>, HarnessError> {
    let metric = inst.build_metric()?;
    let mut results = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        results.push(CheckResult {
            name: name.into(),
            pass,
            detail,
        });
    };

    let digest = inst.digest()?;
    push(
        "digest",
        report.instance_digest == digest,
        format!("report {} vs instance {}", report.instance_digest, digest),
    );
    let (state, trace, summary) = execute(inst, &report.config, &metric)?;
    let fresh = RunReport {
        algorithm: report.config.algorithm,
        instance_digest: digest,
        config: report.config.clone(),
        trace,
        summary,
    };
    let same = serde_json::to_string(&fresh).unwrap() == serde_json::to_string(report).unwrap();
    push(
        "reproducible",
        same,
        if same {
            "byte-identical rerun".into()
        } else {
            "rerun differs from report".into()
        },
    );

    let n = metric.len();
    match report.algorithm {
        Algorithm::Last => {
            let h = edges_from(&report.summary["edges"]["h"])?;
            let t = edges_from(&report.summary["edges"]["t"])?;
            let a = edges_from(&report.summary["edges"]["a"])?;
            let root = PointId(inst.arrivals[0].id);
            let (dist, _) = graph::dijkstra(n, &[&h], &[root]);
            let worst = inst.arrivals[1..]
                .iter()
                .map(|ev| {
                    let v = PointId(ev.id);
                    dist[v.0] / metric.dist(v, root)
                })
                .fold(0.0, f64::max);
            push(
                "stretch≤7",
                worst <= 7.0 * (1.0 + crate::tol()),
                format!("max stretch {worst}"),
            );
            let (ca, ct) = (a.total_length(), t.total_length());
            push(
                "c(A)≤2c(T)",
                !strictly_greater(ca, 2.0 * ct),
                format!("c(A)={ca}, c(T)={ct}"),
            );
        }
        Algorithm::Mlast => {
            let f = edges_from(&report.summary["edges"]["f"])?;
            let a = edges_from(&report.summary["edges"]["a"])?;
            let sinks: Vec<PointId> = inst
                .arrivals
                .iter()
                .filter(|ev| ev.role == Role::Sink)
                .map(|ev| PointId(ev.id))
                .collect();
            let (dist, _) = graph::dijkstra(n, &[&f, &a], &sinks);
            let worst = inst
                .arrivals
                .iter()
                .filter(|ev| ev.role == Role::Source)
                .map(|ev| {
                    let v = PointId(ev.id);
                    let dm = metric.nearest_in(v, &sinks).unwrap().1;
                    dist[v.0] / dm
                })
                .fold(0.0, f64::max);
            push(
                "stretch≤3",
                worst <= 3.0 * (1.0 + crate::tol()),
                format!("max stretch {worst}"),
            );
        }
        Algorithm::Spanner => {
            let h = edges_from(&report.summary["edges"]["h"])?;
            let k = summary_f64(&report.summary, &["k"])?.max(1.0);
            let thr = 4.0 * k.log2().max(1.0);
            let pairs: Vec<(usize, usize)> =
                serde_json::from_value(report.summary["pairs"].clone())
                    .map_err(|e| HarnessError::BadReport(e.to_string()))?;
            let worst = pairs
                .iter()
                .map(|&(a, b)| {
                    graph::graph_dist(n, &[&h], PointId(a), PointId(b))
                        / metric.dist(PointId(a), PointId(b))
                })
                .fold(0.0, f64::max);
            push(
                "stretch≤4log2k",
                worst <= thr * (1.0 + crate::tol()),
                format!("max stretch {worst}, threshold {thr}"),
            );
            let girth_ok = report.summary["stats"]["per_scale"]
                .as_array()
                .map(|scales| {
                    scales
                        .iter()
                        .all(|ps| ps["girth"].as_u64().map_or(true, |g| g as f64 >= k.log2()))
                })
                .unwrap_or(false);
            push("girth≥log2k", girth_ok, "per meta-graph".into());
        }
        Algorithm::Bab => {
            let lhs = summary_f64(&report.summary, &["identity", "lhs"])?;
            let rhs = summary_f64(&report.summary, &["identity", "rhs_total"])?;
            push(
                "cost-accounting",
                !strictly_greater(lhs, rhs),
                format!("lhs {lhs} vs rhs {rhs}"),
            );
        }
        Algorithm::OblRand | Algorithm::OblDet | Algorithm::OblDet2 => {
            let rows = report.summary["rows"]
                .as_array()
                .ok_or_else(|| HarnessError::BadReport("missing rows".into()))?;
            let mut ok = true;
            let mut detail = String::from("all levels within bound");
            for r in rows {
                let (c, b, rent) = (
                    summary_f64(r, &["cost_i"])?,
                    summary_f64(r, &["buy_part"])?,
                    summary_f64(r, &["rent_part"])?,
                );
                if strictly_greater(c, b + rent) {
                    ok = false;
                    detail = format!("level {}: {c} > {b} + {rent}", r["i"]);
                    break;
                }
            }
            push("cost-decomposition", ok, detail);
        }
    }

    let inv = state.check_invariants(&metric);
    push(
        "invariants",
        inv.is_ok(),
        inv.err()
            .unwrap_or_else(|| "all module invariants hold".into()),
    );

    let wanted: Vec<CheckResult> = if which.is_empty() || which.iter().any(|w| w == "all") {
        results
    } else {
        results
            .into_iter()
            .filter(|r| which.iter().any(|w| w == &r.name))
            .collect()
    };
    Ok(wanted)
}

/// ALG/OPT (or ALG/lower-bound) rows for oracle-feasible instances.
pub fn compare(inst: &Instance, cfg: &RunConfig) -> Result<Vec<CompareRow>, HarnessError> {
    if inst.arrivals.is_empty() {
        return Ok(Vec::new());
    }
    let metric = inst.build_metric()?;
    let all: Vec<PointId> = (0..metric.len()).map(PointId).collect();
    let mut rows = Vec::new();
    let mut add = |alg: &str, cost: f64, base: &str, bcost: f64| {
        rows.push(CompareRow {
            algorithm: alg.into(),
            alg_cost: cost,
            baseline: base.into(),
            baseline_cost: bcost,
            ratio: if bcost > 0.0 {
                cost / bcost
            } else {
                f64::INFINITY
            },
        });
    };

    if inst.arrivals.iter().all(|a| a.role == Role::Pair) {
        let pairs = spanner_pairs(inst)?;
        let sf = oracles::exact_steiner_forest(&metric, &pairs, &all)
            .map_err(|e| HarnessError::TooLargeForOracle(e.to_string()))?;
        let mode = match cfg.kmode {
            KChoice::Known => KMode::Known(pairs.len().max(1)),
            KChoice::Unknown => KMode::Unknown,
        };
        let mut s = SpannerState::new(mode);
        for &(a, b) in &pairs {
            s.insert_pair(a, b, &metric).unwrap();
        }
        add("spanner", s.h().total_length(), "steiner-forest", sf);
        add(
            "spanner",
            s.h().total_length(),
            "ball-packing-lb",
            s.steiner_forest_lower_bound(),
        );
        return Ok(rows);
    }

    require_rooted(inst)?;
    let root = PointId(inst.arrivals[0].id);
    let terminals: Vec<PointId> = inst.arrivals[1..].iter().map(|a| PointId(a.id)).collect();
    if terminals.is_empty() {
        return Ok(Vec::new());
    }
    let mut pts = vec![root];
    pts.extend(&terminals);
    let steiner = oracles::exact_steiner(&metric, &pts, &all)
        .map_err(|e| HarnessError::TooLargeForOracle(e.to_string()))?;

    let mut last = LastState::new();
    last.set_root(root);
    for &t in &terminals {
        last.insert_terminal(t, &metric).unwrap();
    }
    let rep = last.stretch_and_cost_report(&metric);
    add("last", rep.cost_h, "mst", rep.mst_cost);
    add("last", rep.cost_h, "steiner", steiner);

    let schedule = cfg.schedule.clone().unwrap_or_else(default_schedule);
    if let Ok(opt) = oracles::brute_force_routing_opt(&metric, &terminals, root, &schedule) {
        let mut b = BabState::new(schedule.clone());
        b.set_root(root, &metric);
        for &t in &terminals {
            b.insert_terminal(t, &metric).unwrap();
        }
        let cost = cables::cost_report(&metric, &b.route_plan(), &schedule)
            .unwrap()
            .total;
        add("bab", cost, "brute-force", opt);
    }

    let mut o = ObliviousState::new(Variant::Rand, KMode::Known(terminals.len()), cfg.seed);
    o.set_root(root);
    for &t in &terminals {
        o.insert_terminal(t, &metric).unwrap();
    }
    let g0 = cables::cost_under(&metric, &o.route_plan(), CostFunction::Gi(0)).unwrap();
    add("obl-rand", g0, "steiner", steiner);
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("algorithm,alg_cost,baseline,baseline_cost,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.algorithm, r.alg_cost, r.baseline, r.baseline_cost, r.ratio
        ));
    }
    out
}
