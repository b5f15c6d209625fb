//! CLI front end: instance generation, algorithm runs with tracing,
//! invariant checking on saved reports, and oracle/ratio tables.
//!
//! Exit codes: 0 = pass, 1 = invariant failure, 2 = usage or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use onbab::cables::{CableSchedule, CableType};
use onbab::harness::{self, Algorithm, KChoice, RunConfig, RunReport};
use onbab::metric::{generate, ArrivalProfile, GenParams, GeneratorKind, Instance, PointId, Role};
use onbab::oracles;

#[derive(Parser)]
#[command(
    name = "onbab",
    about = "online network design: LAST, spanners, buy-at-bulk",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run an algorithm on an instance and emit a report.
    Run(RunArgs),
    /// Re-verify a saved report against its instance.
    Check(CheckArgs),
    /// Algorithm-vs-baseline ratio table (CSV) on an oracle-sized instance.
    Compare(CompareArgs),
    /// Evaluate a single baseline oracle on an instance.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Euclidean,
    RandomMetric,
    CappedComb,
    Circle,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Rooted,
    SourcesSinks,
    Pairs,
}

#[derive(Clone, Copy, ValueEnum)]
enum KModeArg {
    Known,
    Unknown,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "euclidean")]
    kind: KindArg,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comb tooth spacing.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Comb distance cap.
    #[arg(long, default_value_t = 2.0)]
    cap: f64,
    #[arg(long, value_enum, default_value = "rooted")]
    profile: ProfileArg,
    #[arg(long, default_value_t = 0.25)]
    sink_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional cable schedule JSON to embed in the instance.
    #[arg(long)]
    cables: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    alg: Algorithm,
    #[arg(long)]
    instance: PathBuf,
    /// Cable schedule JSON ([{"sigma":..,"beta":..},..]); overrides the
    /// instance's schedule.
    #[arg(long)]
    cables: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replicate the run over this many consecutive seeds.
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "known")]
    kmode: KModeArg,
    /// Report destination (JSON; JSON lines when --replicas > 1).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// "all" or a comma-separated subset of check names.
    #[arg(long, default_value = "all")]
    check: String,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    cables: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "known")]
    kmode: KModeArg,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Mst,
    GreedySteiner,
    Steiner,
    SteinerForest,
    Rob,
    BruteForce,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    which: OracleKind,
    #[arg(long)]
    cables: Option<PathBuf>,
}

fn load_instance(path: &PathBuf) -> anyhow::Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    Ok(Instance::from_json(&text)?)
}

fn load_cables(path: &PathBuf) -> anyhow::Result<CableSchedule> {
    let text = std::fs::read_to_string(path)?;
    let cables: Vec<CableType> = serde_json::from_str(&text)?;
    Ok(CableSchedule::new(cables, 1.0).map_err(|e| anyhow::anyhow!("{e}"))?)
}

fn schedule_for(inst: &Instance, flag: &Option<PathBuf>) -> anyhow::Result<Option<CableSchedule>> {
    if let Some(p) = flag {
        return Ok(Some(load_cables(p)?));
    }
    if inst.cables.is_empty() {
        return Ok(None);
    }
    Ok(Some(
        CableSchedule::new(inst.cables.clone(), 1.0).map_err(|e| anyhow::anyhow!("{e}"))?,
    ))
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<ExitCode> {
    let kind = match a.kind {
        KindArg::Euclidean => GeneratorKind::Euclidean,
        KindArg::RandomMetric => GeneratorKind::RandomMetric,
        KindArg::CappedComb => GeneratorKind::CappedComb,
        KindArg::Circle => GeneratorKind::Circle,
    };
    let params = GenParams {
        n: a.n,
        dim: a.dim,
        eps: a.eps,
        cap: a.cap,
        profile: match a.profile {
            ProfileArg::Rooted => ArrivalProfile::Rooted,
            ProfileArg::SourcesSinks => ArrivalProfile::SourcesSinks,
            ProfileArg::Pairs => ArrivalProfile::Pairs,
        },
        sink_prob: a.sink_prob,
    };
    let mut inst = generate(kind, &params, a.seed)?;
    if let Some(p) = &a.cables {
        inst.cables = load_cables(p)?.cables().to_vec();
    }
    write_or_print(&a.out, &inst.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let inst = load_instance(&a.instance)?;
    let cfg = RunConfig {
        algorithm: a.alg,
        seed: a.seed,
        kmode: match a.kmode {
            KModeArg::Known => KChoice::Known,
            KModeArg::Unknown => KChoice::Unknown,
        },
        schedule: schedule_for(&inst, &a.cables)?,
    };
    if a.replicas <= 1 {
        let report = harness::run(&inst, &cfg)?;
        write_or_print(&a.out, &serde_json::to_string_pretty(&report)?)?;
    } else {
        let seeds: Vec<u64> = (0..a.replicas as u64).map(|i| a.seed + i).collect();
        let reports = harness::run_seeds(&inst, &cfg, &seeds, a.jobs)?;
        let lines: Vec<String> = reports
            .iter()
            .map(serde_json::to_string)
            .collect::<Result<_, _>>()?;
        write_or_print(&a.out, &lines.join("\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(a: CheckArgs) -> anyhow::Result<ExitCode> {
    let inst = load_instance(&a.instance)?;
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&a.report)?)?;
    let which: Vec<String> = if a.check == "all" {
        vec!["all".into()]
    } else {
        a.check.split(',').map(|s| s.trim().to_string()).collect()
    };
    let results = harness::check(&inst, &report, &which)?;
    if results.is_empty() {
        anyhow::bail!("no checks matched '{}'", a.check);
    }
    let mut all_pass = true;
    for r in &results {
        all_pass &= r.pass;
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        if r.detail.is_empty() {
            println!("{}: {verdict}", r.name);
        } else {
            println!("{}: {verdict} ({})", r.name, r.detail);
        }
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_compare(a: CompareArgs) -> anyhow::Result<ExitCode> {
    let inst = load_instance(&a.instance)?;
    let mut cfg = RunConfig::new(Algorithm::Last);
    cfg.seed = a.seed;
    cfg.kmode = match a.kmode {
        KModeArg::Known => KChoice::Known,
        KModeArg::Unknown => KChoice::Unknown,
    };
    cfg.schedule = schedule_for(&inst, &a.cables)?;
    let rows = harness::compare(&inst, &cfg)?;
    write_or_print(&a.out, harness::compare_csv(&rows).trim_end())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(a: OracleArgs) -> anyhow::Result<ExitCode> {
    let inst = load_instance(&a.instance)?;
    let metric = inst.build_metric()?;
    let all: Vec<PointId> = (0..metric.len()).map(PointId).collect();
    let order: Vec<PointId> = inst.arrivals.iter().map(|e| PointId(e.id)).collect();
    let rooted = || -> anyhow::Result<(PointId, Vec<PointId>)> {
        let first = inst
            .arrivals
            .first()
            .ok_or_else(|| anyhow::anyhow!("empty instance"))?;
        Ok((PointId(first.id), order[1..].to_vec()))
    };
    let value = match a.which {
        OracleKind::Mst => oracles::mst_cost(&metric, &all),
        OracleKind::GreedySteiner => oracles::greedy_online_steiner(&metric, &order),
        OracleKind::Steiner => oracles::exact_steiner(&metric, &order, &all)?,
        OracleKind::SteinerForest => {
            let pairs: Vec<(PointId, PointId)> = inst
                .arrivals
                .iter()
                .filter(|e| e.role == Role::Pair)
                .filter_map(|e| e.mate.map(|m| (PointId(e.id), PointId(m))))
                .filter(|&(s, t)| s.0 < t.0)
                .collect();
            if pairs.is_empty() {
                anyhow::bail!("steiner-forest oracle needs a pairs instance");
            }
            oracles::exact_steiner_forest(&metric, &pairs, &all)?
        }
        OracleKind::Rob => {
            let (root, terms) = rooted()?;
            let schedule = schedule_for(&inst, &a.cables)?
                .ok_or_else(|| anyhow::anyhow!("rob oracle needs --cables or embedded cables"))?;
            let sol = oracles::exact_single_sink_rob(
                &metric,
                &terms,
                root,
                schedule.sigma(1),
                schedule.beta(0),
            )?;
            sol.cost
        }
        OracleKind::BruteForce => {
            let (root, terms) = rooted()?;
            let schedule =
                schedule_for(&inst, &a.cables)?.unwrap_or_else(harness::default_schedule);
            oracles::brute_force_routing_opt(&metric, &terms, root, &schedule)?
        }
    };
    println!("{}", serde_json::json!({ "value": value }));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
