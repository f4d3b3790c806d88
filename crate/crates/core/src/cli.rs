//! Command line front end.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::aggregation::{bound_and_error, kmeans_aggregate};
use crate::branch::{solve_bnp, BnpConfig};
use crate::compact::{default_coef_bound, solve_compact_auto, CompactConfig};
use crate::error::{Error, Result};
use crate::geometry::{Instance, ResidualKind};
use crate::heuristics::diagnostics;
use crate::io::{self, Agreement, BothRecord, HyperplaneRecord, RunRecord};
use crate::objectives::{OrderedWeights, Preset};
use crate::oracle::brute_force_optimum;
use crate::solution::{MipResult, MipStatus, Solution};

const AGREEMENT_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Compact,
    Bp,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ResidualArg {
    Vertical,
    L1,
}

impl From<ResidualArg> for ResidualKind {
    fn from(r: ResidualArg) -> Self {
        match r {
            ResidualArg::Vertical => ResidualKind::Vertical,
            ResidualArg::L1 => ResidualKind::L1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyperfit", version, about = "Locate p hyperplanes minimizing an ordered median of residuals")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Brute-force optimum for tiny instances.
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// CSV file; `quandt.csv` and `boston.csv` fall back to the bundled sets.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    /// weber | center | kcentrum:K | centdian:RHO | file:PATH
    #[arg(long, default_value = "weber")]
    pub objective: String,
    #[arg(long, value_enum, default_value = "vertical")]
    pub residual: ResidualArg,
    #[arg(long, value_enum, default_value = "bp")]
    pub method: Method,
    /// Seconds per solver run.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also solve a k-means aggregate with K centroids and report the bound.
    #[arg(long)]
    pub aggregate: Option<usize>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Slope box for the compact model and the aggregation bound.
    #[arg(long)]
    pub coef_bound: Option<f64>,
    /// Heuristic pricing grid resolution.
    #[arg(long)]
    pub grid: Option<usize>,
    /// JSON destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value = "weber")]
    pub objective: String,
    #[arg(long, value_enum, default_value = "vertical")]
    pub residual: ResidualArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::BadParam(msg.into())
}

/// Parses an objective flag for `n` points.
pub fn parse_objective(text: &str, n: usize) -> Result<OrderedWeights> {
    let (head, arg) = match text.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (text, None),
    };
    let need = |what: &str| arg.ok_or_else(|| usage(format!("objective '{head}' needs :{what}")));
    match head.to_ascii_lowercase().as_str() {
        "weber" | "median" => OrderedWeights::preset(Preset::Weber, n),
        "center" => OrderedWeights::preset(Preset::Center, n),
        "kcentrum" => {
            let k = need("K")?.parse().map_err(|_| usage(format!("bad k-centrum size in '{text}'")))?;
            OrderedWeights::preset(Preset::KCentrum(k), n)
        }
        "centdian" => {
            let rho = need("RHO")?.parse().map_err(|_| usage(format!("bad centdian weight in '{text}'")))?;
            OrderedWeights::preset(Preset::Centdian(rho), n)
        }
        "file" => {
            let text = std::fs::read_to_string(need("PATH")?)?;
            let mut lambda = Vec::new();
            for tok in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                lambda.push(tok.parse::<f64>().map_err(|_| usage(format!("bad weight '{tok}'")))?);
            }
            if lambda.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: lambda.len() });
            }
            OrderedWeights::new(lambda)
        }
        _ => Err(usage(format!("unknown objective '{text}'"))),
    }
}

fn load_input(path: &Path) -> Result<Instance> {
    if !path.exists() {
        match path.file_name().and_then(|f| f.to_str()) {
            Some("quandt.csv") => return Ok(io::quandt()),
            Some("boston.csv") => return Ok(io::boston()),
            _ => {}
        }
    }
    io::load_csv(path)
}

fn exit_code(status: MipStatus) -> i32 {
    match status {
        MipStatus::Optimal => 0,
        MipStatus::TimeLimit | MipStatus::NodeLimit | MipStatus::NotProven => 2,
        MipStatus::Infeasible => 1,
    }
}

fn worse(a: MipStatus, b: MipStatus) -> MipStatus {
    if exit_code(a) >= exit_code(b) && a != MipStatus::Optimal {
        a
    } else {
        b
    }
}

struct Setup {
    inst: Instance,
    p: usize,
    w: OrderedWeights,
    kind: ResidualKind,
    limit: Option<Duration>,
    seed: u64,
    coef_bound: Option<f64>,
    grid: Option<usize>,
}

impl Setup {
    fn solve(&self, inst: &Instance, method: Method) -> Result<MipResult> {
        let w = self.w.resized(inst.n())?;
        match method {
            Method::Compact => {
                let cfg = CompactConfig { time_limit: self.limit, seed: self.seed, ..Default::default() };
                solve_compact_auto(inst, self.p, &w, self.kind, self.coef_bound, &cfg)
            }
            _ => {
                let mut cfg = BnpConfig { time_limit: self.limit, seed: self.seed, ..Default::default() };
                if let Some(g) = self.grid {
                    cfg.pricing.grid = g;
                }
                solve_bnp(inst, self.p, &w, self.kind, &cfg)
            }
        }
    }

    fn record(&self, method: Method, r: &MipResult) -> RunRecord {
        let checks = r.solution.as_ref().map(|s| diagnostics(s, &self.inst, &self.w, self.kind));
        let name = if method == Method::Compact { "compact" } else { "bp" };
        RunRecord::new(name, r, checks)
    }

    fn aggregate(&self, k: usize, method: Method, best: &Solution) -> Result<io::AggregationReportOut> {
        let b = self.coef_bound.unwrap_or_else(|| default_coef_bound(&self.inst));
        let map = kmeans_aggregate(&self.inst, k, self.seed, 100, self.kind, b)?;
        let mut status = MipStatus::Optimal;
        let report = bound_and_error(&map, &self.w, best, |agg| {
            let r = self.solve(agg, method)?;
            status = r.status;
            r.solution.ok_or_else(|| Error::BadParam("aggregated problem returned no solution".into()))
        })?;
        Ok(io::AggregationReportOut { status, report })
    }
}

fn write_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}")?;
        }
    }
    Ok(())
}

fn run_main(a: &RunArgs) -> Result<i32> {
    let input = a.input.as_deref().ok_or_else(|| usage("--input is required"))?;
    let p = a.p.ok_or_else(|| usage("--p is required"))?;
    if p == 0 {
        return Err(usage("--p must be at least 1"));
    }
    if let Some(t) = a.time_limit {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage("--time-limit must be positive"));
        }
    }
    if let Some(b) = a.coef_bound {
        if !(b > 0.0 && b.is_finite()) {
            return Err(usage("--coef-bound must be positive"));
        }
    }
    if a.aggregate == Some(0) {
        return Err(usage("--aggregate must be at least 1"));
    }
    let inst = load_input(input)?;
    let w = parse_objective(&a.objective, inst.n())?;
    let s = Setup {
        p,
        w,
        kind: a.residual.into(),
        limit: a.time_limit.map(Duration::from_secs_f64),
        seed: a.seed,
        coef_bound: a.coef_bound,
        grid: a.grid,
        inst,
    };
    info!("event=start n={} d={} p={} method={:?} residual={:?}", s.inst.n(), s.inst.d(), p, a.method, s.kind);

    let methods: &[Method] = match a.method {
        Method::Both => &[Method::Compact, Method::Bp],
        Method::Compact => &[Method::Compact],
        Method::Bp => &[Method::Bp],
    };
    let mut records = Vec::new();
    let mut results = Vec::new();
    for &m in methods {
        let r = s.solve(&s.inst, m)?;
        info!("event=solved method={:?} status={:?} objective={:?} nodes={}", m, r.status, r.objective(), r.nodes);
        let mut rec = s.record(m, &r);
        if let (Some(k), Some(sol)) = (a.aggregate, r.solution.as_ref()) {
            let agg = s.aggregate(k, m, sol)?;
            if agg.status != MipStatus::Optimal {
                rec.warnings.push(format!("aggregated solve ended with status {:?}", agg.status));
            }
            rec.aggregation = Some(agg.report);
        }
        records.push(rec);
        results.push(r);
    }

    let best = results
        .iter()
        .filter_map(|r| r.solution.as_ref())
        .min_by(|x, y| x.objective.total_cmp(&y.objective));
    if let (Some(path), Some(sol)) = (&a.plot, best) {
        io::emit_svg(sol, &s.inst, path)?;
    }

    let status = if records.len() == 2 {
        let bp = records.pop().unwrap();
        let compact = records.pop().unwrap();
        let abs_diff = match (compact.objective, bp.objective) {
            (Some(x), Some(y)) => (x - y).abs(),
            _ => f64::INFINITY,
        };
        let status = worse(compact.status, bp.status);
        let agreement = Agreement { abs_diff, agree: abs_diff <= AGREEMENT_TOL };
        if !agreement.agree {
            log::warn!("event=disagreement abs_diff={abs_diff}");
        }
        write_json(&BothRecord { status, compact, bp, agreement }, a.output.as_deref())?;
        status
    } else {
        let rec = records.pop().unwrap();
        let status = rec.status;
        write_json(&rec, a.output.as_deref())?;
        status
    };
    Ok(exit_code(status))
}

fn run_oracle(a: &OracleArgs) -> Result<i32> {
    let inst = load_input(&a.input)?;
    let w = parse_objective(&a.objective, inst.n())?;
    let bf = brute_force_optimum(&inst, a.p, &w, a.residual.into())?;
    let out = io::OracleRecord {
        objective: bf.objective,
        hyperplanes: bf.hyperplanes.iter().map(HyperplaneRecord::from).collect(),
        clusters: bf.clusters.clone(),
    };
    write_json(&out, a.output.as_deref())?;
    Ok(0)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let res = match &cli.command {
        Some(Command::Oracle(o)) => run_oracle(o),
        None => run_main(&cli.run),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
