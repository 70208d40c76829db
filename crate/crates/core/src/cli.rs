//! Batch command-line front end.
//!
//! Every artifact carries the tool version and the resolved configuration.
//! JSON artifacts wrap their payload as `{tool, version, config, result}`;
//! CSV artifacts start with a `# webflow <version> config=<json>` line.
//!
//! Exit codes: 0 success, 1 failed internal check (or failed statistical
//! check under `--strict`), 2 usage error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::discreteweb::{rescale, sample_arrow_field, ArrowField, DoubleWebSample, LatticeWindow};
use crate::error::Error;
use crate::fullweb::{
    build_skeleton_sites, build_splice_enum, classify_point, continuum_window, grid_sites,
    verify_construction_equivalence, Construction, PointType,
};
use crate::pathspace::{PathSet, SpaceTimePoint};
use crate::rng::{domain, hash_words, replica_rng};
use crate::stats::{
    coalescing_density, coalescing_gap_cdf, coalescing_survival, convergence_curve, density_estimate,
    equivalence_statistic, ks_statistic, ks_threshold, type_frequency_report, walk_survival, StatReport,
};
use crate::stochflow::{rescale_flow, simulate_recorded, two_point_gap_sample, CovarianceSpec, Kernel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug, Serialize)]
#[command(name = "webflow", version, about = "Discrete full Brownian web and stochastic flow experiments")]
pub struct Cli {
    /// Master seed; every replica derives its own stream from it.
    #[arg(long, global = true, env = "WEBFLOW_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Exit 1 when a statistical check fails.
    #[arg(long, global = true)]
    pub strict: bool,
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Sample a walk web, trace forward and dual paths, scan for crossings.
    Web(WebArgs),
    /// Full-web constructions.
    #[command(subcommand)]
    Fullweb(FullwebCmd),
    /// Stochastic flow n-point motions.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Oracles and convergence statistics.
    #[command(subcommand)]
    Stats(StatsCmd),
}

#[derive(Args, Debug, Serialize)]
pub struct WebArgs {
    /// Lattice window as WIDTHxHEIGHT.
    #[arg(long, default_value = "256x256")]
    pub window: String,
    /// Number of forward and of dual paths.
    #[arg(long, default_value_t = 16)]
    pub paths: usize,
    /// Rescaling factor for the exported paths.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FullwebCmd {
    /// Build a full web from a grid of sites.
    Build(BuildArgs),
    /// Hausdorff distance between the two constructions.
    Equivalence(EquivalenceArgs),
    /// Classify random points by (m_in, m_out).
    Classify(ClassifyArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct BuildArgs {
    /// `skeleton` or `splice`.
    #[arg(long, default_value = "skeleton")]
    pub construction: String,
    /// Sites per side of the square grid of starting points.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[arg(long, default_value = "64x64")]
    pub window: String,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct EquivalenceArgs {
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    /// `random` fields, or the deterministic `plus` field.
    #[arg(long, default_value = "random")]
    pub field: String,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    /// Neighbourhood radius in lattice units.
    #[arg(long, default_value_t = 8.0)]
    pub eps: f64,
    #[arg(long, default_value = "4000x2000")]
    pub window: String,
}

#[derive(Args, Debug, Serialize)]
pub struct KernelArgs {
    /// `gaussian` or `cauchy`.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b0: f64,
}

impl KernelArgs {
    fn spec(&self) -> crate::Result<CovarianceSpec> {
        CovarianceSpec::new(self.kernel.parse::<Kernel>()?, self.sigma, self.b0)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// Number of points, started at 0, spacing, 2 spacing, ...
    #[arg(long, default_value_t = 2)]
    pub points: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// Keep every k-th time step.
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct RescaleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimulateArgs,
    /// Positions and spacing are rescaled units; the run covers
    /// `horizon / delta^2` unrescaled time.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct GapArgs {
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    /// Unrescaled step; chosen by a pilot run when omitted.
    #[arg(long)]
    pub h: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowCmd {
    /// Unrescaled trajectories as CSV.
    Simulate(SimulateArgs),
    /// Diffusively rescaled trajectories as CSV.
    Rescale(RescaleArgs),
    /// Rescaled two-point gap law against the coalescing oracle.
    Gap(GapArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SurvivalArgs {
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Also estimate from rescaled walks at this delta.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct DensityArgs {
    #[arg(long, default_value_t = 0.25)]
    pub t: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Half width of the counting interval in lattice units.
    #[arg(long, default_value_t = 80_000)]
    pub half_width: i64,
}

#[derive(Args, Debug, Serialize)]
pub struct CurveArgs {
    #[arg(long)]
    pub experiment: String,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: usize,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsCmd {
    /// Coalescing survival probability, optionally against walks.
    Survival(SurvivalArgs),
    /// Distinct-path density of the everywhere-started walk web.
    Density(DensityArgs),
    /// Statistic against threshold over a list of deltas.
    Curve(CurveArgs),
    /// Frequency of generic point types.
    Types(ClassifyArgs),
}

struct CliError {
    code: i32,
    msg: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_)
            | Error::Empty(_)
            | Error::UnknownExperiment(_)
            | Error::InvalidPointType { .. }
            | Error::Parity { .. }
            | Error::OutsideWindow { .. }
            | Error::Serde(_) => 2,
            _ => 1,
        };
        CliError { code, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError { code: 2, msg: msg.into() }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Artifact text plus whether its checks passed.
struct Artifact {
    text: String,
    ok: bool,
    /// A failed check that is an internal invariant rather than a statistic.
    hard: bool,
}

fn parse_window(s: &str) -> CliResult<LatticeWindow> {
    let (w, h) = s.split_once('x').ok_or_else(|| usage(format!("window `{s}` is not WIDTHxHEIGHT")))?;
    let w: i64 = w.parse().map_err(|_| usage(format!("bad window width `{w}`")))?;
    let h: i64 = h.parse().map_err(|_| usage(format!("bad window height `{h}`")))?;
    if w < 1 || h < 1 {
        return Err(usage(format!("window `{s}` is empty")));
    }
    Ok(LatticeWindow::from_size(w, h)?)
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

/// Append values from a JSON config file for every flag not given on the
/// command line.
fn merge_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strs.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("cannot read config `{path}`: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("config `{path}`: {e}")))?;
    let obj = value.as_object().ok_or_else(|| usage("config must be a JSON object"))?;
    let mut out = args;
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        let given = strs.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(scalar).collect();
                out.push(flag.into());
                out.push(joined.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(other).into());
            }
        }
    }
    Ok(out)
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn json_artifact(cli: &Cli, result: Value) -> CliResult<String> {
    let doc = json!({ "tool": "webflow", "version": VERSION, "config": cli, "result": result });
    serde_json::to_string_pretty(&doc).map_err(|e| CliError { code: 1, msg: e.to_string() })
}

fn csv_artifact(cli: &Cli, body: &str) -> CliResult<String> {
    let cfg = serde_json::to_string(cli).map_err(|e| CliError { code: 1, msg: e.to_string() })?;
    Ok(format!("# webflow {VERSION} config={cfg}\n{body}"))
}

/// CSV table with a header row; cells are written as given.
fn csv_table(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let internal = |e: csv::Error| CliError { code: 1, msg: e.to_string() };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(row).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError { code: 1, msg: e.to_string() })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn report_value(r: &StatReport) -> Value {
    serde_json::to_value(r).unwrap_or(Value::Null)
}

fn cmd_web(cli: &Cli, a: &WebArgs) -> CliResult<Artifact> {
    let w = parse_window(&a.window)?;
    positive("delta", a.delta)?;
    if a.paths == 0 {
        return Err(usage("--paths must be at least 1"));
    }
    let field = sample_arrow_field(w, cli.seed)?;
    let bottom: Vec<i64> = w.even_row(w.t_lo).collect();
    let top: Vec<i64> = w.odd_row(w.t_hi).collect();
    let spread =
        |row: &[i64], t: i64| -> Vec<(i64, i64)> { (0..a.paths).map(|k| (row[k * row.len() / a.paths], t)).collect() };
    let dw = DoubleWebSample::from_starts(field, &spread(&bottom, w.t_lo), &spread(&top, w.t_hi))?;
    let crossings = dw.crossing_count();
    let window = continuum_window(&w, a.delta);
    let fwd = dw.forward_paths.iter().map(|p| rescale(p, a.delta)).collect::<crate::Result<Vec<_>>>()?;
    let dual = dw.dual_paths.iter().map(|p| rescale(p, a.delta)).collect::<crate::Result<Vec<_>>>()?;
    let pairs = dw.forward_paths.len() + dw.dual_paths.len();
    let result = json!({
        "forward": PathSet::new(window, fwd).to_doc(),
        "dual": PathSet::new(window, dual).to_doc(),
        "noncrossing": { "pairs_checked": pairs * (pairs - 1) / 2, "crossings": crossings },
    });
    Ok(Artifact { text: json_artifact(cli, result)?, ok: crossings == 0, hard: true })
}

fn square_grid(w: &LatticeWindow, n: usize) -> Vec<(i64, i64)> {
    let width = (w.x_hi - w.x_lo + 1) as usize;
    let height = (w.t_hi - w.t_lo + 1) as usize;
    let mut sites = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x = w.x_lo + (i * width / n) as i64;
            let t = w.t_lo + (j * height / n) as i64;
            let t = if (x + t).rem_euclid(2) == 0 {
                t
            } else if t > w.t_lo {
                t - 1
            } else {
                t + 1
            };
            if w.contains(x, t) {
                sites.push((x, t));
            }
        }
    }
    sites.sort_unstable();
    sites.dedup();
    sites
}

fn cmd_build(cli: &Cli, a: &BuildArgs) -> CliResult<Artifact> {
    let construction: Construction = a.construction.parse().map_err(|e: Error| usage(e.to_string()))?;
    let w = parse_window(&a.window)?;
    positive("delta", a.delta)?;
    if a.grid == 0 {
        return Err(usage("--grid must be at least 1"));
    }
    let field = sample_arrow_field(w, cli.seed)?;
    let sites = square_grid(&w, a.grid);
    let web = match construction {
        Construction::Skeleton => build_skeleton_sites(&field, &sites, a.delta)?,
        Construction::SpliceEnum => build_splice_enum(&field, &sites, a.delta)?,
    };
    let crossings = web.crossing_count();
    let doc = serde_json::to_value(web.to_doc()).map_err(|e| CliError { code: 1, msg: e.to_string() })?;
    let result = json!({ "web": doc, "path_count": web.paths.len(), "crossings": crossings });
    Ok(Artifact { text: json_artifact(cli, result)?, ok: crossings == 0, hard: true })
}

fn cmd_equivalence(cli: &Cli, a: &EquivalenceArgs) -> CliResult<Artifact> {
    positive("delta", a.delta)?;
    if a.instances == 0 {
        return Err(usage("--instances must be at least 1"));
    }
    let distance = match a.field.as_str() {
        "random" => equivalence_statistic(a.delta, a.instances, cli.seed)?,
        "plus" => {
            let w = LatticeWindow::new(-8, 7, 0, 63)?;
            let dw = DoubleWebSample::full(ArrowField::constant(w, 1));
            let sites = grid_sites(&w, 1);
            verify_construction_equivalence(&dw, &sites, &sites, a.delta)?
        }
        other => return Err(usage(format!("unknown field `{other}` (random, plus)"))),
    };
    let threshold = 2.0 * a.delta;
    let pass = distance <= threshold;
    let row = vec![
        a.delta.to_string(),
        a.field.clone(),
        a.instances.to_string(),
        distance.to_string(),
        threshold.to_string(),
        pass.to_string(),
    ];
    let body = csv_table(&["delta", "field", "instances", "distance", "threshold", "pass"], &[row])?;
    Ok(Artifact { text: csv_artifact(cli, &body)?, ok: pass, hard: false })
}

fn classify_sample(a: &ClassifyArgs, seed: u64) -> CliResult<Vec<PointType>> {
    let w = parse_window(&a.window)?;
    positive("eps", a.eps)?;
    if a.points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    // Paths launch 2 e2 rows below and 2 e2 columns aside, and drift up to
    // 2 e2 more.
    let e2 = (a.eps * a.eps).round() as i64;
    let (mx, mt) = (4 * e2 + 4, 2 * e2 + 2);
    if w.x_hi - w.x_lo <= 2 * mx || w.t_hi - w.t_lo <= 2 * mt {
        return Err(usage("window too small for --eps"));
    }
    let dw = DoubleWebSample { field: sample_arrow_field(w, seed)?, forward_paths: Vec::new(), dual_paths: Vec::new() };
    let point_seed = hash_words(seed, &[domain::POINTS]);
    let types = (0..a.points as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replica_rng(point_seed, k);
            let x = rng.random_range((w.x_lo + mx)..(w.x_hi - mx)) as f64;
            let t = rng.random_range((w.t_lo + mt)..(w.t_hi - mt)) as f64;
            classify_point(&dw, SpaceTimePoint::new(x, t), a.eps)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(types)
}

fn type_counts(types: &[PointType]) -> Value {
    let mut counts = serde_json::Map::new();
    for pt in PointType::all() {
        let n = types.iter().filter(|p| **p == pt).count();
        counts.insert(format!("({},{})", pt.m_in, pt.m_out), json!(n));
    }
    Value::Object(counts)
}

fn cmd_classify(cli: &Cli, a: &ClassifyArgs) -> CliResult<Artifact> {
    let types = classify_sample(a, cli.seed)?;
    let report = type_frequency_report(&types, cli.seed)?;
    let result = json!({ "counts": type_counts(&types), "report": report_value(&report) });
    Ok(Artifact { text: json_artifact(cli, result)?, ok: report.pass, hard: false })
}

fn initial_points(n: usize, spacing: f64) -> CliResult<Vec<f64>> {
    if n == 0 {
        return Err(usage("--points must be at least 1"));
    }
    positive("spacing", spacing)?;
    Ok((0..n).map(|i| i as f64 * spacing).collect())
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<Artifact> {
    let spec = a.kernel.spec()?;
    let initial = initial_points(a.points, a.spacing)?;
    let traj = simulate_recorded(&spec, &initial, a.horizon, a.h, cli.seed, a.replicas, a.record_every)?;
    Ok(Artifact { text: csv_artifact(cli, &traj.to_csv())?, ok: true, hard: false })
}

fn cmd_rescale(cli: &Cli, a: &RescaleArgs) -> CliResult<Artifact> {
    positive("delta", a.delta)?;
    let s = &a.sim;
    let spec = s.kernel.spec()?;
    let initial: Vec<f64> = initial_points(s.points, s.spacing)?.iter().map(|x| x / a.delta).collect();
    let d2 = a.delta * a.delta;
    let traj = simulate_recorded(&spec, &initial, s.horizon / d2, s.h / d2, cli.seed, s.replicas, s.record_every)?;
    let traj = rescale_flow(&traj, a.delta)?;
    Ok(Artifact { text: csv_artifact(cli, &traj.to_csv())?, ok: true, hard: false })
}

fn cmd_gap(cli: &Cli, a: &GapArgs) -> CliResult<Artifact> {
    positive("d", a.d)?;
    positive("t", a.t)?;
    let spec = a.kernel.spec()?;
    let sample = two_point_gap_sample(&spec, 0.0, a.d, a.t, a.delta, a.h, cli.seed, a.replicas)?;
    let ks = ks_statistic(&sample.distribution, |y| coalescing_gap_cdf(a.d, a.t, y))?;
    let report = StatReport::new(
        "flow_gap_ks",
        ks,
        ks_threshold(a.replicas, a.delta),
        a.replicas,
        cli.seed,
        json!({ "h": sample.h, "violation_rate": sample.violation_rate, "atom_fraction": sample.distribution.atom_fraction() }),
    );
    let result = json!({ "distribution": sample.distribution, "report": report_value(&report) });
    Ok(Artifact { text: json_artifact(cli, result)?, ok: report.pass, hard: false })
}

fn cmd_survival(cli: &Cli, a: &SurvivalArgs) -> CliResult<Artifact> {
    positive("d", a.d)?;
    positive("t", a.t)?;
    let oracle = coalescing_survival(a.d, a.t);
    match a.delta {
        None => {
            let row = vec![a.d.to_string(), a.t.to_string(), format!("{oracle:.6}")];
            let body = csv_table(&["d", "t", "survival"], &[row])?;
            Ok(Artifact { text: csv_artifact(cli, &body)?, ok: true, hard: false })
        }
        Some(delta) => {
            positive("delta", delta)?;
            let p = walk_survival(a.d, a.t, delta, a.replicas, cli.seed)?;
            let err = (p - oracle).abs();
            let pass = err <= 0.01;
            let row = vec![
                a.d.to_string(),
                a.t.to_string(),
                format!("{oracle:.6}"),
                delta.to_string(),
                a.replicas.to_string(),
                format!("{p:.6}"),
                format!("{err:.6}"),
                "0.01".to_string(),
                pass.to_string(),
            ];
            let header = ["d", "t", "survival", "delta", "replicas", "empirical", "abs_error", "threshold", "pass"];
            let body = csv_table(&header, &[row])?;
            Ok(Artifact { text: csv_artifact(cli, &body)?, ok: pass, hard: false })
        }
    }
}

fn cmd_density(cli: &Cli, a: &DensityArgs) -> CliResult<Artifact> {
    positive("t", a.t)?;
    positive("delta", a.delta)?;
    if a.half_width < 1 {
        return Err(usage("--half-width must be at least 1"));
    }
    let rho = density_estimate(a.t, a.delta, a.half_width, cli.seed)?;
    let oracle = coalescing_density(a.t);
    let report = StatReport::new(
        "density_relative_error",
        (rho / oracle - 1.0).abs(),
        0.03,
        1,
        cli.seed,
        json!({ "estimate": rho, "oracle": oracle }),
    );
    Ok(Artifact { text: json_artifact(cli, report_value(&report))?, ok: report.pass, hard: false })
}

fn cmd_curve(cli: &Cli, a: &CurveArgs) -> CliResult<Artifact> {
    let rows = convergence_curve(&a.deltas, &a.experiment, a.replicas, cli.seed)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                a.experiment.clone(),
                r.delta.to_string(),
                r.statistic.to_string(),
                r.threshold.to_string(),
                (r.statistic <= r.threshold).to_string(),
                r.replicas.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    let header = ["experiment", "delta", "statistic", "threshold", "pass", "replicas", "seed"];
    let body = csv_table(&header, &table)?;
    let ok = rows.iter().all(|r| r.statistic <= r.threshold);
    Ok(Artifact { text: csv_artifact(cli, &body)?, ok, hard: false })
}

fn dispatch(cli: &Cli) -> CliResult<Artifact> {
    match &cli.command {
        Command::Web(a) => cmd_web(cli, a),
        Command::Fullweb(FullwebCmd::Build(a)) => cmd_build(cli, a),
        Command::Fullweb(FullwebCmd::Equivalence(a)) => cmd_equivalence(cli, a),
        Command::Fullweb(FullwebCmd::Classify(a)) => cmd_classify(cli, a),
        Command::Flow(FlowCmd::Simulate(a)) => cmd_simulate(cli, a),
        Command::Flow(FlowCmd::Rescale(a)) => cmd_rescale(cli, a),
        Command::Flow(FlowCmd::Gap(a)) => cmd_gap(cli, a),
        Command::Stats(StatsCmd::Survival(a)) => cmd_survival(cli, a),
        Command::Stats(StatsCmd::Density(a)) => cmd_density(cli, a),
        Command::Stats(StatsCmd::Curve(a)) => cmd_curve(cli, a),
        Command::Stats(StatsCmd::Types(a)) => cmd_classify(cli, a),
    }
}

fn execute(cli: &Cli) -> CliResult<Artifact> {
    match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError { code: 1, msg: e.to_string() })?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            return e.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let artifact = match execute(&cli) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            return e.code;
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &artifact.text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(artifact.text.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write artifact: {e}");
        return 1;
    }
    if !artifact.ok && (artifact.hard || cli.strict) {
        eprintln!("check failed");
        return 1;
    }
    0
}
