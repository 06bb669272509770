//! Command-line front end.
//!
//! Every subcommand takes its parameters from an optional JSON config file,
//! overridden field by field by flags. Unknown keys are rejected. Outputs carry
//! a header with the crate version, a SHA-256 hash of the resolved
//! configuration and the seed, and are written through a temporary file that
//! is renamed into place.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bounds::{tail_envelope, verify, TailParams, VerifyOptions};
use crate::diagrams::{enumerate_patterns_capped, pair_count, pattern_count, DEFAULT_CAP};
use crate::dpre::{
    collision_law, compute_r_n, correlation_check, dpre_moment_with, simulate_partition, CriticalWindow,
};
use crate::graph::{gff_log_partition, WeightedGraph};
use crate::moment::{kernel_at_points_scaled, moment_gaussian};
use crate::special::{g_theta_detailed, g_theta_integral, DickmanParams};
use crate::stats::mean_and_error;
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for invalid input.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for a failed invariant.
pub const EXIT_VIOLATION: i32 = 1;

const MODULE_MAP: &str = "\
subcommand  module            computes
gtheta      special           Dickman renewal density G_θ(t) and its primitive
patterns    diagrams          collision patterns Col(h, m), counts and listings
gff         graph             Gaussian free field partition function via Kron reduction
moment      moment            truncated moments of Z(g_1) for Gaussian initial data
kernel      moment            moment kernel K_t(αz) at fixed starting points
verify      bounds            inequality ledger of the moment lower bound
tail        bounds            tail envelopes at level z, in ln ln z
dpre        dpre              directed polymer: R_N, partition functions, collisions, moments";

fn long_version() -> &'static str {
    Box::leak(format!("{VERSION}\n\n{MODULE_MAP}").into_boxed_str())
}

#[derive(Debug, Parser)]
#[command(name = "shf-lab", version, long_version = long_version(), about = "Moment laboratory for the critical 2d stochastic heat flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; the sample set does not depend on it
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Declares a parameter set whose fields are all optional, so that flags and
/// config entries can be merged before defaults apply.
macro_rules! params {
    ($name:ident { $($(#[$meta:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$meta])*
                #[arg(long)]
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            fn over(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field),)* }
            }
        }
    };
}

params!(GthetaParams { theta: f64, t: f64, rel_tol: f64 });

params!(PatternParams {
    h: usize,
    m: usize,
    /// List every pattern (refused above the enumeration cap)
    list: bool,
    cap: u128,
});

params!(GffParams {
    /// Graph as JSON, `{"n": .., "edges": [[u, v, c], ..], "boundary": [..]}`
    graph: String,
    /// File holding the graph JSON
    graph_file: PathBuf,
    /// Pinned vertices; defaults to the graph's boundary
    #[arg(value_delimiter = ',')]
    pinned: Vec<usize>,
});

params!(MomentParams { h: usize, theta: f64, m_max: usize, samples: usize });

params!(KernelParams {
    /// Starting points `x,y;x,y;..`
    z: Points,
    #[arg(value_delimiter = ',')]
    alphas: Vec<f64>,
    theta: f64,
    t: f64,
    m_max: usize,
    samples: usize,
});

params!(VerifyParams { h: usize, m_max: usize, theta: f64, instances: usize, samples: usize, delta: f64 });

params!(TailParamsArgs {
    c: f64,
    c0: f64,
    /// `ln ln z`
    loglogz: f64,
    /// The level `z` itself, if it fits in a double
    z: f64,
});

params!(DpreParams {
    #[arg(value_enum)]
    mode: DpreMode,
    n: usize,
    theta: f64,
    samples: usize,
    /// Walk groups for the collision estimator
    walk_samples: usize,
    h: usize,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpreMode {
    Rn,
    Partition,
    Collisions,
    Moment,
    Correlation,
}

/// Planar points parsed from `x,y;x,y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Points(pub Vec<[f64; 2]>);

impl FromStr for Points {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(';')
            .map(|p| {
                let xy: Vec<&str> = p.split(',').collect();
                match xy.as_slice() {
                    [x, y] => Ok([
                        x.trim().parse().map_err(|e| format!("{e}"))?,
                        y.trim().parse().map_err(|e| format!("{e}"))?,
                    ]),
                    _ => Err(format!("expected `x,y`, got `{p}`")),
                }
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Points)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate G_θ(t)
    Gtheta {
        #[command(flatten)]
        params: GthetaParams,
        #[command(flatten)]
        common: Common,
    },
    /// Count or list collision patterns
    Patterns {
        #[command(flatten)]
        params: PatternParams,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form GFF partition function of a weighted graph
    Gff {
        #[command(flatten)]
        params: GffParams,
        #[command(flatten)]
        common: Common,
    },
    /// Truncated moment for Gaussian initial data
    Moment {
        #[command(flatten)]
        params: MomentParams,
        #[command(flatten)]
        common: Common,
    },
    /// Moment kernel at fixed starting points
    Kernel {
        #[command(flatten)]
        params: KernelParams,
        #[command(flatten)]
        common: Common,
    },
    /// Run every inequality check into a ledger
    Verify {
        #[command(flatten)]
        params: VerifyParams,
        #[command(flatten)]
        common: Common,
    },
    /// Tail envelopes
    Tail {
        #[command(flatten)]
        params: TailParamsArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Directed polymer simulations
    Dpre {
        #[command(flatten)]
        params: DpreParams,
        #[command(flatten)]
        common: Common,
    },
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    subcommand: Option<String>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    format: Option<Format>,
    workers: Option<usize>,
    #[serde(default)]
    params: Value,
}

/// Fully resolved run settings.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub params: Value,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl RunConfig {
    /// SHA-256 over the canonical JSON of subcommand, parameters and seed.
    pub fn hash(&self) -> String {
        let canonical = json!({ "subcommand": self.subcommand, "params": self.params, "seed": self.seed });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// What a subcommand produced.
struct Report {
    summary: Value,
    table: Option<Table>,
    /// Failed invariants, one line each.
    violations: Vec<String>,
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Report {
    fn new(summary: impl Serialize) -> Result<Self> {
        Ok(Self { summary: serde_json::to_value(summary)?, table: None, violations: Vec::new() })
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Graph(_) | Error::TooLarge { .. } | Error::Resource(_) | Error::Json(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Run(other),
        }
    }
}

fn load_config(path: Option<&Path>) -> std::result::Result<ConfigFile, Failure> {
    let Some(path) = path else { return Ok(ConfigFile::default()) };
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
}

fn merge<P: for<'de> Deserialize<'de> + Default>(
    name: &str,
    flags: P,
    file: &ConfigFile,
    over: impl FnOnce(P, P) -> P,
) -> std::result::Result<P, Failure> {
    if let Some(sub) = &file.subcommand {
        if sub != name {
            return Err(Failure::Usage(format!("config is for `{sub}`, not `{name}`")));
        }
    }
    let base: P = if file.params.is_null() {
        P::default()
    } else {
        serde_json::from_value(file.params.clone()).map_err(|e| Failure::Usage(format!("config params: {e}")))?
    };
    Ok(over(flags, base))
}

fn required<T>(value: Option<T>, name: &str) -> std::result::Result<T, Failure> {
    value.ok_or_else(|| Failure::Usage(format!("missing parameter `{name}`")))
}

fn resolve<P: Serialize>(
    name: &str,
    params: &P,
    common: &Common,
    file: &ConfigFile,
    default_format: Format,
) -> RunConfig {
    RunConfig {
        subcommand: name.to_string(),
        params: serde_json::to_value(params).unwrap_or(Value::Null),
        seed: common.seed.or(file.seed).unwrap_or(0),
        format: common.format.or(file.format).unwrap_or(default_format),
        output: common.output.clone().or_else(|| file.output.clone()),
        workers: common.workers.or(file.workers),
    }
}

fn gtheta(p: &GthetaParams) -> std::result::Result<Report, Failure> {
    let theta = p.theta.unwrap_or(0.0);
    let t = required(p.t, "t")?;
    let params = DickmanParams::new(theta).with_rel_tol(p.rel_tol.unwrap_or(1e-10));
    let e = g_theta_detailed(&params, t)?;
    let value = e.value();
    let l = -t.ln();
    Ok(Report::new(json!({
        "theta": theta,
        "t": t,
        "value": value,
        "ln_value": e.ln_value,
        "rel_tol": params.rel_tol,
        "quad_error": e.quad_error,
        "tail_bound": e.tail_bound,
        "integral": g_theta_integral(&params, t)?,
        "value_t_log2": value * t * l * l,
    }))?)
}

fn patterns(p: &PatternParams) -> std::result::Result<Report, Failure> {
    let h = required(p.h, "h")?;
    let m = required(p.m, "m")?;
    if h < 2 {
        return Err(Failure::Usage(format!("patterns need h ≥ 2, got {h}")));
    }
    let count = pattern_count(h, m);
    let pairs = pair_count(h) as u128;
    let formula = if m == 0 { 1 } else { pairs * (pairs - 1).pow(m as u32 - 1) };
    let mut report = Report::new(json!({ "h": h, "m": m, "count": count, "formula": formula }))?;
    if p.list.unwrap_or(false) {
        let mut rows = Vec::new();
        for (k, pattern) in enumerate_patterns_capped(h, m, p.cap.unwrap_or(DEFAULT_CAP))?.enumerate() {
            let text: Vec<String> = pattern.pairs().iter().map(|q| format!("{}-{}", q.i, q.j)).collect();
            rows.push(vec![k.to_string(), text.join(" ")]);
        }
        if let Value::Object(map) = &mut report.summary {
            map.insert("patterns".into(), rows.iter().map(|r| Value::String(r[1].clone())).collect());
        }
        report.table = Some(Table { headers: vec!["index".into(), "pairs".into()], rows });
    }
    Ok(report)
}

fn gff(p: &GffParams) -> std::result::Result<Report, Failure> {
    let text = match (&p.graph, &p.graph_file) {
        (Some(g), None) => g.clone(),
        (None, Some(path)) => {
            std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?
        }
        _ => return Err(Failure::Usage("give exactly one of `graph` and `graph_file`".into())),
    };
    let graph = WeightedGraph::from_json(&text)?;
    let pinned = p.pinned.clone().unwrap_or_else(|| graph.boundary().to_vec());
    let closed = gff_log_partition(&graph, &pinned)?;
    Ok(Report::new(json!({ "vertices": graph.vertex_count(), "pinned": pinned, "result": closed }))?)
}

fn moment(p: &MomentParams, seed: u64) -> std::result::Result<Report, Failure> {
    let e = moment_gaussian(
        required(p.h, "h")?,
        p.theta.unwrap_or(0.0),
        p.m_max.unwrap_or(2),
        p.samples.unwrap_or(100_000),
        seed,
    )?;
    let rows = e
        .per_m
        .iter()
        .map(|c| {
            vec![
                c.m.to_string(),
                c.value.to_string(),
                c.std_error.to_string(),
                c.samples.to_string(),
                c.patterns.to_string(),
            ]
        })
        .collect();
    let mut report = Report::new(&e)?;
    report.table =
        Some(Table { headers: ["m", "value", "std_error", "samples", "patterns"].map(String::from).to_vec(), rows });
    Ok(report)
}

fn kernel(p: &KernelParams, seed: u64) -> std::result::Result<Report, Failure> {
    let z = required(p.z.clone(), "z")?.0;
    let alphas = p.alphas.clone().unwrap_or_else(|| vec![1.0]);
    let estimates = kernel_at_points_scaled(
        &z,
        &alphas,
        p.theta.unwrap_or(0.0),
        p.t.unwrap_or(1.0),
        p.m_max.unwrap_or(2),
        p.samples.unwrap_or(100_000),
        seed,
    )?;
    let rows = alphas
        .iter()
        .zip(&estimates)
        .map(|(a, e)| vec![a.to_string(), e.value.to_string(), e.std_error.to_string()])
        .collect();
    let summary: Vec<Value> =
        alphas.iter().zip(&estimates).map(|(a, e)| json!({ "alpha": a, "estimate": e })).collect();
    let mut report = Report::new(summary)?;
    report.table = Some(Table { headers: ["alpha", "value", "std_error"].map(String::from).to_vec(), rows });
    Ok(report)
}

fn run_verify(p: &VerifyParams, seed: u64) -> std::result::Result<Report, Failure> {
    let d = VerifyOptions::default();
    let opts = VerifyOptions {
        h: p.h.unwrap_or(d.h),
        m_max: p.m_max.unwrap_or(d.m_max),
        theta: p.theta.unwrap_or(d.theta),
        instances: p.instances.unwrap_or(d.instances),
        samples: p.samples.unwrap_or(d.samples),
        delta: p.delta.unwrap_or(d.delta),
        seed,
    };
    let ledger = verify(&opts)?;
    let violations = ledger
        .violations(3.0)
        .iter()
        .map(|r| format!("{},{},{},{},{},{}", r.check_name, r.params, r.lhs, r.rhs, r.margin, r.sigma))
        .collect();
    let rows = ledger
        .rows()
        .iter()
        .map(|r| {
            vec![
                r.check_name.clone(),
                r.params.clone(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.margin.to_string(),
                r.sigma.to_string(),
            ]
        })
        .collect();
    let mut report = Report::new(json!({ "options": opts, "rows": ledger.rows() }))?;
    report.table = Some(Table {
        headers: ["check_name", "params", "lhs", "rhs", "margin", "sigma"].map(String::from).to_vec(),
        rows,
    });
    report.violations = violations;
    Ok(report)
}

fn tail(p: &TailParamsArgs) -> std::result::Result<Report, Failure> {
    let (c, c0) = (p.c.unwrap_or(1.0), p.c0.unwrap_or(1.0));
    let params = match (p.loglogz, p.z) {
        (Some(l), None) => TailParams::new(c, c0, l)?,
        (None, Some(z)) => TailParams::from_level(c, c0, z)?,
        _ => return Err(Failure::Usage("give exactly one of `loglogz` and `z`".into())),
    };
    let env = tail_envelope(&params)?;
    let mut report = Report::new(json!({ "params": params, "envelope": env, "nested": env.nested() }))?;
    if !env.nested() {
        report
            .violations
            .push(format!("tail_nesting,loglogz={},{},{}", env.l, env.lower_log_magnitude, env.upper_exponent));
    }
    Ok(report)
}

fn dpre(p: &DpreParams, seed: u64) -> std::result::Result<Report, Failure> {
    let n = p.n.unwrap_or(1000);
    let samples = p.samples.unwrap_or(1000);
    let mut report;
    match p.mode.unwrap_or(DpreMode::Rn) {
        DpreMode::Rn => {
            let r = compute_r_n(n as u64)?;
            report = Report::new(json!({ "n": n, "r_n": r, "ratio": r / ((n as f64).ln() / std::f64::consts::PI) }))?;
        }
        DpreMode::Partition => {
            let window = CriticalWindow::new(n, p.theta.unwrap_or(0.0))?;
            let zs = simulate_partition(&window, samples, seed)?;
            let values: Vec<f64> = zs.iter().map(|s| s.partition_value).collect();
            let squares: Vec<f64> = values.iter().map(|z| z * z).collect();
            report = Report::new(json!({
                "window": window,
                "mean": mean_and_error(&values),
                "second_moment": mean_and_error(&squares),
                "samples": zs.len(),
            }))?;
            let rows = zs
                .iter()
                .map(|s| vec![s.seed.to_string(), s.n_steps.to_string(), s.partition_value.to_string()])
                .collect();
            report.table =
                Some(Table { headers: ["seed", "n_steps", "partition_value"].map(String::from).to_vec(), rows });
        }
        DpreMode::Collisions => {
            let law = collision_law(n, samples, seed)?;
            report = Report::new(json!({
                "n": n,
                "ks_distance": law.ks_distance,
                "ks_distance_smoothed": law.ks_distance_smoothed,
                "mean": law.mean,
                "samples": law.scaled.len(),
            }))?;
            let rows = law.scaled.iter().enumerate().map(|(k, x)| vec![k.to_string(), x.to_string()]).collect();
            report.table = Some(Table { headers: vec!["index".into(), "scaled_collisions".into()], rows });
        }
        DpreMode::Moment => {
            let window = CriticalWindow::new(n, p.theta.unwrap_or(0.0))?;
            let h = p.h.unwrap_or(2);
            let m = dpre_moment_with(h, &window, samples, p.walk_samples.unwrap_or(samples), seed)?;
            report = Report::new(
                json!({ "moment": m, "difference_sigmas": m.difference_sigmas(), "diverging": m.diverging() }),
            )?;
            if !m.agree_within(3.0) {
                report.violations.push(format!(
                    "dpre_cross_check,h={h};n={n},{},{},{},{}",
                    m.direct.value,
                    m.collision.value,
                    m.direct.value - m.collision.value,
                    m.direct.std_error.hypot(m.collision.std_error)
                ));
            }
        }
        DpreMode::Correlation => {
            let window = CriticalWindow::new(n, p.theta.unwrap_or(0.0))?;
            let c = correlation_check(&window, p.walk_samples.unwrap_or(samples), seed)?;
            report = Report::new(json!({ "window": window, "check": c, "holds": c.holds_within(3.0) }))?;
            if !c.holds_within(3.0) {
                report.violations.push(format!("dpre_correlation,n={n},{},{}", c.triple.value, c.product.value));
            }
        }
    }
    Ok(report)
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(config: &RunConfig, report: &Report) -> Result<Vec<u8>> {
    let header = json!({ "version": VERSION, "config_hash": config.hash(), "seed": config.seed, "subcommand": config.subcommand });
    let mut out = Vec::new();
    match config.format {
        Format::Json => {
            let doc = json!({ "header": header, "params": config.params, "result": report.summary });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.push(b'\n');
        }
        Format::Csv => {
            writeln!(out, "# version={VERSION}")?;
            writeln!(out, "# config_hash={}", config.hash())?;
            writeln!(out, "# seed={}", config.seed)?;
            writeln!(out, "# subcommand={}", config.subcommand)?;
            match &report.table {
                Some(t) => {
                    writeln!(out, "{}", t.headers.join(","))?;
                    for row in &t.rows {
                        let cells: Vec<String> = row.iter().map(|c| csv_escape(c)).collect();
                        writeln!(out, "{}", cells.join(","))?;
                    }
                }
                None => {
                    writeln!(out, "key,value")?;
                    flatten(&report.summary, "", &mut |k, v| writeln!(out, "{},{}", csv_escape(k), csv_escape(v)))?;
                }
            }
        }
    }
    Ok(out)
}

fn flatten(
    value: &Value,
    prefix: &str,
    emit: &mut dyn FnMut(&str, &str) -> std::io::Result<()>,
) -> std::io::Result<()> {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(v, &key, emit)?;
            }
            Ok(())
        }
        Value::Array(items) => {
            for (k, v) in items.iter().enumerate() {
                flatten(v, &format!("{prefix}.{k}"), emit)?;
            }
            Ok(())
        }
        Value::String(s) => emit(prefix, s),
        other => emit(prefix, &other.to_string()),
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn dispatch(command: Command) -> std::result::Result<(RunConfig, Report), Failure> {
    macro_rules! prepare {
        ($name:literal, $params:expr, $common:expr, $format:expr) => {{
            let file = load_config($common.config.as_deref())?;
            let merged = merge($name, $params, &file, |a, b| a.over(b))?;
            let config = resolve($name, &merged, &$common, &file, $format);
            (merged, config)
        }};
    }
    let (config, job): (RunConfig, Box<dyn FnOnce(u64) -> std::result::Result<Report, Failure> + Send>) = match command
    {
        Command::Gtheta { params, common } => {
            let (p, c) = prepare!("gtheta", params, common, Format::Json);
            (c, Box::new(move |_| gtheta(&p)))
        }
        Command::Patterns { params, common } => {
            let (p, c) = prepare!("patterns", params, common, Format::Json);
            (c, Box::new(move |_| patterns(&p)))
        }
        Command::Gff { params, common } => {
            let (p, c) = prepare!("gff", params, common, Format::Json);
            (c, Box::new(move |_| gff(&p)))
        }
        Command::Moment { params, common } => {
            let (p, c) = prepare!("moment", params, common, Format::Json);
            (c, Box::new(move |seed| moment(&p, seed)))
        }
        Command::Kernel { params, common } => {
            let (p, c) = prepare!("kernel", params, common, Format::Json);
            (c, Box::new(move |seed| kernel(&p, seed)))
        }
        Command::Verify { params, common } => {
            let (p, c) = prepare!("verify", params, common, Format::Csv);
            (c, Box::new(move |seed| run_verify(&p, seed)))
        }
        Command::Tail { params, common } => {
            let (p, c) = prepare!("tail", params, common, Format::Json);
            (c, Box::new(move |_| tail(&p)))
        }
        Command::Dpre { params, common } => {
            let (p, c) = prepare!("dpre", params, common, Format::Json);
            (c, Box::new(move |seed| dpre(&p, seed)))
        }
    };
    let seed = config.seed;
    let report = match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Failure::Usage(format!("worker pool: {e}")))?;
            pool.install(|| job(seed))?
        }
        None => job(seed)?,
    };
    Ok((config, report))
}

/// Runs the command line `args` (program name first) and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((config, report)) => {
            let bytes = match render(&config, &report) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_VIOLATION;
                }
            };
            let written = match &config.output {
                Some(path) => write_atomic(path, &bytes),
                None => std::io::stdout().write_all(&bytes).map_err(Error::from),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return EXIT_VIOLATION;
            }
            if report.violations.is_empty() {
                0
            } else {
                for v in &report.violations {
                    eprintln!("invariant violated: {v}");
                }
                EXIT_VIOLATION
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_VIOLATION
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_string(args: &[&str]) -> (i32, String) {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut full = vec!["shf-lab"];
        full.extend_from_slice(args);
        let out_str = out.to_str().unwrap().to_string();
        full.extend_from_slice(&["--output", &out_str]);
        let code = run(full);
        (code, std::fs::read_to_string(&out).unwrap_or_default())
    }

    #[test]
    fn first_moment_is_one_half() {
        let (code, text) = run_to_string(&["moment", "--h", "1"]);
        assert_eq!(code, 0);
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["result"]["value"], json!(0.5));
        assert_eq!(doc["header"]["version"], json!(VERSION));
        assert_eq!(doc["header"]["config_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn gtheta_near_zero() {
        let (code, text) = run_to_string(&["gtheta", "--theta", "0", "--t", "1e-6"]);
        assert_eq!(code, 0);
        let doc: Value = serde_json::from_str(&text).unwrap();
        let scaled = doc["result"]["value_t_log2"].as_f64().unwrap();
        assert!((scaled - 1.0).abs() < 0.1, "{scaled}");
        assert!(doc["result"]["rel_tol"].is_number());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["shf-lab", "moment", "--bogus", "1"]), EXIT_USAGE);
        assert_eq!(run(["shf-lab", "gtheta", "--t", "2"]), EXIT_USAGE);
        assert_eq!(run(["shf-lab", "gtheta"]), EXIT_USAGE);
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"params": {"h": 1, "nope": 2}}"#).unwrap();
        assert_eq!(run(["shf-lab", "moment", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
        std::fs::write(&cfg, r#"{"seed": 1, "colour": "red"}"#).unwrap();
        assert_eq!(run(["shf-lab", "moment", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
    }

    #[test]
    fn flags_override_config_and_runs_reproduce() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"seed": 3, "params": {"h": 2, "m_max": 1, "samples": 500, "theta": 1.0}}"#).unwrap();
        let c = cfg.to_str().unwrap();
        let (code, a) = run_to_string(&["moment", "--config", c, "--theta", "0"]);
        assert_eq!(code, 0);
        let doc: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(doc["params"]["theta"], json!(0.0));
        assert_eq!(doc["params"]["h"], json!(2));
        assert_eq!(doc["header"]["seed"], json!(3));
        let (_, b) = run_to_string(&["moment", "--config", c, "--theta", "0", "--workers", "1"]);
        assert_eq!(a, b);
    }

    #[test]
    fn verify_writes_csv_ledger() {
        let (code, text) = run_to_string(&[
            "verify",
            "--h",
            "3",
            "--m-max",
            "2",
            "--instances",
            "50",
            "--samples",
            "1000",
            "--seed",
            "7",
        ]);
        assert_eq!(code, 0, "{text}");
        assert!(text.starts_with("# version="));
        assert!(text.contains("\ncheck_name,params,lhs,rhs,margin,sigma\n"));
        assert!(text.contains("treebound,"));
    }

    #[test]
    fn points_parse() {
        assert_eq!("0,0;1.5,-2".parse::<Points>().unwrap(), Points(vec![[0.0, 0.0], [1.5, -2.0]]));
        assert!("1,2,3".parse::<Points>().is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        std::fs::write(&path, "old").unwrap();
        write_atomic(&path, b"new").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
