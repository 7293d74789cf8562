//! The `df-lab` command-line front end.
//!
//! Exit codes: 0 success, 1 refuted or violated, 2 input error, 3 sampling
//! or numerical failure (including inconclusive certification).

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bounds::{i0_cpn, i0_key_bound, i0_lower_bound};
use crate::certify::{
    certify_with_shrink, estimate_index, estimate_oka_index, ohsawa_sibony_check, verify_sandwich, IndexStatus,
    Verdict,
};
use crate::fit::log_grid;
use crate::geometry::{boundary_sample, DomainSpec};
use crate::levi::{estimate_s, levi_map, weak_set_refined};
use crate::monge_ampere::{decay_fit_pointwise, f_interior, flux_boundary};
use crate::report::{emit, num, Report, Table};
use crate::{par, Error, Result};

pub const SEED_ENV: &str = "DF_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "df-lab", version, about = "Plurisubharmonicity certification toolkit")]
struct Cli {
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Domain spec: a JSON file path or an inline JSON object.
    #[arg(long)]
    spec: Option<String>,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// RNG seed; overrides the domain file and DF_LAB_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Levi eigenvalues and ranks over boundary samples, with S(r).
    LeviMap {
        #[command(flatten)]
        common: Common,
        /// Boundary samples (default: the domain file's boundary count).
        #[arg(long)]
        count: Option<usize>,
        /// Low-eigenvalue samples refined towards the weak set.
        #[arg(long, default_value_t = 16)]
        refine: usize,
    },
    /// Certifies a Diederich–Fornæss exponent on the collar.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eta: f64,
        /// Collar band `t_min:t_max` of −ρ (default: the domain file's collar).
        #[arg(long)]
        collar: Option<String>,
        /// Shrink rounds applied to a refutation.
        #[arg(long, default_value_t = 3)]
        rounds: usize,
    },
    /// Bisection for the Diederich–Fornæss index.
    Index {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
    },
    /// Oka index estimate.
    Oka {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form lower bounds for the index.
    Bounds {
        #[arg(long = "K")]
        k: Option<f64>,
        #[arg(long = "S")]
        s: Option<f64>,
        /// Use the projective-space constant K = 1/12.
        #[arg(long)]
        cpn: bool,
        #[arg(long)]
        k1: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-sided Levi sandwich below the weak set.
    Sandwich {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        k: f64,
    },
    /// Oka-type inequalities for given K, c and η.
    OsCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        k: f64,
        #[arg(long = "c")]
        c: f64,
        #[arg(long)]
        eta: f64,
        /// Index lower bound; the check is skipped when η ≥ i0.
        #[arg(long)]
        i0: Option<f64>,
    },
    /// Monge–Ampère mass of the modified defining function.
    MaMass {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        eps0: Option<f64>,
    },
    /// Log-log decay of the flux density along the inward normal.
    Decay {
        #[command(flatten)]
        common: Common,
        /// Boundary point `x1,y1,…`.
        #[arg(long)]
        point: String,
        #[arg(long)]
        eta: f64,
        /// Log-spaced grid `a:b:k`.
        #[arg(long)]
        tgrid: String,
    },
    /// Interior mass against boundary flux at several levels.
    StokesCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Comma-separated levels.
        #[arg(long, default_value = "0.02,0.05,0.1")]
        t: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::LeviMap { .. } => "levi-map",
            Command::Certify { .. } => "certify",
            Command::Index { .. } => "index",
            Command::Oka { .. } => "oka",
            Command::Bounds { .. } => "bounds",
            Command::Sandwich { .. } => "sandwich",
            Command::OsCheck { .. } => "os-check",
            Command::MaMass { .. } => "ma-mass",
            Command::Decay { .. } => "decay",
            Command::StokesCheck { .. } => "stokes-check",
        }
    }

    fn common(&self) -> Option<&Common> {
        match self {
            Command::LeviMap { common, .. }
            | Command::Certify { common, .. }
            | Command::Index { common, .. }
            | Command::Oka { common }
            | Command::Sandwich { common, .. }
            | Command::OsCheck { common, .. }
            | Command::MaMass { common, .. }
            | Command::Decay { common, .. }
            | Command::StokesCheck { common, .. } => Some(common),
            Command::Bounds { .. } => None,
        }
    }

    fn has_table(&self) -> bool {
        matches!(
            self,
            Command::LeviMap { .. } | Command::MaMass { .. } | Command::Decay { .. } | Command::StokesCheck { .. }
        )
    }
}

/// Outcome of one subcommand before it is written out.
struct Outcome {
    results: Value,
    table: Option<Table>,
    warnings: Vec<String>,
    code: i32,
}

impl Outcome {
    fn ok(results: Value) -> Self {
        Outcome {
            results,
            table: None,
            warnings: Vec::new(),
            code: 0,
        }
    }
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        par::init_threads(t);
    }
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn seed_override(cli_seed: Option<u64>) -> Result<Option<u64>> {
    if cli_seed.is_some() {
        return Ok(cli_seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::InvalidParameter(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Loads `--spec` from a file or, when it starts with `{`, from inline JSON.
pub fn load_spec(arg: &str) -> Result<DomainSpec> {
    if arg.trim_start().starts_with('{') {
        DomainSpec::from_json(arg)
    } else {
        DomainSpec::load(arg)
    }
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidParameter(format!("{what} must look like a:b, got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let b = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    Ok((a, b))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("{what}: cannot parse {p:?} as a number")))
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidParameter(format!("--tgrid must look like a:b:k, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let b = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    let k = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
    log_grid(a, b, k)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("--eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

fn check_positive(v: f64, name: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn bounds_value(k: Option<f64>, s: Option<f64>, cpn: bool, k1: Option<f64>) -> Result<(f64, Value)> {
    if let Some(k1) = k1 {
        let v = i0_key_bound(k1)?;
        return Ok((v, json!({ "formula": "key_bound", "k1": k1, "i0": v })));
    }
    let s = s.ok_or_else(|| Error::InvalidParameter("--S is required".into()))?;
    if cpn {
        let v = i0_cpn(s)?;
        return Ok((v, json!({ "formula": "cpn", "s": s, "i0": v })));
    }
    let k = k.ok_or_else(|| Error::InvalidParameter("--K is required".into()))?;
    let v = i0_lower_bound(k, s)?;
    Ok((v, json!({ "formula": "lower_bound", "k": k, "s": s, "i0": v })))
}

fn execute(cmd: &Command) -> Result<i32> {
    if let Command::Bounds { k, s, cpn, k1, out } = cmd {
        let (v, results) = bounds_value(*k, *s, *cpn, *k1)?;
        println!("{v:?}");
        if let Some(path) = out {
            let mut report = Report::new("bounds", json!({ "K": k, "S": s, "cpn": cpn, "k1": k1 }), None);
            report.results = results;
            emit(Some(path), &report.to_json())?;
        }
        return Ok(0);
    }
    let common = cmd.common().expect("spec-based command");
    if common.format == Format::Csv && !cmd.has_table() {
        return Err(Error::InvalidParameter(format!(
            "--format csv is not available for {}",
            cmd.name()
        )));
    }
    let params = validate_params(cmd)?;
    let spec_arg = common
        .spec
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--spec is required".into()))?;
    let mut spec = load_spec(spec_arg)?;
    if let Some(seed) = seed_override(common.seed)? {
        spec = spec.with_seed(seed);
    }
    let config = json!({
        "spec": spec.to_file_struct(),
        "params": params,
    });
    let mut report = Report::new(cmd.name(), config, Some(spec.seed));
    let start = Instant::now();
    let outcome = match dispatch(cmd, &spec) {
        Ok(o) => o,
        Err(e) => {
            let code = e.exit_code();
            if code == 1 || code == 3 {
                // keep the witness data in the report
                Outcome {
                    results: json!({ "error": e.to_string() }),
                    table: None,
                    warnings: Vec::new(),
                    code,
                }
            } else {
                return Err(e);
            }
        }
    };
    report.results = outcome.results;
    report.warnings = outcome.warnings;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if outcome.code != 0 {
        if let Some(msg) = report.results.get("error").and_then(Value::as_str) {
            eprintln!("error: {msg}");
        }
    }
    let out = common.out.as_deref();
    match (common.format, outcome.table) {
        (Format::Csv, Some(t)) => emit(out, &t.to_csv())?,
        _ => emit(out, &report.to_json())?,
    }
    if let Some(p) = out {
        eprintln!("{} report written to {}", cmd.name(), display(p));
    }
    Ok(outcome.code)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Checks every numeric parameter before any sampling and returns the
/// resolved parameter echo.
fn validate_params(cmd: &Command) -> Result<Value> {
    Ok(match cmd {
        Command::LeviMap { count, refine, .. } => {
            if *count == Some(0) {
                return Err(Error::InvalidParameter("--count must be positive".into()));
            }
            json!({ "count": count, "refine": refine })
        }
        Command::Certify { eta, collar, rounds, .. } => {
            check_eta(*eta)?;
            let band = collar.as_deref().map(|s| parse_pair(s, "--collar")).transpose()?;
            if let Some((a, b)) = band {
                if !(a > 0.0 && b > a) {
                    return Err(Error::InvalidParameter(format!("--collar needs 0 < t_min < t_max, got {a}:{b}")));
                }
            }
            json!({ "eta": eta, "collar": band, "rounds": rounds, "shrink_factor": 0.5 })
        }
        Command::Index { resolution, .. } => {
            if !(*resolution > 1e-4 && *resolution < 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "--resolution must lie in (1e-4, 0.5), got {resolution}"
                )));
            }
            json!({ "resolution": resolution })
        }
        Command::Oka { .. } => json!({}),
        Command::Bounds { .. } => unreachable!("handled before spec loading"),
        Command::Sandwich { k, .. } => {
            check_positive(*k, "--K")?;
            json!({ "K": k })
        }
        Command::OsCheck { k, c, eta, i0, .. } => {
            check_positive(*k, "--K")?;
            if !(*c > 0.0 && c < k) {
                return Err(Error::InvalidParameter(format!("--c must lie in (0, K) = (0, {k}), got {c}")));
            }
            check_eta(*eta)?;
            if let Some(i0) = i0 {
                check_positive(*i0, "--i0")?;
            }
            json!({ "K": k, "c": c, "eta": eta, "i0": i0 })
        }
        Command::MaMass { eta, t, eps0, .. } => {
            check_eta(*eta)?;
            check_positive(*t, "--t")?;
            if let Some(e) = eps0 {
                if !(*e > *t) {
                    return Err(Error::InvalidParameter(format!("--eps0 must exceed --t, got {e} ≤ {t}")));
                }
            }
            json!({ "eta": eta, "t": t, "eps0": eps0 })
        }
        Command::Decay { point, eta, tgrid, .. } => {
            check_eta(*eta)?;
            let p = parse_list(point, "--point")?;
            let grid = parse_grid(tgrid)?;
            json!({ "point": p, "eta": eta, "t_grid": grid })
        }
        Command::StokesCheck { eta, t, .. } => {
            check_eta(*eta)?;
            let levels = parse_list(t, "--t")?;
            for &l in &levels {
                check_positive(l, "--t")?;
            }
            json!({ "eta": eta, "t": levels })
        }
    })
}

fn dispatch(cmd: &Command, spec: &DomainSpec) -> Result<Outcome> {
    match cmd {
        Command::LeviMap { count, refine, .. } => levi_map_cmd(spec, count.unwrap_or(spec.samples.boundary), *refine),
        Command::Certify { eta, collar, rounds, .. } => {
            let band = match collar.as_deref() {
                Some(s) => parse_pair(s, "--collar")?,
                None => spec.default_collar(),
            };
            let res = certify_with_shrink(spec, *eta, band, *rounds, 0.5)?;
            let mut out = Outcome::ok(serde_json::to_value(&res)?);
            if res.attempts.len() > 1 {
                let collars: Vec<String> = res
                    .attempts
                    .iter()
                    .map(|a| format!("[{:e}, {:e}]", a.collar.0, a.collar.1))
                    .collect();
                out.warnings.push(format!("collar shrunk after refutation: {}", collars.join(" -> ")));
            }
            out.code = verdict_code(res.result.verdict);
            Ok(out)
        }
        Command::Index { resolution, .. } => {
            let est = estimate_index(spec, *resolution)?;
            let mut out = Outcome::ok(serde_json::to_value(&est)?);
            if est.status == IndexStatus::Inconclusive {
                out.warnings.push(format!(
                    "certification fails already at eta = {}; index not bracketed",
                    est.hi
                ));
                out.code = 3;
            }
            Ok(out)
        }
        Command::Oka { .. } => {
            let est = estimate_oka_index(spec)?;
            let mut out = Outcome::ok(serde_json::to_value(&est)?);
            if est.k <= 0.0 {
                out.warnings.push(format!("no positive Oka constant on the collar (k = {:e})", est.k));
            }
            Ok(out)
        }
        Command::Bounds { .. } => unreachable!("handled before spec loading"),
        Command::Sandwich { k, .. } => {
            let res = verify_sandwich(spec, *k)?;
            let mut out = Outcome::ok(serde_json::to_value(&res)?);
            if !res.near_weak_set {
                out.warnings
                    .push("weak set is empty; the sandwich was checked below all boundary samples".into());
            }
            Ok(out)
        }
        Command::OsCheck { k, c, eta, i0, .. } => {
            let res = ohsawa_sibony_check(spec, *k, *c, *eta, *i0)?;
            let mut out = Outcome::ok(serde_json::to_value(&res)?);
            if res.n_samples == 0 {
                out.warnings.push(format!("eta ≥ i0 = {}; check not performed", i0.unwrap_or(f64::NAN)));
            }
            out.code = verdict_code(res.verdict);
            Ok(out)
        }
        Command::MaMass { eta, t, eps0, .. } => {
            let est = f_interior(spec, *eta, *t, *eps0)?;
            let mut table = Table::new(&["t", "value", "std_err", "n_hits"]);
            table.push(vec![num(*t), num(est.value), num(est.std_err), est.n_hits.to_string()]);
            let mut out = Outcome::ok(serde_json::to_value(&est)?);
            out.table = Some(table);
            Ok(out)
        }
        Command::Decay { point, eta, tgrid, .. } => {
            let p = parse_list(point, "--point")?;
            if p.len() != spec.real_dim() {
                return Err(Error::InvalidParameter(format!(
                    "--point has {} coordinates, expected {}",
                    p.len(),
                    spec.real_dim()
                )));
            }
            let grid = parse_grid(tgrid)?;
            let res = decay_fit_pointwise(spec, &p, *eta, &grid)?;
            let mut table = Table::new(&["t", "flux_density"]);
            for (t, v) in res.fit.t_grid.iter().zip(&res.fit.values) {
                table.push(vec![num(*t), num(*v)]);
            }
            let mut out = Outcome::ok(serde_json::to_value(&res)?);
            if res.fit.excluded > 0 {
                out.warnings.push(format!(
                    "{} of {} grid points at or below the floor {:e} were excluded from the fit",
                    res.fit.excluded,
                    grid.len(),
                    res.fit.floor
                ));
            }
            out.table = Some(table);
            Ok(out)
        }
        Command::StokesCheck { eta, t, .. } => stokes_cmd(spec, *eta, &parse_list(t, "--t")?),
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Certified => 0,
        Verdict::Refuted => 1,
        Verdict::Inconclusive => 3,
    }
}

fn levi_map_cmd(spec: &DomainSpec, count: usize, refine: usize) -> Result<Outcome> {
    let b = boundary_sample(spec, count)?;
    let map = levi_map(spec, &b.points)?;
    let weak = weak_set_refined(spec, &b.points, refine)?;
    let s_est = estimate_s(spec, if weak.is_empty() { &map } else { &weak });
    let s_map = estimate_s(spec, &map);
    let n_minus_1 = spec.n.saturating_sub(1);
    let mut ranks = vec![0usize; n_minus_1 + 1];
    let mut header: Vec<String> = (0..spec.real_dim()).map(crate::expr::var_name).collect();
    header.extend((1..=n_minus_1).map(|k| format!("eig{k}")));
    header.extend(["rank".to_string(), "weak".to_string()]);
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let mut samples = Vec::with_capacity(map.len());
    for d in &map {
        ranks[d.rank] += 1;
        let weak_pt = d.min_eig() <= spec.rank_tol;
        let mut row: Vec<String> = d.point.iter().map(|&v| num(v)).collect();
        row.extend(d.eigs.iter().map(|&v| num(v)));
        row.extend([d.rank.to_string(), weak_pt.to_string()]);
        table.push(row);
        samples.push(json!({
            "point": d.point,
            "eigenvalues": d.eigs,
            "rank": d.rank,
            "spectral_gap": d.spectral_gap(),
        }));
    }
    let weak_points: Vec<&Vec<f64>> = weak.iter().map(|d| &d.point).collect();
    let mut out = Outcome::ok(json!({
        "n_samples": map.len(),
        "rank_histogram": ranks,
        "n_weak_samples": s_map.n_weak,
        "weak_points": weak_points,
        "s": s_est,
        "samples": samples,
    }));
    if s_est.s_widened > s_est.s {
        out.warnings.push(format!(
            "S is sensitive to the rank tolerance: {:e} at rank_tol, {:e} with a 10x wider band",
            s_est.s, s_est.s_widened
        ));
    }
    out.table = Some(table);
    Ok(out)
}

fn stokes_cmd(spec: &DomainSpec, eta: f64, levels: &[f64]) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut table = Table::new(&["t", "interior", "interior_se", "flux", "flux_se", "diff", "combined_se"]);
    let mut warnings = Vec::new();
    let mut consistent = true;
    for &t in levels {
        let f = f_interior(spec, eta, t, None)?;
        let fl = flux_boundary(spec, eta, t)?;
        let diff = f.value - fl.value;
        let se = (f.std_err.powi(2) + fl.std_err.powi(2)).sqrt();
        let ok = diff.abs() <= 3.0 * se || diff.abs() <= 1e-12 * f.value.abs().max(fl.value.abs()).max(1.0);
        consistent &= ok;
        if !fl.thickness_stable {
            warnings.push(format!(
                "flux at t = {t} moves by more than one standard error when the shell is halved"
            ));
        }
        table.push(vec![
            num(t),
            num(f.value),
            num(f.std_err),
            num(fl.value),
            num(fl.std_err),
            num(diff),
            num(se),
        ]);
        rows.push(json!({
            "t": t,
            "interior": f,
            "flux": fl,
            "diff": diff,
            "combined_se": se,
            "within_3_se": ok,
        }));
    }
    Ok(Outcome {
        results: json!({ "levels": rows, "consistent": consistent }),
        table: Some(table),
        warnings,
        code: if consistent { 0 } else { 1 },
    })
}
