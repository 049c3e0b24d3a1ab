//! Command line entry point: one subcommand per operation, JSON config
//! files with flag overrides, CSV outputs with 17-significant-digit
//! floats, and a JSON manifest next to every output file.
//!
//! Exit codes: 0 success, 2 when any solve failed to converge (or a
//! sweep ended in step underflow), 3 invalid configuration, 1 internal
//! I/O failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Arg, ArgAction, Command};
use serde::{Deserialize, Serialize};

use crate::bubble::{bubble_pde_residual_profile, energy_family, project};
use crate::diagnostics::{far_field_compare, local_mass, pohozaev_residual, rescale_extract};
use crate::error::{Error, Result};
use crate::green::{con_value, green, r1_solve, robin, BallPoint};
use crate::grid::{RadialField, RadialGrid};
use crate::io;
use crate::solver::{continuation, solve_newton, ContinuationStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_NONCONVERGED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

const SUBCOMMANDS: &[&str] = &[
    "green",
    "robin",
    "r1",
    "con",
    "bubble-check",
    "project",
    "energy-family",
    "solve",
    "continue",
    "pohozaev",
    "quantize",
    "rescale",
    "farfield",
];

/// Validated run parameters; config-file values are overridden by flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: Option<String>,
    pub n: Option<usize>,
    pub q: Option<f64>,
    pub rho: Option<f64>,
    pub eps: Vec<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub r: Option<f64>,
    #[serde(rename = "R")]
    pub r_outer: Option<f64>,
    pub r0: Option<f64>,
    pub rho_start: Option<f64>,
    pub rho_end: Option<f64>,
    pub steps: Option<usize>,
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub duration_seconds: f64,
    pub status: String,
    pub metrics: BTreeMap<String, f64>,
}

fn type_name(v: &serde_json::Value) -> &'static str {
    match v {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "a boolean",
        serde_json::Value::Number(_) => "a number",
        serde_json::Value::String(_) => "a string",
        serde_json::Value::Array(_) => "an array",
        serde_json::Value::Object(_) => "an object",
    }
}

fn expect_f64(key: &str, v: &serde_json::Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| {
        Error::InvalidConfig(format!(
            "config key \"{key}\": expected a number, found {}",
            type_name(v)
        ))
    })
}

fn expect_usize(key: &str, v: &serde_json::Value) -> Result<usize> {
    v.as_u64().map(|u| u as usize).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "config key \"{key}\": expected a nonnegative integer, found {}",
            type_name(v)
        ))
    })
}

fn expect_string(key: &str, v: &serde_json::Value) -> Result<String> {
    v.as_str().map(str::to_owned).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "config key \"{key}\": expected a string, found {}",
            type_name(v)
        ))
    })
}

/// Parse a JSON config. Unknown keys are rejected by name; parse errors
/// report the byte offset.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        let offset: usize = text
            .lines()
            .take(e.line().saturating_sub(1))
            .map(|l| l.len() + 1)
            .sum::<usize>()
            + e.column().saturating_sub(1);
        Error::Parse(format!(
            "config parse error at byte offset {offset} (line {}, column {}): {e}",
            e.line(),
            e.column()
        ))
    })?;
    let obj = value.as_object().ok_or_else(|| {
        Error::InvalidConfig(format!(
            "config root must be a JSON object, found {}",
            type_name(&value)
        ))
    })?;
    let mut cfg = RunConfig::default();
    for (key, v) in obj {
        match key.as_str() {
            "subcommand" => cfg.subcommand = Some(expect_string(key, v)?),
            "n" => cfg.n = Some(expect_usize(key, v)?),
            "q" => cfg.q = Some(expect_f64(key, v)?),
            "rho" => cfg.rho = Some(expect_f64(key, v)?),
            "eps" => match v {
                serde_json::Value::Array(items) => {
                    cfg.eps = items
                        .iter()
                        .map(|x| expect_f64(key, x))
                        .collect::<Result<_>>()?;
                }
                _ => cfg.eps = vec![expect_f64(key, v)?],
            },
            "tol" => cfg.tol = Some(expect_f64(key, v)?),
            "max_iter" => cfg.max_iter = Some(expect_usize(key, v)?),
            "r" => cfg.r = Some(expect_f64(key, v)?),
            "R" => cfg.r_outer = Some(expect_f64(key, v)?),
            "r0" => cfg.r0 = Some(expect_f64(key, v)?),
            "rho_start" => cfg.rho_start = Some(expect_f64(key, v)?),
            "rho_end" => cfg.rho_end = Some(expect_f64(key, v)?),
            "steps" => cfg.steps = Some(expect_usize(key, v)?),
            "in" => cfg.input = Some(PathBuf::from(expect_string(key, v)?)),
            "out" => cfg.out = Some(PathBuf::from(expect_string(key, v)?)),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key \"{key}\""
                )))
            }
        }
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn command() -> Command {
    Command::new("mfe4")
        .allow_negative_numbers(true)
        .about(
            "Fourth-order mean field equation on the unit ball of R^4: \
             clamped biharmonic solvers, Boggio Green function, bubble \
             analysis and blow-up diagnostics",
        )
        .arg(
            Arg::new("subcommand")
                .value_name("SUBCOMMAND")
                .help("green | robin | r1 | con | bubble-check | project | energy-family | solve | continue | pohozaev | quantize | rescale | farfield"),
        )
        .arg(Arg::new("config").long("config").value_name("PATH"))
        .arg(Arg::new("n").long("n").value_name("INT"))
        .arg(Arg::new("q").long("q").value_name("FLOAT"))
        .arg(Arg::new("rho").long("rho").value_name("FLOAT"))
        .arg(
            Arg::new("eps")
                .long("eps")
                .value_name("FLOAT")
                .num_args(1..)
                .action(ArgAction::Append),
        )
        .arg(Arg::new("tol").long("tol").value_name("FLOAT"))
        .arg(Arg::new("max_iter").long("max-iter").value_name("INT"))
        .arg(Arg::new("r").long("r").value_name("FLOAT"))
        .arg(Arg::new("R").long("R").value_name("FLOAT"))
        .arg(Arg::new("r0").long("r0").value_name("FLOAT"))
        .arg(Arg::new("rho_start").long("rho-start").value_name("FLOAT"))
        .arg(Arg::new("rho_end").long("rho-end").value_name("FLOAT"))
        .arg(Arg::new("steps").long("steps").value_name("INT"))
        .arg(Arg::new("input").long("in").value_name("CSV"))
        .arg(Arg::new("out").long("out").value_name("PATH"))
}

fn parse_flag_f64(m: &clap::ArgMatches, id: &str) -> Result<Option<f64>> {
    match m.get_one::<String>(id) {
        None => Ok(None),
        Some(s) => s.parse::<f64>().map(Some).map_err(|_| {
            Error::InvalidConfig(format!("flag --{id}: expected a number, got {s:?}"))
        }),
    }
}

fn parse_flag_usize(m: &clap::ArgMatches, id: &str) -> Result<Option<usize>> {
    match m.get_one::<String>(id) {
        None => Ok(None),
        Some(s) => s.parse::<usize>().map(Some).map_err(|_| {
            Error::InvalidConfig(format!(
                "flag --{id}: expected a nonnegative integer, got {s:?}"
            ))
        }),
    }
}

/// Merge CLI matches over the config file; flags win.
fn merge(matches: &clap::ArgMatches) -> Result<RunConfig> {
    let mut cfg = match matches.get_one::<String>("config") {
        Some(path) => load_config(Path::new(path))?,
        None => RunConfig::default(),
    };
    if let Some(s) = matches.get_one::<String>("subcommand") {
        cfg.subcommand = Some(s.clone());
    }
    if let Some(v) = parse_flag_usize(matches, "n")? {
        cfg.n = Some(v);
    }
    if let Some(v) = parse_flag_f64(matches, "q")? {
        cfg.q = Some(v);
    }
    if let Some(v) = parse_flag_f64(matches, "rho")? {
        cfg.rho = Some(v);
    }
    if matches.contains_id("eps") {
        cfg.eps = matches
            .get_many::<String>("eps")
            .unwrap()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidConfig(format!("flag --eps: expected a number, got {s:?}"))
                })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(v) = parse_flag_f64(matches, "tol")? {
        cfg.tol = Some(v);
    }
    if let Some(v) = parse_flag_usize(matches, "max_iter")? {
        cfg.max_iter = Some(v);
    }
    if let Some(v) = parse_flag_f64(matches, "r")? {
        cfg.r = Some(v);
    }
    if let Some(v) = parse_flag_f64(matches, "R")? {
        cfg.r_outer = Some(v);
    }
    if let Some(v) = parse_flag_f64(matches, "r0")? {
        cfg.r0 = Some(v);
    }
    if let Some(v) = parse_flag_f64(matches, "rho_start")? {
        cfg.rho_start = Some(v);
    }
    if let Some(v) = parse_flag_f64(matches, "rho_end")? {
        cfg.rho_end = Some(v);
    }
    if let Some(v) = parse_flag_usize(matches, "steps")? {
        cfg.steps = Some(v);
    }
    if let Some(s) = matches.get_one::<String>("input") {
        cfg.input = Some(PathBuf::from(s));
    }
    if let Some(s) = matches.get_one::<String>("out") {
        cfg.out = Some(PathBuf::from(s));
    }
    Ok(cfg)
}

struct Outcome {
    csv: String,
    status: String,
    exit: i32,
    metrics: BTreeMap<String, f64>,
}

impl Outcome {
    fn ok(csv: String) -> Outcome {
        Outcome {
            csv,
            status: "ok".into(),
            exit: EXIT_OK,
            metrics: BTreeMap::new(),
        }
    }
}

fn require_f64(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidConfig(format!("missing required parameter {what}")))
}

fn grid_from(cfg: &RunConfig, default_n: usize, default_q: f64) -> Result<std::sync::Arc<RadialGrid>> {
    RadialGrid::new(cfg.n.unwrap_or(default_n), cfg.q.unwrap_or(default_q))
}

fn read_input(cfg: &RunConfig) -> Result<RadialField> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing required parameter --in".into()))?;
    io::read_field(path)
}

fn run_subcommand(name: &str, cfg: &RunConfig) -> Result<Outcome> {
    match name {
        "green" => {
            let r = require_f64(cfg.r, "--r")?;
            let v = green(&BallPoint::on_axis(r)?, &BallPoint::origin())?;
            Ok(Outcome::ok(io::table_to_csv("input,value", &[(r, v)])))
        }
        "robin" => {
            let r = require_f64(cfg.r, "--r")?;
            let p = BallPoint::on_axis(r)?;
            let v = robin(&p, &p)?;
            Ok(Outcome::ok(io::table_to_csv("input,value", &[(r, v)])))
        }
        "r1" => {
            let grid = grid_from(cfg, 513, 1.0)?;
            let field = r1_solve(&BallPoint::origin(), &grid)?;
            let rows: Vec<(f64, f64)> = grid
                .nodes()
                .iter()
                .cloned()
                .zip(field.values().iter().cloned())
                .collect();
            Ok(Outcome::ok(io::table_to_csv("input,value", &rows)))
        }
        "con" => {
            let grid = grid_from(cfg, 513, 1.0)?;
            let v = con_value(&BallPoint::origin(), &grid)?;
            let mut out = Outcome::ok(io::table_to_csv("Q,value", &[(0.0, v)]));
            out.metrics.insert("con_value".into(), v);
            Ok(out)
        }
        "bubble-check" => {
            let n = cfg.n.unwrap_or(513);
            let r_outer = cfg.r_outer.unwrap_or(10.0);
            let (radii, residuals) = bubble_pde_residual_profile(n, r_outer)?;
            let max = residuals.iter().fold(0.0f64, |m, v| m.max(*v));
            let rows: Vec<(f64, f64)> = radii.into_iter().zip(residuals).collect();
            let mut out = Outcome::ok(io::table_to_csv("r,value", &rows));
            out.metrics.insert("max_residual".into(), max);
            eprintln!("bubble-check: max |Delta^2 u - e^u| = {max:.3e} over [0, {r_outer}]");
            Ok(out)
        }
        "project" => {
            if cfg.eps.len() != 1 {
                return Err(Error::InvalidConfig(format!(
                    "project needs exactly one --eps, got {}",
                    cfg.eps.len()
                )));
            }
            let grid = grid_from(cfg, 513, 1.0)?;
            let report = project(cfg.eps[0], &grid)?;
            let mut out = Outcome::ok(io::field_to_csv(&report.projected));
            out.metrics
                .insert("expansion_defect".into(), report.expansion_defect);
            out.metrics
                .insert("boundary_slope".into(), report.boundary_slope);
            Ok(out)
        }
        "energy-family" => {
            let rho = require_f64(cfg.rho, "--rho")?;
            if cfg.eps.is_empty() {
                return Err(Error::InvalidConfig(
                    "energy-family needs at least one --eps".into(),
                ));
            }
            let grid = grid_from(cfg, 2049, 2.0)?;
            let series = energy_family(rho, &cfg.eps, &grid)?;
            Ok(Outcome::ok(io::table_to_csv("eps,J", &series)))
        }
        "solve" => {
            let rho = require_f64(cfg.rho, "--rho")?;
            let grid = grid_from(cfg, 513, 1.0)?;
            let init = RadialField::zeros(grid);
            let report = solve_newton(
                rho,
                &init,
                cfg.tol.unwrap_or(1.0e-10),
                cfg.max_iter.unwrap_or(50),
            )?;
            eprintln!(
                "solve: rho={rho} converged={} residual={:.3e} iterations={} max_u={:.6}",
                report.converged, report.residual, report.iterations, report.max_u
            );
            let mut out = Outcome::ok(io::field_to_csv(&report.field));
            if !report.converged {
                out.status = "non-converged".into();
                out.exit = EXIT_NONCONVERGED;
            }
            out.metrics.insert("energy".into(), report.energy);
            out.metrics.insert("max_u".into(), report.max_u);
            out.metrics.insert("residual".into(), report.residual);
            out.metrics.insert("defect".into(), report.defect);
            out.metrics
                .insert("iterations".into(), report.iterations as f64);
            Ok(out)
        }
        "continue" => {
            let rho_start = require_f64(cfg.rho_start, "--rho-start")?;
            let rho_end = require_f64(cfg.rho_end, "--rho-end")?;
            let grid = grid_from(cfg, 513, 1.0)?;
            let report = continuation(
                rho_start,
                rho_end,
                cfg.steps.unwrap_or(12),
                cfg.tol.unwrap_or(1.0e-10),
                &grid,
            )?;
            let mut csv = String::from("rho,energy,max_u,mu,converged\n");
            for e in &report.entries {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    io::fmt_f64(e.rho),
                    io::fmt_f64(e.energy),
                    io::fmt_f64(e.max_u),
                    io::fmt_f64(e.mu),
                    e.converged
                ));
            }
            let all_converged = report.entries.iter().all(|e| e.converged);
            let (status, exit) = match report.status {
                ContinuationStatus::ReachedTarget if all_converged => {
                    ("reached target".to_string(), EXIT_OK)
                }
                ContinuationStatus::ReachedTarget => {
                    ("non-converged".to_string(), EXIT_NONCONVERGED)
                }
                ContinuationStatus::BlowUpDeclared => ("blow-up declared".to_string(), EXIT_OK),
                ContinuationStatus::StepUnderflow => {
                    ("step underflow".to_string(), EXIT_NONCONVERGED)
                }
            };
            eprintln!(
                "continue: {} entries, terminal status: {status}",
                report.entries.len()
            );
            Ok(Outcome {
                csv,
                status,
                exit,
                metrics: BTreeMap::new(),
            })
        }
        "pohozaev" => {
            let rho = require_f64(cfg.rho, "--rho")?;
            let r = require_f64(cfg.r, "--r")?;
            let field = read_input(cfg)?;
            let b = pohozaev_residual(&field, rho, r)?;
            let mut csv = String::from("term,value\n");
            for (name, value) in [
                ("volume_term", b.volume_term),
                ("f_flux", b.f_flux),
                ("v_sq", b.v_sq),
                ("slope_v", b.slope_v),
                ("mixed_pair", b.mixed_pair),
                ("grad_dot", b.grad_dot),
                ("boundary_sum", b.boundary_sum()),
                ("residual", b.residual),
            ] {
                csv.push_str(&format!("{name},{}\n", io::fmt_f64(value)));
            }
            let mut out = Outcome::ok(csv);
            out.metrics.insert("residual".into(), b.residual);
            Ok(out)
        }
        "quantize" => {
            let rho = require_f64(cfg.rho, "--rho")?;
            let r = require_f64(cfg.r, "--r")?;
            let field = read_input(cfg)?;
            let mass = local_mass(&field, rho, r)?;
            Ok(Outcome::ok(io::table_to_csv("r,local_mass", &[(r, mass)])))
        }
        "rescale" => {
            let rho = require_f64(cfg.rho, "--rho")?;
            let r_outer = cfg.r_outer.unwrap_or(10.0);
            let field = read_input(cfg)?;
            let report = rescale_extract(&field, rho, r_outer)?;
            let rows: Vec<(f64, f64)> = report
                .xs
                .iter()
                .cloned()
                .zip(report.values.iter().cloned())
                .collect();
            let mut out = Outcome::ok(io::table_to_csv("x,value", &rows));
            out.metrics.insert("mu".into(), report.mu);
            out.metrics
                .insert("sup_distance".into(), report.sup_distance);
            eprintln!(
                "rescale: mu={:.6e}, sup distance to the standard bubble = {:.3e}",
                report.mu, report.sup_distance
            );
            Ok(out)
        }
        "farfield" => {
            let rho = require_f64(cfg.rho, "--rho")?;
            let r0 = require_f64(cfg.r0, "--r0")?;
            let field = read_input(cfg)?;
            let sup = far_field_compare(&field, rho, r0)?;
            Ok(Outcome::ok(io::table_to_csv(
                "r0,sup_distance",
                &[(r0, sup)],
            )))
        }
        _ => Err(Error::InvalidConfig(format!(
            "unknown subcommand {name:?}; expected one of: {}",
            SUBCOMMANDS.join(", ")
        ))),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_INTERNAL,
        Error::Singular(_) => EXIT_NONCONVERGED,
        _ => EXIT_INVALID,
    }
}

fn run(args: &[String]) -> Result<i32> {
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) if e.kind() == clap::error::ErrorKind::DisplayHelp
            || e.kind() == clap::error::ErrorKind::DisplayVersion =>
        {
            print!("{e}");
            return Ok(EXIT_OK);
        }
        Err(e) => return Err(Error::InvalidConfig(e.to_string())),
    };
    let cfg = merge(&matches)?;
    let name = cfg
        .subcommand
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no subcommand given".into()))?;
    let started = Instant::now();
    let outcome = run_subcommand(&name, &cfg)?;
    let duration = started.elapsed().as_secs_f64();
    match &cfg.out {
        Some(path) => {
            io::write_text(path, &outcome.csv)?;
            let manifest = RunManifest {
                config: cfg.clone(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                duration_seconds: duration,
                status: outcome.status.clone(),
                metrics: outcome.metrics.clone(),
            };
            let mpath = manifest_path(path);
            let text = serde_json::to_string_pretty(&manifest)
                .map_err(|e| Error::Parse(format!("manifest serialization failed: {e}")))?;
            io::write_text(&mpath, &text)?;
        }
        None => print!("{}", outcome.csv),
    }
    Ok(outcome.exit)
}

/// `u.csv` -> `u.csv.manifest.json`, next to the output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Entry point used by the binary; returns the process exit code.
pub fn dispatch(args: &[String]) -> i32 {
    match run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch_env() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    dispatch(&args)
}
