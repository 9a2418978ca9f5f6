//! Command-line front end.
//!
//! CSV column orders:
//!
//! | command        | columns                                              |
//! |----------------|------------------------------------------------------|
//! | `ruin-prob`    | `x,q,prob`                                           |
//! | `density`      | `y,value`                                            |
//! | `laplace-ruin` | `theta,q,b,x,value`                                  |
//! | `penalty`      | `theta,q,lambda,b,x,value`                           |
//! | `simulate`     | `estimator,n,mean,se,ci95_lo,ci95_hi,scheme,dt,epsilon,seed,horizon` |
//! | `validate`     | `criterion,check,residual,tolerance,passed`          |
//!
//! JSONL output uses the same names, one object per row. Exit codes: 0 on
//! success, 1 on a failed validation or numerical failure, 2 on
//! configuration or parse errors, 3 when a domain precondition is violated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Error;
use crate::gerber_shiu::{parisian_ruin_prob, GerberShiu};
use crate::levy_model::LevyModel;
use crate::simulator::{estimate_gs, estimate_gs_truncated, Penalty, Scheme, SimConfig, SummaryRecord};
use crate::validation::{run_suite, ValidationConfig, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const THREADS_ENV: &str = "PARISIAN_RISK_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// P_x(tau_q < inf) under the net profit condition.
    RuinProb,
    /// Gerber-Shiu density over a y-grid; the barriers given select the variant.
    Density,
    /// E_x[e^{-theta tau_q}; tau_q < tau_b^+].
    LaplaceRuin,
    /// E_x[e^{-theta tau_q + lambda X_{tau_q}}; tau_q < tau_b^+].
    Penalty,
    /// Monte Carlo estimate of E_x[e^{-theta tau_q} penalty; ruin before the barriers].
    Simulate,
    /// Run the formula-versus-oracle suite.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Parser)]
#[command(name = "parisian-risk", version, about = "Gerber-Shiu quantities at Parisian ruin with exponential delays")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Model description (JSON).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    b: Option<f64>,
    #[arg(long, global = true)]
    x: Option<f64>,
    /// Single deficit value (alternative to --y-grid).
    #[arg(long, global = true, allow_hyphen_values = true)]
    y: Option<f64>,
    /// Evenly spaced grid `lo:hi:n`.
    #[arg(long = "y-grid", global = true, allow_hyphen_values = true)]
    y_grid: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiply every validation tolerance (exploration only; output is watermarked).
    #[arg(long = "tolerance-scale", global = true)]
    tolerance_scale: Option<f64>,
}

/// A parsed invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub model_path: Option<PathBuf>,
    /// Named numeric parameters: theta, q, a, b, x, y, lambda, dt, epsilon,
    /// horizon, tolerance_scale.
    pub params: BTreeMap<String, f64>,
    pub y_grid: Option<(f64, f64, usize)>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Error raised while running a command, carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain { .. } => EXIT_DOMAIN,
            Error::InvalidModel(_) | Error::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILED,
        };
        CliError { code, message: e.to_string() }
    }
}

impl RunSpec {
    /// Parses command-line arguments (including the program name).
    pub fn parse_from<I, T>(args: I) -> Result<RunSpec, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let a = Args::try_parse_from(args)?;
        let mut params = BTreeMap::new();
        for (k, v) in [
            ("theta", a.theta),
            ("q", a.q),
            ("a", a.a),
            ("b", a.b),
            ("x", a.x),
            ("y", a.y),
            ("lambda", a.lambda),
            ("dt", a.dt),
            ("epsilon", a.epsilon),
            ("horizon", a.horizon),
            ("tolerance_scale", a.tolerance_scale),
        ] {
            if let Some(v) = v {
                params.insert(k.to_string(), v);
            }
        }
        let y_grid = match a.y_grid {
            Some(s) => Some(parse_grid(&s).map_err(|m| {
                clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("--y-grid: {m}\n"))
            })?),
            None => None,
        };
        Ok(RunSpec {
            command: a.command,
            model_path: a.model,
            params,
            y_grid,
            paths: a.paths,
            seed: a.seed,
            output: a.out,
            format: a.format.unwrap_or_default(),
        })
    }

    fn get(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    fn require(&self, name: &str) -> Result<f64, CliError> {
        self.get(name)
            .ok_or_else(|| CliError::config(format!("missing required parameter --{name} for {:?}", self.command)))
    }

    fn validate_params(&self) -> Result<(), CliError> {
        for (k, v) in &self.params {
            if !v.is_finite() {
                return Err(CliError::config(format!("parameter --{k} must be a finite real (got {v})")));
            }
        }
        Ok(())
    }
}

/// `lo:hi:n` with `n >= 1` points (`n = 1` gives `lo`).
pub fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:n, got '{s}'"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| format!("bad lower bound '{}'", parts[0]))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| format!("bad upper bound '{}'", parts[1]))?;
    let n: usize = parts[2].trim().parse().map_err(|_| format!("bad point count '{}'", parts[2]))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(format!("grid '{s}' needs finite lo <= hi and n >= 1"));
    }
    Ok((lo, hi, n))
}

fn grid_points((lo, hi, n): (f64, f64, usize)) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<LevyModel, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    LevyModel::from_json(&text)
}

/// Rows of named values, rendered as CSV or JSON lines.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
    preamble: Option<String>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), preamble: None }
    }

    fn push(&mut self, row: Vec<Value>) {
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        let mut s = String::new();
        match format {
            Format::Csv => {
                if let Some(p) = &self.preamble {
                    let _ = writeln!(s, "# {p}");
                }
                let _ = writeln!(s, "{}", self.columns.join(","));
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
            }
            Format::Jsonl => {
                if let Some(p) = &self.preamble {
                    let _ = writeln!(s, "{}", json!({ "watermark": p }));
                }
                for row in &self.rows {
                    // written by hand so keys keep column order
                    let fields: Vec<String> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(k, v)| format!("{}:{}", Value::String(k.clone()), v))
                        .collect();
                    let _ = writeln!(s, "{{{}}}", fields.join(","));
                }
            }
        }
        s
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) if s.contains(',') || s.contains('"') => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| Value::String(v.to_string()))
}

/// Executes a parsed command and returns its exit code. Results go to
/// `spec.output` or stdout; diagnostics to stderr.
pub fn run(spec: &RunSpec) -> i32 {
    match execute(spec) {
        Ok((text, code)) => match write_output(spec, &text) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: {}", e.message);
                e.code
            }
        },
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn write_output(spec: &RunSpec, text: &str) -> Result<(), CliError> {
    match &spec.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError { code: EXIT_FAILED, message: e.to_string() })
        }
    }
}

/// Runs the command and renders its output; the code is nonzero only for a
/// failed validation.
pub fn execute(spec: &RunSpec) -> Result<(String, i32), CliError> {
    spec.validate_params()?;
    if spec.command == Command::Validate {
        return validate(spec);
    }
    let path = spec
        .model_path
        .as_ref()
        .ok_or_else(|| CliError::config(format!("--model is required for {:?}", spec.command)))?;
    let model = load_model(path)?;
    let text = match spec.command {
        Command::RuinProb => ruin_prob(spec, &model)?.render(spec.format),
        Command::Density => density(spec, &model)?.render(spec.format),
        Command::LaplaceRuin => laplace_ruin(spec, &model)?.render(spec.format),
        Command::Penalty => penalty(spec, &model)?.render(spec.format),
        Command::Simulate => simulate(spec, &model)?,
        Command::Validate => unreachable!("handled above"),
    };
    Ok((text, EXIT_OK))
}

fn ruin_prob(spec: &RunSpec, model: &LevyModel) -> Result<Table, CliError> {
    let (q, x) = (spec.require("q")?, spec.require("x")?);
    let p = parisian_ruin_prob(model, q, x)?;
    let mut t = Table::new(&["x", "q", "prob"]);
    t.push(vec![num(x), num(q), num(p)]);
    Ok(t)
}

fn density(spec: &RunSpec, model: &LevyModel) -> Result<Table, CliError> {
    let theta = spec.require("theta")?;
    let q = spec.require("q")?;
    let x = spec.require("x")?;
    let ys = match (spec.y_grid, spec.get("y")) {
        (Some(g), _) => grid_points(g),
        (None, Some(y)) => vec![y],
        (None, None) => return Err(CliError::config("density needs --y-grid lo:hi:n or --y")),
    };
    let engine = GerberShiu::new(*model, theta, q)?;
    let mut t = Table::new(&["y", "value"]);
    for y in ys {
        let d = match (spec.get("a"), spec.get("b")) {
            (Some(a), Some(b)) => engine.density_two_sided(a, b, x, y)?,
            (Some(a), None) => engine.density_lower(a, x, y)?,
            (None, Some(b)) => engine.density_upper(b, x, y)?,
            (None, None) => engine.density_unrestricted(x, y)?,
        };
        t.push(vec![num(y), num(d.value)]);
    }
    Ok(t)
}

fn laplace_ruin(spec: &RunSpec, model: &LevyModel) -> Result<Table, CliError> {
    let (theta, q, b, x) = (spec.require("theta")?, spec.require("q")?, spec.require("b")?, spec.require("x")?);
    let v = GerberShiu::new(*model, theta, q)?.laplace_ruin_before_b(b, x)?;
    let mut t = Table::new(&["theta", "q", "b", "x", "value"]);
    t.push(vec![num(theta), num(q), num(b), num(x), num(v)]);
    Ok(t)
}

fn penalty(spec: &RunSpec, model: &LevyModel) -> Result<Table, CliError> {
    let (theta, q, lam) = (spec.require("theta")?, spec.require("q")?, spec.require("lambda")?);
    let (b, x) = (spec.require("b")?, spec.require("x")?);
    let v = GerberShiu::new(*model, theta, q)?.exponential_penalty(lam, b, x)?;
    let mut t = Table::new(&["theta", "q", "lambda", "b", "x", "value"]);
    t.push(vec![num(theta), num(q), num(lam), num(b), num(x), num(v)]);
    Ok(t)
}

fn simulate(spec: &RunSpec, model: &LevyModel) -> Result<String, CliError> {
    let q = spec.require("q")?;
    let x = spec.require("x")?;
    let theta = spec.get("theta").unwrap_or(0.0);
    let a = spec.get("a").unwrap_or(f64::INFINITY);
    let b = spec.get("b").unwrap_or(f64::INFINITY);
    let penalty = match spec.get("lambda") {
        Some(l) => Penalty::Exponential(l),
        None => Penalty::Constant,
    };
    let scheme = if model.sigma == 0.0 { Scheme::EventDriven } else { Scheme::EulerGrid };
    let mut cfg = SimConfig {
        scheme,
        dt: spec.get("dt").unwrap_or(0.01),
        epsilon: spec.get("epsilon").unwrap_or(0.0),
        n_paths: spec.paths.unwrap_or(10_000),
        horizon: spec.get("horizon").unwrap_or(f64::NAN),
        seed: spec.seed.unwrap_or(DEFAULT_SEED),
    };
    let estimate = if spec.get("horizon").is_some() {
        estimate_gs(model, theta, q, x, a, b, penalty, &cfg)?
    } else {
        let t = estimate_gs_truncated(model, theta, q, x, a, b, penalty, &SimConfig { horizon: 1.0, ..cfg })?;
        cfg.horizon = t.horizon;
        t.estimate
    };
    let lam = spec.get("lambda").unwrap_or(0.0);
    let params: Vec<(&str, f64)> = [("theta", theta), ("q", q), ("x", x), ("a", a), ("b", b), ("lambda", lam)]
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .collect();
    let record = SummaryRecord::new(
        "parisian_gerber_shiu",
        model,
        &params,
        &estimate,
        &cfg,
    );
    let mut t = Table::new(&[
        "estimator", "n", "mean", "se", "ci95_lo", "ci95_hi", "scheme", "dt", "epsilon", "seed", "horizon",
    ]);
    if spec.format == Format::Jsonl {
        // the full record, including model and parameters
        return Ok(format!("{}\n", record.to_jsonl()));
    }
    t.push(vec![
        Value::String(record.estimator.clone()),
        json!(record.n),
        num(record.mean),
        num(record.se),
        num(record.ci95[0]),
        num(record.ci95[1]),
        Value::String(match scheme {
            Scheme::EventDriven => "event_driven".into(),
            Scheme::EulerGrid => "euler_grid".into(),
        }),
        record.dt.map(num).unwrap_or(Value::Null),
        num(record.epsilon),
        json!(record.seed),
        num(record.horizon),
    ]);
    Ok(t.render(Format::Csv))
}

fn validate(spec: &RunSpec) -> Result<(String, i32), CliError> {
    let scale = spec.get("tolerance_scale").unwrap_or(1.0);
    if !(scale > 0.0) {
        return Err(CliError::config("--tolerance-scale must be > 0"));
    }
    let cfg = ValidationConfig { seed: spec.seed.unwrap_or(DEFAULT_SEED), tolerance_scale: scale };
    let results = run_suite(&cfg);
    let mut t = Table::new(&["criterion", "check", "residual", "tolerance", "passed"]);
    if scale != 1.0 {
        t.preamble = Some(format!("NON-DEFAULT TOLERANCES (scale {scale}); not an acceptance run"));
    }
    for r in &results {
        t.push(vec![
            json!(r.criterion),
            Value::String(r.check.clone()),
            num(r.residual),
            num(r.tolerance),
            json!(r.passed),
        ]);
    }
    let all = results.iter().all(|r| r.passed);
    let code = if all { EXIT_OK } else { EXIT_FAILED };
    Ok((t.render(spec.format), code))
}

/// Sizes the global worker pool from `PARISIAN_RISK_THREADS` if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer (got '{v}')")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(e.to_string()))
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let spec = match RunSpec::parse_from(args) {
        Ok(s) => s,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        return e.code;
    }
    run(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("-2:0:5").unwrap(), (-2.0, 0.0, 5));
        assert!(parse_grid("0:-1:3").is_err());
        assert!(parse_grid("a:b:c").is_err());
        assert_eq!(grid_points((-1.0, 0.0, 3)), vec![-1.0, -0.5, 0.0]);
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::domain("x <= b", "x")).code, EXIT_DOMAIN);
        assert_eq!(CliError::from(Error::InvalidModel(vec![])).code, EXIT_CONFIG);
        assert_eq!(CliError::from(Error::Degenerate("d".into())).code, EXIT_FAILED);
    }

    #[test]
    fn missing_parameter_is_a_config_error() {
        let spec = RunSpec::parse_from(["parisian-risk", "validate"]).unwrap();
        assert_eq!(spec.require("q").unwrap_err().code, EXIT_CONFIG);
    }
}
