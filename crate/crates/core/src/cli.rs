//! `reduxim run` and `reduxim sweep`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Error;
use crate::experiments::{configure_threads, run_scenario, Check, Report, ScenarioConfig, ScenarioId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "reduxim", version, about = "Monte-Carlo wavepacket reduction in interferometer circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and report its statistics.
    Run {
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario over a grid of one parameter, one CSV row per value.
    Sweep {
        scenario: String,
        /// Parameter to vary: t, a, phi or distance-scale.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with a ScenarioConfig; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Exit 3 if any acceptance check fails.
    #[arg(long = "assert")]
    assert_checks: bool,
    /// Record wall-clock duration in the manifest.
    #[arg(long)]
    timing: bool,

    #[arg(long)]
    arm_length: Option<f64>,
    #[arg(long)]
    detector_distance: Option<f64>,
    #[arg(long)]
    packet_length: Option<f64>,
    #[arg(long)]
    near_distance: Option<f64>,
    #[arg(long)]
    far_distance: Option<f64>,
    #[arg(long)]
    distance_scale: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    #[arg(long)]
    object_present: Option<bool>,
    #[arg(long)]
    visibility_t: Option<f64>,
    /// classical-intensity, quantum-packets or both.
    #[arg(long)]
    mode: Option<String>,
    /// always-in, always-out or coin-flip-after-bs1.
    #[arg(long)]
    policy: Option<String>,
    /// alice-first or bob-first.
    #[arg(long)]
    order: Option<String>,
    /// parallel or crossed.
    #[arg(long)]
    correlation: Option<String>,
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    #[arg(long)]
    chopper: Option<bool>,
    #[arg(long, allow_negative_numbers = true)]
    phi: Option<f64>,
    #[arg(long)]
    phi_points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    profile: Option<Vec<f64>>,
    #[arg(long)]
    sigma_cy: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    dl: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<T: Serialize> {
    pub scenario: ScenarioId,
    pub version: &'static str,
    pub seed: u64,
    pub trials: u64,
    pub config: ScenarioConfig,
    pub results: T,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Report,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::ChoiceTooLate { .. } | Error::DegenerateBin { .. } => EXIT_CONFIG,
            _ => EXIT_INTERNAL,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.into() }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INTERNAL, message: format!("{}: {e}", path.display()) }
}

fn parse_keyword<T: DeserializeOwned>(flag: &str, s: &str) -> Result<T, Failure> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| config_error(format!("--{flag}: unrecognised value '{s}'")))
}

fn resolve(scenario: &str, common: &Common) -> Result<ScenarioConfig, Failure> {
    let id: ScenarioId = scenario.parse()?;
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            let mut c: ScenarioConfig = serde_json::from_str(&text)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            c.scenario = id;
            c
        }
        None => ScenarioConfig::new(id),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = common.$field.clone() { cfg.$field = v; } )* };
    }
    set!(trials, seed, arm_length, detector_distance, packet_length, near_distance, far_distance, distance_scale, t);
    set!(object_present, visibility_t, a, chopper, phi_points, profile, sigma_cy, l, dl);
    if let Some(v) = common.t2 {
        cfg.t2 = Some(v);
    }
    if let Some(v) = common.phi {
        cfg.phi = Some(v);
    }
    if let Some(s) = &common.mode {
        cfg.mode = parse_keyword("mode", s)?;
    }
    if let Some(s) = &common.policy {
        cfg.policy = parse_keyword("policy", s)?;
    }
    if let Some(s) = &common.order {
        cfg.order = Some(parse_keyword("order", s)?);
    }
    if let Some(s) = &common.correlation {
        cfg.correlation = parse_keyword("correlation", s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_param(cfg: &mut ScenarioConfig, param: &str, value: f64) {
    match param {
        "t" => cfg.t = value,
        "a" => cfg.a = vec![value],
        "phi" => cfg.phi = Some(value),
        "distance-scale" => cfg.distance_scale = value,
        _ => unreachable!("checked against sweepable()"),
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut v = serde_json::to_vec_pretty(value)
        .map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })?;
    v.push(b'\n');
    Ok(v)
}

fn csv_bytes(header: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>, Failure> {
    let internal = |e: csv::Error| Failure { code: EXIT_INTERNAL, message: e.to_string() };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(internal)?;
    }
    w.into_inner().map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })
}

fn print_checks(stdout: &mut dyn Write, checks: &[Check]) {
    for c in checks {
        let _ = writeln!(stdout, "  [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn cmd_run(stdout: &mut dyn Write, scenario: &str, common: &Common) -> Result<i32, Failure> {
    let cfg = resolve(scenario, common)?;
    let start = Instant::now();
    let report = run_scenario(&cfg)?;
    let duration = start.elapsed().as_secs_f64();
    let metrics = report.metrics();
    let checks = report.checks();

    let _ = writeln!(stdout, "{} (seed {}, {} trials)", cfg.scenario, cfg.seed, cfg.trials);
    for (k, v) in &metrics {
        let _ = writeln!(stdout, "  {k} = {v}");
    }
    if common.assert_checks {
        print_checks(stdout, &checks);
    }

    if let Some(path) = &common.out {
        let bytes = match common.format.unwrap_or(Format::Json) {
            Format::Json => to_json(&RunManifest {
                scenario: cfg.scenario,
                version: env!("CARGO_PKG_VERSION"),
                seed: cfg.seed,
                trials: cfg.trials,
                results: &report,
                checks: checks.clone(),
                duration_s: common.timing.then_some(duration),
                config: cfg.clone(),
            })?,
            Format::Csv => {
                let header: Vec<String> = metrics.iter().map(|(k, _)| k.clone()).collect();
                csv_bytes(&header, &[metrics.iter().map(|(_, v)| *v).collect()])?
            }
        };
        write_out(path, &bytes)?;
    }
    if common.assert_checks && checks.iter().any(|c| !c.pass) {
        return Ok(EXIT_ASSERT);
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(stdout: &mut dyn Write, scenario: &str, param: &str, grid: &[f64], common: &Common) -> Result<i32, Failure> {
    let base = resolve(scenario, common)?;
    let allowed = base.scenario.sweepable();
    if !allowed.contains(&param) {
        return Err(config_error(format!(
            "'{param}' is not sweepable for {}; allowed: {}",
            base.scenario,
            if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
        )));
    }
    let start = Instant::now();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(grid.len());
    let mut failed = false;
    for &value in grid {
        let mut cfg = base.clone();
        apply_param(&mut cfg, param, value);
        cfg.validate()?;
        let report = run_scenario(&cfg)?;
        let metrics = report.metrics();
        let names: Vec<String> = std::iter::once(param.to_string()).chain(metrics.iter().map(|(k, _)| k.clone())).collect();
        match &header {
            None => header = Some(names),
            Some(h) if *h != names => {
                return Err(Failure { code: EXIT_INTERNAL, message: format!("column set changed at {param}={value}") })
            }
            _ => {}
        }
        let row: Vec<f64> = std::iter::once(value).chain(metrics.iter().map(|(_, v)| *v)).collect();
        let _ = writeln!(
            stdout,
            "{param}={value}: {}",
            metrics.iter().map(|(k, v)| format!("{k}={v:.6}")).collect::<Vec<_>>().join(" ")
        );
        let checks = report.checks();
        if common.assert_checks {
            print_checks(stdout, &checks);
        }
        failed |= checks.iter().any(|c| !c.pass);
        rows.push(row);
        points.push(SweepPoint { value, report });
    }
    let duration = start.elapsed().as_secs_f64();

    if let Some(path) = &common.out {
        let bytes = match common.format.unwrap_or(Format::Csv) {
            Format::Csv => csv_bytes(header.as_deref().unwrap_or(&[]), &rows)?,
            Format::Json => to_json(&RunManifest {
                scenario: base.scenario,
                version: env!("CARGO_PKG_VERSION"),
                seed: base.seed,
                trials: base.trials,
                results: &points,
                checks: Vec::new(),
                duration_s: common.timing.then_some(duration),
                config: base.clone(),
            })?,
        };
        write_out(path, &bytes)?;
    }
    if common.assert_checks && failed {
        return Ok(EXIT_ASSERT);
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_CONFIG;
    }
    let result = match &cli.command {
        Command::Run { scenario, common } => cmd_run(stdout, scenario, common),
        Command::Sweep { scenario, param, grid, common } => cmd_sweep(stdout, scenario, param, grid, common),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
