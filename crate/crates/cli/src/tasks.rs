use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use riesz_core::analysis::{default_s_grid, sweep_cloud, SweepOptions};
use riesz_core::configs::{minimize_config, write_trace_csv, DescentOptions};
use riesz_core::equilibrium::{solve_equilibrium, SolverOptions};
use riesz_core::geometry::sample_cloud;
use riesz_core::validate::run_validation;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Files of one run, collected in memory and written together.
struct Outputs {
    dir: PathBuf,
    csv: String,
    json: Value,
    extra: Vec<(&'static str, String)>,
    log: String,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), csv: String::new(), json: Value::Null, extra: Vec::new(), log: String::new() }
    }

    fn log(&mut self, line: impl AsRef<str>) {
        log::info!("{}", line.as_ref());
        self.log.push_str(line.as_ref());
        self.log.push('\n');
    }

    fn write(&self, echo: &RunConfig) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("values serialize") + "\n";
        fs::write(self.dir.join("config_echo.json"), pretty(&serde_json::to_value(echo).expect("config serializes")))?;
        fs::write(self.dir.join("result.csv"), &self.csv)?;
        fs::write(self.dir.join("result.json"), pretty(&self.json))?;
        for (name, body) in &self.extra {
            fs::write(self.dir.join(name), body)?;
        }
        fs::write(self.dir.join("log.txt"), &self.log)
    }
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> riesz_core::Result<()>) -> riesz_core::Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn envelope(cfg: &RunConfig, task_result: Value, error: Option<String>) -> Value {
    json!({
        "tool": "riesz-lab",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "task": cfg.task,
        "seed": cfg.seed,
        "error": error,
        "result": task_result,
    })
}

/// Run a parsed config and write its outputs; returns the process exit code.
pub fn execute(cfg: &RunConfig, out_dir: &Path) -> i32 {
    let mut out = Outputs::new(out_dir);
    let start = Instant::now();
    out.log(format!("riesz-lab {} task {:?}", env!("CARGO_PKG_VERSION"), cfg.task));
    let code = match dispatch(cfg, &mut out) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(Failure::Numeric(msg)) => {
            out.log(format!("numerical failure: {msg}"));
            if out.json.is_null() {
                out.json = envelope(cfg, Value::Null, Some(msg.clone()));
            }
            eprintln!("error: {msg}");
            EXIT_NUMERIC
        }
    };
    out.log(format!("elapsed {:.3} s", start.elapsed().as_secs_f64()));
    if let Err(e) = out.write(cfg) {
        eprintln!("error: cannot write outputs to {}: {e}", out_dir.display());
        return EXIT_NUMERIC;
    }
    code
}

enum Failure {
    Config(ConfigError),
    Numeric(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn numeric(e: riesz_core::Error) -> Failure {
    Failure::Numeric(e.to_string())
}

fn invalid(e: riesz_core::Error) -> Failure {
    Failure::Config(ConfigError(e.to_string()))
}

fn dispatch(cfg: &RunConfig, out: &mut Outputs) -> Result<i32, Failure> {
    match cfg.task {
        Task::SolveEquilibrium => solve(cfg, out),
        Task::MinimizeConfig => minimize(cfg, out),
        Task::SweepS => sweep(cfg, out),
        Task::Validate => validate(cfg, out),
    }
}

fn solve(cfg: &RunConfig, out: &mut Outputs) -> Result<i32, Failure> {
    let geom = cfg.require_geometry()?;
    let res = cfg.require_resolution()?;
    let s = cfg.require_s()?;
    let opts: SolverOptions = cfg.options(Some("seed"))?;
    opts.validate().map_err(invalid)?;
    if s >= geom.intrinsic_dim as f64 {
        return Err(ConfigError(format!("solve-equilibrium needs s < d = {}, got {s}", geom.intrinsic_dim)).into());
    }
    let cloud = Arc::new(sample_cloud(&geom, res, cfg.seed).map_err(invalid)?);
    out.log(format!("geometry {} with {} nodes, s = {s}", geom.name, cloud.len()));
    let t = Instant::now();
    let sol = solve_equilibrium(cloud, s, &opts).map_err(numeric)?;
    out.log(format!(
        "solver: {} iterations, gap {:e} (tol {:e}), converged {}, {:.3} s",
        sol.iterations,
        sol.gap,
        sol.gap_tol,
        sol.converged,
        t.elapsed().as_secs_f64()
    ));
    out.csv = csv_string(|b| sol.write_csv(b)).map_err(numeric)?;
    let body: Value = serde_json::from_str(&sol.to_json().map_err(numeric)?).expect("solver JSON parses");
    let error = (!sol.converged).then(|| format!("solver did not converge: flags {:?}", sol.flags));
    out.json = envelope(cfg, json!({ "geometry": geom.name, "resolution": res, "solution": body }), error.clone());
    match error {
        Some(msg) => Err(Failure::Numeric(msg)),
        None => Ok(EXIT_OK),
    }
}

fn minimize(cfg: &RunConfig, out: &mut Outputs) -> Result<i32, Failure> {
    let geom = Arc::new(cfg.require_geometry()?);
    let s = cfg.require_s()?;
    let n = match cfg.n {
        Some(n) if n >= 2 => n,
        Some(n) => return Err(ConfigError(format!("`N` must be at least 2, got {n}")).into()),
        None => return Err(ConfigError("`N` is required".into()).into()),
    };
    let opts: DescentOptions = cfg.options(Some("seed"))?;
    opts.validate().map_err(invalid)?;
    out.log(format!("geometry {}, N = {n}, s = {s}, {} restarts", geom.name, opts.restarts));
    let t = Instant::now();
    let r = minimize_config(geom.clone(), n, s, &opts).map_err(numeric)?;
    out.log(format!(
        "best restart {} energy {} after {} iterations ({:.3} s); flags {:?}",
        r.best_restart,
        r.energy(),
        r.best.iterations,
        t.elapsed().as_secs_f64(),
        r.best.flags
    ));
    out.csv = csv_string(|b| r.config().write_csv(b)).map_err(numeric)?;
    out.extra.push(("trace.csv", csv_string(|b| write_trace_csv(&r.best.trace, b)).map_err(numeric)?));
    out.json = envelope(
        cfg,
        json!({
            "geometry": geom.name,
            "N": n,
            "s": s,
            "energy": r.energy(),
            "energy_over_N2": r.energy() / (n * n) as f64,
            "grad_norm": r.best.grad_norm,
            "iterations": r.best.iterations,
            "converged": r.best.converged,
            "flags": r.best.flags,
            "best_restart": r.best_restart,
            "restart_energies": r.restart_energies,
            "options": opts,
        }),
        None,
    );
    Ok(EXIT_OK)
}

fn sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<i32, Failure> {
    let geom = cfg.require_geometry()?;
    let res = cfg.require_resolution()?;
    let d = geom.intrinsic_dim;
    let grid = match (&cfg.s_grid, cfg.s) {
        (Some(g), _) => g.clone(),
        (None, Some(s)) => vec![s],
        (None, None) => default_s_grid(d),
    };
    let solver: SolverOptions = cfg.options(Some("seed"))?;
    let opts = SweepOptions { solver, dictionary_seed: cfg.seed, cloud_seed: cfg.seed, ..Default::default() };
    opts.solver.validate().map_err(invalid)?;
    let cloud = Arc::new(sample_cloud(&geom, res, cfg.seed).map_err(invalid)?);
    out.log(format!("geometry {} with {} nodes, s grid {grid:?}", geom.name, cloud.len()));
    let result = sweep_cloud(geom.name.clone(), res, cloud, &grid, &opts).map_err(invalid)?;
    let mut failures = Vec::new();
    for row in &result.rows {
        let mut line = String::new();
        let _ = write!(
            line,
            "s = {}: I_s = {}, gap {:e}, {} iterations, {:.3} s",
            row.s, row.energy, row.solver_gap, row.iterations, row.runtime
        );
        if let Some(e) = &row.error {
            let _ = write!(line, ", error: {e}");
            failures.push(format!("s = {}: {e}", row.s));
        } else if !row.converged {
            failures.push(format!("s = {}: not converged", row.s));
        }
        out.log(line);
    }
    out.csv = csv_string(|b| result.write_csv(b)).map_err(numeric)?;
    let body: Value = serde_json::from_str(&result.to_json().map_err(numeric)?).expect("sweep JSON parses");
    let error = (!failures.is_empty()).then(|| failures.join("; "));
    out.json = envelope(cfg, body, error.clone());
    match error {
        Some(msg) => Err(Failure::Numeric(msg)),
        None => Ok(EXIT_OK),
    }
}

/// Validation report as CSV rows `name,passed,measured,threshold,detail`.
pub fn report_csv(report: &riesz_core::validate::ValidationReport) -> String {
    let mut s = String::from("name,passed,measured,threshold,detail\n");
    for r in &report.results {
        let _ = writeln!(s, "{},{},{},{},\"{}\"", r.name, r.passed, r.measured, r.threshold, r.detail.replace('"', "'"));
    }
    s
}

fn validate(cfg: &RunConfig, out: &mut Outputs) -> Result<i32, Failure> {
    let report = run_validation(cfg.filter.as_deref());
    out.log(report.to_string());
    out.csv = report_csv(&report);
    out.json = envelope(cfg, serde_json::to_value(&report).expect("report serializes"), None);
    if report.all_passed() {
        Ok(EXIT_OK)
    } else {
        let failed: Vec<&str> = report.results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        Err(Failure::Numeric(format!("failed checks: {}", failed.join(", "))))
    }
}
