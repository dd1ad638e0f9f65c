use std::fmt;
use std::io::Write;

use serde::Serialize;
use serde_json::json;

use ecs_core::chartcalc::{curvature_pack, verify_grid, ChartPoint, MetricField, ToleranceProfile};
use ecs_core::d1family::{self, build_metric};
use ecs_core::d2family::{self, build_d2_metric};
use ecs_core::lattice::{certify_compact, CertifyConfig, StageRecord};
use ecs_core::olszak::{
    fibers_on_grid, nullity_parallel_check, olszak_fiber, rank_one_weyl_witness, KERNEL_TOL,
};
use ecs_core::riccati::{self, Septuple};
use ecs_core::series::TrigSeries;

use crate::fixtures::{self, Family};
use crate::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, fixtures or data: exit code 2.
    Input(String),
    /// A numerical stage could not complete: exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl From<ecs_core::Error> for CliError {
    fn from(e: ecs_core::Error) -> Self {
        if let ecs_core::Error::InvalidInput(v) = &e {
            CliError::Input(v.join("; "))
        } else if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Failure(e.to_string())
        }
    }
}

type CmdResult = Result<bool, CliError>;

#[derive(Serialize)]
struct Report {
    command: &'static str,
    fixture: String,
    seed: u64,
    points: usize,
    checks: Vec<StageRecord>,
    summary: serde_json::Value,
    verdict: &'static str,
}

impl Report {
    fn new(command: &'static str, fixture: &str, cfg: &RunConfig) -> Self {
        Self {
            command,
            fixture: fixture.to_string(),
            seed: cfg.seed,
            points: 0,
            checks: Vec::new(),
            summary: serde_json::Value::Null,
            verdict: "fail",
        }
    }

    fn gate(&mut self, name: &str, value: f64, tolerance: f64) {
        let passed = value.is_finite() && value < tolerance;
        log::info!(
            "{name}: {value:.3e} (tolerance {tolerance:.0e}) {}",
            if passed { "ok" } else { "FAILED" }
        );
        self.checks.push(StageRecord {
            name: name.into(),
            value,
            tolerance,
            passed,
        });
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.gate(name, if ok { 0.0 } else { 1.0 }, 0.5);
    }

    fn finish(mut self, cfg: &RunConfig) -> CmdResult {
        let passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self.verdict = if passed { "pass" } else { "fail" };
        let mut text = serde_json::to_string_pretty(&self).expect("report serializes");
        text.push('\n');
        emit(cfg, text.as_bytes())?;
        Ok(passed)
    }
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Failure(format!("write failed: {e}"));
    match &cfg.out {
        Some(path) => std::fs::write(path, bytes).map_err(io),
        None => std::io::stdout().write_all(bytes).map_err(io),
    }
}

fn check_config(cfg: &RunConfig) -> Result<(), CliError> {
    let mut v = Vec::new();
    if !(cfg.tol_first > 0.0) || !(cfg.tol_second > 0.0) {
        v.push("tolerances must be positive");
    }
    if cfg.grid == Some(0) {
        v.push("--grid must be at least 1");
    }
    if !(cfg.period > 0.0 && cfg.period.is_finite()) {
        v.push("--period must be positive");
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(v.join("; ")))
    }
}

fn profile(grid: Vec<ChartPoint>, cfg: &RunConfig) -> ToleranceProfile {
    let mut prof = ToleranceProfile::with_grid(grid);
    prof.tol_first = cfg.tol_first;
    prof.tol_second = cfg.tol_second;
    prof
}

fn invalid(violations: Vec<String>) -> Result<(), CliError> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(violations.join("; ")))
    }
}

fn distinct(mut dims: Vec<usize>) -> Vec<usize> {
    dims.sort_unstable();
    dims.dedup();
    dims
}

pub fn verify_d1(cfg: &RunConfig) -> CmdResult {
    check_config(cfg)?;
    let name = cfg.fixture.as_deref().unwrap_or("random");
    let data = fixtures::d1(name, cfg.seed)?;
    invalid(d1family::validate(&data))?;
    let metric = build_metric(&data)?;
    let prof = profile(
        d1family::default_grid(&data, cfg.grid.unwrap_or(5), 3125, cfg.seed),
        cfg,
    );
    let grid = verify_grid(&metric, &prof)?;
    let fibers = fibers_on_grid(&metric, &prof, KERNEL_TOL)?;
    let nullity = fibers
        .iter()
        .filter_map(|f| f.nullity_residual)
        .fold(0.0f64, f64::max);
    let dims = distinct(fibers.iter().map(|f| f.dim).collect());
    let symmetric = grid.max_nabla_riem < cfg.tol_second;

    let mut r = Report::new("verify-d1", name, cfg);
    r.points = grid.points;
    r.gate("scalar curvature", grid.max_scalar, cfg.tol_first);
    r.gate("nabla W", grid.max_nabla_weyl, cfg.tol_second);
    r.gate("harmonic curvature", grid.max_harmonic, cfg.tol_second);
    r.gate("semisymmetry", grid.max_semisymmetry, cfg.tol_second);
    r.gate("ricci recurrence", grid.max_recurrence, cfg.tol_second);
    r.flag("ricci rank at most 2", grid.max_ricci_rank <= 2);
    r.flag("olszak dimension 1", dims == [1]);
    r.gate("olszak nullity", nullity, cfg.tol_second);
    r.flag("dichotomy matches f", symmetric == data.f.is_constant());
    r.summary = json!({
        "n": data.n,
        "signature": metric.signature(),
        "local_symmetry": if symmetric { "locally symmetric" } else { "ECS, not locally symmetric" },
        "max_nabla_riem": grid.max_nabla_riem,
        "min_weyl": grid.min_weyl,
        "max_ricci_rank": grid.max_ricci_rank,
        "olszak_dimensions": dims,
    });
    r.finish(cfg)
}

pub fn verify_d2(cfg: &RunConfig) -> CmdResult {
    check_config(cfg)?;
    let name = cfg.fixture.as_deref().unwrap_or("nonflat");
    let data = fixtures::d2(name)?;
    invalid(d2family::validate(&data))?;
    let metric = build_d2_metric(&data)?;
    let prof = profile(
        d2family::default_grid(&data, cfg.grid.unwrap_or(3), 729, cfg.seed),
        cfg,
    );
    let surface = d2family::chart_grid(&data.conn, 7, 0.8);
    let grid = verify_grid(&metric, &prof)?;
    let phi = d2family::phi_residual(&data, &surface)?;
    let nabla_rho = d2family::ricci_parallel_residual(&data.conn, &surface)?;
    let symmetric = grid.max_nabla_riem < cfg.tol_second;

    let mut r = Report::new("verify-d2", name, cfg);
    r.points = grid.points;
    r.gate("phi equation", phi, cfg.tol_first);
    r.gate("nabla W", grid.max_nabla_weyl, cfg.tol_second);
    r.flag(
        "dichotomy matches nabla rho",
        symmetric == (nabla_rho < cfg.tol_second),
    );
    let mut verdict = "locally symmetric".to_string();
    let mut dims = Vec::new();
    if !symmetric {
        let mut witness = 0.0f64;
        let mut missing = 0;
        for x in &prof.grid {
            let pack = curvature_pack::<_, f64>(&metric, x, &prof)?;
            let fiber = olszak_fiber(&pack, KERNEL_TOL)?;
            dims.push(fiber.dim);
            match rank_one_weyl_witness(&pack, Some(&fiber), KERNEL_TOL) {
                Some(w) => witness = witness.max(w.residual),
                None => missing += 1,
            }
        }
        dims = distinct(dims);
        r.flag("olszak dimension 2", dims == [2]);
        r.flag("witness exists", missing == 0);
        r.gate("witness residual", witness, cfg.tol_second);
        r.flag("weyl nonzero", grid.min_weyl > cfg.tol_second);
        verdict = match dims.as_slice() {
            [d] => format!("ECS, d={d}"),
            _ => format!("ECS, d varies {dims:?}"),
        };
    }
    log::info!("{verdict}");
    r.summary = json!({
        "n": data.n,
        "signature": metric.signature(),
        "local_symmetry": verdict,
        "max_nabla_riem": grid.max_nabla_riem,
        "max_nabla_rho": nabla_rho,
        "min_weyl": grid.min_weyl,
        "olszak_dimensions": dims,
    });
    r.finish(cfg)
}

fn olszak_suite<M: MetricField>(
    metric: &M,
    prof: &ToleranceProfile,
    cfg: &RunConfig,
    r: &mut Report,
) -> Result<serde_json::Value, CliError> {
    let mut fibers = Vec::with_capacity(prof.grid.len());
    let (mut witness, mut image, mut found) = (0.0f64, 0.0f64, 0);
    for x in &prof.grid {
        let pack = curvature_pack::<_, f64>(metric, x, prof)?;
        let fiber = olszak_fiber(&pack, KERNEL_TOL)?;
        if let Some(w) = rank_one_weyl_witness(&pack, Some(&fiber), KERNEL_TOL) {
            found += 1;
            witness = witness.max(w.residual);
            image = image.max(w.image_sine.unwrap_or(0.0));
        }
        fibers.push(fiber);
    }
    let np = nullity_parallel_check(metric, &fibers, prof)?;
    let dims = distinct(fibers.iter().map(|f| f.dim).collect());
    r.points = fibers.len();
    r.flag("constant dimension", dims.len() == 1);
    r.gate("nullity", np.nullity, cfg.tol_second);
    r.gate("parallelism", np.parallelism, cfg.tol_second);
    if dims == [2] {
        r.flag("witness at every point", found == fibers.len());
        r.gate("witness residual", witness, cfg.tol_second);
        r.gate("witness image", image, cfg.tol_second);
    }
    Ok(json!({
        "dimensions": dims,
        "transported_segments": np.segments,
        "skipped_full_fibers": np.skipped,
        "witness_points": found,
        "max_witness_residual": witness,
    }))
}

pub fn olszak(cfg: &RunConfig) -> CmdResult {
    check_config(cfg)?;
    let name = cfg.fixture.as_deref().unwrap_or("sine");
    let per_axis = cfg.grid.unwrap_or(3);
    let mut r = Report::new("olszak", name, cfg);
    r.summary = match fixtures::any(name, cfg.seed)? {
        Family::D1(data) => {
            invalid(d1family::validate(&data))?;
            let metric = build_metric(&data)?;
            let prof = profile(d1family::default_grid(&data, per_axis, 81, cfg.seed), cfg);
            olszak_suite(&metric, &prof, cfg, &mut r)?
        }
        Family::D2(data) => {
            invalid(d2family::validate(&data))?;
            let metric = build_d2_metric(&data)?;
            let prof = profile(d2family::default_grid(&data, per_axis, 81, cfg.seed), cfg);
            olszak_suite(&metric, &prof, cfg, &mut r)?
        }
    };
    r.finish(cfg)
}

/// The septuple from `--fixture`, or solved for the roots of `P` with `--k --l --period`.
fn septuple_for(cfg: &RunConfig) -> Result<(Septuple, Option<riccati::SpectralTriple>), CliError> {
    match &cfg.fixture {
        Some(path) => {
            let s = fixtures::septuple(path)?;
            if !(s.p > 0.0) {
                return Err(CliError::Input(format!(
                    "septuple period {} must be positive",
                    s.p
                )));
            }
            Ok((s, None))
        }
        None => {
            let kl = riccati::validate_kl(cfg.k, cfg.l)?;
            let roots = riccati::roots_of_P(kl)?;
            Ok((riccati::solve_septuple(&roots, cfg.period)?, Some(roots)))
        }
    }
}

pub fn riccati(cfg: &RunConfig) -> CmdResult {
    check_config(cfg)?;
    let (s, roots) = septuple_for(cfg)?;
    let chk = riccati::check_septuple(&s, 2 * riccati::GRID);
    let (sp, quad) = riccati::spec(&s)?;
    let name = cfg
        .fixture
        .clone()
        .unwrap_or_else(|| format!("k={} l={}", cfg.k, cfg.l));
    let mut r = Report::new("riccati", &name, cfg);
    r.points = 2 * riccati::GRID;
    r.gate("riccati", chk.max_riccati(), cfg.tol_first);
    r.flag("ordering", chk.ordering_margin > 0.0);
    r.gate("constants sum", chk.constants_sum.abs(), 1e-12);
    r.gate("spec quadrature", quad, 1e-10);
    if let Some(roots) = roots {
        r.gate("spec vs roots", sp.max_deviation(&roots), cfg.tol_first);
    }
    r.summary = json!({
        "roots": roots,
        "spec": sp,
        "riccati_residuals": chk.riccati,
        "ordering_margin": chk.ordering_margin,
        "f_variation": chk.f_variation,
        "septuple": s,
    });
    r.finish(cfg)
}

pub fn certify(cfg: &RunConfig) -> CmdResult {
    check_config(cfg)?;
    let defaults = CertifyConfig::default();
    let cc = CertifyConfig {
        k: cfg.k,
        l: cfg.l,
        j: cfg.j,
        p: cfg.period,
        grid: cfg.grid.unwrap_or(defaults.grid),
        seed: cfg.seed,
        tol_first: cfg.tol_first,
        tol_second: cfg.tol_second,
        ..defaults
    };
    let cert = certify_compact(&cc)?;
    emit(cfg, cert.to_json().as_bytes())?;
    log::info!("verdict: {}", cert.verdict);
    if let Some(f) = &cert.failure {
        log::warn!("failed at {}: {}", f.stage, f.message);
    }
    Ok(cert.passed())
}

fn residual_series(x: &TrigSeries, f: &TrigSeries, k: f64, t: f64) -> f64 {
    let v = x.eval(t);
    x.derivative().eval(t) + v * v - f.eval(t) - k
}

pub fn plotdata(cfg: &RunConfig) -> CmdResult {
    check_config(cfg)?;
    let rows = cfg.grid.unwrap_or(riccati::GRID);
    let (s, _) = septuple_for(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Failure(format!("csv: {e}"));
    w.write_record([
        "t",
        "alpha",
        "beta",
        "gamma",
        "f",
        "residual_alpha",
        "residual_beta",
        "residual_gamma",
    ])
    .map_err(csv_err)?;
    let mut worst = 0.0f64;
    for t in TrigSeries::grid(s.p, rows) {
        let res = [
            residual_series(&s.alpha, &s.f, s.a, t),
            residual_series(&s.beta, &s.f, s.b, t),
            residual_series(&s.gamma, &s.f, s.c, t),
        ];
        worst = res.iter().fold(worst, |m, v| m.max(v.abs()));
        let vals = [
            t,
            s.alpha.eval(t),
            s.beta.eval(t),
            s.gamma.eval(t),
            s.f.eval(t),
            res[0],
            res[1],
            res[2],
        ];
        w.write_record(vals.iter().map(|v| format!("{v:?}")))
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Failure(format!("csv: {e}")))?;
    emit(cfg, &bytes)?;
    let ok = worst < cfg.tol_first;
    log::info!(
        "riccati residual on {rows} rows: {worst:.3e} (tolerance {:.0e}) {}",
        cfg.tol_first,
        if ok { "ok" } else { "FAILED" }
    );
    Ok(ok)
}
