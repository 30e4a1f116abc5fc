//! The four subcommands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qbm_core::asymptotics::{phase_boundaries_in_r, Phase, PhaseSummary, PHASE_HEADER};
use qbm_core::exact::{fmt_sig, CouplingType, Trajectory, SYMMETRIC_COUPLING_SCALE};
use qbm_core::rwa::CoefficientTrace;

use crate::cache::Cache;
use crate::config::{InitialKind, Point, RunConfig};
use crate::error::{row_code, CliError};
use crate::pipeline::{
    boundary_slack, build_model, envelope_deviation, late_envelope, simulate, stationary, summary_from,
    symmetric_trace, SimulatedEnvelope, BOUNDARY_MARGIN, ENVELOPE_TOL,
};
use crate::plots;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest grid accepted by `verify`.
pub const VERIFY_MAX_POINTS: usize = 25;

/// Paths and settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, out: Option<PathBuf>) -> Self {
        let out = out.unwrap_or_else(|| config.output.dir.clone());
        Self { config, out }
    }

    fn prepare(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.out.join(name), text)?;
        Ok(())
    }

    fn write_plot(&self, name: &str, text: &str) -> Result<(), CliError> {
        if self.config.output.plots {
            self.write_text(name, text)?;
        }
        Ok(())
    }
}

fn numbered(stem: &str, i: usize, total: usize) -> String {
    if total == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{i:03}.csv")
    }
}

fn write_timing(ctx: &Context, rows: &[(usize, f64)]) -> Result<(), CliError> {
    let mut f = ctx.file("timing.log")?;
    writeln!(f, "index,seconds")?;
    for (i, s) in rows {
        writeln!(f, "{i},{s:.6}")?;
    }
    f.flush()?;
    Ok(())
}

fn point_cells(p: &Point) -> Vec<String> {
    vec![
        fmt_sig(p.temperature),
        fmt_sig(p.r),
        fmt_sig(p.c12),
        fmt_sig(p.minus_area),
        fmt_sig(p.cutoff),
    ]
}

/// Exact trajectories for every point of the sweep.
pub fn cmd_evolve(ctx: &Context) -> Result<Vec<Trajectory>, CliError> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let points = cfg.points();
    let results: Vec<(Result<Trajectory, CliError>, f64)> = points
        .par_iter()
        .map(|p| {
            let t0 = Instant::now();
            let r = simulate(cfg, p).map_err(CliError::from);
            (r, t0.elapsed().as_secs_f64())
        })
        .collect();

    let mut trajectories = Vec::with_capacity(points.len());
    let mut index = ctx.file("runs.csv")?;
    writeln!(index, "index,T,r,C12,minus_area,cutoff,modes,horizon,bracket_residual,file")?;
    let mut timing = Vec::new();
    for (i, ((res, secs), p)) in results.into_iter().zip(&points).enumerate() {
        let traj = res?;
        let name = numbered("trajectory", i, points.len());
        let mut f = ctx.file(&name)?;
        write_strided(&traj, cfg.time.stride, &mut f)?;
        f.flush()?;
        let mut cells = vec![i.to_string()];
        cells.extend(point_cells(p));
        cells.push(cfg.modes_at(p.cutoff).to_string());
        cells.push(fmt_sig(traj.validity_horizon));
        cells.push(fmt_sig(traj.bracket_residual));
        cells.push(name);
        writeln!(index, "{}", cells.join(","))?;
        timing.push((i, secs));
        trajectories.push(traj);
    }
    index.flush()?;
    write_timing(ctx, &timing)?;
    write_provenance(ctx, "evolve", points.len(), 0)?;
    ctx.write_plot("plot_trajectories.py", plots::TRAJECTORIES)?;
    Ok(trajectories)
}

fn write_strided<W: Write>(traj: &Trajectory, stride: usize, out: &mut W) -> Result<(), CliError> {
    if stride <= 1 {
        return traj.write_csv(out).map_err(CliError::from);
    }
    let idx: Vec<usize> = (0..traj.times.len()).step_by(stride).collect();
    let thin = Trajectory {
        times: idx.iter().map(|&i| traj.times[i]).collect(),
        states: idx.iter().map(|&i| traj.states[i].clone()).collect(),
        validity_horizon: traj.validity_horizon,
        bracket_residual: traj.bracket_residual,
    };
    thin.write_csv(out).map_err(CliError::from)
}

/// Distinct `(cutoff, C₁₂, T)` combinations in canonical order.
fn bath_points(cfg: &RunConfig) -> Vec<Point> {
    let mut seen = Vec::new();
    for p in cfg.points() {
        let q = Point {
            r: 0.0,
            minus_area: 0.5,
            ..p
        };
        if !seen.contains(&q) {
            seen.push(q);
        }
    }
    seen
}

/// Exact master-equation coefficients (symmetric coupling only).
pub fn cmd_coeffs(ctx: &Context) -> Result<Vec<CoefficientTrace>, CliError> {
    let cfg = &ctx.config;
    if cfg.model.coupling != CouplingType::Symmetric {
        return Err(CliError::Config(
            "coeffs requires model.coupling = \"symmetric\": the time-dependent coefficients of the \
             position coupling are out of scope, use `evolve` for its exact dynamics"
                .into(),
        ));
    }
    ctx.prepare()?;
    let points = bath_points(cfg);
    let results: Vec<(Result<CoefficientTrace, CliError>, f64)> = points
        .par_iter()
        .map(|p| {
            let t0 = Instant::now();
            let r = build_model(cfg, p)
                .and_then(|m| symmetric_trace(cfg, &m))
                .map_err(CliError::from);
            (r, t0.elapsed().as_secs_f64())
        })
        .collect();
    let mut index = ctx.file("runs.csv")?;
    writeln!(index, "index,T,C12,cutoff,modes,file")?;
    let mut out = Vec::new();
    let mut timing = Vec::new();
    for (i, ((res, secs), p)) in results.into_iter().zip(&points).enumerate() {
        let trace = res?;
        let name = numbered("coefficients", i, points.len());
        let mut f = ctx.file(&name)?;
        trace.write_csv(&mut f)?;
        f.flush()?;
        writeln!(
            index,
            "{i},{},{},{},{},{name}",
            fmt_sig(p.temperature),
            fmt_sig(p.c12),
            fmt_sig(p.cutoff),
            cfg.modes_at(p.cutoff)
        )?;
        timing.push((i, secs));
        out.push(trace);
    }
    index.flush()?;
    write_timing(ctx, &timing)?;
    write_provenance(ctx, "coeffs", points.len(), 0)?;
    ctx.write_plot("plot_coefficients.py", plots::COEFFICIENTS)?;
    Ok(out)
}

/// Outcome of one grid point of a phase sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointResult {
    Ok(PhaseSummary),
    Err { code: i32, message: String },
}

impl PointResult {
    pub fn summary(&self) -> Option<&PhaseSummary> {
        match self {
            PointResult::Ok(s) => Some(s),
            PointResult::Err { .. } => None,
        }
    }

    fn csv_row(&self, p: &Point) -> String {
        match self {
            PointResult::Ok(s) => s.csv_row(),
            PointResult::Err { code, .. } => {
                let mut cells = vec![
                    fmt_sig(p.temperature),
                    fmt_sig(p.r),
                    fmt_sig(p.c12),
                    fmt_sig(0.5 / p.minus_area),
                ];
                cells.extend(std::iter::repeat_n(String::new(), 6));
                cells.push(format!("ERR:{code}"));
                cells.join(",")
            }
        }
    }
}

/// Result of a phase sweep in canonical order.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config_digest: String,
    pub points: Vec<Point>,
    pub results: Vec<PointResult>,
    pub seconds: Vec<f64>,
}

/// Bath point, its stationary `(Δx₊, Δp₊)` and the seconds spent.
type StationaryPair = (Point, qbm_core::Result<(f64, f64)>, f64);

/// Stationary pairs per bath point, then summaries per grid point.
pub fn run_sweep(cfg: &RunConfig, cache: &Cache) -> SweepResult {
    let digest = cfg.digest();
    let points = cfg.points();
    let keys: Vec<String> = points.iter().map(|p| Cache::key(&digest, "phase", p)).collect();
    let cached: Vec<Option<PointResult>> = keys.iter().map(|k| cache.get(k)).collect();

    let needed: Vec<Point> = bath_points(cfg)
        .into_iter()
        .filter(|b| {
            points
                .iter()
                .zip(&cached)
                .any(|(p, c)| c.is_none() && same_bath(p, b))
        })
        .collect();
    let pairs: Vec<StationaryPair> = needed
        .par_iter()
        .map(|b| {
            let t0 = Instant::now();
            let r = build_model(cfg, b).and_then(|m| stationary(cfg, &m));
            (*b, r, t0.elapsed().as_secs_f64())
        })
        .collect();

    let mut results = Vec::with_capacity(points.len());
    let mut seconds = Vec::with_capacity(points.len());
    for ((p, c), key) in points.iter().zip(cached).zip(&keys) {
        if let Some(hit) = c {
            results.push(hit);
            seconds.push(0.0);
            continue;
        }
        let (_, pair, secs) = pairs.iter().find(|(b, _, _)| same_bath(p, b)).expect("computed");
        let t0 = Instant::now();
        let res = pair
            .clone()
            .and_then(|pair| build_model(cfg, p).and_then(|m| summary_from(cfg, p, &m, pair)));
        let res = match res {
            Ok(s) => PointResult::Ok(s),
            Err(e) => PointResult::Err {
                code: row_code(&e),
                message: e.to_string(),
            },
        };
        cache.put(key, &res);
        results.push(res);
        seconds.push(secs + t0.elapsed().as_secs_f64());
    }
    SweepResult {
        config_digest: digest,
        points,
        results,
        seconds,
    }
}

fn same_bath(p: &Point, b: &Point) -> bool {
    p.cutoff == b.cutoff && p.c12 == b.c12 && p.temperature == b.temperature
}

/// One boundary curve `r(T)` separating two phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub c12: f64,
    pub minus_area: f64,
    pub cutoff: f64,
    pub below: Phase,
    pub above: Phase,
    /// `(T, r)` vertices.
    pub points: Vec<(f64, f64)>,
}

/// Bisects the phase inequalities along `r` on every temperature row.
pub fn boundary_curves(sweep: &SweepResult, r_max: f64) -> Vec<BoundaryCurve> {
    let mut curves: BTreeMap<(u64, u64, u64, u8, u8), BoundaryCurve> = BTreeMap::new();
    let mut done: Vec<(Point, f64)> = Vec::new();
    for (p, res) in sweep.points.iter().zip(&sweep.results) {
        let Some(s) = res.summary() else { continue };
        let row = Point { r: 0.0, ..*p };
        if done.iter().any(|(q, _)| *q == row) {
            continue;
        }
        done.push((row, s.r_crit));
        for b in phase_boundaries_in_r(s.r_crit, s.s_crit, r_max, 401, 1e-10) {
            let key = (
                p.c12.to_bits(),
                p.minus_area.to_bits(),
                p.cutoff.to_bits(),
                b.below.rank(),
                b.above.rank(),
            );
            curves
                .entry(key)
                .or_insert_with(|| BoundaryCurve {
                    c12: p.c12,
                    minus_area: p.minus_area,
                    cutoff: p.cutoff,
                    below: b.below,
                    above: b.above,
                    points: Vec::new(),
                })
                .points
                .push((p.temperature, b.r));
        }
    }
    let mut out: Vec<BoundaryCurve> = curves.into_values().collect();
    for c in &mut out {
        c.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool_version: &'a str,
    command: &'a str,
    config_digest: &'a str,
    points: usize,
    failed_points: usize,
    /// Symmetric-coupling bath couplings relative to the position-coupling ones.
    symmetric_coupling_scale: f64,
}

fn write_provenance(ctx: &Context, command: &str, points: usize, failed_points: usize) -> Result<(), CliError> {
    let prov = Provenance {
        tool_version: TOOL_VERSION,
        command,
        config_digest: &ctx.config.digest(),
        points,
        failed_points,
        symmetric_coupling_scale: SYMMETRIC_COUPLING_SCALE,
    };
    ctx.write_text("provenance.json", &serde_json::to_string_pretty(&prov).expect("serializable"))
}

/// Phase diagram over the configured grid.
pub fn cmd_phase_diagram(ctx: &Context) -> Result<SweepResult, CliError> {
    ctx.prepare()?;
    let cfg = &ctx.config;
    let cache = Cache::new(&ctx.out, cfg.output.cache);
    let sweep = run_sweep(cfg, &cache);

    let mut f = ctx.file("phase_diagram.csv")?;
    writeln!(f, "{PHASE_HEADER}")?;
    for (p, r) in sweep.points.iter().zip(&sweep.results) {
        writeln!(f, "{}", r.csv_row(p))?;
    }
    f.flush()?;

    let failed = sweep.results.iter().filter(|r| r.summary().is_none()).count();
    if failed > 0 {
        let mut e = ctx.file("errors.csv")?;
        writeln!(e, "T,r,C12,minus_area,cutoff,code,message")?;
        for (p, r) in sweep.points.iter().zip(&sweep.results) {
            if let PointResult::Err { code, message } = r {
                let msg = message.replace(['"', '\n'], " ");
                writeln!(e, "{},{code},\"{msg}\"", point_cells(p).join(","))?;
            }
        }
        e.flush()?;
    }

    if cfg.output.boundaries {
        let r_max = cfg.squeezings().into_iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        let curves = boundary_curves(&sweep, r_max.max(1e-9));
        ctx.write_text("boundaries.json", &serde_json::to_string_pretty(&curves).expect("serializable"))?;
    }
    write_provenance(ctx, "phase-diagram", sweep.points.len(), failed)?;
    let timing: Vec<(usize, f64)> = sweep.seconds.iter().copied().enumerate().collect();
    write_timing(ctx, &timing)?;
    ctx.write_plot("plot_phase_diagram.py", plots::PHASE_DIAGRAM)?;
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyStatus {
    Pass,
    Fail,
    BoundaryExcluded,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyPoint {
    pub temperature: f64,
    pub r: f64,
    pub c12: f64,
    pub minus_area: f64,
    pub cutoff: f64,
    pub predicted: Option<Phase>,
    pub simulated: Option<Phase>,
    pub predicted_bounds: Option<(f64, f64)>,
    pub simulated_bounds: Option<(f64, f64)>,
    pub e_amp: Option<f64>,
    pub envelope_deviation: Option<f64>,
    pub boundary_slack: Option<f64>,
    pub status: VerifyStatus,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub tool_version: String,
    pub config_digest: String,
    pub points: Vec<VerifyPoint>,
    pub passed: bool,
}

fn verify_point(cfg: &RunConfig, p: &Point) -> VerifyPoint {
    let mut v = VerifyPoint {
        temperature: p.temperature,
        r: p.r,
        c12: p.c12,
        minus_area: p.minus_area,
        cutoff: p.cutoff,
        predicted: None,
        simulated: None,
        predicted_bounds: None,
        simulated_bounds: None,
        e_amp: None,
        envelope_deviation: None,
        boundary_slack: None,
        status: VerifyStatus::Error,
        message: None,
    };
    let run = || -> qbm_core::Result<(PhaseSummary, SimulatedEnvelope)> {
        let model = build_model(cfg, p)?;
        let pair = stationary(cfg, &model)?;
        let s = summary_from(cfg, p, &model, pair)?;
        let sim = late_envelope(&simulate(cfg, p)?)?;
        Ok((s, sim))
    };
    match run() {
        Err(e) => v.message = Some(e.to_string()),
        Ok((s, sim)) => {
            let slack = boundary_slack(&s);
            let dev = envelope_deviation(&s, &sim);
            v.predicted = Some(s.phase);
            v.simulated = Some(sim.phase);
            v.predicted_bounds = Some(qbm_core::asymptotics::envelope_bounds(s.e_mean, s.e_amp));
            v.simulated_bounds = Some((sim.e_min, sim.e_max));
            v.e_amp = Some(s.e_amp);
            v.envelope_deviation = Some(dev);
            v.boundary_slack = Some(slack);
            v.status = if slack < BOUNDARY_MARGIN {
                VerifyStatus::BoundaryExcluded
            } else if s.phase == sim.phase && dev <= ENVELOPE_TOL {
                VerifyStatus::Pass
            } else {
                VerifyStatus::Fail
            };
        }
    }
    v
}

/// Predictor-versus-simulator cross-check on a small grid.
pub fn cmd_verify(ctx: &Context) -> Result<VerifyReport, CliError> {
    let cfg = &ctx.config;
    let points = cfg.points();
    if points.len() > VERIFY_MAX_POINTS {
        return Err(CliError::Config(format!(
            "verify accepts at most {VERIFY_MAX_POINTS} grid points, got {}",
            points.len()
        )));
    }
    if !matches!(
        cfg.initial.kind,
        InitialKind::TwoModeSqueezed | InitialKind::SqueezedProduct
    ) {
        return Err(CliError::Config(
            "verify needs initial.kind = \"two-mode-squeezed\" or \"squeezed-product\"".into(),
        ));
    }
    ctx.prepare()?;
    let rows: Vec<(VerifyPoint, f64)> = points
        .par_iter()
        .map(|p| {
            let t0 = Instant::now();
            let v = verify_point(cfg, p);
            (v, t0.elapsed().as_secs_f64())
        })
        .collect();
    let timing: Vec<(usize, f64)> = rows.iter().map(|r| r.1).enumerate().collect();
    let points: Vec<VerifyPoint> = rows.into_iter().map(|r| r.0).collect();
    let passed = points
        .iter()
        .all(|p| matches!(p.status, VerifyStatus::Pass | VerifyStatus::BoundaryExcluded));
    let report = VerifyReport {
        tool_version: TOOL_VERSION.to_string(),
        config_digest: cfg.digest(),
        points,
        passed,
    };
    ctx.write_text("verify.json", &serde_json::to_string_pretty(&report).expect("serializable"))?;
    write_timing(ctx, &timing)?;
    if !report.passed {
        let bad: Vec<String> = report
            .points
            .iter()
            .filter(|p| matches!(p.status, VerifyStatus::Fail | VerifyStatus::Error))
            .map(|p| format!("(T={}, r={}, C12={}, area={})", p.temperature, p.r, p.c12, p.minus_area))
            .collect();
        return Err(CliError::Verification(format!(
            "{} point(s) disagree: {}",
            bad.len(),
            bad.join(", ")
        )));
    }
    Ok(report)
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
