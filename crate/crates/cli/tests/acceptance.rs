//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use qbm_cli::cache::Cache;
use qbm_cli::commands::run_sweep;
use qbm_cli::config::Point;
use qbm_cli::pipeline::{
    boundary_slack, build_model, envelope_deviation, late_envelope, simulate, stationary, summary_from,
    BOUNDARY_MARGIN, ENVELOPE_TOL, SIM_ZERO,
};
use qbm_cli::RunConfig;
use qbm_core::asymptotics::{
    r_crit, stationary_variances_position, stationary_variances_symmetric, Phase, RCritFormula,
};
use qbm_core::bath::{discretize, OhmicSpectralDensity};
use qbm_core::exact::{
    equilibrium_variances_sim, evolve, fit_oscillation_frequency, uniform_grid, CouplingType, FullModel,
    Propagator, RenormalizationMode,
};
use qbm_core::gaussian::{beam_splitter_matrix, log_negativity, physicality_margin, GaussianState, ModeSpec};
use qbm_core::rwa::{
    coefficient_trace, evolve_moments_me, extract_coefficients, solve_amplitude, AmplitudeOptions, SignConvention,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn config_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn position_model(
    omega: f64,
    c12: f64,
    renorm: RenormalizationMode,
    gamma0: f64,
    cutoff: f64,
    modes: usize,
    temperature: f64,
) -> qbm_core::Result<FullModel> {
    let j = OhmicSpectralDensity::new(gamma0, cutoff, 1.0)?;
    let bath = discretize(&j, modes, temperature)?;
    FullModel::new(omega, c12, CouplingType::Position, renorm, bath)
}

fn gaussian_core() -> Outcome {
    let mode = ModeSpec::new(1.0, 1.0).map_err(err)?;
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 3.0] {
        let s = GaussianState::two_mode_squeezed(r, mode, 0.5).map_err(err)?;
        worst = worst.max((log_negativity(&s).map_err(err)? - 2.0 * r).abs());
    }
    ensure(worst < 1e-9, format!("max |E_N - 2r| = {worst:.2e}"))
}

fn symplectic_integrity() -> Outcome {
    let model = position_model(1.0, 0.0, RenormalizationMode::Renormalized, 0.1, 20.0, 1000, 10.0).map_err(err)?;
    let init = GaussianState::two_mode_squeezed(3.0, model.minus_mode(), 0.5).map_err(err)?;
    let prop = Propagator::new(&model).map_err(err)?;
    let traj = prop
        .evolve(&init, &uniform_grid(100.0, 0.005), Default::default())
        .map_err(err)?;
    let margin = traj
        .states
        .iter()
        .map(|s| physicality_margin(s.cov()))
        .fold(f64::INFINITY, f64::min);
    let residual = [25.0, 100.0]
        .iter()
        .map(|&t| prop.symplectic_residual(t))
        .fold(0.0, f64::max);
    ensure(
        residual < 1e-8 && margin >= -1e-10 && traj.bracket_residual < 1e-8,
        format!(
            "full-state residual {residual:.2e}, bracket residual {:.2e}, min physicality margin {margin:.3e} over {} steps",
            traj.bracket_residual,
            traj.states.len()
        ),
    )
}

fn amplitude_identities() -> Outcome {
    let j = OhmicSpectralDensity::new(0.1, 20.0, 1.0).map_err(err)?;
    let bath = discretize(&j, 500, 0.0).map_err(err)?;
    let times = uniform_grid(0.99 * bath.validity_horizon(), 0.05);
    let sol = solve_amplitude(&bath, 1.0, 1.0, &times, AmplitudeOptions::default()).map_err(err)?;
    let unitarity = sol.unitarity_residual();
    let constraint = (1..times.len())
        .step_by(times.len() / 12)
        .map(|i| sol.constraint_residual(i))
        .fold(0.0, f64::max);
    let zero_t = extract_coefficients(&sol).map_err(err)?.zero_temperature_residual();
    ensure(
        unitarity < 1e-8 && constraint < 1e-8 && zero_t < 1e-6,
        format!("unitarity {unitarity:.2e}, constraint {constraint:.2e}, zero-T identity {zero_t:.2e}"),
    )
}

fn master_equation() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (gamma0, temperature) in [(0.1, 0.0), (0.1, 1.0), (0.1, 10.0), (0.05, 0.0), (0.05, 1.0), (0.05, 10.0)] {
        let w0 = 1.0;
        let j = OhmicSpectralDensity::new(gamma0, 20.0, 1.0).map_err(err)?;
        let bath = discretize(&j, 500, temperature).map_err(err)?;
        let times = uniform_grid(0.99 * bath.validity_horizon(), 0.01);
        let model = FullModel::new(w0, 0.0, CouplingType::Symmetric, RenormalizationMode::Bare, bath.clone())
            .map_err(err)?;
        let s = model.plus_mode().map_err(err)?.scale();
        let a0 = Complex64::new(1.2, -0.7);
        let mean_plus = Vector2::new(2f64.sqrt() * a0.re / s.sqrt(), 2f64.sqrt() * a0.im * s.sqrt());
        let vac = |k: f64| Matrix2::new(0.5 / k, 0.0, 0.0, 0.5 * k);
        let minus = model.minus_mode().scale();
        let init =
            GaussianState::from_virtual((mean_plus, vac(s)), (Vector2::zeros(), vac(minus))).map_err(err)?;
        let traj = evolve(&model, &init, &times).map_err(err)?;
        let opts = AmplitudeOptions {
            sign: SignConvention::Conventional,
            ..Default::default()
        };
        let trace = coefficient_trace(&bath, w0, w0, &times, opts).map_err(err)?;
        let me = evolve_moments_me(&trace, a0, 2.0 * a0.norm_sqr() + 1.0, &times).map_err(err)?;
        let bs = beam_splitter_matrix();
        let (mut ea, mut en) = (0.0f64, 0.0f64);
        for (i, st) in traj.states.iter().enumerate() {
            let mu = bs * st.mean();
            let v = bs * st.cov() * bs;
            let a = Complex64::new(s.sqrt() * mu[0], mu[1] / s.sqrt()) / 2f64.sqrt();
            let nn = s * (v[(0, 0)] + mu[0] * mu[0]) + (v[(1, 1)] + mu[1] * mu[1]) / s;
            ea = ea.max((a - me.mean_a[i]).norm() / a0.norm());
            en = en.max(((nn - me.occupation[i]) / nn).abs());
        }
        ok &= ea < 1e-3 && en < 1e-3;
        lines.push(format!("g={gamma0} T={temperature}: <a> {ea:.1e}, N {en:.1e}"));
    }
    ensure(ok, lines.join("; "))
}

fn balanced_variances() -> Outcome {
    let (w0, temperature) = (1.0, 10.0);
    let j = OhmicSpectralDensity::new(0.1, 20.0, 1.0).map_err(err)?;
    let bath = discretize(&j, 1000, temperature).map_err(err)?;
    let model =
        FullModel::new(w0, 0.0, CouplingType::Symmetric, RenormalizationMode::Bare, bath.clone()).map_err(err)?;
    let plus = model.plus_mode().map_err(err)?;
    let trace = coefficient_trace(
        &bath,
        w0,
        w0,
        &uniform_grid(0.99 * bath.validity_horizon(), 0.01),
        AmplitudeOptions::default(),
    )
    .map_err(err)?;
    let (dx, dp) = stationary_variances_symmetric(&trace, plus).map_err(err)?;
    let (sx, sp) = equilibrium_variances_sim(&model).map_err(err)?;
    let balance = (sp - plus.scale() * sx).abs() / sp;
    let agreement = (dp / sp - 1.0).abs();
    let rc = r_crit(dx, dp, model.minus_mode(), plus, RCritFormula::General)
        .map_err(err)?
        .abs();

    let cfg = RunConfig::load(&config_file("fig2_right.toml")).map_err(err)?;
    let sweep = run_sweep(&cfg, &Cache::disabled());
    let mut phases: Vec<Phase> = Vec::new();
    for r in &sweep.results {
        let s = r.summary().ok_or("symmetric sweep point failed")?;
        if !phases.contains(&s.phase) {
            phases.push(s.phase);
        }
    }
    phases.sort_by_key(|p| p.rank());
    let labels: Vec<&str> = phases.iter().map(|p| p.as_str()).collect();
    ensure(
        balance < 1e-3 && agreement < 1e-3 && rc < 1e-9 && phases.len() == 2 && !phases.contains(&Phase::Sdr),
        format!(
            "simulated imbalance {balance:.1e}, predicted vs simulated {agreement:.1e}, |r_crit| {rc:.1e}, \
             sweep phases {labels:?} over {} points",
            sweep.points.len()
        ),
    )
}

fn envelope_prediction() -> Outcome {
    let cfg = RunConfig::from_toml(
        "[model]\nomega = 1.0\nc12 = 0.0\n[bath]\ngamma0 = 0.1\ncutoff = 20.0\n[time]\nt_max = 100.0\n",
    )
    .map_err(err)?;
    let candidates = [(0.5, 1.0), (1.5, 0.5), (3.0, 2.5), (10.0, 3.0), (6.0, 1.2), (0.0, 0.3), (8.0, 2.0)];
    let mut lines = Vec::new();
    let mut ok = true;
    let mut used = 0;
    for (temperature, r) in candidates {
        if used == 5 {
            break;
        }
        let p = Point {
            temperature,
            r,
            c12: 0.0,
            minus_area: 0.5,
            cutoff: 20.0,
        };
        let model = build_model(&cfg, &p).map_err(err)?;
        let s = summary_from(&cfg, &p, &model, stationary(&cfg, &model).map_err(err)?).map_err(err)?;
        if boundary_slack(&s) < BOUNDARY_MARGIN {
            continue;
        }
        used += 1;
        let sim = late_envelope(&simulate(&cfg, &p).map_err(err)?).map_err(err)?;
        let dev = envelope_deviation(&s, &sim);
        ok &= dev <= ENVELOPE_TOL && sim.phase == s.phase;
        lines.push(format!("({temperature},{r}) {}/{} dev {dev:.1e}", s.phase, sim.phase));
    }
    ensure(ok && used == 5, lines.join("; "))
}

fn plateau(cfg: &RunConfig, area: f64) -> Result<f64, String> {
    let p = Point {
        temperature: 10.0,
        r: 3.0,
        c12: 0.0,
        minus_area: area,
        cutoff: 20.0,
    };
    let traj = simulate(cfg, &p).map_err(err)?;
    let en = traj.log_negativities().map_err(err)?;
    let late: Vec<f64> = traj
        .times
        .iter()
        .zip(&en)
        .filter(|(t, _)| **t >= 80.0)
        .map(|(_, e)| *e)
        .collect();
    Ok(late.iter().sum::<f64>() / late.len() as f64)
}

fn mixed_state_shift() -> Outcome {
    let cfg = RunConfig::load(&config_file("fig3c.toml")).map_err(err)?;
    let shift = plateau(&cfg, 0.5)? - plateau(&cfg, 1.0)?;
    let expected = 2f64.ln() / 2.0;
    ensure(
        (shift - expected).abs() < 2e-2,
        format!("plateau shift {shift:.4} (expected {expected:.4})"),
    )
}

fn interacting_oscillations() -> Outcome {
    let cfg = RunConfig::load(&config_file("fig5.toml")).map_err(err)?;
    let p = Point {
        temperature: 10.0,
        r: 3.0,
        c12: -0.5,
        minus_area: 0.5,
        cutoff: 20.0,
    };
    let sim = late_envelope(&simulate(&cfg, &p).map_err(err)?).map_err(err)?;
    let sim_amp = 0.5 * (sim.e_max - sim.e_min);
    let sweep = run_sweep(&cfg, &Cache::disabled());
    let t_top = cfg.temperatures().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<Phase> = sweep
        .points
        .iter()
        .zip(&sweep.results)
        .filter(|(q, _)| q.temperature == t_top)
        .filter_map(|(_, r)| r.summary().map(|s| s.phase))
        .collect();
    let sdr = top.iter().filter(|p| **p == Phase::Sdr).count();
    let predicted = {
        let model = build_model(&cfg, &p).map_err(err)?;
        summary_from(&cfg, &p, &model, stationary(&cfg, &model).map_err(err)?)
            .map_err(err)?
            .e_amp
    };
    ensure(
        sim_amp > SIM_ZERO && predicted > 0.0 && sdr > 0,
        format!(
            "simulated dE_N {sim_amp:.3}, predicted dE_N {predicted:.3}, SDR points in T={t_top} row: {sdr}/{}",
            top.len()
        ),
    )
}

fn late_frequency(omega: f64, c12: f64, renorm: RenormalizationMode, cutoff: f64) -> Result<f64, String> {
    let modes = (1000.0 * cutoff / 20.0).round() as usize;
    let model = position_model(omega, c12, renorm, 0.1, cutoff, modes, 30.0).map_err(err)?;
    let init = GaussianState::two_mode_squeezed(3.0, model.minus_mode(), 0.5).map_err(err)?;
    let times = uniform_grid(100.0, 0.0025);
    let traj = evolve(&model, &init, &times).map_err(err)?;
    let en = traj.log_negativities().map_err(err)?;
    fit_oscillation_frequency(&times, &en, 50.0).ok_or_else(|| "no late-time oscillation to fit".to_string())
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi / lo - 1.0
}

fn cutoff_dependence() -> Outcome {
    let cutoffs = [10.0, 20.0, 40.0];
    let mut renorm = Vec::new();
    let mut bare = Vec::new();
    for l in cutoffs {
        renorm.push(late_frequency(3.0, -1.0, RenormalizationMode::Renormalized, l)?);
        bare.push(late_frequency(3.0, 0.0, RenormalizationMode::Bare, l)?);
    }
    let monotone = bare.windows(2).all(|w| w[1] > w[0]);
    let (sr, sb) = (spread(&renorm), spread(&bare));
    ensure(
        sr < 1e-2 && sb > 5e-2 && monotone,
        format!(
            "renormalized {renorm:.3?} (spread {:.2}%), bare {bare:.3?} (spread {:.1}%)",
            100.0 * sr,
            100.0 * sb
        ),
    )
}

fn equilibrium_crosscheck() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for temperature in [0.0, 10.0] {
        for gamma0 in [0.05, 0.1] {
            let model = position_model(1.0, 0.0, RenormalizationMode::Renormalized, gamma0, 20.0, 1000, temperature)
                .map_err(err)?;
            let (qx, qp) =
                stationary_variances_position(model.bath().density(), model.omega_plus().map_err(err)?, temperature)
                    .map_err(err)?;
            let (sx, sp) = equilibrium_variances_sim(&model).map_err(err)?;
            let dev = (sx / qx - 1.0).abs().max((sp / qp - 1.0).abs());
            ok &= dev < 1e-2;
            let mut line = format!("T={temperature} g={gamma0}: {dev:.1e}");
            if temperature > 0.0 {
                let equip = (qp * qp / temperature - 1.0).abs();
                ok &= equip < 5e-2;
                line.push_str(&format!(" (equipartition {:.1}%)", 100.0 * equip));
            }
            lines.push(line);
        }
    }
    ensure(ok, lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Gaussian core exactness", gaussian_core),
        ("symplectic integrity", symplectic_integrity),
        ("amplitude identities", amplitude_identities),
        ("master-equation exactness", master_equation),
        ("balanced-variance law", balanced_variances),
        ("envelope prediction", envelope_prediction),
        ("mixed-state shift", mixed_state_shift),
        ("interacting high-T oscillations", interacting_oscillations),
        ("cutoff (in)dependence", cutoff_dependence),
        ("equilibrium cross-check", equilibrium_crosscheck),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let res = f();
        let secs = t0.elapsed().as_secs_f64();
        let (tag, detail) = match res {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
