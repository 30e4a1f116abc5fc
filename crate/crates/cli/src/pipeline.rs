//! Per-point computations shared by the subcommands.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use qbm_core::asymptotics::{
    envelope_bounds, stationary_variances_position, stationary_variances_symmetric, Phase, PhaseSummary,
};
use qbm_core::bath::{discretize, OhmicSpectralDensity};
use qbm_core::exact::{late_time_extrema, uniform_grid, CouplingType, EvolveOptions, FullModel, Propagator, Trajectory};
use qbm_core::gaussian::GaussianState;
use qbm_core::rwa::{coefficient_trace, AmplitudeOptions, CoefficientTrace};
use qbm_core::{Error, Result};

use crate::config::{InitialKind, Point, RunConfig};

/// Fraction of the run after which `E_N` counts as asymptotic.
pub const LATE_FRACTION: f64 = 0.8;
/// `E_N` below this value counts as zero in simulated classifications.
pub const SIM_ZERO: f64 = 1e-4;
/// Points closer than this to a phase boundary are excluded from checks.
pub const BOUNDARY_MARGIN: f64 = 0.05;
/// Accepted deviation between simulated and predicted envelope extremes.
pub const ENVELOPE_TOL: f64 = 5e-2;

pub fn density(cfg: &RunConfig, cutoff: f64) -> Result<OhmicSpectralDensity> {
    OhmicSpectralDensity::new(cfg.bath.gamma0, cutoff, cfg.model.mass)
}

pub fn build_model(cfg: &RunConfig, p: &Point) -> Result<FullModel> {
    let j = density(cfg, p.cutoff)?;
    let bath = discretize(&j, cfg.modes_at(p.cutoff), p.temperature)?;
    FullModel::new(cfg.model.omega, p.c12, cfg.model.coupling, cfg.model.renormalization, bath)
}

/// Initial system state for `p`. Squeezing and area refer to the relative mode.
pub fn initial_state(cfg: &RunConfig, p: &Point, model: &FullModel) -> Result<GaussianState> {
    let mode = model.minus_mode();
    let ini = &cfg.initial;
    let mean = ini.mean.map(Vector4::from).unwrap_or_else(Vector4::zeros);
    let state = match ini.kind {
        InitialKind::TwoModeSqueezed => GaussianState::two_mode_squeezed(p.r, mode, p.minus_area)?,
        InitialKind::SqueezedProduct => GaussianState::squeezed_product(p.r, mode, p.minus_area)?,
        InitialKind::CoherentProduct => GaussianState::coherent_product(mode, mean)?,
        InitialKind::ExplicitCovariance => {
            let c = ini
                .covariance
                .ok_or_else(|| Error::Validation("explicit covariance missing".into()))?;
            return GaussianState::new(mean, Matrix4::from_fn(|i, j| c[i][j]));
        }
    };
    if ini.kind != InitialKind::CoherentProduct && ini.mean.is_some() {
        return GaussianState::new(mean, *state.cov());
    }
    Ok(state)
}

pub fn simulation_times(cfg: &RunConfig) -> Vec<f64> {
    uniform_grid(cfg.time.t_max, cfg.time.dt)
}

pub fn simulate(cfg: &RunConfig, p: &Point) -> Result<Trajectory> {
    let model = build_model(cfg, p)?;
    let init = initial_state(cfg, p, &model)?;
    let prop = Propagator::new(&model)?;
    prop.evolve(
        &init,
        &simulation_times(cfg),
        EvolveOptions {
            override_horizon: cfg.time.override_horizon,
        },
    )
}

/// Symmetric-coupling coefficient trace on `[0, min(t_max, horizon)]`.
pub fn symmetric_trace(cfg: &RunConfig, model: &FullModel) -> Result<CoefficientTrace> {
    if model.coupling() != CouplingType::Symmetric {
        return Err(Error::Unsupported(
            "coefficient traces are computed for symmetric coupling only; position-coupling dynamics \
             use the exact bath simulation (time-dependent position-coupling coefficients are out of scope)"
                .into(),
        ));
    }
    let t_end = cfg.time.t_max.min(model.bath().validity_horizon());
    let times = uniform_grid(t_end, cfg.time.coeff_dt);
    coefficient_trace(
        model.bath(),
        model.omega_plus()?,
        model.omega0(),
        &times,
        AmplitudeOptions::default(),
    )
}

/// Stationary `(Δx₊, Δp₊)` for the model at its bath temperature.
pub fn stationary(cfg: &RunConfig, model: &FullModel) -> Result<(f64, f64)> {
    match model.coupling() {
        CouplingType::Position => {
            stationary_variances_position(model.bath().density(), model.omega_plus()?, model.bath().temperature())
        }
        CouplingType::Symmetric => {
            let trace = symmetric_trace(cfg, model)?;
            stationary_variances_symmetric(&trace, model.plus_mode()?)
        }
    }
}

pub fn summary_from(cfg: &RunConfig, p: &Point, model: &FullModel, pair: (f64, f64)) -> Result<PhaseSummary> {
    PhaseSummary::new(
        p.temperature,
        p.r,
        p.c12,
        p.minus_area,
        pair,
        model.minus_mode(),
        model.plus_mode()?,
        cfg.model.r_crit_formula,
    )
}

pub fn summarize(cfg: &RunConfig, p: &Point) -> Result<PhaseSummary> {
    let model = build_model(cfg, p)?;
    let pair = stationary(cfg, &model)?;
    summary_from(cfg, p, &model, pair)
}

/// Late-time behavior of the simulated `E_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedEnvelope {
    pub e_min: f64,
    pub e_max: f64,
    pub phase: Phase,
}

/// Always positive → NSD, intermittently zero → SDR, zero → SD.
pub fn classify_simulated(e_min: f64, e_max: f64) -> Phase {
    if e_min > SIM_ZERO {
        Phase::Nsd
    } else if e_max > SIM_ZERO {
        Phase::Sdr
    } else {
        Phase::Sd
    }
}

pub fn late_envelope(traj: &Trajectory) -> Result<SimulatedEnvelope> {
    let en = traj.log_negativities()?;
    let t_end = *traj.times.last().expect("non-empty");
    let (e_min, e_max) = late_time_extrema(&traj.times, &en, LATE_FRACTION * t_end)
        .ok_or_else(|| Error::Validation("empty late-time window".into()))?;
    Ok(SimulatedEnvelope {
        e_min,
        e_max,
        phase: classify_simulated(e_min, e_max),
    })
}

/// Distance of the inequality slacks from zero.
pub fn boundary_slack(s: &PhaseSummary) -> f64 {
    let (a, b) = (s.r.abs(), s.r_crit.abs());
    ((a - b).abs() - s.s_crit).abs().min((a + b - s.s_crit).abs())
}

/// Largest deviation between simulated and predicted envelope extremes.
pub fn envelope_deviation(s: &PhaseSummary, sim: &SimulatedEnvelope) -> f64 {
    let (lo, hi) = envelope_bounds(s.e_mean, s.e_amp);
    (sim.e_min - lo).abs().max((sim.e_max - hi).abs())
}
