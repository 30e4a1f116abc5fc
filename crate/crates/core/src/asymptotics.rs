//! Asymptotic layer: stationary dispersions of the `x₊` mode, the squeezing
//! and area thresholds, the entanglement envelope and the phase classifier.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bath::{coth_factor, OhmicSpectralDensity, SpectralDensity};
use crate::error::{Error, Result};
use crate::exact::{fmt_sig, CouplingType};
use crate::gaussian::ModeSpec;
use crate::quad::{integrate, QuadOptions};
use crate::rwa::CoefficientTrace;

/// Half-width of the band around a phase boundary labeled toward the less
/// entangled phase.
pub const PHASE_EPS: f64 = 1e-9;

/// Largest secular drift of the late-time ratio `D̃/γ̃` accepted by
/// [`stationary_variances_symmetric`].
pub const SYMMETRIC_DRIFT_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// Sudden death.
    #[serde(rename = "SD")]
    Sd,
    /// Sudden death and revivals.
    #[serde(rename = "SDR")]
    Sdr,
    /// No sudden death.
    #[serde(rename = "NSD")]
    Nsd,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Sd => "SD",
            Phase::Sdr => "SDR",
            Phase::Nsd => "NSD",
        }
    }

    /// Rank along increasing entanglement: SD < SDR < NSD.
    pub fn rank(self) -> u8 {
        match self {
            Phase::Sd => 0,
            Phase::Sdr => 1,
            Phase::Nsd => 2,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be positive, got {v}")))
    }
}

/// Real and imaginary parts of `χ⁻¹(w)/m` for the `x₊` mode of the position
/// coupling with an Ohmic bath and hard cutoff.
fn inverse_susceptibility(j: &OhmicSpectralDensity, omega_plus: f64, w: f64) -> (f64, f64) {
    let g = j.gamma0();
    let l = j.cutoff();
    let log = if w > 0.0 && w < l {
        ((l - w) / (l + w)).ln()
    } else {
        0.0
    };
    let re = omega_plus * omega_plus - w * w - 2.0 * g * w / PI * log;
    let im = if w < l { 2.0 * g * w } else { 0.0 };
    (re, im)
}

/// `Im χ(w)` of the damped `x₊` mode.
pub fn susceptibility_im(j: &OhmicSpectralDensity, omega_plus: f64, w: f64) -> f64 {
    let (re, im) = inverse_susceptibility(j, omega_plus, w);
    let den = re * re + im * im;
    if den == 0.0 {
        return 0.0;
    }
    im / (j.mass() * den)
}

fn resonance_breaks(j: &OhmicSpectralDensity, omega_plus: f64) -> Vec<f64> {
    let l = j.cutoff();
    let width = j.gamma0().max(1e-6 * omega_plus);
    let mut b = vec![0.0, l];
    for k in [0.25, 1.0, 4.0, 16.0, 64.0] {
        for s in [-1.0, 1.0] {
            let x = omega_plus + s * k * width;
            if x > 0.0 && x < l {
                b.push(x);
            }
        }
    }
    if omega_plus < l {
        b.push(omega_plus);
    }
    b.extend(crate::quad::uniform_breaks(0.0, l, l / 16.0));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-14 * l);
    b
}

/// Stationary `(Δx₊, Δp₊)` of the position-coupled `x₊` mode from the
/// fluctuation-dissipation relation,
/// `Δx₊² = (1/π) ∫ coth(w/2T) Im χ dw` and `Δp₊² = (m²/π) ∫ w² coth(w/2T) Im χ dw`.
///
/// `omega_plus` is the renormalized frequency `Ω₊`.
pub fn stationary_variances_position(
    j: &OhmicSpectralDensity,
    omega_plus: f64,
    temperature: f64,
) -> Result<(f64, f64)> {
    positive("gamma0", j.gamma0())?;
    positive("Ω₊", omega_plus)?;
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::validation(format!("temperature must be non-negative, got {temperature}")));
    }
    let breaks = resonance_breaks(j, omega_plus);
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-10,
        max_panels: 20_000,
    };
    let m = j.mass();
    let fx = |w: f64| {
        if w == 0.0 {
            return if temperature > 0.0 {
                // coth(w/2T) Im χ → 2T · 2γ₀ / (m Ω₊⁴)
                4.0 * temperature * j.gamma0() / (m * omega_plus.powi(4))
            } else {
                0.0
            };
        }
        coth_factor(w, temperature) * susceptibility_im(j, omega_plus, w)
    };
    let x2 = integrate(fx, &breaks, opts)?.value / PI;
    let p2 = integrate(|w| m * m * w * w * fx(w), &breaks, opts)?.value / PI;
    if !(x2 > 0.0 && p2 > 0.0) {
        return Err(Error::numerical("stationary variances are not positive", None));
    }
    Ok((x2.sqrt(), p2.sqrt()))
}

/// Relative secular drift of `D̃/γ̃` over the final quarter of the trace,
/// comparing the ratio of window means on its two halves.
pub fn ratio_drift(trace: &CoefficientTrace) -> f64 {
    let t_end = *trace.times.last().unwrap_or(&0.0);
    let idx: Vec<usize> = (0..trace.times.len()).filter(|&i| trace.times[i] >= 0.75 * t_end).collect();
    let h = idx.len() / 2;
    if h == 0 {
        return f64::INFINITY;
    }
    let ratio = |ix: &[usize]| {
        let d: f64 = ix.iter().map(|&i| trace.diffusion[i]).sum();
        let g: f64 = ix.iter().map(|&i| trace.gamma[i]).sum();
        d / g
    };
    let a = ratio(&idx[..h]);
    let b = ratio(&idx[idx.len() - h..]);
    ((b - a) / ratio(&idx)).abs()
}

/// Balanced stationary pair `Δp₊ = MΩ Δx₊ = sqrt(D̃/2γ̃)` from the late part
/// of a symmetric-coupling coefficient trace. `plus` carries `M` and `Ω`.
pub fn stationary_variances_symmetric(trace: &CoefficientTrace, plus: ModeSpec) -> Result<(f64, f64)> {
    let drift = ratio_drift(trace);
    if !(drift < SYMMETRIC_DRIFT_TOL) {
        return Err(Error::validation(format!(
            "coefficient trace is not asymptotically constant (drift {drift:.3e})"
        )));
    }
    let (gamma, _, diffusion) = trace.late_values(0.25);
    if !(gamma > 0.0 && diffusion > 0.0) {
        return Err(Error::validation(format!(
            "late-time coefficients must be positive (γ̃ = {gamma}, D̃ = {diffusion})"
        )));
    }
    // diffusion holds D̃/(mω₀) and MΩ = mω₀.
    let scale = plus.scale();
    let dp = (scale * diffusion / (2.0 * gamma)).sqrt();
    Ok((dp / scale, dp))
}

/// Which expression of the equilibrium squeezing to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RCritFormula {
    /// `½ ln[m₋ω₋ Δx₊/Δp₊]`.
    #[default]
    General,
    /// `½ ln[mΩ Δx₊/Δp₊] + ¼ ln[ω₋/Ω]`.
    Interacting,
}

/// Squeezing of the equilibrium `x₊` state measured in the units of the
/// relative mode. `plus` supplies `m` and `Ω`; the two formulas agree when
/// `m₋ω₋ = mΩ`.
pub fn r_crit(dx: f64, dp: f64, minus: ModeSpec, plus: ModeSpec, formula: RCritFormula) -> Result<f64> {
    positive("Δx₊", dx)?;
    positive("Δp₊", dp)?;
    Ok(match formula {
        RCritFormula::General => 0.5 * (minus.scale() * dx / dp).ln(),
        RCritFormula::Interacting => {
            0.5 * (plus.scale() * dx / dp).ln() + 0.25 * (minus.frequency / plus.frequency).ln()
        }
    })
}

/// `½ ln[4 Δx₊Δp₊ δx₋δp₋]`.
pub fn s_crit(dx_plus: f64, dp_plus: f64, dx_minus: f64, dp_minus: f64) -> Result<f64> {
    for (n, v) in [("Δx₊", dx_plus), ("Δp₊", dp_plus), ("δx₋", dx_minus), ("δp₋", dp_minus)] {
        positive(n, v)?;
    }
    Ok(0.5 * (4.0 * dx_plus * dp_plus * dx_minus * dp_minus).ln())
}

/// `(Ẽ_N, ΔE_N) = (max{|r|,|r_crit|} − S_crit, min{|r|,|r_crit|})`.
pub fn envelope(r: f64, r_crit: f64, s_crit: f64) -> (f64, f64) {
    let (a, b) = (r.abs(), r_crit.abs());
    (a.max(b) - s_crit, a.min(b))
}

/// Range `[max{0, Ẽ−Δ}, max{0, Ẽ+Δ}]` swept by the asymptotic `E_N`.
pub fn envelope_bounds(e_mean: f64, e_amp: f64) -> (f64, f64) {
    ((e_mean - e_amp).max(0.0), (e_mean + e_amp).max(0.0))
}

/// Period `π/ω₋` of the asymptotic oscillation of `E_N`.
pub fn envelope_period(omega_minus: f64) -> f64 {
    PI / omega_minus
}

/// Three-way phase label. Points within [`PHASE_EPS`] of a boundary get the
/// less entangled label.
pub fn classify(r: f64, r_crit: f64, s_crit: f64) -> Phase {
    let (a, b) = (r.abs(), r_crit.abs());
    if (a - b).abs() > s_crit + PHASE_EPS {
        Phase::Nsd
    } else if a + b > s_crit + PHASE_EPS {
        Phase::Sdr
    } else {
        Phase::Sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceFlags {
    /// A coherent relative-mode input ends up entangled.
    pub coherent_entangles: bool,
    /// The bath supplies more entanglement than the input squeezing.
    pub environment_amplifies: bool,
}

/// `coherent_entangles = |r_crit| > ½ ln(2Δx₊Δp₊)`,
/// `environment_amplifies = |r_crit| − S_crit ≥ 2|r|`.
pub fn resource_conditions(r: f64, r_crit: f64, s_crit: f64, dx_plus: f64, dp_plus: f64) -> ResourceFlags {
    ResourceFlags {
        coherent_entangles: r_crit.abs() > 0.5 * (2.0 * dx_plus * dp_plus).ln(),
        environment_amplifies: r_crit.abs() - s_crit >= 2.0 * r.abs(),
    }
}

/// Asymptotic mode frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormalizedFrequencies {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_r: f64,
    pub c12: f64,
}

/// `(Ω₊, ω₋, Ω_R, C₁₂)` from the bare `ω₀`, `c₁₂` and the shift `δω²`.
///
/// Position coupling: `Ω₊² = ω₀² + c₁₂ + δω²`, `ω₋² = ω₀² − c₁₂`,
/// `Ω_R² = ω₀² + δω²/2`, `C₁₂ = c₁₂ + δω²/2`. Symmetric coupling:
/// `Ω_R = ω₀ + δω²/ω₀`, `Ω₊ = Ω_R + c₁₂/ω₀`, `ω₋ = ω₀ − c₁₂/ω₀`, `C₁₂ = c₁₂`.
pub fn renormalized_frequencies(
    omega0: f64,
    c12: f64,
    delta_omega2: f64,
    coupling: CouplingType,
) -> Result<RenormalizedFrequencies> {
    positive("ω₀", omega0)?;
    let regime = |name: &str, v: f64| -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ParameterRegime(format!("{name} = {v:.6} is not positive")))
        }
    };
    let w2 = omega0 * omega0;
    match coupling {
        CouplingType::Position => Ok(RenormalizedFrequencies {
            omega_plus: regime("Ω₊²", w2 + c12 + delta_omega2)?.sqrt(),
            omega_minus: regime("ω₋²", w2 - c12)?.sqrt(),
            omega_r: regime("Ω_R²", w2 + 0.5 * delta_omega2)?.sqrt(),
            c12: c12 + 0.5 * delta_omega2,
        }),
        CouplingType::Symmetric => {
            let omega_r = regime("Ω_R", omega0 + delta_omega2 / omega0)?;
            Ok(RenormalizedFrequencies {
                omega_plus: regime("Ω₊", omega_r + c12 / omega0)?,
                omega_minus: regime("ω₋", omega0 - c12 / omega0)?,
                omega_r,
                c12,
            })
        }
    }
}

/// Asymptotic prediction for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub temperature: f64,
    pub r: f64,
    pub c12: f64,
    /// Purity `1/(2 δx₋δp₋)` of the relative-mode input.
    pub purity: f64,
    pub dx_plus: f64,
    pub dp_plus: f64,
    pub r_crit: f64,
    pub s_crit: f64,
    pub e_mean: f64,
    pub e_amp: f64,
    pub phase: Phase,
    pub flags: ResourceFlags,
}

pub const PHASE_HEADER: &str = "T,r,C12,purity,dx_plus,dp_plus,r_crit,s_crit,e_mean,e_amp,phase";

impl PhaseSummary {
    /// Assembles the summary from the stationary pair and the relative-mode
    /// input with squeezing `r` and symplectic area `area_minus = δx₋δp₋`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        temperature: f64,
        r: f64,
        c12: f64,
        area_minus: f64,
        stationary: (f64, f64),
        minus: ModeSpec,
        plus: ModeSpec,
        formula: RCritFormula,
    ) -> Result<Self> {
        if !(area_minus >= 0.5 - 1e-12) {
            return Err(Error::validation(format!("relative-mode area {area_minus} is below 1/2")));
        }
        let (dx, dp) = stationary;
        let rc = r_crit(dx, dp, minus, plus, formula)?;
        let sc = 0.5 * (4.0 * dx * dp * area_minus).ln();
        let (e_mean, e_amp) = envelope(r, rc, sc);
        Ok(Self {
            temperature,
            r,
            c12,
            purity: 0.5 / area_minus,
            dx_plus: dx,
            dp_plus: dp,
            r_crit: rc,
            s_crit: sc,
            e_mean,
            e_amp,
            phase: classify(r, rc, sc),
            flags: resource_conditions(r, rc, sc, dx, dp),
        })
    }

    /// CSV row matching [`PHASE_HEADER`].
    pub fn csv_row(&self) -> String {
        [
            self.temperature,
            self.r,
            self.c12,
            self.purity,
            self.dx_plus,
            self.dp_plus,
            self.r_crit,
            self.s_crit,
            self.e_mean,
            self.e_amp,
        ]
        .iter()
        .map(|v| fmt_sig(*v))
        .chain(std::iter::once(self.phase.to_string()))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Bisects for the point in `[lo, hi]` where `label` changes, assuming
/// exactly one change between the endpoints.
pub fn bisect_boundary<F: Fn(f64) -> Phase>(label: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let left = label(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if label(mid) == left {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A label change along `r` at fixed `(r_crit, S_crit)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub r: f64,
    pub below: Phase,
    pub above: Phase,
}

/// Locates every label change for `r ∈ [0, r_max]` by scanning `samples`
/// points and bisecting to `tol`.
pub fn phase_boundaries_in_r(r_crit: f64, s_crit: f64, r_max: f64, samples: usize, tol: f64) -> Vec<BoundaryPoint> {
    let label = |r: f64| classify(r, r_crit, s_crit);
    let n = samples.max(2);
    let grid: Vec<f64> = (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect();
    grid.windows(2)
        .filter(|w| label(w[0]) != label(w[1]))
        .map(|w| BoundaryPoint {
            r: bisect_boundary(label, w[0], w[1], tol),
            below: label(w[0]),
            above: label(w[1]),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> ModeSpec {
        ModeSpec::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(2.0, 0.5, 1.0), Phase::Nsd);
        assert_eq!(classify(0.4, 0.5, 1.0), Phase::Sd);
        assert_eq!(classify(0.8, 0.5, 1.0), Phase::Sdr);
        assert_eq!(classify(-2.0, 0.5, 1.0), Phase::Nsd);
    }

    #[test]
    fn ties_go_to_less_entangled() {
        assert_eq!(classify(1.5, 0.5, 1.0), Phase::Sdr);
        assert_eq!(classify(0.5, 0.5, 1.0), Phase::Sd);
        assert_eq!(classify(1.5 + 0.5e-9, 0.5, 1.0), Phase::Sdr);
        assert_eq!(classify(1.5 + 2e-9, 0.5, 1.0), Phase::Nsd);
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(envelope(0.0, 0.0, 0.3), (-0.3, 0.0));
        let (e, d) = envelope(2.0, 0.5, 1.0);
        assert_relative_eq!(e, 1.0);
        assert_relative_eq!(d, 0.5);
        assert_eq!(envelope_bounds(-0.3, 0.0), (0.0, 0.0));
        assert_eq!(envelope_bounds(1.0, 0.5), (0.5, 1.5));
        assert_relative_eq!(envelope_period(2.0), PI / 2.0);
    }

    #[test]
    fn s_crit_examples() {
        let h = 0.5f64.sqrt();
        assert!(s_crit(h, h, h, h).unwrap().abs() < 1e-15);
        let e = 1.0f64.exp();
        assert_relative_eq!(s_crit(e * h, e * h, h, h).unwrap(), 1.0, epsilon = 1e-14);
        assert!(s_crit(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn r_crit_examples() {
        let m = ModeSpec::new(1.0, 2.0).unwrap();
        assert!(r_crit(0.5, 1.0, m, m, RCritFormula::General).unwrap().abs() < 1e-15);
        assert!(r_crit(0.5, 1.0, m, m, RCritFormula::Interacting).unwrap().abs() < 1e-15);
        let e2 = 2.0f64.exp();
        assert_relative_eq!(r_crit(e2, 1.0, unit(), unit(), RCritFormula::General).unwrap(), 1.0, epsilon = 1e-14);
        // Balanced pair with ω₋ ≠ Ω leaves only the frequency term.
        let plus = ModeSpec::new(1.0, 1.0).unwrap();
        let minus = ModeSpec::new(1.0, 1.5).unwrap();
        let rc = r_crit(1.0, 1.0, minus, plus, RCritFormula::Interacting).unwrap();
        assert_relative_eq!(rc, 0.25 * 1.5f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn symmetric_modes_give_zero_r_crit() {
        // MΩ = m₋ω₋ = mω₀ for the symmetric model.
        let (m, w0, c) = (1.3, 2.0, 0.4);
        let f = renormalized_frequencies(w0, c, 0.0, CouplingType::Symmetric).unwrap();
        let plus = ModeSpec::new(m * w0 / f.omega_plus, f.omega_plus).unwrap();
        let minus = ModeSpec::new(m * w0 / f.omega_minus, f.omega_minus).unwrap();
        let dp = 1.7;
        let dx = dp / plus.scale();
        assert!(r_crit(dx, dp, minus, plus, RCritFormula::General).unwrap().abs() < 1e-9);
    }

    #[test]
    fn renormalized_frequency_examples() {
        let f = renormalized_frequencies(1.5, 0.0, 0.0, CouplingType::Position).unwrap();
        assert_eq!((f.omega_plus, f.omega_minus, f.omega_r, f.c12), (1.5, 1.5, 1.5, 0.0));
        let shift = OhmicSpectralDensity::new(0.1, 20.0, 1.0).unwrap().static_shift();
        assert_relative_eq!(shift, -8.0 / PI, epsilon = 1e-14);
        let f = renormalized_frequencies(3.0, 0.0, shift, CouplingType::Position).unwrap();
        assert_relative_eq!(f.c12, shift / 2.0);
        assert_relative_eq!(f.omega_minus, 3.0);
        assert_relative_eq!(f.omega_plus * f.omega_plus, 9.0 + shift, epsilon = 1e-12);
        assert!(matches!(
            renormalized_frequencies(1.0, 0.0, shift, CouplingType::Position),
            Err(Error::ParameterRegime(_))
        ));
        let s = renormalized_frequencies(2.0, 0.5, 0.0, CouplingType::Symmetric).unwrap();
        assert_relative_eq!(s.omega_plus, 2.25);
        assert_relative_eq!(s.omega_minus, 1.75);
    }

    #[test]
    fn coherent_condition_matches_vacuum_limit() {
        for (dx, dp) in [(0.6, 0.9), (0.9, 0.6), (0.8, 0.8), (0.71, 0.75), (1.2, 0.3)] {
            let rc = r_crit(dx, dp, unit(), unit(), RCritFormula::General).unwrap();
            let s = s_crit(dx, dp, 0.5f64.sqrt(), 0.5f64.sqrt()).unwrap();
            let flags = resource_conditions(0.0, rc, s, dx, dp);
            let direct = f64::min(dx * dx, dp * dp) < 0.5;
            assert_eq!(flags.coherent_entangles, direct, "({dx}, {dp})");
        }
    }

    #[test]
    fn amplification_flag() {
        assert!(resource_conditions(0.2, 1.5, 1.0, 1.0, 1.0).environment_amplifies);
        assert!(!resource_conditions(0.3, 1.5, 1.0, 1.0, 1.0).environment_amplifies);
    }

    #[test]
    fn summary_row() {
        let h = 0.5f64.sqrt();
        let s = PhaseSummary::new(1.0, 2.0, 0.0, 0.5, (h, h), unit(), unit(), RCritFormula::General).unwrap();
        assert_eq!(s.phase, Phase::Nsd);
        assert_eq!(s.purity, 1.0);
        assert!(s.csv_row().ends_with(",NSD"));
        assert_eq!(s.csv_row().split(',').count(), PHASE_HEADER.split(',').count());
        assert!(PhaseSummary::new(1.0, 2.0, 0.0, 0.4, (h, h), unit(), unit(), RCritFormula::General).is_err());
    }

    #[test]
    fn boundaries_match_inequalities() {
        let b = phase_boundaries_in_r(0.5, 1.0, 3.0, 301, 1e-12);
        assert_eq!(b.len(), 2);
        assert_relative_eq!(b[0].r, 0.5, epsilon = 1e-9);
        assert_eq!((b[0].below, b[0].above), (Phase::Sd, Phase::Sdr));
        assert_relative_eq!(b[1].r, 1.5, epsilon = 1e-9);
        assert_eq!((b[1].below, b[1].above), (Phase::Sdr, Phase::Nsd));
    }

    #[test]
    fn weak_coupling_ground_state_is_nearly_pure() {
        let j = OhmicSpectralDensity::new(0.01, 20.0, 1.0).unwrap();
        let (dx, dp) = stationary_variances_position(&j, 1.0, 0.0).unwrap();
        assert!((dx * dp / 0.5 - 1.0).abs() < 0.02, "{}", dx * dp);
    }

    #[test]
    fn high_temperature_equipartition() {
        let j = OhmicSpectralDensity::new(0.1, 20.0, 1.0).unwrap();
        let wp = 1.5;
        let t = 10.0 * wp;
        let (dx, dp) = stationary_variances_position(&j, wp, t).unwrap();
        assert!((dp * dp / t - 1.0).abs() < 0.05, "{}", dp * dp / t);
        assert!((wp * wp * dx * dx / t - 1.0).abs() < 0.05, "{}", wp * wp * dx * dx / t);
    }

    #[test]
    fn ground_state_is_position_squeezed_in_plus_units() {
        // At T = 0 the bath narrows Δx₊ and broadens Δp₊ relative to the
        // free oscillator, so r_crit < 0 when measured with m₋ω₋ = Ω₊.
        let j = OhmicSpectralDensity::new(0.1, 20.0, 1.0).unwrap();
        let (dx, dp) = stationary_variances_position(&j, 1.0, 0.0).unwrap();
        assert!(dx * dp > 0.5);
        assert!(dp > 0.5f64.sqrt() && dx < 0.5f64.sqrt());
    }

    proptest! {
        #[test]
        fn monotone_traversal(rc in -3.0f64..3.0, s in -1.0f64..2.0, steps in 10usize..200) {
            let labels: Vec<Phase> = (0..=steps)
                .map(|i| classify(4.0 * i as f64 / steps as f64, rc, s))
                .collect();
            for w in labels.windows(2) {
                // SD is never re-entered once left.
                prop_assert!(!(w[0] != Phase::Sd && w[1] == Phase::Sd));
            }
            if rc.abs() <= s {
                for w in labels.windows(2) {
                    prop_assert!(w[1].rank() >= w[0].rank(), "{:?} -> {:?}", w[0], w[1]);
                }
            }
        }

        #[test]
        fn labels_follow_inequalities(r in -3.0f64..3.0, rc in -3.0f64..3.0, s in -1.0f64..3.0) {
            let (a, b) = (r.abs(), rc.abs());
            let margin = 1e-6;
            let ph = classify(r, rc, s);
            if (a - b).abs() > s + margin {
                prop_assert_eq!(ph, Phase::Nsd);
            } else if (a - b).abs() < s - margin && a + b > s + margin {
                prop_assert_eq!(ph, Phase::Sdr);
            } else if a + b < s - margin {
                prop_assert_eq!(ph, Phase::Sd);
            }
        }

        #[test]
        fn mixed_state_shift(dx in 0.3f64..3.0, dp in 0.3f64..3.0, kappa in 1.0f64..20.0) {
            prop_assume!(dx * dp >= 0.5);
            let h = 0.5f64.sqrt();
            let pure = s_crit(dx, dp, h, h).unwrap();
            let k = kappa.sqrt();
            let mixed = s_crit(dx, dp, h * k, h * k).unwrap();
            prop_assert!((mixed - pure - 0.5 * kappa.ln()).abs() < 1e-12);
        }

        #[test]
        fn envelope_invariants(r in -3.0f64..3.0, rc in -3.0f64..3.0, s in 0.0f64..3.0) {
            let (e, d) = envelope(r, rc, s);
            prop_assert!(d >= 0.0);
            prop_assert!((e + s - r.abs().max(rc.abs())).abs() < 1e-14);
        }
    }
}
