//! Ohmic spectral density, thermal occupations and the discretized bath.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_complex, QuadOptions};

/// A spectral density with a hard upper cutoff.
pub trait SpectralDensity {
    /// Value at `w`, assumed `w >= 0`.
    fn density(&self, w: f64) -> f64;
    fn cutoff(&self) -> f64;
}

/// `J(w) = (2/pi) m gamma0 w` for `w < cutoff`, zero above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicSpectralDensity {
    gamma0: f64,
    cutoff: f64,
    mass: f64,
}

impl OhmicSpectralDensity {
    /// `gamma0 = 0` is accepted and describes a decoupled bath.
    pub fn new(gamma0: f64, cutoff: f64, mass: f64) -> Result<Self> {
        if !(gamma0.is_finite() && gamma0 >= 0.0) {
            return Err(Error::validation(format!("gamma0 must be non-negative, got {gamma0}")));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::validation(format!("cutoff must be positive, got {cutoff}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::validation(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { gamma0, cutoff, mass })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Closed form of `int_0^cutoff J(w) dw`.
    pub fn total_weight(&self) -> f64 {
        self.mass * self.gamma0 * self.cutoff * self.cutoff / PI
    }

    /// Static frequency shift `-(2/m) int J(w)/w dw = -4 gamma0 cutoff / pi`.
    pub fn static_shift(&self) -> f64 {
        -4.0 * self.gamma0 * self.cutoff / PI
    }

    /// Same shape in the ladder-operator normalization used for the symmetric
    /// coupling, referenced to the oscillator frequency `omega`.
    pub fn ladder(&self, omega: f64) -> Result<LadderDensity> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::validation(format!("reference frequency must be positive, got {omega}")));
        }
        Ok(LadderDensity { base: *self, omega })
    }
}

impl SpectralDensity for OhmicSpectralDensity {
    fn density(&self, w: f64) -> f64 {
        if w < self.cutoff {
            2.0 / PI * self.mass * self.gamma0 * w
        } else {
            0.0
        }
    }

    fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

/// `J(w) / (2 m omega)`: the ladder-form density whose resonant golden-rule
/// amplitude damping equals `gamma0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderDensity {
    base: OhmicSpectralDensity,
    omega: f64,
}

impl LadderDensity {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Conversion factor from the position-form density.
    pub fn scale(&self) -> f64 {
        1.0 / (2.0 * self.base.mass * self.omega)
    }
}

impl SpectralDensity for LadderDensity {
    fn density(&self, w: f64) -> f64 {
        self.base.density(w) * self.scale()
    }

    fn cutoff(&self) -> f64 {
        self.base.cutoff
    }
}

/// Checked evaluation of the Ohmic density.
pub fn j_of_w(j: &OhmicSpectralDensity, w: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::validation(format!("frequency must be non-negative, got {w}")));
    }
    Ok(j.density(w))
}

/// Bose occupation `1/(exp(w/T) - 1)`, zero at `T = 0`.
pub fn thermal_occupation(w: f64, temperature: f64) -> Result<f64> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::validation(format!("frequency must be positive, got {w}")));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::validation(format!("temperature must be non-negative, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (w / temperature).exp_m1())
}

/// `coth(w / 2T)`, i.e. `2 nbar + 1`, with the `T = 0` limit.
pub fn coth_factor(w: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return 1.0;
    }
    let x = w / (2.0 * temperature);
    if x < 1e-4 {
        1.0 / x + x / 3.0
    } else {
        1.0 / x.tanh()
    }
}

/// N-mode midpoint discretization of an Ohmic bath.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    density: OhmicSpectralDensity,
    temperature: f64,
    dw: f64,
    frequencies: Vec<f64>,
    masses: Vec<f64>,
    couplings: Vec<f64>,
}

/// Builds the midpoint grid `w_k = (k - 1/2) dw`, `dw = cutoff / n`, with
/// `c_k^2 = 2 m_k w_k J(w_k) dw` and unit bath masses.
pub fn discretize(j: &OhmicSpectralDensity, n: usize, temperature: f64) -> Result<DiscretizedBath> {
    if n == 0 {
        return Err(Error::validation("number of bath modes must be at least 1"));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::validation(format!("temperature must be non-negative, got {temperature}")));
    }
    let dw = j.cutoff / n as f64;
    let frequencies: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * dw).collect();
    let masses = vec![1.0; n];
    let couplings = frequencies
        .iter()
        .zip(&masses)
        .map(|(&w, &mk)| (2.0 * mk * w * j.density(w) * dw).sqrt())
        .collect();
    Ok(DiscretizedBath {
        density: *j,
        temperature,
        dw,
        frequencies,
        masses,
        couplings,
    })
}

impl DiscretizedBath {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn density(&self) -> &OhmicSpectralDensity {
        &self.density
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn spacing(&self) -> f64 {
        self.dw
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Position-form couplings `c_k`.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Ladder-form couplings `g_k` with `g_k^2 = J(w_k) dw / (2 m omega)`.
    pub fn ladder_couplings(&self, omega: f64) -> Vec<f64> {
        let scale = 1.0 / (2.0 * self.density.mass * omega);
        self.frequencies
            .iter()
            .map(|&w| (self.density.density(w) * self.dw * scale).sqrt())
            .collect()
    }

    /// `T_rec = 2 pi / dw`.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.dw
    }

    /// Half the recurrence time.
    pub fn validity_horizon(&self) -> f64 {
        0.5 * self.recurrence_time()
    }

    /// `sum_k c_k^2 / (2 m_k w_k)`, the discrete counterpart of `int J dw`.
    pub fn sum_rule(&self) -> f64 {
        self.iter_modes().map(|(w, mk, c)| c * c / (2.0 * mk * w)).sum()
    }

    /// `-sum_k c_k^2 / (m m_k w_k^2)` for a system of mass `m`.
    pub fn static_shift(&self) -> f64 {
        let m = self.density.mass;
        -self.iter_modes().map(|(w, mk, c)| c * c / (m * mk * w * w)).sum::<f64>()
    }

    pub fn occupations(&self) -> Vec<f64> {
        self.frequencies
            .iter()
            .map(|&w| thermal_occupation(w, self.temperature).expect("grid frequencies are positive"))
            .collect()
    }

    /// `sum_k g_k^2 exp(-i w_k s)` in the ladder normalization at `omega`.
    pub fn discrete_kernel(&self, omega: f64, s: f64) -> Complex64 {
        self.ladder_couplings(omega)
            .iter()
            .zip(&self.frequencies)
            .map(|(g, &w)| g * g * Complex64::from_polar(1.0, -w * s))
            .sum()
    }

    fn iter_modes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.frequencies
            .iter()
            .zip(&self.masses)
            .zip(&self.couplings)
            .map(|((&w, &mk), &c)| (w, mk, c))
    }
}

/// Memory kernel `eta(s) = int_0^inf J(w) exp(-i w s) dw`.
///
/// Panels are no wider than a quarter period of the integrand.
pub fn eta_kernel<J: SpectralDensity>(j: &J, s: f64) -> Result<Complex64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::validation(format!("kernel time must be non-negative, got {s}")));
    }
    let cutoff = j.cutoff();
    let width = if s > 0.0 { (0.5 * PI / s).min(cutoff) } else { cutoff };
    let breaks = crate::quad::uniform_breaks(0.0, cutoff, width);
    let opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_panels: 20 * breaks.len() + 200,
    };
    let r = integrate_complex(|w| j.density(w) * Complex64::from_polar(1.0, -w * s), &breaks, opts)?;
    Ok(r.value)
}

/// Adaptive quadrature of `int_0^cutoff J(w) dw`.
pub fn integrated_weight<J: SpectralDensity>(j: &J) -> Result<f64> {
    Ok(integrate(|w| j.density(w), &[0.0, j.cutoff()], QuadOptions::default())?.value)
}

/// Writes `t,re_eta,im_eta` rows for debugging.
pub fn write_kernel_csv<J: SpectralDensity, W: Write>(j: &J, times: &[f64], mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::validation(format!("kernel export failed: {e}"));
    writeln!(out, "t,re_eta,im_eta").map_err(io)?;
    for &t in times {
        let eta = eta_kernel(j, t)?;
        writeln!(out, "{t:.12e},{:.12e},{:.12e}", eta.re, eta.im).map_err(io)?;
    }
    Ok(())
}
