//! Amplitude equations of the number-conserving (symmetric) coupling and the
//! exact time-dependent master-equation coefficients derived from them.
//!
//! With `a(t) = u a(0) + Σ p_n b_n(0)` and `b_k(t) = d_k a(t) + Σ q_kn b_n(0)`,
//! the pair `(u, v_k)` of coefficients of `a(0)` obeys
//!
//! ```text
//! du/dt   = σ i ω u   − i Σ g_k v_k
//! dv_k/dt = σ i w_k v_k − i g_k u
//! ```
//!
//! where `σ = +1` reproduces the printed Heisenberg equations and `σ = −1` is
//! the conventional sign. The propagator is complex symmetric, so `p_n = v_n`
//! and `d_k = v_k / u`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{DiscretizedBath, SpectralDensity};
use crate::error::{Error, Result};
use crate::exact::fmt_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `da/dt = +iωa − i Σ g b`.
    #[default]
    Printed,
    /// `da/dt = −iωa − i Σ g b`.
    Conventional,
}

impl SignConvention {
    pub fn sigma(self) -> f64 {
        match self {
            SignConvention::Printed => 1.0,
            SignConvention::Conventional => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AmplitudeOptions {
    pub sign: SignConvention,
    /// Upper bound on the internal step; defaults to `0.05 / Λ`.
    pub max_step: Option<f64>,
}

/// Bath seen by the ladder-form amplitude equations.
#[derive(Debug, Clone)]
pub struct LadderBath {
    pub frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
    pub occupations: Vec<f64>,
    pub cutoff: f64,
    pub temperature: f64,
}

impl LadderBath {
    /// Ladder couplings referenced to `omega_ref` (the bare `ω₀` of the model).
    pub fn from_bath(bath: &DiscretizedBath, omega_ref: f64) -> Self {
        Self {
            frequencies: bath.frequencies().to_vec(),
            couplings: bath.ladder_couplings(omega_ref),
            occupations: bath.occupations(),
            cutoff: bath.density().cutoff(),
            temperature: bath.temperature(),
        }
    }
}

/// Coefficient tables on a uniform grid.
#[derive(Debug, Clone)]
pub struct AmplitudeSolution {
    pub times: Vec<f64>,
    pub u: Vec<Complex64>,
    /// `p[i][n]` at `times[i]`.
    pub p: Vec<Vec<Complex64>>,
    pub omega: f64,
    /// `ω₀` used to normalize the ladder couplings and the frequency shift.
    pub omega_ref: f64,
    pub sign: SignConvention,
    pub bath: LadderBath,
    step: f64,
    substeps: usize,
}

/// One unitary step of length `h`: a fourth-order composition of symmetric
/// splittings between the diagonal part and the rank-two coupling.
struct Stepper {
    stages: Vec<Stage>,
    g: Vec<f64>,
    gnorm: f64,
}

struct Stage {
    half_phase0: Complex64,
    half_phase: Vec<Complex64>,
    cos: f64,
    sin: f64,
}

impl Stepper {
    fn new(omega: f64, bath: &LadderBath, sigma: f64, h: f64) -> Self {
        let cbrt2 = 2f64.cbrt();
        let w1 = 1.0 / (2.0 - cbrt2);
        let w0 = -cbrt2 * w1;
        let gnorm = bath.couplings.iter().map(|g| g * g).sum::<f64>().sqrt();
        let stage = |a: f64| {
            let tau = a * h;
            Stage {
                half_phase0: Complex64::from_polar(1.0, sigma * omega * tau / 2.0),
                half_phase: bath
                    .frequencies
                    .iter()
                    .map(|w| Complex64::from_polar(1.0, sigma * w * tau / 2.0))
                    .collect(),
                cos: (gnorm * tau).cos(),
                sin: (gnorm * tau).sin(),
            }
        };
        Self {
            stages: vec![stage(w1), stage(w0), stage(w1)],
            g: bath.couplings.clone(),
            gnorm,
        }
    }

    fn free(stage: &Stage, x0: &mut Complex64, y: &mut [Complex64]) {
        *x0 *= stage.half_phase0;
        for (v, ph) in y.iter_mut().zip(&stage.half_phase) {
            *v *= ph;
        }
    }

    fn apply(&self, x0: &mut Complex64, y: &mut [Complex64]) {
        let i = Complex64::i();
        for st in &self.stages {
            Self::free(st, x0, y);
            if self.gnorm > 0.0 {
                let gy: Complex64 = self.g.iter().zip(y.iter()).map(|(g, v)| v * g).sum();
                let a = *x0;
                *x0 = a * st.cos - i * st.sin * gy / self.gnorm;
                let fy = (st.cos - 1.0) * gy / (self.gnorm * self.gnorm);
                let fx = -i * st.sin * a / self.gnorm;
                for (v, g) in y.iter_mut().zip(&self.g) {
                    *v += (fy + fx) * g;
                }
            }
            Self::free(st, x0, y);
        }
    }
}

fn step_size(bath: &LadderBath, omega: f64, dt: f64, opts: AmplitudeOptions) -> Result<(f64, usize)> {
    let wmax = bath.frequencies.iter().copied().fold(omega.abs(), f64::max).max(bath.cutoff);
    let hmax = opts.max_step.unwrap_or(0.05 / wmax);
    if !(hmax > 0.0) {
        return Err(Error::validation("maximal step must be positive"));
    }
    let substeps = (dt / hmax).ceil().max(1.0) as usize;
    Ok((dt / substeps as f64, substeps))
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::validation("amplitude grid needs at least two times"));
    }
    if times[0] != 0.0 {
        return Err(Error::validation("amplitude grid must start at t = 0"));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::validation("amplitude grid must be increasing"));
    }
    for (i, t) in times.iter().enumerate() {
        if (t - i as f64 * dt).abs() > 1e-9 * dt.max(*t) {
            return Err(Error::validation("amplitude grid must be uniform"));
        }
    }
    Ok(dt)
}

/// Solves the amplitude equations for an oscillator of frequency `omega`
/// coupled to `bath` with ladder couplings referenced to `omega_ref`.
///
/// `times` must be the uniform grid `0, dt, 2dt, …`; every grid interval is
/// split into identical unitary substeps no longer than the maximal step.
pub fn solve_amplitude(
    bath: &DiscretizedBath,
    omega: f64,
    omega_ref: f64,
    times: &[f64],
    opts: AmplitudeOptions,
) -> Result<AmplitudeSolution> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::validation(format!("frequency must be positive, got {omega}")));
    }
    if !(omega_ref.is_finite() && omega_ref > 0.0) {
        return Err(Error::validation(format!("reference frequency must be positive, got {omega_ref}")));
    }
    let ladder = LadderBath::from_bath(bath, omega_ref);
    let mut sol = solve_ladder(ladder, omega, times, opts)?;
    sol.omega_ref = omega_ref;
    Ok(sol)
}

/// As [`solve_amplitude`] for an explicitly given ladder bath, with
/// `omega_ref = omega`.
pub fn solve_ladder(
    bath: LadderBath,
    omega: f64,
    times: &[f64],
    opts: AmplitudeOptions,
) -> Result<AmplitudeSolution> {
    let dt = uniform_step(times)?;
    let (h, substeps) = step_size(&bath, omega, dt, opts)?;
    let stepper = Stepper::new(omega, &bath, opts.sign.sigma(), h);

    let n = bath.frequencies.len();
    let mut x0 = Complex64::new(1.0, 0.0);
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut u = Vec::with_capacity(times.len());
    let mut p = Vec::with_capacity(times.len());
    u.push(x0);
    p.push(y.clone());
    for _ in 1..times.len() {
        for _ in 0..substeps {
            stepper.apply(&mut x0, &mut y);
        }
        if !x0.is_finite() {
            return Err(Error::numerical("amplitude integration produced non-finite values", None));
        }
        u.push(x0);
        p.push(y.clone());
    }
    Ok(AmplitudeSolution {
        times: times.to_vec(),
        u,
        p,
        omega,
        omega_ref: omega,
        sign: opts.sign,
        bath,
        step: h,
        substeps,
    })
}

impl AmplitudeSolution {
    /// Internal step length.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// `max_t | |u|² + Σ|p_n|² − 1 |`.
    pub fn unitarity_residual(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.p)
            .map(|(u, p)| (u.norm_sqr() + p.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `d_k = v_k / u` at grid index `i`.
    pub fn d(&self, i: usize) -> Vec<Complex64> {
        self.p[i].iter().map(|v| v / self.u[i]).collect()
    }

    /// Time derivatives `(du/dt, dp_n/dt)` at grid index `i`, from the
    /// equations of motion.
    pub fn derivatives(&self, i: usize) -> (Complex64, Vec<Complex64>) {
        rates(self.omega, self.sign.sigma(), &self.bath, self.u[i], &self.p[i])
    }

    /// `max_k |d_k + Σ_n q_kn p_n*|` at grid index `i`.
    ///
    /// `Σ_n q_kn p_n* = (P y)_k − d_k Σ|p|²` with `y_n = p_n*`, and `P y` is
    /// obtained by propagating `y` from zero with the same unitary steps.
    pub fn constraint_residual(&self, i: usize) -> f64 {
        let stepper = Stepper::new(self.omega, &self.bath, self.sign.sigma(), self.step);
        let mut x0 = Complex64::new(0.0, 0.0);
        let mut y: Vec<Complex64> = self.p[i].iter().map(|v| v.conj()).collect();
        for _ in 0..i * self.substeps {
            stepper.apply(&mut x0, &mut y);
        }
        let d = self.d(i);
        let norm: f64 = self.p[i].iter().map(|v| v.norm_sqr()).sum();
        d.iter()
            .zip(&y)
            .map(|(dk, py)| (py - dk * norm + dk).norm())
            .fold(0.0, f64::max)
    }

    /// Compares the Laplace transform of the computed `u` at real `z > 0`
    /// with the closed form `1/(z − σiω + Σ g²/(z − σiw))`.
    ///
    /// Returns `(numerical, closed_form)`. The grid should extend far enough
    /// that `exp(−z t_max)` is negligible.
    pub fn laplace_check(&self, z: f64) -> (Complex64, Complex64) {
        let s = self.sign.sigma();
        let iu = Complex64::i();
        let dt = self.times[1] - self.times[0];
        let f: Vec<Complex64> = self.times.iter().zip(&self.u).map(|(t, u)| u * (-z * t).exp()).collect();
        let n = f.len();
        // Composite Simpson on an even number of intervals, trapezoid on a leftover one.
        let m = if (n - 1).is_multiple_of(2) { n - 1 } else { n - 2 };
        let mut acc = f[0] + f[m];
        for (k, v) in f.iter().enumerate().take(m).skip(1) {
            acc += v * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let mut numeric = acc * dt / 3.0;
        if m < n - 1 {
            numeric += (f[n - 2] + f[n - 1]) * dt / 2.0;
        }
        let mut den = Complex64::new(z, 0.0) - iu * s * self.omega;
        for (g, w) in self.bath.couplings.iter().zip(&self.bath.frequencies) {
            den += g * g / (Complex64::new(z, 0.0) - iu * s * w);
        }
        (numeric, 1.0 / den)
    }
}

/// Trapezoidal solution of `du/dt = σiωu − ∫₀ᵗ K(t−s) u(s) ds`, `u(0) = 1`,
/// on the grid `0, dt, …, steps·dt`. Cost is quadratic in `steps`.
pub fn volterra_trapezoid<K: Fn(f64) -> Complex64>(
    kernel: K,
    omega: f64,
    sign: SignConvention,
    dt: f64,
    steps: usize,
) -> Vec<Complex64> {
    let iw = Complex64::new(0.0, sign.sigma() * omega);
    let kv: Vec<Complex64> = (0..=steps).map(|j| kernel(j as f64 * dt)).collect();
    let mut u = Vec::with_capacity(steps + 1);
    u.push(Complex64::new(1.0, 0.0));
    let mut rhs_prev = iw;
    for n in 0..steps {
        // memory integral at t_{n+1} without the unknown endpoint term
        let mut mem = 0.5 * kv[n + 1] * u[0];
        for j in 1..=n {
            mem += kv[n + 1 - j] * u[j];
        }
        mem *= dt;
        let c = 0.25 * dt * dt * kv[0];
        // u1 = u0 + dt/2 (rhs_prev + iw u1 − mem − (dt/2) K(0) u1)
        let num = u[n] + 0.5 * dt * (rhs_prev - mem);
        let den = Complex64::new(1.0, 0.0) - 0.5 * dt * iw + c;
        let un = num / den;
        rhs_prev = iw * un - mem - 0.5 * dt * kv[0] * un;
        u.push(un);
    }
    u
}

/// Exact master-equation coefficients on the solution grid.
///
/// `gamma` is `γ̃`, `delta_omega2` is `δΩ̃²` defined through
/// `Ω_R = ω + δΩ̃²/ω₀`, and `diffusion` is `D̃/(mω₀)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientTrace {
    pub times: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta_omega2: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub omega: f64,
    pub omega_ref: f64,
    pub sign: SignConvention,
    pub temperature: f64,
}

/// Tolerance on the unitarity sum accepted by [`extract_coefficients`].
pub const UNITARITY_TOL: f64 = 1e-8;

fn rates(omega: f64, s: f64, bath: &LadderBath, u: Complex64, p: &[Complex64]) -> (Complex64, Vec<Complex64>) {
    let iu = Complex64::i();
    let gp: Complex64 = bath.couplings.iter().zip(p).map(|(g, v)| v * g).sum();
    let du = iu * s * omega * u - iu * gp;
    let dp = p
        .iter()
        .zip(&bath.frequencies)
        .zip(&bath.couplings)
        .map(|((v, w), g)| iu * s * w * v - iu * g * u)
        .collect();
    (du, dp)
}

/// `(γ̃, δΩ̃², D̃/(mω₀))` from the amplitudes at one time.
fn coefficients_at(
    omega: f64,
    omega_ref: f64,
    sign: SignConvention,
    bath: &LadderBath,
    t: f64,
    u: Complex64,
    p: &[Complex64],
) -> Result<(f64, f64, f64)> {
    if u.norm() < 1e-12 {
        return Err(Error::numerical(
            format!("u(t) vanishes at t = {t}; coefficients are undefined"),
            Some(u.norm()),
        ));
    }
    let s = sign.sigma();
    let iu = Complex64::i();
    let (du, dp) = rates(omega, s, bath, u, p);
    let lam = du / u;
    let mut d = 0.0;
    for ((p, dp), occ) in p.iter().zip(&dp).zip(&bath.occupations) {
        let q = iu * (dp - lam * p);
        d += -0.5 * (2.0 * occ + 1.0) * (q.conj() * p).im;
    }
    Ok((-0.5 * lam.re, omega_ref * (s * lam.im - omega), d))
}

/// Extracts `γ̃`, `δΩ̃²` and `D̃/(mω)` from the amplitude solution.
///
/// With `λ = u̇/u`: `γ̃ = −½ Re λ`, `σ Ω_R = Im λ`, and
/// `D̃/(mω) = −½ Σ_l (2n_l+1) Im(Q_l* p_l)` where
/// `Q_l = Σ_k g_k q_kl = i(ṗ_l − λ p_l)`.
pub fn extract_coefficients(sol: &AmplitudeSolution) -> Result<CoefficientTrace> {
    let res = sol.unitarity_residual();
    if res > UNITARITY_TOL {
        return Err(Error::validation(format!(
            "amplitude solution violates unitarity by {res:.3e}"
        )));
    }
    let n = sol.times.len();
    let (mut gamma, mut dw2, mut diff) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let (g, w, d) = coefficients_at(
            sol.omega,
            sol.omega_ref,
            sol.sign,
            &sol.bath,
            sol.times[i],
            sol.u[i],
            &sol.p[i],
        )?;
        gamma.push(g);
        dw2.push(w);
        diff.push(d);
    }
    Ok(CoefficientTrace {
        times: sol.times.clone(),
        gamma,
        delta_omega2: dw2,
        diffusion: diff,
        omega: sol.omega,
        omega_ref: sol.omega_ref,
        sign: sol.sign,
        temperature: sol.bath.temperature,
    })
}

/// As [`solve_amplitude`] followed by [`extract_coefficients`], without
/// storing the bath amplitudes. Memory stays linear in the number of modes.
pub fn coefficient_trace(
    bath: &DiscretizedBath,
    omega: f64,
    omega_ref: f64,
    times: &[f64],
    opts: AmplitudeOptions,
) -> Result<CoefficientTrace> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::validation(format!("frequency must be positive, got {omega}")));
    }
    if !(omega_ref.is_finite() && omega_ref > 0.0) {
        return Err(Error::validation(format!("reference frequency must be positive, got {omega_ref}")));
    }
    let ladder = LadderBath::from_bath(bath, omega_ref);
    let dt = uniform_step(times)?;
    let (h, substeps) = step_size(&ladder, omega, dt, opts)?;
    let stepper = Stepper::new(omega, &ladder, opts.sign.sigma(), h);
    let n = times.len();
    let (mut gamma, mut dw2, mut diff) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut x0 = Complex64::new(1.0, 0.0);
    let mut y = vec![Complex64::new(0.0, 0.0); ladder.frequencies.len()];
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            for _ in 0..substeps {
                stepper.apply(&mut x0, &mut y);
            }
        }
        let res = (x0.norm_sqr() + y.iter().map(|v| v.norm_sqr()).sum::<f64>() - 1.0).abs();
        if !(res <= UNITARITY_TOL) {
            return Err(Error::numerical(
                format!("amplitude integration violates unitarity at t = {t}"),
                Some(res),
            ));
        }
        let (g, w, d) = coefficients_at(omega, omega_ref, opts.sign, &ladder, t, x0, &y)?;
        gamma.push(g);
        dw2.push(w);
        diff.push(d);
    }
    Ok(CoefficientTrace {
        times: times.to_vec(),
        gamma,
        delta_omega2: dw2,
        diffusion: diff,
        omega,
        omega_ref,
        sign: opts.sign,
        temperature: ladder.temperature,
    })
}

pub const COEFFICIENT_HEADER: &str = "t,gamma,delta_omega2,diffusion";

impl CoefficientTrace {
    /// `max_t |D̃/(mω) − γ̃|`.
    pub fn zero_temperature_residual(&self) -> f64 {
        self.diffusion
            .iter()
            .zip(&self.gamma)
            .map(|(d, g)| (d - g).abs())
            .fold(0.0, f64::max)
    }

    fn tail(&self, v: &[f64], fraction: f64) -> Vec<f64> {
        let t_end = *self.times.last().expect("non-empty");
        let t0 = t_end * (1.0 - fraction);
        self.times.iter().zip(v).filter(|(t, _)| **t >= t0).map(|(_, x)| *x).collect()
    }

    /// Averages of `(γ̃, δΩ̃², D̃/(mω))` over the final `fraction` of the run.
    pub fn late_values(&self, fraction: f64) -> (f64, f64, f64) {
        let mean = |v: &[f64]| {
            let t = self.tail(v, fraction);
            t.iter().sum::<f64>() / t.len() as f64
        };
        (mean(&self.gamma), mean(&self.delta_omega2), mean(&self.diffusion))
    }

    /// `Ω_R = ω + δΩ̃²/ω₀` at grid index `i`.
    pub fn renormalized_frequency(&self, i: usize) -> f64 {
        self.omega + self.delta_omega2[i] / self.omega_ref
    }

    /// Secular drift of each coefficient over the final quarter: the change
    /// between the averages over its two halves, relative to the overall
    /// average. Averaging removes the ripple at the cutoff frequency.
    pub fn final_quarter_drift(&self) -> (f64, f64, f64) {
        let drift = |v: &[f64]| {
            let t = self.tail(v, 0.25);
            let h = t.len() / 2;
            if h == 0 {
                return 0.0;
            }
            let a = t[..h].iter().sum::<f64>() / h as f64;
            let b = t[t.len() - h..].iter().sum::<f64>() / h as f64;
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            if a == b {
                0.0
            } else {
                (b - a).abs() / mean.abs()
            }
        };
        (drift(&self.gamma), drift(&self.delta_omega2), drift(&self.diffusion))
    }

    /// Writes the trace; at zero temperature a `residual` column with
    /// `D̃/(mω) − γ̃` is added and its maximum is reported in a footer.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::validation(format!("coefficient export failed: {e}"));
        let zero_t = self.temperature == 0.0;
        if zero_t {
            writeln!(out, "{COEFFICIENT_HEADER},residual").map_err(io)?;
        } else {
            writeln!(out, "{COEFFICIENT_HEADER}").map_err(io)?;
        }
        for i in 0..self.times.len() {
            let mut cols = vec![self.times[i], self.gamma[i], self.delta_omega2[i], self.diffusion[i]];
            if zero_t {
                cols.push(self.diffusion[i] - self.gamma[i]);
            }
            let line: Vec<String> = cols.iter().map(|x| fmt_sig(*x)).collect();
            writeln!(out, "{}", line.join(",")).map_err(io)?;
        }
        if zero_t {
            writeln!(out, "# max_zero_temperature_residual={}", fmt_sig(self.zero_temperature_residual())).map_err(io)?;
        }
        let (g, w, d) = self.final_quarter_drift();
        writeln!(
            out,
            "# final_quarter_drift gamma={} delta_omega2={} diffusion={}",
            fmt_sig(g),
            fmt_sig(w),
            fmt_sig(d)
        )
        .map_err(io)?;
        Ok(())
    }
}

/// First moments `⟨a⟩` and symmetrized occupations `⟨aa† + a†a⟩`.
#[derive(Debug, Clone)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub mean_a: Vec<Complex64>,
    pub occupation: Vec<f64>,
}

/// Integrates the master-equation moment equations
/// `d⟨a⟩/dt = (−2γ̃ + σ i Ω_R)⟨a⟩` and
/// `dN/dt = −4γ̃ N + 4 D̃/(mω)` on `times`, which must coincide with the
/// trace grid. Coefficients are taken piecewise linear; the linear ODEs are
/// advanced with their integrating factors.
pub fn evolve_moments_me(
    trace: &CoefficientTrace,
    mean_a0: Complex64,
    occupation0: f64,
    times: &[f64],
) -> Result<MomentSeries> {
    if times.len() != trace.times.len()
        || times.iter().zip(&trace.times).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs()))
    {
        return Err(Error::validation("moment grid does not match the coefficient grid"));
    }
    let s = trace.sign.sigma();
    let rate = |i: usize| {
        let omega_r = trace.renormalized_frequency(i);
        Complex64::new(-2.0 * trace.gamma[i], s * omega_r)
    };
    let mut mean_a = Vec::with_capacity(times.len());
    let mut occ = Vec::with_capacity(times.len());
    mean_a.push(mean_a0);
    occ.push(occupation0);
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        let phase = 0.5 * h * (rate(i - 1) + rate(i));
        mean_a.push(mean_a[i - 1] * phase.exp());
        let (g0, g1) = (4.0 * trace.gamma[i - 1], 4.0 * trace.gamma[i]);
        let (d0, d1) = (4.0 * trace.diffusion[i - 1], 4.0 * trace.diffusion[i]);
        let decay = 0.5 * h * (g0 + g1);
        // N(t1) = e^{-G} N(t0) + ∫ e^{-(G(t1)-G(s))} 4D(s) ds, trapezoid in s
        let n1 = (-decay).exp() * occ[i - 1] + 0.5 * h * ((-decay).exp() * d0 + d1);
        occ.push(n1);
    }
    Ok(MomentSeries {
        times: times.to_vec(),
        mean_a,
        occupation: occ,
    })
}

/// Closed-form `|u(t)|` for a single resonant mode: `|cos(g t)|`.
pub fn single_mode_rabi(g: f64, t: f64) -> f64 {
    (g * t).cos().abs()
}

/// Recurrence-limited horizon `π / Δw` of a ladder bath on a uniform grid.
pub fn ladder_horizon(bath: &LadderBath) -> f64 {
    if bath.frequencies.len() < 2 {
        return f64::INFINITY;
    }
    PI / (bath.frequencies[1] - bath.frequencies[0])
}
