//! Exact Gaussian evolution of the two oscillators together with the
//! discretized bath.
//!
//! Only `x₊ = (x₁+x₂)/√2` couples to the bath, so the relative mode `x₋`
//! rotates freely and the `(+)` sector is an arrowhead eigenproblem. The
//! propagator at any time is assembled from that eigenbasis, which makes it
//! exact up to round-off and independent of the step size.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::arrowhead::arrowhead_eigen;
use crate::bath::DiscretizedBath;
use crate::error::{Error, Result};
use crate::gaussian::{beam_splitter_matrix, log_negativity, GaussianState, ModeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingType {
    /// `x₊ Σ c_k q_k`.
    Position,
    /// Position plus momentum coupling with equal weights; number conserving.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenormalizationMode {
    Bare,
    Renormalized,
}

/// Ratio of symmetric-coupling bath couplings to position-coupling ones.
/// At this value both couplings give the same resonant damping rate.
pub const SYMMETRIC_COUPLING_SCALE: f64 = 0.5;

/// System, bath and coupling of the full quadratic model.
///
/// `omega0`, `c12` and `c12_tilde` are the bare parameters that enter the
/// Hamiltonian. Use [`FullModel::new`] to build them from physical values.
#[derive(Debug, Clone)]
pub struct FullModel {
    mass: f64,
    omega0: f64,
    c12: f64,
    c12_tilde: f64,
    coupling: CouplingType,
    renormalization: RenormalizationMode,
    bath: DiscretizedBath,
    bath_couplings: Vec<f64>,
}

impl FullModel {
    /// Builds a model from the physical frequency `omega` and coupling `c12`.
    ///
    /// Position coupling: `omega` is the renormalized `Ω_R`, so the bare
    /// frequency is `ω₀² = Ω_R² − δω²/2`. In `Renormalized` mode `c12` is the
    /// renormalized `C₁₂` and the bare coupling is `C₁₂ − δω²/2`; in `Bare`
    /// mode `c12` is used as the bare coupling, so `C₁₂ = c12 + δω²/2`.
    ///
    /// Symmetric coupling: there is no static shift, `omega` and `c12` are used
    /// as they are and both modes coincide. Bath couplings are half the
    /// position-form values, which gives the same resonant damping rate.
    pub fn new(
        omega: f64,
        c12: f64,
        coupling: CouplingType,
        renormalization: RenormalizationMode,
        bath: DiscretizedBath,
    ) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::validation(format!("frequency must be positive, got {omega}")));
        }
        if !c12.is_finite() {
            return Err(Error::validation("c12 must be finite"));
        }
        let mass = bath.density().mass();
        let shift = bath.static_shift();
        let model = match coupling {
            CouplingType::Position => {
                let w2 = omega * omega - 0.5 * shift;
                let c12b = match renormalization {
                    RenormalizationMode::Renormalized => c12 - 0.5 * shift,
                    RenormalizationMode::Bare => c12,
                };
                Self {
                    mass,
                    omega0: w2.sqrt(),
                    c12: c12b,
                    c12_tilde: 0.0,
                    coupling,
                    renormalization,
                    bath_couplings: bath.couplings().to_vec(),
                    bath,
                }
            }
            CouplingType::Symmetric => Self {
                mass,
                omega0: omega,
                c12,
                c12_tilde: c12,
                coupling,
                renormalization,
                bath_couplings: bath.couplings().iter().map(|c| SYMMETRIC_COUPLING_SCALE * c).collect(),
                bath,
            },
        };
        model.minus_frequency_checked()?;
        Ok(model)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Bare frequency `ω₀`.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Bare position coupling `c₁₂`.
    pub fn c12(&self) -> f64 {
        self.c12
    }

    /// Bare momentum coupling `c̃₁₂`.
    pub fn c12_tilde(&self) -> f64 {
        self.c12_tilde
    }

    pub fn coupling(&self) -> CouplingType {
        self.coupling
    }

    pub fn renormalization(&self) -> RenormalizationMode {
        self.renormalization
    }

    pub fn bath(&self) -> &DiscretizedBath {
        &self.bath
    }

    /// Per-mode couplings entering the Hamiltonian.
    pub fn bath_couplings(&self) -> &[f64] {
        &self.bath_couplings
    }

    /// Static shift `δω²` of the position coupling (zero for symmetric coupling).
    pub fn static_shift(&self) -> f64 {
        match self.coupling {
            CouplingType::Position => self.bath.static_shift(),
            CouplingType::Symmetric => 0.0,
        }
    }

    fn minus_frequency_checked(&self) -> Result<f64> {
        let w = match self.coupling {
            CouplingType::Position => {
                let w2 = self.omega0 * self.omega0 - self.c12;
                if !(w2 > 0.0) || !(self.omega0 > 0.0) {
                    return Err(Error::ParameterRegime(format!(
                        "relative mode is unstable (ω₋² = {w2:.6}, ω₀² = {:.6})",
                        self.omega0 * self.omega0
                    )));
                }
                w2.sqrt()
            }
            CouplingType::Symmetric => self.omega0 - self.c12 / self.omega0,
        };
        if !(w > 0.0) {
            return Err(Error::ParameterRegime(format!("relative mode frequency {w:.6} is not positive")));
        }
        Ok(w)
    }

    /// Frequency `ω₋` of the free relative mode.
    pub fn omega_minus(&self) -> f64 {
        self.minus_frequency_checked().expect("validated on construction")
    }

    /// Renormalized frequency `Ω` of the `x₊` mode.
    pub fn omega_plus(&self) -> Result<f64> {
        let w = match self.coupling {
            CouplingType::Position => {
                let w2 = self.omega0 * self.omega0 + self.c12 + self.static_shift();
                if !(w2 > 0.0) {
                    return Err(Error::ParameterRegime(format!(
                        "centre-of-mass mode is unstable (Ω₊² = {w2:.6})"
                    )));
                }
                w2.sqrt()
            }
            CouplingType::Symmetric => self.omega0 + self.c12 / self.omega0,
        };
        if !(w > 0.0) {
            return Err(Error::ParameterRegime(format!("Ω₊ = {w:.6} is not positive")));
        }
        Ok(w)
    }

    /// `(Ω_R, C₁₂)` after absorbing the static shift.
    pub fn renormalized(&self) -> (f64, f64) {
        let d = self.static_shift();
        ((self.omega0 * self.omega0 + 0.5 * d).sqrt(), self.c12 + 0.5 * d)
    }

    /// Mass and frequency of the relative mode. For symmetric coupling the
    /// mass is fixed by `m₋ω₋ = mω₀`.
    pub fn minus_mode(&self) -> ModeSpec {
        let w = self.omega_minus();
        let m = match self.coupling {
            CouplingType::Position => self.mass,
            CouplingType::Symmetric => self.mass * self.omega0 / w,
        };
        ModeSpec::new(m, w).expect("positive")
    }

    /// Mass and renormalized frequency of the `x₊` mode.
    pub fn plus_mode(&self) -> Result<ModeSpec> {
        let w = self.omega_plus()?;
        let m = match self.coupling {
            CouplingType::Position => self.mass,
            CouplingType::Symmetric => self.mass * self.omega0 / w,
        };
        ModeSpec::new(m, w)
    }
}

fn symplectic_full(dim: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(dim, dim);
    for k in 0..dim / 2 {
        j[(2 * k, 2 * k + 1)] = 1.0;
        j[(2 * k + 1, 2 * k)] = -1.0;
    }
    j
}

/// Symmetric matrix `H` of `H = ½ rᵀ H r` with
/// `r = (x₁, p₁, x₂, p₂, q₁, π₁, …, q_N, π_N)`.
pub fn hamiltonian_matrix(model: &FullModel) -> DMatrix<f64> {
    let n = model.bath.len();
    let dim = 2 * (n + 2);
    let m = model.mass;
    let w0 = model.omega0;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..2 {
        h[(2 * i, 2 * i)] = m * w0 * w0;
        h[(2 * i + 1, 2 * i + 1)] = 1.0 / m;
    }
    h[(0, 2)] = m * model.c12;
    h[(2, 0)] = m * model.c12;
    h[(1, 3)] = model.c12_tilde / (m * w0 * w0);
    h[(3, 1)] = h[(1, 3)];
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let freqs = model.bath.frequencies();
    let masses = model.bath.masses();
    for k in 0..n {
        let (q, p) = (4 + 2 * k, 5 + 2 * k);
        let (wk, mk, ck) = (freqs[k], masses[k], model.bath_couplings[k]);
        h[(q, q)] = mk * wk * wk;
        h[(p, p)] = 1.0 / mk;
        for i in 0..2 {
            h[(2 * i, q)] = ck * r2;
            h[(q, 2 * i)] = ck * r2;
            if model.coupling == CouplingType::Symmetric {
                let v = ck * r2 / (m * w0 * mk * wk);
                h[(2 * i + 1, p)] = v;
                h[(p, 2 * i + 1)] = v;
            }
        }
    }
    h
}

/// Drift matrix `A = J H` of `dr/dt = A r`.
pub fn build_generator(model: &FullModel) -> DMatrix<f64> {
    let h = hamiltonian_matrix(model);
    symplectic_full(h.nrows()) * h
}

/// Spectral data of the `(+)` sector.
///
/// In generalized coordinates `(x_k, p_k)` with scales `σ_k` (k = 0 is `x₊`),
/// the propagator reads
/// `x_k(t) = Σ_l Kc √(σ_l/σ_k) x_l + Ks /√(σ_k σ_l) p_l`,
/// `p_k(t) = Σ_l −Kw √(σ_k σ_l) x_l + Kc √(σ_k/σ_l) p_l`
/// with `Kc = U cos(νt) Uᵀ`, `Ks = U (sin(νt)·fs) Uᵀ`, `Kw = U (sin(νt)·fw) Uᵀ`.
#[derive(Debug, Clone)]
struct PlusSector {
    vectors: DMatrix<f64>,
    nu: Vec<f64>,
    fs: Vec<f64>,
    fw: Vec<f64>,
    sigma: Vec<f64>,
}

impl PlusSector {
    fn new(model: &FullModel) -> Result<Self> {
        let bath = &model.bath;
        let m = model.mass;
        let w0 = model.omega0;
        match model.coupling {
            CouplingType::Position => {
                let z: Vec<f64> = model
                    .bath_couplings
                    .iter()
                    .zip(bath.masses())
                    .map(|(c, mk)| c / (m * mk).sqrt())
                    .collect();
                let d: Vec<f64> = bath.frequencies().iter().map(|w| w * w).collect();
                let eig = arrowhead_eigen(w0 * w0 + model.c12, &z, &d)?;
                if !(eig.values[0] > 0.0) {
                    return Err(Error::ParameterRegime(format!(
                        "coupled centre-of-mass sector has a non-positive normal mode (Ω² = {:.6e}); the static shift overwhelms the bare frequency",
                        eig.values[0]
                    )));
                }
                let nu: Vec<f64> = eig.values.iter().map(|v| v.sqrt()).collect();
                let fs = nu.iter().map(|v| 1.0 / v).collect();
                let fw = nu.clone();
                let mut sigma = vec![m];
                sigma.extend_from_slice(bath.masses());
                Ok(Self { vectors: eig.vectors, nu, fs, fw, sigma })
            }
            CouplingType::Symmetric => {
                let z: Vec<f64> = model
                    .bath_couplings
                    .iter()
                    .zip(bath.masses().iter().zip(bath.frequencies()))
                    .map(|(c, (mk, wk))| c / (m * w0 * mk * wk).sqrt())
                    .collect();
                let eig = arrowhead_eigen(w0 + model.c12 / w0, &z, bath.frequencies())?;
                if !(eig.values[0] > 0.0) {
                    return Err(Error::ParameterRegime(format!(
                        "coupled centre-of-mass sector has a non-positive normal mode (λ = {:.6e})",
                        eig.values[0]
                    )));
                }
                let n = eig.values.len();
                let mut sigma = vec![m * w0];
                sigma.extend(bath.masses().iter().zip(bath.frequencies()).map(|(mk, wk)| mk * wk));
                Ok(Self {
                    vectors: eig.vectors,
                    nu: eig.values,
                    fs: vec![1.0; n],
                    fw: vec![1.0; n],
                    sigma,
                })
            }
        }
    }

    /// Kernels `(Kc, Ks, Kw)` of row 0 for each time, as `(N+1) × nt` matrices.
    fn row_kernels(&self, times: &[f64]) -> [DMatrix<f64>; 3] {
        let n = self.nu.len();
        let nt = times.len();
        let mut cm = DMatrix::zeros(n, nt);
        let mut sm = DMatrix::zeros(n, nt);
        let mut wm = DMatrix::zeros(n, nt);
        for (c, &t) in times.iter().enumerate() {
            for j in 0..n {
                let u0 = self.vectors[(0, j)];
                let (s, co) = (self.nu[j] * t).sin_cos();
                cm[(j, c)] = u0 * co;
                sm[(j, c)] = u0 * s * self.fs[j];
                wm[(j, c)] = u0 * s * self.fw[j];
            }
        }
        let kc = &self.vectors * cm;
        let ks = &self.vectors * sm;
        let kw = if self.fs == self.fw { ks.clone() } else { &self.vectors * wm };
        [kc, ks, kw]
    }

    /// Full `(+)`-sector propagator in the ordering `(x₀, p₀, x₁, p₁, …)`.
    fn full(&self, t: f64) -> DMatrix<f64> {
        let n = self.nu.len();
        let u = &self.vectors;
        let mut uc = u.clone();
        let mut us = u.clone();
        let mut uw = u.clone();
        for j in 0..n {
            let (s, c) = (self.nu[j] * t).sin_cos();
            uc.column_mut(j).scale_mut(c);
            us.column_mut(j).scale_mut(s * self.fs[j]);
            uw.column_mut(j).scale_mut(s * self.fw[j]);
        }
        let kc = &uc * u.transpose();
        let ks = &us * u.transpose();
        let kw = &uw * u.transpose();
        let sg = &self.sigma;
        DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (k, l) = (r / 2, c / 2);
            match (r % 2, c % 2) {
                (0, 0) => kc[(k, l)] * (sg[l] / sg[k]).sqrt(),
                (0, 1) => ks[(k, l)] / (sg[k] * sg[l]).sqrt(),
                (1, 0) => -kw[(k, l)] * (sg[k] * sg[l]).sqrt(),
                _ => kc[(k, l)] * (sg[k] / sg[l]).sqrt(),
            }
        })
    }
}

/// Precomputed exact propagator of a [`FullModel`].
#[derive(Debug, Clone)]
pub struct Propagator {
    model: FullModel,
    plus: PlusSector,
    omega_minus: f64,
    minus_scale: f64,
}

/// Reduced `(+)`-sector map at one time: system part `A` (acting on
/// `(x₊, p₊)`), bath-noise covariance `B`, and the `{x₊, p₊}` bracket.
#[derive(Debug, Clone, Copy)]
struct PlusMap {
    a: Matrix2<f64>,
    noise: Matrix2<f64>,
    bracket: f64,
}

const TIME_CHUNK: usize = 256;

impl Propagator {
    pub fn new(model: &FullModel) -> Result<Self> {
        model.omega_plus()?;
        let plus = PlusSector::new(model)?;
        let omega_minus = model.omega_minus();
        let minus_scale = match model.coupling {
            CouplingType::Position => model.mass * omega_minus,
            CouplingType::Symmetric => model.mass * model.omega0,
        };
        Ok(Self {
            model: model.clone(),
            plus,
            omega_minus,
            minus_scale,
        })
    }

    pub fn model(&self) -> &FullModel {
        &self.model
    }

    /// Normal-mode frequencies of the coupled `(+)` sector.
    pub fn normal_modes(&self) -> &[f64] {
        &self.plus.nu
    }

    fn minus_map(&self, t: f64) -> Matrix2<f64> {
        let (s, c) = (self.omega_minus * t).sin_cos();
        let k = self.minus_scale;
        Matrix2::new(c, s / k, -k * s, c)
    }

    fn plus_maps(&self, times: &[f64]) -> Vec<PlusMap> {
        let bath = &self.model.bath;
        let occ = bath.occupations();
        let sq: Vec<f64> = occ
            .iter()
            .zip(bath.masses().iter().zip(bath.frequencies()))
            .map(|(n, (mk, wk))| (n + 0.5) / (mk * wk))
            .collect();
        let sp: Vec<f64> = occ
            .iter()
            .zip(bath.masses().iter().zip(bath.frequencies()))
            .map(|(n, (mk, wk))| (n + 0.5) * mk * wk)
            .collect();
        let sg = &self.plus.sigma;
        let s0 = sg[0];
        let mut out = Vec::with_capacity(times.len());
        for chunk in times.chunks(TIME_CHUNK) {
            let [kc, ks, kw] = self.plus.row_kernels(chunk);
            for c in 0..chunk.len() {
                let (c0, s0k, w0k) = (kc[(0, c)], ks[(0, c)], kw[(0, c)]);
                let a = Matrix2::new(c0, s0k / s0, -w0k * s0, c0);
                let mut bracket = c0 * c0 + s0k * w0k;
                let (mut bxx, mut bxp, mut bpp) = (0.0, 0.0, 0.0);
                for k in 1..sg.len() {
                    let (kck, ksk, kwk) = (kc[(k, c)], ks[(k, c)], kw[(k, c)]);
                    let (q, p, s) = (sq[k - 1], sp[k - 1], sg[k]);
                    bracket += kck * kck + ksk * kwk;
                    bxx += kck * kck * (s / s0) * q + ksk * ksk * p / (s0 * s);
                    bxp += -kck * kwk * s * q + ksk * kck * p / s;
                    bpp += kwk * kwk * s0 * s * q + kck * kck * (s0 / s) * p;
                }
                out.push(PlusMap {
                    a,
                    noise: Matrix2::new(bxx, bxp, bxp, bpp),
                    bracket,
                });
            }
        }
        out
    }

    /// Dense propagator `S(t)` in the real ordering of [`hamiltonian_matrix`].
    pub fn full_propagator(&self, t: f64) -> DMatrix<f64> {
        let n = self.model.bath.len();
        let dim = 2 * (n + 2);
        let plus = self.plus.full(t);
        // Virtual ordering: (x₊, p₊, x₋, p₋, q₁, π₁, …).
        let mut virt = DMatrix::zeros(dim, dim);
        let idx = |i: usize| if i < 2 { i } else { i + 2 };
        for r in 0..plus.nrows() {
            for c in 0..plus.ncols() {
                virt[(idx(r), idx(c))] = plus[(r, c)];
            }
        }
        let mm = self.minus_map(t);
        for r in 0..2 {
            for c in 0..2 {
                virt[(2 + r, 2 + c)] = mm[(r, c)];
            }
        }
        let mut bs = DMatrix::identity(dim, dim);
        let b4 = beam_splitter_matrix();
        for r in 0..4 {
            for c in 0..4 {
                bs[(r, c)] = b4[(r, c)];
            }
        }
        &bs * virt * &bs
    }

    /// `max |S J Sᵀ − J|` of the dense propagator at time `t`.
    pub fn symplectic_residual(&self, t: f64) -> f64 {
        let s = self.full_propagator(t);
        let j = symplectic_full(s.nrows());
        (&s * &j * s.transpose() - j).amax()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvolveOptions {
    /// Allow times beyond half the bath recurrence time.
    pub override_horizon: bool,
}

/// Reduced system states on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
    pub validity_horizon: f64,
    /// Largest deviation of the `{x₊, p₊}` bracket from 1 over the run.
    pub bracket_residual: f64,
}

pub const TRAJECTORY_HEADER: &str = "t,Exx11,Exp11,Exx12,Exp12,Epp11,Epx12,Epp12,Exx22,Exp22,Epp22,EN";

impl Trajectory {
    pub fn log_negativities(&self) -> Result<Vec<f64>> {
        self.states.iter().map(log_negativity).collect()
    }

    /// Writes one CSV row per time with the ten independent covariance
    /// entries and the logarithmic negativity.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::validation(format!("trajectory export failed: {e}"));
        writeln!(out, "{TRAJECTORY_HEADER}").map_err(io)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let v = s.cov();
            let en = log_negativity(s)?;
            let cols = [
                *t,
                v[(0, 0)],
                v[(0, 1)],
                v[(0, 2)],
                v[(0, 3)],
                v[(1, 1)],
                v[(1, 2)],
                v[(1, 3)],
                v[(2, 2)],
                v[(2, 3)],
                v[(3, 3)],
                en,
            ];
            let line: Vec<String> = cols.iter().map(|x| fmt_sig(*x)).collect();
            writeln!(out, "{}", line.join(",")).map_err(io)?;
        }
        Ok(())
    }
}

/// Formats with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::validation("time grid is empty"));
    }
    if !(times[0] >= 0.0) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("times must be finite and non-negative"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation("times must be strictly increasing"));
    }
    Ok(())
}

/// Evolves `initial` with the bath starting in its thermal state.
pub fn evolve(model: &FullModel, initial: &GaussianState, times: &[f64]) -> Result<Trajectory> {
    evolve_with(model, initial, times, EvolveOptions::default())
}

pub fn evolve_with(
    model: &FullModel,
    initial: &GaussianState,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Trajectory> {
    let prop = Propagator::new(model)?;
    prop.evolve(initial, times, opts)
}

impl Propagator {
    pub fn evolve(&self, initial: &GaussianState, times: &[f64], opts: EvolveOptions) -> Result<Trajectory> {
        check_times(times)?;
        let horizon = self.model.bath.validity_horizon();
        let last = *times.last().expect("non-empty");
        if last > horizon * (1.0 + 1e-12) && !opts.override_horizon {
            return Err(Error::Horizon { requested: last, horizon });
        }
        let bs = beam_splitter_matrix();
        let mean_v = bs * initial.mean();
        let cov_v = bs * initial.cov() * bs;
        let vpp: Matrix2<f64> = cov_v.fixed_view::<2, 2>(0, 0).into_owned();
        let vmm: Matrix2<f64> = cov_v.fixed_view::<2, 2>(2, 2).into_owned();
        let vpm: Matrix2<f64> = cov_v.fixed_view::<2, 2>(0, 2).into_owned();
        let mp = Vector2::new(mean_v[0], mean_v[1]);
        let mm = Vector2::new(mean_v[2], mean_v[3]);

        let maps = self.plus_maps(times);
        let mut states = Vec::with_capacity(times.len());
        let mut bracket_residual: f64 = 0.0;
        for (&t, map) in times.iter().zip(&maps) {
            bracket_residual = bracket_residual.max((map.bracket - 1.0).abs());
            let r = self.minus_map(t);
            let p = map.a * vpp * map.a.transpose() + map.noise;
            let q = r * vmm * r.transpose();
            let x = map.a * vpm * r.transpose();
            let mut v = Matrix4::zeros();
            v.fixed_view_mut::<2, 2>(0, 0).copy_from(&p);
            v.fixed_view_mut::<2, 2>(2, 2).copy_from(&q);
            v.fixed_view_mut::<2, 2>(0, 2).copy_from(&x);
            v.fixed_view_mut::<2, 2>(2, 0).copy_from(&x.transpose());
            let a = map.a * mp;
            let b = r * mm;
            let mean = bs * Vector4::new(a[0], a[1], b[0], b[1]);
            let cov = bs * v * bs;
            let cov = (cov + cov.transpose()) * 0.5;
            let state = GaussianState::new(mean, cov).map_err(|e| Error::Numerical {
                message: format!("reduced state became unphysical at t = {t}: {e}"),
                achieved: None,
            })?;
            states.push(state);
        }
        Ok(Trajectory {
            times: times.to_vec(),
            states,
            validity_horizon: horizon,
            bracket_residual,
        })
    }
}

/// `(t, E_N)` pairs along the exact evolution.
pub fn entanglement_trajectory(
    model: &FullModel,
    initial: &GaussianState,
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let traj = evolve(model, initial, times)?;
    let en = traj.log_negativities()?;
    Ok(traj.times.iter().copied().zip(en).collect())
}

/// Uniform grid `0, dt, …` up to and including `t_max` (within round-off).
pub fn uniform_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}

/// Relative drift tolerance between consecutive averaging windows.
pub const EQUILIBRIUM_DRIFT: f64 = 1e-3;

/// Stationary `(Δx₊, Δp₊)` read off the exact evolution.
///
/// Starts from the vacuum of the uncoupled virtual modes, evolves up to the
/// validity horizon and returns the variances of `x₊` averaged over the last
/// window. Fails if the last two windows differ by [`EQUILIBRIUM_DRIFT`] or more.
pub fn equilibrium_variances_sim(model: &FullModel) -> Result<(f64, f64)> {
    let plus = model.plus_mode()?;
    let minus = model.minus_mode();
    let vac = |m: ModeSpec| Matrix2::new(0.5 / m.scale(), 0.0, 0.0, 0.5 * m.scale());
    let init = GaussianState::from_virtual((Vector2::zeros(), vac(plus)), (Vector2::zeros(), vac(minus)))?;
    equilibrium_variances_from(model, &init)
}

/// As [`equilibrium_variances_sim`] but from a caller-supplied initial state.
pub fn equilibrium_variances_from(model: &FullModel, initial: &GaussianState) -> Result<(f64, f64)> {
    if model.bath.density().gamma0() == 0.0 {
        return Err(Error::validation("equilibrium requires a coupled bath (gamma0 > 0)"));
    }
    let prop = Propagator::new(model)?;
    let wp = model.omega_plus()?;
    let wm = model.omega_minus();
    let window = (2.0 * PI / wm).max(2.0 * PI / wp);
    let dt = (2.0 * PI / wp.max(wm)) / 64.0;
    let per = (window / dt).ceil() as usize;
    let horizon = model.bath.validity_horizon();
    let times = uniform_grid(horizon, dt);
    let traj = prop.evolve(initial, &times, EvolveOptions::default())?;
    let bs = beam_splitter_matrix();
    let (vx, vp): (Vec<f64>, Vec<f64>) = traj
        .states
        .iter()
        .map(|s| {
            let v = bs * s.cov() * bs;
            (v[(0, 0)], v[(1, 1)])
        })
        .unzip();
    let avg = |v: &[f64], end: usize| v[end - per..end].iter().sum::<f64>() / per as f64;
    let end = times.len();
    if end < 2 * per {
        return Err(Error::Horizon {
            requested: 2.0 * window,
            horizon,
        });
    }
    let (x1, x0) = (avg(&vx, end), avg(&vx, end - per));
    let (p1, p0) = (avg(&vp, end), avg(&vp, end - per));
    let drift = ((x1 - x0) / x1).abs().max(((p1 - p0) / p1).abs());
    if drift >= EQUILIBRIUM_DRIFT {
        return Err(Error::numerical(
            "variances have not settled within the validity horizon",
            Some(drift),
        ));
    }
    Ok((x1.sqrt(), p1.sqrt()))
}

/// Minimum and maximum of `values` over `times >= t_from`.
pub fn late_time_extrema(times: &[f64], values: &[f64], t_from: f64) -> Option<(f64, f64)> {
    let tail: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_from)
        .map(|(_, v)| *v)
        .collect();
    if tail.is_empty() {
        return None;
    }
    Some((
        tail.iter().copied().fold(f64::INFINITY, f64::min),
        tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ))
}

/// Angular frequency of the oscillation of `values` over `times >= t_from`,
/// from linearly interpolated upward crossings of the window mean.
pub fn fit_oscillation_frequency(times: &[f64], values: &[f64], t_from: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_from)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let crossings: Vec<f64> = pts
        .windows(2)
        .filter(|w| w[0].1 < mean && w[1].1 >= mean)
        .map(|w| w[0].0 + (mean - w[0].1) / (w[1].1 - w[0].1) * (w[1].0 - w[0].0))
        .collect();
    if crossings.len() < 2 {
        return None;
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Some(2.0 * PI / period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{discretize, OhmicSpectralDensity};
    use crate::gaussian::symplectic_eigenvalues;

    fn bath(g: f64, l: f64, n: usize, t: f64) -> DiscretizedBath {
        discretize(&OhmicSpectralDensity::new(g, l, 1.0).unwrap(), n, t).unwrap()
    }

    fn tmsv(model: &FullModel, r: f64) -> GaussianState {
        GaussianState::two_mode_squeezed(r, model.minus_mode(), 0.5).unwrap()
    }

    #[test]
    fn generator_is_hamiltonian() {
        for coupling in [CouplingType::Position, CouplingType::Symmetric] {
            let m = FullModel::new(1.2, 0.3, coupling, RenormalizationMode::Renormalized, bath(0.1, 5.0, 6, 1.0)).unwrap();
            let h = hamiltonian_matrix(&m);
            assert_eq!(h, h.transpose());
            let a = build_generator(&m);
            let j = symplectic_full(a.nrows());
            assert!((&a * &j + &j * a.transpose()).amax() < 1e-12);
        }
    }

    #[test]
    fn position_coupling_touches_only_centre_of_mass() {
        let m = FullModel::new(1.0, 0.2, CouplingType::Position, RenormalizationMode::Bare, bath(0.1, 5.0, 4, 0.0)).unwrap();
        let h = hamiltonian_matrix(&m);
        let bs = beam_splitter_matrix();
        let mut t = DMatrix::identity(h.nrows(), h.nrows());
        for r in 0..4 {
            for c in 0..4 {
                t[(r, c)] = bs[(r, c)];
            }
        }
        let hv = &t * h * &t;
        for c in 4..hv.ncols() {
            assert!(hv[(2, c)].abs() < 1e-15);
            assert!(hv[(3, c)].abs() < 1e-15);
            assert!(hv[(1, c)].abs() < 1e-15);
            assert!(hv[(0, c)] != 0.0 || c % 2 == 1);
        }
    }

    #[test]
    fn zero_coupling_gives_free_block() {
        let m = FullModel::new(1.0, 0.0, CouplingType::Position, RenormalizationMode::Bare, bath(0.0, 5.0, 3, 0.0)).unwrap();
        let a = build_generator(&m);
        assert!(a.view((0, 4), (4, a.ncols() - 4)).amax() == 0.0);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 0)], -1.0);
    }

    #[test]
    fn propagator_matches_matrix_exponential() {
        for coupling in [CouplingType::Position, CouplingType::Symmetric] {
            for renorm in [RenormalizationMode::Bare, RenormalizationMode::Renormalized] {
                let m = FullModel::new(1.3, -0.2, coupling, renorm, bath(0.2, 4.0, 8, 0.5)).unwrap();
                let prop = Propagator::new(&m).unwrap();
                for t in [0.0, 0.37, 2.5] {
                    let dense = (build_generator(&m) * t).exp();
                    let ours = prop.full_propagator(t);
                    assert!((dense - ours).amax() < 1e-9, "{coupling:?} {renorm:?} t={t}");
                }
                assert!(prop.symplectic_residual(3.0) < 1e-12);
            }
        }
    }

    #[test]
    fn renormalized_frequencies_are_cutoff_independent() {
        for l in [10.0, 20.0, 40.0] {
            let m = FullModel::new(3.0, -1.0, CouplingType::Position, RenormalizationMode::Renormalized, bath(0.1, l, 100, 0.0)).unwrap();
            assert!((m.omega_minus() - 10f64.sqrt()).abs() < 1e-12);
            assert!((m.omega_plus().unwrap() - 8f64.sqrt()).abs() < 1e-12);
            let (wr, c) = m.renormalized();
            assert!((wr - 3.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bare_mode_relative_frequency_drifts_with_cutoff() {
        let w: Vec<f64> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&l| FullModel::new(3.0, 0.0, CouplingType::Position, RenormalizationMode::Bare, bath(0.1, l, 100, 0.0)).unwrap().omega_minus())
            .collect();
        assert!((w[0] - 3.104).abs() < 1e-3 && (w[1] - 3.205).abs() < 1e-3 && (w[2] - 3.398).abs() < 1e-3);
        let m = FullModel::new(3.0, 0.0, CouplingType::Position, RenormalizationMode::Bare, bath(0.1, 20.0, 100, 0.0)).unwrap();
        assert!((m.renormalized().1 - m.static_shift() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn decoupled_bath_preserves_entanglement() {
        let m = FullModel::new(1.0, 0.0, CouplingType::Position, RenormalizationMode::Bare, bath(0.0, 20.0, 200, 2.0)).unwrap();
        let init = tmsv(&m, 1.0);
        let times = uniform_grid(30.0, 0.05);
        let en = entanglement_trajectory(&m, &init, &times).unwrap();
        for (_, e) in en {
            assert!((e - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn initial_state_round_trips() {
        let m = FullModel::new(1.0, 0.0, CouplingType::Position, RenormalizationMode::Renormalized, bath(0.1, 20.0, 200, 10.0)).unwrap();
        let init = tmsv(&m, 3.0);
        let traj = evolve(&m, &init, &[0.0]).unwrap();
        assert!((traj.states[0].cov() - init.cov()).amax() < 1e-9 * init.cov().amax());
        assert!((log_negativity(&traj.states[0]).unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn relative_mode_rotates_freely() {
        let m = FullModel::new(1.0, 0.3, CouplingType::Position, RenormalizationMode::Renormalized, bath(0.1, 20.0, 400, 1.0)).unwrap();
        let init = tmsv(&m, 0.7);
        let times = uniform_grid(20.0, 0.5);
        let traj = evolve(&m, &init, &times).unwrap();
        let bs = beam_splitter_matrix();
        let v0 = bs * init.cov() * bs;
        let wm = m.omega_minus();
        for (t, s) in times.iter().zip(&traj.states) {
            let v = bs * s.cov() * bs;
            let (sn, c) = (wm * t).sin_cos();
            let r = Matrix2::new(c, sn / wm, -wm * sn, c);
            let expect = r * v0.fixed_view::<2, 2>(2, 2) * r.transpose();
            assert!((v.fixed_view::<2, 2>(2, 2) - expect).amax() < 1e-8);
        }
    }

    #[test]
    fn horizon_guard() {
        let m = FullModel::new(1.0, 0.0, CouplingType::Position, RenormalizationMode::Renormalized, bath(0.1, 20.0, 100, 0.0)).unwrap();
        let init = tmsv(&m, 1.0);
        let h = m.bath().validity_horizon();
        let err = evolve(&m, &init, &[0.0, h + 1.0]).unwrap_err();
        assert!(matches!(err, Error::Horizon { .. }));
        let ok = evolve_with(&m, &init, &[0.0, h + 1.0], EvolveOptions { override_horizon: true });
        assert!(ok.is_ok());
    }

    #[test]
    fn unstable_regime_is_reported() {
        let err = FullModel::new(1.0, 2.0, CouplingType::Position, RenormalizationMode::Renormalized, bath(0.1, 20.0, 50, 0.0));
        assert!(matches!(err, Err(Error::ParameterRegime(_))));
        let m = FullModel::new(1.0, -1.5, CouplingType::Position, RenormalizationMode::Renormalized, bath(0.1, 20.0, 50, 0.0)).unwrap();
        assert!(matches!(Propagator::new(&m), Err(Error::ParameterRegime(_))));
    }

    #[test]
    fn reduced_purity_and_spectrum_bounds() {
        let m = FullModel::new(1.0, -0.3, CouplingType::Symmetric, RenormalizationMode::Bare, bath(0.1, 20.0, 300, 1.0)).unwrap();
        let init = tmsv(&m, 1.0);
        let traj = evolve(&m, &init, &uniform_grid(40.0, 0.5)).unwrap();
        assert!(traj.bracket_residual < 1e-10);
        for s in &traj.states {
            assert!(s.purity() <= 1.0 + 1e-9);
            assert!(symplectic_eigenvalues(s.cov()).unwrap().0 >= 0.5 - 1e-9);
        }
    }

    #[test]
    fn frequency_fit_recovers_sine() {
        let times = uniform_grid(50.0, 0.01);
        let v: Vec<f64> = times.iter().map(|t| (2.3 * t + 0.4).sin() + 0.1).collect();
        let w = fit_oscillation_frequency(&times, &v, 10.0).unwrap();
        assert!((w - 2.3).abs() < 1e-4);
        let (lo, hi) = late_time_extrema(&times, &v, 10.0).unwrap();
        assert!((lo + 0.9).abs() < 1e-3 && (hi - 1.1).abs() < 1e-3);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = FullModel::new(1.0, 0.0, CouplingType::Position, RenormalizationMode::Bare, bath(0.0, 20.0, 10, 0.0)).unwrap();
        let traj = evolve(&m, &tmsv(&m, 0.5), &[0.0, 0.1]).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 12);
        assert_eq!(fmt_sig(1.0 / 3.0), "3.33333333333e-1");
    }
}
