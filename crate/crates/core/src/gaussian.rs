//! Two-mode Gaussian states in the quadrature ordering `(x1, p1, x2, p2)`.
//!
//! Natural units (ħ = 1): the vacuum of a mode with mass `m` and frequency `ω`
//! has `⟨x²⟩ = 1/(2mω)` and `⟨p²⟩ = mω/2`, so every symplectic eigenvalue of a
//! physical covariance matrix is at least 1/2.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative asymmetry accepted (and removed) when building a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Slack on the eigenvalues of `V + (i/2)J`.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Relative mismatch allowed inside a pair of symplectic moduli.
pub const PAIR_TOL: f64 = 1e-9;

/// Mass and frequency of a single oscillator mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec {
    pub mass: f64,
    pub frequency: f64,
}

impl ModeSpec {
    pub fn new(mass: f64, frequency: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::validation(format!("mode mass must be positive, got {mass}")));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::validation(format!(
                "mode frequency must be positive, got {frequency}"
            )));
        }
        Ok(Self { mass, frequency })
    }

    /// `m·ω`, the scale that converts between position and momentum units.
    pub fn scale(&self) -> f64 {
        self.mass * self.frequency
    }
}

/// First and second moments of a two-oscillator Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: Vector4<f64>,
    cov: Matrix4<f64>,
}

/// The 4×4 symplectic form, block-diagonal `[[0, 1], [-1, 0]]`.
pub fn symplectic_form() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(0, 1)] = 1.0;
    j[(1, 0)] = -1.0;
    j[(2, 3)] = 1.0;
    j[(3, 2)] = -1.0;
    j
}

fn max_abs(v: &Matrix4<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Fails when `v` is not symmetric to within [`SYMMETRY_TOL`] (relative).
pub fn check_symmetric(v: &Matrix4<f64>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("covariance matrix has non-finite entries"));
    }
    let scale = max_abs(v).max(1.0);
    let asym = max_abs(&(v - v.transpose()));
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::validation(format!(
            "covariance matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

fn symmetrized(v: &Matrix4<f64>) -> Matrix4<f64> {
    (v + v.transpose()) * 0.5
}

/// Smallest eigenvalue of the Hermitian matrix `V + (i/2)J`.
///
/// Non-negative exactly for covariance matrices of physical states.
pub fn physicality_margin(v: &Matrix4<f64>) -> f64 {
    let j = symplectic_form();
    let h = Matrix4::<Complex64>::from_fn(|r, c| Complex64::new(v[(r, c)], 0.5 * j[(r, c)]));
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

impl GaussianState {
    /// Builds a state, symmetrizing `cov` and checking physicality.
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Result<Self> {
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("mean vector has non-finite entries"));
        }
        check_symmetric(&cov)?;
        let cov = symmetrized(&cov);
        let margin = physicality_margin(&cov);
        if margin < -PHYSICALITY_TOL {
            return Err(Error::validation(format!(
                "covariance matrix violates the uncertainty principle (min eigenvalue of V + iJ/2 is {margin:.3e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn with_zero_mean(cov: Matrix4<f64>) -> Result<Self> {
        Self::new(Vector4::zeros(), cov)
    }

    pub fn mean(&self) -> &Vector4<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix4<f64> {
        &self.cov
    }

    /// Product of two single-mode vacua.
    pub fn vacuum(mode: ModeSpec) -> Self {
        Self::thermal(mode, 0.0)
    }

    /// Product of two identical thermal states with occupation `nbar`.
    pub fn thermal(mode: ModeSpec, nbar: f64) -> Self {
        let s = mode.scale();
        let f = nbar + 0.5;
        let cov = Matrix4::from_diagonal(&Vector4::new(f / s, f * s, f / s, f * s));
        Self {
            mean: Vector4::zeros(),
            cov,
        }
    }

    /// Assembles a state from the virtual modes `x± = (x1 ± x2)/√2`.
    ///
    /// The two virtual modes are uncorrelated; `plus` and `minus` are their
    /// 2×2 covariance blocks and means.
    pub fn from_virtual(
        plus: (Vector2<f64>, Matrix2<f64>),
        minus: (Vector2<f64>, Matrix2<f64>),
    ) -> Result<Self> {
        let mut cov = Matrix4::zeros();
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&plus.1);
        cov.fixed_view_mut::<2, 2>(2, 2).copy_from(&minus.1);
        let mean = Vector4::new(plus.0[0], plus.0[1], minus.0[0], minus.0[1]);
        let virt = Self::new(mean, cov)?;
        Ok(beam_splitter(&virt))
    }

    /// Two-mode squeezed state with squeezing `r`.
    ///
    /// In the virtual basis `x₋` has `δx₋/δp₋ = e^{2r}/(mω)`, `x₊` is squeezed
    /// the opposite way, and both carry symplectic area `δxδp = area`
    /// (`area = 1/2` for a pure state, where the logarithmic negativity is `2|r|`).
    pub fn two_mode_squeezed(r: f64, mode: ModeSpec, area: f64) -> Result<Self> {
        let plus = single_mode_squeezed(-r, mode, area)?;
        let minus = single_mode_squeezed(r, mode, area)?;
        Self::from_virtual((Vector2::zeros(), plus), (Vector2::zeros(), minus))
    }

    /// Separable product of two identically squeezed oscillators.
    ///
    /// Both virtual modes inherit squeezing `r` and area `area`.
    pub fn squeezed_product(r: f64, mode: ModeSpec, area: f64) -> Result<Self> {
        let single = single_mode_squeezed(r, mode, area)?;
        let mut cov = Matrix4::zeros();
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&single);
        cov.fixed_view_mut::<2, 2>(2, 2).copy_from(&single);
        Self::with_zero_mean(cov)
    }

    /// Product of coherent states displaced by `mean` (vacuum-like noise).
    pub fn coherent_product(mode: ModeSpec, mean: Vector4<f64>) -> Result<Self> {
        let vac = Self::vacuum(mode);
        Self::new(mean, vac.cov)
    }

    /// Purity `1/(4 sqrt(det V))` of the two-mode state.
    pub fn purity(&self) -> f64 {
        let det = self.cov.determinant();
        1.0 / (4.0 * det.max(0.0).sqrt())
    }

    /// 2×2 block of mode `k` (0 or 1) of the covariance matrix.
    pub fn mode_block(&self, k: usize) -> Matrix2<f64> {
        self.cov.fixed_view::<2, 2>(2 * k, 2 * k).into_owned()
    }
}

/// Covariance of a single squeezed mode with `δx/δp = e^{2r}/(mω)` and `δxδp = area`.
pub fn single_mode_squeezed(r: f64, mode: ModeSpec, area: f64) -> Result<Matrix2<f64>> {
    if !(area >= 0.5 - PHYSICALITY_TOL) || !area.is_finite() {
        return Err(Error::validation(format!(
            "symplectic area δxδp must be at least 1/2, got {area}"
        )));
    }
    if !r.is_finite() {
        return Err(Error::validation("squeezing must be finite"));
    }
    let s = mode.scale();
    let e = (2.0 * r).exp();
    Ok(Matrix2::new(area * e / s, 0.0, 0.0, area * s / e))
}

/// Symplectic eigenvalues `(ν₋, ν₊)` of a symmetric covariance matrix.
///
/// Computed as moduli of the eigenvalues of `iJV` (equivalently of `JV`),
/// which come in pairs `±iν`.
pub fn symplectic_eigenvalues(v: &Matrix4<f64>) -> Result<(f64, f64)> {
    check_symmetric(v)?;
    let jv = symplectic_form() * symmetrized(v);
    let mut moduli: Vec<f64> = jv.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| a.total_cmp(b));
    let pair = |a: f64, b: f64| -> Result<f64> {
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if (a - b).abs() > PAIR_TOL * scale {
            return Err(Error::numerical(
                "symplectic moduli do not pair up",
                Some((a - b).abs() / scale),
            ));
        }
        Ok(0.5 * (a + b))
    };
    Ok((pair(moduli[0], moduli[1])?, pair(moduli[2], moduli[3])?))
}

/// Partial transposition: flips the sign of `p2`, i.e. returns `PVP` with
/// `P = diag(1, 1, 1, -1)`.
pub fn partial_transpose(v: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    check_symmetric(v)?;
    let mut out = *v;
    for k in 0..3 {
        out[(k, 3)] = -out[(k, 3)];
        out[(3, k)] = -out[(3, k)];
    }
    Ok(out)
}

/// `-ln(2 ν_min)` of the partially transposed covariance, without clipping.
///
/// Positive exactly when the state is entangled; this is the quantity whose
/// long-time oscillations decide between the dynamical phases.
pub fn negativity_exponent(state: &GaussianState) -> Result<f64> {
    let pt = partial_transpose(state.cov())?;
    let (nu_min, _) = symplectic_eigenvalues(&pt)?;
    Ok(-(2.0 * nu_min).ln())
}

/// Logarithmic negativity `max{0, -ln(2 ν_min)}`.
pub fn log_negativity(state: &GaussianState) -> Result<f64> {
    Ok(negativity_exponent(state)?.max(0.0))
}

/// The orthogonal symplectic 50/50 beam splitter `x± = (x1 ± x2)/√2`.
pub fn beam_splitter_matrix() -> Matrix4<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Matrix4::new(
        h, 0.0, h, 0.0, //
        0.0, h, 0.0, h, //
        h, 0.0, -h, 0.0, //
        0.0, h, 0.0, -h,
    )
}

/// Maps real modes to virtual modes (and back: the map is an involution).
pub fn beam_splitter(state: &GaussianState) -> GaussianState {
    let s = beam_splitter_matrix();
    GaussianState {
        mean: s * state.mean,
        cov: symmetrized(&(s * state.cov * s.transpose())),
    }
}

/// Squeezing `½ ln[mω·dx/dp]` of a mode with dispersions `dx`, `dp`.
pub fn mode_squeezing(dx: f64, dp: f64, mode: ModeSpec) -> Result<f64> {
    if !(dx > 0.0 && dp > 0.0) {
        return Err(Error::validation(format!(
            "dispersions must be positive, got dx={dx}, dp={dp}"
        )));
    }
    Ok(0.5 * (mode.scale() * dx / dp).ln())
}
