use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use qbm_core::bath::{discretize, OhmicSpectralDensity};
use qbm_core::exact::{evolve, uniform_grid, CouplingType, FullModel, RenormalizationMode};
use qbm_core::gaussian::{beam_splitter_matrix, GaussianState};
use qbm_core::rwa::{evolve_moments_me, extract_coefficients, solve_amplitude, AmplitudeOptions, SignConvention};

fn check(gamma0: f64, temperature: f64, sign: SignConvention) -> (f64, f64) {
    let (w0, n) = (1.0, 500);
    let j = OhmicSpectralDensity::new(gamma0, 20.0, 1.0).unwrap();
    let bath = discretize(&j, n, temperature).unwrap();
    let times = uniform_grid(0.99 * bath.validity_horizon(), 0.01);
    let model = FullModel::new(w0, 0.0, CouplingType::Symmetric, RenormalizationMode::Bare, bath.clone()).unwrap();

    let s = model.plus_mode().unwrap().scale();
    let a0 = Complex64::new(1.2, -0.7);
    let mean_plus = Vector2::new(2f64.sqrt() * a0.re / s.sqrt(), 2f64.sqrt() * a0.im * s.sqrt());
    let vac = |k: f64| Matrix2::new(0.5 / k, 0.0, 0.0, 0.5 * k);
    let minus = model.minus_mode().scale();
    let init = GaussianState::from_virtual((mean_plus, vac(s)), (Vector2::zeros(), vac(minus))).unwrap();
    let traj = evolve(&model, &init, &times).unwrap();

    let sol = solve_amplitude(&bath, w0, w0, &times, AmplitudeOptions { sign, ..Default::default() }).unwrap();
    let trace = extract_coefficients(&sol).unwrap();
    let n0 = 2.0 * a0.norm_sqr() + 1.0;
    // The printed convention evolves the complex conjugate amplitude.
    let start = match sign {
        SignConvention::Conventional => a0,
        SignConvention::Printed => a0.conj(),
    };
    let me = evolve_moments_me(&trace, start, n0, &times).unwrap();

    let bs = beam_splitter_matrix();
    let (mut err_a, mut err_n) = (0.0f64, 0.0f64);
    for (i, st) in traj.states.iter().enumerate() {
        let mu = bs * st.mean();
        let v = bs * st.cov() * bs;
        let a = Complex64::new(s.sqrt() * mu[0], mu[1] / s.sqrt()) / 2f64.sqrt();
        let nn = s * (v[(0, 0)] + mu[0] * mu[0]) + (v[(1, 1)] + mu[1] * mu[1]) / s;
        let a_me = match sign {
            SignConvention::Conventional => me.mean_a[i],
            SignConvention::Printed => me.mean_a[i].conj(),
        };
        err_a = err_a.max((a - a_me).norm() / a0.norm());
        err_n = err_n.max(((nn - me.occupation[i]) / nn).abs());
    }
    (err_a, err_n)
}

#[test]
fn moments_match_exact_dynamics() {
    for g in [0.05, 0.1] {
        for t in [0.0, 1.0, 10.0] {
            let (ea, en) = check(g, t, SignConvention::Conventional);
            assert!(ea < 1e-3 && en < 1e-3, "γ₀ = {g}, T = {t}: mean {ea:.3e}, occupation {en:.3e}");
        }
    }
}

#[test]
fn printed_convention_is_complex_conjugate() {
    let (ea, en) = check(0.1, 1.0, SignConvention::Printed);
    assert!(ea < 1e-3 && en < 1e-3, "mean {ea:.3e}, occupation {en:.3e}");
}
