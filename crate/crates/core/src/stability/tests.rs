use approx::assert_relative_eq;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::generators::Generator;
use crate::model::{factorize_symmetric, GroupBounds, TrussModel};

fn von_mises() -> TrussModel {
    Generator::von_mises().build().unwrap().to_model().unwrap()
}

fn dome() -> TrussModel {
    Generator::two_ring_dome().build().unwrap().to_model().unwrap()
}

/// Load parameter along the symmetric von Mises path as a function of the
/// apex height, from vertical equilibrium of the two bars.
fn von_mises_lambda(z: f64) -> f64 {
    let (w, h, e, a) = (1.0_f64, 0.2_f64, 1e4, 1.0);
    let big_l = (w * w + h * h).sqrt();
    let l = (w * w + z * z).sqrt();
    let t = e * a * big_l / l * (l / big_l).ln();
    -2.0 * t * z / l
}

/// Maximiser of `sign * lambda(z)` on `[lo, hi]` by golden-section search.
fn golden_extremum(lo: f64, hi: f64, sign: f64) -> (f64, f64) {
    let g = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if sign * von_mises_lambda(c) > sign * von_mises_lambda(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let z = 0.5 * (a + b);
    (z, von_mises_lambda(z))
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn directional_derivative_matches_central_differences() {
    let m = dome();
    let a = m.initial_design();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = m.n_dof();
    let scale = m.characteristic_length();
    for _ in 0..5 {
        let x = m.reference_free() + random_vec(n, &mut rng) * (0.02 * scale);
        let phi = random_vec(n, &mut rng);
        let du = random_vec(n, &mut rng);
        let exact = directional_derivative_kphi(&m, &x, &a, &phi, &du).unwrap();
        let h = 1e-6 * scale;
        let kp = m.tangent_stiffness(&(&x + &du * h), &a).unwrap();
        let km = m.tangent_stiffness(&(&x - &du * h), &a).unwrap();
        let fd = (kp - km) * &phi / (2.0 * h);
        assert!((&exact - &fd).amax() < 1e-5 * exact.amax(), "{exact} vs {fd}");

        let matrix = stiffness_derivative_matrix(&m, &x, &a, &du).unwrap();
        assert!((&matrix * &phi - &exact).amax() < 1e-12 * exact.amax());

        let psi = random_vec(n, &mut rng);
        let lhs = directional_derivative_kphi(&m, &x, &a, &phi, &du).unwrap().dot(&psi);
        let rhs = directional_derivative_kphi(&m, &x, &a, &psi, &du).unwrap().dot(&phi);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        let swapped = directional_derivative_kphi(&m, &x, &a, &du, &phi).unwrap();
        assert!((&swapped - &exact).amax() < 1e-10 * exact.amax());
    }
    let zero = DVector::zeros(n);
    let x = m.reference_free();
    let phi = random_vec(n, &mut rng);
    assert_eq!(directional_derivative_kphi(&m, &x, &a, &phi, &zero).unwrap().amax(), 0.0);
}

#[test]
fn von_mises_mode_is_apex_vertical() {
    let m = von_mises();
    let basis = linear_buckling_modes(&m, &m.initial_design(), 1, &Default::default()).unwrap();
    let mut expected = vec![0.0; 9];
    expected[5] = 1.0;
    assert_eq!(basis.modes[0], expected);
    assert!(basis.lambda_lin[0] > 0.0);
}

#[test]
fn buckling_modes_satisfy_eigenproblem() {
    let m = dome();
    let a = m.initial_design();
    let settings = Default::default();
    let basis = linear_buckling_modes(&m, &a, 3, &settings).unwrap();
    let (k_e, k_g) = buckling_matrices(&m, &a, basis.lambda_ref, &settings).unwrap();
    let k_norm = k_e.norm();
    for (mode, &lambda) in basis.modes.iter().zip(&basis.lambda_lin) {
        assert_relative_eq!(mode.iter().map(|v| v * v).sum::<f64>(), 1.0, max_relative = 1e-12);
        let phi = m.restrict(mode);
        let res = (&k_e + &k_g * lambda) * &phi;
        assert!(res.norm() <= 1e-8 * k_norm, "{} vs {}", res.norm(), k_norm);
    }
    assert!(basis.lambda_lin.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn doubling_areas_doubles_linear_buckling_loads() {
    let m = dome();
    let a = m.initial_design();
    let a2 = a.scaled(2.0).unwrap();
    let b1 = linear_buckling_modes(&m, &a, 3, &Default::default()).unwrap();
    let b2 = linear_buckling_modes(&m, &a2, 3, &Default::default()).unwrap();
    for (l1, l2) in b1.lambda_lin.iter().zip(&b2.lambda_lin) {
        assert_relative_eq!(2.0 * l1, *l2, max_relative = 1e-6);
    }
}

#[test]
fn von_mises_limit_point_matches_oracle() {
    let m = von_mises();
    let a = m.initial_design();
    let settings = StabilitySettings::default();
    let p = critical_load(&m, &a, None, &settings).unwrap();
    let (z_star, lambda_star) = golden_extremum(0.0, 0.2, 1.0);
    assert_relative_eq!(p.lambda, lambda_star, max_relative = 1e-6);
    assert_relative_eq!(p.x[0], z_star, max_relative = 1e-4);
    assert_eq!(p.kind, CriticalKind::Limit);
    assert!(p.iterations <= 10);
    assert_relative_eq!(p.phi.norm(), 1.0, max_relative = 1e-9);

    // fixed point
    let again = extended_system_solve(&m, &a, &p.predictor(), &settings).unwrap();
    assert!(again.iterations <= 1);
    assert_relative_eq!(again.lambda, p.lambda, max_relative = 1e-12);
}

#[test]
fn von_mises_second_stability_point() {
    let m = von_mises();
    let a = m.initial_design();
    let (z2, lambda2) = golden_extremum(-0.2, 0.0, -1.0);
    let (_, lambda1) = golden_extremum(0.0, 0.2, 1.0);
    let predictor = Predictor {
        x: DVector::from_vec(vec![z2 * 1.05]),
        phi: DVector::from_vec(vec![1.0]),
        lambda: 0.9 * lambda2,
    };
    let p = extended_system_solve(&m, &a, &predictor, &StabilitySettings::default()).unwrap();
    assert_relative_eq!(p.lambda, lambda2, max_relative = 1e-6);
    assert_relative_eq!(p.lambda, -lambda1, max_relative = 1e-6);
}

#[test]
fn symmetric_column_bifurcates() {
    // column 0-1 with two symmetric lateral springs 1-2 and 1-3
    let m = TrussModel::new(
        &[[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]],
        &[(0, 1, 0), (1, 2, 1), (1, 3, 1)],
        &[(0, 0), (0, 1), (0, 2), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (3, 2)],
        &[(1, 2, -1.0)],
        1.0,
        0.0,
        &[GroupBounds { a_init: 1.0, a_min: 0.5, a_max: 2.0 }, GroupBounds { a_init: 0.01, a_min: 0.005, a_max: 0.02 }],
    )
    .unwrap();
    let p = critical_load(&m, &m.initial_design(), None, &StabilitySettings::default()).unwrap();
    assert_eq!(p.kind, CriticalKind::Bifurcation);
    assert!(p.phi[0].abs() > 1.0 - 1e-9);
    assert!(p.lambda > 0.0);
}

#[test]
fn stability_point_is_singular() {
    let m = dome();
    let a = m.initial_design();
    let p = critical_load(&m, &a, None, &StabilitySettings::default()).unwrap();
    let k = m.tangent_stiffness(&p.x, &a).unwrap();
    let eig = k.clone().symmetric_eigen();
    let smallest = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    assert!(smallest <= 1e-6 * k.norm());
    let r = m.residual(&p.x, p.lambda, &a).unwrap();
    assert!(r.norm() <= 1e-9 * m.load().norm() * p.lambda.abs().max(1.0));
    assert!(p.lambda > 0.0);
    let report = factorize_symmetric(&k).unwrap();
    assert!(report.min_abs_pivot <= 1e-6 * k.amax());
}

#[test]
fn warm_and_cold_starts_agree_for_small_imperfection() {
    let m = dome();
    let a = m.initial_design();
    let settings = StabilitySettings::default();
    let basis = linear_buckling_modes(&m, &a, 1, &settings.continuation).unwrap();
    let base = critical_load(&m, &a, None, &settings).unwrap();
    let imperfect = crate::model::apply_imperfection(m.reference_coords(), &basis.modes, &[0.05]).unwrap();
    let mi = m.with_reference_coords(imperfect.clone()).unwrap();
    let shift = mi.reference_free() - m.reference_free();
    let warm = Predictor { x: &base.x + shift, phi: base.phi.clone(), lambda: base.lambda };
    let w = critical_load(&mi, &a, Some(&warm), &settings).unwrap();
    let c = critical_load(&mi, &a, None, &settings).unwrap();
    assert_relative_eq!(w.lambda, c.lambda, max_relative = 1e-8);
}
