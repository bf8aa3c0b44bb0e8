use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_inputs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

fn dense_kernel(a: &[Vec<f64>], b: &[Vec<f64>], theta: &Hyperparameters) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| matern_cov(&a[i], &b[j], theta.nu, theta.eta))
}

fn dense_lml(a: &[Vec<f64>], g: &[f64], theta: &Hyperparameters) -> f64 {
    let n = g.len();
    let m = dense_kernel(a, a, theta) + DMatrix::identity(n, n) * theta.sigma_eps.powi(2);
    let inv = m.clone().try_inverse().unwrap();
    let g = DVector::from_column_slice(g);
    -0.5 * (g.transpose() * inv * &g)[0] - 0.5 * m.determinant().ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

#[test]
fn kernel_closed_forms() {
    for nu in Smoothness::ALL {
        assert_eq!(matern(0.0, nu, 0.7), 1.0);
        assert!(matern(1e-300, nu, 0.7) <= 1.0);
    }
    for t in [0.5, 1.0, 2.0] {
        assert_relative_eq!(matern(t * 0.4, Smoothness::Half, 0.4), (-t).exp(), max_relative = 1e-15);
    }
    let eta = 0.9;
    assert_relative_eq!(matern(eta / 3f64.sqrt(), Smoothness::ThreeHalves, eta), 2.0 * (-1.0f64).exp(), max_relative = 1e-15);
    assert!((matern(eta / 3f64.sqrt(), Smoothness::ThreeHalves, eta) - 0.73576).abs() < 1e-5);
    // five-halves at s = 1: (1 + 1 + 1/3) e^-1
    assert_relative_eq!(matern(eta / 5f64.sqrt(), Smoothness::FiveHalves, eta), 7.0 / 3.0 * (-1.0f64).exp(), max_relative = 1e-15);
    assert_eq!(matern_cov(&[0.1, 0.2], &[0.4, 0.6], Smoothness::Half, 1.0), (-0.5f64).exp());
}

#[test]
fn lml_hand_values() {
    let x = vec![vec![0.3]];
    let t0 = Hyperparameters { nu: Smoothness::FiveHalves, eta: 1.0, sigma_eps: 0.0 };
    let l0 = log_marginal_likelihood(&x, &[0.0], &t0).unwrap();
    assert_relative_eq!(l0, -0.5 * (2.0 * std::f64::consts::PI).ln(), max_relative = 1e-15);
    assert!((l0 + 0.91894).abs() < 1e-5);
    let t1 = Hyperparameters { sigma_eps: 1.0, ..t0 };
    let l1 = log_marginal_likelihood(&x, &[1.0], &t1).unwrap();
    assert!((l1 + 1.51551).abs() < 1e-5, "{l1}");

    let dup = vec![vec![0.3], vec![0.3]];
    let t = Hyperparameters { sigma_eps: 0.1, ..t0 };
    assert!(log_marginal_likelihood(&dup, &[1.0, 1.0], &t).unwrap().is_finite());
}

#[test]
fn lml_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=4);
        let a = random_inputs(&mut rng, n, d);
        let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let theta = Hyperparameters {
            nu: Smoothness::ALL[trial % 3],
            eta: rng.random_range(0.05..0.5),
            sigma_eps: rng.random_range(0.1..0.5),
        };
        let l = log_marginal_likelihood(&a, &g, &theta).unwrap();
        assert_relative_eq!(l, dense_lml(&a, &g, &theta), max_relative = 1e-10);
    }
}

#[test]
fn noiseless_interpolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_inputs(&mut rng, 12, 2);
    let g: Vec<f64> = a.iter().map(|x| (3.0 * x[0]).sin() + x[1] * x[1]).collect();
    let theta = Hyperparameters { nu: Smoothness::FiveHalves, eta: 0.3, sigma_eps: 0.0 };
    let gp = GpModel::new(a.clone(), &g, theta).unwrap();
    assert_eq!(gp.jitter(), 0.0);
    let (mean, cov) = gp_predict(&gp, &a);
    for i in 0..a.len() {
        assert!((mean[i] - g[i]).abs() <= 1e-6);
        assert!(cov[(i, i)] <= 1e-8);
    }
}

#[test]
fn far_field_reverts_to_prior() {
    let a = vec![vec![0.0, 0.0], vec![0.05, 0.0]];
    let theta = Hyperparameters { nu: Smoothness::ThreeHalves, eta: 0.01, sigma_eps: 1e-6 };
    let gp = GpModel::new(a, &[1.0, 3.0], theta).unwrap();
    let (m, v) = gp.predict_point_standardized(&[1.0, 1.0]);
    assert!(m.abs() < 1e-12);
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn prediction_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_inputs(&mut rng, 25, 3);
    let g: Vec<f64> = (0..25).map(|_| rng.random::<f64>()).collect();
    let theta = Hyperparameters { nu: Smoothness::ThreeHalves, eta: 0.4, sigma_eps: 0.05 };
    let gp = GpModel::new(a.clone(), &g, theta).unwrap();
    let test = random_inputs(&mut rng, 7, 3);
    let (mean, cov) = gp.predict_standardized(&test);

    let inv = (dense_kernel(&a, &a, &theta) + DMatrix::identity(25, 25) * 0.05f64.powi(2)).try_inverse().unwrap();
    let ks = dense_kernel(&test, &a, &theta);
    let gs = gp.standardized_outputs();
    let mean_ref = &ks * &inv * gs;
    let cov_ref = dense_kernel(&test, &test, &theta) - &ks * &inv * ks.transpose();
    for i in 0..7 {
        assert_relative_eq!(mean[i], mean_ref[i], max_relative = 1e-10);
        for j in 0..7 {
            assert_relative_eq!(cov[(i, j)], cov_ref[(i, j)], max_relative = 1e-10, epsilon = 1e-12);
        }
        assert!(cov[(i, i)] >= 0.0 && cov[(i, i)] <= 1.0 + 1e-10);
    }
}

#[test]
fn mean_is_linear_in_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_inputs(&mut rng, 10, 2);
    let g1: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
    let g2: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
    let sum: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| x + y).collect();
    let theta = Hyperparameters::default();
    let test = random_inputs(&mut rng, 5, 2);
    let predict = |g: &[f64]| GpModel::with_standardization(a.clone(), g, theta, 0.0, 1.0).unwrap().predict_standardized(&test).0;
    let (p1, p2, p12) = (predict(&g1), predict(&g2), predict(&sum));
    for i in 0..5 {
        assert_relative_eq!(p12[i], p1[i] + p2[i], max_relative = 1e-10, epsilon = 1e-12);
    }
}

#[test]
fn fit_recovers_lengthscale_of_a_draw() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let a = random_inputs(&mut rng, 40, 1);
    let theta = Hyperparameters { nu: Smoothness::FiveHalves, eta: 0.3, sigma_eps: 0.0 };
    let mut c = dense_kernel(&a, &a, &theta);
    for i in 0..40 {
        c[(i, i)] += 1e-10;
    }
    let l = c.cholesky().unwrap().unpack();
    let z = DVector::from_iterator(40, (0..40).map(|_| crate::sampling::to_gaussian(rng.random_range(1e-9..1.0), 0.0, 1.0).unwrap()));
    let g: Vec<f64> = (l * z).iter().copied().collect();
    let gp = gp_fit(a, &g, &GpFitSettings::default()).unwrap();
    let eta = gp.hyperparameters().eta;
    assert!(eta > 0.15 && eta < 0.6, "{:?}", gp.hyperparameters());
}

#[test]
fn constant_outputs() {
    let a: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
    let gp = gp_fit(a, &[2.0; 6], &GpFitSettings::default()).unwrap();
    assert!(gp.hyperparameters().sigma_eps < 1e-6, "{:?}", gp.hyperparameters());
    for x in [0.13, 0.5, 0.97] {
        assert_relative_eq!(gp.predict_point(&[x]).0, 2.0, max_relative = 1e-9);
    }
}

#[test]
fn fit_is_invariant_to_output_scaling() {
    let a: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, (i * i % 5) as f64 / 4.0]).collect();
    let g: Vec<f64> = a.iter().map(|x| x[0].sin() - 2.0 * x[1]).collect();
    let scaled: Vec<f64> = g.iter().map(|v| 1e3 * v - 7.0).collect();
    let s = GpFitSettings::default();
    let (p, q) = (gp_fit(a.clone(), &g, &s).unwrap(), gp_fit(a, &scaled, &s).unwrap());
    assert_eq!(p.hyperparameters().nu, q.hyperparameters().nu);
    assert_relative_eq!(p.hyperparameters().eta, q.hyperparameters().eta, max_relative = 1e-6);
    let x = [0.42, 0.77];
    let (mp, sp) = p.predict_point(&x);
    let (mq, sq) = q.predict_point(&x);
    assert_relative_eq!(mq, 1e3 * mp - 7.0, max_relative = 1e-6);
    assert_relative_eq!(sq, 1e3 * sp, max_relative = 1e-5);
}

#[test]
fn single_point_uses_defaults() {
    let gp = gp_fit(vec![vec![0.5, 0.5]], &[4.0], &GpFitSettings::default()).unwrap();
    assert_eq!(gp.hyperparameters(), Hyperparameters::default());
    assert_relative_eq!(gp.predict_point(&[0.5, 0.5]).0, 4.0, max_relative = 1e-12);
}
