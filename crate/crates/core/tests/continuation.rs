use buckle_core::continuation::{
    newton_equilibrium, trace_path, trace_until_near_critical, write_path_csv, Constraint, ContinuationSettings,
};
use buckle_core::generators::Generator;
use buckle_core::stability::critical_load;
use buckle_core::{Error, TrussModel};

fn build(g: Generator) -> TrussModel {
    g.build().unwrap().to_model().unwrap()
}

#[test]
fn small_loads_follow_the_linear_response() {
    let model = build(Generator::two_ring_dome());
    let a = model.initial_design();
    let lc = critical_load(&model, &a, None, &Default::default()).unwrap().lambda;
    let x0 = model.reference_free();
    let k0 = model.tangent_stiffness(&x0, &a).unwrap();
    let lambda = 1e-7 * lc;
    let linear = k0.lu().solve(&(model.load() * lambda)).unwrap();
    let p = newton_equilibrium(&model, &a, lambda, &x0, &Default::default()).unwrap();
    let u = &p.x - &x0;
    assert!((&u - &linear).norm() <= 1e-6 * linear.norm(), "{} vs {}", u.norm(), linear.norm());
    assert_eq!(p.negative_pivots, 0);
}

#[test]
fn von_mises_trace_passes_the_limit_point() {
    let model = build(Generator::von_mises());
    let a = model.initial_design();
    let lc = critical_load(&model, &a, None, &Default::default()).unwrap().lambda;
    let pts = trace_path(&model, &a, &Default::default(), 400).unwrap();
    let first_unstable = pts.iter().position(|p| p.negative_pivots > 0).expect("trace reaches the unstable branch");
    assert!(pts[..first_unstable].windows(2).all(|w| w[1].lambda > w[0].lambda));
    let peak = pts.iter().map(|p| p.lambda).fold(f64::MIN, f64::max);
    assert!(peak <= lc * (1.0 + 1e-9) && peak >= 0.98 * lc, "peak {peak}, critical {lc}");
    for p in &pts {
        let r = model.residual(&p.x, p.lambda, &a).unwrap();
        assert!(r.norm() <= 1e-6 * model.load().norm() * p.lambda.abs().max(1.0));
    }
}

#[test]
fn switch_point_lies_below_the_critical_load() {
    for g in [Generator::von_mises(), Generator::two_ring_dome(), Generator::truss_column()] {
        let model = build(g);
        let a = model.initial_design();
        let settings = ContinuationSettings::default();
        let (p, phi) = trace_until_near_critical(&model, &a, &settings).unwrap();
        let lc = critical_load(&model, &a, None, &Default::default()).unwrap().lambda;
        assert!(p.lambda > 0.0 && p.lambda <= lc * (1.0 + 1e-6), "{} vs {lc}", p.lambda);
        assert!((phi.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn load_control_reaches_the_switch_criterion() {
    let model = build(Generator::von_mises());
    let a = model.initial_design();
    let settings = ContinuationSettings { constraint: Constraint::LoadControl, ..Default::default() };
    let (p, _) = trace_until_near_critical(&model, &a, &settings).unwrap();
    let lc = critical_load(&model, &a, None, &Default::default()).unwrap().lambda;
    assert!(p.lambda < lc && p.negative_pivots == 0, "{} {} {lc}", p.lambda, p.negative_pivots);
}

#[test]
fn load_cap_below_critical_exhausts_steps() {
    let model = build(Generator::von_mises());
    let a = model.initial_design();
    let settings = ContinuationSettings { lambda_max: Some(1.0), max_steps: 50, ..Default::default() };
    assert!(matches!(trace_until_near_critical(&model, &a, &settings), Err(Error::MaxStepsExceeded { .. })));
}

#[test]
fn path_csv_has_one_row_per_point() {
    let model = build(Generator::von_mises());
    let a = model.initial_design();
    let pts = trace_path(&model, &a, &Default::default(), 5).unwrap();
    let mut buf = Vec::new();
    write_path_csv(&model, &pts, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "step,lambda,log_abs_det,negative_pivots,x0,y0,z0,x1,y1,z1,x2,y2,z2");
    assert_eq!(lines.count(), pts.len());
}

#[test]
fn newton_converges_quadratically_before_the_limit() {
    let model = build(Generator::von_mises());
    let a = model.initial_design();
    let lambda = 15.0;
    let guess = model.reference_free() * 0.97;
    let p = newton_equilibrium(&model, &a, lambda, &guess, &Default::default()).unwrap();
    let r = &p.residual_norms;
    assert!(r.len() >= 4, "{r:?}");
    let ratios: Vec<f64> = r.windows(2).filter(|w| w[1] > 0.0).map(|w| w[1] / (w[0] * w[0])).collect();
    assert!(ratios.iter().all(|&q| q <= 100.0 * ratios[0]), "{ratios:?}");

    let at_rest = newton_equilibrium(&model, &a, 0.0, &model.reference_free(), &Default::default()).unwrap();
    assert_eq!(at_rest.iterations(), 0);
    assert_eq!(at_rest.x, model.reference_free());
}
