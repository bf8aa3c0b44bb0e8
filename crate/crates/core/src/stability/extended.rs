use log::{debug, trace};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::derivative::{directional_derivative_kphi, stiffness_derivative_matrix};
use crate::continuation::{residual_tolerance, trace_until_near_critical, ContinuationSettings};
use crate::error::{Error, Result};
use crate::model::{factorize_symmetric, DesignVector, TrussModel};

/// Relative `|phi^T f| / |f|` above which a stability point is a limit point.
pub const LIMIT_POINT_THRESHOLD: f64 = 1e-6;

/// Smallest pivot of `K`, relative to the largest axial strut stiffness,
/// below which the update is computed from the full bordered Jacobian
/// instead of the partitioned solves.
pub const BORDERED_SWITCH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Limit,
    Bifurcation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySettings {
    pub continuation: ContinuationSettings,
    /// Equilibrium tolerance relative to `|f| max(|lambda|, 1)`.
    pub residual_tol: f64,
    /// `|K phi|` tolerance relative to the largest axial strut stiffness.
    pub eigen_tol: f64,
    /// Tolerance on `|phi| - 1`.
    pub norm_tol: f64,
    pub max_iterations: usize,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            continuation: ContinuationSettings::default(),
            residual_tol: 1e-10,
            eigen_tol: 1e-10,
            norm_tol: 1e-10,
            max_iterations: 30,
        }
    }
}

/// Starting guess `(x, phi, lambda)` for the extended system.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub x: DVector<f64>,
    pub phi: DVector<f64>,
    pub lambda: f64,
}

/// Converged critical state.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPoint {
    pub x: DVector<f64>,
    /// Free-layout null vector of the tangent stiffness.
    pub phi: DVector<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub kind: CriticalKind,
    /// Largest of the three residual blocks divided by its tolerance, one
    /// entry per iterate; the last entry is at most 1.
    pub residual_history: Vec<f64>,
}

impl StabilityPoint {
    pub fn predictor(&self) -> Predictor {
        Predictor { x: self.x.clone(), phi: self.phi.clone(), lambda: self.lambda }
    }
}

pub fn classify(model: &TrussModel, phi: &DVector<f64>) -> CriticalKind {
    let f = model.load();
    if phi.dot(f).abs() > LIMIT_POINT_THRESHOLD * f.norm() * phi.norm() {
        CriticalKind::Limit
    } else {
        CriticalKind::Bifurcation
    }
}

/// Newton iteration on `{r = 0, K phi = 0, |phi| - 1 = 0}`.
///
/// Each iterate factorises `K` once and reuses it for the four solves of the
/// partitioned update. Once `K` is numerically singular the update comes from
/// an LU solve of the full bordered Jacobian instead.
pub fn extended_system_solve(
    model: &TrussModel,
    a: &DesignVector,
    predictor: &Predictor,
    settings: &StabilitySettings,
) -> Result<StabilityPoint> {
    let n = model.n_dof();
    if predictor.x.len() != n || predictor.phi.len() != n {
        return Err(Error::DimensionMismatch { what: "predictor", expected: n, actual: predictor.x.len() });
    }
    let phi_norm = predictor.phi.norm();
    if !(phi_norm > 0.0 && phi_norm.is_finite()) {
        return Err(Error::Config("predictor mode must be nonzero".into()));
    }
    let f = model.load();
    let mut x = predictor.x.clone();
    let mut phi = predictor.phi.clone();
    let mut lambda = predictor.lambda;
    let mut history = Vec::new();
    let k_scale = model.stiffness_scale(a);
    let mut it = 0;
    loop {
        let r = model.residual(&x, lambda, a)?;
        let k = model.tangent_stiffness(&x, a)?;
        let kphi = &k * &phi;
        let norm = phi.norm();
        let s = norm - 1.0;
        let tol_r = residual_tolerance(model, a, lambda, settings.residual_tol);
        let tol_k = settings.eigen_tol * k_scale;
        let scaled = (r.norm() / tol_r).max(kphi.norm() / tol_k).max(s.abs() / settings.norm_tol);
        history.push(scaled);
        trace!("extended it {it}: lambda = {lambda:.15e}, scaled residual {scaled:e}");
        if scaled <= 1.0 {
            let kind = classify(model, &phi);
            debug!("stability point lambda = {lambda:.15e} ({kind:?}) after {it} iterations");
            return Ok(StabilityPoint { x, phi, lambda, iterations: it, kind, residual_history: history });
        }
        if it >= settings.max_iterations || !scaled.is_finite() {
            return Err(Error::NonConvergence { phase: "extended system", iterations: it, residual: scaled });
        }
        let report = factorize_symmetric(&k)?;
        let (dx, dphi, dlambda) = if report.is_singular() || report.min_abs_pivot < BORDERED_SWITCH * k_scale {
            bordered_update(model, a, &x, &phi, &k, &r, &kphi, s)
                .ok_or(Error::SingularMatrix { zero_pivots: report.inertia.zero })?
        } else {
            let v_f = report.solve(f)?;
            let v_r = report.solve(&r)?;
            let d_f = directional_derivative_kphi(model, &x, a, &phi, &v_f)?;
            let d_r = directional_derivative_kphi(model, &x, a, &phi, &v_r)?;
            let dphi1 = -report.solve(&d_f)?;
            // K^-1 (K phi) is exactly phi; solving for it would amplify round-off
            // by the condition number near the critical point.
            let dphi2 = report.solve(&d_r)? - &phi;
            let grad_s = &phi / norm;
            let denom = grad_s.dot(&dphi1);
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::NonConvergence { phase: "extended system", iterations: it, residual: scaled });
            }
            let dlambda = -(grad_s.dot(&dphi2) + s) / denom;
            (&v_f * dlambda - &v_r, &dphi1 * dlambda + &dphi2, dlambda)
        };
        x += dx;
        phi += dphi;
        lambda += dlambda;
        it += 1;
    }
}

/// Newton update from the full `(2n + 1)` Jacobian of the extended system.
#[allow(clippy::too_many_arguments)]
fn bordered_update(
    model: &TrussModel,
    a: &DesignVector,
    x: &DVector<f64>,
    phi: &DVector<f64>,
    k: &DMatrix<f64>,
    r: &DVector<f64>,
    kphi: &DVector<f64>,
    s: f64,
) -> Option<(DVector<f64>, DVector<f64>, f64)> {
    let n = x.len();
    // grad_x (K phi) du = D(du) phi = D(phi) du by symmetry of the third derivative
    let m = stiffness_derivative_matrix(model, x, a, phi).ok()?;
    let f = model.load();
    let norm = phi.norm();
    let mut j = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    j.view_mut((0, 0), (n, n)).copy_from(k);
    j.view_mut((n, 0), (n, n)).copy_from(&m);
    j.view_mut((n, n), (n, n)).copy_from(k);
    for i in 0..n {
        j[(i, 2 * n)] = -f[i];
        j[(2 * n, n + i)] = phi[i] / norm;
    }
    let mut rhs = DVector::zeros(2 * n + 1);
    rhs.rows_mut(0, n).copy_from(&(-r));
    rhs.rows_mut(n, n).copy_from(&(-kphi));
    rhs[2 * n] = -s;
    let sol = j.lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, n).into_owned(), sol[2 * n]))
}

/// Critical load of the first stability point on the primary path.
///
/// With `warm`, the extended system starts from it directly; otherwise the
/// path is traced until the tangent nearly loses definiteness and the
/// extended system takes over from there.
pub fn critical_load(
    model: &TrussModel,
    a: &DesignVector,
    warm: Option<&Predictor>,
    settings: &StabilitySettings,
) -> Result<StabilityPoint> {
    match warm {
        Some(p) => extended_system_solve(model, a, p, settings),
        None => {
            let (point, phi) = trace_until_near_critical(model, a, &settings.continuation)?;
            let predictor = Predictor { x: point.x, phi, lambda: point.lambda };
            match extended_system_solve(model, a, &predictor, settings) {
                Err(e) if settings.continuation.refine_crossing => {
                    debug!("extended system failed from the refined predictor ({e}); retrying unrefined");
                    let mut unrefined = settings.clone();
                    unrefined.continuation.refine_crossing = false;
                    let (point, phi) = trace_until_near_critical(model, a, &unrefined.continuation)?;
                    let predictor = Predictor { x: point.x, phi, lambda: point.lambda };
                    extended_system_solve(model, a, &predictor, settings).map_err(|_| e)
                }
                other => other,
            }
        }
    }
}
