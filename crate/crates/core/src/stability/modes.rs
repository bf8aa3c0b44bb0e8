use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector};

use super::derivative::stiffness_derivative_matrix;
use crate::continuation::{newton_equilibrium, ContinuationSettings};
use crate::error::{Error, Result};
use crate::model::{DesignVector, TrussModel};

/// Fraction of the tangent-estimated first buckling load used as the
/// secant reference load.
pub const REFERENCE_LOAD_FRACTION: f64 = 0.1;

/// Linear buckling modes of the as-designed structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    /// Full-layout (`3 n_nodes`) unit-norm modes, zero at supported dofs.
    pub modes: Vec<Vec<f64>>,
    /// Linear buckling load estimates, ascending.
    pub lambda_lin: Vec<f64>,
    /// Secant reference load used to form the geometric stiffness.
    pub lambda_ref: f64,
}

impl ModeBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Keeps only the listed modes (0-based), in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self { modes: Vec::new(), lambda_lin: Vec::new(), lambda_ref: self.lambda_ref };
        for &i in indices {
            if i >= self.modes.len() {
                return Err(Error::Eigen(format!("mode {i} not available ({} computed)", self.modes.len())));
            }
            out.modes.push(self.modes[i].clone());
            out.lambda_lin.push(self.lambda_lin[i]);
        }
        Ok(out)
    }
}

/// Smallest positive `lambda` of `(k_e + lambda k_g) phi = 0` with SPD `k_e`,
/// at most `count` of them, ascending, with free-layout eigenvectors.
fn generalized_buckling(k_e: &DMatrix<f64>, k_g: &DMatrix<f64>, count: usize) -> Result<Vec<(f64, DVector<f64>)>> {
    let chol = Cholesky::new(k_e.clone())
        .ok_or_else(|| Error::Eigen("stiffness of the unloaded structure is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    // (k_e + lambda k_g) phi = 0  <=>  L^-1 (-k_g) L^-T y = (1/lambda) y,  phi = L^-T y
    let mut m = -(&l_inv * k_g * l_inv.transpose());
    m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let l_t = l.transpose();
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| {
            let y = eig.eigenvectors.column(i).into_owned();
            let phi = l_t.solve_upper_triangular(&y).expect("triangular factor is nonsingular");
            (1.0 / eig.eigenvalues[i], phi)
        })
        .collect())
}

/// Linearised buckling analysis of the unloaded structure.
///
/// The geometric stiffness is the secant `(K(x_ref) - K_E) / lambda_ref` at
/// `lambda_ref = 0.1 lambda_est`, where `lambda_est` comes from the exact
/// tangent `dK/dlambda` at the unloaded state. Modes are expanded to the
/// full layout, scaled to unit Euclidean norm and signed so that their
/// largest-magnitude entry is positive.
pub fn linear_buckling_modes(
    model: &TrussModel,
    a: &DesignVector,
    n_modes: usize,
    settings: &ContinuationSettings,
) -> Result<ModeBasis> {
    if n_modes == 0 {
        return Err(Error::Config("at least one buckling mode must be requested".into()));
    }
    let x0 = model.reference_free();
    let k_e = model.tangent_stiffness(&x0, a)?;
    let chol = Cholesky::new(k_e.clone())
        .ok_or_else(|| Error::Eigen("stiffness of the unloaded structure is not positive definite".into()))?;
    let v = chol.solve(model.load());

    let k_g_tangent = stiffness_derivative_matrix(model, &x0, a, &v)?;
    let estimate = generalized_buckling(&k_e, &k_g_tangent, 1)?;
    let lambda_est = estimate
        .first()
        .map(|(l, _)| *l)
        .ok_or_else(|| Error::Eigen("no positive buckling load in the tangent estimate".into()))?;
    let lambda_ref = REFERENCE_LOAD_FRACTION * lambda_est;
    debug!("tangent buckling estimate {lambda_est:e}, reference load {lambda_ref:e}");

    let guess = &x0 + &v * lambda_ref;
    let reference = newton_equilibrium(model, a, lambda_ref, &guess, settings)
        .map_err(|e| Error::Eigen(format!("reference equilibrium failed: {e}")))?;
    let k_ref = model.tangent_stiffness(&reference.x, a)?;
    let k_g = (&k_ref - &k_e) / lambda_ref;

    let pairs = generalized_buckling(&k_e, &k_g, n_modes)?;
    if pairs.len() < n_modes {
        return Err(Error::Eigen(format!("only {} positive buckling loads, {n_modes} requested", pairs.len())));
    }
    let mut modes = Vec::with_capacity(n_modes);
    let mut lambda_lin = Vec::with_capacity(n_modes);
    for (lambda, phi) in pairs {
        let mut full = model.expand(&phi);
        let norm = full.iter().map(|v| v * v).sum::<f64>().sqrt();
        let peak = full.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let scale = peak.signum() / norm;
        full.iter_mut().for_each(|v| *v *= scale);
        modes.push(full);
        lambda_lin.push(lambda);
    }
    Ok(ModeBasis { modes, lambda_lin, lambda_ref })
}

/// Secant geometric stiffness used by [`linear_buckling_modes`], exposed for
/// residual checks: returns `(K_E, K_G)` on the free dofs.
pub fn buckling_matrices(
    model: &TrussModel,
    a: &DesignVector,
    lambda_ref: f64,
    settings: &ContinuationSettings,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let x0 = model.reference_free();
    let k_e = model.tangent_stiffness(&x0, a)?;
    let chol = Cholesky::new(k_e.clone())
        .ok_or_else(|| Error::Eigen("stiffness of the unloaded structure is not positive definite".into()))?;
    let guess = &x0 + chol.solve(model.load()) * lambda_ref;
    let reference = newton_equilibrium(model, a, lambda_ref, &guess, settings)?;
    let k_ref = model.tangent_stiffness(&reference.x, a)?;
    Ok((k_e.clone(), (k_ref - k_e) / lambda_ref))
}
