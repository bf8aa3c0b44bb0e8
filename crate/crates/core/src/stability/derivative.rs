use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{DesignVector, TrussModel};

fn relative(full: &[f64], nodes: [usize; 2]) -> [f64; 3] {
    let [a, b] = nodes;
    [full[3 * b] - full[3 * a], full[3 * b + 1] - full[3 * a + 1], full[3 * b + 2] - full[3 * a + 2]]
}

/// Directional derivative `[grad_x (K phi)] du` of the tangent stiffness
/// contracted with `phi`, assembled from the analytical third derivative of
/// the strut strain energy. Symmetric in `phi` and `du`.
///
/// The load pattern is conservative, so the load-parameter derivative of
/// `K phi` vanishes and has no counterpart here.
pub fn directional_derivative_kphi(
    model: &TrussModel,
    x: &DVector<f64>,
    a: &DesignVector,
    phi: &DVector<f64>,
    du: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = model.n_dof();
    for (v, what) in [(x, "positions"), (phi, "mode"), (du, "direction")] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { what, expected: n, actual: v.len() });
        }
    }
    let pos = model.full_positions(x);
    let phi_full = model.expand(phi);
    let du_full = model.expand(du);
    let e_mod = model.youngs_modulus();
    let mut out = DVector::zeros(n);
    for (e, el) in model.elements().iter().enumerate() {
        let s = model.element_kinematics(&pos, e, a[el.group])?;
        let g = s.stiffness_directional_derivative(e_mod, relative(&phi_full, el.nodes), relative(&du_full, el.nodes));
        for k in 0..3 {
            if let Some(i) = model.free_index(3 * el.nodes[1] + k) {
                out[i] += g[k];
            }
            if let Some(i) = model.free_index(3 * el.nodes[0] + k) {
                out[i] -= g[k];
            }
        }
    }
    Ok(out)
}

/// Matrix `[grad_x K] du`, i.e. the derivative of `K` along `du`.
pub fn stiffness_derivative_matrix(
    model: &TrussModel,
    x: &DVector<f64>,
    a: &DesignVector,
    du: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = model.n_dof();
    if du.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch { what: "direction", expected: n, actual: du.len() });
    }
    let pos = model.full_positions(x);
    let du_full = model.expand(du);
    let e_mod = model.youngs_modulus();
    let mut m = DMatrix::zeros(n, n);
    for (e, el) in model.elements().iter().enumerate() {
        let s = model.element_kinematics(&pos, e, a[el.group])?;
        let d = relative(&du_full, el.nodes);
        let mut block = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut unit = [0.0; 3];
            unit[j] = 1.0;
            let col = s.stiffness_directional_derivative(e_mod, unit, d);
            for i in 0..3 {
                block[i][j] = col[i];
            }
        }
        let dofs = model.element_dofs(el);
        for (p, &dp) in dofs.iter().enumerate() {
            let Some(i) = dp else { continue };
            for (q, &dq) in dofs.iter().enumerate() {
                let Some(j) = dq else { continue };
                let sign = if (p < 3) == (q < 3) { 1.0 } else { -1.0 };
                m[(i, j)] += sign * block[p % 3][q % 3];
            }
        }
    }
    Ok(m)
}
