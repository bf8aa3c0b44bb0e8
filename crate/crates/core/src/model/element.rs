use crate::error::{Error, Result};

use super::DEGENERATE_LENGTH_RATIO;

/// Current state of one strut.
///
/// The axial force follows from the logarithmic strain and the Cauchy stress
/// of a volume-preserving strut: `T = (V E / l) ln(l / L)` with `V = a L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementState {
    pub reference_length: f64,
    pub length: f64,
    /// Unit vector from node a to node b in the current configuration.
    pub direction: [f64; 3],
    pub axial_force: f64,
    pub strain: f64,
    /// Reference volume `a L`.
    pub volume: f64,
}

impl ElementState {
    pub(crate) fn new(
        pos: &[f64],
        nodes: [usize; 2],
        reference_length: f64,
        area: f64,
        youngs_modulus: f64,
        id: usize,
    ) -> Result<Self> {
        let [a, b] = nodes;
        let d = [
            pos[3 * b] - pos[3 * a],
            pos[3 * b + 1] - pos[3 * a + 1],
            pos[3 * b + 2] - pos[3 * a + 2],
        ];
        let length = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(length > DEGENERATE_LENGTH_RATIO * reference_length) {
            return Err(Error::SingularGeometry { element: id, length });
        }
        let direction = [d[0] / length, d[1] / length, d[2] / length];
        let strain = (length / reference_length).ln();
        let volume = area * reference_length;
        let axial_force = volume * youngs_modulus / length * strain;
        Ok(Self { reference_length, length, direction, axial_force, strain, volume })
    }

    /// `k = (V E / l^2 - 2 T / l) n (x) n + (T / l) I`.
    pub fn stiffness_block(&self, youngs_modulus: f64) -> [[f64; 3]; 3] {
        let l = self.length;
        let t = self.axial_force;
        let c = self.volume * youngs_modulus / (l * l) - 2.0 * t / l;
        let g = t / l;
        let n = self.direction;
        let mut k = [[0.0; 3]; 3];
        for (i, row) in k.iter_mut().enumerate() {
            for (j, kij) in row.iter_mut().enumerate() {
                let (p, q) = (i.min(j), i.max(j));
                *kij = c * n[p] * n[q] + if i == j { g } else { 0.0 };
            }
        }
        k
    }

    /// Derivative of `k phi` along the relative nodal motion `d`, both
    /// given as node-b-minus-node-a vectors. Symmetric in `phi` and `d`.
    pub fn stiffness_directional_derivative(&self, youngs_modulus: f64, phi: [f64; 3], d: [f64; 3]) -> [f64; 3] {
        let l = self.length;
        let t = self.axial_force;
        let ve = self.volume * youngs_modulus;
        let n = self.direction;
        let n_phi = dot(n, phi);
        let n_d = dot(n, d);

        let c = ve / (l * l) - 2.0 * t / l;
        let dl = n_d;
        let dt = (ve / (l * l) - t / l) * dl;
        let dc = -2.0 * ve / (l * l * l) * dl - 2.0 * dt / l + 2.0 * t / (l * l) * dl;
        let dg = dt / l - t / (l * l) * dl;
        // dn = (d - (n.d) n) / l
        let dn = [(d[0] - n_d * n[0]) / l, (d[1] - n_d * n[1]) / l, (d[2] - n_d * n[2]) / l];
        let dn_phi = dot(dn, phi);

        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = dc * n_phi * n[i] + c * (dn_phi * n[i] + n_phi * dn[i]) + dg * phi[i];
        }
        out
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
