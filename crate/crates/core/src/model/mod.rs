//! Pin-jointed truss model and its geometrically nonlinear mechanics.
//!
//! Nodal positions are handled in two layouts: the *full* layout with
//! `3 * n_nodes` entries, and the *free* layout holding only the unsupported
//! degrees of freedom (`n_dof` entries). Supported coordinates stay at their
//! reference values; solvers work exclusively on free vectors.

mod element;
mod factor;
mod file;

pub use element::ElementState;
pub use factor::{factorize_symmetric, FactorizationReport, Inertia, SymmetricFactor};
pub use file::{GroupFile, ModelFile};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative length below which an element is treated as collapsed.
pub const DEGENERATE_LENGTH_RATIO: f64 = 1e-10;

/// A strut connecting two nodes; its area is that of its design group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub nodes: [usize; 2],
    pub group: usize,
}

/// Design-variable group: struts sharing one cross-sectional area.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Sum of the reference lengths of the grouped struts.
    pub length: f64,
    pub a_init: f64,
    pub a_min: f64,
    pub a_max: f64,
}

/// Bounds and initial value of a group, as given in a model file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupBounds {
    pub a_init: f64,
    pub a_min: f64,
    pub a_max: f64,
}

/// Cross-sectional areas, one per design group.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector(Vec<f64>);

impl DesignVector {
    pub fn new(areas: Vec<f64>) -> Result<Self> {
        if let Some(a) = areas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidModel(format!("non-positive area {a}")));
        }
        Ok(Self(areas))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplies every area by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|a| a * factor).collect())
    }
}

impl std::ops::Index<usize> for DesignVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Immutable description of a supported, loaded truss.
#[derive(Debug, Clone)]
pub struct TrussModel {
    coords: Vec<f64>,
    elements: Vec<Element>,
    reference_lengths: Vec<f64>,
    supports: Vec<(usize, usize)>,
    free_dofs: Vec<usize>,
    dof_index: Vec<Option<usize>>,
    load: DVector<f64>,
    youngs_modulus: f64,
    poisson_ratio: f64,
    groups: Vec<Group>,
}

impl TrussModel {
    /// Builds and validates a model.
    ///
    /// `supports` lists fixed `(node, dof)` pairs, `loads` lists
    /// `(node, dof, value)` entries of the load pattern. Group lengths are
    /// accumulated from the element reference lengths.
    pub fn new(
        nodes: &[[f64; 3]],
        elements: &[(usize, usize, usize)],
        supports: &[(usize, usize)],
        loads: &[(usize, usize, f64)],
        youngs_modulus: f64,
        poisson_ratio: f64,
        groups: &[GroupBounds],
    ) -> Result<Self> {
        let n_nodes = nodes.len();
        if n_nodes < 2 {
            return Err(Error::InvalidModel("a truss needs at least two nodes".into()));
        }
        if !(youngs_modulus.is_finite() && youngs_modulus > 0.0) {
            return Err(Error::InvalidModel(format!("Young's modulus {youngs_modulus} must be positive")));
        }
        let coords: Vec<f64> = nodes.iter().flat_map(|p| p.iter().copied()).collect();
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite nodal coordinate".into()));
        }

        let mut fixed = vec![false; 3 * n_nodes];
        let mut support_list = Vec::with_capacity(supports.len());
        for &(node, dof) in supports {
            if node >= n_nodes || dof > 2 {
                return Err(Error::InvalidModel(format!("support ({node}, {dof}) out of range")));
            }
            if !fixed[3 * node + dof] {
                fixed[3 * node + dof] = true;
                support_list.push((node, dof));
            }
        }
        support_list.sort_unstable();
        let free_dofs: Vec<usize> = (0..3 * n_nodes).filter(|&d| !fixed[d]).collect();
        if free_dofs.is_empty() {
            return Err(Error::InvalidModel("every degree of freedom is supported".into()));
        }
        if free_dofs.len() == 3 * n_nodes {
            return Err(Error::InvalidModel("the truss has no supports".into()));
        }
        let mut dof_index = vec![None; 3 * n_nodes];
        for (i, &d) in free_dofs.iter().enumerate() {
            dof_index[d] = Some(i);
        }

        let mut load = DVector::zeros(free_dofs.len());
        for &(node, dof, value) in loads {
            if node >= n_nodes || dof > 2 {
                return Err(Error::InvalidModel(format!("load ({node}, {dof}) out of range")));
            }
            match dof_index[3 * node + dof] {
                Some(i) => load[i] += value,
                None => {
                    return Err(Error::InvalidModel(format!(
                        "load applied to supported dof ({node}, {dof})"
                    )))
                }
            }
        }
        if load.norm() == 0.0 {
            return Err(Error::InvalidModel("load pattern is zero".into()));
        }

        if groups.is_empty() {
            return Err(Error::InvalidModel("no design groups".into()));
        }
        for (g, b) in groups.iter().enumerate() {
            let ok = b.a_min > 0.0 && b.a_min <= b.a_init && b.a_init <= b.a_max && b.a_max.is_finite();
            if !ok {
                return Err(Error::InvalidModel(format!(
                    "group {g}: need 0 < a_min <= a_init <= a_max, got {} <= {} <= {}",
                    b.a_min, b.a_init, b.a_max
                )));
            }
        }

        let mut element_list = Vec::with_capacity(elements.len());
        let mut reference_lengths = Vec::with_capacity(elements.len());
        let mut group_lengths = vec![0.0; groups.len()];
        for (e, &(a, b, g)) in elements.iter().enumerate() {
            if a >= n_nodes || b >= n_nodes || a == b {
                return Err(Error::InvalidModel(format!("element {e} has invalid nodes ({a}, {b})")));
            }
            if g >= groups.len() {
                return Err(Error::InvalidModel(format!("element {e} references missing group {g}")));
            }
            let length = distance(&coords, a, b);
            if !(length > 0.0) {
                return Err(Error::InvalidModel(format!("element {e} has zero reference length")));
            }
            group_lengths[g] += length;
            element_list.push(Element { nodes: [a, b], group: g });
            reference_lengths.push(length);
        }
        if element_list.is_empty() {
            return Err(Error::InvalidModel("no elements".into()));
        }
        if let Some(g) = group_lengths.iter().position(|&l| l == 0.0) {
            return Err(Error::InvalidModel(format!("group {g} has no elements")));
        }
        let groups = groups
            .iter()
            .zip(&group_lengths)
            .map(|(b, &length)| Group { length, a_init: b.a_init, a_min: b.a_min, a_max: b.a_max })
            .collect();

        Ok(Self {
            coords,
            elements: element_list,
            reference_lengths,
            supports: support_list,
            free_dofs,
            dof_index,
            load,
            youngs_modulus,
            poisson_ratio,
            groups,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / 3
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Number of free degrees of freedom.
    pub fn n_dof(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn supports(&self) -> &[(usize, usize)] {
        &self.supports
    }

    /// Reference coordinates, full layout.
    pub fn reference_coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn reference_length(&self, e: usize) -> f64 {
        self.reference_lengths[e]
    }

    pub fn youngs_modulus(&self) -> f64 {
        self.youngs_modulus
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.poisson_ratio
    }

    /// Load pattern `f` on the free dofs.
    pub fn load(&self) -> &DVector<f64> {
        &self.load
    }

    /// Full-layout dof of each free dof.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Free index of a full-layout dof, `None` when supported.
    pub fn free_index(&self, full_dof: usize) -> Option<usize> {
        self.dof_index[full_dof]
    }

    /// Initial areas of all groups.
    pub fn initial_design(&self) -> DesignVector {
        DesignVector(self.groups.iter().map(|g| g.a_init).collect())
    }

    /// Mean reference strut length, used to scale displacement tolerances.
    pub fn characteristic_length(&self) -> f64 {
        self.reference_lengths.iter().sum::<f64>() / self.reference_lengths.len() as f64
    }

    /// Largest axial stiffness scale `E * a_g` over the groups.
    pub fn axial_force_scale(&self, a: &DesignVector) -> f64 {
        a.as_slice().iter().fold(0.0_f64, |m, &ag| m.max(self.youngs_modulus * ag))
    }

    /// Largest axial strut stiffness `E a_e / L_e`; a scale for tangent
    /// stiffness entries that does not vanish at critical points.
    pub fn stiffness_scale(&self, a: &DesignVector) -> f64 {
        self.elements
            .iter()
            .zip(&self.reference_lengths)
            .fold(0.0_f64, |m, (el, &l)| m.max(self.youngs_modulus * a[el.group] / l))
    }

    /// Reference positions of the free dofs, i.e. the unloaded state.
    pub fn reference_free(&self) -> DVector<f64> {
        DVector::from_iterator(self.free_dofs.len(), self.free_dofs.iter().map(|&d| self.coords[d]))
    }

    /// Expands free positions into the full layout using reference values
    /// at the supports.
    pub fn full_positions(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut full = self.coords.clone();
        for (i, &d) in self.free_dofs.iter().enumerate() {
            full[d] = x[i];
        }
        full
    }

    /// Restricts a full-layout vector to the free dofs.
    pub fn restrict(&self, full: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.free_dofs.len(), self.free_dofs.iter().map(|&d| full[d]))
    }

    /// Zero-pads a free vector to the full layout.
    pub fn expand(&self, free: &DVector<f64>) -> Vec<f64> {
        let mut full = vec![0.0; self.coords.len()];
        for (i, &d) in self.free_dofs.iter().enumerate() {
            full[d] = free[i];
        }
        full
    }

    /// Same topology, supports, load and material with a new reference
    /// geometry. Group lengths keep their as-designed values so the volume
    /// constraint is unaffected by imperfections.
    pub fn with_reference_coords(&self, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                what: "reference coordinates",
                expected: self.coords.len(),
                actual: coords.len(),
            });
        }
        let mut reference_lengths = Vec::with_capacity(self.elements.len());
        for (e, el) in self.elements.iter().enumerate() {
            let length = distance(&coords, el.nodes[0], el.nodes[1]);
            if !(length > 0.0) {
                return Err(Error::InvalidModel(format!("element {e} collapsed by imperfection")));
            }
            reference_lengths.push(length);
        }
        Ok(Self { coords, reference_lengths, ..self.clone() })
    }

    fn check_design(&self, a: &DesignVector) -> Result<()> {
        if a.len() != self.groups.len() {
            return Err(Error::DimensionMismatch { what: "design vector", expected: self.groups.len(), actual: a.len() });
        }
        Ok(())
    }

    fn check_free(&self, v: &DVector<f64>, what: &'static str) -> Result<()> {
        if v.len() != self.n_dof() {
            return Err(Error::DimensionMismatch { what, expected: self.n_dof(), actual: v.len() });
        }
        Ok(())
    }

    /// Kinematics and axial force of element `e` at full positions `pos`.
    pub fn element_kinematics(&self, pos: &[f64], e: usize, area: f64) -> Result<ElementState> {
        let el = &self.elements[e];
        ElementState::new(
            pos,
            el.nodes,
            self.reference_lengths[e],
            area,
            self.youngs_modulus,
            e,
        )
    }

    /// Internal nodal force vector `t(x)` on the free dofs.
    pub fn internal_force(&self, x: &DVector<f64>, a: &DesignVector) -> Result<DVector<f64>> {
        self.check_design(a)?;
        self.check_free(x, "positions")?;
        let pos = self.full_positions(x);
        let mut t = DVector::zeros(self.n_dof());
        for (e, el) in self.elements.iter().enumerate() {
            let s = self.element_kinematics(&pos, e, a[el.group])?;
            for k in 0..3 {
                let fb = s.axial_force * s.direction[k];
                if let Some(i) = self.dof_index[3 * el.nodes[1] + k] {
                    t[i] += fb;
                }
                if let Some(i) = self.dof_index[3 * el.nodes[0] + k] {
                    t[i] -= fb;
                }
            }
        }
        Ok(t)
    }

    /// Total strain energy `sum_e E V_e eps_e^2 / 2`.
    pub fn strain_energy(&self, x: &DVector<f64>, a: &DesignVector) -> Result<f64> {
        self.check_design(a)?;
        self.check_free(x, "positions")?;
        let pos = self.full_positions(x);
        let mut energy = 0.0;
        for (e, el) in self.elements.iter().enumerate() {
            let s = self.element_kinematics(&pos, e, a[el.group])?;
            let volume = a[el.group] * s.reference_length;
            energy += 0.5 * self.youngs_modulus * volume * s.strain * s.strain;
        }
        Ok(energy)
    }

    /// Tangent stiffness `K = dt/dx` on the free dofs.
    pub fn tangent_stiffness(&self, x: &DVector<f64>, a: &DesignVector) -> Result<DMatrix<f64>> {
        self.check_design(a)?;
        self.check_free(x, "positions")?;
        let pos = self.full_positions(x);
        let n = self.n_dof();
        let mut k = DMatrix::zeros(n, n);
        for (e, el) in self.elements.iter().enumerate() {
            let s = self.element_kinematics(&pos, e, a[el.group])?;
            let ke = s.stiffness_block(self.youngs_modulus);
            let dofs = self.element_dofs(el);
            for (p, &dp) in dofs.iter().enumerate() {
                let Some(i) = dp else { continue };
                for (q, &dq) in dofs.iter().enumerate() {
                    let Some(j) = dq else { continue };
                    let sign = if (p < 3) == (q < 3) { 1.0 } else { -1.0 };
                    k[(i, j)] += sign * ke[p % 3][q % 3];
                }
            }
        }
        Ok(k)
    }

    /// Free indices of the six element dofs (node a then node b).
    pub(crate) fn element_dofs(&self, el: &Element) -> [Option<usize>; 6] {
        let [a, b] = el.nodes;
        [
            self.dof_index[3 * a],
            self.dof_index[3 * a + 1],
            self.dof_index[3 * a + 2],
            self.dof_index[3 * b],
            self.dof_index[3 * b + 1],
            self.dof_index[3 * b + 2],
        ]
    }

    /// Equilibrium residual `r = t(x) - lambda f`.
    pub fn residual(&self, x: &DVector<f64>, lambda: f64, a: &DesignVector) -> Result<DVector<f64>> {
        let mut r = self.internal_force(x, a)?;
        r.axpy(-lambda, &self.load, 1.0);
        Ok(r)
    }

    /// Total material volume `sum_g a_g * l_g` using as-designed group lengths.
    pub fn volume(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.groups.len() {
            return Err(Error::DimensionMismatch { what: "design vector", expected: self.groups.len(), actual: a.len() });
        }
        Ok(volume(a, &self.groups.iter().map(|g| g.length).collect::<Vec<_>>()))
    }
}

/// `sum_g a_g * l_g`.
pub fn volume(a: &[f64], group_lengths: &[f64]) -> f64 {
    a.iter().zip(group_lengths).map(|(a, l)| a * l).sum()
}

/// Imperfect reference geometry `X = X0 + sum_i beta_i phi_i`.
///
/// `modes` holds full-layout mode vectors.
pub fn apply_imperfection(x0: &[f64], modes: &[Vec<f64>], beta: &[f64]) -> Result<Vec<f64>> {
    if modes.len() != beta.len() {
        return Err(Error::DimensionMismatch { what: "imperfection amplitudes", expected: modes.len(), actual: beta.len() });
    }
    let mut x = x0.to_vec();
    for (mode, &b) in modes.iter().zip(beta) {
        if mode.len() != x0.len() {
            return Err(Error::DimensionMismatch { what: "mode length", expected: x0.len(), actual: mode.len() });
        }
        for (xi, mi) in x.iter_mut().zip(mode) {
            *xi += b * mi;
        }
    }
    Ok(x)
}

fn distance(coords: &[f64], a: usize, b: usize) -> f64 {
    let d = [
        coords[3 * b] - coords[3 * a],
        coords[3 * b + 1] - coords[3 * a + 1],
        coords[3 * b + 2] - coords[3 * a + 2],
    ];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}
