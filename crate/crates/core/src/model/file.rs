use serde::{Deserialize, Serialize};

use super::{GroupBounds, TrussModel};
use crate::error::Result;

/// On-disk truss description (JSON). Indices are 0-based; unknown keys are
/// rejected. `nu` is carried as metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<(usize, usize, usize)>,
    pub supports: Vec<(usize, usize)>,
    pub load: Vec<(usize, usize, f64)>,
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    pub nu: f64,
    pub groups: Vec<GroupFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    pub a_init: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl ModelFile {
    pub fn to_model(&self) -> Result<TrussModel> {
        let groups: Vec<GroupBounds> = self
            .groups
            .iter()
            .map(|g| GroupBounds { a_init: g.a_init, a_min: g.a_min, a_max: g.a_max })
            .collect();
        TrussModel::new(
            &self.nodes,
            &self.elements,
            &self.supports,
            &self.load,
            self.youngs_modulus,
            self.nu,
            &groups,
        )
    }

    pub fn from_model(model: &TrussModel) -> Self {
        let c = model.reference_coords();
        let nodes = c.chunks(3).map(|p| [p[0], p[1], p[2]]).collect();
        let elements = model.elements().iter().map(|e| (e.nodes[0], e.nodes[1], e.group)).collect();
        let mut load = Vec::new();
        for (i, &d) in model.free_dofs().iter().enumerate() {
            let v = model.load()[i];
            if v != 0.0 {
                load.push((d / 3, d % 3, v));
            }
        }
        let groups = model
            .groups()
            .iter()
            .map(|g| GroupFile { a_init: g.a_init, a_min: g.a_min, a_max: g.a_max })
            .collect();
        Self {
            nodes,
            elements,
            supports: model.supports().to_vec(),
            load,
            youngs_modulus: model.youngs_modulus(),
            nu: model.poisson_ratio(),
            groups,
        }
    }
}
