//! Parametric example trusses: the shallow two-bar von Mises truss, star
//! domes and a braced triangular truss column.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{GroupFile, ModelFile};

/// Example structure and its geometric parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Two struts from `(±half_span, 0, 0)` to an apex at height `rise`.
    /// Only the apex vertical dof is free.
    VonMises { half_span: f64, rise: f64 },
    /// Star dome with an apex node. `ring_heights` runs from the pinned
    /// outer ring inwards; two rings give the classic 24-bar dome, five
    /// node rings (apex plus four hexagonal lattice rings) give the
    /// 156-bar dome.
    StarDome { rings: usize, outer_radius: f64, ring_heights: Vec<f64>, apex_height: f64 },
    /// Stack of triangular prisms with X-braced faces and a tetrahedral cap.
    TrussColumn { blocks: usize, base_edge: f64, block_height: f64 },
}

impl Generator {
    pub fn von_mises() -> Self {
        Self::VonMises { half_span: 1.0, rise: 0.2 }
    }

    pub fn two_ring_dome() -> Self {
        Self::StarDome { rings: 2, outer_radius: 50.0, ring_heights: vec![0.0, 6.216], apex_height: 8.216 }
    }

    pub fn five_ring_dome() -> Self {
        let apex = 6.0;
        let ring_heights = (1..=4).rev().map(|k| apex * (1.0 - (k as f64 / 4.0).powi(2))).collect();
        Self::StarDome { rings: 5, outer_radius: 25.0, ring_heights, apex_height: apex }
    }

    pub fn truss_column() -> Self {
        Self::TrussColumn { blocks: 10, base_edge: 1.0, block_height: 1.0 }
    }

    /// Parses a kind name (`von_mises`, `star_dome`, `star_dome5`,
    /// `truss_column`) into its default generator.
    pub fn by_name(kind: &str) -> Result<Self> {
        match kind {
            "von_mises" => Ok(Self::von_mises()),
            "star_dome" | "star_dome2" => Ok(Self::two_ring_dome()),
            "star_dome5" => Ok(Self::five_ring_dome()),
            "truss_column" => Ok(Self::truss_column()),
            other => Err(Error::Config(format!("unknown generator kind '{other}'"))),
        }
    }

    /// Imperfection standard deviation used with this example by default
    /// (relative to unit-norm buckling modes).
    pub fn default_sigma_beta(&self) -> f64 {
        match self {
            Self::VonMises { rise, .. } => 0.1 * rise,
            Self::StarDome { rings: 2, .. } => 0.1,
            Self::StarDome { .. } => 0.03,
            Self::TrussColumn { .. } => 0.006,
        }
    }

    /// Default optimisation budget for this example.
    pub fn default_budget(&self) -> usize {
        match self {
            Self::VonMises { .. } | Self::StarDome { rings: 2, .. } => 100,
            Self::StarDome { .. } => 200,
            Self::TrussColumn { .. } => 300,
        }
    }

    pub fn build(&self) -> Result<ModelFile> {
        match self {
            Self::VonMises { half_span, rise } => von_mises(*half_span, *rise),
            Self::StarDome { rings: 2, outer_radius, ring_heights, apex_height } => {
                two_ring_dome(*outer_radius, ring_heights, *apex_height)
            }
            Self::StarDome { rings: 5, outer_radius, ring_heights, apex_height } => {
                five_ring_dome(*outer_radius, ring_heights, *apex_height)
            }
            Self::StarDome { rings, .. } => Err(Error::Config(format!("star dome supports 2 or 5 rings, got {rings}"))),
            Self::TrussColumn { blocks, base_edge, block_height } => truss_column(*blocks, *base_edge, *block_height),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn group(a_init: f64, a_min: f64, a_max: f64) -> GroupFile {
    GroupFile { a_init, a_min, a_max }
}

fn von_mises(half_span: f64, rise: f64) -> Result<ModelFile> {
    positive("half_span", half_span)?;
    positive("rise", rise)?;
    Ok(ModelFile {
        nodes: vec![[-half_span, 0.0, 0.0], [0.0, 0.0, rise], [half_span, 0.0, 0.0]],
        elements: vec![(0, 1, 0), (2, 1, 0)],
        supports: vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)],
        load: vec![(1, 2, -1.0)],
        youngs_modulus: 1.0e4,
        nu: 0.35,
        groups: vec![group(1.0, 0.5, 1.5)],
    })
}

fn dome_groups(n: usize) -> Vec<GroupFile> {
    vec![group(0.5, 0.25, 0.75); n]
}

fn pin_all(nodes: impl Iterator<Item = usize>) -> Vec<(usize, usize)> {
    nodes.flat_map(|n| (0..3).map(move |d| (n, d))).collect()
}

// Node 0 is the apex, 1..=6 the inner ring, 7..=12 the pinned outer ring.
fn two_ring_dome(outer_radius: f64, ring_heights: &[f64], apex_height: f64) -> Result<ModelFile> {
    positive("outer_radius", outer_radius)?;
    if ring_heights.len() != 2 {
        return Err(Error::Config(format!("two-ring dome needs 2 ring heights, got {}", ring_heights.len())));
    }
    let inner_radius = 0.5 * outer_radius;
    let mut nodes = vec![[0.0, 0.0, apex_height]];
    for k in 0..6 {
        let t = PI / 6.0 + k as f64 * PI / 3.0;
        nodes.push([inner_radius * t.cos(), inner_radius * t.sin(), ring_heights[1]]);
    }
    for k in 0..6 {
        let t = k as f64 * PI / 3.0;
        nodes.push([outer_radius * t.cos(), outer_radius * t.sin(), ring_heights[0]]);
    }
    let mut elements = Vec::with_capacity(24);
    for k in 0..6 {
        elements.push((0, 1 + k, 0));
    }
    for k in 0..6 {
        elements.push((1 + k, 1 + (k + 1) % 6, 1));
    }
    for k in 0..6 {
        elements.push((7 + k, 1 + k, 2));
        elements.push((7 + (k + 1) % 6, 1 + k, 2));
    }
    Ok(ModelFile {
        nodes,
        elements,
        supports: pin_all(7..13),
        load: vec![(0, 2, -1.0)],
        youngs_modulus: 1.0e8,
        nu: 0.35,
        groups: dome_groups(3),
    })
}

// Hexagonal triangulated lattice of side 4: apex plus rings of 6k nodes.
fn five_ring_dome(outer_radius: f64, ring_heights: &[f64], apex_height: f64) -> Result<ModelFile> {
    positive("outer_radius", outer_radius)?;
    const SIDE: usize = 4;
    if ring_heights.len() != SIDE {
        return Err(Error::Config(format!("five-ring dome needs {SIDE} ring heights, got {}", ring_heights.len())));
    }
    let spacing = outer_radius / SIDE as f64;
    let corner = |j: usize| {
        let t = j as f64 * PI / 3.0;
        [t.cos(), t.sin()]
    };
    // lattice coordinates of ring k, counter-clockwise from corner 0
    let ring_points = |k: usize| -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(6 * k);
        for j in 0..6 {
            let (c0, c1) = (corner(j), corner(j + 1));
            for s in 0..k {
                let w = s as f64 / k as f64;
                let r = k as f64 * spacing;
                pts.push([r * ((1.0 - w) * c0[0] + w * c1[0]), r * ((1.0 - w) * c0[1] + w * c1[1])]);
            }
        }
        pts
    };

    let mut nodes = vec![[0.0, 0.0, apex_height]];
    let mut ring_start = vec![0usize];
    for k in 1..=SIDE {
        ring_start.push(nodes.len());
        let z = ring_heights[SIDE - k];
        nodes.extend(ring_points(k).into_iter().map(|p| [p[0], p[1], z]));
    }

    let close = |a: &[f64; 3], b: &[f64; 3]| {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        (d - spacing).abs() < 1e-6 * spacing
    };
    let mut elements = Vec::with_capacity(156);
    // radial members between ring k-1 and ring k
    for k in 1..=SIDE {
        let inner: Vec<usize> = if k == 1 { vec![0] } else { (ring_start[k - 1]..ring_start[k]).collect() };
        let outer = ring_start[k]..ring_start[k] + 6 * k;
        for b in outer {
            let on_corner_ray = (b - ring_start[k]) % k == 0;
            for &a in &inner {
                if close(&nodes[a], &nodes[b]) {
                    let g = match k {
                        1 => 0,
                        _ if on_corner_ray && (a == 0 || (a - ring_start[k - 1]) % (k - 1) == 0) => 8,
                        _ => 2 * (k - 1),
                    };
                    elements.push((a, b, g));
                }
            }
        }
    }
    // circumferential members of ring k
    for k in 1..=SIDE {
        let n = 6 * k;
        for s in 0..n {
            elements.push((ring_start[k] + s, ring_start[k] + (s + 1) % n, 2 * k - 1));
        }
    }
    elements.sort_by_key(|&(a, b, _)| (a.min(b), a.max(b)));

    Ok(ModelFile {
        nodes,
        elements,
        supports: pin_all(ring_start[SIDE]..ring_start[SIDE] + 6 * SIDE),
        load: vec![(0, 2, -1.0)],
        youngs_modulus: 1.0e8,
        nu: 0.35,
        groups: dome_groups(9),
    })
}

fn truss_column(blocks: usize, base_edge: f64, block_height: f64) -> Result<ModelFile> {
    positive("base_edge", base_edge)?;
    positive("block_height", block_height)?;
    if blocks < 3 {
        return Err(Error::Config(format!("truss column needs at least 3 blocks, got {blocks}")));
    }
    let circumradius = base_edge / 3f64.sqrt();
    let mut nodes = Vec::with_capacity(3 * (blocks + 1) + 1);
    for level in 0..=blocks {
        for i in 0..3 {
            let t = PI / 2.0 + i as f64 * 2.0 * PI / 3.0;
            nodes.push([circumradius * t.cos(), circumradius * t.sin(), level as f64 * block_height]);
        }
    }
    let top = nodes.len();
    nodes.push([0.0, 0.0, (blocks + 1) as f64 * block_height]);

    // lower 40% of blocks, next 30%, upper 30%: vertical/horizontal/bracing each
    let lower = (blocks * 4).div_ceil(10);
    let middle = (blocks * 7).div_ceil(10);
    let band = |b: usize| if b < lower { 0 } else if b < middle { 1 } else { 2 };
    let node = |level: usize, i: usize| 3 * level + i % 3;

    let mut elements = Vec::with_capacity(12 * blocks + 3);
    for b in 0..blocks {
        let g = 3 * band(b);
        for i in 0..3 {
            elements.push((node(b, i), node(b + 1, i), g));
        }
        for i in 0..3 {
            elements.push((node(b + 1, i), node(b + 1, i + 1), g + 1));
        }
        for i in 0..3 {
            elements.push((node(b, i), node(b + 1, i + 1), g + 2));
            elements.push((node(b, i + 1), node(b + 1, i), g + 2));
        }
    }
    for i in 0..3 {
        elements.push((node(blocks, i), top, 9));
    }

    let mut supports = pin_all(0..3);
    supports.push((top, 0));
    supports.push((top, 1));
    Ok(ModelFile {
        nodes,
        elements,
        supports,
        load: vec![(top, 2, -1.0)],
        youngs_modulus: 1.0e4,
        nu: 0.35,
        groups: vec![group(0.1, 0.05, 0.15); 10],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group_sizes(m: &ModelFile) -> Vec<usize> {
        let mut sizes = vec![0; m.groups.len()];
        for e in &m.elements {
            sizes[e.2] += 1;
        }
        sizes
    }

    #[test]
    fn two_ring_dome_counts() {
        let m = Generator::two_ring_dome().build().unwrap();
        assert_eq!((m.elements.len(), m.nodes.len()), (24, 13));
        assert_eq!(group_sizes(&m), vec![6, 6, 12]);
        let model = m.to_model().unwrap();
        assert_eq!(model.n_dof(), 21);
    }

    #[test]
    fn two_ring_dome_reproduces_reference_volume() {
        let model = Generator::two_ring_dome().build().unwrap().to_model().unwrap();
        let v0 = model.volume(model.initial_design().as_slice()).unwrap();
        assert!((v0 - 339.841).abs() < 5e-3, "V0 = {v0}");
    }

    #[test]
    fn five_ring_dome_counts() {
        let m = Generator::five_ring_dome().build().unwrap();
        assert_eq!((m.elements.len(), m.nodes.len()), (156, 61));
        assert!(group_sizes(&m).iter().all(|&s| s > 0));
        assert_eq!(m.groups.len(), 9);
        m.to_model().unwrap();
    }

    #[test]
    fn truss_column_counts() {
        let m = Generator::truss_column().build().unwrap();
        assert_eq!((m.elements.len(), m.nodes.len()), (123, 34));
        assert_eq!(group_sizes(&m), vec![12, 12, 24, 9, 9, 18, 9, 9, 18, 3]);
        let model = m.to_model().unwrap();
        assert_eq!(model.n_dof(), 3 * 30 + 1);
    }

    #[test]
    fn von_mises_has_one_free_dof() {
        let model = Generator::von_mises().build().unwrap().to_model().unwrap();
        assert_eq!(model.n_dof(), 1);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Generator::VonMises { half_span: -1.0, rise: 0.2 }.build().is_err());
        assert!(Generator::StarDome { rings: 3, outer_radius: 1.0, ring_heights: vec![], apex_height: 1.0 }.build().is_err());
        assert!(Generator::by_name("geodesic").is_err());
    }
}
