//! Structured hexahedral grid of the unit cube with an optional planar
//! fracture, discretized with node-to-node multipliers.
//!
//! Nodes on the fracture plane are duplicated: the minus copy belongs to the
//! cells below the plane, the plus copy to the cells above. Every node pair
//! carries three multipliers (normal, two tangential); the column for a
//! direction `d` holds `+w d` on the plus node and `-w d` on the minus node,
//! with `w` the tributary interface area of the pair.

use serde::{Deserialize, Serialize};

use super::hex::{element_stiffness, isotropic_d, CORNERS};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::ZMin | Face::ZMax => 2,
        }
    }

    pub fn is_max(self) -> bool {
        matches!(self, Face::XMax | Face::YMax | Face::ZMax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FracturePlane {
    pub axis: Axis,
    /// Grid-point index along `axis`; must be interior.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub fracture: Option<FracturePlane>,
    pub dirichlet_faces: Vec<Face>,
    pub distortion: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            nx: 2,
            ny: 2,
            nz: 2,
            young_modulus: 1.0,
            poisson_ratio: 0.25,
            fracture: Some(FracturePlane {
                axis: Axis::X,
                index: 1,
            }),
            dirichlet_faces: vec![Face::XMin, Face::XMax],
            distortion: 0.0,
        }
    }
}

impl GridParams {
    pub fn cube(n: usize) -> Self {
        Self {
            nx: n,
            ny: n,
            nz: n,
            fracture: Some(FracturePlane {
                axis: Axis::X,
                index: n / 2,
            }),
            ..Self::default()
        }
    }

    pub fn elements(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Checks the parameters that do not depend on the generator.
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidParameter(
                "element counts must be at least 1".into(),
            ));
        }
        if !(self.young_modulus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "young modulus must be positive, got {}",
                self.young_modulus
            )));
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "poisson ratio must lie in (0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        if !(0.0..1.0).contains(&self.distortion) {
            return Err(Error::InvalidParameter(format!(
                "distortion must lie in [0, 1), got {}",
                self.distortion
            )));
        }
        if let Some(f) = self.fracture {
            let n = self.elements()[f.axis.index()];
            if f.index == 0 || f.index >= n {
                return Err(Error::InvalidParameter(format!(
                    "fracture index {} is not interior to 0..{}",
                    f.index, n
                )));
            }
        }
        Ok(())
    }
}

/// Assembled mesh and DOF numbering for a [`GridParams`].
#[derive(Debug, Clone)]
pub struct GridModel {
    params: GridParams,
    /// Physical coordinates per mesh node.
    coords: Vec<[f64; 3]>,
    /// Grid point -> (minus node, plus node); equal when not duplicated.
    point_nodes: Vec<(usize, usize)>,
    elements: Vec<[usize; 8]>,
    /// First free DOF of each node, `None` when the node is constrained.
    node_dof: Vec<Option<usize>>,
    n_dofs: usize,
}

fn distort(p: [f64; 3], delta: f64) -> [f64; 3] {
    use std::f64::consts::PI;
    if delta == 0.0 {
        return p;
    }
    let s = |t: f64| (PI * t).sin();
    let amp = delta / (8.0 * PI);
    let mut out = p;
    for d in 0..3 {
        let (u, v) = (p[(d + 1) % 3], p[(d + 2) % 3]);
        out[d] = p[d] + amp * (2.0 * PI * p[d]).sin() * (1.0 + s(u) * s(v));
    }
    out
}

impl GridModel {
    /// Builds the mesh without generator-specific face checks; an empty
    /// Dirichlet set is allowed here.
    pub fn build(params: &GridParams) -> Result<Self> {
        params.validate()?;
        let n = params.elements();
        let np = [n[0] + 1, n[1] + 1, n[2] + 1];
        let point_id = |i: usize, j: usize, k: usize| i + np[0] * (j + np[1] * k);
        let on_plane = |g: [usize; 3]| {
            params
                .fracture
                .is_some_and(|f| g[f.axis.index()] == f.index)
        };

        let mut coords = Vec::new();
        let mut point_nodes = vec![(0, 0); np[0] * np[1] * np[2]];
        let mut point_grid = vec![[0usize; 3]; point_nodes.len()];
        for k in 0..np[2] {
            for j in 0..np[1] {
                for i in 0..np[0] {
                    let g = [i, j, k];
                    let x = [
                        i as f64 / n[0] as f64,
                        j as f64 / n[1] as f64,
                        k as f64 / n[2] as f64,
                    ];
                    let x = distort(x, params.distortion);
                    let minus = coords.len();
                    coords.push(x);
                    let plus = if on_plane(g) {
                        coords.push(x);
                        minus + 1
                    } else {
                        minus
                    };
                    point_nodes[point_id(i, j, k)] = (minus, plus);
                    point_grid[point_id(i, j, k)] = g;
                }
            }
        }

        let mut elements = Vec::with_capacity(n[0] * n[1] * n[2]);
        for ck in 0..n[2] {
            for cj in 0..n[1] {
                for ci in 0..n[0] {
                    let cell = [ci, cj, ck];
                    let mut conn = [0usize; 8];
                    for (a, c) in CORNERS.iter().enumerate() {
                        let g = [
                            ci + (c[0] > 0.0) as usize,
                            cj + (c[1] > 0.0) as usize,
                            ck + (c[2] > 0.0) as usize,
                        ];
                        let (minus, plus) = point_nodes[point_id(g[0], g[1], g[2])];
                        conn[a] = match params.fracture {
                            Some(f) if cell[f.axis.index()] >= f.index => plus,
                            _ => minus,
                        };
                    }
                    elements.push(conn);
                }
            }
        }

        let mut constrained = vec![false; coords.len()];
        for (p, &(minus, plus)) in point_nodes.iter().enumerate() {
            let g = point_grid[p];
            let hit = params.dirichlet_faces.iter().any(|f| {
                let want = if f.is_max() { n[f.axis()] } else { 0 };
                g[f.axis()] == want
            });
            if hit {
                constrained[minus] = true;
                constrained[plus] = true;
            }
        }
        let mut node_dof = vec![None; coords.len()];
        let mut n_dofs = 0;
        for (node, dof) in node_dof.iter_mut().enumerate() {
            if !constrained[node] {
                *dof = Some(n_dofs);
                n_dofs += 3;
            }
        }

        Ok(Self {
            params: params.clone(),
            coords,
            point_nodes,
            elements,
            node_dof,
            n_dofs,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn elements(&self) -> &[[usize; 8]] {
        &self.elements
    }

    /// Global DOF of `(node, component)` or `None` when constrained.
    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        self.node_dof[node].map(|d| d + component)
    }

    /// True for nodes not lying on the boundary of the cube.
    pub fn is_interior(&self, node: usize) -> bool {
        self.coords[node]
            .iter()
            .all(|&x| x > 1e-12 && x < 1.0 - 1e-12)
    }

    pub fn stiffness(&self) -> Result<SparseMatrix> {
        let d = isotropic_d(self.params.young_modulus, self.params.poisson_ratio);
        let mut triplets = Vec::with_capacity(self.elements.len() * 576);
        for conn in &self.elements {
            let xe: [[f64; 3]; 8] = std::array::from_fn(|a| self.coords[conn[a]]);
            let ke = element_stiffness(&xe, &d)?;
            let dofs: [Option<usize>; 24] = std::array::from_fn(|l| self.dof(conn[l / 3], l % 3));
            for (li, gi) in dofs.iter().enumerate() {
                let Some(gi) = gi else { continue };
                for (lj, gj) in dofs.iter().enumerate() {
                    let Some(gj) = gj else { continue };
                    triplets.push((*gi, *gj, ke[li][lj]));
                }
            }
        }
        SparseMatrix::from_triplets(self.n_dofs, self.n_dofs, &triplets)
    }

    /// Node-to-node constraint matrix (`n_dofs x n_t`). Columns whose DOFs
    /// are all constrained are omitted.
    pub fn constraints(&self) -> Result<SparseMatrix> {
        let Some(frac) = self.params.fracture else {
            return SparseMatrix::from_triplets(self.n_dofs, 0, &[]);
        };
        let n = self.params.elements();
        let np = [n[0] + 1, n[1] + 1, n[2] + 1];
        let ax = frac.axis.index();
        let (u_ax, v_ax) = ((ax + 1) % 3, (ax + 2) % 3);
        let point_of = |a: usize, b: usize| {
            let mut g = [0usize; 3];
            g[ax] = frac.index;
            g[u_ax] = a;
            g[v_ax] = b;
            g[0] + np[0] * (g[1] + np[1] * g[2])
        };

        // tributary area vectors, oriented minus -> plus
        let mut area = vec![[0.0f64; 3]; self.point_nodes.len()];
        for a in 0..n[u_ax] {
            for b in 0..n[v_ax] {
                let quad = [
                    point_of(a, b),
                    point_of(a + 1, b),
                    point_of(a + 1, b + 1),
                    point_of(a, b + 1),
                ];
                let x: [[f64; 3]; 4] = std::array::from_fn(|q| self.coords[self.point_nodes[quad[q]].0]);
                let d1 = sub(x[2], x[0]);
                let d2 = sub(x[3], x[1]);
                let mut s = cross(d1, d2);
                if s[ax] < 0.0 {
                    s = [-s[0], -s[1], -s[2]];
                }
                for &p in &quad {
                    for c in 0..3 {
                        area[p][c] += 0.125 * s[c];
                    }
                }
            }
        }

        let mut plane_points: Vec<usize> = (0..self.point_nodes.len())
            .filter(|&p| {
                let (m, pl) = self.point_nodes[p];
                m != pl
            })
            .collect();
        plane_points.sort_by_key(|&p| self.point_nodes[p].0);

        let mut triplets = Vec::new();
        let mut col = 0;
        for p in plane_points {
            let (minus, plus) = self.point_nodes[p];
            let s = area[p];
            let w = norm(s);
            let normal = [s[0] / w, s[1] / w, s[2] / w];
            let mut e = [0.0; 3];
            e[u_ax] = 1.0;
            let proj = dot(e, normal);
            let t1 = normalize([
                e[0] - proj * normal[0],
                e[1] - proj * normal[1],
                e[2] - proj * normal[2],
            ]);
            let t2 = cross(normal, t1);
            for dir in [normal, t1, t2] {
                let mut entries = Vec::with_capacity(6);
                for c in 0..3 {
                    let coef = w * dir[c];
                    if coef == 0.0 {
                        continue;
                    }
                    if let Some(r) = self.dof(plus, c) {
                        entries.push((r, col, coef));
                    }
                    if let Some(r) = self.dof(minus, c) {
                        entries.push((r, col, -coef));
                    }
                }
                if !entries.is_empty() {
                    triplets.extend(entries);
                    col += 1;
                }
            }
        }
        SparseMatrix::from_triplets(self.n_dofs, col, &triplets)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_params(n: usize, distortion: f64) -> GridParams {
        GridParams {
            nx: n,
            ny: n,
            nz: n,
            fracture: None,
            dirichlet_faces: vec![],
            distortion,
            ..GridParams::default()
        }
    }

    #[test]
    fn patch_test_linear_field() {
        let model = GridModel::build(&free_params(3, 0.5)).unwrap();
        let a = model.stiffness().unwrap();
        let grad = [[0.3, -0.1, 0.2], [0.05, 0.4, -0.2], [0.1, 0.0, -0.3]];
        let mut u = vec![0.0; model.n_dofs()];
        for (node, x) in model.coords().iter().enumerate() {
            for c in 0..3 {
                u[model.dof(node, c).unwrap()] = (0..3).map(|d| grad[c][d] * x[d]).sum();
            }
        }
        let f = a.spmv(&u).unwrap();
        let interior: Vec<usize> = (0..model.n_nodes()).filter(|&n| model.is_interior(n)).collect();
        assert!(!interior.is_empty());
        for node in interior {
            for c in 0..3 {
                let r = f[model.dof(node, c).unwrap()];
                assert!(r.abs() < 1e-12, "node {node} comp {c}: {r}");
            }
        }
    }

    #[test]
    fn translation_in_null_space_without_dirichlet() {
        let model = GridModel::build(&free_params(2, 0.3)).unwrap();
        let a = model.stiffness().unwrap();
        for c in 0..3 {
            let mut u = vec![0.0; model.n_dofs()];
            for node in 0..model.n_nodes() {
                u[model.dof(node, c).unwrap()] = 1.0;
            }
            let f = a.spmv(&u).unwrap();
            assert!(f.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn duplicated_plane_counts() {
        let model = GridModel::build(&GridParams::default()).unwrap();
        // 27 grid points + 9 duplicates
        assert_eq!(model.n_nodes(), 36);
        let b = model.constraints().unwrap();
        assert_eq!(b.n_cols(), 27);
        // axis-aligned plane: one DOF per side per column
        for col in b.column_patterns() {
            assert_eq!(col.len(), 2);
        }
    }

    #[test]
    fn tributary_areas_sum_to_plane_area() {
        let model = GridModel::build(&GridParams::default()).unwrap();
        let b = model.constraints().unwrap();
        let bt = b.transpose();
        // normal columns are every third column; +w entries sum to area 1
        let total: f64 = (0..b.n_cols())
            .step_by(3)
            .map(|l| bt.row(l).filter(|&(_, v)| v > 0.0).map(|(_, v)| v).sum::<f64>())
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = GridParams::default();
        p.poisson_ratio = 0.6;
        assert!(GridModel::build(&p).is_err());
        let mut p = GridParams::default();
        p.fracture = Some(FracturePlane {
            axis: Axis::X,
            index: 2,
        });
        assert!(GridModel::build(&p).is_err());
        let mut p = GridParams::default();
        p.distortion = 1.0;
        assert!(GridModel::build(&p).is_err());
    }

    #[test]
    fn distorted_plane_gives_full_columns() {
        let p = GridParams {
            nx: 4,
            ny: 3,
            nz: 3,
            fracture: Some(FracturePlane {
                axis: Axis::X,
                index: 1,
            }),
            distortion: 0.6,
            ..GridParams::default()
        };
        let model = GridModel::build(&p).unwrap();
        let b = model.constraints().unwrap();
        assert_eq!(b.n_cols(), 3 * 16);
        assert!(b.column_patterns().iter().any(|c| c.len() == 6));
    }
}
