//! Node-based finite differences on intervals and rectangles.
//!
//! The Robin condition `∂u/∂ν = -βu` is folded into the Laplacian by
//! eliminating a ghost node across every boundary face:
//! `u_ghost = u_inner - 2hβ u_bnd`. With trapezoid quadrature weights `W`
//! the resulting operator `A_β` satisfies `W A_β = K + diag(w_∂ β)`, where `K` is
//! the symmetric stiffness matrix, so `A_β` is self-adjoint in the weighted
//! inner product `⟨u, v⟩_W = Σ_i W_i u_i v_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of the spatial domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Interval { length: f64, n_cells: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
}

/// A boundary node with its outward unit normal and boundary quadrature weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryNode {
    pub node: usize,
    pub normal: [f64; 2],
    pub weight: f64,
}

/// Uniform grid with interior/boundary classification and quadrature.
#[derive(Debug, Clone)]
pub struct SpaceGrid {
    spec: GridSpec,
    dims: usize,
    cells: [usize; 2],
    spacing: [f64; 2],
    coords: Vec<[f64; 2]>,
    weights: Vec<f64>,
    boundary: Vec<BoundaryNode>,
    boundary_slot: Vec<Option<usize>>,
    interior: Vec<usize>,
}

pub fn build_grid(spec: &GridSpec) -> Result<SpaceGrid> {
    SpaceGrid::new(spec.clone())
}

impl SpaceGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let (dims, extents, cells) = match spec {
            GridSpec::Interval { length, n_cells } => (1, [length, 0.0], [n_cells, 0]),
            GridSpec::Rectangle { lx, ly, nx, ny } => (2, [lx, ly], [nx, ny]),
        };
        for d in 0..dims {
            if !(extents[d].is_finite() && extents[d] > 0.0) {
                return Err(Error::Config(format!(
                    "grid extent along axis {d} must be > 0, got {}",
                    extents[d]
                )));
            }
            if cells[d] < 4 {
                return Err(Error::Config(format!(
                    "grid needs at least 4 cells per axis, got {}",
                    cells[d]
                )));
            }
        }
        let spacing = [
            extents[0] / cells[0] as f64,
            if dims == 2 { extents[1] / cells[1] as f64 } else { 1.0 },
        ];
        let nx = cells[0] + 1;
        let ny = if dims == 2 { cells[1] + 1 } else { 1 };
        let mut coords = Vec::with_capacity(nx * ny);
        let mut weights = Vec::with_capacity(nx * ny);
        let mut boundary = Vec::new();
        let mut boundary_slot = vec![None; nx * ny];
        let mut interior = Vec::new();
        let trap = |i: usize, n: usize, h: f64| if i == 0 || i == n - 1 { 0.5 * h } else { h };
        for j in 0..ny {
            for i in 0..nx {
                let node = j * nx + i;
                let x = if i == cells[0] {
                    extents[0]
                } else {
                    i as f64 * spacing[0]
                };
                let y = if dims == 2 && j == cells[1] {
                    extents[1]
                } else {
                    j as f64 * spacing[1]
                };
                coords.push([x, if dims == 2 { y } else { 0.0 }]);
                let mut w = trap(i, nx, spacing[0]);
                if dims == 2 {
                    w *= trap(j, ny, spacing[1]);
                }
                weights.push(w);

                // outward normal components per axis
                let nxc = if i == 0 {
                    -1.0
                } else if i == nx - 1 {
                    1.0
                } else {
                    0.0
                };
                let nyc = if dims == 2 {
                    if j == 0 {
                        -1.0
                    } else if j == ny - 1 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
                if nxc == 0.0 && nyc == 0.0 {
                    interior.push(node);
                    continue;
                }
                // Boundary measure: a point in 1D; in 2D half the incident edge
                // lengths on each boundary side the node belongs to.
                let weight = if dims == 1 {
                    1.0
                } else {
                    let mut w = 0.0;
                    if nxc != 0.0 {
                        w += trap(j, ny, spacing[1]);
                    }
                    if nyc != 0.0 {
                        w += trap(i, nx, spacing[0]);
                    }
                    w
                };
                let norm = f64::hypot(nxc, nyc);
                boundary_slot[node] = Some(boundary.len());
                boundary.push(BoundaryNode {
                    node,
                    normal: [nxc / norm, nyc / norm],
                    weight,
                });
            }
        }
        Ok(Self {
            spec,
            dims,
            cells,
            spacing,
            coords,
            weights,
            boundary,
            boundary_slot,
            interior,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Nodes per axis.
    pub fn shape(&self) -> [usize; 2] {
        [self.cells[0] + 1, if self.dims == 2 { self.cells[1] + 1 } else { 1 }]
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Domain quadrature weights (trapezoid).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Boundary slot of a node, if it lies on the boundary.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    /// |Ω|.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// |∂Ω| (number of endpoints in 1D).
    pub fn perimeter(&self) -> f64 {
        self.boundary.iter().map(|b| b.weight).sum()
    }

    pub fn check_field(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_nodes() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} nodes",
                field.len(),
                self.n_nodes()
            )));
        }
        Ok(())
    }

    pub fn check_boundary(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_boundary() {
            return Err(Error::Shape(format!(
                "boundary slice has {} values, grid has {} boundary nodes",
                values.len(),
                self.n_boundary()
            )));
        }
        Ok(())
    }

    /// Weighted inner product `Σ W_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights.iter().zip(u).zip(v).map(|((w, a), b)| w * a * b).sum()
    }

    /// Restriction of a nodal field to the boundary slots.
    pub fn trace(&self, field: &[f64]) -> Vec<f64> {
        self.boundary.iter().map(|b| field[b.node]).collect()
    }

    /// `out = A_β u` without allocation; `beta` is indexed by boundary slot.
    pub(crate) fn apply_robin_into(&self, u: &[f64], beta: &[f64], out: &mut [f64]) {
        let [nx, ny] = self.shape();
        let [hx, hy] = self.spacing;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let uk = u[k];
                let b = self.boundary_slot[k].map_or(0.0, |s| beta[s]);
                let mut acc = axis_term(uk, i, nx, k, 1, u, hx, b);
                if self.dims == 2 {
                    acc += axis_term(uk, j, ny, k, nx, u, hy, b);
                }
                out[k] = acc;
            }
        }
    }

    /// Tridiagonal bands of `A_β` in 1D: (sub, diag, sup).
    pub(crate) fn robin_bands_1d(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        debug_assert_eq!(self.dims, 1);
        let n = self.n_nodes();
        let h = self.spacing[0];
        let ih2 = 1.0 / (h * h);
        let mut sub = vec![-ih2; n];
        let mut diag = vec![2.0 * ih2; n];
        let mut sup = vec![-ih2; n];
        sub[0] = 0.0;
        sup[n - 1] = 0.0;
        sup[0] = -2.0 * ih2;
        sub[n - 1] = -2.0 * ih2;
        diag[0] += 2.0 * beta[0] / h;
        diag[n - 1] += 2.0 * beta[1] / h;
        (sub, diag, sup)
    }

    /// Diagonal of `A_β`.
    pub(crate) fn robin_diagonal(&self, beta: &[f64]) -> Vec<f64> {
        let [nx, ny] = self.shape();
        let [hx, hy] = self.spacing;
        let mut d = vec![0.0; self.n_nodes()];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let b = self.boundary_slot[k].map_or(0.0, |s| beta[s]);
                let mut v = 2.0 / (hx * hx) + if i == 0 || i == nx - 1 { 2.0 * b / hx } else { 0.0 };
                if self.dims == 2 {
                    v += 2.0 / (hy * hy) + if j == 0 || j == ny - 1 { 2.0 * b / hy } else { 0.0 };
                }
                d[k] = v;
            }
        }
        d
    }

    /// Nodal load of an inhomogeneous Robin datum `∂u/∂ν + βu = -q`:
    /// `2q/h` per boundary face, so that `⟨load, v⟩_W = ∫_∂Ω q v ds`.
    pub fn boundary_load(&self, q: &[f64]) -> Vec<f64> {
        let [nx, ny] = self.shape();
        let [hx, hy] = self.spacing;
        let mut load = vec![0.0; self.n_nodes()];
        for (slot, b) in self.boundary.iter().enumerate() {
            let (i, j) = (b.node % nx, b.node / nx);
            let mut v = 0.0;
            if i == 0 || i == nx - 1 {
                v += 2.0 / hx;
            }
            if self.dims == 2 && (j == 0 || j == ny - 1) {
                v += 2.0 / hy;
            }
            load[b.node] = v * q[slot];
        }
        load
    }
}

/// Second difference along one axis with ghost-node Robin closure.
#[allow(clippy::too_many_arguments)]
#[inline]
fn axis_term(uk: f64, i: usize, n: usize, k: usize, stride: usize, u: &[f64], h: f64, beta: f64) -> f64 {
    let ih2 = 1.0 / (h * h);
    if i == 0 {
        2.0 * (uk - u[k + stride]) * ih2 + 2.0 * beta * uk / h
    } else if i == n - 1 {
        2.0 * (uk - u[k - stride]) * ih2 + 2.0 * beta * uk / h
    } else {
        (2.0 * uk - u[k - stride] - u[k + stride]) * ih2
    }
}

/// Discrete `-Δu` with the Robin condition `∂u/∂ν = -βu` folded in.
pub fn apply_laplacian_robin(grid: &SpaceGrid, u: &[f64], beta_slice: &[f64]) -> Result<Vec<f64>> {
    grid.check_field(u)?;
    grid.check_boundary(beta_slice)?;
    let mut out = vec![0.0; u.len()];
    grid.apply_robin_into(u, beta_slice, &mut out);
    Ok(out)
}

/// `∫_Ω field dx` by the trapezoid rule.
pub fn integrate_domain(grid: &SpaceGrid, field: &[f64]) -> Result<f64> {
    grid.check_field(field)?;
    Ok(grid.weights.iter().zip(field).map(|(w, f)| w * f).sum())
}

/// `∫_∂Ω field ds` for a nodal field.
pub fn integrate_boundary(grid: &SpaceGrid, field: &[f64]) -> Result<f64> {
    grid.check_field(field)?;
    Ok(grid.boundary.iter().map(|b| b.weight * field[b.node]).sum())
}

/// `∫_∂Ω g ds` for values indexed by boundary slot.
pub fn integrate_boundary_slots(grid: &SpaceGrid, values: &[f64]) -> Result<f64> {
    grid.check_boundary(values)?;
    Ok(grid.boundary.iter().zip(values).map(|(b, g)| b.weight * g).sum())
}

/// Robin heat-transfer coefficient on boundary nodes × time nodes, constrained
/// to the box `[m, M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryControl {
    values: Vec<Vec<f64>>,
    lower: f64,
    upper: f64,
}

impl BoundaryControl {
    /// Validates the bounds `0 < m ≤ M` and admissibility of every value.
    pub fn new(values: Vec<Vec<f64>>, lower: f64, upper: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        let n_b = values.first().map_or(0, Vec::len);
        for (n, row) in values.iter().enumerate() {
            if row.len() != n_b {
                return Err(Error::Shape(format!(
                    "control row {n} has {} values, expected {n_b}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= lower && **v <= upper)) {
                return Err(Error::Domain(format!(
                    "control value {v} at time node {n} outside [{lower}, {upper}]"
                )));
            }
        }
        Ok(Self { values, lower, upper })
    }

    /// Unconstrained coefficient field (e.g. β ≡ 0 for Neumann tests).
    pub fn free(values: Vec<Vec<f64>>) -> Self {
        Self {
            values,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn constant(grid: &SpaceGrid, n_time: usize, value: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![vec![value; grid.n_boundary()]; n_time], lower, upper)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn n_time(&self) -> usize {
        self.values.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec<f64>> {
        self.values
    }

    pub fn is_admissible(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .all(|v| *v >= self.lower && *v <= self.upper)
    }

    pub fn check_shape(&self, grid: &SpaceGrid, n_time: usize) -> Result<()> {
        if self.n_time() != n_time || self.n_boundary() != grid.n_boundary() {
            return Err(Error::Shape(format!(
                "control is {}×{}, expected {n_time} time nodes × {} boundary nodes",
                self.n_time(),
                self.n_boundary(),
                grid.n_boundary()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower > 0.0) {
        return Err(Error::Config(format!(
            "control lower bound must satisfy 0 < m, got m = {lower}"
        )));
    }
    if !(upper >= lower && upper.is_finite()) {
        return Err(Error::Config(format!(
            "control bounds must satisfy m <= M, got m = {lower}, M = {upper}"
        )));
    }
    Ok(())
}
