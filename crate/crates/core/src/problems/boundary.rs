//! Poisson boundary control on an L-shaped domain.
//!
//! The state `y` lives on interior lattice nodes of the unit square with its
//! upper-right quadrant removed; the control `u` holds the Dirichlet values on
//! the nodes adjacent to the interior. The discrete problem is
//! `min ½‖y − 1‖²  s.t.  A y + B u = q` with `A` the negated 5-point Laplacian.

use crate::error::{Error, Result};
use crate::linalg::{cg_solve, CooBuilder, SparseMatrix};
use crate::penalty::{PenaltyModel, SecondOrder};
use nalgebra::DMatrix;
use std::borrow::Cow;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior(usize),
    Boundary(usize),
    Unused,
}

/// Lattice over `[0, 1]²` with spacing `h = 1/(n_per_side − 1)`.
#[derive(Debug, Clone)]
pub struct LShapeGrid {
    n_per_side: usize,
    h: f64,
    kinds: Vec<NodeKind>,
    interior: Vec<(usize, usize)>,
    boundary: Vec<(usize, usize)>,
}

fn removed(i: usize, j: usize, h: f64) -> bool {
    i as f64 * h > 0.5 && j as f64 * h > 0.5
}

pub fn build_lshape(n_per_side: usize) -> Result<LShapeGrid> {
    if n_per_side < 4 {
        return Err(Error::InvalidParameter(format!(
            "n_per_side must be at least 4, got {n_per_side}"
        )));
    }
    let n = n_per_side;
    let h = 1.0 / (n - 1) as f64;
    let is_interior = |i: usize, j: usize| i > 0 && j > 0 && i < n - 1 && j < n - 1 && !removed(i, j, h);
    let mut kinds = vec![NodeKind::Unused; n * n];
    let mut interior = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if is_interior(i, j) {
                kinds[j * n + i] = NodeKind::Interior(interior.len());
                interior.push((i, j));
            }
        }
    }
    let mut boundary = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if is_interior(i, j) {
                continue;
            }
            let touches = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|(di, dj)| {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n && is_interior(a as usize, b as usize)
            });
            if touches {
                kinds[j * n + i] = NodeKind::Boundary(boundary.len());
                boundary.push((i, j));
            }
        }
    }
    Ok(LShapeGrid {
        n_per_side,
        h,
        kinds,
        interior,
        boundary,
    })
}

impl LShapeGrid {
    pub fn n_per_side(&self) -> usize {
        self.n_per_side
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kind(&self, i: usize, j: usize) -> NodeKind {
        self.kinds[j * self.n_per_side + i]
    }

    pub fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        match self.kind(i, j) {
            NodeKind::Interior(k) => Some(k),
            _ => None,
        }
    }

    pub fn boundary_index(&self, i: usize, j: usize) -> Option<usize> {
        match self.kind(i, j) {
            NodeKind::Boundary(k) => Some(k),
            _ => None,
        }
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn n_unused(&self) -> usize {
        self.kinds.iter().filter(|k| **k == NodeKind::Unused).count()
    }

    /// Lattice coordinates of interior unknown `k`.
    pub fn interior_node(&self, k: usize) -> (usize, usize) {
        self.interior[k]
    }

    pub fn boundary_node(&self, k: usize) -> (usize, usize) {
        self.boundary[k]
    }

    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.h, j as f64 * self.h)
    }
}

/// Assembled boundary control instance.
#[derive(Debug, Clone)]
pub struct BoundaryControl {
    grid: LShapeGrid,
    a: SparseMatrix,
    b: SparseMatrix,
    q: Vec<f64>,
    y_d: Vec<f64>,
}

/// Assembles `A` (SPD, `(4, −1, −1, −1, −1)/h²`), `B` and a Gaussian source.
///
/// The Laplacian is negated so that `A` is positive definite; the source is
/// sampled with a positive sign so the state rises above the boundary values
/// near the source centre.
pub fn assemble(grid: LShapeGrid, source_center: [f64; 2], source_width: f64) -> Result<BoundaryControl> {
    if !(source_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "source width must be positive, got {source_width}"
        )));
    }
    let n = grid.n_interior();
    let d = grid.n_boundary();
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let mut a = CooBuilder::with_capacity(n, n, 5 * n);
    let mut b = CooBuilder::new(n, d);
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        let (i, j) = grid.interior_node(k);
        a.push(k, k, 4.0 * inv_h2);
        for (ni, nj) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
            match grid.kind(ni, nj) {
                NodeKind::Interior(c) => a.push(k, c, -inv_h2),
                NodeKind::Boundary(c) => b.push(k, c, -inv_h2),
                NodeKind::Unused => unreachable!("interior node next to an unused node"),
            }
        }
        let (x, y) = grid.position(i, j);
        let r2 = (x - source_center[0]).powi(2) + (y - source_center[1]).powi(2);
        q.push((-r2 / (2.0 * source_width * source_width)).exp());
    }
    Ok(BoundaryControl {
        grid,
        a: a.build(),
        b: b.build(),
        q,
        y_d: vec![1.0; n],
    })
}

impl BoundaryControl {
    /// Default instance: centre (0.25, 0.25), width 0.1.
    pub fn new(n_per_side: usize) -> Result<Self> {
        assemble(build_lshape(n_per_side)?, [0.25, 0.25], 0.1)
    }

    pub fn grid(&self) -> &LShapeGrid {
        &self.grid
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn source(&self) -> &[f64] {
        &self.q
    }

    pub fn target(&self) -> &[f64] {
        &self.y_d
    }

    pub fn default_control(&self) -> Vec<f64> {
        vec![1.0; self.grid.n_boundary()]
    }

    /// Exact state `A⁻¹(q − Bu)`.
    pub fn solve_state(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.rhs(u);
        let sol = cg_solve(&self.a, &rhs, 1e-14, 20 * self.a.n_rows())?;
        Ok(sol.x)
    }

    /// `x,y,value` rows for interior nodes (state) and boundary nodes (control).
    pub fn export_csv(&self, y: &[f64], u: &[f64]) -> String {
        let mut s = String::from("x,y,value\n");
        for (k, v) in y.iter().enumerate() {
            let (i, j) = self.grid.interior_node(k);
            let (px, py) = self.grid.position(i, j);
            let _ = writeln!(s, "{px:?},{py:?},{v:?}");
        }
        for (k, v) in u.iter().enumerate() {
            let (i, j) = self.grid.boundary_node(k);
            let (px, py) = self.grid.position(i, j);
            let _ = writeln!(s, "{px:?},{py:?},{v:?}");
        }
        s
    }
}

impl PenaltyModel for BoundaryControl {
    fn state_dim(&self) -> usize {
        self.grid.n_interior()
    }
    fn control_dim(&self) -> usize {
        self.grid.n_boundary()
    }
    fn constraint_matrix(&self, _u: &[f64]) -> Cow<'_, SparseMatrix> {
        Cow::Borrowed(&self.a)
    }
    fn constraint_is_constant(&self) -> bool {
        true
    }
    fn jacobian_is_state_independent(&self) -> bool {
        true
    }
    /// `q − Bu`
    fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let bu = self.b.spmv(u).expect("control dimension");
        self.q.iter().zip(bu).map(|(q, b)| q - b).collect()
    }
    fn jacobian_apply(&self, _u: &[f64], _y: &[f64], du: &[f64], out: &mut [f64]) {
        self.b.spmv_into(du, out);
    }
    fn jacobian_transpose_apply(&self, _u: &[f64], _y: &[f64], w: &[f64], out: &mut [f64]) {
        self.b.spmv_transpose_into(w, out);
    }
    fn value(&self, _u: &[f64], y: &[f64]) -> f64 {
        0.5 * y.iter().zip(&self.y_d).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }
    fn grad_y(&self, _u: &[f64], y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.y_d).map(|(a, b)| a - b).collect()
    }
    fn hess_y_apply(&self, _u: &[f64], _y: &[f64], v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
    }
    fn quadratic_in_y(&self) -> bool {
        true
    }
    fn lipschitz_f(&self) -> f64 {
        1.0
    }
    fn second_order(&self, _u: &[f64], _y: &[f64], _w: &[f64]) -> Option<SecondOrder> {
        let (n, d) = (self.state_dim(), self.control_dim());
        Some(SecondOrder {
            h_uu: DMatrix::zeros(d, d),
            h_yu: DMatrix::zeros(n, d),
            r_uu: DMatrix::zeros(d, d),
            k_yu: DMatrix::zeros(n, d),
        })
    }
}
