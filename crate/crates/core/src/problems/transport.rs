//! Mass transport under the continuity equation `y_t + ∇·(yu) = 0`,
//! discretized with an implicit Lax–Friedrichs scheme on a periodic grid.
//!
//! The state stacks `nt` density snapshots of `nx²` cells; the control holds
//! two velocity components per cell per step, laid out as
//! `u[k·2nx² + comp·nx² + cell]`.

use crate::error::{Error, Result};
use crate::linalg::{CooBuilder, SparseMatrix};
use crate::penalty::{PenaltyModel, SecondOrder};
use nalgebra::DMatrix;
use std::borrow::Cow;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportGrid {
    pub nx: usize,
    pub nt: usize,
    pub dt: f64,
    pub dx: f64,
}

impl TransportGrid {
    pub fn new(nx: usize, nt: usize, dt: f64) -> Result<Self> {
        if nx < 4 || nt < 1 || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transport grid needs nx >= 4, nt >= 1, dt > 0 (got {nx}, {nt}, {dt})"
            )));
        }
        Ok(Self {
            nx,
            nt,
            dt,
            dx: 1.0 / nx as f64,
        })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.nx
    }

    pub fn state_dim(&self) -> usize {
        self.nt * self.cells()
    }

    pub fn control_dim(&self) -> usize {
        2 * self.nt * self.cells()
    }

    fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell centre of cell index `c`.
    pub fn centre(&self, c: usize) -> (f64, f64) {
        let (i, j) = (c % self.nx, c / self.nx);
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dx)
    }

    /// `dt·max|u|/dx`; the implicit scheme has no hard bound, the value is informative.
    pub fn cfl(&self, u: &[f64]) -> f64 {
        self.dt * u.iter().fold(0.0f64, |m, v| m.max(v.abs())) / self.dx
    }
}

/// Isotropic Gaussian bump on the cell centres with unit discrete mass `Σy·dx² = 1`.
pub fn gaussian_density(grid: &TransportGrid, centre: [f64; 2], width: f64) -> Vec<f64> {
    let mut y: Vec<f64> = (0..grid.cells())
        .map(|c| {
            let (x, z) = grid.centre(c);
            (-((x - centre[0]).powi(2) + (z - centre[1]).powi(2)) / (2.0 * width * width)).exp()
        })
        .collect();
    let mass: f64 = y.iter().sum::<f64>() * grid.dx * grid.dx;
    y.iter_mut().for_each(|v| *v /= mass);
    y
}

#[derive(Debug, Clone)]
pub struct Transport {
    grid: TransportGrid,
    alpha: f64,
    y0: Vec<f64>,
    y_t: Vec<f64>,
    m: SparseMatrix,
    dx_op: SparseMatrix,
    dy_op: SparseMatrix,
}

fn mass(grid: &TransportGrid, y: &[f64]) -> f64 {
    y.iter().sum::<f64>() * grid.dx * grid.dx
}

pub fn build_transport(
    nx: usize,
    nt: usize,
    dt: f64,
    alpha: f64,
    y0: Vec<f64>,
    y_t: Vec<f64>,
) -> Result<Transport> {
    let grid = TransportGrid::new(nx, nt, dt)?;
    let cells = grid.cells();
    if y0.len() != cells {
        return Err(Error::dim("initial density", cells, y0.len()));
    }
    if y_t.len() != cells {
        return Err(Error::dim("target density", cells, y_t.len()));
    }
    if y0.iter().chain(&y_t).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("densities must be nonnegative".into()));
    }
    let (m0, m1) = (mass(&grid, &y0), mass(&grid, &y_t));
    if (m0 - m1).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial and target mass differ: {m0} vs {m1}"
        )));
    }
    let wrap = |i: usize, s: i64| ((i as i64 + s).rem_euclid(nx as i64)) as usize;
    let mut m = CooBuilder::with_capacity(cells, cells, 4 * cells);
    let mut dx_op = CooBuilder::with_capacity(cells, cells, 2 * cells);
    let mut dy_op = CooBuilder::with_capacity(cells, cells, 2 * cells);
    let half = 0.5 / grid.dx;
    for j in 0..nx {
        for i in 0..nx {
            let c = grid.cell(i, j);
            let (e, w) = (grid.cell(wrap(i, 1), j), grid.cell(wrap(i, -1), j));
            let (n, s) = (grid.cell(i, wrap(j, 1)), grid.cell(i, wrap(j, -1)));
            for nb in [e, w, n, s] {
                m.push(c, nb, 0.25);
            }
            dx_op.push(c, e, half);
            dx_op.push(c, w, -half);
            dy_op.push(c, n, half);
            dy_op.push(c, s, -half);
        }
    }
    Ok(Transport {
        grid,
        alpha,
        y0,
        y_t,
        m: m.build(),
        dx_op: dx_op.build(),
        dy_op: dy_op.build(),
    })
}

impl Transport {
    /// Default instance: `nx = 16`, `nt = 8`, horizon 1, `α = 0.1`, bumps of
    /// width 0.1 moving from (0.3, 0.3) to (0.7, 0.7).
    pub fn default_instance() -> Result<Self> {
        Self::with_size(16, 8, 1.0, 0.1)
    }

    pub fn with_size(nx: usize, nt: usize, horizon: f64, alpha: f64) -> Result<Self> {
        let grid = TransportGrid::new(nx, nt, horizon / nt as f64)?;
        let y0 = gaussian_density(&grid, [0.3, 0.3], 0.1);
        let y_t = gaussian_density(&grid, [0.7, 0.7], 0.1);
        build_transport(nx, nt, grid.dt, alpha, y0, y_t)
    }

    pub fn grid(&self) -> &TransportGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn averaging(&self) -> &SparseMatrix {
        &self.m
    }

    pub fn initial_density(&self) -> &[f64] {
        &self.y0
    }

    pub fn target_density(&self) -> &[f64] {
        &self.y_t
    }

    fn block<'a>(&self, v: &'a [f64], k: usize) -> &'a [f64] {
        let c = self.grid.cells();
        &v[k * c..(k + 1) * c]
    }

    fn velocity<'a>(&self, u: &'a [f64], k: usize, comp: usize) -> &'a [f64] {
        let c = self.grid.cells();
        let base = k * 2 * c + comp * c;
        &u[base..base + c]
    }

    /// `B(u^k)` as a matrix: `Dx diag(u₁) + Dy diag(u₂)`.
    pub fn divergence_matrix(&self, u1: &[f64], u2: &[f64]) -> SparseMatrix {
        let c = self.grid.cells();
        let mut b = CooBuilder::with_capacity(c, c, 4 * c);
        for (op, vel) in [(&self.dx_op, u1), (&self.dy_op, u2)] {
            for r in 0..c {
                for (col, v) in op.row(r) {
                    b.push(r, col, v * vel[col]);
                }
            }
        }
        b.build()
    }

    /// `B(u)y`, centred differences of `∂x(y u₁) + ∂y(y u₂)`.
    pub fn divergence(&self, u1: &[f64], u2: &[f64], y: &[f64]) -> Vec<f64> {
        let f1: Vec<f64> = y.iter().zip(u1).map(|(a, b)| a * b).collect();
        let f2: Vec<f64> = y.iter().zip(u2).map(|(a, b)| a * b).collect();
        let mut out = self.dx_op.spmv(&f1).expect("cells");
        self.dy_op
            .spmv(&f2)
            .expect("cells")
            .iter()
            .zip(out.iter_mut())
            .for_each(|(a, o)| *o += a);
        out
    }

    /// `|u^k|²` per cell.
    fn speed_sq(&self, u: &[f64], k: usize) -> Vec<f64> {
        let (a, b) = (self.velocity(u, k, 0), self.velocity(u, k, 1));
        a.iter().zip(b).map(|(x, y)| x * x + y * y).collect()
    }

    /// `L(u ⊙ u)`: block `k` holds `|u^k|² + |u^{k+1}|²`.
    fn l_speed(&self, u: &[f64]) -> Vec<f64> {
        let nt = self.grid.nt;
        let sq: Vec<Vec<f64>> = (0..nt).map(|k| self.speed_sq(u, k)).collect();
        let mut out = Vec::with_capacity(self.grid.state_dim());
        for k in 0..nt {
            match sq.get(k + 1) {
                Some(next) => out.extend(sq[k].iter().zip(next).map(|(a, b)| a + b)),
                None => out.extend_from_slice(&sq[k]),
            }
        }
        out
    }

    /// `Lᵀy` restricted to one velocity block: `y^k + y^{k−1}`.
    fn lt_y(&self, y: &[f64], k: usize) -> Vec<f64> {
        let cur = self.block(y, k);
        if k == 0 {
            return cur.to_vec();
        }
        let prev = self.block(y, k - 1);
        cur.iter().zip(prev).map(|(a, b)| a + b).collect()
    }

    /// `½‖Py − y_T‖² + (α²/2)yᵀL diag(u)u + (λ/2)‖A(u)y − q‖²`.
    pub fn transport_objective(&self, u: &[f64], y: &[f64], lambda: f64) -> f64 {
        let a = self.constraint_matrix(u);
        let mut r = a.spmv(y).expect("state dimension");
        for (ri, qi) in r.iter_mut().zip(self.rhs(u)) {
            *ri -= qi;
        }
        self.value(u, y) + 0.5 * lambda * r.iter().map(|v| v * v).sum::<f64>()
    }

    /// Time average of each velocity component, per cell.
    pub fn time_averaged_flow(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        time_averaged_flow(u, &self.grid)
    }

    /// Solves `A(u)y = q` by block forward substitution.
    pub fn simulate(&self, u: &[f64]) -> Result<Vec<f64>> {
        let c = self.grid.cells();
        let mut y = Vec::with_capacity(self.grid.state_dim());
        let mut rhs = self.y0.clone();
        for k in 0..self.grid.nt {
            let mut blk = self.divergence_matrix(self.velocity(u, k, 0), self.velocity(u, k, 1));
            blk = add_scaled_identity(&blk, self.grid.dt);
            let yk = crate::penalty::solve_constraint(&blk, &rhs)?;
            rhs = self.m.spmv(&yk)?;
            y.extend_from_slice(&yk);
            debug_assert_eq!(y.len(), (k + 1) * c);
        }
        Ok(y)
    }

    /// `t,x,y,value` rows for every stored snapshot (`t = (k+1)·dt`), preceded by `t = 0`.
    pub fn density_csv(&self, y: &[f64]) -> String {
        let mut s = String::from("t,x,y,value\n");
        let mut emit = |t: f64, blk: &[f64]| {
            for (c, v) in blk.iter().enumerate() {
                let (x, z) = self.grid.centre(c);
                let _ = writeln!(s, "{t:?},{x:?},{z:?},{v:?}");
            }
        };
        emit(0.0, &self.y0);
        for k in 0..self.grid.nt {
            emit((k + 1) as f64 * self.grid.dt, self.block(y, k));
        }
        s
    }

    /// `x,y,ux,uy` rows of the time-averaged flow.
    pub fn flow_csv(&self, u: &[f64]) -> Result<String> {
        let (a, b) = self.time_averaged_flow(u)?;
        let mut s = String::from("x,y,ux,uy\n");
        for c in 0..self.grid.cells() {
            let (x, z) = self.grid.centre(c);
            let _ = writeln!(s, "{x:?},{z:?},{:?},{:?}", a[c], b[c]);
        }
        Ok(s)
    }
}

/// `s·M + I` for square `M`.
fn add_scaled_identity(m: &SparseMatrix, s: f64) -> SparseMatrix {
    let n = m.n_rows();
    let mut b = CooBuilder::with_capacity(n, n, m.nnz() + n);
    for r in 0..n {
        b.push(r, r, 1.0);
        for (c, v) in m.row(r) {
            b.push(r, c, s * v);
        }
    }
    b.build()
}

pub fn time_averaged_flow(u: &[f64], grid: &TransportGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != grid.control_dim() {
        return Err(Error::dim("flow field", grid.control_dim(), u.len()));
    }
    let c = grid.cells();
    let mut a = vec![0.0; c];
    let mut b = vec![0.0; c];
    for k in 0..grid.nt {
        let base = k * 2 * c;
        for i in 0..c {
            a[i] += u[base + i];
            b[i] += u[base + c + i];
        }
    }
    let inv = 1.0 / grid.nt as f64;
    a.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= inv);
    Ok((a, b))
}

impl PenaltyModel for Transport {
    fn state_dim(&self) -> usize {
        self.grid.state_dim()
    }
    fn control_dim(&self) -> usize {
        self.grid.control_dim()
    }
    fn constraint_matrix(&self, u: &[f64]) -> Cow<'_, SparseMatrix> {
        let c = self.grid.cells();
        let n = self.grid.state_dim();
        let mut a = CooBuilder::with_capacity(n, n, 9 * n);
        for k in 0..self.grid.nt {
            let off = k * c;
            let b = self.divergence_matrix(self.velocity(u, k, 0), self.velocity(u, k, 1));
            for r in 0..c {
                a.push(off + r, off + r, 1.0);
                for (col, v) in b.row(r) {
                    a.push(off + r, off + col, self.grid.dt * v);
                }
                if k > 0 {
                    for (col, v) in self.m.row(r) {
                        a.push(off + r, off - c + col, -v);
                    }
                }
            }
        }
        Cow::Owned(a.build())
    }
    fn rhs(&self, _u: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.grid.state_dim()];
        q[..self.grid.cells()].copy_from_slice(&self.y0);
        q
    }
    fn jacobian_apply(&self, _u: &[f64], y: &[f64], du: &[f64], out: &mut [f64]) {
        let c = self.grid.cells();
        for k in 0..self.grid.nt {
            let d = self.divergence(self.velocity(du, k, 0), self.velocity(du, k, 1), self.block(y, k));
            for (o, v) in out[k * c..(k + 1) * c].iter_mut().zip(d) {
                *o = self.grid.dt * v;
            }
        }
    }
    fn jacobian_transpose_apply(&self, _u: &[f64], y: &[f64], w: &[f64], out: &mut [f64]) {
        let c = self.grid.cells();
        for k in 0..self.grid.nt {
            let wk = self.block(w, k);
            let yk = self.block(y, k);
            for (comp, op) in [(0, &self.dx_op), (1, &self.dy_op)] {
                let t = op.spmv_transpose(wk).expect("cells");
                let base = k * 2 * c + comp * c;
                for i in 0..c {
                    out[base + i] = self.grid.dt * yk[i] * t[i];
                }
            }
        }
    }
    fn value(&self, u: &[f64], y: &[f64]) -> f64 {
        let last = self.block(y, self.grid.nt - 1);
        let fit: f64 = last.iter().zip(&self.y_t).map(|(a, b)| (a - b) * (a - b)).sum();
        let reg: f64 = y.iter().zip(self.l_speed(u)).map(|(a, b)| a * b).sum();
        0.5 * fit + 0.5 * self.alpha * self.alpha * reg
    }
    fn grad_y(&self, u: &[f64], y: &[f64]) -> Vec<f64> {
        let a2 = self.alpha * self.alpha;
        let mut g: Vec<f64> = self.l_speed(u).into_iter().map(|v| 0.5 * a2 * v).collect();
        let c = self.grid.cells();
        let off = (self.grid.nt - 1) * c;
        for i in 0..c {
            g[off + i] += y[off + i] - self.y_t[i];
        }
        g
    }
    fn grad_u(&self, u: &[f64], y: &[f64]) -> Vec<f64> {
        let a2 = self.alpha * self.alpha;
        let c = self.grid.cells();
        let mut g = vec![0.0; self.control_dim()];
        for k in 0..self.grid.nt {
            let lt = self.lt_y(y, k);
            for comp in 0..2 {
                let base = k * 2 * c + comp * c;
                for i in 0..c {
                    g[base + i] = a2 * u[base + i] * lt[i];
                }
            }
        }
        g
    }
    fn hess_y_apply(&self, _u: &[f64], _y: &[f64], v: &[f64], out: &mut [f64]) {
        let c = self.grid.cells();
        let off = (self.grid.nt - 1) * c;
        out[..off].fill(0.0);
        out[off..].copy_from_slice(&v[off..]);
    }
    fn quadratic_in_y(&self) -> bool {
        true
    }
    fn lipschitz_f(&self) -> f64 {
        1.0
    }
    fn second_order(&self, u: &[f64], y: &[f64], w: &[f64]) -> Option<SecondOrder> {
        let (n, d) = (self.state_dim(), self.control_dim());
        let c = self.grid.cells();
        let nt = self.grid.nt;
        let a2 = self.alpha * self.alpha;
        let mut h_uu = DMatrix::zeros(d, d);
        let mut h_yu = DMatrix::zeros(n, d);
        let mut k_yu = DMatrix::zeros(n, d);
        for k in 0..nt {
            let lt = self.lt_y(y, k);
            let wk = self.block(w, k);
            for (comp, op) in [(0, &self.dx_op), (1, &self.dy_op)] {
                let base = k * 2 * c + comp * c;
                let dtw = op.spmv_transpose(wk).expect("cells");
                for i in 0..c {
                    h_uu[(base + i, base + i)] = a2 * lt[i];
                    // ∂/∂u^k of (α²/2)L(u⊙u) touches y-blocks k and k−1.
                    h_yu[(k * c + i, base + i)] = a2 * u[base + i];
                    if k > 0 {
                        h_yu[((k - 1) * c + i, base + i)] = a2 * u[base + i];
                    }
                    k_yu[(k * c + i, base + i)] = self.grid.dt * dtw[i];
                }
            }
        }
        Some(SecondOrder {
            h_uu,
            h_yu,
            r_uu: DMatrix::zeros(d, d),
            k_yu,
        })
    }
}
