use super::SparseMatrix;
use nalgebra::DMatrix;

/// An abstract linear map `x ↦ Ox` together with its adjoint.
///
/// Implementations must satisfy `⟨Ox, w⟩ = ⟨x, Oᵀw⟩`.
pub trait LinearOperator {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out()];
        self.apply(x, &mut out);
        out
    }

    fn apply_transpose_vec(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_in()];
        self.apply_transpose(w, &mut out);
        out
    }
}

impl LinearOperator for SparseMatrix {
    fn dim_in(&self) -> usize {
        self.n_cols()
    }
    fn dim_out(&self) -> usize {
        self.n_rows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.spmv_into(x, out)
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        self.spmv_transpose_into(w, out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }
    fn dim_out(&self) -> usize {
        (**self).dim_out()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply(x, out)
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        (**self).apply_transpose(w, out)
    }
}

/// Operator backed by a pair of closures.
pub struct FnOperator<F, Ft> {
    dim_in: usize,
    dim_out: usize,
    forward: F,
    adjoint: Ft,
}

impl<F, Ft> FnOperator<F, Ft>
where
    F: Fn(&[f64], &mut [f64]),
    Ft: Fn(&[f64], &mut [f64]),
{
    pub fn new(dim_in: usize, dim_out: usize, forward: F, adjoint: Ft) -> Self {
        Self {
            dim_in,
            dim_out,
            forward,
            adjoint,
        }
    }
}

impl<F, Ft> LinearOperator for FnOperator<F, Ft>
where
    F: Fn(&[f64], &mut [f64]),
    Ft: Fn(&[f64], &mut [f64]),
{
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.forward)(x, out)
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        (self.adjoint)(w, out)
    }
}

/// Symmetric operator `shift·D + scale·OᵀO`, with `D` an optional symmetric part.
///
/// Used for the inner normal equations `∇²f + λAᵀA` without forming `AᵀA`.
pub struct NormalOperator<'a, O: LinearOperator + ?Sized, S: Fn(&[f64], &mut [f64])> {
    op: &'a O,
    scale: f64,
    symmetric_part: Option<S>,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<'a, O: LinearOperator + ?Sized> NormalOperator<'a, O, fn(&[f64], &mut [f64])> {
    pub fn new(op: &'a O, scale: f64) -> Self {
        Self {
            op,
            scale,
            symmetric_part: None,
            scratch: std::cell::RefCell::new(vec![0.0; op.dim_out()]),
        }
    }
}

impl<'a, O: LinearOperator + ?Sized, S: Fn(&[f64], &mut [f64])> NormalOperator<'a, O, S> {
    pub fn with_symmetric_part(op: &'a O, scale: f64, part: S) -> Self {
        Self {
            op,
            scale,
            symmetric_part: Some(part),
            scratch: std::cell::RefCell::new(vec![0.0; op.dim_out()]),
        }
    }
}

impl<O: LinearOperator + ?Sized, S: Fn(&[f64], &mut [f64])> LinearOperator
    for NormalOperator<'_, O, S>
{
    fn dim_in(&self) -> usize {
        self.op.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.op.dim_in()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = self.scratch.borrow_mut();
        self.op.apply(x, &mut tmp);
        self.op.apply_transpose(&tmp, out);
        if self.scale != 1.0 {
            out.iter_mut().for_each(|v| *v *= self.scale);
        }
        if let Some(part) = &self.symmetric_part {
            let mut extra = vec![0.0; out.len()];
            part(x, &mut extra);
            out.iter_mut().zip(&extra).for_each(|(o, e)| *o += e);
        }
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        self.apply(w, out)
    }
}

/// Dense matrix as an operator.
pub struct DenseOperator<'a>(pub &'a DMatrix<f64>);

impl LinearOperator for DenseOperator<'_> {
    fn dim_in(&self) -> usize {
        self.0.ncols()
    }
    fn dim_out(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.0;
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..m.ncols()).map(|c| m[(r, c)] * x[c]).sum();
        }
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        let m = self.0;
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..m.nrows()).map(|r| m[(r, c)] * w[r]).sum();
        }
    }
}
