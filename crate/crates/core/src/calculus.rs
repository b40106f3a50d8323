//! Forward-difference gradient with mirror ghost cells and its exact
//! negative adjoint.
//!
//! `(∇u)_k[j] = (u[j + e_k] − u[j]) / h_k`, and zero on the last layer of
//! axis `k`. The divergence is defined as `−∇ᵀ` under the unweighted
//! Euclidean pairing, so `(div w, u)_H + (w, ∇u)_{[H]^N} = 0` holds for every
//! pair of fields up to rounding.

use alloc::vec;

use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

pub(crate) fn grad_raw(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let n = grid.cell_count();
    for k in 0..grid.dim() {
        let s = grid.stride(k);
        let last = grid.counts()[k] - 1;
        let inv_h = 1.0 / grid.spacing()[k];
        let comp = &mut out[k * n..(k + 1) * n];
        for j in 0..n {
            comp[j] = if grid.axis_index(j, k) < last {
                (u[j + s] - u[j]) * inv_h
            } else {
                0.0
            };
        }
    }
}

pub(crate) fn div_raw(grid: &Grid, w: &[f64], out: &mut [f64]) {
    let n = grid.cell_count();
    out[..n].iter_mut().for_each(|v| *v = 0.0);
    for k in 0..grid.dim() {
        let s = grid.stride(k);
        let last = grid.counts()[k] - 1;
        let inv_h = 1.0 / grid.spacing()[k];
        let comp = &w[k * n..(k + 1) * n];
        for j in 0..n {
            let idx = grid.axis_index(j, k);
            let here = if idx < last { comp[j] } else { 0.0 };
            let before = if idx > 0 { comp[j - s] } else { 0.0 };
            out[j] += (here - before) * inv_h;
        }
    }
}

pub(crate) fn laplacian_raw(grid: &Grid, u: &[f64], scratch: &mut [f64], out: &mut [f64]) {
    grad_raw(grid, u, scratch);
    div_raw(grid, scratch, out);
}

pub fn gradient(u: &ScalarField) -> VectorField {
    let grid = *u.grid();
    let mut data = vec![0.0; grid.cell_count() * grid.dim()];
    grad_raw(&grid, u.values(), &mut data);
    VectorField::from_raw(grid, data)
}

pub fn divergence(w: &VectorField) -> ScalarField {
    let grid = *w.grid();
    let mut out = vec![0.0; grid.cell_count()];
    div_raw(&grid, w.data(), &mut out);
    ScalarField::from_raw(grid, out)
}

/// `Δu = div ∇u`; the Neumann operator `A_N` is its negation.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    divergence(&gradient(u))
}

/// Sum of squares of all composed second differences at each cell:
/// `Σ_k (D_kk u)² + 2 Σ_{k<l} (D_l D_k u)²`, where `D_kk` is the backward
/// difference of the forward difference and the mixed terms are
/// forward–forward (they are symmetric in `k, l`).
pub(crate) fn hessian_sq_raw(grid: &Grid, u: &[f64]) -> f64 {
    let n = grid.cell_count();
    let dim = grid.dim();
    let mut g = vec![0.0; n * dim];
    grad_raw(grid, u, &mut g);
    let mut total = 0.0;
    for k in 0..dim {
        let s = grid.stride(k);
        let last = grid.counts()[k] - 1;
        let inv_h = 1.0 / grid.spacing()[k];
        let comp = &g[k * n..(k + 1) * n];
        for j in 0..n {
            let idx = grid.axis_index(j, k);
            let here = if idx < last { comp[j] } else { 0.0 };
            let before = if idx > 0 { comp[j - s] } else { 0.0 };
            let d = (here - before) * inv_h;
            total += d * d;
        }
    }
    if dim == 2 {
        let s1 = grid.stride(1);
        let last1 = grid.counts()[1] - 1;
        let inv_h1 = 1.0 / grid.spacing()[1];
        let g0 = &g[..n];
        for j in 0..n {
            if grid.axis_index(j, 1) < last1 {
                let d = (g0[j + s1] - g0[j]) * inv_h1;
                total += 2.0 * d * d;
            }
        }
    }
    total
}
