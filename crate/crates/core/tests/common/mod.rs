#![allow(dead_code)]

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvflow_core::{Grid, ScalarField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    let v = (0..grid.cell_count()).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField::new(grid, v).unwrap()
}

/// Dense forward-difference gradient, one row per (axis, cell), written
/// directly from the stencil.
pub fn dense_gradient(grid: &Grid) -> DMatrix<f64> {
    let n = grid.cell_count();
    let dim = grid.dim();
    let counts = grid.counts();
    let h = grid.spacing();
    let mut g = DMatrix::zeros(dim * n, n);
    for j in 0..n {
        let (i0, i1) = (j % counts[0], j / counts[0]);
        if i0 + 1 < counts[0] {
            g[(j, j)] = -1.0 / h[0];
            g[(j, j + 1)] = 1.0 / h[0];
        }
        if dim == 2 && i1 + 1 < counts[1] {
            g[(n + j, j)] = -1.0 / h[1];
            g[(n + j, j + counts[0])] = 1.0 / h[1];
        }
    }
    g
}

/// `diag(a) + Gᵀ diag(b, …, b) G` in the Euclidean pairing.
pub fn dense_operator(grid: &Grid, a: &[f64], b: &[f64]) -> DMatrix<f64> {
    let n = grid.cell_count();
    let g = dense_gradient(grid);
    let mut d = DVector::zeros(grid.dim() * n);
    for k in 0..grid.dim() {
        for j in 0..n {
            d[k * n + j] = b[j];
        }
    }
    let mut m = g.transpose() * DMatrix::from_diagonal(&d) * &g;
    for j in 0..n {
        m[(j, j)] += a[j];
    }
    m
}

/// Discrete V-norm from first principles.
pub fn v_norm_dense(grid: &Grid, u: &[f64]) -> f64 {
    let g = dense_gradient(grid);
    let x = DVector::from_column_slice(u);
    let gu = &g * &x;
    (grid.cell_measure() * (x.norm_squared() + gu.norm_squared())).sqrt()
}

struct Objective<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

/// Derivative-free minimisation from an axis-aligned simplex around `x0`.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).unwrap();
    let res = Executor::new(Objective(f), solver)
        .configure(|s| s.max_iters(iters as u64))
        .run()
        .unwrap();
    res.state().get_best_param().unwrap().clone()
}
