//! Probe fields for sampled constant estimates.

use alloc::vec::Vec;

use libm::{cos, exp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::ScalarField;
use crate::grid::Grid;

/// A fixed family of test fields: the constant, low cosine modes, boundary
/// layers of several widths on every wall, and `random` seeded fields (half
/// white noise, half random smooth sums of cosines). The family depends
/// only on the grid, `random` and `seed`.
pub fn probe_fields(grid: &Grid, random: usize, seed: u64) -> Vec<ScalarField> {
    let mut out = Vec::new();
    let pi = core::f64::consts::PI;
    let dim = grid.dim();
    let l = grid.extents().to_vec();
    let h = grid.spacing().to_vec();
    out.push(ScalarField::constant(*grid, 1.0));

    let max_mode = 4;
    let modes1 = if dim == 2 { max_mode } else { 0 };
    for k0 in 0..=max_mode {
        for k1 in 0..=modes1 {
            if k0 + k1 == 0 {
                continue;
            }
            let (a, b) = (k0 as f64 * pi / l[0], k1 as f64 * pi / l[dim - 1]);
            out.push(ScalarField::from_fn(*grid, |x| cos(a * x[0]) * if dim == 2 { cos(b * x[1]) } else { 1.0 }).unwrap());
        }
    }

    for axis in 0..dim {
        for width in [h[axis], 2.0 * h[axis], 4.0 * h[axis], l[axis] / 8.0, l[axis] / 4.0] {
            let la = l[axis];
            out.push(ScalarField::from_fn(*grid, |x| exp(-x[axis] / width)).unwrap());
            out.push(ScalarField::from_fn(*grid, |x| exp(-(la - x[axis]) / width)).unwrap());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.cell_count();
    for s in 0..random {
        let values: Vec<f64> = if s % 2 == 0 {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        } else {
            let terms: Vec<(f64, f64, f64)> = (0..6)
                .map(|_| {
                    let k0 = rng.gen_range(0..8) as f64;
                    let k1 = if dim == 2 { rng.gen_range(0..8) as f64 } else { 0.0 };
                    (k0, k1, rng.gen_range(-1.0..1.0) / (1.0 + k0 + k1))
                })
                .collect();
            (0..n)
                .map(|j| {
                    let x = grid.center(j);
                    terms
                        .iter()
                        .map(|&(k0, k1, c)| {
                            let y = if dim == 2 { cos(k1 * pi * x[1] / l[1]) } else { 1.0 };
                            c * cos(k0 * pi * x[0] / l[0]) * y
                        })
                        .sum()
                })
                .collect()
        };
        if values.iter().any(|v| *v != 0.0) {
            out.push(ScalarField::new(*grid, values).unwrap());
        }
    }
    out
}
