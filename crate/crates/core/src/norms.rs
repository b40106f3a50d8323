//! Discrete norms: `|·|_H`, `|·|_V`, `|·|_{[H]^N}`, the composed
//! second-difference (H²) norm, and the boundary `L²(Γ)` trace norm.

use libm::sqrt;

use crate::calculus::{gradient, hessian_sq_raw, laplacian};
use crate::field::{ScalarField, VectorField};

pub fn h_norm_sq(u: &ScalarField) -> f64 {
    u.dot(u)
}

pub fn h_norm(u: &ScalarField) -> f64 {
    sqrt(h_norm_sq(u))
}

pub fn vector_norm_sq(w: &VectorField) -> f64 {
    w.dot(w)
}

pub fn vector_norm(w: &VectorField) -> f64 {
    sqrt(vector_norm_sq(w))
}

pub fn grad_norm_sq(u: &ScalarField) -> f64 {
    vector_norm_sq(&gradient(u))
}

/// `|u|²_V = |u|²_H + |∇u|²`.
pub fn v_norm_sq(u: &ScalarField) -> f64 {
    h_norm_sq(u) + grad_norm_sq(u)
}

pub fn v_norm(u: &ScalarField) -> f64 {
    sqrt(v_norm_sq(u))
}

/// `|√β ∇u|²_{[H]^N} = ∫ β |∇u|²`.
pub fn weighted_grad_norm_sq(beta: &ScalarField, u: &ScalarField) -> f64 {
    let g = gradient(u);
    let grid = u.grid();
    let n = grid.cell_count();
    let mut s = 0.0;
    for j in 0..n {
        let y = g.at(j);
        s += beta.values()[j] * (y[0] * y[0] + y[1] * y[1]);
    }
    grid.cell_measure() * s
}

/// `∫ β |Δu|²`.
pub fn weighted_laplacian_sq(beta: &ScalarField, u: &ScalarField) -> f64 {
    let l = laplacian(u);
    let s: f64 = beta.values().iter().zip(l.values()).map(|(b, v)| b * v * v).sum();
    u.grid().cell_measure() * s
}

/// Discrete H² seminorm squared, `|∇²u|²`.
pub fn h2_seminorm_sq(u: &ScalarField) -> f64 {
    u.grid().cell_measure() * hessian_sq_raw(u.grid(), u.values())
}

/// Full discrete H² norm squared, `|u|²_H + |∇u|² + |∇²u|²`.
pub fn h2_norm_sq(u: &ScalarField) -> f64 {
    v_norm_sq(u) + h2_seminorm_sq(u)
}

/// `|u|²_{L²(Γ)}` from boundary cell values weighted by face measure.
pub fn boundary_norm_sq(u: &ScalarField) -> f64 {
    u.grid()
        .boundary_faces()
        .iter()
        .map(|&(j, m)| m * u.values()[j] * u.values()[j])
        .sum()
}

pub fn l1_norm(u: &ScalarField) -> f64 {
    u.grid().cell_measure() * u.values().iter().map(|v| v.abs()).sum::<f64>()
}

pub fn linf_norm(u: &ScalarField) -> f64 {
    u.values().iter().fold(0.0, |m, v| v.abs().max(m))
}

/// `max_j |∇u(j)|` over cells.
pub fn grad_linf(u: &ScalarField) -> f64 {
    let g = gradient(u);
    (0..u.len()).fold(0.0, |m, j| {
        let y = g.at(j);
        sqrt(y[0] * y[0] + y[1] * y[1]).max(m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Grid;
    use alloc::vec;

    #[test]
    fn examples() {
        let g = Grid::new_1d(2, 1.0).unwrap();
        assert!((h_norm(&ScalarField::constant(g, 1.0)) - 1.0).abs() < 1e-15);

        let g = Grid::new_1d(3, 3.0).unwrap();
        let u = ScalarField::new(g, vec![0.0, 1.0, 2.0]).unwrap();
        assert!((grad_norm_sq(&u) - 2.0).abs() < 1e-15);
        assert!((v_norm_sq(&u) - 7.0).abs() < 1e-14);
        assert!((h2_seminorm_sq(&u) - 2.0).abs() < 1e-14);
        assert!((boundary_norm_sq(&u) - 4.0).abs() < 1e-15);

        let z = ScalarField::zeros(Grid::new_2d(3, 3, 1.0, 1.0).unwrap());
        assert_eq!(h2_norm_sq(&z), 0.0);
        assert_eq!(boundary_norm_sq(&z), 0.0);
    }

    #[test]
    fn constant_trace_matches_boundary_measure() {
        let g = Grid::new_2d(5, 4, 2.0, 1.0).unwrap();
        let u = ScalarField::constant(g, 1.0);
        assert!((boundary_norm_sq(&u) - 6.0).abs() < 1e-12);
    }
}
