//! The `γ_ε` family and the energies built on it.
//!
//! `γ_ε(y) = sqrt(ε² + |y|²)` is smooth for ε > 0 with gradient
//! `y / γ_ε(y)` and Hessian `(I − y yᵀ / γ_ε(y)²) / γ_ε(y)`, whose eigenvalues
//! are `1/γ_ε` (across `y`) and `ε²/γ_ε³` (along `y`), both at most `1/ε`.
//! At ε = 0 the subdifferential is the set-valued `Sgn`.

use libm::sqrt;

use crate::calculus::{gradient, laplacian};
use crate::field::{ScalarField, VectorField};
use crate::norms::{h_norm_sq, weighted_grad_norm_sq};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Epsilon(value))
        } else {
            Err(Error::InvalidParameter("ε must be finite and nonnegative"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_singular(self) -> bool {
        self.0 == 0.0
    }

    pub(crate) fn positive(self) -> Result<f64> {
        if self.0 > 0.0 {
            Ok(self.0)
        } else {
            Err(Error::SingularEpsilon)
        }
    }
}

#[inline]
fn norm_sq<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().map(|v| v * v).sum()
}

pub fn gamma<const N: usize>(eps: Epsilon, y: &[f64; N]) -> f64 {
    sqrt(eps.0 * eps.0 + norm_sq(y))
}

pub fn gamma_grad<const N: usize>(eps: Epsilon, y: &[f64; N]) -> Result<[f64; N]> {
    eps.positive()?;
    let g = gamma(eps, y);
    Ok(y.map(|v| v / g))
}

pub fn gamma_hess<const N: usize>(eps: Epsilon, y: &[f64; N]) -> Result<[[f64; N]; N]> {
    let e = eps.positive()?;
    let g2 = e * e + norm_sq(y);
    let g = sqrt(g2);
    let mut h = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            let id = if i == j { 1.0 } else { 0.0 };
            h[i][j] = (id - y[i] * y[j] / g2) / g;
        }
    }
    Ok(h)
}

/// Distance from `w_star` to the set `Sgn(y)`.
pub fn sgn_residual<const N: usize>(y: &[f64; N], w_star: &[f64; N]) -> f64 {
    let ny = sqrt(norm_sq(y));
    if ny > 0.0 {
        let d: f64 = y.iter().zip(w_star).map(|(a, b)| (b - a / ny) * (b - a / ny)).sum();
        sqrt(d)
    } else {
        (sqrt(norm_sq(w_star)) - 1.0).max(0.0)
    }
}

/// Weighted energy `Φ_ε(w) = ∫ α γ_ε(w)`.
pub fn phi(eps: Epsilon, alpha: &ScalarField, w: &VectorField) -> f64 {
    assert_eq!(alpha.grid(), w.grid(), "fields live on different grids");
    let grid = w.grid();
    let s: f64 = (0..grid.cell_count())
        .map(|j| alpha.values()[j] * gamma(eps, &w.at(j)))
        .sum();
    grid.cell_measure() * s
}

/// Data of the elliptic problem
/// `α° u − div(α ∇γ_ε(∇u) + β ∇u) = f°` with homogeneous Neumann data.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    alpha: ScalarField,
    beta: ScalarField,
    alpha_circ: ScalarField,
    f_circ: ScalarField,
}

impl CoefficientSet {
    pub fn new(
        alpha: ScalarField,
        beta: ScalarField,
        alpha_circ: ScalarField,
        f_circ: ScalarField,
    ) -> Result<Self> {
        alpha.same_grid(&beta)?;
        alpha.same_grid(&alpha_circ)?;
        alpha.same_grid(&f_circ)?;
        if alpha.min() < 0.0 {
            return Err(Error::InvalidCoefficient("α must be nonnegative"));
        }
        if beta.min() <= 0.0 {
            return Err(Error::InvalidCoefficient("β must have a positive infimum"));
        }
        if alpha_circ.min() <= 0.0 {
            return Err(Error::InvalidCoefficient("α° must have a positive infimum"));
        }
        Ok(CoefficientSet {
            alpha,
            beta,
            alpha_circ,
            f_circ,
        })
    }

    pub fn alpha(&self) -> &ScalarField {
        &self.alpha
    }

    pub fn beta(&self) -> &ScalarField {
        &self.beta
    }

    pub fn alpha_circ(&self) -> &ScalarField {
        &self.alpha_circ
    }

    pub fn f_circ(&self) -> &ScalarField {
        &self.f_circ
    }

    /// `δ* = inf β`.
    pub fn delta_star(&self) -> f64 {
        self.beta.min()
    }

    /// `δ₀ = inf α° ∧ inf β`.
    pub fn delta0(&self) -> f64 {
        self.alpha_circ.min().min(self.beta.min())
    }
}

/// `Υ(z) = Φ_ε(∇z) + ½∫β|∇z|² + ½∫α°z² − ∫f°z`.
pub fn upsilon(eps: Epsilon, coeffs: &CoefficientSet, z: &ScalarField) -> f64 {
    let g = gradient(z);
    let zero_order = 0.5 * coeffs.alpha_circ.mul(z).dot(z);
    phi(eps, &coeffs.alpha, &g) + 0.5 * weighted_grad_norm_sq(&coeffs.beta, z) + zero_order
        - coeffs.f_circ.dot(z)
}

/// `Υ_κ(z) = Υ(z) + (κ/2)|Δz|²_H`.
pub fn upsilon_kappa(kappa: f64, eps: Epsilon, coeffs: &CoefficientSet, z: &ScalarField) -> f64 {
    upsilon(eps, coeffs, z) + 0.5 * kappa * h_norm_sq(&laplacian(z))
}
