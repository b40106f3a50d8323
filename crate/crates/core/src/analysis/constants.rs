//! Embedding and trace constants, and the closed-form estimate constants.

use libm::exp;

use super::sampling::probe_fields;
use crate::calculus::laplacian;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::norms::{boundary_norm_sq, grad_linf, grad_norm_sq, h2_norm_sq, h_norm_sq, linf_norm, v_norm_sq};

/// Largest observed `|z|²_{H²} / (|z|²_H + |Δz|²_H)` over the probe family:
/// a sampled lower estimate of the embedding constant `C₀`.
pub fn estimate_c0(grid: &Grid, random: usize, seed: u64) -> f64 {
    probe_fields(grid, random, seed)
        .iter()
        .map(|z| h2_norm_sq(z) / (h_norm_sq(z) + h_norm_sq(&laplacian(z))))
        .fold(1.0, f64::max)
}

/// Smallest `Ĉ_r ≥ 0` with `|v|²_{L²(Γ)} ≤ r|∇v|² + Ĉ_r |v|²_H` on the probe
/// family. The family does not depend on `r`, so the estimate is
/// nonincreasing in `r`.
pub fn trace_inequality_check(grid: &Grid, r: f64, samples: usize, seed: u64) -> f64 {
    probe_fields(grid, samples, seed)
        .iter()
        .filter(|v| h_norm_sq(v) > 0.0)
        .map(|v| (boundary_norm_sq(v) - r * grad_norm_sq(v)) / h_norm_sq(v))
        .fold(0.0, f64::max)
}

/// Settings for the sampled constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantOptions {
    pub samples: usize,
    pub seed: u64,
    /// Boundary curvature bound `C_Γ`; zero on rectangles.
    pub c_gamma: f64,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        ConstantOptions {
            samples: 64,
            seed: 0x5eed,
            c_gamma: 0.0,
        }
    }
}

/// Data the constants depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantInputs<'a> {
    pub alpha: &'a ScalarField,
    pub beta: &'a ScalarField,
    pub tau: f64,
    /// Horizon `T_τ`.
    pub horizon: f64,
    /// `|u₀|²_V`.
    pub u0_v_sq: f64,
    /// Discrete `|f|²_{L²(0,T;H)}`.
    pub forcing_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub c0: f64,
    pub c_gamma: f64,
    pub c_r: f64,
    pub c1_tilde: f64,
    pub c2_tilde: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c_star_tilde: f64,
    pub delta_star: f64,
    /// `δ₀` of each step's elliptic problem, `min(1/τ, δ*/τ)`.
    pub delta0: f64,
    pub delta1: f64,
    pub tau_star: f64,
    pub horizon: f64,
}

/// `C₁(δ) = (C_Γ|α|_∞ + 1)(C_{r(δ)} + |Γ| + N|α|²_V) / (2(δ ∧ 1))`.
pub fn c1(delta: f64, c_gamma: f64, alpha_inf: f64, c_r: f64, boundary: f64, dim: usize, alpha_v_sq: f64) -> f64 {
    (c_gamma * alpha_inf + 1.0) * (c_r + boundary + dim as f64 * alpha_v_sq) / (2.0 * delta.min(1.0))
}

/// `C₃ = 2(|β|_∞ + 1) e^{2T} / (δ* ∧ 1)`.
pub fn c3(beta: &ScalarField, horizon: f64) -> f64 {
    2.0 * (linf_norm(beta) + 1.0) / beta.min().min(1.0) * exp(2.0 * horizon)
}

/// `C₄ = |α|²_H + |Ω| + 1`.
pub fn c4(alpha: &ScalarField) -> f64 {
    h_norm_sq(alpha) + alpha.grid().domain_measure() + 1.0
}

pub fn constants(inp: &ConstantInputs<'_>, opts: &ConstantOptions) -> Constants {
    let grid = *inp.alpha.grid();
    let dim = grid.dim();
    let n = dim as f64;
    let t = inp.horizon;
    let boundary = grid.boundary_measure();
    let alpha_inf = linf_norm(inp.alpha);
    let alpha_h_sq = h_norm_sq(inp.alpha);
    let alpha_v_sq = v_norm_sq(inp.alpha);
    let beta_inf = linf_norm(inp.beta);
    let grad_beta_inf = grad_linf(inp.beta);
    let delta_star = inp.beta.min();
    let ds1 = delta_star.min(1.0);
    let ds2 = (delta_star * delta_star).min(1.0);

    let c0 = estimate_c0(&grid, opts.samples, opts.seed);
    let delta_tilde = 1.0 / (2.0 * c0);
    let c_r = if opts.c_gamma > 0.0 && alpha_inf > 0.0 {
        trace_inequality_check(&grid, delta_tilde / (opts.c_gamma * alpha_inf), opts.samples, opts.seed)
    } else {
        // r(δ) = ∞: only constants survive, giving |Γ|/|Ω|.
        boundary / grid.domain_measure()
    };
    let c1_tilde = c1(delta_tilde, opts.c_gamma, alpha_inf, c_r, boundary, dim, alpha_v_sq);
    let c3 = c3(inp.beta, t);
    let c4 = c4(inp.alpha);
    let data = inp.u0_v_sq + inp.forcing_sq + 1.0;
    let c_star_tilde = 2.0 * c3 / ds2 * (grad_beta_inf * grad_beta_inf + 1.0) * (c1_tilde + 1.0) * data;
    let c5 = 2.0 * c0 * c3 * c_star_tilde * exp(2.0 * c_star_tilde * t) / ds1
        * (n * beta_inf + alpha_h_sq + grid.domain_measure() + t + 2.0);
    let c2_tilde = (c4 * grad_beta_inf * grad_beta_inf
        + (n * n + 1.0) * (t + 1.0) * (c5 * alpha_inf * alpha_inf + alpha_v_sq)
        + 1.0)
        / ds2;
    let c6 = c0 * (4.0 * c2_tilde / delta_star + c4);
    let delta0 = (1.0 / inp.tau).min(delta_star / inp.tau);
    Constants {
        c0,
        c_gamma: opts.c_gamma,
        c_r,
        c1_tilde,
        c2_tilde,
        c3,
        c4,
        c5,
        c6,
        c_star_tilde,
        delta_star,
        delta0,
        delta1: delta0 / (4.0 * c0),
        tau_star: 0.5f64.min(1.0 / (2.0 * c_star_tilde)),
        horizon: t,
    }
}
