//! Finite-dimensional probes of the Mosco convergence `Φ_ε → Φ₀`.

use alloc::vec::Vec;

use libm::sqrt;

use crate::convex::{phi, Epsilon};
use crate::field::VectorField;
use crate::norms::{h_norm, l1_norm, vector_norm};
use crate::{Error, Result, ScalarField};

#[derive(Clone, Debug, PartialEq)]
pub struct MoscoReport {
    /// `min_n [Φ_{ε_n}(w_n) − Φ₀(w) + |α|_H |w_n − w|]`. `Φ₀` is
    /// `|α|_H`-Lipschitz and `Φ_ε ≥ Φ₀`, so this is the lower-bound
    /// condition certified at every finite `n`; it is `≥ 0` up to rounding.
    pub m1_margin: f64,
    /// `Φ_{ε_N}(w_N) − Φ₀(w)` at the last index, the raw tail value.
    pub m1_tail: f64,
    /// `Φ_{ε_n}(w) − Φ₀(w)` for the constant recovery sequence `ŵ_n ≡ w`.
    pub m2_gaps: Vec<f64>,
    /// `ε_n |α|_{L¹}`.
    pub m2_bounds: Vec<f64>,
}

impl MoscoReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.m1_margin >= -tol && self.m2_gaps.iter().zip(&self.m2_bounds).all(|(g, b)| g <= b)
    }
}

/// `Φ_ε(w) − Φ₀(w) = ∫ α ε² / (γ_ε(w) + |w|)`, free of cancellation.
pub fn phi_excess(eps: Epsilon, alpha: &ScalarField, w: &VectorField) -> f64 {
    let e2 = eps.value() * eps.value();
    let s: f64 = (0..alpha.len())
        .map(|j| {
            let y = w.at(j);
            let r = sqrt(y[0] * y[0] + y[1] * y[1]);
            alpha.values()[j] * e2 / (sqrt(e2 + r * r) + r).max(f64::MIN_POSITIVE)
        })
        .sum();
    alpha.grid().cell_measure() * s
}

pub fn mosco_probe(alpha: &ScalarField, w_seq: &[VectorField], w: &VectorField, eps_seq: &[f64]) -> Result<MoscoReport> {
    if w_seq.is_empty() || w_seq.len() != eps_seq.len() {
        return Err(Error::InvalidParameter("one ε per sequence element is required"));
    }
    if w_seq.iter().any(|v| v.grid() != alpha.grid()) || w.grid() != alpha.grid() {
        return Err(Error::GridMismatch);
    }
    let zero = Epsilon::new(0.0)?;
    let phi0 = phi(zero, alpha, w);
    let lip = h_norm(alpha);
    let l1 = l1_norm(alpha);
    let mut margin = f64::INFINITY;
    let mut tail = 0.0;
    let mut gaps = Vec::with_capacity(eps_seq.len());
    let mut bounds = Vec::with_capacity(eps_seq.len());
    for (wn, &e) in w_seq.iter().zip(eps_seq) {
        let eps = Epsilon::new(e)?;
        tail = phi(eps, alpha, wn) - phi0;
        margin = margin.min(tail + lip * vector_norm(&wn.sub(w)));
        gaps.push(phi_excess(eps, alpha, w));
        bounds.push(e * l1);
    }
    Ok(MoscoReport {
        m1_margin: margin,
        m1_tail: tail,
        m2_gaps: gaps,
        m2_bounds: bounds,
    })
}
