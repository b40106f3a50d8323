//! Continuous dependence of discrete trajectories on `(u₀, f)`.

use alloc::vec::Vec;

use libm::exp;

use crate::flow::{forcing_norm_sq, FlowProblem, FlowResult};
use crate::norms::{h_norm_sq, weighted_grad_norm_sq};
use crate::{Error, Result};

/// Relative slack allowed by [`StabilityReport::holds`].
pub const STABILITY_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// Per node: `|Δu_i|²_H + |√β ∇Δu_i|²`.
    pub lhs: Vec<f64>,
    /// `e^T(|Δu₀|²_H + |√β∇Δu₀|² + |Δf|²)`.
    pub rhs: f64,
    pub initial_gap: f64,
    pub forcing_gap: f64,
}

impl StabilityReport {
    /// First node violating `lhs ≤ rhs (1 + 10⁻⁶)`.
    pub fn first_violation(&self) -> Option<(usize, f64)> {
        let bound = self.rhs * (1.0 + STABILITY_SLACK);
        self.lhs.iter().copied().enumerate().find(|&(_, l)| l > bound)
    }

    pub fn holds(&self) -> bool {
        self.first_violation().is_none()
    }
}

/// Compares two runs sharing grid, `α`, `β`, `τ` and ε.
pub fn stability_gap(a: &FlowResult, b: &FlowResult, pa: &FlowProblem, pb: &FlowProblem) -> Result<StabilityReport> {
    if a.grid() != b.grid() || pa.grid() != a.grid() || pb.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    if a.tau != b.tau || a.eps != b.eps || a.states.len() != b.states.len() {
        return Err(Error::InvalidParameter("runs differ in τ, ε or length"));
    }
    if pa.alpha != pb.alpha || pa.beta != pb.beta {
        return Err(Error::InvalidParameter("runs differ in α or β"));
    }
    let beta = &pa.beta;
    let gap = |x: &crate::ScalarField, y: &crate::ScalarField| {
        let d = x.sub(y);
        h_norm_sq(&d) + weighted_grad_norm_sq(beta, &d)
    };
    let lhs: Vec<f64> = a.states.iter().zip(&b.states).map(|(x, y)| gap(x, y)).collect();
    let df: Vec<_> = a.forcing.iter().zip(&b.forcing).map(|(x, y)| x.sub(y)).collect();
    let forcing_gap = forcing_norm_sq(&df, a.tau);
    let initial_gap = lhs[0];
    Ok(StabilityReport {
        rhs: exp(a.horizon()) * (initial_gap + forcing_gap),
        lhs,
        initial_gap,
        forcing_gap,
    })
}
