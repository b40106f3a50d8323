//! Per-step energy ledger and the a priori bounds of the implicit scheme.

use alloc::vec::Vec;

use libm::exp;

use super::constants::{constants, ConstantInputs, ConstantOptions, Constants};
use crate::calculus::gradient;
use crate::convex::phi;
use crate::elliptic::weak_residual;
use crate::flow::{forcing_norm_sq, step_coefficients, FlowProblem, FlowResult};
use crate::norms::{grad_norm_sq, h2_norm_sq, h_norm, h_norm_sq, v_norm_sq, weighted_grad_norm_sq, weighted_laplacian_sq};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    /// `X_i = |u_i|²_H + |√β ∇u_i|²`.
    pub x: f64,
    /// `Y_i = |∇u_i|² + ∫β|Δu_i|² + Φ_ε(∇u_i)`.
    pub y: f64,
    pub v_norm_sq: f64,
    pub h2_norm_sq: f64,
    /// `(1/2τ)|u_i − u_{i−1}|²_H + (δ*/τ)|∇(u_i − u_{i−1})|² + Φ_ε(∇u_i)`; zero at step 0.
    pub dissipation_lhs: f64,
    /// `Φ_ε(∇u_{i−1}) + (τ/2)|f_i|²_H`; zero at step 0.
    pub dissipation_rhs: f64,
    /// `|r_i|_H`, the step residual recomputed from the stored states.
    pub residual: f64,
    /// `tolRel (1 + |f°_i|_H)`.
    pub residual_target: f64,
}

/// One inequality `lhs ≤ rhs` evaluated on a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub step: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// Asserted checks decide pass/fail; the others are reported only.
    pub asserted: bool,
}

impl Check {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub const STEP_RESIDUAL: &str = "step-residual";
pub const DISSIPATION: &str = "dissipation";
pub const GRONWALL_PREMISE: &str = "gronwall-premise";
pub const GRONWALL_BOUND: &str = "gronwall-bound";
pub const V_BOUND: &str = "v-bound";
pub const INCREMENT_BOUND: &str = "increment-bound";
pub const H2_BOUND: &str = "h2-bound";
pub const H2_INCREMENT_BOUND: &str = "h2-increment-bound";

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub rows: Vec<LedgerRow>,
    pub constants: Constants,
    pub checks: Vec<Check>,
    /// Discrete `|f|²_{L²(0,T;H)}`.
    pub forcing_sq: f64,
    /// The step exceeds the threshold `τ_*` of the H² Gronwall argument.
    pub tau_exceeds_tau_star: bool,
}

impl EstimateReport {
    pub fn first_violation(&self) -> Option<&Check> {
        self.checks.iter().find(|c| c.asserted && !c.holds())
    }

    pub fn asserted_hold(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Smallest margin among checks named `name`.
    pub fn min_margin(&self, name: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.name == name)
            .map(Check::margin)
            .reduce(f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerOptions {
    pub constants: ConstantOptions,
    /// Dissipation slack in units of the step's residual target.
    pub slack_factor: f64,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        LedgerOptions {
            constants: ConstantOptions::default(),
            slack_factor: 10.0,
        }
    }
}

pub fn energy_ledger(result: &FlowResult, prob: &FlowProblem) -> Result<EstimateReport> {
    energy_ledger_with(result, prob, &LedgerOptions::default())
}

/// Rebuilds every ledger quantity from the stored states and evaluates the
/// a priori bounds. Bounds whose derivation needs `τ < 1/2` are asserted
/// only in that regime.
pub fn energy_ledger_with(result: &FlowResult, prob: &FlowProblem, opts: &LedgerOptions) -> Result<EstimateReport> {
    let states = &result.states;
    if states.is_empty() || result.forcing.len() != states.len() {
        return Err(Error::InvalidParameter("trajectory and forcing lengths differ"));
    }
    for s in states.iter().chain(&result.forcing) {
        s.same_grid(&prob.alpha)?;
    }
    let (alpha, beta) = (&prob.alpha, &prob.beta);
    let tau = result.tau;
    let eps = result.eps;
    let n = result.n_steps();
    let delta_star = beta.min();
    let forcing_sq = forcing_norm_sq(&result.forcing, tau);
    let u0 = &states[0];
    let u0_v_sq = v_norm_sq(u0);
    let u0_h2_sq = h2_norm_sq(u0);
    let eps2 = eps.value() * eps.value();
    let horizon = result.horizon();
    let consts = constants(
        &ConstantInputs {
            alpha,
            beta,
            tau,
            horizon,
            u0_v_sq,
            forcing_sq,
        },
        &opts.constants,
    );

    let phis: Vec<f64> = states.iter().map(|u| phi(eps, alpha, &gradient(u))).collect();
    let mut rows = Vec::with_capacity(n + 1);
    let mut checks = Vec::new();
    for (i, u) in states.iter().enumerate() {
        let mut row = LedgerRow {
            step: i,
            x: h_norm_sq(u) + weighted_grad_norm_sq(beta, u),
            y: grad_norm_sq(u) + weighted_laplacian_sq(beta, u) + phis[i],
            v_norm_sq: v_norm_sq(u),
            h2_norm_sq: h2_norm_sq(u),
            dissipation_lhs: 0.0,
            dissipation_rhs: 0.0,
            residual: 0.0,
            residual_target: 0.0,
        };
        if i > 0 {
            let prev = &states[i - 1];
            let d = u.sub(prev);
            let f = &result.forcing[i];
            row.dissipation_lhs = h_norm_sq(&d) / (2.0 * tau) + delta_star / tau * grad_norm_sq(&d) + phis[i];
            row.dissipation_rhs = phis[i - 1] + 0.5 * tau * h_norm_sq(f);
            let coeffs = step_coefficients(prev, f, alpha, beta, tau)?;
            row.residual_target = result.tol_rel * (1.0 + h_norm(coeffs.f_circ()));
            if !eps.is_singular() {
                row.residual = weak_residual(eps, &coeffs, u)?;
                checks.push(Check {
                    name: STEP_RESIDUAL,
                    step: Some(i),
                    lhs: row.residual,
                    rhs: row.residual_target * (1.0 + 1e-9),
                    asserted: true,
                });
            }
            checks.push(Check {
                name: DISSIPATION,
                step: Some(i),
                lhs: row.dissipation_lhs,
                rhs: row.dissipation_rhs + opts.slack_factor * row.residual_target,
                asserted: true,
            });
            // Testing the step equation with u_i leaves the defect (r_i, u_i).
            let prev_x: f64 = rows.last().map_or(0.0, |r: &LedgerRow| r.x);
            let roundoff = 8.0 * f64::EPSILON * (row.x + prev_x);
            checks.push(Check {
                name: GRONWALL_PREMISE,
                step: Some(i),
                lhs: row.x - prev_x,
                rhs: tau * (row.x + h_norm_sq(f)) + 2.0 * tau * row.residual * h_norm(u) + roundoff,
                asserted: true,
            });
        }
        rows.push(row);
    }

    let x0 = rows[0].x;
    let small_step = tau < 0.5;
    for row in rows.iter().skip(1) {
        checks.push(Check {
            name: GRONWALL_BOUND,
            step: Some(row.step),
            lhs: row.x,
            rhs: exp(2.0 * horizon) * (x0 + forcing_sq + 1.0),
            asserted: small_step,
        });
        checks.push(Check {
            name: V_BOUND,
            step: Some(row.step),
            lhs: row.v_norm_sq,
            rhs: consts.c3 * (u0_v_sq + forcing_sq + 1.0),
            asserted: small_step,
        });
        checks.push(Check {
            name: H2_BOUND,
            step: Some(row.step),
            lhs: row.h2_norm_sq,
            rhs: consts.c5 * (u0_h2_sq + forcing_sq + eps2 + 1.0),
            asserted: false,
        });
    }

    let mut inc = 0.0;
    let mut inc_h2 = 0.0;
    for w in states.windows(2) {
        let d = w[1].sub(&w[0]);
        inc += h_norm_sq(&d) + delta_star * grad_norm_sq(&d);
        inc_h2 += h2_norm_sq(&d);
    }
    checks.push(Check {
        name: INCREMENT_BOUND,
        step: None,
        lhs: inc / tau,
        rhs: consts.c4 * (u0_v_sq + forcing_sq + eps2 + 1.0),
        asserted: true,
    });
    checks.push(Check {
        name: H2_INCREMENT_BOUND,
        step: None,
        lhs: inc_h2 / tau,
        rhs: consts.c6 / eps2.min(1.0) * (u0_h2_sq + forcing_sq + eps2 + 1.0),
        asserted: false,
    });

    Ok(EstimateReport {
        rows,
        constants: consts,
        checks,
        forcing_sq,
        tau_exceeds_tau_star: tau > consts.tau_star,
    })
}
