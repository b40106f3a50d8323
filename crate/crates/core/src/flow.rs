//! Implicit time stepping for the pseudo-parabolic flow
//!
//! ```text
//! ∂_t u − div(α ∇γ_ε(∇u) + β ∇∂_t u) = f,   ∇u·n = 0,   u(0) = u₀.
//! ```
//!
//! Each step solves a strictly convex elliptic problem; the singular case
//! ε = 0 is approximated by continuation over a decreasing ε schedule.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use libm::{ceil, log, round};

use crate::calculus::{divergence, gradient};
use crate::convex::{gamma_grad, sgn_residual, CoefficientSet, Epsilon};
use crate::elliptic::{solve_e_from, EllipticSolution, SolverConfig};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::norms::v_norm;
use crate::{Error, Result};

pub type ForcingFn = Arc<dyn Fn(f64) -> ScalarField + Send + Sync>;

/// Right-hand side `f(t)` on `(0, T)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Constant(ScalarField),
    /// Piecewise constant: `fields[k]` on `[k·period, (k+1)·period)`, zero after.
    Samples { period: f64, fields: Vec<ScalarField> },
    /// Evaluated pointwise; interval means use 5-point Gauss–Legendre.
    Function(ForcingFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => f.write_str("Zero"),
            Forcing::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Forcing::Samples { period, fields } => f
                .debug_struct("Samples")
                .field("period", period)
                .field("count", &fields.len())
                .finish(),
            Forcing::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

/// `n_τ = min{n : nτ ≥ T}`, with `T/τ` snapped to an integer when it is one
/// up to rounding.
pub fn steps_for(t_final: f64, tau: f64) -> Result<usize> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidParameter("horizon T must be positive"));
    }
    if !(tau.is_finite() && tau > 0.0 && tau < t_final) {
        return Err(Error::InvalidParameter("τ must lie in (0, T)"));
    }
    let q = t_final / tau;
    let r = round(q);
    Ok(if (q - r).abs() <= 1e-9 * q { r as usize } else { ceil(q) as usize })
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Time means `f_i` of the forcing over `((i−1)τ, iτ]` for `i = 1..=steps`,
/// preceded by `f_0 = 0`.
pub fn sample_forcing(forcing: &Forcing, grid: &Grid, tau: f64, steps: usize) -> Result<Vec<ScalarField>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter("τ must be positive"));
    }
    let zero = ScalarField::zeros(*grid);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(zero.clone());
    match forcing {
        Forcing::Zero => out.extend((0..steps).map(|_| zero.clone())),
        Forcing::Constant(c) => {
            if c.grid() != grid {
                return Err(Error::GridMismatch);
            }
            out.extend((0..steps).map(|_| c.clone()));
        }
        Forcing::Samples { period, fields } => {
            if fields.is_empty() {
                return Err(Error::EmptyForcing);
            }
            if !(period.is_finite() && *period > 0.0) {
                return Err(Error::InvalidParameter("sample period must be positive"));
            }
            if fields.iter().any(|f| f.grid() != grid) {
                return Err(Error::GridMismatch);
            }
            for i in 1..=steps {
                let (a, b) = ((i - 1) as f64 * tau, i as f64 * tau);
                let mut acc = zero.clone();
                let first = (a / period) as usize;
                for (k, field) in fields.iter().enumerate().skip(first) {
                    let (s, e) = (k as f64 * period, (k + 1) as f64 * period);
                    if s >= b {
                        break;
                    }
                    let overlap = e.min(b) - s.max(a);
                    if overlap > 0.0 {
                        acc = acc.axpy(overlap / tau, field);
                    }
                }
                out.push(acc);
            }
        }
        Forcing::Function(f) => {
            for i in 1..=steps {
                let mid = (i as f64 - 0.5) * tau;
                let mut acc = zero.clone();
                for &(x, w) in &GAUSS5 {
                    let v = f(mid + 0.5 * tau * x);
                    if v.grid() != grid {
                        return Err(Error::GridMismatch);
                    }
                    acc = acc.axpy(0.5 * w, &v);
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FlowProblem {
    pub u0: ScalarField,
    pub alpha: ScalarField,
    pub beta: ScalarField,
    pub forcing: Forcing,
    pub t_final: f64,
    pub tau: f64,
    pub eps: Epsilon,
}

impl FlowProblem {
    pub fn new(
        u0: ScalarField,
        alpha: ScalarField,
        beta: ScalarField,
        forcing: Forcing,
        t_final: f64,
        tau: f64,
        eps: Epsilon,
    ) -> Result<Self> {
        let p = FlowProblem {
            u0,
            alpha,
            beta,
            forcing,
            t_final,
            tau,
            eps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.u0.same_grid(&self.alpha)?;
        self.u0.same_grid(&self.beta)?;
        if self.alpha.min() < 0.0 {
            return Err(Error::InvalidCoefficient("α must be nonnegative"));
        }
        if self.beta.min() <= 0.0 {
            return Err(Error::InvalidCoefficient("β must have a positive infimum"));
        }
        steps_for(self.t_final, self.tau)?;
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        self.u0.grid()
    }

    pub fn steps(&self) -> usize {
        steps_for(self.t_final, self.tau).expect("validated problem")
    }

    /// `T_τ = n_τ τ`, the time actually reached.
    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.tau
    }

    pub fn forcing_samples(&self) -> Result<Vec<ScalarField>> {
        sample_forcing(&self.forcing, self.grid(), self.tau, self.steps())
    }
}

/// Elliptic data of one implicit step: `α° = 1/τ`, `β/τ`, and
/// `f° = f_i + u_prev/τ − div(β∇u_prev)/τ`.
pub fn step_coefficients(
    u_prev: &ScalarField,
    f_i: &ScalarField,
    alpha: &ScalarField,
    beta: &ScalarField,
    tau: f64,
) -> Result<CoefficientSet> {
    let g = *u_prev.grid();
    let inv = 1.0 / tau;
    let flux = gradient(u_prev);
    let mut comps = Vec::with_capacity(g.dim());
    for k in 0..g.dim() {
        comps.push(flux.component(k).iter().zip(beta.values()).map(|(a, b)| a * b).collect());
    }
    let bflux = VectorField::new(g, comps)?;
    let f_circ = f_i.axpy(inv, u_prev).axpy(-inv, &divergence(&bflux));
    CoefficientSet::new(alpha.clone(), beta.scale(inv), ScalarField::constant(g, inv), f_circ)
}

/// One implicit step started from `guess` (normally `u_prev`).
pub fn step_ap_from(
    u_prev: &ScalarField,
    f_i: &ScalarField,
    prob: &FlowProblem,
    cfg: &SolverConfig,
    guess: &ScalarField,
) -> Result<(EllipticSolution, CoefficientSet)> {
    let c = step_coefficients(u_prev, f_i, &prob.alpha, &prob.beta, prob.tau)?;
    let s = solve_e_from(prob.eps, &c, cfg, guess)?;
    Ok((s, c))
}

pub fn step_ap(
    u_prev: &ScalarField,
    f_i: &ScalarField,
    prob: &FlowProblem,
    cfg: &SolverConfig,
) -> Result<EllipticSolution> {
    step_ap_from(u_prev, f_i, prob, cfg, u_prev).map(|(s, _)| s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub newton_iters: usize,
    pub residual: f64,
    /// `tolRel · (1 + |f°|_H)` for this step.
    pub target: f64,
}

/// Sgn-selection diagnostics of a continuation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Per step `i ≥ 1`, per cell: distance of `ω*_i` to `Sgn(∇u_i)`.
    pub sgn_residuals: Vec<Vec<f64>>,
    /// `max |ω*|` over all steps and cells.
    pub max_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsTrace {
    pub levels: Vec<f64>,
    /// `gaps[k]`: `max_i |u_i^{ε_k} − u_i^{ε_{k+1}}|_V`.
    pub gaps: Vec<f64>,
    pub limit: f64,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub states: Vec<ScalarField>,
    /// `f_0 = 0, f_1, …, f_{n_τ}`.
    pub forcing: Vec<ScalarField>,
    pub tau: f64,
    pub eps: Epsilon,
    pub tol_rel: f64,
    pub steps: Vec<StepRecord>,
    /// `γ'_{ε_K}(∇u_i)` per stored state, continuation runs only.
    pub omega_star: Option<Vec<VectorField>>,
    pub selection: Option<Selection>,
    pub eps_trace: Option<EpsTrace>,
}

impl FlowResult {
    /// Wraps an externally supplied trajectory, e.g. one loaded from disk.
    pub fn from_states(
        states: Vec<ScalarField>,
        forcing: Vec<ScalarField>,
        tau: f64,
        eps: Epsilon,
        tol_rel: f64,
    ) -> Result<Self> {
        if states.is_empty() || forcing.len() != states.len() {
            return Err(Error::InvalidParameter("one forcing sample per state is required"));
        }
        let g = *states[0].grid();
        if states.iter().chain(&forcing).any(|s| *s.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(FlowResult {
            states,
            forcing,
            tau,
            eps,
            tol_rel,
            steps: Vec::new(),
            omega_star: None,
            selection: None,
            eps_trace: None,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps())
    }

    pub fn grid(&self) -> &Grid {
        self.states[0].grid()
    }

    pub fn interpolants(&self) -> Interpolants<'_> {
        Interpolants {
            states: &self.states,
            tau: self.tau,
        }
    }
}

fn run_guided(prob: &FlowProblem, cfg: &SolverConfig, guesses: Option<&[ScalarField]>) -> Result<FlowResult> {
    prob.validate()?;
    prob.eps.positive()?;
    let steps = prob.steps();
    let forcing = prob.forcing_samples()?;
    let mut result = FlowResult {
        states: vec![prob.u0.clone()],
        forcing,
        tau: prob.tau,
        eps: prob.eps,
        tol_rel: cfg.tol_rel,
        steps: Vec::with_capacity(steps),
        omega_star: None,
        selection: None,
        eps_trace: None,
    };
    for i in 1..=steps {
        let prev = &result.states[i - 1];
        let guess = guesses.map_or(prev, |g| &g[i]);
        match step_ap_from(prev, &result.forcing[i], prob, cfg, guess) {
            Ok((sol, c)) => {
                result.steps.push(StepRecord {
                    step: i,
                    time: result.time(i),
                    newton_iters: sol.newton_iters,
                    residual: sol.residual_norm,
                    target: cfg.residual_target(c.f_circ()),
                });
                result.states.push(sol.u);
            }
            Err(e) => {
                return Err(Error::StepFailed {
                    step: i,
                    partial: Box::new(result),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(result)
}

/// Runs the implicit scheme for `i = 1..=n_τ`; requires ε > 0.
pub fn run_flow(prob: &FlowProblem, cfg: &SolverConfig) -> Result<FlowResult> {
    run_guided(prob, cfg, None)
}

/// `ε_k = 2^{−k}` for `k = 0..=levels`.
pub fn default_schedule(levels: usize) -> Vec<f64> {
    (0..=levels).map(|k| libm::ldexp(1.0, -(k as i32))).collect()
}

/// `max_i |a_i − b_i|_V` over common nodes.
pub fn trajectory_gap(a: &[ScalarField], b: &[ScalarField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| v_norm(&x.sub(y))).fold(0.0, f64::max)
}

/// Approximates the ε = 0 flow by continuation over `schedule`, stopping
/// once two consecutive levels are within `tol_limit` in the discrete
/// `C([0,T]; V)` norm. The ε in `prob` is ignored.
pub fn run_singular_flow(
    prob: &FlowProblem,
    schedule: &[f64],
    tol_limit: f64,
    cfg: &SolverConfig,
) -> Result<FlowResult> {
    if schedule.len() < 2 || schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidParameter("schedule needs two or more positive levels"));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("schedule must be strictly decreasing"));
    }
    if !(tol_limit.is_finite() && tol_limit > 0.0) {
        return Err(Error::InvalidParameter("tolLimit must be positive"));
    }
    let mut trace = EpsTrace {
        levels: Vec::new(),
        gaps: Vec::new(),
        limit: tol_limit,
    };
    let mut level_prob = prob.clone();
    let mut previous: Option<FlowResult> = None;
    for &e in schedule {
        level_prob.eps = Epsilon::new(e)?;
        let current = run_guided(&level_prob, cfg, previous.as_ref().map(|p| p.states.as_slice()))?;
        trace.levels.push(e);
        if let Some(prev) = &previous {
            let gap = trajectory_gap(&prev.states, &current.states);
            trace.gaps.push(gap);
            if gap <= tol_limit {
                return Ok(finish_singular(current, trace));
            }
        }
        previous = Some(current);
    }
    Err(Error::ScheduleExhausted {
        achieved_gap: trace.gaps.last().copied().unwrap_or(f64::INFINITY),
        last_eps: *schedule.last().unwrap(),
        limit: tol_limit,
    })
}

fn finish_singular(mut result: FlowResult, trace: EpsTrace) -> FlowResult {
    let eps = result.eps;
    let mut omegas = Vec::with_capacity(result.states.len());
    let mut residuals = Vec::with_capacity(result.n_steps());
    let mut max_norm: f64 = 0.0;
    for (i, u) in result.states.iter().enumerate() {
        let g = gradient(u);
        let grid = *u.grid();
        let n = grid.cell_count();
        let mut data = vec![0.0; n * grid.dim()];
        let mut res = Vec::with_capacity(n);
        for j in 0..n {
            let y = g.at(j);
            let w = gamma_grad(eps, &y).expect("positive ε");
            max_norm = max_norm.max(libm::sqrt(w[0] * w[0] + w[1] * w[1]));
            for k in 0..grid.dim() {
                data[k * n + j] = w[k];
            }
            res.push(sgn_residual(&y, &w));
        }
        if i > 0 {
            residuals.push(res);
        }
        omegas.push(VectorField::from_raw(grid, data));
    }
    result.omega_star = Some(omegas);
    result.selection = Some(Selection {
        sgn_residuals: residuals,
        max_norm,
    });
    result.eps_trace = Some(trace);
    result
}

/// Forward, backward and piecewise-linear time interpolants of a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct Interpolants<'a> {
    states: &'a [ScalarField],
    tau: f64,
}

enum Locus {
    Node(usize),
    Inside(usize, f64),
}

impl<'a> Interpolants<'a> {
    pub fn new(states: &'a [ScalarField], tau: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter("empty trajectory"));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter("τ must be positive"));
        }
        Ok(Interpolants { states, tau })
    }

    fn horizon(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.tau
    }

    fn locate(&self, t: f64) -> Result<Locus> {
        let n = self.states.len() - 1;
        if !(t.is_finite() && t >= 0.0 && t <= self.horizon() * (1.0 + 1e-14)) {
            return Err(Error::TimeOutOfRange(t));
        }
        let s = t / self.tau;
        let r = round(s);
        if (s - r).abs() <= 1e-12 * s.max(1.0) {
            return Ok(Locus::Node((r as usize).min(n)));
        }
        let k = s as usize;
        Ok(Locus::Inside(k, s - k as f64))
    }

    /// `u_i` on `(t_{i−1}, t_i]`, `u_0` at `t = 0`.
    pub fn forward(&self, t: f64) -> Result<ScalarField> {
        Ok(match self.locate(t)? {
            Locus::Node(i) => self.states[i].clone(),
            Locus::Inside(k, _) => self.states[k + 1].clone(),
        })
    }

    /// `u_{i−1}` on `(t_{i−1}, t_i]`, `u_0` at `t = 0`.
    pub fn backward(&self, t: f64) -> Result<ScalarField> {
        Ok(match self.locate(t)? {
            Locus::Node(i) => self.states[i.saturating_sub(1)].clone(),
            Locus::Inside(k, _) => self.states[k].clone(),
        })
    }

    /// `((t − t_{i−1})/τ) u_i + ((t_i − t)/τ) u_{i−1}` on `[t_{i−1}, t_i]`.
    pub fn linear(&self, t: f64) -> Result<ScalarField> {
        Ok(match self.locate(t)? {
            Locus::Node(i) => self.states[i].clone(),
            Locus::Inside(k, theta) => self.states[k].scale(1.0 - theta).axpy(theta, &self.states[k + 1]),
        })
    }
}

/// Discrete `|f|²_{L²(0,T;H)}` of the sampled forcing, `τ Σ_i |f_i|²_H`.
pub fn forcing_norm_sq(forcing: &[ScalarField], tau: f64) -> f64 {
    tau * forcing.iter().skip(1).map(|f| f.dot(f)).sum::<f64>()
}

/// Observed order `log(g_k / g_{k+1}) / log(p_k / p_{k+1})`.
pub fn observed_rate(g_coarse: f64, g_fine: f64, p_coarse: f64, p_fine: f64) -> f64 {
    log(g_coarse / g_fine) / log(p_coarse / p_fine)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<FlowResult>();
    is::<FlowProblem>();
}
