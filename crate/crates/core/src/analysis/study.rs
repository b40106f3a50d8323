//! Self-convergence studies in τ and in ε.

use alloc::vec::Vec;

use crate::convex::Epsilon;
use crate::elliptic::SolverConfig;
use crate::flow::{observed_rate, run_flow, trajectory_gap, FlowProblem, FlowResult};
use crate::norms::v_norm;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyAxis {
    Tau,
    Eps,
}

impl StudyAxis {
    pub fn name(self) -> &'static str {
        match self {
            StudyAxis::Tau => "tau",
            StudyAxis::Eps => "eps",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub axis: StudyAxis,
    pub levels: Vec<f64>,
    /// `gaps[k]`: discrete `C([0,T]; V)` distance between levels `k` and `k+1`.
    pub gaps: Vec<f64>,
    /// `rates[k]`: observed order from `gaps[k]` and `gaps[k+1]`.
    pub rates: Vec<f64>,
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 3 {
        return Err(Error::InvalidParameter("a study needs three or more levels"));
    }
    let down = levels.windows(2).all(|w| w[1] < w[0]);
    let up = levels.windows(2).all(|w| w[1] > w[0]);
    if !(down || up) || levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidParameter("levels must be positive and strictly monotone"));
    }
    Ok(())
}

/// The problem at one study level.
pub fn level_problem(axis: StudyAxis, prob: &FlowProblem, level: f64) -> Result<FlowProblem> {
    let mut p = prob.clone();
    match axis {
        StudyAxis::Tau => p.tau = level,
        StudyAxis::Eps => p.eps = Epsilon::new(level)?,
    }
    p.validate()?;
    Ok(p)
}

/// `max_t |ũ_a(t) − ũ_b(t)|_V` over the nodes of the finer run, using the
/// piecewise-linear interpolants.
pub fn interpolated_gap(a: &FlowResult, b: &FlowResult) -> Result<f64> {
    let (fine, coarse) = if a.tau <= b.tau { (a, b) } else { (b, a) };
    if fine.tau == coarse.tau {
        return Ok(trajectory_gap(&fine.states, &coarse.states));
    }
    let end = fine.horizon().min(coarse.horizon());
    let (fi, ci) = (fine.interpolants(), coarse.interpolants());
    let mut gap: f64 = 0.0;
    for i in 0..fine.states.len() {
        let t = fine.time(i);
        if t > end * (1.0 + 1e-12) {
            break;
        }
        let t = t.min(end);
        gap = gap.max(v_norm(&fi.linear(t)?.sub(&ci.linear(t)?)));
    }
    Ok(gap)
}

/// Builds a study from runs already computed at each level.
pub fn study_from_runs(axis: StudyAxis, levels: &[f64], runs: &[FlowResult]) -> Result<ConvergenceStudy> {
    validate_levels(levels)?;
    if runs.len() != levels.len() {
        return Err(Error::InvalidParameter("one run per level is required"));
    }
    let gaps = runs
        .windows(2)
        .map(|w| interpolated_gap(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    let rates = (0..gaps.len().saturating_sub(1))
        .map(|k| observed_rate(gaps[k], gaps[k + 1], levels[k], levels[k + 1]))
        .collect();
    Ok(ConvergenceStudy {
        axis,
        levels: levels.to_vec(),
        gaps,
        rates,
    })
}

pub fn convergence_study(
    axis: StudyAxis,
    prob: &FlowProblem,
    levels: &[f64],
    cfg: &SolverConfig,
) -> Result<ConvergenceStudy> {
    validate_levels(levels)?;
    let runs = levels
        .iter()
        .map(|&l| run_flow(&level_problem(axis, prob, l)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    study_from_runs(axis, levels, &runs)
}
