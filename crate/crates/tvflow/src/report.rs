//! CSV reports. Every file starts with a header row; floats use the
//! shortest exponent form that parses back exactly.

use std::fs;
use std::path::Path;

use tvflow_core::analysis::{ConvergenceStudy, EstimateReport, StabilityReport};
use tvflow_core::calculus::gradient;
use tvflow_core::convex::phi;
use tvflow_core::flow::{EpsTrace, FlowProblem, FlowResult, Selection};

use crate::{CliError, CliResult};

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Builds a CSV document in memory.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Table { w }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }

    pub fn save(self, path: &Path) -> CliResult<()> {
        fs::write(path, self.into_bytes()).map_err(|e| CliError::io(path, e))
    }
}

/// `Φ_ε(∇u_i)` for every stored state, at the result's ε.
pub fn energies(result: &FlowResult, prob: &FlowProblem) -> Vec<f64> {
    result.states.iter().map(|u| phi(result.eps, &prob.alpha, &gradient(u))).collect()
}

/// One row per step `1..=n_τ`: step, time, X, Y, energy, residual.
pub fn index_table(result: &FlowResult, prob: &FlowProblem, report: &EstimateReport) -> Table {
    let energy = energies(result, prob);
    let mut t = Table::new(&["step", "time", "X", "Y", "energy", "residual"]);
    for i in 1..=result.n_steps() {
        let row = &report.rows[i];
        let residual = result.steps.get(i - 1).map_or(row.residual, |s| s.residual);
        t.row([i.to_string(), num(result.time(i)), num(row.x), num(row.y), num(energy[i]), num(residual)]);
    }
    t
}

pub fn estimate_table(report: &EstimateReport) -> Table {
    let mut t = Table::new(&[
        "step",
        "X",
        "Y",
        "v_norm_sq",
        "h2_norm_sq",
        "dissipation_lhs",
        "dissipation_rhs",
        "residual",
        "residual_target",
    ]);
    for r in &report.rows {
        t.row([
            r.step.to_string(),
            num(r.x),
            num(r.y),
            num(r.v_norm_sq),
            num(r.h2_norm_sq),
            num(r.dissipation_lhs),
            num(r.dissipation_rhs),
            num(r.residual),
            num(r.residual_target),
        ]);
    }
    t
}

pub fn checks_table(report: &EstimateReport) -> Table {
    let mut t = Table::new(&["name", "step", "lhs", "rhs", "margin", "asserted", "holds"]);
    for c in &report.checks {
        t.row([
            c.name.to_string(),
            c.step.map_or_else(String::new, |s| s.to_string()),
            num(c.lhs),
            num(c.rhs),
            num(c.margin()),
            c.asserted.to_string(),
            c.holds().to_string(),
        ]);
    }
    t
}

pub fn constants_table(report: &EstimateReport) -> Table {
    let c = &report.constants;
    let mut t = Table::new(&["name", "value"]);
    for (k, v) in [
        ("C0", c.c0),
        ("C_gamma", c.c_gamma),
        ("C_r", c.c_r),
        ("C1_tilde", c.c1_tilde),
        ("C2_tilde", c.c2_tilde),
        ("C3", c.c3),
        ("C4", c.c4),
        ("C5", c.c5),
        ("C6", c.c6),
        ("C_star_tilde", c.c_star_tilde),
        ("delta_star", c.delta_star),
        ("delta0", c.delta0),
        ("delta1", c.delta1),
        ("tau_star", c.tau_star),
        ("horizon", c.horizon),
        ("forcing_sq", report.forcing_sq),
    ] {
        t.row([k.to_string(), num(v)]);
    }
    t
}

pub fn stability_table(report: &StabilityReport, tau: f64) -> Table {
    let mut t = Table::new(&["step", "time", "lhs", "rhs"]);
    for (i, l) in report.lhs.iter().enumerate() {
        t.row([i.to_string(), num(i as f64 * tau), num(*l), num(report.rhs)]);
    }
    t
}

pub fn eps_trace_table(trace: &EpsTrace) -> Table {
    let mut t = Table::new(&["level", "eps", "gap_to_next"]);
    for (k, e) in trace.levels.iter().enumerate() {
        let gap = trace.gaps.get(k).map_or_else(String::new, |g| num(*g));
        t.row([k.to_string(), num(*e), gap]);
    }
    t
}

pub fn selection_table(sel: &Selection) -> Table {
    let mut t = Table::new(&["step", "max_sgn_residual"]);
    for (i, r) in sel.sgn_residuals.iter().enumerate() {
        t.row([(i + 1).to_string(), num(r.iter().copied().fold(0.0, f64::max))]);
    }
    t
}

pub fn study_table(study: &ConvergenceStudy) -> Table {
    let mut t = Table::new(&[study.axis.name(), "gap_to_next", "rate"]);
    for (k, l) in study.levels.iter().enumerate() {
        let gap = study.gaps.get(k).map_or_else(String::new, |g| num(*g));
        let rate = study.rates.get(k).map_or_else(String::new, |r| num(*r));
        t.row([num(*l), gap, rate]);
    }
    t
}

/// Per-step energy balance `lhs ≤ rhs + slack` of the dissipation inequality.
pub fn dissipation_table(result: &FlowResult, prob: &FlowProblem, report: &EstimateReport, slack_factor: f64) -> Table {
    let energy = energies(result, prob);
    let mut t = Table::new(&["step", "time", "energy", "lhs", "rhs", "slack", "holds"]);
    for r in &report.rows {
        let slack = slack_factor * r.residual_target;
        let holds = r.step == 0 || r.dissipation_lhs <= r.dissipation_rhs + slack;
        t.row([
            r.step.to_string(),
            num(result.time(r.step)),
            num(energy[r.step]),
            num(r.dissipation_lhs),
            num(r.dissipation_rhs),
            num(slack),
            holds.to_string(),
        ]);
    }
    t
}
