//! The subcommands. Each returns a [`CliResult`]; the binary maps errors to
//! exit codes through [`CliError::exit_code`].

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tvflow_core::analysis::{
    energy_ledger, level_problem, stability_gap, study_from_runs, trace_inequality_check, validate_levels, Check,
    ConvergenceStudy, EstimateReport, LedgerOptions, StabilityReport, StudyAxis,
};
use tvflow_core::convex::Epsilon;
use tvflow_core::elliptic::SolverConfig;
use tvflow_core::flow::{run_flow, FlowProblem, FlowResult, Forcing};
use tvflow_core::{Error, ScalarField};

use crate::config::RunConfig;
use crate::fieldio::{load_field, save_field};
use crate::pgm::{read_pgm, write_pgm, ImageDatum};
use crate::report::{self, Table};
use crate::setup::{edge_stop, Mode, RunSetup};
use crate::{CliError, CliResult};

pub fn state_file(step: usize) -> String {
    format!("u_{step:06}.field")
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn save_states(dir: &Path, result: &FlowResult, every: usize) -> CliResult<()> {
    let n = result.n_steps();
    for (i, u) in result.states.iter().enumerate() {
        if i % every == 0 || i == n {
            let path = dir.join(state_file(i));
            save_field(&path, u).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}

fn describe(c: &Check) -> String {
    let at = c.step.map_or_else(String::new, |s| format!(" at step {s}"));
    format!("{}{at}: lhs = {:e} > rhs = {:e}", c.name, c.lhs, c.rhs)
}

fn warn_tau_star(report: &EstimateReport, tau: f64) {
    if report.tau_exceeds_tau_star {
        eprintln!(
            "warning: tau = {tau} exceeds tau* = {:e}; the H2 bounds are outside their proven regime",
            report.constants.tau_star
        );
    }
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub result: FlowResult,
    pub report: EstimateReport,
    /// `Φ_ε(∇u_i)` per stored state.
    pub energies: Vec<f64>,
}

/// Runs the configured flow and writes the trajectory, `index.csv`,
/// `estimate.csv`, `checks.csv` and `constants.csv` (plus `eps_trace.csv`
/// and `selection.csv` for continuation runs).
pub fn solve_setup(setup: &RunSetup) -> CliResult<SolveOutcome> {
    let dir = &setup.output_dir;
    create_dir(dir)?;
    let result = match setup.run(&setup.problem) {
        Ok(r) => r,
        Err(CliError::Solver(Error::StepFailed { step, partial, source })) => {
            save_states(dir, &partial, setup.save_every)?;
            return Err(CliError::Solver(Error::StepFailed { step, partial, source }));
        }
        Err(e) => return Err(e),
    };
    save_states(dir, &result, setup.save_every)?;
    let prob = setup.problem_for(&result);
    let report = energy_ledger(&result, &prob)?;
    report::index_table(&result, &prob, &report).save(&dir.join("index.csv"))?;
    report::estimate_table(&report).save(&dir.join("estimate.csv"))?;
    report::checks_table(&report).save(&dir.join("checks.csv"))?;
    report::constants_table(&report).save(&dir.join("constants.csv"))?;
    if let Some(trace) = &result.eps_trace {
        report::eps_trace_table(trace).save(&dir.join("eps_trace.csv"))?;
    }
    if let Some(sel) = &result.selection {
        report::selection_table(sel).save(&dir.join("selection.csv"))?;
    }
    warn_tau_star(&report, result.tau);
    let energies = report::energies(&result, &prob);
    Ok(SolveOutcome { result, report, energies })
}

pub fn solve(config: &Path) -> CliResult<SolveOutcome> {
    solve_setup(&RunSetup::load(config)?)
}

/// Reads `u_000000.field ..` for every step of `prob` from `dir`.
pub fn load_trajectory(dir: &Path, prob: &FlowProblem, tol_rel: f64) -> CliResult<FlowResult> {
    if prob.eps.is_singular() {
        return Err(CliError::Config("verifying a stored trajectory needs eps > 0".into()));
    }
    let mut states = Vec::with_capacity(prob.steps() + 1);
    for i in 0..=prob.steps() {
        let path = dir.join(state_file(i));
        let u = load_field(&path).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))?;
        if u.grid() != prob.grid() {
            return Err(CliError::Corrupt(format!("{}: grid differs from the configuration", path.display())));
        }
        states.push(u);
    }
    if states[0] != prob.u0 {
        return Err(CliError::Corrupt(format!("{}: initial state differs from u0", dir.join(state_file(0)).display())));
    }
    let forcing = prob.forcing_samples()?;
    Ok(FlowResult::from_states(states, forcing, prob.tau, prob.eps, tol_rel)?)
}

/// `u₀ + δ·ξ` with `ξ` uniform on `[-1, 1]` per cell.
pub fn perturbed(u: &ScalarField, delta: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = u.values().iter().map(|v| v + delta * rng.gen_range(-1.0..=1.0)).collect();
    ScalarField::new(*u.grid(), vals).expect("finite perturbation")
}

#[derive(Debug)]
pub struct TraceOutcome {
    pub r: f64,
    pub c_r: f64,
    pub c_2r: f64,
    pub floor: f64,
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub report: EstimateReport,
    pub stability: StabilityReport,
    pub trace: TraceOutcome,
}

/// Runs (or loads) the flow, then the energy ledger, the stability bound
/// against a perturbed twin run, and the sampled trace inequality.
pub fn verify_setup(setup: &RunSetup) -> CliResult<VerifyOutcome> {
    let result = match &setup.trajectory {
        Some(dir) => load_trajectory(dir, &setup.problem, setup.solver.tol_rel)?,
        None => setup.run(&setup.problem)?,
    };
    let prob = setup.problem_for(&result);
    let report = energy_ledger(&result, &prob)?;
    warn_tau_star(&report, result.tau);
    for c in report.checks.iter().filter(|c| c.asserted) {
        if !c.holds() {
            return Err(CliError::Assertion(describe(c)));
        }
    }
    println!("PASS energy ledger ({} asserted checks)", report.checks.iter().filter(|c| c.asserted).count());

    // The perturbation must dominate the solver tolerance or the twin gap
    // measures inexact solves rather than the data.
    let delta = setup.perturbation.max(10.0 * setup.solver.tol_rel);
    let twin_prob = FlowProblem {
        u0: perturbed(&prob.u0, delta, setup.seed),
        ..prob.clone()
    };
    let twin = run_flow(&twin_prob, &setup.solver)?;
    let stability = stability_gap(&result, &twin, &prob, &twin_prob)?;
    if let Some((i, lhs)) = stability.first_violation() {
        return Err(CliError::Assertion(format!(
            "stability at step {i}: lhs = {lhs:e} > rhs = {:e}",
            stability.rhs * (1.0 + tvflow_core::analysis::STABILITY_SLACK)
        )));
    }
    println!("PASS stability against a twin perturbed by {delta:e}");

    let grid = prob.grid();
    let r = 1.0;
    let c_r = trace_inequality_check(grid, r, setup.trace_samples, setup.seed);
    let c_2r = trace_inequality_check(grid, 2.0 * r, setup.trace_samples, setup.seed);
    let floor = grid.boundary_measure() / grid.domain_measure();
    if !(c_r.is_finite() && c_2r.is_finite()) {
        return Err(CliError::Assertion(format!("trace constant is not finite: C_r = {c_r:e}")));
    }
    if c_2r > c_r {
        return Err(CliError::Assertion(format!("trace monotonicity: C_2r = {c_2r:e} > C_r = {c_r:e}")));
    }
    if c_r < floor * (1.0 - 1e-12) {
        return Err(CliError::Assertion(format!("trace floor: |Γ|/|Ω| = {floor:e} > C_r = {c_r:e}")));
    }
    println!("PASS trace inequality (C_r = {c_r:e}, C_2r = {c_2r:e})");

    let dir = &setup.output_dir;
    create_dir(dir)?;
    report::estimate_table(&report).save(&dir.join("estimate.csv"))?;
    report::checks_table(&report).save(&dir.join("checks.csv"))?;
    report::constants_table(&report).save(&dir.join("constants.csv"))?;
    report::stability_table(&stability, result.tau).save(&dir.join("stability.csv"))?;
    Ok(VerifyOutcome {
        report,
        stability,
        trace: TraceOutcome { r, c_r, c_2r, floor },
    })
}

pub fn verify(config: &Path) -> CliResult<VerifyOutcome> {
    verify_setup(&RunSetup::load(config)?)
}

#[derive(Clone, Debug)]
pub struct DenoiseOptions {
    pub eps: f64,
    pub tau: f64,
    pub steps: usize,
    /// A constant weight or `edge-stop:<sigma>`.
    pub alpha: String,
    pub beta: f64,
    pub tol_rel: f64,
}

impl Default for DenoiseOptions {
    fn default() -> Self {
        DenoiseOptions {
            eps: 0.05,
            tau: 0.1,
            steps: 20,
            alpha: "1".into(),
            beta: 0.1,
            tol_rel: SolverConfig::default().tol_rel,
        }
    }
}

#[derive(Debug)]
pub struct DenoiseOutcome {
    pub input: ImageDatum,
    pub output: ImageDatum,
    pub energies: Vec<f64>,
    pub report: EstimateReport,
}

pub fn denoise_image(img: &ImageDatum, opts: &DenoiseOptions) -> CliResult<(ImageDatum, FlowResult, FlowProblem)> {
    let u0 = img.to_field().map_err(|e| CliError::Config(e.to_string()))?;
    let g = *u0.grid();
    let alpha = match opts.alpha.parse::<f64>() {
        Ok(a) => ScalarField::constant(g, a),
        Err(_) => match opts.alpha.strip_prefix("edge-stop:").and_then(|s| s.parse().ok()) {
            Some(sigma) => edge_stop(&u0, sigma)?,
            None => return Err(CliError::Config(format!("alpha mode `{}`: expected a number or edge-stop:<sigma>", opts.alpha))),
        },
    };
    let eps = Epsilon::new(opts.eps).map_err(|e| CliError::Config(e.to_string()))?;
    if opts.eps == 0.0 || opts.steps == 0 {
        return Err(CliError::Config("denoise needs eps > 0 and at least one step".into()));
    }
    let prob = FlowProblem::new(
        u0,
        alpha,
        ScalarField::constant(g, opts.beta),
        Forcing::Zero,
        opts.steps as f64 * opts.tau,
        opts.tau,
        eps,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = SolverConfig {
        tol_rel: opts.tol_rel,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let result = run_flow(&prob, &cfg)?;
    let out = ImageDatum::from_field(result.states.last().expect("nonempty"), img.maxval).expect("same shape");
    Ok((out, result, prob))
}

/// Denoises `input`, writes the result to `output` and the dissipation
/// ledger to `report_path`, and asserts that `Φ_ε(∇u_i)` never increases
/// beyond solver slack.
pub fn denoise(input: &Path, output: &Path, report_path: &Path, opts: &DenoiseOptions) -> CliResult<DenoiseOutcome> {
    let img = read_pgm(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let (out, result, prob) = denoise_image(&img, opts)?;
    let report = energy_ledger(&result, &prob)?;
    let slack = LedgerOptions::default().slack_factor;
    if let Some(dir) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    report::dissipation_table(&result, &prob, &report, slack).save(report_path)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_pgm(output, &out).map_err(|e| CliError::io(output, e))?;
    let energies = report::energies(&result, &prob);
    for (i, w) in energies.windows(2).enumerate() {
        let allowance = slack * report.rows[i + 1].residual_target;
        if w[1] > w[0] + allowance {
            return Err(CliError::Assertion(format!(
                "energy at step {}: lhs = {:e} > rhs = {:e}",
                i + 1,
                w[1],
                w[0] + allowance
            )));
        }
    }
    if let Some(c) = report.first_violation().filter(|c| c.name == tvflow_core::analysis::DISSIPATION) {
        return Err(CliError::Assertion(describe(c)));
    }
    Ok(DenoiseOutcome {
        input: img,
        output: out,
        energies,
        report,
    })
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))
}

#[derive(Debug)]
pub struct SweepRun {
    pub value: String,
    pub output_dir: PathBuf,
    pub outcome: CliResult<SolveOutcome>,
}

/// Solves one run per value of `key`, each writing to
/// `<output-dir>/<key>=<value>`, and summarises them in
/// `<output-dir>/sweep.csv`.
pub fn sweep(config: &Path, key: &str, values: &[String], jobs: usize) -> CliResult<Vec<SweepRun>> {
    let base = RunConfig::load(config)?;
    let root = base.resolve(base.get("output-dir").unwrap_or("tvflow-out"));
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let mut setups = Vec::with_capacity(values.len());
    for v in values {
        let mut cfg = base.clone();
        cfg.set(key, v)?;
        let dir = root.join(format!("{key}={v}"));
        cfg.set("output-dir", dir.to_str().ok_or_else(|| CliError::Config("non-UTF-8 output path".into()))?)?;
        setups.push(RunSetup::from_config(&cfg)?);
    }
    let outcomes: Vec<_> = pool(jobs)?.install(|| setups.par_iter().map(solve_setup).collect());
    create_dir(&root)?;
    let mut t = Table::new(&[key, "status", "steps", "final_energy", "ledger_holds"]);
    let runs: Vec<SweepRun> = values
        .iter()
        .zip(setups)
        .zip(outcomes)
        .map(|((v, s), outcome)| SweepRun {
            value: v.clone(),
            output_dir: s.output_dir,
            outcome,
        })
        .collect();
    for r in &runs {
        match &r.outcome {
            Ok(o) => {
                t.row([
                    r.value.clone(),
                    "ok".into(),
                    o.result.n_steps().to_string(),
                    report::num(*o.energies.last().expect("nonempty")),
                    o.report.asserted_hold().to_string(),
                ]);
            }
            Err(e) => t.row([r.value.clone(), format!("exit {}", e.exit_code()), String::new(), String::new(), String::new()]),
        }
    }
    t.save(&root.join("sweep.csv"))?;
    Ok(runs)
}

/// Self-convergence study over `levels` of `axis`, runs in parallel; writes
/// `<output-dir>/study.csv`.
pub fn study(config: &Path, axis: StudyAxis, levels: &[f64], jobs: usize) -> CliResult<ConvergenceStudy> {
    let setup = RunSetup::load(config)?;
    validate_levels(levels).map_err(|e| CliError::Config(e.to_string()))?;
    if axis == StudyAxis::Tau && setup.mode != Mode::Regular {
        return Err(CliError::Config("a tau study needs eps > 0".into()));
    }
    let probs = levels
        .iter()
        .map(|&l| level_problem(axis, &setup.problem, l).map_err(|e| CliError::Config(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    let runs = pool(jobs)?.install(|| probs.par_iter().map(|p| run_flow(p, &setup.solver)).collect::<Result<Vec<_>, _>>())?;
    let study = study_from_runs(axis, levels, &runs)?;
    create_dir(&setup.output_dir)?;
    report::study_table(&study).save(&setup.output_dir.join("study.csv"))?;
    Ok(study)
}
