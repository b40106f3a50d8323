mod common;

use std::sync::Arc;

use common::{random_field, rng};
use tvflow_core::calculus::gradient;
use tvflow_core::convex::{phi, Epsilon};
use tvflow_core::elliptic::SolverConfig;
use tvflow_core::flow::{
    default_schedule, run_flow, run_singular_flow, step_ap, trajectory_gap, FlowProblem, FlowResult, Forcing,
};
use tvflow_core::norms::grad_linf;
use tvflow_core::{Error, Grid, ScalarField};

fn eps(v: f64) -> Epsilon {
    Epsilon::new(v).unwrap()
}

fn step_datum(g: Grid) -> ScalarField {
    ScalarField::from_fn(g, |x| if x[0] < 0.5 { 0.0 } else { 1.0 }).unwrap()
}

fn problem(u0: ScalarField, alpha: f64, beta: f64, t: f64, tau: f64, e: f64) -> FlowProblem {
    let g = *u0.grid();
    FlowProblem::new(
        u0,
        ScalarField::constant(g, alpha),
        ScalarField::constant(g, beta),
        Forcing::Zero,
        t,
        tau,
        eps(e),
    )
    .unwrap()
}

#[test]
fn constants_are_preserved() {
    let mut r = rng(4);
    let g = Grid::new_2d(9, 7, 1.0, 1.0).unwrap();
    let prob = FlowProblem::new(
        ScalarField::constant(g, -0.75),
        random_field(g, &mut r, 0.0, 2.0),
        random_field(g, &mut r, 0.2, 1.0),
        Forcing::Zero,
        1.0,
        0.1,
        eps(0.05),
    )
    .unwrap();
    let res = run_flow(&prob, &SolverConfig::default()).unwrap();
    for s in &res.states {
        assert!(s.values().iter().all(|v| (v + 0.75).abs() <= 1e-12));
    }
    let single = step_ap(&prob.u0, &ScalarField::zeros(g), &prob, &SolverConfig::default()).unwrap();
    assert!(single.u.values().iter().all(|v| (v + 0.75).abs() <= 1e-12));
}

#[test]
fn initial_state_is_kept_bit_exact() {
    let mut r = rng(9);
    let g = Grid::new_1d(20, 1.0).unwrap();
    let u0 = random_field(g, &mut r, -1.0, 1.0);
    let res = run_flow(&problem(u0.clone(), 1.0, 0.5, 0.5, 0.1, 0.1), &SolverConfig::default()).unwrap();
    assert_eq!(res.states[0].values(), u0.values());
    assert_eq!(res.states.len(), 6);
    assert!(res.states.iter().all(|s| s.values().iter().all(|v| v.is_finite())));
}

#[test]
fn unforced_energy_is_nonincreasing() {
    let mut r = rng(17);
    for g in [Grid::new_1d(40, 1.0).unwrap(), Grid::new_2d(12, 10, 1.0, 1.0).unwrap()] {
        let u0 = random_field(g, &mut r, 0.0, 1.0);
        let prob = FlowProblem::new(
            u0,
            random_field(g, &mut r, 0.5, 1.5),
            ScalarField::constant(g, 0.3),
            Forcing::Zero,
            0.5,
            0.05,
            eps(0.02),
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let res = run_flow(&prob, &cfg).unwrap();
        let energies: Vec<f64> = res.states.iter().map(|u| phi(prob.eps, &prob.alpha, &gradient(u))).collect();
        for (i, w) in energies.windows(2).enumerate() {
            let slack = 10.0 * res.steps[i].target;
            assert!(w[1] <= w[0] + slack, "step {}: {} > {}", i + 1, w[1], w[0]);
        }
    }
}

#[test]
fn step_failure_returns_partial_trajectory() {
    let g = Grid::new_1d(32, 1.0).unwrap();
    let prob = problem(step_datum(g), 1.0, 0.01, 1.0, 0.1, 1e-4);
    let cfg = SolverConfig {
        max_newton: 2,
        ..SolverConfig::default()
    };
    match run_flow(&prob, &cfg) {
        Err(Error::StepFailed { step, partial, source }) => {
            assert_eq!(partial.states.len(), step);
            assert!(matches!(*source, Error::NotConverged { .. } | Error::LineSearchFailed { .. }));
        }
        other => panic!("expected a step failure, got {:?}", other.map(|r| r.n_steps())),
    }
}

#[test]
fn horizon_rounds_up_to_whole_steps() {
    let g = Grid::new_1d(8, 1.0).unwrap();
    let prob = problem(step_datum(g), 1.0, 1.0, 1.0, 0.3, 0.1);
    assert_eq!(prob.steps(), 4);
    assert!((prob.horizon() - 1.2).abs() < 1e-15);
    let res = run_flow(&prob, &SolverConfig::default()).unwrap();
    assert_eq!(res.n_steps(), 4);
    assert!((res.horizon() - 1.2).abs() < 1e-15);
}

fn smooth_problem(tau: f64) -> FlowProblem {
    let g = Grid::new_1d(48, 1.0).unwrap();
    let u0 = ScalarField::from_fn(g, |x| (std::f64::consts::PI * x[0]).cos()).unwrap();
    problem(u0, 1.0, 0.5, 1.0, tau, 0.1)
}

fn gap_v(a: &FlowResult, b: &FlowResult) -> f64 {
    tvflow_core::analysis::interpolated_gap(a, b).unwrap()
}

#[test]
fn halving_tau_halves_the_self_convergence_gap() {
    let cfg = SolverConfig::default();
    let runs: Vec<_> = [0.1, 0.05, 0.025].iter().map(|&t| run_flow(&smooth_problem(t), &cfg).unwrap()).collect();
    let g1 = gap_v(&runs[0], &runs[1]);
    let g2 = gap_v(&runs[1], &runs[2]);
    let ratio = g1 / g2;
    assert!((1.6..2.5).contains(&ratio), "gap ratio {ratio}");
}

#[test]
fn linear_scheme_is_exact_at_nodes() {
    // With α ≡ 0 the scheme integrates (I + βA)∂ₜu = f with exact interval
    // means, so coarse and fine runs agree at every common node.
    let g = Grid::new_1d(24, 1.0).unwrap();
    let shape = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin()).unwrap();
    let f = Forcing::Function(Arc::new(move |t: f64| shape.scale((4.0 * t).cos())));
    let mk = |tau: f64| {
        FlowProblem::new(ScalarField::zeros(g), ScalarField::zeros(g), ScalarField::constant(g, 0.5), f.clone(), 1.0, tau, eps(0.1)).unwrap()
    };
    let cfg = SolverConfig {
        tol_rel: 1e-13,
        ..SolverConfig::default()
    };
    let coarse = run_flow(&mk(0.1), &cfg).unwrap();
    let fine = run_flow(&mk(0.05), &cfg).unwrap();
    let nodes: Vec<_> = (0..=10).map(|i| fine.states[2 * i].clone()).collect();
    assert!(trajectory_gap(&coarse.states, &nodes) < 1e-10);
}

#[test]
fn singular_flow_with_constant_datum_stops_at_first_refinement() {
    let g = Grid::new_1d(16, 1.0).unwrap();
    let prob = problem(ScalarField::constant(g, 2.0), 1.0, 1.0, 1.0, 0.1, 0.0);
    let res = run_singular_flow(&prob, &default_schedule(12), 1e-6, &SolverConfig::default()).unwrap();
    let trace = res.eps_trace.as_ref().unwrap();
    assert_eq!(trace.levels.len(), 2);
    assert_eq!(trace.gaps[0], 0.0);
    assert!(res.selection.as_ref().unwrap().max_norm <= 1.0);
}

#[test]
fn singular_flow_without_weight_ignores_eps() {
    let mut r = rng(3);
    let g = Grid::new_1d(16, 1.0).unwrap();
    let prob = problem(random_field(g, &mut r, -1.0, 1.0), 0.0, 1.0, 1.0, 0.1, 0.0);
    let res = run_singular_flow(&prob, &default_schedule(12), 1e-12, &SolverConfig::default()).unwrap();
    assert_eq!(res.eps_trace.as_ref().unwrap().gaps, vec![0.0]);
}

#[test]
fn step_datum_selection_follows_the_sign() {
    let g = Grid::new_1d(64, 1.0).unwrap();
    let prob = problem(step_datum(g), 1.0, 0.1, 1.0, 0.05, 0.0);
    let res = run_singular_flow(&prob, &default_schedule(12), 1e-4, &SolverConfig::default()).unwrap();
    let trace = res.eps_trace.as_ref().unwrap();
    let eps_k = *trace.levels.last().unwrap();
    let sel = res.selection.as_ref().unwrap();
    assert!(sel.max_norm <= 1.0);
    for (i, u) in res.states.iter().enumerate().skip(1) {
        let w = gradient(u);
        for (j, &s) in sel.sgn_residuals[i - 1].iter().enumerate() {
            let slope = w.at(j)[0].abs();
            if slope >= 0.1 {
                assert!(s <= eps_k / slope, "step {i} cell {j}: {s:e}");
            }
        }
    }
    // Later levels approach each other.
    assert!(trace.gaps.windows(2).last().map_or(true, |w| w[1] < w[0]));
    assert!(grad_linf(&res.states[res.n_steps()]) > 0.1);
}

#[test]
fn exhausted_schedule_reports_the_achieved_gap() {
    let g = Grid::new_1d(32, 1.0).unwrap();
    let prob = problem(step_datum(g), 1.0, 0.01, 1.0, 0.05, 0.0);
    match run_singular_flow(&prob, &[1.0, 0.5, 0.25], 1e-8, &SolverConfig::default()) {
        Err(Error::ScheduleExhausted { achieved_gap, last_eps, limit }) => {
            assert!(achieved_gap > limit);
            assert_eq!(last_eps, 0.25);
        }
        other => panic!("expected exhaustion, got {:?}", other.map(|r| r.n_steps())),
    }
}
