//! Post-processing of trajectories: the energy ledger with its a priori
//! bounds, sampled embedding and trace constants, stability of the scheme
//! under data perturbations, Mosco probes, and convergence studies.

mod constants;
mod ledger;
mod mosco;
mod sampling;
mod stability;
mod study;

pub use constants::{c1, c3, c4, constants, estimate_c0, trace_inequality_check, ConstantInputs, ConstantOptions, Constants};
pub use ledger::{
    energy_ledger, energy_ledger_with, Check, EstimateReport, LedgerOptions, LedgerRow, DISSIPATION,
    GRONWALL_BOUND, GRONWALL_PREMISE, H2_BOUND, H2_INCREMENT_BOUND, INCREMENT_BOUND, STEP_RESIDUAL, V_BOUND,
};
pub use mosco::{mosco_probe, phi_excess, MoscoReport};
pub use sampling::probe_fields;
pub use stability::{stability_gap, StabilityReport, STABILITY_SLACK};
pub use study::{convergence_study, interpolated_gap, level_problem, study_from_runs, validate_levels, ConvergenceStudy, StudyAxis};
