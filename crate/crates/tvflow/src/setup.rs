//! Turning a [`RunConfig`] into a flow problem, solver settings and outputs.

use std::path::{Path, PathBuf};

use tvflow_core::calculus::{gradient, laplacian};
use tvflow_core::convex::Epsilon;
use tvflow_core::elliptic::SolverConfig;
use tvflow_core::flow::{default_schedule, run_flow, run_singular_flow, FlowProblem, FlowResult, Forcing};
use tvflow_core::{Grid, ScalarField};

use crate::config::RunConfig;
use crate::fieldio::load_field;
use crate::pgm::read_pgm;
use crate::{CliError, CliResult};

/// How ε enters the run.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Regular,
    /// ε = 0, approximated by continuation over `schedule`.
    Singular { schedule: Vec<f64>, tol_limit: f64 },
}

#[derive(Clone, Debug)]
pub struct RunSetup {
    pub problem: FlowProblem,
    pub solver: SolverConfig,
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub save_every: usize,
    pub seed: u64,
    /// Size of the random initial perturbation used by `verify`.
    pub perturbation: f64,
    pub trace_samples: usize,
    /// Stored trajectory to verify instead of running the flow.
    pub trajectory: Option<PathBuf>,
}

fn config_err(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("key `{key}`: {e}"))
}

fn load_input_field(cfg: &RunConfig, key: &str, value: &str) -> CliResult<ScalarField> {
    let path = cfg.resolve(value);
    load_field(&path).map_err(|e| config_err(key, format!("{}: {e}", path.display())))
}

fn grid_from_keys(cfg: &RunConfig) -> CliResult<Grid> {
    let dim: usize = cfg.required_value("dim")?;
    let n: Vec<usize> = cfg.list("n")?.ok_or_else(|| CliError::Config("missing required key `n`".into()))?;
    let l: Vec<f64> = cfg.list("L")?.unwrap_or_else(|| vec![1.0; dim]);
    if n.len() != dim || l.len() != dim {
        return Err(CliError::Config(format!("keys `n` and `L` need {dim} entries for dim = {dim}")));
    }
    Grid::new(&n, &l).map_err(|e| config_err("n", e))
}

/// Smooths `u` with a few explicit heat steps, then maps
/// `α = 1/(1 + |∇u_s|²/σ²)`.
pub fn edge_stop(u: &ScalarField, sigma: f64) -> CliResult<ScalarField> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(config_err("alpha", "edge-stop σ must be positive"));
    }
    let g = *u.grid();
    let h2 = g.spacing().iter().fold(f64::INFINITY, |a, h| a.min(h * h));
    let step = 0.2 * h2 / g.dim() as f64;
    let mut s = u.clone();
    for _ in 0..4 {
        s = s.axpy(step, &laplacian(&s));
    }
    let w = gradient(&s);
    let vals = (0..g.cell_count())
        .map(|j| {
            let y = w.at(j);
            1.0 / (1.0 + (y[0] * y[0] + y[1] * y[1]) / (sigma * sigma))
        })
        .collect();
    Ok(ScalarField::new(g, vals)?)
}

fn initial_state(cfg: &RunConfig) -> CliResult<ScalarField> {
    let spec = cfg.require("u0")?;
    match spec {
        "preset:step" | "preset:sine" => {
            let g = grid_from_keys(cfg)?;
            let l = g.extents()[0];
            let f = |x: [f64; 2]| match spec {
                "preset:step" => f64::from(u8::from(x[0] >= 0.5 * l)),
                _ => (2.0 * std::f64::consts::PI * x[0] / l).sin(),
            };
            Ok(ScalarField::from_fn(g, f)?)
        }
        "preset:image" => {
            let path = cfg.resolve(cfg.require("image")?);
            let img = read_pgm(&path).map_err(|e| config_err("image", format!("{}: {e}", path.display())))?;
            let u = img.to_field().map_err(|e| config_err("image", e))?;
            match cfg.list::<f64>("L")? {
                None => Ok(u),
                Some(l) if l.len() == 2 => {
                    let g = Grid::new_2d(img.width, img.height, l[0], l[1]).map_err(|e| config_err("L", e))?;
                    Ok(ScalarField::new(g, u.into_values())?)
                }
                Some(_) => Err(config_err("L", "an image grid needs two extents")),
            }
        }
        other if other.starts_with("preset:") => Err(config_err("u0", format!("unknown preset `{other}`"))),
        path => {
            let u = load_input_field(cfg, "u0", path)?;
            if cfg.get("n").is_some() && grid_from_keys(cfg)? != *u.grid() {
                return Err(config_err("u0", "field grid disagrees with `dim`, `n`, `L`"));
            }
            Ok(u)
        }
    }
}

fn coefficient(cfg: &RunConfig, key: &str, u0: &ScalarField) -> CliResult<ScalarField> {
    let spec = cfg.require(key)?;
    let g = *u0.grid();
    if let Ok(c) = spec.parse::<f64>() {
        return Ok(ScalarField::constant(g, c));
    }
    if let Some(sigma) = spec.strip_prefix("edge-stop:").filter(|_| key == "alpha") {
        let sigma = sigma.parse().map_err(|_| config_err(key, format!("cannot parse σ in `{spec}`")))?;
        return edge_stop(u0, sigma);
    }
    let field = load_input_field(cfg, key, spec)?;
    if *field.grid() != g {
        return Err(config_err(key, "field grid disagrees with u0"));
    }
    Ok(field)
}

fn forcing(cfg: &RunConfig, grid: &Grid, tau: f64) -> CliResult<Forcing> {
    let spec = match cfg.get("f") {
        None | Some("zero") => return Ok(Forcing::Zero),
        Some(s) => s,
    };
    if let Ok(c) = spec.parse::<f64>() {
        return Ok(Forcing::Constant(ScalarField::constant(*grid, c)));
    }
    let mut fields = Vec::new();
    for p in spec.split(',') {
        let f = load_input_field(cfg, "f", p.trim())?;
        if f.grid() != grid {
            return Err(config_err("f", format!("{} lives on a different grid", p.trim())));
        }
        fields.push(f);
    }
    if fields.len() == 1 && cfg.get("f-period").is_none() {
        return Ok(Forcing::Constant(fields.pop().expect("one field")));
    }
    let period = cfg.parse_value("f-period")?.unwrap_or(tau);
    Ok(Forcing::Samples { period, fields })
}

fn solver(cfg: &RunConfig) -> CliResult<SolverConfig> {
    let d = SolverConfig::default();
    let s = SolverConfig {
        tol_rel: cfg.parse_value("tol-rel")?.unwrap_or(d.tol_rel),
        max_newton: cfg.parse_value("max-newton")?.unwrap_or(d.max_newton),
        max_cg: cfg.parse_value("max-cg")?.or(d.max_cg),
        ..d
    };
    s.validate().map_err(|e| config_err("tol-rel", e))?;
    Ok(s)
}

fn mode(cfg: &RunConfig, eps: f64) -> CliResult<Mode> {
    let continuation = ["eps-schedule", "eps-levels", "tol-limit"];
    if eps > 0.0 {
        if let Some(k) = continuation.iter().find(|k| cfg.get(k).is_some()) {
            return Err(config_err(k, "continuation keys require eps = 0"));
        }
        return Ok(Mode::Regular);
    }
    let schedule = match cfg.list::<f64>("eps-schedule")? {
        Some(s) => s,
        None => default_schedule(cfg.parse_value("eps-levels")?.unwrap_or(12)),
    };
    let tol_limit = cfg.parse_value("tol-limit")?.unwrap_or(1e-4);
    Ok(Mode::Singular { schedule, tol_limit })
}

impl RunSetup {
    pub fn from_config(cfg: &RunConfig) -> CliResult<Self> {
        let u0 = initial_state(cfg)?;
        let alpha = coefficient(cfg, "alpha", &u0)?;
        let beta = coefficient(cfg, "beta", &u0)?;
        let t_final: f64 = cfg.required_value("T")?;
        let tau: f64 = cfg.required_value("tau")?;
        let eps_value: f64 = cfg.required_value("eps")?;
        let eps = Epsilon::new(eps_value).map_err(|e| config_err("eps", e))?;
        let forcing = forcing(cfg, u0.grid(), tau)?;
        let problem = FlowProblem::new(u0, alpha, beta, forcing, t_final, tau, eps).map_err(|e| CliError::Config(e.to_string()))?;
        let save_every: usize = cfg.parse_value("save-every")?.unwrap_or(1);
        if save_every == 0 {
            return Err(config_err("save-every", "must be at least 1"));
        }
        let perturbation: f64 = cfg.parse_value("perturbation")?.unwrap_or(1e-3);
        if !(perturbation.is_finite() && perturbation > 0.0) {
            return Err(config_err("perturbation", "must be positive"));
        }
        Ok(RunSetup {
            solver: solver(cfg)?,
            mode: mode(cfg, eps_value)?,
            output_dir: cfg.resolve(cfg.get("output-dir").unwrap_or("tvflow-out")),
            save_every,
            seed: cfg.parse_value("seed")?.unwrap_or(0),
            perturbation,
            trace_samples: cfg.parse_value("trace-samples")?.unwrap_or(32),
            trajectory: cfg.get("trajectory").map(|t| cfg.resolve(t)),
            problem,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_config(&RunConfig::load(path)?)
    }

    /// Runs the configured flow for `problem`, which may differ from
    /// `self.problem` in its data.
    pub fn run(&self, problem: &FlowProblem) -> CliResult<FlowResult> {
        Ok(match &self.mode {
            Mode::Regular => run_flow(problem, &self.solver)?,
            Mode::Singular { schedule, tol_limit } => run_singular_flow(problem, schedule, *tol_limit, &self.solver)?,
        })
    }

    /// The problem at the ε the result was computed with, for the ledger.
    pub fn problem_for(&self, result: &FlowResult) -> FlowProblem {
        FlowProblem {
            eps: result.eps,
            ..self.problem.clone()
        }
    }
}
