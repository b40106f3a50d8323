//! Damped Newton with Jacobi-preconditioned CG for the elliptic problem
//!
//! ```text
//! α° u − div(α ∇γ_ε(∇u) + β ∇u) = f°,   ∇u·n = 0,
//! ```
//!
//! posed as minimisation of the strictly convex energy
//! [`upsilon`](crate::convex::upsilon), together with the biharmonic
//! relaxation that adds `(κ/2)|Δu|²`. Each Newton system
//! `α° I + Gᵀ diag(α ∇²γ_ε(∇u) + β I) G (+ κ Δ²)` is symmetric positive
//! definite, and steps are globalised by Armijo backtracking on the energy.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::calculus::{div_raw, grad_raw, hessian_sq_raw, laplacian_raw};
use crate::convex::{CoefficientSet, Epsilon};
use crate::field::{dot, ScalarField, VectorField};
use crate::grid::Grid;
use crate::norms::{h_norm, h_norm_sq, v_norm_sq};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Newton stops once `|r(u)|_H ≤ tol_rel · (1 + |f°|_H)`.
    pub tol_rel: f64,
    pub max_newton: usize,
    /// Inner CG cap; `None` means ten times the cell count.
    pub max_cg: Option<usize>,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_rel: 1e-10,
            max_newton: 100,
            max_cg: None,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0 && self.tol_rel < 1.0) {
            return Err(Error::InvalidParameter("tol_rel must lie in (0, 1)"));
        }
        if self.max_newton == 0 || self.max_cg == Some(0) {
            return Err(Error::InvalidParameter("iteration caps must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter("backtracking factor must lie in (0, 1)"));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 0.5) {
            return Err(Error::InvalidParameter("sufficient decrease must lie in (0, 1/2)"));
        }
        Ok(())
    }

    pub fn residual_target(&self, f_circ: &ScalarField) -> f64 {
        self.tol_rel * (1.0 + h_norm(f_circ))
    }
}

/// One row of the Newton diagnostics stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
    pub step_length: f64,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct EllipticSolution {
    pub u: ScalarField,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub energy: f64,
    pub history: Vec<NewtonRecord>,
}

impl EllipticSolution {
    /// `δ₀|u|²_V ≤ |f°|²_H / δ₀`, which every minimiser satisfies.
    pub fn v_bound(&self, coeffs: &CoefficientSet) -> (f64, f64) {
        let d0 = coeffs.delta0();
        (d0 * v_norm_sq(&self.u), h_norm_sq(coeffs.f_circ()) / d0)
    }
}

struct Energy<'a> {
    grid: Grid,
    eps: f64,
    alpha: &'a [f64],
    beta: &'a [f64],
    alpha_circ: &'a [f64],
    f_circ: &'a [f64],
    kappa: f64,
    measure: f64,
}

/// Per-cell symmetric 2×2 blocks `α ∇²γ_ε + β I`.
struct Blocks {
    d00: Vec<f64>,
    d01: Vec<f64>,
    d11: Vec<f64>,
}

struct Workspace {
    grad: Vec<f64>,
    flux: Vec<f64>,
    cell: Vec<f64>,
    cell2: Vec<f64>,
}

impl Workspace {
    fn new(grid: &Grid) -> Self {
        let n = grid.cell_count();
        Workspace {
            grad: vec![0.0; n * grid.dim()],
            flux: vec![0.0; n * grid.dim()],
            cell: vec![0.0; n],
            cell2: vec![0.0; n],
        }
    }
}

impl<'a> Energy<'a> {
    fn new(eps: f64, coeffs: &'a CoefficientSet, kappa: f64) -> Self {
        let grid = *coeffs.alpha().grid();
        Energy {
            grid,
            eps,
            alpha: coeffs.alpha().values(),
            beta: coeffs.beta().values(),
            alpha_circ: coeffs.alpha_circ().values(),
            f_circ: coeffs.f_circ().values(),
            kappa,
            measure: grid.cell_measure(),
        }
    }

    fn n(&self) -> usize {
        self.grid.cell_count()
    }

    #[inline]
    fn grad_at(&self, g: &[f64], j: usize) -> [f64; 2] {
        let n = self.n();
        if self.grid.dim() == 2 {
            [g[j], g[n + j]]
        } else {
            [g[j], 0.0]
        }
    }

    fn value(&self, z: &[f64], ws: &mut Workspace) -> f64 {
        grad_raw(&self.grid, z, &mut ws.grad);
        let e2 = self.eps * self.eps;
        let mut s = 0.0;
        for j in 0..self.n() {
            let y = self.grad_at(&ws.grad, j);
            let y2 = y[0] * y[0] + y[1] * y[1];
            s += self.alpha[j] * sqrt(e2 + y2) + 0.5 * self.beta[j] * y2
                + 0.5 * self.alpha_circ[j] * z[j] * z[j]
                - self.f_circ[j] * z[j];
        }
        if self.kappa > 0.0 {
            laplacian_raw(&self.grid, z, &mut ws.flux, &mut ws.cell);
            s += 0.5 * self.kappa * dot(&ws.cell, &ws.cell);
        }
        self.measure * s
    }

    /// `r = α°z − f° − div(α∇γ_ε(∇z) + β∇z) (+ κΔ²z)`; returns `|r|_H`.
    fn residual(&self, z: &[f64], out: &mut [f64], ws: &mut Workspace) -> f64 {
        let n = self.n();
        grad_raw(&self.grid, z, &mut ws.grad);
        let e2 = self.eps * self.eps;
        for j in 0..n {
            let y = self.grad_at(&ws.grad, j);
            let g = sqrt(e2 + y[0] * y[0] + y[1] * y[1]);
            let c = self.alpha[j] / g + self.beta[j];
            for k in 0..self.grid.dim() {
                ws.flux[k * n + j] = c * ws.grad[k * n + j];
            }
        }
        div_raw(&self.grid, &ws.flux, &mut ws.cell);
        for j in 0..n {
            out[j] = self.alpha_circ[j] * z[j] - self.f_circ[j] - ws.cell[j];
        }
        if self.kappa > 0.0 {
            laplacian_raw(&self.grid, z, &mut ws.flux, &mut ws.cell);
            laplacian_raw(&self.grid, &ws.cell, &mut ws.flux, &mut ws.cell2);
            for j in 0..n {
                out[j] += self.kappa * ws.cell2[j];
            }
        }
        sqrt(self.measure * dot(out, out))
    }

    fn blocks(&self, z: &[f64], ws: &mut Workspace) -> Blocks {
        let n = self.n();
        grad_raw(&self.grid, z, &mut ws.grad);
        let e2 = self.eps * self.eps;
        let mut b = Blocks {
            d00: vec![0.0; n],
            d01: vec![0.0; n],
            d11: vec![0.0; n],
        };
        for j in 0..n {
            let y = self.grad_at(&ws.grad, j);
            let g2 = e2 + y[0] * y[0] + y[1] * y[1];
            let ag = self.alpha[j] / sqrt(g2);
            b.d00[j] = ag * (1.0 - y[0] * y[0] / g2) + self.beta[j];
            b.d01[j] = -ag * y[0] * y[1] / g2;
            b.d11[j] = ag * (1.0 - y[1] * y[1] / g2) + self.beta[j];
        }
        b
    }

    fn apply_hessian(&self, b: &Blocks, v: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let n = self.n();
        grad_raw(&self.grid, v, &mut ws.grad);
        if self.grid.dim() == 2 {
            for j in 0..n {
                let (g0, g1) = (ws.grad[j], ws.grad[n + j]);
                ws.flux[j] = b.d00[j] * g0 + b.d01[j] * g1;
                ws.flux[n + j] = b.d01[j] * g0 + b.d11[j] * g1;
            }
        } else {
            for j in 0..n {
                ws.flux[j] = b.d00[j] * ws.grad[j];
            }
        }
        // Last-layer flux entries are ignored by the divergence.
        div_raw(&self.grid, &ws.flux, &mut ws.cell);
        for j in 0..n {
            out[j] = self.alpha_circ[j] * v[j] - ws.cell[j];
        }
        if self.kappa > 0.0 {
            laplacian_raw(&self.grid, v, &mut ws.flux, &mut ws.cell);
            laplacian_raw(&self.grid, &ws.cell, &mut ws.flux, &mut ws.cell2);
            for j in 0..n {
                out[j] += self.kappa * ws.cell2[j];
            }
        }
    }

    fn diagonal(&self, b: &Blocks) -> Vec<f64> {
        let g = &self.grid;
        let n = self.n();
        let dim = g.dim();
        let h = g.spacing();
        let mut diag = self.alpha_circ.to_vec();
        for (p, d) in diag.iter_mut().enumerate() {
            let mut interior_all = true;
            for k in 0..dim {
                let idx = g.axis_index(p, k);
                let last = g.counts()[k] - 1;
                let dkk = if k == 0 { &b.d00 } else { &b.d11 };
                let h2 = h[k] * h[k];
                if idx < last {
                    *d += dkk[p] / h2;
                } else {
                    interior_all = false;
                }
                if idx > 0 {
                    *d += dkk[p - g.stride(k)] / h2;
                }
            }
            if dim == 2 && interior_all {
                *d += 2.0 * b.d01[p] / (h[0] * h[1]);
            }
            if self.kappa > 0.0 {
                let mut lpp = 0.0;
                let mut off = 0.0;
                for k in 0..dim {
                    let idx = g.axis_index(p, k);
                    let nb = (idx > 0) as usize + (idx + 1 < g.counts()[k]) as usize;
                    let h2 = h[k] * h[k];
                    lpp -= nb as f64 / h2;
                    off += nb as f64 / (h2 * h2);
                }
                *d += self.kappa * (lpp * lpp + off);
            }
        }
        debug_assert_eq!(diag.len(), n);
        diag
    }
}

/// Preconditioned CG for `A x = b` from `x = 0`; returns the iteration count.
fn pcg(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> usize {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while it < max_iter && sqrt(dot(&r, &r)) > tol {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let a = rz / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    it
}

fn newton(
    energy: &Energy<'_>,
    cfg: &SolverConfig,
    guess: &[f64],
    f_norm: f64,
) -> Result<EllipticSolution> {
    cfg.validate()?;
    let n = energy.n();
    let grid = energy.grid;
    let m = energy.measure;
    let target = cfg.tol_rel * (1.0 + f_norm);
    let max_cg = cfg.max_cg.unwrap_or(10 * n);
    let mut ws = Workspace::new(&grid);

    let mut u = guess.to_vec();
    let mut r = vec![0.0; n];
    let mut rn = energy.residual(&u, &mut r, &mut ws);
    let mut e = energy.value(&u, &mut ws);
    let mut history = vec![NewtonRecord {
        iteration: 0,
        energy: e,
        residual: rn,
        step_length: 0.0,
        cg_iterations: 0,
    }];

    let mut p = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let mut it = 0;
    while rn > target {
        if it == cfg.max_newton {
            return Err(Error::NotConverged {
                iterations: it,
                residual: rn,
                target,
            });
        }
        it += 1;

        let blocks = energy.blocks(&u, &mut ws);
        let diag = energy.diagonal(&blocks);
        for i in 0..n {
            rhs[i] = -r[i];
        }
        let eta = (sqrt(rn / (1.0 + f_norm))).min(0.1);
        let cg_tol = (eta * rn).max(0.1 * target) / sqrt(m);
        let cg_iters = {
            let mut cg_ws = Workspace::new(&grid);
            let mut apply = |v: &[f64], out: &mut [f64]| energy.apply_hessian(&blocks, v, out, &mut cg_ws);
            pcg(&mut apply, &diag, &rhs, &mut p, cg_tol, max_cg)
        };
        let mut slope = m * dot(&r, &p);
        if !(slope < 0.0) {
            // Not a descent direction (CG broke down); fall back to scaled gradient.
            for i in 0..n {
                p[i] = -r[i] / diag[i];
            }
            slope = m * dot(&r, &p);
        }

        let resolvable = slope.abs() > 1e3 * f64::EPSILON * (1.0 + e.abs());
        let mut t = 1.0;
        let mut accepted = None;
        loop {
            for i in 0..n {
                trial[i] = u[i] + t * p[i];
            }
            let e_trial = energy.value(&trial, &mut ws);
            if !resolvable || e_trial <= e + cfg.sufficient_decrease * t * slope {
                accepted = Some(e_trial);
                break;
            }
            t *= cfg.backtrack;
            if t < 1e-10 {
                break;
            }
        }
        let e_new = match accepted {
            Some(v) => v,
            None => {
                // Energy differences are below rounding: take the full step if it
                // reduces the residual.
                t = 1.0;
                for i in 0..n {
                    trial[i] = u[i] + p[i];
                }
                let rt = energy.residual(&trial, &mut r_trial, &mut ws);
                if rt >= rn {
                    return Err(Error::LineSearchFailed {
                        iteration: it,
                        residual: rn,
                    });
                }
                energy.value(&trial, &mut ws)
            }
        };
        core::mem::swap(&mut u, &mut trial);
        e = e_new;
        rn = energy.residual(&u, &mut r, &mut ws);
        history.push(NewtonRecord {
            iteration: it,
            energy: e,
            residual: rn,
            step_length: t,
            cg_iterations: cg_iters,
        });
    }

    Ok(EllipticSolution {
        u: ScalarField::new(grid, u)?,
        residual_norm: rn,
        newton_iters: it,
        energy: e,
        history,
    })
}

fn default_guess(coeffs: &CoefficientSet) -> ScalarField {
    ScalarField::from_raw(
        *coeffs.alpha().grid(),
        coeffs
            .f_circ()
            .values()
            .iter()
            .zip(coeffs.alpha_circ().values())
            .map(|(f, a)| f / a)
            .collect(),
    )
}

/// Solves the elliptic problem from the pointwise guess `f°/α°`.
pub fn solve_e(eps: Epsilon, coeffs: &CoefficientSet, cfg: &SolverConfig) -> Result<EllipticSolution> {
    solve_e_from(eps, coeffs, cfg, &default_guess(coeffs))
}

pub fn solve_e_from(
    eps: Epsilon,
    coeffs: &CoefficientSet,
    cfg: &SolverConfig,
    guess: &ScalarField,
) -> Result<EllipticSolution> {
    let e = eps.positive()?;
    guess.same_grid(coeffs.alpha())?;
    let energy = Energy::new(e, coeffs, 0.0);
    newton(&energy, cfg, guess.values(), h_norm(coeffs.f_circ()))
}

/// Minimiser of `Υ_κ`, the biharmonic relaxation of the elliptic energy.
pub fn solve_e_kappa(
    kappa: f64,
    eps: Epsilon,
    coeffs: &CoefficientSet,
    cfg: &SolverConfig,
) -> Result<EllipticSolution> {
    solve_e_kappa_from(kappa, eps, coeffs, cfg, &default_guess(coeffs))
}

pub fn solve_e_kappa_from(
    kappa: f64,
    eps: Epsilon,
    coeffs: &CoefficientSet,
    cfg: &SolverConfig,
    guess: &ScalarField,
) -> Result<EllipticSolution> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidParameter("κ must be positive"));
    }
    let e = eps.positive()?;
    guess.same_grid(coeffs.alpha())?;
    let energy = Energy::new(e, coeffs, kappa);
    newton(&energy, cfg, guess.values(), h_norm(coeffs.f_circ()))
}

/// Strong residual `α°u − div(α∇γ_ε(∇u) + β∇u) − f°` of the unrelaxed problem.
pub fn residual_field(eps: Epsilon, coeffs: &CoefficientSet, u: &ScalarField) -> Result<ScalarField> {
    let e = eps.positive()?;
    u.same_grid(coeffs.alpha())?;
    let energy = Energy::new(e, coeffs, 0.0);
    let mut ws = Workspace::new(u.grid());
    let mut out = vec![0.0; u.len()];
    energy.residual(u.values(), &mut out, &mut ws);
    Ok(ScalarField::from_raw(*u.grid(), out))
}

/// `|α°u − div(α∇γ_ε(∇u) + β∇u) − f°|_H`. Because the divergence is the
/// exact adjoint of the gradient, this is the dual norm of the variational
/// defect over discrete test functions.
pub fn weak_residual(eps: Epsilon, coeffs: &CoefficientSet, u: &ScalarField) -> Result<f64> {
    Ok(h_norm(&residual_field(eps, coeffs, u)?))
}

/// `(div(α∇γ_ε(∇v)), Δv)_H + δ|∇²v|² + C₁(δ)(|v|²_V + 1)`, the quantity whose
/// sign the boundary-curvature estimate controls. Reported, not asserted.
pub fn curvature_probe(eps: Epsilon, alpha: &ScalarField, v: &ScalarField, delta: f64, c1: f64) -> Result<f64> {
    let e = eps.positive()?;
    let grid = *v.grid();
    let n = grid.cell_count();
    let mut g = vec![0.0; n * grid.dim()];
    grad_raw(&grid, v.values(), &mut g);
    for j in 0..n {
        let y0 = g[j];
        let y1 = if grid.dim() == 2 { g[n + j] } else { 0.0 };
        let c = alpha.values()[j] / sqrt(e * e + y0 * y0 + y1 * y1);
        for k in 0..grid.dim() {
            g[k * n + j] *= c;
        }
    }
    let flux = VectorField::from_raw(grid, g);
    let d = crate::calculus::divergence(&flux);
    let lap = crate::calculus::laplacian(v);
    let hess = grid.cell_measure() * hessian_sq_raw(&grid, v.values());
    Ok(d.dot(&lap) + delta * hess + c1 * (v_norm_sq(v) + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::upsilon;

    fn constant_coeffs(grid: Grid, a: f64, b: f64, ac: f64, fc: f64) -> CoefficientSet {
        CoefficientSet::new(
            ScalarField::constant(grid, a),
            ScalarField::constant(grid, b),
            ScalarField::constant(grid, ac),
            ScalarField::constant(grid, fc),
        )
        .unwrap()
    }

    #[test]
    fn constant_forcing_gives_constant_solution() {
        let g = Grid::new_1d(8, 1.0).unwrap();
        let c = constant_coeffs(g, 0.0, 1.0, 1.0, 2.5);
        let eps = Epsilon::new(0.1).unwrap();
        let s = solve_e(eps, &c, &SolverConfig::default()).unwrap();
        assert!(s.u.values().iter().all(|&v| (v - 2.5).abs() < 1e-14));
        assert!(s.newton_iters <= 1);
        let sk = solve_e_kappa(3.0, eps, &c, &SolverConfig::default()).unwrap();
        assert!(sk.u.values().iter().all(|&v| (v - 2.5).abs() < 1e-12));
        assert_eq!(weak_residual(eps, &c, &s.u).unwrap(), 0.0);
    }

    #[test]
    fn rejects_singular_epsilon() {
        let g = Grid::new_1d(4, 1.0).unwrap();
        let c = constant_coeffs(g, 1.0, 1.0, 1.0, 0.0);
        let zero = Epsilon::new(0.0).unwrap();
        assert!(matches!(solve_e(zero, &c, &SolverConfig::default()), Err(Error::SingularEpsilon)));
        assert!(matches!(solve_e_kappa(1.0, zero, &c, &SolverConfig::default()), Err(Error::SingularEpsilon)));
    }

    #[test]
    fn iteration_cap_reports_last_residual() {
        let g = Grid::new_1d(16, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| if x[0] < 0.5 { 0.0 } else { 1.0 }).unwrap();
        let c = CoefficientSet::new(
            ScalarField::constant(g, 1.0),
            ScalarField::constant(g, 0.01),
            ScalarField::constant(g, 1.0),
            f,
        )
        .unwrap();
        let cfg = SolverConfig {
            max_newton: 1,
            ..SolverConfig::default()
        };
        match solve_e(Epsilon::new(1e-3).unwrap(), &c, &cfg) {
            Err(Error::NotConverged { iterations, residual, target }) => {
                assert_eq!(iterations, 1);
                assert!(residual > target);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn energy_decreases_along_newton_iterates() {
        let g = Grid::new_2d(6, 5, 1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| libm::sin(6.0 * x[0]) + libm::cos(4.0 * x[1])).unwrap();
        let c = CoefficientSet::new(
            ScalarField::constant(g, 1.0),
            ScalarField::constant(g, 0.2),
            ScalarField::constant(g, 1.0),
            f,
        )
        .unwrap();
        let eps = Epsilon::new(0.05).unwrap();
        let s = solve_e(eps, &c, &SolverConfig::default()).unwrap();
        for w in s.history.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-13 * (1.0 + w[0].energy.abs()));
        }
        assert!((s.energy - upsilon(eps, &c, &s.u)).abs() < 1e-10 * (1.0 + s.energy.abs()));
        let (lhs, rhs) = s.v_bound(&c);
        assert!(lhs <= rhs + 1e-8);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            tol_rel: 2.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            backtrack: 1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
