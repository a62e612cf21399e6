//! Coupled k-species solves at fixed competition strength and the
//! continuation march in κ.
//!
//! Three right-hand sides are supported:
//!
//! * `LotkaVolterra`: `f_i([u_i]⁺) - κ [u_i]⁺ Σ_{j≠i} [u_j]⁺`
//! * `Barrier`: `f_i(u_i) - κ u_i Σ u_j - κ u_i Σ u_j⁰ - κ u_i⁰ Σ u_j`
//! * `PositivePart`: `f_i([u_i+u_i⁰]⁺ - u_i⁰) - κ [u_i+u_i⁰]⁺ Σ_{j≠i} [u_j+u_j⁰]⁺`
//!
//! The Lotka-Volterra form is the positive-part form with a zero baseline,
//! which makes converged solutions nonnegative. Positive parts are
//! differentiated semismoothly with slope 1 at ties.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{diagnose, DiagnosticsContext, DiagnosticsReport};
use crate::discrete_ops::{apply_laplacian, NormKind, ScalarField};
use crate::error::{Error, Result};
use crate::reaction::SpeciesParams;
use crate::scalar_solver::SolverOptions;
use crate::sparse::SparseBuilder;
pub use crate::state::StateField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    LotkaVolterra,
    Barrier,
    PositivePart,
}

/// Model selector; the barrier and positive-part models carry the baseline
/// tuple `U⁰`.
#[derive(Debug, Clone)]
pub enum ModelKind {
    LotkaVolterra,
    Barrier(StateField),
    PositivePart(StateField),
}

impl ModelKind {
    pub fn tag(&self) -> ModelTag {
        match self {
            ModelKind::LotkaVolterra => ModelTag::LotkaVolterra,
            ModelKind::Barrier(_) => ModelTag::Barrier,
            ModelKind::PositivePart(_) => ModelTag::PositivePart,
        }
    }

    pub fn baseline(&self) -> Option<&StateField> {
        match self {
            ModelKind::LotkaVolterra => None,
            ModelKind::Barrier(b) | ModelKind::PositivePart(b) => Some(b),
        }
    }
}

/// Everything that defines the nonlinear system apart from κ.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub species: Vec<SpeciesParams>,
    pub model: ModelKind,
    /// Per-species caps `φ_i` for the truncated reaction; `None` disables
    /// truncation.
    pub caps: Option<Vec<ScalarField>>,
}

impl CoupledSystem {
    pub fn new(species: Vec<SpeciesParams>, model: ModelKind) -> Self {
        Self { species, model, caps: None }
    }

    pub fn with_caps(mut self, caps: Vec<ScalarField>) -> Self {
        self.caps = Some(caps);
        self
    }

    pub fn k(&self) -> usize {
        self.species.len()
    }

    fn check(&self, u: &StateField) -> Result<()> {
        if u.k() != self.k() {
            return Err(Error::InvalidParameter(format!(
                "state has {} components, system has {} species",
                u.k(),
                self.k()
            )));
        }
        if let Some(b) = self.model.baseline() {
            if !b.same_domain(u) {
                return Err(Error::DomainMismatch);
            }
        }
        if let Some(caps) = &self.caps {
            if caps.len() != self.k() || caps.iter().any(|c| !c.same_domain(u.component(0))) {
                return Err(Error::DomainMismatch);
            }
        }
        Ok(())
    }

    /// Right-hand side at one node and its Jacobian `∂rhs_i/∂u_j`
    /// (row-major in `jac`).
    fn local(&self, kappa: f64, p: usize, u: &[f64], rhs: &mut [f64], jac: &mut [f64]) {
        let k = u.len();
        let cap = |i: usize| self.caps.as_ref().map(|c| c[i].get(p));
        let base = |i: usize| self.model.baseline().map_or(0.0, |b| b.component(i).get(p));
        match &self.model {
            ModelKind::LotkaVolterra | ModelKind::PositivePart(_) => {
                let mut g = [0.0; MAX_K];
                let mut active = [0.0; MAX_K];
                for i in 0..k {
                    let v = u[i] + base(i);
                    (g[i], active[i]) = if v >= 0.0 { (v, 1.0) } else { (0.0, 0.0) };
                }
                let total: f64 = g[..k].iter().sum();
                for i in 0..k {
                    let (fv, fp) = self.species[i].eval_capped(g[i] - base(i), cap(i));
                    let others = total - g[i];
                    rhs[i] = fv - kappa * g[i] * others;
                    for j in 0..k {
                        jac[i * k + j] = if i == j {
                            active[i] * (fp - kappa * others)
                        } else {
                            -kappa * g[i] * active[j]
                        };
                    }
                }
            }
            ModelKind::Barrier(_) => {
                let u_sum: f64 = u.iter().sum();
                let b_sum: f64 = (0..k).map(base).sum();
                for i in 0..k {
                    let (fv, fp) = self.species[i].eval_capped(u[i], cap(i));
                    let bi = base(i);
                    let others_u = u_sum - u[i];
                    let others_b = b_sum - bi;
                    rhs[i] = fv - kappa * (u[i] * others_u + u[i] * others_b + bi * others_u);
                    for j in 0..k {
                        jac[i * k + j] =
                            if i == j { fp - kappa * (others_u + others_b) } else { -kappa * (u[i] + bi) };
                    }
                }
            }
        }
    }

    /// Nodal right-hand sides for every species.
    pub fn rhs(&self, u: &StateField, kappa: f64) -> Result<StateField> {
        self.check(u)?;
        let k = self.k();
        let d = u.domain();
        let mut out = StateField::zeros(d, k);
        let mut vals = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        let mut jac = vec![0.0; k * k];
        for p in d.interior().nodes() {
            for i in 0..k {
                vals[i] = u.component(i).get(p);
            }
            self.local(kappa, p, &vals, &mut rhs, &mut jac);
            for i in 0..k {
                out.component_mut(i).values_mut()[p] = rhs[i];
            }
        }
        Ok(out)
    }

    /// Componentwise `A u_i - rhs_i(U, κ)`.
    pub fn residual(&self, u: &StateField, kappa: f64) -> Result<StateField> {
        let rhs = self.rhs(u, kappa)?;
        let lap = StateField::new(u.components().iter().map(apply_laplacian).collect())?;
        lap.axpy(-1.0, &rhs)
    }

    /// Residual norm and the scale it is compared against.
    fn residual_norms(&self, u: &StateField, kappa: f64) -> Result<(f64, f64)> {
        let rhs = self.rhs(u, kappa)?;
        let lap = StateField::new(u.components().iter().map(apply_laplacian).collect())?;
        let r = lap.axpy(-1.0, &rhs)?;
        Ok((r.norm(NormKind::L2), rhs.norm(NormKind::L2)))
    }

    fn newton_direction(&self, u: &StateField, kappa: f64) -> Result<Vec<f64>> {
        let k = self.k();
        let d = u.domain();
        let inv_h2 = 1.0 / (d.h() * d.h());
        let nodes: Vec<usize> = d.interior().nodes().collect();
        let mut local = vec![usize::MAX; d.len()];
        for (m, &p) in nodes.iter().enumerate() {
            local[p] = m;
        }
        let mut jac_builder = SparseBuilder::new(k * nodes.len());
        let mut rhs_vec = vec![0.0; k * nodes.len()];
        let mut vals = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        let mut jac = vec![0.0; k * k];
        for (m, &p) in nodes.iter().enumerate() {
            for i in 0..k {
                vals[i] = u.component(i).get(p);
            }
            self.local(kappa, p, &vals, &mut rhs, &mut jac);
            let nbrs = d.neighbours(p);
            for i in 0..k {
                let row = k * m + i;
                let ui = u.component(i);
                let mut lap = 4.0 * ui.get(p);
                for &q in &nbrs {
                    lap -= ui.get(q);
                    if d.is_interior(q) {
                        jac_builder.push(row, k * local[q] + i, -inv_h2);
                    }
                }
                rhs_vec[row] = -(lap * inv_h2 - rhs[i]);
                for j in 0..k {
                    let diag = if i == j { 4.0 * inv_h2 } else { 0.0 };
                    jac_builder.push(row, k * m + j, diag - jac[i * k + j]);
                }
            }
        }
        jac_builder.solve(&rhs_vec)
    }

    /// One nonlinear Gauss-Seidel sweep: a scalar Newton update per node and
    /// species, in node order.
    fn gauss_seidel_sweep(&self, u: &mut StateField, kappa: f64) {
        let k = self.k();
        let d = std::sync::Arc::clone(u.domain());
        let inv_h2 = 1.0 / (d.h() * d.h());
        let mut vals = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        let mut jac = vec![0.0; k * k];
        for p in d.interior().nodes() {
            for i in 0..k {
                for j in 0..k {
                    vals[j] = u.component(j).get(p);
                }
                self.local(kappa, p, &vals, &mut rhs, &mut jac);
                let ui = u.component(i);
                let nb: f64 = d.neighbours(p).iter().map(|&q| ui.get(q)).sum();
                let r = (4.0 * ui.get(p) - nb) * inv_h2 - rhs[i];
                let dr = 4.0 * inv_h2 - jac[i * k + i];
                if dr > 0.0 {
                    u.component_mut(i).values_mut()[p] -= r / dr;
                }
            }
        }
    }
}

/// Upper bound on the species count handled by the nodal kernels.
pub const MAX_K: usize = 16;

#[derive(Debug, Clone)]
pub struct SystemSolve {
    pub state: StateField,
    pub iterations: usize,
    pub residual: f64,
}

const GAUSS_SEIDEL_SWEEPS: usize = 50;

/// Damped Newton on the full coupled system, converged when the residual
/// norm is at most `tol * max(1, ‖rhs‖)`.
pub fn solve_system(
    guess: &StateField,
    system: &CoupledSystem,
    kappa: f64,
    tol: f64,
    opts: &SolverOptions,
) -> Result<SystemSolve> {
    system.check(guess)?;
    if system.k() > MAX_K {
        return Err(Error::InvalidParameter(format!("at most {MAX_K} species are supported")));
    }
    let mut u = guess.clone();
    let (mut r_norm, mut scale) = system.residual_norms(&u, kappa)?;
    let mut history = vec![r_norm];
    for it in 0..=opts.max_newton {
        if r_norm <= tol * scale.max(1.0) {
            return Ok(SystemSolve { state: u, iterations: it, residual: r_norm });
        }
        if it == opts.max_newton {
            break;
        }
        let delta = system.newton_direction(&u, kappa)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let trial = u.add_interior_vec(t, &delta);
            let (tn, ts) = system.residual_norms(&trial, kappa)?;
            if tn <= (1.0 - 1e-4 * t) * r_norm {
                u = trial;
                r_norm = tn;
                scale = ts;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let before = r_norm;
            let mut swept = u.clone();
            for _ in 0..GAUSS_SEIDEL_SWEEPS {
                system.gauss_seidel_sweep(&mut swept, kappa);
            }
            let (sn, ss) = system.residual_norms(&swept, kappa)?;
            if !(sn < before) {
                history.push(r_norm);
                return Err(Error::NonlinearSolve {
                    iterations: it + 1,
                    residual: r_norm,
                    reason: "line search and Gauss-Seidel fallback both stalled".into(),
                    history,
                });
            }
            u = swept;
            r_norm = sn;
            scale = ss;
        }
        history.push(r_norm);
    }
    Err(Error::NonlinearSolve {
        iterations: opts.max_newton,
        residual: r_norm,
        reason: "iteration limit reached".into(),
        history,
    })
}

/// Geometric ramp `κ_m = kappa_start * factor^m`, `m = 0..steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSchedule {
    pub kappa_start: f64,
    pub factor: f64,
    pub steps: usize,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self { kappa_start: 1.0, factor: 2.0, steps: 18 }
    }
}

impl ContinuationSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_start >= 0.0 && self.kappa_start.is_finite()) {
            return Err(Error::InvalidParameter("kappa_start must be nonnegative".into()));
        }
        if !(self.factor > 1.0) {
            return Err(Error::InvalidParameter("factor must exceed 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        if self.kappa_start == 0.0 && self.steps > 1 {
            return Err(Error::InvalidParameter("kappa_start = 0 only allows a single step".into()));
        }
        Ok(())
    }

    pub fn kappas(&self) -> Vec<f64> {
        (0..self.steps).map(|m| self.kappa_start * self.factor.powi(m as i32)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub kappa: f64,
    pub state: StateField,
    pub diagnostics: DiagnosticsReport,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ContinuationTrace {
    pub entries: Vec<TraceEntry>,
}

impl ContinuationTrace {
    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }
}

/// Solver failure during a continuation run, with everything computed
/// before it.
#[derive(Debug)]
pub struct ContinuationError {
    pub kappa: f64,
    pub source: Error,
    pub partial: ContinuationTrace,
}

impl std::fmt::Display for ContinuationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "continuation failed at kappa = {} after {} steps: {}",
            self.kappa,
            self.partial.entries.len(),
            self.source
        )
    }
}

impl std::error::Error for ContinuationError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Solves along the schedule, warm-starting each step from the previous
/// solution.
pub fn continuation_run(
    initial: &StateField,
    system: &CoupledSystem,
    schedule: &ContinuationSchedule,
    opts: &SolverOptions,
    diag: &DiagnosticsContext,
) -> std::result::Result<ContinuationTrace, ContinuationError> {
    let mut trace = ContinuationTrace::default();
    if let Err(source) = schedule.validate() {
        return Err(ContinuationError { kappa: schedule.kappa_start, source, partial: trace });
    }
    let mut current = initial.clone();
    for kappa in schedule.kappas() {
        match solve_system(&current, system, kappa, opts.newton_tol, opts) {
            Ok(sol) => {
                let diagnostics = diagnose(&sol.state, diag);
                current = sol.state;
                trace.entries.push(TraceEntry {
                    kappa,
                    state: current.clone(),
                    diagnostics,
                    newton_iterations: sol.iterations,
                });
            }
            Err(source) => return Err(ContinuationError { kappa, source, partial: trace }),
        }
    }
    Ok(trace)
}
