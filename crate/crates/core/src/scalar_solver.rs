//! Single-species Dirichlet problems: the positive logistic state on a
//! region, the principal eigenpair, the nondegeneracy margin of a state and
//! the whole-domain supersolution used for truncation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discrete_ops::{apply_laplacian_on, inner, norm, solve_spd_on, CgOptions, NormKind, ScalarField};
use crate::error::{Error, Result};
use crate::grid_domain::{GridDomain, NodeSet};
use crate::reaction::SpeciesParams;
use crate::sparse::SparseBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub cg_tol: f64,
    pub eig_tol: f64,
    pub max_newton: usize,
    pub max_backtracks: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-8, cg_tol: 1e-10, eig_tol: 1e-8, max_newton: 200, max_backtracks: 30 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("newton_tol", self.newton_tol), ("cg_tol", self.cg_tol), ("eig_tol", self.eig_tol)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_newton == 0 {
            return Err(Error::InvalidParameter("max_newton must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn cg(&self) -> CgOptions {
        CgOptions { tol: self.cg_tol, max_iter: None }
    }
}

#[derive(Debug, Clone)]
pub struct ScalarSolveReport {
    pub solution: ScalarField,
    pub newton_iterations: usize,
    pub final_residual: f64,
    /// Strictly positive on the region and above `100 * newton_tol` somewhere.
    pub positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdReport {
    pub margin: f64,
    pub rayleigh_iterations: usize,
}

const MAX_EIGEN_ITER: usize = 2000;
const MAX_ND_ITER: usize = 20_000;

/// Smallest eigenvalue of the Dirichlet Laplacian on `region`, by inverse
/// iteration. The eigenfield has unit L2 norm and nonnegative sum.
pub fn principal_eigenvalue(
    region: &NodeSet,
    domain: &Arc<GridDomain>,
    opts: &SolverOptions,
) -> Result<(f64, ScalarField)> {
    if region.is_empty() {
        return Err(Error::InvalidParameter("empty region".into()));
    }
    let mut x = ScalarField::zeros(domain);
    for p in region.nodes() {
        x.values_mut()[p] = 1.0;
    }
    x = x.scale(1.0 / norm(&x, NormKind::L2));
    let rayleigh = |v: &ScalarField| inner(&apply_laplacian_on(v, region), v);
    let mut value = rayleigh(&x)?;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_EIGEN_ITER {
        let y = solve_spd_on(&x, None, region, opts.cg())?;
        x = y.scale(1.0 / norm(&y, NormKind::L2));
        let next = rayleigh(&x)?;
        change = (next - value).abs() / next.abs();
        value = next;
        if change <= opts.eig_tol {
            if x.values().iter().sum::<f64>() < 0.0 {
                x = x.scale(-1.0);
            }
            return Ok((value, x));
        }
    }
    Err(Error::EigenSolve { iterations: MAX_EIGEN_ITER, change })
}

/// Half the principal eigenfield of each connected component of `region`,
/// each scaled to unit maximum. Seeds the positive branch.
pub fn positive_guess(
    region: &NodeSet,
    domain: &Arc<GridDomain>,
    opts: &SolverOptions,
) -> Result<ScalarField> {
    let mut guess = ScalarField::zeros(domain);
    for comp in domain.connected_components(region) {
        let (_, e) = principal_eigenvalue(&comp, domain, opts)?;
        let scale = 0.5 / e.max_abs();
        for p in comp.nodes() {
            guess.values_mut()[p] = scale * e.get(p).abs();
        }
    }
    Ok(guess)
}

fn scalar_residual(u: &ScalarField, sp: &SpeciesParams, region: &NodeSet) -> (ScalarField, f64) {
    let mut r = apply_laplacian_on(u, region);
    let mut f = ScalarField::zeros(u.domain());
    for p in region.nodes() {
        let fv = sp.f(u.get(p));
        r.values_mut()[p] -= fv;
        f.values_mut()[p] = fv;
    }
    (r, norm(&f, NormKind::L2))
}

/// Damped Newton for `-Δu = f(u)` on `region` with zero data off it.
pub fn solve_ball(
    sp: &SpeciesParams,
    region: &NodeSet,
    guess: &ScalarField,
    opts: &SolverOptions,
) -> Result<ScalarSolveReport> {
    let domain = Arc::clone(guess.domain());
    let h = domain.h();
    let inv_h2 = 1.0 / (h * h);
    let nodes: Vec<usize> = region.nodes().collect();
    let mut local = vec![usize::MAX; domain.len()];
    for (m, &p) in nodes.iter().enumerate() {
        local[p] = m;
    }

    let mut u = guess.restricted_to(region);
    let (mut r, mut f_norm) = scalar_residual(&u, sp, region);
    let mut r_norm = norm(&r, NormKind::L2);
    let mut history = vec![r_norm];
    for it in 0..=opts.max_newton {
        if r_norm <= opts.newton_tol * f_norm.max(1.0) {
            // Values at the level of the stopping tolerance cannot be told
            // apart from the trivial state.
            let positive = nodes.iter().all(|&p| u.get(p) > 0.0) && u.max_abs() > 100.0 * opts.newton_tol;
            return Ok(ScalarSolveReport {
                solution: u,
                newton_iterations: it,
                final_residual: r_norm,
                positive,
            });
        }
        if it == opts.max_newton {
            break;
        }
        let mut jac = SparseBuilder::new(nodes.len());
        for (m, &p) in nodes.iter().enumerate() {
            jac.push(m, m, 4.0 * inv_h2 - sp.f_prime(u.get(p)));
            for q in domain.neighbours(p) {
                if region.contains(q) {
                    jac.push(m, local[q], -inv_h2);
                }
            }
        }
        let rhs: Vec<f64> = nodes.iter().map(|&p| -r.get(p)).collect();
        let delta = jac.solve(&rhs)?;

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let mut trial = u.clone();
            for (m, &p) in nodes.iter().enumerate() {
                trial.values_mut()[p] += t * delta[m];
            }
            let (tr, tf) = scalar_residual(&trial, sp, region);
            let tn = norm(&tr, NormKind::L2);
            if tn <= (1.0 - 1e-4 * t) * r_norm {
                u = trial;
                r = tr;
                f_norm = tf;
                r_norm = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        history.push(r_norm);
        if !accepted {
            return Err(Error::NonlinearSolve {
                iterations: it + 1,
                residual: r_norm,
                reason: "line search failed".into(),
                history,
            });
        }
    }
    Err(Error::NonlinearSolve {
        iterations: opts.max_newton,
        residual: r_norm,
        reason: "iteration limit reached".into(),
        history,
    })
}

/// Coercivity margin `ε = inf_w (|∇w|² - ∫f'(u0)w²) / |∇w|²` on `region`.
///
/// Computed as `1 - ν_max` where `ν_max` is the top eigenvalue of
/// `w ↦ A⁻¹(f'(u0) w)`, self-adjoint in the energy inner product, by power
/// iteration with a shift that makes the spectrum nonnegative.
pub fn nd_margin(
    u0: &ScalarField,
    sp: &SpeciesParams,
    region: &NodeSet,
    opts: &SolverOptions,
) -> Result<NdReport> {
    let domain = u0.domain();
    let weight = u0.restricted_to(region).map(|s| sp.f_prime(s)).restricted_to(region);
    let neg_part = region.nodes().map(|p| (-weight.get(p)).max(0.0)).fold(0.0, f64::max);
    let lambda1 = if neg_part > 0.0 { principal_eigenvalue(region, domain, opts)?.0 } else { 1.0 };
    let shift = neg_part / lambda1;

    let energy_norm =
        |w: &ScalarField| -> Result<f64> { Ok(inner(&apply_laplacian_on(w, region), w)?.sqrt()) };
    let quotient = |w: &ScalarField| -> Result<f64> {
        let num = inner(&weight.zip_map(w, |a, b| a * b)?, w)?;
        let den = inner(&apply_laplacian_on(w, region), w)?;
        Ok(num / den)
    };

    let mut w = ScalarField::zeros(domain);
    for p in region.nodes() {
        w.values_mut()[p] = 1.0;
    }
    w = w.scale(1.0 / energy_norm(&w)?);
    let mut nu = quotient(&w)?;
    let mut change = f64::INFINITY;
    for it in 1..=MAX_ND_ITER {
        let fw = weight.zip_map(&w, |a, b| a * b)?;
        let tw = solve_spd_on(&fw, None, region, opts.cg())?;
        let next = tw.axpy(shift, &w)?;
        let scale = energy_norm(&next)?;
        if scale == 0.0 {
            // f' vanishes on the region: the quadratic form is the Dirichlet energy.
            return Ok(NdReport { margin: 1.0, rayleigh_iterations: it });
        }
        w = next.scale(1.0 / scale);
        let nu_next = quotient(&w)?;
        change = (nu_next - nu).abs();
        nu = nu_next;
        if change <= opts.eig_tol * nu.abs().max(1.0) {
            return Ok(NdReport { margin: 1.0 - nu, rayleigh_iterations: it });
        }
    }
    Err(Error::EigenSolve { iterations: MAX_ND_ITER, change })
}

/// Positive solution of the scalar problem on the whole interior, used as the
/// cap for the truncated reaction.
pub fn supersolution_phi(
    sp: &SpeciesParams,
    domain: &Arc<GridDomain>,
    opts: &SolverOptions,
) -> Result<ScalarField> {
    let region = domain.interior();
    let lambda1 = domain
        .connected_components(region)
        .iter()
        .map(|c| principal_eigenvalue(c, domain, opts).map(|(v, _)| v))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if sp.lambda <= lambda1 {
        return Err(Error::PhiUnavailable { lambda: sp.lambda, lambda1 });
    }
    // u ≡ 1 is a supersolution and f is concave on s > 0, so Newton from it
    // decreases monotonically onto the maximal (positive) solution.
    let guess = ScalarField::from_fn(domain, |_, _| 1.0);
    let report = solve_ball(sp, region, &guess, opts)?;
    if !report.positive {
        return Err(Error::NonlinearSolve {
            iterations: report.newton_iterations,
            residual: report.final_residual,
            reason: "supersolution solve left the positive branch".into(),
            history: vec![],
        });
    }
    Ok(report.solution)
}
