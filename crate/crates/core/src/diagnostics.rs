//! Segregation diagnostics for k-tuples of densities.
//!
//! The weak inequalities `∫∇u·∇φ ≤ ∫f(u)φ` for all `φ ≥ 0` reduce, on the
//! grid, to a sign condition on the nodal residual: nonnegative nodal hat
//! functions span the discrete nonnegative test cone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrete_ops::{apply_laplacian, inner, norm, solve_spd, CgOptions, NormKind, ScalarField};
use crate::error::{Error, Result};
use crate::reaction::{hat_rhs, hat_transform, SpeciesParams};
use crate::scalar_solver::SolverOptions;
use crate::state::StateField;
use crate::system_solver::{solve_system, CoupledSystem};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Violations {
    pub count: usize,
    /// Largest violating residual magnitude; 0 when `count == 0`.
    pub max_magnitude: f64,
}

impl Violations {
    fn record(&mut self, magnitude: f64) {
        self.count += 1;
        self.max_magnitude = self.max_magnitude.max(magnitude);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub overlap_matrix: Vec<Vec<f64>>,
    pub sub_violations: Vec<Violations>,
    pub super_violations: Vec<Violations>,
    pub noninvasion: Vec<Vec<f64>>,
    pub energy: f64,
    pub box_violations: usize,
    pub h1_norms: Vec<f64>,
}

impl DiagnosticsReport {
    pub fn max_overlap(&self) -> f64 {
        off_diagonal(&self.overlap_matrix).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn off_diagonal(m: &[Vec<f64>]) -> impl Iterator<Item = f64> + '_ {
    m.iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, &v)| v))
}

/// Inputs shared by every diagnostics evaluation of one run.
#[derive(Debug, Clone)]
pub struct DiagnosticsContext {
    pub species: Vec<SpeciesParams>,
    /// Lower box bound is `-baseline`; `None` means the bound is 0.
    pub baseline: Option<StateField>,
    /// Upper box bound `φ_i`, when available.
    pub phi: Option<Vec<ScalarField>>,
    pub tol: f64,
}

impl DiagnosticsContext {
    pub fn new(species: Vec<SpeciesParams>, opts: &SolverOptions) -> Self {
        Self { species, baseline: None, phi: None, tol: 10.0 * opts.newton_tol }
    }
}

pub fn diagnose(u: &StateField, ctx: &DiagnosticsContext) -> DiagnosticsReport {
    let (sub_violations, super_violations) = inequality_check(u, &ctx.species, ctx.tol);
    DiagnosticsReport {
        overlap_matrix: overlap(u),
        sub_violations,
        super_violations,
        noninvasion: noninvasion(u),
        energy: energy(u, &ctx.species),
        box_violations: box_violations(u, ctx.baseline.as_ref(), ctx.phi.as_deref(), ctx.tol),
        h1_norms: u.components().iter().map(|c| norm(c, NormKind::H1)).collect(),
    }
}

/// `∫ u_i u_j` off the diagonal, zero on it.
pub fn overlap(u: &StateField) -> Vec<Vec<f64>> {
    let k = u.k();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = inner(u.component(i), u.component(j)).expect("components share a domain");
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Nodewise check of `-Δu_i ≤ f_i(u_i)` and `-Δû_i ≥ f̂_i` with tolerance
/// `tol`.
pub fn inequality_check(
    u: &StateField,
    species: &[SpeciesParams],
    tol: f64,
) -> (Vec<Violations>, Vec<Violations>) {
    let d = u.domain();
    let mut sub = vec![Violations::default(); u.k()];
    let mut sup = vec![Violations::default(); u.k()];
    for i in 0..u.k() {
        let ui = u.component(i);
        let lap = apply_laplacian(ui);
        let hat = hat_transform(u, i);
        let hat_lap = apply_laplacian(&hat);
        let hat_f = hat_rhs(u, species, i);
        for p in d.interior().nodes() {
            let r_sub = lap.get(p) - species[i].f(ui.get(p));
            if r_sub > tol {
                sub[i].record(r_sub);
            }
            let r_sup = hat_lap.get(p) - hat_f.get(p);
            if r_sup < -tol {
                sup[i].record(-r_sup);
            }
        }
    }
    (sub, sup)
}

/// Entry `(i, j)`, `i ≠ j`: max of `|u_i|` over ball `j`. Diagonal: max of
/// `u_i` over its own ball.
pub fn noninvasion(u: &StateField) -> Vec<Vec<f64>> {
    let d = u.domain();
    let k = u.k();
    let mut m = vec![vec![0.0f64; k]; k];
    for p in d.interior().nodes() {
        let Some(j) = d.ball_label(p) else { continue };
        if j >= k {
            continue;
        }
        for (i, row) in m.iter_mut().enumerate() {
            let v = u.component(i).get(p);
            let entry = if i == j { v } else { v.abs() };
            row[j] = row[j].max(entry);
        }
    }
    m
}

/// `J(U) = Σ_i ½|u_i|²_{H¹} - ∫ F_i(u_i)`.
pub fn energy(u: &StateField, species: &[SpeciesParams]) -> f64 {
    let d = u.domain();
    let h2 = d.h() * d.h();
    let mut total = 0.0;
    for (c, sp) in u.components().iter().zip(species) {
        let semi = norm(c, NormKind::H1Seminorm);
        let pot: f64 = d.interior().nodes().map(|p| sp.potential(c.get(p))).sum();
        total += 0.5 * semi * semi - h2 * pot;
    }
    total
}

/// Count of nodes outside the box `-u_i⁰ - tol ≤ u_i ≤ φ_i + tol`.
pub fn box_violations(
    u: &StateField,
    baseline: Option<&StateField>,
    phi: Option<&[ScalarField]>,
    tol: f64,
) -> usize {
    let d = u.domain();
    let mut count = 0;
    for i in 0..u.k() {
        for p in d.interior().nodes() {
            let v = u.component(i).get(p);
            let lower = -baseline.map_or(0.0, |b| b.component(i).get(p));
            let upper = phi.map_or(f64::INFINITY, |f| f[i].get(p));
            if v < lower - tol || v > upper + tol {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub species: usize,
    pub a: usize,
    pub b: usize,
}

/// Grid edges between interior nodes across which some `u_i` crosses the
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub threshold: f64,
    pub edges: Vec<BoundaryEdge>,
}

/// `1e-6` times the largest density, the default support threshold.
pub fn default_threshold(u: &StateField) -> f64 {
    1e-6 * u.components().iter().map(ScalarField::max_abs).fold(0.0, f64::max)
}

pub fn free_boundary(u: &StateField, threshold: f64) -> FreeBoundary {
    let d = u.domain();
    let nx = d.nx();
    let mut edges = Vec::new();
    for (s, c) in u.components().iter().enumerate() {
        for a in d.interior().nodes() {
            for b in [a + 1, a + nx] {
                if d.is_interior(b) && ((c.get(a) > threshold) != (c.get(b) > threshold)) {
                    edges.push(BoundaryEdge { species: s, a, b });
                }
            }
        }
    }
    FreeBoundary { threshold, edges }
}

/// `sqrt(Σ_i ‖u_i - v_i‖²_{H¹})`.
pub fn h1_distance(u: &StateField, v: &StateField) -> Result<f64> {
    Ok(u.axpy(-1.0, v)?.norm(NormKind::H1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub trials: usize,
    pub max_pairwise_h1_distance: f64,
    pub all_converged: bool,
    pub converged: usize,
}

/// Smooth random k-tuple of total H¹ size `delta`, reproducible from `seed`.
pub fn random_perturbation(like: &StateField, delta: f64, seed: u64) -> Result<StateField> {
    let d = like.domain();
    if delta == 0.0 {
        return Ok(StateField::zeros(d, like.k()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = Vec::with_capacity(like.k());
    for _ in 0..like.k() {
        let mut noise = ScalarField::zeros(d);
        for p in d.interior().nodes() {
            noise.values_mut()[p] = rng.random_range(-1.0..1.0);
        }
        comps.push(solve_spd(&noise, None, CgOptions::default())?);
    }
    let smooth = StateField::new(comps)?;
    let size = smooth.norm(NormKind::H1);
    let scaled = StateField::new(smooth.components().iter().map(|c| c.scale(delta / size)).collect())?;
    Ok(scaled)
}

/// Re-solves from `trials` random perturbations of `center` and measures how
/// far apart the converged states end up.
pub fn uniqueness_probe(
    center: &StateField,
    system: &CoupledSystem,
    kappa: f64,
    delta: f64,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<UniquenessReport> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter("delta must be nonnegative".into()));
    }
    let mut solutions = Vec::with_capacity(trials);
    for t in 0..trials {
        let perturbation = random_perturbation(center, delta, seed.wrapping_add(t as u64))?;
        let start = center.axpy(1.0, &perturbation)?;
        if let Ok(sol) = solve_system(&start, system, kappa, opts.newton_tol, opts) {
            solutions.push(sol.state);
        }
    }
    let mut max_d: f64 = 0.0;
    for a in 0..solutions.len() {
        for b in a + 1..solutions.len() {
            max_d = max_d.max(h1_distance(&solutions[a], &solutions[b])?);
        }
    }
    Ok(UniquenessReport {
        trials,
        max_pairwise_h1_distance: max_d,
        all_converged: solutions.len() == trials,
        converged: solutions.len(),
    })
}
