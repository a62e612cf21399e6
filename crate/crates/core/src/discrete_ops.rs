//! Five-point Dirichlet Laplacian, discrete norms and a conjugate-gradient
//! solve on masked grids.
//!
//! Every scalar reduction walks nodes in ascending flat index so results are
//! reproducible bit for bit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_domain::{GridDomain, NodeSet};

/// Nodal values on a grid domain, zero at every non-interior node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: &Arc<GridDomain>) -> Self {
        Self { domain: Arc::clone(domain), values: vec![0.0; domain.len()] }
    }

    /// Samples `f` at interior nodes.
    pub fn from_fn(domain: &Arc<GridDomain>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut u = Self::zeros(domain);
        for p in domain.interior().nodes() {
            let (x, y) = domain.coords(p);
            u.values[p] = f(x, y);
        }
        u
    }

    /// Wraps raw nodal values, rejecting non-finite entries and nonzero
    /// values outside the interior.
    pub fn from_values(domain: &Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch);
        }
        for (p, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite value at node {p}")));
            }
            if *v != 0.0 && !domain.is_interior(p) {
                return Err(Error::InvalidParameter(format!("nonzero value at exterior node {p}")));
            }
        }
        Ok(Self { domain: Arc::clone(domain), values })
    }

    /// Sets every node outside `set` to zero.
    pub fn restricted_to(&self, set: &NodeSet) -> Self {
        let mut out = self.clone();
        for (p, v) in out.values.iter_mut().enumerate() {
            if !set.contains(p) {
                *v = 0.0;
            }
        }
        out
    }

    /// Nodewise map over interior nodes; exterior nodes stay zero.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = Self::zeros(&self.domain);
        for p in self.domain.interior().nodes() {
            out.values[p] = f(self.values[p]);
        }
        out
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same(other)?;
        let mut out = Self::zeros(&self.domain);
        for p in self.domain.interior().nodes() {
            out.values[p] = f(self.values[p], other.values[p]);
        }
        Ok(out)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to interior values. Callers must keep exterior nodes
    /// at zero.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.zip_map(other, |u, v| u + a * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    H1Seminorm,
    H1,
    Linf,
}

/// `A u` for the 5-point stencil of `-Δ`, zero outside the interior.
pub fn apply_laplacian(u: &ScalarField) -> ScalarField {
    apply_laplacian_on(u, u.domain().interior())
}

/// Laplacian with Dirichlet conditions on the complement of `set`: values of
/// `u` outside `set` are treated as zero.
pub fn apply_laplacian_on(u: &ScalarField, set: &NodeSet) -> ScalarField {
    let d = u.domain();
    let inv_h2 = 1.0 / (d.h() * d.h());
    let mut out = ScalarField::zeros(d);
    let val = |q: usize| if set.contains(q) { u.values[q] } else { 0.0 };
    for p in set.nodes() {
        let [e, w, n, s] = d.neighbours(p);
        out.values[p] = (4.0 * u.values[p] - val(e) - val(w) - val(n) - val(s)) * inv_h2;
    }
    out
}

/// Discrete L² pairing `h² Σ u_p v_p`.
pub fn inner(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.check_same(v)?;
    let h2 = u.domain().h() * u.domain().h();
    let mut acc = 0.0;
    for (a, b) in u.values.iter().zip(&v.values) {
        acc += a * b;
    }
    Ok(h2 * acc)
}

pub fn norm(u: &ScalarField, kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => {
            let s: f64 = u.values.iter().map(|v| v * v).sum();
            u.domain().h() * s.sqrt()
        }
        NormKind::H1Seminorm => h1_seminorm_sq(u).sqrt(),
        NormKind::H1 => {
            let l2 = norm(u, NormKind::L2);
            (l2 * l2 + h1_seminorm_sq(u)).sqrt()
        }
        NormKind::Linf => u.max_abs(),
    }
}

/// Sum of squared differences over all grid edges touching an interior node.
/// Exterior values are zero, so the boundary edges act as one-sided
/// differences to ghost nodes.
fn h1_seminorm_sq(u: &ScalarField) -> f64 {
    let d = u.domain();
    let nx = d.nx();
    let mut acc = 0.0;
    for p in 0..d.len() {
        let (i, j) = (p % nx, p / nx);
        if i + 1 < nx {
            let q = p + 1;
            if d.is_interior(p) || d.is_interior(q) {
                let diff = u.values[p] - u.values[q];
                acc += diff * diff;
            }
        }
        if j + 1 < d.ny() {
            let q = p + nx;
            if d.is_interior(p) || d.is_interior(q) {
                let diff = u.values[p] - u.values[q];
                acc += diff * diff;
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    /// `None` selects `50 * sqrt(nx * ny)`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: None }
    }
}

/// Solves `(A + diag(shift)) u = rhs` on the interior.
pub fn solve_spd(rhs: &ScalarField, shift: Option<&ScalarField>, opts: CgOptions) -> Result<ScalarField> {
    solve_spd_on(rhs, shift, rhs.domain().interior(), opts)
}

/// Jacobi-preconditioned conjugate gradients for `(A_set + diag(shift)) u = rhs`
/// where `A_set` is the Laplacian with Dirichlet conditions off `set`.
pub fn solve_spd_on(
    rhs: &ScalarField,
    shift: Option<&ScalarField>,
    set: &NodeSet,
    opts: CgOptions,
) -> Result<ScalarField> {
    let d = Arc::clone(rhs.domain());
    if let Some(s) = shift {
        rhs.check_same(s)?;
        if set.nodes().any(|p| s.values[p] < 0.0) {
            return Err(Error::InvalidParameter("negative shift in SPD solve".into()));
        }
    }
    let max_iter =
        opts.max_iter.unwrap_or_else(|| (50.0 * ((d.nx() * d.ny()) as f64).sqrt()).ceil() as usize);
    let inv_h2 = 1.0 / (d.h() * d.h());
    let shift_at = |p: usize| shift.map_or(0.0, |s| s.values[p]);

    let b = rhs.restricted_to(set);
    let b_norm = norm(&b, NormKind::L2);
    let mut x = ScalarField::zeros(&d);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let apply = |v: &ScalarField| -> ScalarField {
        let mut out = apply_laplacian_on(v, set);
        for p in set.nodes() {
            out.values[p] += shift_at(p) * v.values[p];
        }
        out
    };
    let diag_inv: Vec<f64> = (0..d.len())
        .map(|p| if set.contains(p) { 1.0 / (4.0 * inv_h2 + shift_at(p)) } else { 0.0 })
        .collect();

    let mut r = b.clone();
    let mut z = r.clone();
    for p in set.nodes() {
        z.values[p] *= diag_inv[p];
    }
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 0..max_iter {
        let ad = apply(&dir);
        let alpha = rz / dot(&dir, &ad);
        for p in set.nodes() {
            x.values[p] += alpha * dir.values[p];
            r.values[p] -= alpha * ad.values[p];
        }
        res = norm(&r, NormKind::L2) / b_norm;
        if res <= opts.tol {
            // Confirm against the true residual; the recurrence drifts.
            let true_res = norm(&apply(&x).axpy(-1.0, &b)?, NormKind::L2) / b_norm;
            if true_res <= opts.tol {
                return Ok(x);
            }
            r = b.axpy(-1.0, &apply(&x))?;
            res = true_res;
        }
        for p in set.nodes() {
            z.values[p] = r.values[p] * diag_inv[p];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for p in set.nodes() {
            dir.values[p] = z.values[p] + beta * dir.values[p];
        }
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::LinearSolve { residual: res, iterations: max_iter })
}

fn dot(u: &ScalarField, v: &ScalarField) -> f64 {
    u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum()
}
