use std::sync::Arc;

use crate::discrete_ops::{norm, NormKind, ScalarField};
use crate::error::{Error, Result};
use crate::grid_domain::GridDomain;

/// A k-tuple of densities sharing one domain.
#[derive(Debug, Clone)]
pub struct StateField {
    components: Vec<ScalarField>,
}

impl StateField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("state needs at least one component".into()));
        }
        if components.iter().any(|c| !c.same_domain(&components[0])) {
            return Err(Error::DomainMismatch);
        }
        Ok(Self { components })
    }

    pub fn zeros(domain: &Arc<GridDomain>, k: usize) -> Self {
        Self { components: (0..k).map(|_| ScalarField::zeros(domain)).collect() }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        self.components[0].domain()
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        self.k() == other.k() && self.components[0].same_domain(&other.components[0])
    }

    /// `self + a * other`, componentwise.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        if !self.same_domain(other) {
            return Err(Error::DomainMismatch);
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(u, v)| u.axpy(a, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// Root-sum-square of the component norms.
    pub fn norm(&self, kind: NormKind) -> f64 {
        self.components.iter().map(|c| norm(c, kind).powi(2)).sum::<f64>().sqrt()
    }

    /// Interior values laid out node-major: entry `k*m + i` is species `i`
    /// at the `m`-th interior node.
    pub fn to_interior_vec(&self) -> Vec<f64> {
        let k = self.k();
        let d = self.domain();
        let mut out = Vec::with_capacity(k * d.interior().len());
        for p in d.interior().nodes() {
            for c in &self.components {
                out.push(c.get(p));
            }
        }
        out
    }

    /// Adds `a * delta` (laid out as in [`Self::to_interior_vec`]).
    pub fn add_interior_vec(&self, a: f64, delta: &[f64]) -> Self {
        let k = self.k();
        let mut out = self.clone();
        let nodes: Vec<usize> = self.domain().interior().nodes().collect();
        for (m, &p) in nodes.iter().enumerate() {
            for i in 0..k {
                out.components[i].values_mut()[p] += a * delta[k * m + i];
            }
        }
        out
    }
}
