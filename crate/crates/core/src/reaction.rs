//! Logistic reaction terms `f(s) = λ (s - |s|^{p-1} s)` and the derived
//! quantities used by the solvers and the inequality checks.

use serde::{Deserialize, Serialize};

use crate::discrete_ops::ScalarField;
use crate::error::{Error, Result};
use crate::state::StateField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    pub lambda: f64,
    pub p: f64,
}

impl SpeciesParams {
    pub fn new(lambda: f64, p: f64) -> Result<Self> {
        let sp = Self { lambda, p };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {}", self.p)));
        }
        Ok(())
    }

    // |s|^{p-1} s is written as sign(s)|s|^p so oddness is exact for every p.
    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        self.lambda * (s - s.signum() * s.abs().powf(self.p))
    }

    #[inline]
    pub fn f_prime(&self, s: f64) -> f64 {
        self.lambda * (1.0 - self.p * s.abs().powf(self.p - 1.0))
    }

    /// `F(s) = ∫₀ˢ f`.
    #[inline]
    pub fn potential(&self, s: f64) -> f64 {
        self.lambda * (0.5 * s * s - s.abs().powf(self.p + 1.0) / (self.p + 1.0))
    }

    /// `f` frozen at `cap` above the cap.
    #[inline]
    pub fn f_truncated(&self, s: f64, cap: f64) -> f64 {
        if s <= cap {
            self.f(s)
        } else {
            self.f(cap)
        }
    }

    #[inline]
    pub fn f_truncated_prime(&self, s: f64, cap: f64) -> f64 {
        if s <= cap {
            self.f_prime(s)
        } else {
            0.0
        }
    }

    /// Reaction with an optional per-node cap, returning value and slope.
    #[inline]
    pub(crate) fn eval_capped(&self, s: f64, cap: Option<f64>) -> (f64, f64) {
        match cap {
            Some(c) => (self.f_truncated(s, c), self.f_truncated_prime(s, c)),
            None => (self.f(s), self.f_prime(s)),
        }
    }
}

/// `û_i = u_i - Σ_{j≠i} u_j`, nodewise.
pub fn hat_transform(state: &StateField, i: usize) -> ScalarField {
    let d = state.domain();
    let mut out = state.component(i).clone();
    for (j, u) in state.components().iter().enumerate() {
        if j == i {
            continue;
        }
        for p in d.interior().nodes() {
            out.values_mut()[p] -= u.get(p);
        }
    }
    out
}

/// `f_i(u_i) - Σ_{j≠i} f_j(u_j)`, evaluated literally from all components.
pub fn hat_rhs(state: &StateField, species: &[SpeciesParams], i: usize) -> ScalarField {
    let d = state.domain();
    let mut out = ScalarField::zeros(d);
    for p in d.interior().nodes() {
        let mut acc = species[i].f(state.component(i).get(p));
        for (j, u) in state.components().iter().enumerate() {
            if j != i {
                acc -= species[j].f(u.get(p));
            }
        }
        out.values_mut()[p] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid_domain::{BoundingBox, GridDomain};

    const UNIT: SpeciesParams = SpeciesParams { lambda: 1.0, p: 2.0 };

    #[test]
    fn f_values() {
        assert_eq!(UNIT.f(0.0), 0.0);
        assert_eq!(UNIT.f(1.0), 0.0);
        assert_eq!(UNIT.f(0.5), 0.25);
        assert_eq!(UNIT.f(-0.5), -0.25);
    }

    #[test]
    fn f_prime_values() {
        assert_eq!(UNIT.f_prime(0.0), 1.0);
        assert_eq!(UNIT.f_prime(1.0), -1.0);
    }

    #[test]
    fn f_prime_matches_central_difference() {
        let sp = SpeciesParams { lambda: 2.3, p: 2.7 };
        let s = 0.3;
        let errs: Vec<f64> = [1e-2, 5e-3]
            .iter()
            .map(|&e| ((sp.f(s + e) - sp.f(s - e)) / (2.0 * e) - sp.f_prime(s)).abs())
            .collect();
        // Halving e divides an O(e²) error by about 4.
        assert!(errs[0] / errs[1] > 3.5 && errs[0] / errs[1] < 4.5, "{errs:?}");
        assert!(errs[1] < 1e-3);
    }

    #[test]
    fn potential_values_and_derivative() {
        assert_eq!(UNIT.potential(0.0), 0.0);
        assert!((UNIT.potential(1.0) - 1.0 / 6.0).abs() < 1e-15);
        let sp = SpeciesParams { lambda: 1.7, p: 3.2 };
        let s = 0.7;
        let errs: Vec<f64> = [1e-2, 5e-3]
            .iter()
            .map(|&e| ((sp.potential(s + e) - sp.potential(s - e)) / (2.0 * e) - sp.f(s)).abs())
            .collect();
        assert!(errs[0] / errs[1] > 3.5 && errs[0] / errs[1] < 4.5, "{errs:?}");
    }

    #[test]
    fn truncation() {
        let cap = 0.6;
        for s in [-1.0, 0.0, 0.3, 0.6] {
            assert_eq!(UNIT.f_truncated(s, cap), UNIT.f(s));
        }
        assert_eq!(UNIT.f_truncated(cap + 1.0, cap), UNIT.f(cap));
        let below = UNIT.f_truncated(cap - 1e-12, cap);
        let above = UNIT.f_truncated(cap + 1e-12, cap);
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn params_validation() {
        assert!(SpeciesParams::new(0.0, 2.0).is_err());
        assert!(SpeciesParams::new(1.0, 1.0).is_err());
        assert!(SpeciesParams::new(1.0, 1.5).is_ok());
    }

    fn strip() -> Arc<GridDomain> {
        let bbox = BoundingBox { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 0.5 };
        Arc::new(GridDomain::rectangle(bbox, 0.125).unwrap())
    }

    #[test]
    fn hat_examples() {
        let d = strip();
        let u1 = ScalarField::from_fn(&d, |x, _| if x < 0.5 { x } else { 0.0 });
        let u2 = ScalarField::from_fn(&d, |x, y| if x > 0.5 { x + y } else { 0.0 });

        let single = StateField::new(vec![u1.clone()]).unwrap();
        assert_eq!(hat_transform(&single, 0).values(), u1.values());
        assert_eq!(hat_rhs(&single, &[UNIT], 0).values(), u1.map(|s| UNIT.f(s)).values());

        let with_zero = StateField::new(vec![u1.clone(), ScalarField::zeros(&d)]).unwrap();
        assert_eq!(hat_transform(&with_zero, 0).values(), u1.values());

        let disjoint = StateField::new(vec![u1.clone(), u2.clone()]).unwrap();
        let hat = hat_transform(&disjoint, 0);
        for p in d.interior().nodes() {
            let expect = if u1.get(p) != 0.0 { u1.get(p) } else { -u2.get(p) };
            assert_eq!(hat.get(p), expect);
        }

        let zeros = StateField::zeros(&d, 3);
        assert_eq!(hat_rhs(&zeros, &[UNIT; 3], 1).max_abs(), 0.0);

        let twins = StateField::new(vec![u2.clone(), u2]).unwrap();
        assert_eq!(hat_rhs(&twins, &[UNIT; 2], 0).max_abs(), 0.0);
    }
}
