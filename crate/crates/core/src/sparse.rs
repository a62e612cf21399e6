//! Sparse direct solves for Newton systems (general, possibly indefinite or
//! nonsymmetric), backed by faer's sparse LU.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Triplet accumulator for a square sparse matrix. Duplicate entries are
/// summed on assembly.
#[derive(Debug, Clone)]
pub struct SparseBuilder {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl SparseBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::with_capacity(8 * n) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.entries.push(Triplet::new(row, col, val));
        }
    }

    /// Factorizes and solves `M x = rhs`.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        self.entries.sort_unstable_by_key(|t| (t.col, t.row));
        let mut merged: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(self.entries.len());
        for t in self.entries {
            match merged.last_mut() {
                Some(last) if last.row == t.row && last.col == t.col => last.val += t.val,
                _ => merged.push(t),
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &merged)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("singular Newton matrix".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        // [2 1; -1 3] x = [3; 2] -> x = [1; 1]
        let mut b = SparseBuilder::new(2);
        b.push(0, 0, 1.0);
        b.push(0, 0, 1.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, -1.0);
        b.push(1, 1, 3.0);
        let x = b.solve(&[3.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
