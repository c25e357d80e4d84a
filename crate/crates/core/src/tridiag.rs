//! Prefactored solver for `A = c_m M + c_s S` with `M` the Shen mass matrix and
//! `S` the diagonal stiffness matrix.
//!
//! `A` couples index `i` only with `i ± 2`, so after splitting even and odd
//! indices it decouples into two symmetric tridiagonal systems, each solved by
//! Thomas elimination.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral_basis::SpectralBasis1D;

/// Thomas factors of one symmetric tridiagonal chain.
#[derive(Debug, Clone)]
struct Chain {
    /// Global indices of this chain, in order.
    indices: Vec<usize>,
    /// Off-diagonal `e_k = A[idx_k, idx_{k+1}]`.
    off: Vec<f64>,
    /// Pivots after forward elimination.
    pivots: Vec<f64>,
    /// Upper factor `c_k = e_k / pivot_k`.
    upper: Vec<f64>,
}

impl Chain {
    fn factor(indices: Vec<usize>, diag: &[f64], off: Vec<f64>) -> Result<Self> {
        let n = indices.len();
        let mut pivots = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n {
            let mut p = diag[indices[k]];
            if k > 0 {
                p -= off[k - 1] * upper[k - 1];
            }
            if !(p > 0.0) {
                return Err(Error::Factorization(format!(
                    "non-positive pivot {p:e} at index {} (system not SPD)",
                    indices[k]
                )));
            }
            pivots.push(p);
            if k + 1 < n {
                upper.push(off[k] / p);
            }
        }
        Ok(Self {
            indices,
            off,
            pivots,
            upper,
        })
    }

    fn solve_in_place(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.indices.len();
        scratch.clear();
        for k in 0..n {
            let mut y = x[self.indices[k]];
            if k > 0 {
                y -= self.off[k - 1] * scratch[k - 1];
            }
            scratch.push(y / self.pivots[k]);
        }
        for k in (0..n).rev() {
            let mut v = scratch[k];
            if k + 1 < n {
                v -= self.upper[k] * x[self.indices[k + 1]];
            }
            x[self.indices[k]] = v;
        }
    }
}

/// Parity-split factorization of `c_m M + c_s S`.
#[derive(Debug, Clone)]
pub struct SweepSystem {
    dim: usize,
    mass_coeff: f64,
    stiffness_coeff: f64,
    chains: [Chain; 2],
}

impl SweepSystem {
    pub fn new(basis: &SpectralBasis1D, mass_coeff: f64, stiffness_coeff: f64) -> Result<Self> {
        let dim = basis.dim();
        let diag: Vec<f64> = (0..dim)
            .map(|i| mass_coeff * basis.mass_diag()[i] + stiffness_coeff * basis.stiffness_diag()[i])
            .collect();
        let chain = |start: usize| -> Result<Chain> {
            let indices: Vec<usize> = (start..dim).step_by(2).collect();
            let off = indices
                .iter()
                .take(indices.len().saturating_sub(1))
                .map(|&i| mass_coeff * basis.mass_off2()[i])
                .collect();
            Chain::factor(indices, &diag, off)
        };
        Ok(Self {
            dim,
            mass_coeff,
            stiffness_coeff,
            chains: [chain(0)?, chain(1)?],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass_coeff(&self) -> f64 {
        self.mass_coeff
    }

    pub fn stiffness_coeff(&self) -> f64 {
        self.stiffness_coeff
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        let mut scratch = Vec::with_capacity(self.dim / 2 + 1);
        for c in &self.chains {
            c.solve_in_place(x, &mut scratch);
        }
    }

    /// Solves `A X = B` column by column.
    pub fn solve_columns(&self, b: &mut DMatrix<f64>) {
        assert_eq!(b.nrows(), self.dim);
        let mut scratch = Vec::with_capacity(self.dim / 2 + 1);
        for mut col in b.column_iter_mut() {
            let x = col.as_mut_slice();
            for c in &self.chains {
                c.solve_in_place(x, &mut scratch);
            }
        }
    }

    /// Solves `X A = B` (equivalently `A Xᵀ = Bᵀ`, `A` symmetric) row by row.
    pub fn solve_rows(&self, b: &mut DMatrix<f64>) {
        assert_eq!(b.ncols(), self.dim);
        let mut t = b.transpose();
        self.solve_columns(&mut t);
        *b = t.transpose();
    }
}
