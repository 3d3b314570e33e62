//! Factor-once solver for the consensus-variable update.
//!
//! The system matrix is `lambda_z P^T P + rho I + rho g g^T`, where `g`
//! marks the rows carrying the affine constraint. When the dictionary has
//! fewer rows than columns the matrix is a low-rank update of `rho I` and
//! the Woodbury identity reduces the work to a small SPD factorization.

use nalgebra::{Cholesky, DMatrix, Dyn, LU};

use crate::scalar::Real;

pub(crate) enum SystemSolver<T: Real> {
    Cholesky(Cholesky<T, Dyn>),
    Lu(LU<T, Dyn, Dyn>),
    /// `K^-1 R = (R - W Q R) / rho` with `W = Q^T S^-1`, `S = rho I + Q Q^T`.
    LowRank { q: DMatrix<T>, w: DMatrix<T>, rho: T },
}

impl<T: Real> SystemSolver<T> {
    pub(crate) fn new(dict: &DMatrix<T>, lambda_z: T, rho: T, affine: Option<&[bool]>) -> Self {
        let m = dict.ncols();
        let rank_rows = dict.nrows() + usize::from(affine.is_some());
        if rank_rows < m {
            let mut q = DMatrix::<T>::zeros(rank_rows, m);
            q.rows_mut(0, dict.nrows()).copy_from(&(dict * lambda_z.sqrt()));
            if let Some(g) = affine {
                let s = rho.sqrt();
                for (j, &on) in g.iter().enumerate() {
                    if on {
                        q[(rank_rows - 1, j)] = s;
                    }
                }
            }
            let mut small = &q * q.transpose();
            for i in 0..rank_rows {
                small[(i, i)] += rho;
            }
            if let Some(small) = Cholesky::new(small) {
                let w = small.solve(&q).transpose();
                return SystemSolver::LowRank { q, w, rho };
            }
        }
        let mut k = dict.tr_mul(dict) * lambda_z;
        for i in 0..m {
            k[(i, i)] += rho;
        }
        if let Some(g) = affine {
            for i in 0..m {
                for j in 0..m {
                    if g[i] && g[j] {
                        k[(i, j)] += rho;
                    }
                }
            }
        }
        match Cholesky::new(k.clone()) {
            Some(c) => SystemSolver::Cholesky(c),
            None => {
                log::warn!("consensus system is not numerically SPD; using LU");
                SystemSolver::Lu(LU::new(k))
            }
        }
    }

    pub(crate) fn solve(&self, rhs: &DMatrix<T>) -> DMatrix<T> {
        match self {
            SystemSolver::Cholesky(c) => c.solve(rhs),
            SystemSolver::Lu(lu) => lu.solve(rhs).expect("consensus system is singular"),
            SystemSolver::LowRank { q, w, rho } => {
                let qr = q * rhs;
                let mut out = rhs.clone();
                out.gemm(-T::one(), w, &qr, T::one());
                out.unscale_mut(*rho);
                out
            }
        }
    }
}
