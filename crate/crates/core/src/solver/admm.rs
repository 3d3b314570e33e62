//! ADMM iterations for
//!
//! ```text
//! min ||X||_1 + lambda_r ||X||_{r,1} + lambda_e ||E||_1 + lambda_z/2 ||Y - P X - E||_F^2
//! s.t. g^T X = 1^T (affine), X_jj = 0 (self-expression)
//! ```
//!
//! with a consensus copy `A` of `X`. Each sweep solves the cached linear
//! system for `A`, thresholds `A + Delta/rho` into `X`, thresholds the
//! residual into `E` when outliers are modelled, then takes dual ascent
//! steps on both constraints.

use nalgebra::{DMatrix, DVector};

use super::linsys::SystemSolver;
use super::prox::{group_shrink, shrink};
use crate::scalar::Real;

pub(crate) struct Program<'a, T: Real> {
    /// Dictionary `P`, `D x M`.
    pub dict: &'a DMatrix<T>,
    /// Targets `Y`, `D x N`.
    pub target: &'a DMatrix<T>,
    pub lambda_z: T,
    pub rho: T,
    /// Rows `0..coeff_rows` of `X` are point coefficients: they carry the
    /// affine constraint and the row-sparsity penalty.
    pub coeff_rows: usize,
    pub zero_diag: bool,
    pub affine: bool,
    /// `lambda_e`; enables the explicit `E` block.
    pub outlier_weight: Option<T>,
    pub lambda_r: T,
    pub epsilon: T,
    pub max_iter: usize,
}

pub(crate) struct Iterate<T: Real> {
    pub coeffs: DMatrix<T>,
    pub consensus: DMatrix<T>,
    pub errors: Option<DMatrix<T>>,
    pub iterations: usize,
    pub affine_residual: T,
    pub consensus_residual: T,
    pub consensus_step: T,
    pub error_step: T,
    pub converged: bool,
}

#[cfg(test)]
pub(crate) fn affine_gap<T: Real>(a: &DMatrix<T>, coeff_rows: usize) -> T {
    let mut worst = T::zero();
    for col in a.column_iter() {
        let s = col.rows(0, coeff_rows).sum();
        worst = worst.max((s - T::one()).abs());
    }
    worst
}

/// Gathers the listed columns of `m`.
fn gather<T: Real>(m: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Iterates of the columns still being updated, stored contiguously.
struct Working<T: Real> {
    cols: Vec<usize>,
    pty: DMatrix<T>,
    target: DMatrix<T>,
    c: DMatrix<T>,
    a: DMatrix<T>,
    e: Option<DMatrix<T>>,
    delta: DVector<T>,
    big_delta: DMatrix<T>,
}

impl<T: Real> Working<T> {
    /// Keeps the columns flagged in `keep`.
    fn retain(&mut self, keep: &[bool]) {
        let pos: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
        self.cols = pos.iter().map(|&j| self.cols[j]).collect();
        self.pty = gather(&self.pty, &pos);
        self.target = gather(&self.target, &pos);
        self.c = gather(&self.c, &pos);
        self.a = gather(&self.a, &pos);
        self.e = self.e.as_ref().map(|e| gather(e, &pos));
        self.delta = DVector::from_fn(pos.len(), |j, _| self.delta[pos[j]]);
        self.big_delta = gather(&self.big_delta, &pos);
    }
}

impl<T: Real> Program<'_, T> {
    pub(crate) fn run(&self) -> Iterate<T> {
        let p = self.dict;
        let y = self.target;
        let (m, n) = (p.ncols(), y.ncols());
        let rho = self.rho;
        let inv_rho = rho.recip();
        let g: Vec<bool> = (0..m).map(|i| i < self.coeff_rows).collect();
        let system = SystemSolver::new(p, self.lambda_z, rho, self.affine.then_some(g.as_slice()));
        let scaled_pt = self.outlier_weight.map(|_| p.transpose() * self.lambda_z);
        // Without the row penalty every column is its own program and may
        // stop as soon as its own residuals are small.
        let separable = self.lambda_r == T::zero();

        let mut w = Working {
            cols: (0..n).collect(),
            pty: p.tr_mul(y) * self.lambda_z,
            target: y.clone(),
            c: DMatrix::zeros(m, n),
            a: DMatrix::zeros(m, n),
            e: self.outlier_weight.map(|_| DMatrix::zeros(y.nrows(), n)),
            delta: DVector::zeros(n),
            big_delta: DMatrix::zeros(m, n),
        };
        let mut out = Iterate {
            coeffs: DMatrix::zeros(m, n),
            consensus: DMatrix::zeros(m, n),
            errors: self.outlier_weight.map(|_| DMatrix::zeros(y.nrows(), n)),
            iterations: 0,
            affine_residual: T::zero(),
            consensus_residual: T::zero(),
            consensus_step: T::zero(),
            error_step: T::zero(),
            converged: false,
        };
        let mut frozen = Residuals::default();

        for k in 1..=self.max_iter {
            let na = w.cols.len();
            // A-update.
            let mut rhs = w.pty.clone();
            if let (Some(e), Some(pt)) = (&w.e, &scaled_pt) {
                rhs.gemm(-T::one(), pt, e, T::one());
            }
            rhs.zip_zip_apply(&w.c, &w.big_delta, |r, cv, bd| *r += rho * cv - bd);
            if self.affine {
                for j in 0..na {
                    let shift = rho - w.delta[j];
                    for i in 0..self.coeff_rows {
                        rhs[(i, j)] += shift;
                    }
                }
            }
            let a_next = system.solve(&rhs);

            // C-update: threshold, clear the diagonal, then shrink rows.
            let mut v = a_next.clone();
            v.zip_apply(&w.big_delta, |x, bd| *x += bd * inv_rho);
            v.apply(|x| *x = shrink(*x, inv_rho));
            if self.zero_diag {
                for (j, &col) in w.cols.iter().enumerate() {
                    if col < self.coeff_rows {
                        v[(col, j)] = T::zero();
                    }
                }
            }
            if self.lambda_r > T::zero() {
                let b = self.lambda_r * inv_rho;
                let mut row = vec![T::zero(); na];
                for i in 0..self.coeff_rows {
                    for j in 0..na {
                        row[j] = v[(i, j)];
                    }
                    group_shrink(&mut row, b);
                    for j in 0..na {
                        v[(i, j)] = row[j];
                    }
                }
            }
            w.c = v;

            let mut res = vec![Residuals::<T>::default(); na];

            // E-update: E = T_{lambda_e/lambda_z}(Y - P A).
            if let (Some(lambda_e), Some(e_prev)) = (self.outlier_weight, w.e.as_mut()) {
                let eta = lambda_e / self.lambda_z;
                let mut e_next = w.target.clone();
                e_next.gemm(-T::one(), p, &a_next, T::one());
                e_next.apply(|x| *x = shrink(*x, eta));
                for (j, r) in res.iter_mut().enumerate() {
                    r.error_step = max_abs_diff_col(&e_next, e_prev, j);
                }
                *e_prev = e_next;
            }

            // Dual ascent.
            for (j, r) in res.iter_mut().enumerate() {
                if self.affine {
                    let gap = a_next.column(j).rows(0, self.coeff_rows).sum() - T::one();
                    w.delta[j] += rho * gap;
                    r.affine = gap.abs();
                }
                let mut cons = T::zero();
                let mut step = T::zero();
                for i in 0..m {
                    let d = a_next[(i, j)] - w.c[(i, j)];
                    cons = cons.max(d.abs());
                    w.big_delta[(i, j)] += rho * d;
                    step = step.max((a_next[(i, j)] - w.a[(i, j)]).abs());
                }
                r.consensus = cons;
                r.step = step;
            }
            w.a = a_next;

            let eps = self.epsilon;
            let done: Vec<bool> = res.iter().map(|r| r.max() <= eps).collect();
            out.iterations = k;
            let all_done = done.iter().all(|&d| d);
            if all_done || (separable && done.iter().any(|&d| d)) || k == self.max_iter {
                let finish = all_done || k == self.max_iter;
                for (j, r) in res.iter().enumerate() {
                    if finish || done[j] {
                        frozen.absorb(r);
                        self.store(&w, j, &mut out);
                    }
                }
                if finish {
                    out.converged = all_done;
                    break;
                }
                let keep: Vec<bool> = done.iter().map(|d| !d).collect();
                w.retain(&keep);
            }
        }

        out.affine_residual = frozen.affine;
        out.consensus_residual = frozen.consensus;
        out.consensus_step = frozen.step;
        out.error_step = frozen.error_step;
        out
    }

    fn store(&self, w: &Working<T>, j: usize, out: &mut Iterate<T>) {
        let col = w.cols[j];
        out.coeffs.set_column(col, &w.c.column(j));
        if self.zero_diag && col < self.coeff_rows {
            out.coeffs[(col, col)] = T::zero();
        }
        out.consensus.set_column(col, &w.a.column(j));
        if let (Some(e), Some(dst)) = (&w.e, out.errors.as_mut()) {
            dst.set_column(col, &e.column(j));
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Residuals<T: Real> {
    affine: T,
    consensus: T,
    step: T,
    error_step: T,
}

impl<T: Real> Default for Residuals<T> {
    fn default() -> Self {
        Self { affine: T::zero(), consensus: T::zero(), step: T::zero(), error_step: T::zero() }
    }
}

impl<T: Real> Residuals<T> {
    fn max(&self) -> T {
        self.affine.max(self.consensus).max(self.step).max(self.error_step)
    }

    fn absorb(&mut self, other: &Self) {
        self.affine = self.affine.max(other.affine);
        self.consensus = self.consensus.max(other.consensus);
        self.step = self.step.max(other.step);
        self.error_step = self.error_step.max(other.error_step);
    }
}

fn max_abs_diff_col<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, j: usize) -> T {
    a.column(j).iter().zip(b.column(j).iter()).fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}
