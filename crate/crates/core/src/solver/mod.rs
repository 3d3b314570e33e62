//! Self-expressive sparse coding of a data matrix.
//!
//! Every point is written as a sparse combination of the other points,
//! optionally with a dense noise term, a sparse outlier term, an affine
//! constraint and a row-sparsity penalty. All variants are solved by the
//! same ADMM loop over a cached factorization.

mod admm;
mod linsys;
mod prox;

use nalgebra::DMatrix;

pub use prox::{group_shrink, prox_l1_plus_group, shrink, shrink_matrix};

use crate::data::{check, normalize_unit_columns, CoefficientMatrix, DataMatrix, ProblemSpec, Variant};
use crate::error::{Result, SscError};
use crate::scalar::Real;
use admm::Program;

/// Multiplier applied to `1 / mu_z` when the equality-constrained program is
/// approximated by a heavily weighted noise term.
pub const EXACT_PENALTY: f64 = 1e6;

/// Default penalty for the equality-constrained program and basis pursuit.
pub const EXACT_RHO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian penalty. `None` picks `alpha_z`, else `alpha_e`,
    /// else [`EXACT_RHO`] for the exact program.
    pub rho: Option<f64>,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Not consumed by ADMM; carried for run manifests.
    pub seed: Option<u64>,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { rho: None, epsilon: 1e-4, max_iter: 10_000, seed: None }
    }
}

impl AdmmConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(SscError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(SscError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if let Some(rho) = self.rho {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(SscError::InvalidConfig(format!("rho must be positive, got {rho}")));
            }
        }
        Ok(())
    }
}

/// Residuals and bookkeeping of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// `||A^T 1 - 1||_inf` over the coefficient rows; zero when not affine.
    pub primal_residual_affine: f64,
    /// `||A - C||_inf`.
    pub primal_residual_consensus: f64,
    /// `(||A_k - A_{k-1}||_inf, ||E_k - E_{k-1}||_inf)` at the last sweep.
    pub dual_residuals: (f64, f64),
    pub converged: bool,
    pub objective: f64,
    /// `||Y - YC - E||_F` on the (possibly normalized) data that was solved.
    pub reconstruction_residual: f64,
    pub lambda_z: Option<f64>,
    pub lambda_e: Option<f64>,
    pub rho: f64,
    /// Columns of `C` that are identically zero.
    pub zero_columns: Vec<usize>,
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution<T: Real> {
    pub coefficients: CoefficientMatrix<T>,
    /// Sparse outlying entries `E` (`D x N`) for the outlier variants.
    pub errors: Option<DMatrix<T>>,
    /// Final consensus variable `A`; rows beyond `N` hold the scaled outlier
    /// block of the outlier-only formulation.
    pub consensus: DMatrix<T>,
    pub diagnostics: SolveDiagnostics,
}

impl<T: Real> Solution<T> {
    /// Turns a non-converged run into [`SscError::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.diagnostics.converged {
            Ok(self)
        } else {
            let d = &self.diagnostics;
            let residual = d
                .primal_residual_affine
                .max(d.primal_residual_consensus)
                .max(d.dual_residuals.0)
                .max(d.dual_residuals.1);
            Err(SscError::NotConverged { iterations: d.iterations, residual })
        }
    }
}

/// `min_i max_{j != i} |y_i^T y_j|`.
pub fn mu_z<T: Real>(data: &DataMatrix<T>) -> Result<T> {
    let y = data.values();
    if y.ncols() < 2 {
        return Err(SscError::TooFewPoints { points: y.ncols() });
    }
    let gram = y.tr_mul(y);
    let mu = min_over_points(y.ncols(), |i, j| gram[(i, j)].abs());
    if mu > T::zero() {
        Ok(mu)
    } else {
        Err(SscError::DegenerateScale { which: "mu_z" })
    }
}

/// `min_i max_{j != i} ||y_j||_1`.
pub fn mu_e<T: Real>(data: &DataMatrix<T>) -> Result<T> {
    let y = data.values();
    if y.ncols() < 2 {
        return Err(SscError::TooFewPoints { points: y.ncols() });
    }
    let l1: Vec<T> = y.column_iter().map(|c| c.lp_norm(1)).collect();
    let mu = min_over_points(y.ncols(), |_, j| l1[j]);
    if mu > T::zero() {
        Ok(mu)
    } else {
        Err(SscError::DegenerateScale { which: "mu_e" })
    }
}

fn min_over_points<T: Real>(n: usize, f: impl Fn(usize, usize) -> T) -> T {
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i).fold(T::zero(), |acc, j| acc.max(f(i, j))))
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v))))
        .unwrap_or_else(T::zero)
}

/// `||Y_{-i}^T y_i||_inf`, the largest correlation of point `i` with another point.
///
/// The noise-only program returns `c_i = 0` exactly when
/// `lambda_z * threshold <= 1`; see [`lasso_zero_lambda`].
pub fn lasso_zero_threshold<T: Real>(data: &DataMatrix<T>, point_index: usize) -> Result<T> {
    let y = data.values();
    if y.ncols() < 2 {
        return Err(SscError::TooFewPoints { points: y.ncols() });
    }
    if point_index >= y.ncols() {
        return Err(SscError::LengthMismatch { left: point_index, right: y.ncols() });
    }
    let yi = y.column(point_index);
    Ok((0..y.ncols())
        .filter(|&j| j != point_index)
        .fold(T::zero(), |acc, j| acc.max(y.column(j).dot(&yi).abs())))
}

/// Largest `lambda_z` for which point `i` gets the all-zero representation;
/// `None` when the point is orthogonal to all others (every `lambda_z` works).
pub fn lasso_zero_lambda<T: Real>(data: &DataMatrix<T>, point_index: usize) -> Result<Option<T>> {
    let t = lasso_zero_threshold(data, point_index)?;
    Ok((t > T::zero()).then(|| T::one() / t))
}

/// `||C||_{r,1} = sum_i ||c^i||_2` over the rows of `C`.
pub fn row_sparsity_norm<T: Real>(c: &DMatrix<T>) -> T {
    c.row_iter().fold(T::zero(), |acc, r| acc + r.norm())
}

fn l1<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc + v.abs())
}

/// Solves the self-expressive program selected by `spec`.
///
/// Non-convergence is reported through `diagnostics.converged`; use
/// [`Solution::require_converged`] to turn it into an error.
pub fn solve<T: Real>(data: &DataMatrix<T>, spec: &ProblemSpec, cfg: &AdmmConfig) -> Result<Solution<T>> {
    check(data)?;
    spec.check()?;
    cfg.check()?;
    let normalized;
    let data = if spec.normalize_columns {
        normalized = normalize_unit_columns(data)?;
        &normalized
    } else {
        data
    };
    let y = data.values();
    let (d, n) = y.shape();
    let eps = T::lit(cfg.epsilon);
    let lambda_r = T::lit(spec.lambda_r);

    let (lambda_z, lambda_e, default_rho) = match spec.variant {
        Variant::Exact => (T::lit(EXACT_PENALTY) / mu_z(data)?, None, EXACT_RHO),
        Variant::NoiseOnly => (T::lit(spec.alpha_z) / mu_z(data)?, None, spec.alpha_z),
        Variant::NoiseAndOutlier => (
            T::lit(spec.alpha_z) / mu_z(data)?,
            Some(T::lit(spec.alpha_e) / mu_e(data)?),
            spec.alpha_z,
        ),
        Variant::OutlierOnly => {
            let scale = match mu_z(data) {
                Ok(mu) => mu,
                Err(_) => y.column_iter().fold(T::zero(), |acc, c| acc.max(c.norm_squared())),
            };
            (T::lit(EXACT_PENALTY) / scale, Some(T::lit(spec.alpha_e) / mu_e(data)?), spec.alpha_e)
        }
    };
    let rho = T::lit(cfg.rho.unwrap_or(default_rho));

    let (coeffs, consensus, errors, it) = if spec.variant == Variant::OutlierOnly {
        // Y = YC + E written as Y = [Y, I/lambda_e] [C; lambda_e E].
        let lambda_e = lambda_e.expect("outlier weight");
        let mut dict = DMatrix::<T>::zeros(d, n + d);
        dict.columns_mut(0, n).copy_from(y);
        for k in 0..d {
            dict[(k, n + k)] = T::one() / lambda_e;
        }
        let it = Program {
            dict: &dict,
            target: y,
            lambda_z,
            rho,
            coeff_rows: n,
            zero_diag: true,
            affine: spec.affine,
            outlier_weight: None,
            lambda_r,
            epsilon: eps,
            max_iter: cfg.max_iter,
        }
        .run();
        let c = it.coeffs.rows(0, n).into_owned();
        let e = it.coeffs.rows(n, d).into_owned() / lambda_e;
        let consensus = it.consensus.clone();
        (c, consensus, Some(e), it)
    } else {
        let it = Program {
            dict: y,
            target: y,
            lambda_z,
            rho,
            coeff_rows: n,
            zero_diag: true,
            affine: spec.affine,
            outlier_weight: lambda_e,
            lambda_r,
            epsilon: eps,
            max_iter: cfg.max_iter,
        }
        .run();
        let c = it.coeffs.clone();
        let e = it.errors.clone();
        let consensus = it.consensus.clone();
        (c, consensus, e, it)
    };

    let mut resid = y - y * &coeffs;
    if let Some(e) = &errors {
        resid -= e;
    }
    let resid_norm = resid.norm();
    let mut objective = l1(&coeffs) + lambda_r * row_sparsity_norm(&coeffs);
    if let (Some(e), Some(le)) = (&errors, lambda_e) {
        objective += le * l1(e);
    }
    if spec.variant.uses_noise() {
        objective += lambda_z * resid_norm * resid_norm * T::lit(0.5);
    }
    let zero_columns = coeffs
        .column_iter()
        .enumerate()
        .filter(|(_, c)| c.iter().all(|v| *v == T::zero()))
        .map(|(i, _)| i)
        .collect();
    if !it.converged {
        log::warn!("ADMM stopped after {} iterations without meeting epsilon = {}", it.iterations, cfg.epsilon);
    }

    let diagnostics = SolveDiagnostics {
        iterations: it.iterations,
        primal_residual_affine: it.affine_residual.as_f64(),
        primal_residual_consensus: it.consensus_residual.as_f64(),
        dual_residuals: (it.consensus_step.as_f64(), it.error_step.as_f64()),
        converged: it.converged,
        objective: objective.as_f64(),
        reconstruction_residual: resid_norm.as_f64(),
        lambda_z: (spec.variant != Variant::OutlierOnly).then(|| lambda_z.as_f64()),
        lambda_e: lambda_e.map(Real::as_f64),
        rho: rho.as_f64(),
        zero_columns,
    };
    Ok(Solution {
        coefficients: CoefficientMatrix::with_zeroed_diagonal(coeffs)?,
        errors,
        consensus,
        diagnostics,
    })
}

/// Minimum-`l1` representation of each target column in a fixed dictionary,
/// `min ||a||_1 s.t. x = P a`, through the same penalized ADMM path as the
/// exact variant. Returns the `M x K` coefficients and whether ADMM met
/// `cfg.epsilon`.
pub fn basis_pursuit<T: Real>(
    dict: &DMatrix<T>,
    targets: &DMatrix<T>,
    cfg: &AdmmConfig,
) -> Result<(DMatrix<T>, bool)> {
    cfg.check()?;
    if dict.nrows() != targets.nrows() {
        return Err(SscError::ShapeMismatch(format!(
            "dictionary has {} rows, targets {}",
            dict.nrows(),
            targets.nrows()
        )));
    }
    let scale = targets
        .column_iter()
        .map(|x| dict.tr_mul(&x).amax())
        .fold(T::zero(), |acc, v| acc.max(v));
    if scale <= T::zero() {
        return Ok((DMatrix::zeros(dict.ncols(), targets.ncols()), true));
    }
    let it = Program {
        dict,
        target: targets,
        lambda_z: T::lit(EXACT_PENALTY) / scale,
        rho: T::lit(cfg.rho.unwrap_or(EXACT_RHO)),
        coeff_rows: dict.ncols(),
        zero_diag: false,
        affine: false,
        outlier_weight: None,
        lambda_r: T::zero(),
        epsilon: T::lit(cfg.epsilon),
        max_iter: cfg.max_iter,
    }
    .run();
    Ok((it.coeffs, it.converged))
}

/// Cross-subspace share of each column's `l1` mass; `None` for zero columns.
pub fn cross_fractions<T: Real>(c: &DMatrix<T>, labels: &[usize]) -> Vec<Option<T>> {
    c.column_iter()
        .enumerate()
        .map(|(i, col)| {
            let total = col.iter().fold(T::zero(), |a, v| a + v.abs());
            if total == T::zero() {
                return None;
            }
            let cross = col
                .iter()
                .enumerate()
                .filter(|(j, _)| labels[*j] != labels[i])
                .fold(T::zero(), |a, (_, v)| a + v.abs());
            Some(cross / total)
        })
        .collect()
}
