//! Subspace-sparse recovery error and clustering error.

use itertools::Itertools;
use pathfinding::prelude::{kuhn_munkres_min, Matrix};

use crate::data::CoefficientMatrix;
use crate::error::{Result, SscError};
use crate::scalar::Real;
use crate::solver::cross_fractions;

/// Largest cluster count matched by exhaustive permutation search.
pub const EXHAUSTIVE_MATCH_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SsrError {
    /// Mean cross-subspace `l1` fraction over the nonzero columns.
    pub value: f64,
    /// All-zero columns, left out of the mean.
    pub zero_columns: Vec<usize>,
}

/// Average over points of the share of each column's `l1` mass placed on
/// points from other subspaces.
pub fn ssr_error<T: Real>(c: &CoefficientMatrix<T>, labels: &[usize]) -> Result<SsrError> {
    let n = c.num_points();
    if labels.len() != n {
        return Err(SscError::LengthMismatch { left: labels.len(), right: n });
    }
    let fractions = cross_fractions(c.values(), labels);
    let zero_columns: Vec<usize> =
        fractions.iter().enumerate().filter(|(_, f)| f.is_none()).map(|(i, _)| i).collect();
    let kept: Vec<f64> = fractions.iter().flatten().map(|f| f.as_f64()).collect();
    if kept.is_empty() {
        return Err(SscError::ZeroColumn { col: 0 });
    }
    if !zero_columns.is_empty() {
        log::warn!("{} zero coefficient columns excluded from the ssr error", zero_columns.len());
    }
    Ok(SsrError { value: kept.iter().sum::<f64>() / kept.len() as f64, zero_columns })
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let ids: Vec<usize> = labels.iter().copied().sorted_unstable().dedup().collect();
    let mapped = labels.iter().map(|l| ids.binary_search(l).expect("present")).collect();
    (mapped, ids.len())
}

/// Fraction of misclassified points under the best matching of predicted
/// to true cluster ids.
pub fn clustering_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(SscError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    let k = kp.max(kt);
    let mut agree = vec![vec![0i64; k]; k];
    for (&a, &b) in p.iter().zip(&t) {
        agree[a][b] += 1;
    }
    let matched = if k <= EXHAUSTIVE_MATCH_LIMIT {
        (0..k)
            .permutations(k)
            .map(|perm| perm.iter().enumerate().map(|(a, &b)| agree[a][b]).sum::<i64>())
            .max()
            .unwrap_or(0)
    } else {
        let cost = Matrix::from_rows(agree.iter().map(|r| r.iter().map(|v| -v).collect::<Vec<_>>()))
            .expect("square contingency table");
        -kuhn_munkres_min(&cost).0
    };
    Ok(1.0 - matched as f64 / pred.len() as f64)
}
