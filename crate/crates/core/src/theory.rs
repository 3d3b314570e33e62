//! Principal angles, arrangement classification and mechanical checks of
//! the subspace-sparse recovery conditions.

use std::collections::HashSet;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{orthonormality_deviation, DataMatrix, SubspaceArrangement};
use crate::error::{Result, SscError};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Real;
use crate::solver::{basis_pursuit, AdmmConfig};

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Largest sine of a principal angle still treated as a shared direction.
pub const INTERSECTION_TOL: f64 = 1e-8;

/// Residual above which a point is not representable in a dictionary.
pub const FEASIBILITY_TOL: f64 = 1e-6;

fn orthonormal_tol<T: Real>() -> f64 {
    if std::mem::size_of::<T>() <= 4 {
        1e-5
    } else {
        1e-10
    }
}

fn ensure_orthonormal<T: Real>(u: &DMatrix<T>) -> Result<()> {
    let deviation = orthonormality_deviation(u);
    if deviation > orthonormal_tol::<T>() {
        return Err(SscError::NotOrthonormal { deviation });
    }
    Ok(())
}

/// Cosine of the smallest principal angle between `span(U)` and `span(V)`,
/// with the angle in degrees.
pub fn principal_angle<T: Real>(u: &DMatrix<T>, v: &DMatrix<T>) -> Result<(T, T)> {
    ensure_orthonormal(u)?;
    ensure_orthonormal(v)?;
    if u.nrows() != v.nrows() {
        return Err(SscError::ShapeMismatch(format!(
            "bases live in R^{} and R^{}",
            u.nrows(),
            v.nrows()
        )));
    }
    let cos = if u.ncols() == 0 || v.ncols() == 0 {
        T::zero()
    } else {
        (u.transpose() * v).singular_values().max().min(T::one()).max(T::zero())
    };
    Ok((cos, cos.acos() * T::lit(180.0) / T::pi()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleReport<T: Real> {
    pub pairwise_cos: DMatrix<T>,
    pub smallest_angle_deg: DMatrix<T>,
}

impl<T: Real> AngleReport<T> {
    /// `max_{j != i} cos(theta_ij)`, zero for a single subspace.
    pub fn max_cos_to_others(&self, i: usize) -> T {
        (0..self.pairwise_cos.nrows())
            .filter(|&j| j != i)
            .fold(T::zero(), |acc, j| acc.max(self.pairwise_cos[(i, j)]))
    }
}

pub fn angle_report<T: Real>(arr: &SubspaceArrangement<T>) -> Result<AngleReport<T>> {
    let n = arr.num_subspaces();
    let mut pairwise_cos = DMatrix::<T>::identity(n, n);
    let mut smallest_angle_deg = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let (c, deg) = principal_angle(&arr.bases()[i], &arr.bases()[j])?;
            pairwise_cos[(i, j)] = c;
            pairwise_cos[(j, i)] = c;
            smallest_angle_deg[(i, j)] = deg;
            smallest_angle_deg[(j, i)] = deg;
        }
    }
    Ok(AngleReport { pairwise_cos, smallest_angle_deg })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrangementClass {
    Independent,
    DisjointNotIndependent,
    NotDisjoint,
}

/// Numerical rank with singular values above `rel_tol` times the largest.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let top = sv.max();
    if top <= T::zero() {
        return 0;
    }
    let cut = top * T::lit(rel_tol);
    sv.iter().filter(|&&s| s > cut).count()
}

fn hstack<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::<T>::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn classify_arrangement<T: Real>(arr: &SubspaceArrangement<T>) -> ArrangementClass {
    classify_arrangement_with_tol(arr, RANK_TOL)
}

pub fn classify_arrangement_with_tol<T: Real>(arr: &SubspaceArrangement<T>, rank_tol: f64) -> ArrangementClass {
    let bases = arr.bases();
    let all: Vec<&DMatrix<T>> = bases.iter().collect();
    let total: usize = arr.dims().iter().sum();
    if numerical_rank(&hstack(&all), rank_tol) == total {
        return ArrangementClass::Independent;
    }
    let pairwise_ok = (0..bases.len()).tuple_combinations().all(|(i, j)| {
        numerical_rank(&hstack(&[&bases[i], &bases[j]]), rank_tol) == bases[i].ncols() + bases[j].ncols()
    });
    if pairwise_ok {
        ArrangementClass::DisjointNotIndependent
    } else {
        ArrangementClass::NotDisjoint
    }
}

fn select_columns<T: Real>(y: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(y.nrows(), idx.len(), |r, c| y[(r, idx[c])])
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Smallest of the `d` singular values, `None` when numerically rank deficient.
fn sigma_min_full_rank<T: Real>(m: &DMatrix<T>) -> Option<T> {
    let sv = m.singular_values();
    let top = sv.max();
    let low = sv.min();
    (top > T::zero() && low > top * T::lit(RANK_TOL)).then_some(low)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thm3Report<T: Real> {
    pub per_subspace_lhs: Vec<T>,
    pub per_subspace_rhs: Vec<T>,
    pub holds: Vec<bool>,
    pub exhaustive: Vec<bool>,
}

impl<T: Real> Thm3Report<T> {
    pub fn holds_everywhere(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }
}

fn members_checked<T: Real>(data: &DataMatrix<T>, arr: &SubspaceArrangement<T>) -> Result<Vec<Vec<usize>>> {
    if arr.labels().len() != data.num_points() {
        return Err(SscError::LengthMismatch { left: arr.labels().len(), right: data.num_points() });
    }
    if arr.ambient_dim() != data.ambient_dim() {
        return Err(SscError::ShapeMismatch(format!(
            "arrangement lives in R^{}, data in R^{}",
            arr.ambient_dim(),
            data.ambient_dim()
        )));
    }
    Ok((0..arr.num_subspaces()).map(|k| arr.members(k)).collect())
}

/// Checks `max sigma_d(Y~_i) > sqrt(d_i) max_col ||Y_{-i}|| max_{j != i} cos(theta_ij)`
/// for every subspace. The maximum is over every `d_i`-column submatrix of
/// `Y_i` when there are at most `submatrix_budget` of them, otherwise over
/// `submatrix_budget` distinct ones drawn uniformly with `seed`.
pub fn check_thm3<T: Real>(
    data: &DataMatrix<T>,
    arr: &SubspaceArrangement<T>,
    submatrix_budget: usize,
    seed: u64,
) -> Result<Thm3Report<T>> {
    if submatrix_budget == 0 {
        return Err(SscError::InvalidConfig("submatrix budget must be positive".into()));
    }
    let members = members_checked(data, arr)?;
    let angles = angle_report(arr)?;
    let y = data.values();
    let dims = arr.dims();
    let mut report = Thm3Report {
        per_subspace_lhs: Vec::new(),
        per_subspace_rhs: Vec::new(),
        holds: Vec::new(),
        exhaustive: Vec::new(),
    };
    for (i, idx) in members.iter().enumerate() {
        let d = dims[i];
        let yi = select_columns(y, idx);
        let rank = numerical_rank(&yi, RANK_TOL);
        if rank < d {
            return Err(SscError::RankDeficient { subspace: i, rank, expected: d });
        }
        let count = binomial(idx.len(), d);
        let exhaustive = count.is_some_and(|c| c <= submatrix_budget as u128);
        let subsets: Vec<Vec<usize>> = if exhaustive {
            (0..idx.len()).combinations(d).collect()
        } else {
            let mut rng = seeded(derive_seed(seed, &[i as u64]));
            let mut seen = HashSet::with_capacity(submatrix_budget);
            while seen.len() < submatrix_budget {
                let mut s = sample(&mut rng, idx.len(), d).into_vec();
                s.sort_unstable();
                seen.insert(s);
            }
            let mut v: Vec<Vec<usize>> = seen.into_iter().collect();
            v.sort_unstable();
            v
        };
        let lhs = subsets
            .par_iter()
            .filter_map(|s| {
                let cols: Vec<usize> = s.iter().map(|&k| idx[k]).collect();
                sigma_min_full_rank(&select_columns(y, &cols))
            })
            .reduce(T::zero, |a, b| a.max(b));
        let others_norm = (0..y.ncols())
            .filter(|&c| arr.labels()[c] != i)
            .fold(T::zero(), |acc, c| acc.max(y.column(c).norm()));
        let rhs = T::from_count(d).sqrt() * others_norm * angles.max_cos_to_others(i);
        report.per_subspace_lhs.push(lhs);
        report.per_subspace_rhs.push(rhs);
        report.holds.push(lhs > rhs);
        report.exhaustive.push(exhaustive);
    }
    Ok(report)
}

/// Orthonormal basis of the columns of `m` above the rank threshold.
fn range_basis<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| top > T::zero() && svd.singular_values[k] > top * T::lit(RANK_TOL))
        .collect();
    select_columns(&u, &keep)
}

/// Orthonormal basis of `S_i` intersected with the sum of the other subspaces.
pub fn intersection_basis<T: Real>(arr: &SubspaceArrangement<T>, i: usize) -> Result<DMatrix<T>> {
    if i >= arr.num_subspaces() {
        return Err(SscError::InvalidConfig(format!("no subspace {i}")));
    }
    let bases = arr.bases();
    let others: Vec<&DMatrix<T>> = bases.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, b)| b).collect();
    let ui = &bases[i];
    if others.is_empty() || ui.ncols() == 0 {
        return Ok(DMatrix::zeros(arr.ambient_dim(), 0));
    }
    let v = range_basis(&hstack(&others));
    let residual = ui - &v * (v.transpose() * ui);
    let svd = residual.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= T::lit(INTERSECTION_TOL))
        .collect();
    let coords = DMatrix::from_fn(ui.ncols(), null.len(), |r, c| vt[(null[c], r)]);
    Ok(range_basis(&(ui * coords)))
}

/// Arrangement spanned by each labelled group of points, with each basis
/// sized by the numerical rank of its group.
pub fn estimate_arrangement<T: Real>(data: &DataMatrix<T>, labels: &[usize]) -> Result<SubspaceArrangement<T>> {
    if labels.len() != data.num_points() {
        return Err(SscError::LengthMismatch { left: labels.len(), right: data.num_points() });
    }
    let n = labels.iter().max().map_or(0, |m| m + 1);
    let bases = (0..n)
        .map(|k| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&c| labels[c] == k).collect();
            range_basis(&select_columns(data.values(), &idx))
        })
        .collect();
    SubspaceArrangement::new(bases, labels.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thm2Margin<T: Real> {
    /// `min ||a_{-i}||_1 - ||a_i||_1` over the samples; `+inf` when the
    /// intersection is trivial. Positive values are evidence, negative values
    /// certify a counterexample.
    pub min_margin: f64,
    pub samples_tested: usize,
    /// Sample attaining the minimum.
    pub witness: Option<DVector<T>>,
    /// Whether every restricted solve met the ADMM tolerance.
    pub converged: bool,
}

fn ls_residual<T: Real>(basis: &DMatrix<T>, x: &DVector<T>) -> f64 {
    (x - basis * (basis.transpose() * x)).norm().as_f64()
}

/// Samples unit vectors in the intersection of `S_i` with the other
/// subspaces and compares the minimum `l1` representation using points of
/// `S_i` against the one using all other points.
pub fn check_thm2_margin<T: Real>(
    data: &DataMatrix<T>,
    arr: &SubspaceArrangement<T>,
    subspace_index: usize,
    num_samples: usize,
    seed: u64,
    cfg: &AdmmConfig,
) -> Result<Thm2Margin<T>> {
    if num_samples == 0 {
        return Err(SscError::InvalidConfig("need at least one sample".into()));
    }
    let members = members_checked(data, arr)?;
    let basis = intersection_basis(arr, subspace_index)?;
    if basis.ncols() == 0 {
        return Ok(Thm2Margin { min_margin: f64::INFINITY, samples_tested: 0, witness: None, converged: true });
    }
    let y = data.values();
    let own = select_columns(y, &members[subspace_index]);
    let rest_idx: Vec<usize> = (0..y.ncols()).filter(|&c| arr.labels()[c] != subspace_index).collect();
    let rest = select_columns(y, &rest_idx);
    let own_range = range_basis(&own);
    let rest_range = range_basis(&rest);

    let samples: Vec<DVector<T>> = (0..num_samples)
        .map(|s| {
            let mut rng = seeded(derive_seed(seed, &[s as u64]));
            loop {
                let g = DVector::<T>::from_fn(basis.ncols(), |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
                let x = &basis * g;
                let norm = x.norm();
                if norm > T::zero() {
                    break x / norm;
                }
            }
        })
        .collect();
    for x in &samples {
        let residual = ls_residual(&own_range, x).max(ls_residual(&rest_range, x));
        if residual > FEASIBILITY_TOL {
            return Err(SscError::RestrictedInfeasible { residual });
        }
    }
    let targets = DMatrix::from_columns(&samples);
    let (a_own, conv_own) = basis_pursuit(&own, &targets, cfg)?;
    let (a_rest, conv_rest) = basis_pursuit(&rest, &targets, cfg)?;
    let l1 = |m: &DMatrix<T>, k: usize| m.column(k).iter().fold(0.0, |a, v| a + v.abs().as_f64());
    let (best, margin) = (0..num_samples)
        .map(|k| (k, l1(&a_rest, k) - l1(&a_own, k)))
        .fold((0, f64::INFINITY), |acc, (k, m)| if m < acc.1 { (k, m) } else { acc });
    Ok(Thm2Margin {
        min_margin: margin,
        samples_tested: num_samples,
        witness: Some(samples[best].clone()),
        converged: conv_own && conv_rest,
    })
}
