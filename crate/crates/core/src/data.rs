//! Domain types shared by the solver, spectral, theory and synthesis code.
//!
//! Data points are stored as columns: a `D x N` matrix holds `N` points in
//! `R^D`. Labels are 0-based in memory; file formats convert to 1-based.

use nalgebra::DMatrix;

use crate::error::{Result, SscError};
use crate::scalar::Real;

/// `D x N` matrix of column data points with optional known-entry masks.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T: Real> {
    values: DMatrix<T>,
    masks: Option<Vec<Vec<usize>>>,
}

impl<T: Real> DataMatrix<T> {
    pub fn new(values: DMatrix<T>) -> Self {
        Self { values, masks: None }
    }

    /// Attaches one sorted list of known (0-based) row indices per point.
    pub fn with_masks(values: DMatrix<T>, masks: Vec<Vec<usize>>) -> Result<Self> {
        if masks.len() != values.ncols() {
            return Err(SscError::LengthMismatch { left: masks.len(), right: values.ncols() });
        }
        let d = values.nrows();
        let masks = masks
            .into_iter()
            .map(|mut m| {
                m.sort_unstable();
                m.dedup();
                m
            })
            .collect::<Vec<_>>();
        if let Some(&bad) = masks.iter().flatten().find(|&&r| r >= d) {
            return Err(SscError::ShapeMismatch(format!("mask row {bad} outside {d} rows")));
        }
        Ok(Self { values, masks: Some(masks) })
    }

    pub fn from_column_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        Self::new(DMatrix::from_column_slice(rows, cols, data))
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<T> {
        self.values
    }

    pub fn masks(&self) -> Option<&[Vec<usize>]> {
        self.masks.as_deref()
    }

    pub fn ambient_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn without_masks(self) -> Self {
        Self { values: self.values, masks: None }
    }
}

/// Checks the structural invariants of a data matrix and hands it back untouched.
pub fn validate<T: Real>(data: DataMatrix<T>) -> Result<DataMatrix<T>> {
    check(&data)?;
    Ok(data)
}

pub(crate) fn check<T: Real>(data: &DataMatrix<T>) -> Result<()> {
    let y = data.values();
    if y.nrows() == 0 {
        return Err(SscError::ShapeMismatch("data has no rows".into()));
    }
    if y.ncols() < 2 {
        return Err(SscError::TooFewPoints { points: y.ncols() });
    }
    for (col, column) in y.column_iter().enumerate() {
        if let Some(row) = column.iter().position(|v| !v.is_finite_value()) {
            return Err(SscError::NonFinite { row, col });
        }
    }
    if let Some(masks) = data.masks() {
        if let Some(point) = masks.iter().position(Vec::is_empty) {
            return Err(SscError::EmptyMask { point });
        }
    }
    Ok(())
}

/// Scales every column to unit Euclidean norm.
pub fn normalize_unit_columns<T: Real>(data: &DataMatrix<T>) -> Result<DataMatrix<T>> {
    let mut values = data.values().clone();
    for (col, mut column) in values.column_iter_mut().enumerate() {
        let norm = column.norm();
        if norm <= T::zero() {
            return Err(SscError::ZeroColumn { col });
        }
        column.unscale_mut(norm);
    }
    Ok(DataMatrix { values, masks: data.masks.clone() })
}

/// `N x N` self-expressive coefficients with an exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix<T: Real>(DMatrix<T>);

impl<T: Real> CoefficientMatrix<T> {
    /// Wraps a square finite matrix; a nonzero diagonal is rejected.
    pub fn new(values: DMatrix<T>) -> Result<Self> {
        if !values.is_square() {
            return Err(SscError::ShapeMismatch(format!(
                "coefficient matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for (col, column) in values.column_iter().enumerate() {
            if let Some(row) = column.iter().position(|v| !v.is_finite_value()) {
                return Err(SscError::NonFinite { row, col });
            }
        }
        if let Some(i) = (0..values.nrows()).find(|&i| values[(i, i)] != T::zero()) {
            return Err(SscError::InvalidConfig(format!("diagonal entry {i} of C is nonzero")));
        }
        Ok(Self(values))
    }

    /// Zeroes the diagonal of a square matrix instead of rejecting it.
    pub fn with_zeroed_diagonal(mut values: DMatrix<T>) -> Result<Self> {
        let n = values.nrows().min(values.ncols());
        for i in 0..n {
            values[(i, i)] = T::zero();
        }
        Self::new(values)
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_values(self) -> DMatrix<T> {
        self.0
    }

    pub fn num_points(&self) -> usize {
        self.0.ncols()
    }
}

/// Which corruption terms the self-expressive program models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `Y = YC`, solved through a heavily penalized noise term.
    Exact,
    /// Dense noise `Z` only.
    NoiseOnly,
    /// Sparse outlying entries `E` only.
    OutlierOnly,
    /// Both `E` and `Z`.
    NoiseAndOutlier,
}

impl Variant {
    pub fn uses_noise(self) -> bool {
        matches!(self, Variant::NoiseOnly | Variant::NoiseAndOutlier)
    }

    pub fn uses_outliers(self) -> bool {
        matches!(self, Variant::OutlierOnly | Variant::NoiseAndOutlier)
    }
}

/// Program variant plus its regularization multipliers.
///
/// The noise weight is `lambda_z = alpha_z / mu_z` and the outlier weight
/// `lambda_e = alpha_e / mu_e`; multipliers above 1 keep every column away
/// from the trivial all-zero representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub variant: Variant,
    pub affine: bool,
    pub alpha_z: f64,
    pub alpha_e: f64,
    /// Weight of the row-sparsity term `sum_i ||c^i||_2`; zero disables it.
    pub lambda_r: f64,
    pub normalize_columns: bool,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            variant: Variant::NoiseOnly,
            affine: false,
            alpha_z: 800.0,
            alpha_e: 20.0,
            lambda_r: 0.0,
            normalize_columns: true,
        }
    }
}

impl ProblemSpec {
    pub fn exact() -> Self {
        Self { variant: Variant::Exact, ..Self::default() }
    }

    pub fn noise(alpha_z: f64) -> Self {
        Self { variant: Variant::NoiseOnly, alpha_z, ..Self::default() }
    }

    pub fn outlier(alpha_e: f64) -> Self {
        Self { variant: Variant::OutlierOnly, alpha_e, ..Self::default() }
    }

    pub fn noise_and_outlier(alpha_z: f64, alpha_e: f64) -> Self {
        Self { variant: Variant::NoiseAndOutlier, alpha_z, alpha_e, ..Self::default() }
    }

    pub fn affine(mut self, affine: bool) -> Self {
        self.affine = affine;
        self
    }

    pub fn normalize(mut self, normalize: bool) -> Self {
        self.normalize_columns = normalize;
        self
    }

    pub fn row_sparsity(mut self, lambda_r: f64) -> Self {
        self.lambda_r = lambda_r;
        self
    }

    /// Rejects non-positive or non-finite weights. Multipliers in `(0, 1]`
    /// are accepted with a warning since they deliberately enter the regime
    /// where some columns collapse to zero.
    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SscError::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if self.variant.uses_noise() {
            positive("alpha_z", self.alpha_z)?;
            if self.alpha_z <= 1.0 {
                log::warn!("alpha_z = {} <= 1: some columns may be forced to zero", self.alpha_z);
            }
        }
        if self.variant.uses_outliers() {
            positive("alpha_e", self.alpha_e)?;
            if self.alpha_e <= 1.0 {
                log::warn!("alpha_e = {} <= 1: some columns may be forced to zero", self.alpha_e);
            }
        }
        if !(self.lambda_r.is_finite() && self.lambda_r >= 0.0) {
            return Err(SscError::InvalidConfig(format!(
                "lambda_r must be nonnegative, got {}",
                self.lambda_r
            )));
        }
        Ok(())
    }
}

/// Ground-truth orthonormal bases and the subspace label of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceArrangement<T: Real> {
    bases: Vec<DMatrix<T>>,
    labels: Vec<usize>,
}

impl<T: Real> SubspaceArrangement<T> {
    /// Builds an arrangement; every basis must be orthonormal to `1e-10`
    /// (`1e-5` for `f32`) and share the same ambient dimension.
    pub fn new(bases: Vec<DMatrix<T>>, labels: Vec<usize>) -> Result<Self> {
        if bases.is_empty() {
            return Err(SscError::InvalidConfig("arrangement needs at least one subspace".into()));
        }
        let ambient = bases[0].nrows();
        let tol = orthonormality_tolerance::<T>();
        for b in &bases {
            if b.nrows() != ambient {
                return Err(SscError::ShapeMismatch(format!(
                    "basis with {} rows in ambient dimension {ambient}",
                    b.nrows()
                )));
            }
            let dev = orthonormality_deviation(b);
            if dev > tol {
                return Err(SscError::NotOrthonormal { deviation: dev });
            }
        }
        let mut arr = Self { bases, labels: Vec::new() };
        arr.set_labels(labels)?;
        Ok(arr)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        self.set_labels(labels)?;
        Ok(self)
    }

    fn set_labels(&mut self, labels: Vec<usize>) -> Result<()> {
        let n = self.bases.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(SscError::InvalidConfig(format!("label {bad} with only {n} subspaces")));
        }
        if !labels.is_empty() {
            if let Some(empty) = (0..n).find(|k| !labels.contains(k)) {
                return Err(SscError::InvalidConfig(format!("subspace {empty} has no points")));
            }
        }
        self.labels = labels;
        Ok(())
    }

    pub fn bases(&self) -> &[DMatrix<T>] {
        &self.bases
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_subspaces(&self) -> usize {
        self.bases.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.bases[0].nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }

    /// Column indices of the points that belong to subspace `k`.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == k).map(|(i, _)| i).collect()
    }
}

pub(crate) fn orthonormality_tolerance<T: Real>() -> f64 {
    if std::mem::size_of::<T>() < 8 {
        1e-5
    } else {
        1e-10
    }
}

/// `max |U^T U - I|` entrywise.
pub fn orthonormality_deviation<T: Real>(u: &DMatrix<T>) -> f64 {
    let gram = u.transpose() * u;
    let mut dev = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)].as_f64() - target).abs());
        }
    }
    dev
}

/// Predicted segmentation plus the spectral and k-means diagnostics behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult<T: Real> {
    /// 0-based cluster ids in `0..n_clusters`, numbered by first appearance.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    /// Smallest eigenvalues of the normalized Laplacian, ascending.
    pub eigengap_spectrum: Vec<T>,
    pub kmeans_inertia: T,
}
