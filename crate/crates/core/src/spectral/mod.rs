//! From coefficients to a segmentation: similarity graph, normalized
//! Laplacian, bottom-eigenvector embedding and k-means.

pub mod kmeans;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::{ClusteringResult, CoefficientMatrix};
use crate::error::{Result, SscError};
use crate::scalar::Real;

pub const DEFAULT_RESTARTS: usize = 20;

/// Embedding rows with norm below this are left at zero instead of normalized.
pub const ZERO_ROW_NORM: f64 = 1e-12;

/// Symmetric nonnegative weights with zero diagonal, plus vertex degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph<T: Real> {
    weights: DMatrix<T>,
    degree: Vec<T>,
}

impl<T: Real> SimilarityGraph<T> {
    pub fn from_weights(weights: DMatrix<T>) -> Result<Self> {
        if !weights.is_square() {
            return Err(SscError::ShapeMismatch("weight matrix must be square".into()));
        }
        let n = weights.nrows();
        for i in 0..n {
            if weights[(i, i)] != T::zero() {
                return Err(SscError::InvalidConfig(format!("weight ({i}, {i}) is nonzero")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite_value() || w < T::zero() || w != weights[(j, i)] {
                    return Err(SscError::InvalidConfig(format!(
                        "weights must be finite, nonnegative and symmetric; bad entry ({i}, {j})"
                    )));
                }
            }
        }
        let degree = weights.row_iter().map(|r| r.sum()).collect();
        Ok(Self { weights, degree })
    }

    pub fn weights(&self) -> &DMatrix<T> {
        &self.weights
    }

    pub fn degree(&self) -> &[T] {
        &self.degree
    }

    pub fn num_vertices(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.iter().all(|w| *w == T::zero())
    }

    /// Vertex -> component id, ids numbered by smallest member.
    pub fn connected_components(&self) -> Vec<usize> {
        let n = self.num_vertices();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(v) = stack.pop() {
                for u in 0..n {
                    if comp[u] == usize::MAX && self.weights[(v, u)] > T::zero() {
                        comp[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn num_components(&self) -> usize {
        self.connected_components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// `I - D^{-1/2} W D^{-1/2}`; isolated vertices get `D^{-1/2} = 0`.
    pub fn normalized_laplacian(&self) -> DMatrix<T> {
        let n = self.num_vertices();
        let inv_sqrt: Vec<T> = self
            .degree
            .iter()
            .map(|&d| if d > T::zero() { T::one() / d.sqrt() } else { T::zero() })
            .collect();
        DMatrix::from_fn(n, n, |i, j| {
            let off = self.weights[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            if i == j {
                T::one() - off
            } else {
                -off
            }
        })
    }
}

/// Scales each nonzero column to unit max-abs entry.
pub fn normalize_coefficients<T: Real>(c: &CoefficientMatrix<T>) -> CoefficientMatrix<T> {
    let mut m = c.values().clone();
    for mut col in m.column_iter_mut() {
        let peak = col.amax();
        if peak > T::zero() {
            col.unscale_mut(peak);
        }
    }
    CoefficientMatrix::new(m).expect("scaling keeps the diagonal zero")
}

/// `W = |C| + |C|^T`.
pub fn build_graph<T: Real>(c: &CoefficientMatrix<T>) -> SimilarityGraph<T> {
    let a = c.values().abs();
    let w = &a + a.transpose();
    SimilarityGraph::from_weights(w).expect("|C| + |C|^T is a valid weight matrix")
}

/// Ascending eigenvalues with matching eigenvector columns.
fn sorted_eigen<T: Real>(l: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(l);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Ascending spectrum of the normalized Laplacian.
pub fn laplacian_spectrum<T: Real>(graph: &SimilarityGraph<T>) -> Vec<T> {
    sorted_eigen(graph.normalized_laplacian()).0
}

fn relabel_by_first_appearance(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Segments the graph into `n` groups from the `n` bottom eigenvectors of
/// its normalized Laplacian.
pub fn spectral_cluster<T: Real>(
    graph: &SimilarityGraph<T>,
    n: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusteringResult<T>> {
    let size = graph.num_vertices();
    if n == 0 || n > size {
        return Err(SscError::TooManyClusters { requested: n, points: size });
    }
    if n > 1 && graph.is_empty() {
        return Err(SscError::EmptyGraph);
    }
    let isolated = graph.degree().iter().filter(|d| **d == T::zero()).count();
    if isolated > 0 {
        log::warn!("{isolated} isolated vertices get a zero embedding row");
    }
    let (values, vectors) = sorted_eigen(graph.normalized_laplacian());
    let mut embedding = vectors.columns(0, n).into_owned();
    let mut flagged = 0;
    for mut row in embedding.row_iter_mut() {
        let norm = row.norm();
        if norm.as_f64() < ZERO_ROW_NORM {
            row.fill(T::zero());
            flagged += 1;
        } else {
            row.unscale_mut(norm);
        }
    }
    if flagged > 0 {
        log::warn!("{flagged} embedding rows are numerically zero");
    }
    let fit = kmeans::kmeans(&embedding, n, seed, restarts);
    let (labels, n_clusters) = relabel_by_first_appearance(&fit.labels);
    let keep = (n + 1).min(size);
    Ok(ClusteringResult {
        labels,
        n_clusters,
        eigengap_spectrum: values[..keep].to_vec(),
        kmeans_inertia: fit.inertia,
    })
}

/// Number of groups chosen by the largest gap `lambda_{k+1} - lambda_k` in
/// the ascending Laplacian spectrum, for `k` in `1..=n_max` (capped at `N - 1`).
pub fn estimate_num_subspaces<T: Real>(graph: &SimilarityGraph<T>, n_max: usize) -> Result<usize> {
    let size = graph.num_vertices();
    if n_max == 0 || n_max > size {
        return Err(SscError::TooManyClusters { requested: n_max, points: size });
    }
    if graph.is_empty() {
        return Err(SscError::EmptyGraph);
    }
    let values = laplacian_spectrum(graph);
    let upper = n_max.min(size - 1);
    let mut best = (1, T::zero() - T::one());
    for k in 1..=upper {
        let gap = values[k] - values[k - 1];
        if gap > best.1 {
            best = (k, gap);
        }
    }
    Ok(best.0)
}
