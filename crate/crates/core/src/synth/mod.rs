//! Controlled union-of-subspaces benchmarks.
//!
//! Subspaces are rotated copies of one random `D x d` frame inside a random
//! `D x 2d` frame `[A B]`: subspace `k` is spanned by
//! `A cos(k theta) + B sin(k theta)`. Neighbouring subspaces then meet at
//! principal angle `theta` in every direction and, with three subspaces,
//! each one lies in the direct sum of the other two.

pub mod metrics;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{DataMatrix, ProblemSpec, SubspaceArrangement};
use crate::error::{Result, SscError};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Real;
use crate::solver::{solve, AdmmConfig};
use crate::spectral::{build_graph, normalize_coefficients, spectral_cluster, DEFAULT_RESTARTS};

pub use metrics::{clustering_error, ssr_error, SsrError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub theta_deg: f64,
    pub points_per_subspace: usize,
    pub num_subspaces: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    pub outlier_magnitude: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            ambient_dim: 50,
            subspace_dim: 4,
            theta_deg: 60.0,
            points_per_subspace: 128,
            num_subspaces: 3,
            seed: 0,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_magnitude: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(SscError::InvalidConfig(m));
        if self.subspace_dim == 0 || self.num_subspaces == 0 {
            return bad("subspace dimension and count must be positive".into());
        }
        if !(self.theta_deg > 0.0 && self.theta_deg <= 90.0) {
            return bad(format!("theta must lie in (0, 90] degrees, got {}", self.theta_deg));
        }
        if self.points_per_subspace < self.subspace_dim + 1 {
            return bad(format!(
                "need at least d + 1 = {} points per subspace, got {}",
                self.subspace_dim + 1,
                self.points_per_subspace
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma must be nonnegative, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad(format!("outlier fraction must lie in [0, 1), got {}", self.outlier_fraction));
        }
        if !(self.outlier_magnitude.is_finite() && self.outlier_magnitude > 0.0) {
            return bad(format!("outlier magnitude must be positive, got {}", self.outlier_magnitude));
        }
        if 2 * self.subspace_dim > self.ambient_dim {
            return Err(SscError::DimensionTooSmall {
                ambient: self.ambient_dim,
                required: 2 * self.subspace_dim,
            });
        }
        Ok(())
    }

    fn orthogonal_variant(&self) -> bool {
        self.theta_deg == 90.0 && self.num_subspaces * self.subspace_dim <= self.ambient_dim
    }
}

fn gaussian<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

/// Random `rows x cols` matrix with orthonormal columns.
pub fn random_orthonormal<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<T> {
    let g = gaussian::<T>(rows, cols, rng);
    let mut q = g.qr().q();
    // Re-orthonormalize once more to push f32 round-off below tolerance.
    for j in 0..cols {
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let qk = q.column(k).clone_owned();
            q.column_mut(j).axpy(-proj, &qk, T::one());
        }
        let n = q.column(j).norm();
        q.column_mut(j).unscale_mut(n);
    }
    q
}

/// Builds the rotated-frame arrangement described in the module docs.
///
/// At exactly 90 degrees, when `n d <= D`, the subspaces are instead spanned
/// by disjoint blocks of one orthonormal frame (mutually orthogonal), since
/// the chain would make subspaces 1 and 3 coincide.
pub fn generate_arrangement<T: Real>(spec: &SynthSpec) -> Result<SubspaceArrangement<T>> {
    spec.check()?;
    let (dim, d, n) = (spec.ambient_dim, spec.subspace_dim, spec.num_subspaces);
    let mut rng = seeded(derive_seed(spec.seed, &[0]));
    let bases = if spec.orthogonal_variant() {
        let frame = random_orthonormal::<T>(dim, n * d, &mut rng);
        (0..n).map(|k| frame.columns(k * d, d).into_owned()).collect()
    } else {
        let frame = random_orthonormal::<T>(dim, 2 * d, &mut rng);
        let a = frame.columns(0, d);
        let b = frame.columns(d, d);
        (0..n)
            .map(|k| {
                let angle = (k as f64) * spec.theta_deg.to_radians();
                a * T::lit(angle.cos()) + b * T::lit(angle.sin())
            })
            .collect()
    };
    SubspaceArrangement::new(bases, Vec::new())
}

/// Draws `ng` unit-norm points per subspace from isotropic Gaussian
/// coefficients; returns the data with the arrangement labelled accordingly.
pub fn sample_points<T: Real>(
    arr: &SubspaceArrangement<T>,
    ng: usize,
    seed: u64,
) -> Result<(DataMatrix<T>, SubspaceArrangement<T>)> {
    if ng == 0 {
        return Err(SscError::InvalidConfig("need at least one point per subspace".into()));
    }
    let mut rng = seeded(seed);
    let n = arr.num_subspaces();
    let mut y = DMatrix::<T>::zeros(arr.ambient_dim(), n * ng);
    let mut labels = Vec::with_capacity(n * ng);
    for (k, basis) in arr.bases().iter().enumerate() {
        for p in 0..ng {
            let col = loop {
                let coef = gaussian::<T>(basis.ncols(), 1, &mut rng);
                let v = basis * coef;
                let norm = v.norm();
                if norm > T::zero() {
                    break v / norm;
                }
            };
            y.column_mut(k * ng + p).copy_from(&col);
            labels.push(k);
        }
    }
    let labelled = arr.clone().with_labels(labels)?;
    Ok((DataMatrix::new(y), labelled))
}

/// Adds Gaussian noise and sparse outlying entries as configured in `spec`.
pub fn corrupt<T: Real>(data: &DataMatrix<T>, spec: &SynthSpec) -> DataMatrix<T> {
    let mut y = data.values().clone();
    let (dim, n) = y.shape();
    let mut rng = seeded(derive_seed(spec.seed, &[2]));
    if spec.noise_sigma > 0.0 {
        for v in y.iter_mut() {
            *v += T::lit(spec.noise_sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }
    let k = (spec.outlier_fraction * dim as f64).floor() as usize;
    if k > 0 {
        for j in 0..n {
            for row in sample(&mut rng, dim, k.min(dim)) {
                let m = spec.outlier_magnitude;
                y[(row, j)] += T::lit(rng.random_range(-m..=m));
            }
        }
    }
    match data.masks() {
        Some(m) => DataMatrix::with_masks(y, m.to_vec()).expect("masks unchanged"),
        None => DataMatrix::new(y),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub ng: usize,
    pub trial: usize,
    pub ssr_error: f64,
    pub clustering_error: f64,
    pub converged: bool,
    /// Connected components of the similarity graph (not part of the CSV).
    pub graph_components: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub theta_deg: f64,
    pub ng: usize,
    pub trials: usize,
    pub mean_ssr_error: f64,
    pub mean_clustering_error: f64,
    /// Standard error of the mean ssr error.
    pub sem_ssr_error: f64,
    pub sem_clustering_error: f64,
    pub nonconverged: usize,
}

pub const SWEEP_CSV_HEADER: &str = "theta_deg,ng,trial,ssr_error,clustering_error,converged";
pub const SUMMARY_CSV_HEADER: &str =
    "theta_deg,ng,trials,mean_ssr_error,mean_clustering_error,sem_ssr_error,sem_clustering_error,nonconverged";

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.theta_deg, r.ng, r.trial, r.ssr_error, r.clustering_error, r.converged
            ));
        }
        s
    }

    /// Per-cell means and standard errors, in row order.
    pub fn summary(&self) -> Vec<CellSummary> {
        let mut cells: Vec<(f64, usize)> = Vec::new();
        for r in &self.rows {
            if !cells.iter().any(|&(t, g)| t == r.theta_deg && g == r.ng) {
                cells.push((r.theta_deg, r.ng));
            }
        }
        cells
            .into_iter()
            .map(|(theta, ng)| {
                let rows: Vec<&SweepRow> =
                    self.rows.iter().filter(|r| r.theta_deg == theta && r.ng == ng).collect();
                let ssr: Vec<f64> = rows.iter().map(|r| r.ssr_error).collect();
                let ce: Vec<f64> = rows.iter().map(|r| r.clustering_error).collect();
                let (mean_ssr_error, sem_ssr_error) = mean_sem(&ssr);
                let (mean_clustering_error, sem_clustering_error) = mean_sem(&ce);
                CellSummary {
                    theta_deg: theta,
                    ng,
                    trials: rows.len(),
                    mean_ssr_error,
                    mean_clustering_error,
                    sem_ssr_error,
                    sem_clustering_error,
                    nonconverged: rows.iter().filter(|r| !r.converged).count(),
                }
            })
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(SUMMARY_CSV_HEADER);
        s.push('\n');
        for c in self.summary() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.theta_deg,
                c.ng,
                c.trials,
                c.mean_ssr_error,
                c.mean_clustering_error,
                c.sem_ssr_error,
                c.sem_clustering_error,
                c.nonconverged
            ));
        }
        s
    }
}

/// Seed of one sweep trial, independent of execution order.
pub fn trial_seed(base: u64, theta_deg: f64, ng: usize, trial: usize) -> u64 {
    derive_seed(base, &[theta_deg.to_bits(), ng as u64, trial as u64])
}

/// Runs one trial: generate, sample, corrupt, solve, cluster, score.
pub fn run_trial<T: Real>(
    base_spec: &SynthSpec,
    problem: &ProblemSpec,
    cfg: &AdmmConfig,
    theta_deg: f64,
    ng: usize,
    trial: usize,
) -> Result<SweepRow> {
    let seed = trial_seed(base_spec.seed, theta_deg, ng, trial);
    let spec = SynthSpec { theta_deg, points_per_subspace: ng, seed, ..*base_spec };
    let arr = generate_arrangement::<T>(&spec)?;
    let (clean, arr) = sample_points(&arr, ng, derive_seed(seed, &[1]))?;
    let data = corrupt(&clean, &spec);
    let sol = solve(&data, problem, cfg)?;
    let labels = arr.labels();
    let ssr = match ssr_error(&sol.coefficients, labels) {
        Ok(e) => e.value,
        Err(SscError::ZeroColumn { .. }) => 1.0,
        Err(e) => return Err(e),
    };
    let graph = build_graph(&normalize_coefficients(&sol.coefficients));
    let components = graph.num_components();
    let pred = match spectral_cluster(&graph, spec.num_subspaces, derive_seed(seed, &[3]), DEFAULT_RESTARTS) {
        Ok(res) => res.labels,
        Err(SscError::EmptyGraph) => vec![0; labels.len()],
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        theta_deg,
        ng,
        trial,
        ssr_error: ssr,
        clustering_error: clustering_error(&pred, labels)?,
        converged: sol.diagnostics.converged,
        graph_components: components,
    })
}

/// Runs `trials` trials for every `(theta_deg, ng)` cell of `grid`. Rows are
/// ordered by `(theta, ng, trial)` regardless of scheduling.
pub fn run_sweep<T: Real>(
    grid: &[(f64, usize)],
    trials: usize,
    base_spec: &SynthSpec,
    problem: &ProblemSpec,
    cfg: &AdmmConfig,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(SscError::InvalidConfig("sweep grid is empty".into()));
    }
    let tasks: Vec<(f64, usize, usize)> = grid
        .iter()
        .flat_map(|&(t, g)| (0..trials).map(move |k| (t, g, k)))
        .collect();
    let mut rows = tasks
        .par_iter()
        .map(|&(t, g, k)| run_trial::<T>(base_spec, problem, cfg, t, g, k))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.theta_deg
            .total_cmp(&b.theta_deg)
            .then(a.ng.cmp(&b.ng))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(SweepResult { rows })
}
