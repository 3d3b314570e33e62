//! Seeded k-means++ with Lloyd refinement over the rows of an embedding.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::rng::{derive_seed, seeded};
use crate::scalar::Real;

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KMeansFit<T: Real> {
    pub labels: Vec<usize>,
    pub inertia: T,
}

fn sq_dist<T: Real>(x: &DMatrix<T>, i: usize, centers: &DMatrix<T>, c: usize) -> T {
    let mut s = T::zero();
    for k in 0..x.ncols() {
        let d = x[(i, k)] - centers[(c, k)];
        s += d * d;
    }
    s
}

fn plus_plus_init<T: Real>(x: &DMatrix<T>, k: usize, rng: &mut impl Rng) -> DMatrix<T> {
    let (n, dim) = x.shape();
    let mut centers = DMatrix::<T>::zeros(k, dim);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.row_mut(0).copy_from(&x.row(first));
    let mut dist: Vec<T> = (0..n).map(|i| sq_dist(x, i, &centers, 0)).collect();
    for c in 1..k {
        let total = dist.iter().fold(0.0, |a, d| a + d.as_f64());
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                let d = d.as_f64();
                if d > 0.0 && target < d {
                    pick = Some(i);
                    break;
                }
                target -= d;
            }
            // Rounding can run off the end; fall back to the farthest point.
            pick.unwrap_or_else(|| {
                (0..n)
                    .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())
                    .unwrap()
            })
        } else {
            // Every point coincides with a center: take any unused point.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centers.row_mut(c).copy_from(&x.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, &centers, c));
        }
    }
    centers
}

fn assign<T: Real>(x: &DMatrix<T>, centers: &DMatrix<T>, labels: &mut [usize]) -> T {
    let mut inertia = T::zero();
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best = (0, sq_dist(x, i, centers, 0));
        for c in 1..centers.nrows() {
            let d = sq_dist(x, i, centers, c);
            if d < best.1 {
                best = (c, d);
            }
        }
        *label = best.0;
        inertia += best.1;
    }
    inertia
}

fn lloyd<T: Real>(x: &DMatrix<T>, k: usize, seed: u64) -> KMeansFit<T> {
    let (n, dim) = x.shape();
    let mut rng = seeded(seed);
    let mut centers = plus_plus_init(x, k, &mut rng);
    let mut labels = vec![0; n];
    let mut inertia = assign(x, &centers, &mut labels);
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = DMatrix::<T>::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for j in 0..dim {
                sums[(l, j)] += x[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point worst served by its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(x, a, &centers, labels[a])
                            .partial_cmp(&sq_dist(x, b, &centers, labels[b]))
                            .unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).copy_from(&x.row(far));
            } else {
                let cnt = T::from_count(counts[c]);
                for j in 0..dim {
                    centers[(c, j)] = sums[(c, j)] / cnt;
                }
            }
        }
        let next = assign(x, &centers, &mut labels);
        let change = (inertia - next).abs().as_f64();
        let scale = inertia.as_f64().max(f64::MIN_POSITIVE);
        inertia = next;
        if change <= RELATIVE_TOLERANCE * scale {
            break;
        }
    }
    KMeansFit { labels, inertia }
}

/// Best-inertia segmentation of the rows of `x` into `k` clusters over
/// `restarts` independently seeded runs. Ties keep the earliest restart.
pub fn kmeans<T: Real>(x: &DMatrix<T>, k: usize, seed: u64, restarts: usize) -> KMeansFit<T> {
    let fits: Vec<KMeansFit<T>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| lloyd(x, k, derive_seed(seed, &[r as u64])))
        .collect();
    fits.into_iter()
        .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
        .expect("at least one restart")
}
