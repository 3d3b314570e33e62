//! Proximal maps used by the coefficient and outlier updates.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Soft thresholding `(|v| - eta)_+ sgn(v)`.
#[inline]
pub fn shrink<T: Real>(v: T, eta: T) -> T {
    let mag = v.abs() - eta;
    if mag <= T::zero() {
        T::zero()
    } else if v > T::zero() {
        mag
    } else {
        -mag
    }
}

/// Elementwise [`shrink`] over a matrix.
pub fn shrink_matrix<T: Real>(m: &DMatrix<T>, eta: T) -> DMatrix<T> {
    m.map(|v| shrink(v, eta))
}

/// Scales `u` by `max(1 - b / ||u||_2, 0)`.
pub fn group_shrink<T: Real>(u: &mut [T], b: T) {
    let norm = u.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if norm <= b || norm == T::zero() {
        u.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let scale = T::one() - b / norm;
    u.iter_mut().for_each(|x| *x *= scale);
}

/// Proximal operator of `a ||x||_1 + b ||x||_2`: soft thresholding by `a`
/// followed by group shrinkage by `b`.
pub fn prox_l1_plus_group<T: Real>(row: &DVector<T>, a: T, b: T) -> DVector<T> {
    let mut out = row.map(|v| shrink(v, a));
    if b > T::zero() {
        group_shrink(out.as_mut_slice(), b);
    }
    out
}
