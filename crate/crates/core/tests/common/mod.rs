#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ssc_core::DataMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn unit_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    m
}

/// `D x N` matrix of unit-norm Gaussian columns.
pub fn random_unit_data(d: usize, n: usize, seed: u64) -> DataMatrix<f64> {
    let mut r = rng(seed);
    DataMatrix::new(unit_columns(gaussian(d, n, &mut r)))
}

/// Min `||c||_1` s.t. `y_i = sum_{j != i} c_j y_j`, solved as an LP over
/// `c = u - v` with `u, v >= 0`. Independent of the ADMM code path.
pub fn lp_l1_column(y: &DMatrix<f64>, i: usize) -> f64 {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let (d, n) = y.shape();
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::new();
    for j in 0..n {
        if j == i {
            continue;
        }
        let u = p.add_var(1.0, (0.0, f64::INFINITY));
        let v = p.add_var(1.0, (0.0, f64::INFINITY));
        vars.push((j, u, v));
    }
    for k in 0..d {
        let mut expr = LinearExpr::empty();
        for &(j, u, v) in &vars {
            expr.add(u, y[(k, j)]);
            expr.add(v, -y[(k, j)]);
        }
        p.add_constraint(expr, ComparisonOp::Eq, y[(k, i)]);
    }
    p.solve().expect("LP feasible").objective()
}
