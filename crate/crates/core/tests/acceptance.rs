//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL` line.
//!
//! Set `SSC_ACCEPTANCE_ONLY=1,4,9` to run a subset.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use common::{gaussian, lp_l1_column, random_unit_data, rng, unit_columns};
use ssc_core::dataio::project_common_rows;
use ssc_core::solver::{cross_fractions, lasso_zero_threshold, mu_e, mu_z, row_sparsity_norm, solve, AdmmConfig};
use ssc_core::spectral::{estimate_num_subspaces, DEFAULT_RESTARTS};
use ssc_core::synth::{
    clustering_error, generate_arrangement, random_orthonormal, run_sweep, sample_points, ssr_error, SynthSpec,
};
use ssc_core::theory::{check_thm3, classify_arrangement, ArrangementClass};
use ssc_core::{
    build_graph, normalize_coefficients, spectral_cluster, DataMatrix, ProblemSpec, SimilarityGraph, SscError,
    SubspaceArrangement,
};

const CROSS_TOL: f64 = 1e-5;
const ZERO_ERR: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
    /// Reported but not counted towards the test result.
    expected_failure: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, expected_failure: false }
    }
}

fn max_cross(c: &DMatrix<f64>, labels: &[usize]) -> f64 {
    cross_fractions(c, labels).into_iter().map(|f| f.unwrap_or(1.0)).fold(0.0, f64::max)
}

fn cluster_labels(c: &ssc_core::CoefficientMatrix<f64>, n: usize, seed: u64) -> Vec<usize> {
    let graph = build_graph(&normalize_coefficients(c));
    spectral_cluster(&graph, n, seed, DEFAULT_RESTARTS).expect("clustering").labels
}

/// Unit-norm points drawn from the column span of each basis.
fn points_in(bases: &[DMatrix<f64>], counts: &[usize], seed: u64) -> (DataMatrix<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for (k, (b, &m)) in bases.iter().zip(counts).enumerate() {
        let pts = unit_columns(b * gaussian(b.ncols(), m, &mut r));
        cols.extend(pts.column_iter().map(|c| c.into_owned()));
        labels.extend(std::iter::repeat_n(k, m));
    }
    (DataMatrix::new(DMatrix::from_columns(&cols)), labels)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let d = 3 + (seed as usize % 8);
        let n = d + 5 + (seed as usize * 7) % (30 - d - 4);
        let data = random_unit_data(d, n, 5000 + seed);
        let sol = solve(&data, &ProblemSpec::exact(), &AdmmConfig::default()).expect("solve");
        for i in 0..n {
            let lp = lp_l1_column(data.values(), i);
            let got: f64 = sol.coefficients.values().column(i).iter().map(|v| v.abs()).sum();
            worst = worst.max((got - lp).abs() / lp);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(worst < 1e-3 && secs < 60.0, format!("worst relative gap {worst:.2e} over 50 instances in {secs:.1}s"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut independent = true;
    for seed in 0..50u64 {
        let mut r = rng(7000 + seed);
        let d = 2 + (seed as usize % 3);
        let frame: DMatrix<f64> = random_orthonormal(3 * d, 3 * d, &mut r);
        let bases: Vec<DMatrix<f64>> = (0..3).map(|k| frame.columns(k * d, d).into_owned()).collect();
        let counts: Vec<usize> = (0..3).map(|_| r.random_range(d + 1..=4 * d)).collect();
        let (data, labels) = points_in(&bases, &counts, 7100 + seed);
        let arr = SubspaceArrangement::new(bases, labels.clone()).expect("arrangement");
        independent &= classify_arrangement(&arr) == ArrangementClass::Independent;
        let sol = solve(&data, &ProblemSpec::exact(), &AdmmConfig::default()).expect("solve");
        worst = worst.max(max_cross(sol.coefficients.values(), &labels));
    }
    Outcome::new(
        independent && worst < CROSS_TOL,
        format!("largest cross-subspace fraction {worst:.2e} over 50 independent arrangements"),
    )
}

fn criterion_3() -> Outcome {
    let thetas = [6.0, 15.0, 30.0, 45.0, 60.0];
    let ngs = [5, 16, 64, 128];
    let grid: Vec<(f64, usize)> = thetas.iter().flat_map(|&t| ngs.iter().map(move |&g| (t, g))).collect();
    let base = SynthSpec { seed: 2024, ..SynthSpec::default() };
    let start = Instant::now();
    let res = run_sweep::<f64>(&grid, 20, &base, &ProblemSpec::exact(), &AdmmConfig::default()).expect("sweep");
    let secs = start.elapsed().as_secs_f64();
    let cells = res.summary();
    let cell = |t: f64, g: usize| cells.iter().find(|c| c.theta_deg == t && c.ng == g).expect("cell");
    let best = cell(60.0, 128);
    let worst = cell(6.0, 5);
    let a = best.mean_ssr_error <= ZERO_ERR && best.mean_clustering_error <= ZERO_ERR;
    let b = worst.mean_ssr_error > 0.1 && worst.mean_clustering_error > 0.1;
    let along: Vec<_> = thetas.iter().map(|&t| cell(t, 128)).collect();
    let c = along
        .windows(2)
        .all(|w| w[1].mean_ssr_error <= w[0].mean_ssr_error + w[0].sem_ssr_error + w[1].sem_ssr_error);
    let trend: Vec<String> = along.iter().map(|s| format!("{:.3e}", s.mean_ssr_error)).collect();
    let nonconverged: usize = cells.iter().map(|c| c.nonconverged).sum();
    Outcome::new(
        a && b && c,
        format!(
            "(60,128) ssr {:.1e} ce {:.1e}; (6,5) ssr {:.3} ce {:.3}; ssr at ng=128 [{}]; {nonconverged} non-converged; {secs:.0}s",
            best.mean_ssr_error,
            best.mean_clustering_error,
            worst.mean_ssr_error,
            worst.mean_clustering_error,
            trend.join(", ")
        ),
    )
}

fn l1_normalized(data: &DataMatrix<f64>) -> DataMatrix<f64> {
    let mut y = data.values().clone();
    for mut c in y.column_iter_mut() {
        let s = c.lp_norm(1);
        c /= s;
    }
    DataMatrix::new(y)
}

fn trivial_columns(sol: &ssc_core::Solution64, data: &DataMatrix<f64>, tol: f64) -> usize {
    let c = sol.coefficients.values();
    let e = sol.errors.as_ref().expect("outlier block");
    (0..c.ncols())
        .filter(|&i| c.column(i).amax() <= tol && (e.column(i) - data.values().column(i)).amax() <= tol)
        .count()
}

fn criterion_4() -> Outcome {
    let cfg = AdmmConfig::default();
    let mut ok = true;
    let mut outlier_low = usize::MAX;
    let mut outlier_high = 0;
    let mut noise_low = usize::MAX;
    let mut noise_high = 0;
    for seed in 0..20u64 {
        let spec = SynthSpec { subspace_dim: 2, points_per_subspace: 32, seed: 9000 + seed, ..SynthSpec::default() };
        let arr = generate_arrangement::<f64>(&spec).expect("arrangement");
        let (clean, _) = sample_points(&arr, 32, 9100 + seed).expect("sample");

        let dense = l1_normalized(&clean);
        assert!((mu_e(&dense).expect("mu_e") - 1.0).abs() < 1e-12);
        let low = solve(&dense, &ProblemSpec::outlier(0.99).normalize(false), &cfg).expect("solve");
        let high = solve(&dense, &ProblemSpec::outlier(1.5).normalize(false), &cfg).expect("solve");
        let lo = trivial_columns(&low, &dense, 1e-4);
        let hi = trivial_columns(&high, &dense, 1e-4);
        outlier_low = outlier_low.min(lo);
        outlier_high = outlier_high.max(hi);

        let low = solve(&clean, &ProblemSpec::noise(0.99).normalize(false), &cfg).expect("solve");
        let high = solve(&clean, &ProblemSpec::noise(1.5).normalize(false), &cfg).expect("solve");
        let lo_n = low.diagnostics.zero_columns.len();
        let hi_n = high.diagnostics.zero_columns.len();
        noise_low = noise_low.min(lo_n);
        noise_high = noise_high.max(hi_n);
        ok &= lo >= 1 && hi == 0 && lo_n >= 1 && hi_n == 0;
    }
    Outcome::new(
        ok,
        format!(
            "outlier: min trivial columns {outlier_low} at 0.99, max {outlier_high} at 1.5; \
             noise: min zero columns {noise_low} at 0.99, max {noise_high} at 1.5"
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = AdmmConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let data = random_unit_data(10, 20, 11_000 + seed);
        let i = seed as usize % 20;
        let t = lasso_zero_threshold(&data, i).expect("threshold");
        let mz = mu_z(&data).expect("mu_z");
        // lambda_z = alpha_z / mu_z
        let sol = solve(&data, &ProblemSpec::noise(0.9 * t * mz).normalize(false), &cfg).expect("solve");
        worst = worst.max(sol.coefficients.values().column(i).amax());
    }
    Outcome::new(worst <= 1e-8, format!("largest |c_i| entry {worst:.1e} over 20 instances"))
}

/// Three lines through the origin of the plane, two unit points on each; the
/// first line makes angle `theta` with the other two.
fn three_lines(theta: f64) -> DMatrix<f64> {
    let dirs = [(1.0, 0.0), (theta.cos(), theta.sin()), (theta.cos(), -theta.sin())];
    DMatrix::from_fn(2, 6, |r, c| {
        let (x, y) = dirs[c / 2];
        let s = if c % 2 == 0 { 1.0 } else { -1.0 };
        s * if r == 0 { x } else { y }
    })
}

fn criterion_6() -> Outcome {
    // Each point is written as minus its antipode.
    let mut c1 = DMatrix::zeros(6, 6);
    for k in 0..3 {
        c1[(2 * k, 2 * k + 1)] = -1.0;
        c1[(2 * k + 1, 2 * k)] = -1.0;
    }
    let y = three_lines(0.3);
    let feasible = (&y * &c1 - &y).amax() < 1e-12;
    let rhs = row_sparsity_norm(&c1);
    // The competing representation's norm as one row: sqrt(4^2 + 2 / cos^2).
    let c2 = |theta: f64| DMatrix::from_row_slice(1, 2, &[4.0, 2f64.sqrt() / theta.cos()]);
    let gap = |theta: f64| row_sparsity_norm(&c2(theta)) - rhs;
    let (mut lo, mut hi) = (1e-3, PI / 2.0 - 1e-3);
    assert!(gap(lo) < 0.0 && gap(hi) > 0.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flip = 0.5 * (lo + hi);
    let stated = 4.0 * PI / 10.0;
    let analytic = (1.0 / 10f64.sqrt()).acos();
    assert!((flip - analytic).abs() < 1e-9, "bisection disagrees with arccos(1/sqrt 10)");
    assert!(feasible && (rhs - 6.0).abs() < 1e-12);
    Outcome {
        pass: (flip - stated).abs() < 1e-9,
        detail: format!(
            "flip at {flip:.12} rad ({:.4} deg) = arccos(1/sqrt 10); stated 4pi/10 = {stated:.12}; off by {:.2e}",
            flip.to_degrees(),
            (flip - stated).abs()
        ),
        expected_failure: true,
    }
}

fn random_lines(r: &mut impl Rng, spread: f64) -> Vec<DMatrix<f64>> {
    let base = r.random_range(0.0..PI);
    (0..3)
        .map(|k| {
            let a = base + k as f64 * spread;
            DMatrix::from_column_slice(2, 1, &[a.cos(), a.sin()])
        })
        .collect()
}

/// Best `sigma_d` over `d`-column submatrices of subspace `k` that avoid `point`.
fn sigma_without(data: &DataMatrix<f64>, labels: &[usize], k: usize, point: usize, d: usize) -> f64 {
    let idx: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == k && j != point).collect();
    let y = data.values();
    match d {
        1 => idx.iter().map(|&j| y.column(j).norm()).fold(0.0, f64::max),
        2 => {
            let mut best: f64 = 0.0;
            for (a, &p) in idx.iter().enumerate() {
                for &q in &idx[a + 1..] {
                    let m = DMatrix::from_columns(&[y.column(p), y.column(q)]);
                    best = best.max(m.singular_values().min());
                }
            }
            best
        }
        _ => unreachable!(),
    }
}

/// Minimal `l1` cost of point `i` using only its own subspace.
fn in_subspace_lp(data: &DataMatrix<f64>, labels: &[usize], i: usize) -> f64 {
    let idx: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == labels[i]).collect();
    let cols: Vec<_> = idx.iter().map(|&j| data.values().column(j)).collect();
    let pos = idx.iter().position(|&j| j == i).expect("member");
    lp_l1_column(&DMatrix::from_columns(&cols), pos)
}

fn criterion_7() -> Outcome {
    let cfg = AdmmConfig::default();
    let mut certified = [0usize; 2];
    let mut tried = 0;
    let mut worst: f64 = 0.0;
    let mut counterexamples = Vec::new();
    let mut explained = true;
    let mut seed = 0u64;
    while certified.iter().sum::<usize>() < 30 && tried < 40_000 {
        seed += 1;
        tried += 1;
        let mut r = rng(13_000 + seed);
        let d = if certified[0] < 15 && (certified[1] >= 15 || seed % 2 == 0) { 1 } else { 2 };
        let bases = if d == 1 {
            let spread = r.random_range(60f64..80.0).to_radians();
            random_lines(&mut r, spread)
        } else {
            (0..3).map(|_| random_orthonormal::<f64>(5, 2, &mut r)).collect()
        };
        let counts = [6, 6, 6];
        let (data, labels) = points_in(&bases, &counts, 13_500 + seed);
        let arr = SubspaceArrangement::new(bases, labels.clone()).expect("arrangement");
        if classify_arrangement(&arr) != ArrangementClass::DisjointNotIndependent {
            continue;
        }
        let report = check_thm3(&data, &arr, 100_000, seed).expect("thm3");
        if !(report.holds_everywhere() && report.exhaustive.iter().all(|&e| e)) {
            continue;
        }
        certified[d - 1] += 1;
        let sol = solve(&data, &ProblemSpec::exact(), &cfg).expect("solve");
        let fractions = cross_fractions(sol.coefficients.values(), &labels);
        for (i, f) in fractions.iter().enumerate() {
            let f = f.unwrap_or(1.0);
            worst = worst.max(f);
            if f < CROSS_TOL {
                continue;
            }
            // A genuine violation has a cheaper cross-subspace optimum, and
            // the bound fails once the point leaves its own dictionary.
            let k = labels[i];
            let full = lp_l1_column(data.values(), i);
            let own = in_subspace_lp(&data, &labels, i);
            let loo = sigma_without(&data, &labels, k, i, d);
            let genuine = own > full * (1.0 + 1e-6) && loo <= report.per_subspace_rhs[k];
            explained &= genuine;
            counterexamples.push(format!(
                "draw {seed} point {i}: cross {f:.3}, lp {full:.4} vs own-subspace {own:.4}, sigma without the point {loo:.4} <= {:.4}",
                report.per_subspace_rhs[k]
            ));
        }
    }
    let count: usize = certified.iter().sum();
    let mut detail = format!(
        "{count} certified arrangements ({} lines in R^2, {} planes in R^5) from {tried} draws; largest cross fraction {worst:.2e}",
        certified[0], certified[1]
    );
    if !counterexamples.is_empty() {
        detail.push_str(&format!(
            "; {} points violate sparsity although the certificate holds, each confirmed by LP and by the bound recomputed without the point: {}",
            counterexamples.len(),
            counterexamples.join("; ")
        ));
    }
    Outcome {
        pass: count == 30 && counterexamples.is_empty(),
        detail,
        expected_failure: count == 30 && explained,
    }
}

fn criterion_8() -> Outcome {
    let ts: Vec<f64> = (0..10).map(|k| -2.0 + 4.0 * k as f64 / 9.0).collect();
    let mut y = DMatrix::zeros(2, 20);
    for (k, &t) in ts.iter().enumerate() {
        y[(0, k)] = -1.0;
        y[(1, k)] = t;
        y[(0, 10 + k)] = 1.0;
        y[(1, 10 + k)] = t;
    }
    let data = DataMatrix::new(y);
    let truth: Vec<usize> = (0..20).map(|i| i / 10).collect();
    let cfg = AdmmConfig::default();
    let affine = solve(&data, &ProblemSpec::exact().affine(true).normalize(false), &cfg).expect("solve");
    let linear = solve(&data, &ProblemSpec::exact().normalize(false), &cfg).expect("solve");
    let ea = clustering_error(&cluster_labels(&affine.coefficients, 2, 1), &truth).expect("error");
    let el = clustering_error(&cluster_labels(&linear.coefficients, 2, 1), &truth).expect("error");
    Outcome::new(ea == 0.0, format!("affine clustering error {ea}; linear clustering error {el} (reported only)"))
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let mut r = rng(17_000 + seed);
        let n = 2 + (seed as usize % 2);
        let sizes: Vec<usize> = (0..n).map(|_| r.random_range(3..=10)).collect();
        let mut truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(k, &s)| std::iter::repeat_n(k, s)).collect();
        truth.shuffle(&mut r);
        let m = truth.len();
        let mut w = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..i {
                if truth[i] == truth[j] {
                    let v = r.random_range(0.1..1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
        }
        let graph = SimilarityGraph::from_weights(w).expect("graph");
        let labels = spectral_cluster(&graph, n, seed, DEFAULT_RESTARTS).expect("cluster").labels;
        let err = clustering_error(&labels, &truth).expect("error");
        let est = estimate_num_subspaces(&graph, 6).expect("estimate");
        if err != 0.0 || est != n {
            ok = false;
            misses.push(format!("seed {seed}: error {err}, estimate {est} for {n}"));
        }
    }
    Outcome::new(ok, if ok { "20 block-diagonal graphs segmented and counted exactly".into() } else { misses.join("; ") })
}

fn criterion_10() -> Outcome {
    let cfg = AdmmConfig::default();
    let d = 4;
    let mut ok = true;
    let mut report = Vec::new();
    for seed in 0..3u64 {
        let spec = SynthSpec { subspace_dim: d, points_per_subspace: 32 * d, seed: 19_000 + seed, ..SynthSpec::default() };
        let arr = generate_arrangement::<f64>(&spec).expect("arrangement");
        let (clean, arr) = sample_points(&arr, 32 * d, 19_100 + seed).expect("sample");
        let labels = arr.labels();
        let full = solve(&clean, &ProblemSpec::exact(), &cfg).expect("solve");
        let full_err = ssr_error(&full.coefficients, labels).map(|e| e.value).unwrap_or(1.0);

        // Each point hides 10 of the last 20 rows; the first 30 stay common.
        let mut r = rng(19_200 + seed);
        let dim = spec.ambient_dim;
        let pool: Vec<usize> = (dim - 20..dim).collect();
        let mut values = clean.values().clone();
        let masks: Vec<Vec<usize>> = (0..values.ncols())
            .map(|j| {
                let hidden: Vec<usize> = pool.choose_multiple(&mut r, dim / 5).copied().collect();
                for &h in &hidden {
                    values[(h, j)] = 0.0;
                }
                (0..dim).filter(|row| !hidden.contains(row)).collect()
            })
            .collect();
        let masked = DataMatrix::with_masks(values, masks).expect("masks");
        let (projected, rows) = project_common_rows(&masked).expect("common rows");
        let sol = solve(&projected, &ProblemSpec::exact(), &cfg).expect("solve");
        let proj_err = ssr_error(&sol.coefficients, labels).map(|e| e.value).unwrap_or(1.0);
        if full_err <= ZERO_ERR && proj_err > ZERO_ERR {
            ok = false;
        }
        report.push(format!("full {full_err:.1e} / projected {proj_err:.1e} on {} rows", rows.len()));
    }
    let disjoint = DataMatrix::with_masks(
        DMatrix::from_element(4, 2, 1.0),
        vec![vec![0, 1], vec![2, 3]],
    )
    .expect("masks");
    let empty = matches!(project_common_rows(&disjoint), Err(SscError::EmptyCommonSupport));
    Outcome::new(
        ok && empty,
        format!("ssr {}; disjoint masks rejected: {empty}", report.join(", ")),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("SSC_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "LP oracle equivalence", criterion_1),
        (2, "independent subspaces give subspace-sparse coefficients", criterion_2),
        (3, "synthetic phase transition", criterion_3),
        (4, "trivial-solution thresholds", criterion_4),
        (5, "zero lasso solution below the correlation threshold", criterion_5),
        (6, "row-sparsity crossover angle", criterion_6),
        (7, "submatrix certificate soundness", criterion_7),
        (8, "affine separation of parallel lines", criterion_8),
        (9, "block-diagonal spectral clustering", criterion_9),
        (10, "missing entries through the common support", criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (k, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&k)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {k} ({name}): {} [{:.1}s]", out.detail, start.elapsed().as_secs_f64());
        if !out.pass && !out.expected_failure {
            unexpected.push(k);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
