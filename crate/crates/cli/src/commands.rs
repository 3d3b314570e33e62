use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::{json, Value};
use ssc_core::dataio::{
    fill_missing_random, format_labels, pca_project, project_common_rows, read_bases,
    read_labels, read_masks, read_matrix, write_bases, write_labels, write_matrix,
};
use ssc_core::rng::derive_seed;
use ssc_core::solver::AdmmConfig;
use ssc_core::spectral::{estimate_num_subspaces, laplacian_spectrum};
use ssc_core::synth::{clustering_error, corrupt, generate_arrangement, run_sweep, sample_points};
use ssc_core::theory::{
    angle_report, check_thm2_margin, check_thm3, classify_arrangement, estimate_arrangement,
};
use ssc_core::{
    build_graph, normalize_coefficients, solve as run_solve, spectral_cluster, CoefficientMatrix, DataMatrix,
    ProblemSpec, SubspaceArrangement, SynthSpec,
};

use crate::manifest::{ensure_dir, resolve_seed, sibling, write_json, write_text, Recorder, FORMAT_VERSION};
use crate::{BenchArgs, CheckArgs, CliError, ClusterArgs, GenArgs, MissingArg, SolveArgs, VariantArg};

type Res = Result<(), CliError>;

fn io_err(path: &Path) -> impl FnOnce(ssc_core::SscError) -> CliError + '_ {
    move |e| match e {
        ssc_core::SscError::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        other => CliError::Core(other),
    }
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<f64>>())).collect())
}

fn problem_spec(variant: VariantArg, alpha_z: f64, alpha_e: f64) -> ProblemSpec {
    match variant {
        VariantArg::Exact => ProblemSpec::exact(),
        VariantArg::Noise => ProblemSpec::noise(alpha_z),
        VariantArg::Outlier => ProblemSpec::outlier(alpha_e),
        VariantArg::Both => ProblemSpec::noise_and_outlier(alpha_z, alpha_e),
    }
}

fn variant_name(v: VariantArg) -> &'static str {
    match v {
        VariantArg::Exact => "exact",
        VariantArg::Noise => "noise",
        VariantArg::Outlier => "outlier",
        VariantArg::Both => "both",
    }
}

pub fn gen(a: GenArgs) -> Res {
    let seed = resolve_seed(a.seed)?;
    let spec = SynthSpec {
        ambient_dim: a.ambient_dim,
        subspace_dim: a.d,
        theta_deg: a.theta_deg,
        points_per_subspace: a.points_per_subspace,
        num_subspaces: a.n,
        seed,
        noise_sigma: a.noise_sigma,
        outlier_fraction: a.outlier_frac,
        outlier_magnitude: a.outlier_magnitude,
    };
    spec.check()?;
    let arr = generate_arrangement::<f64>(&spec)?;
    let (clean, arr) = sample_points(&arr, a.points_per_subspace, derive_seed(seed, &[1]))?;
    let data = corrupt(&clean, &spec);

    ensure_dir(&a.out_dir)?;
    let mut rec = Recorder::new("gen", seed);
    rec.param("d", a.d)
        .param("ambient_dim", a.ambient_dim)
        .param("theta_deg", a.theta_deg)
        .param("points_per_subspace", a.points_per_subspace)
        .param("n", a.n)
        .param("noise_sigma", a.noise_sigma)
        .param("outlier_frac", a.outlier_frac)
        .param("outlier_magnitude", a.outlier_magnitude);
    let data_path = a.out_dir.join("data.csv");
    write_matrix(data.values(), &data_path).map_err(io_err(&data_path))?;
    rec.artifact(&data_path);
    let labels_path = a.out_dir.join("labels.txt");
    write_labels(arr.labels(), &labels_path).map_err(io_err(&labels_path))?;
    rec.artifact(&labels_path);
    let bases_path = a.out_dir.join("bases.csv");
    write_bases(&arr, &bases_path).map_err(io_err(&bases_path))?;
    rec.artifact(&bases_path);
    rec.finish(&a.out_dir.join("manifest.json"))
}

fn load_data(a: &SolveArgs, seed: u64) -> Result<DataMatrix<f64>, CliError> {
    let mut data = read_matrix::<f64>(&a.input).map_err(io_err(&a.input))?;
    if let Some(mask_path) = &a.masks {
        let masks = read_masks(mask_path).map_err(io_err(mask_path))?;
        data = DataMatrix::with_masks(data.into_values(), masks)?;
        data = match a.missing {
            MissingArg::Project => {
                let (projected, rows) = project_common_rows(&data)?;
                log::info!("kept {} common rows", rows.len());
                projected
            }
            MissingArg::Fill => fill_missing_random(&data, a.fill_magnitude, derive_seed(seed, &[1])),
        };
    }
    if let Some(k) = a.pca {
        data = pca_project(&data, k, a.center)?;
    }
    Ok(data)
}

pub fn solve(a: SolveArgs) -> Res {
    let seed = resolve_seed(a.seed)?;
    let data = load_data(&a, seed)?;
    let affine = if a.affine {
        true
    } else if a.no_affine {
        false
    } else {
        a.variant == VariantArg::Noise
    };
    let spec = problem_spec(a.variant, a.alpha_z, a.alpha_e)
        .affine(affine)
        .normalize(!a.no_normalize_data)
        .row_sparsity(a.lambda_r);
    let mut cfg = AdmmConfig::default().with_epsilon(a.epsilon).with_max_iter(a.max_iter);
    cfg.seed = Some(seed);
    if let Some(rho) = a.rho {
        cfg = cfg.with_rho(rho);
    }
    let sol = run_solve(&data, &spec, &cfg)?;

    ensure_dir(&a.out_dir)?;
    let mut rec = Recorder::new("solve", seed);
    rec.param("input", a.input.display().to_string())
        .param("variant", variant_name(a.variant))
        .param("affine", affine)
        .param("alpha_z", a.alpha_z)
        .param("alpha_e", a.alpha_e)
        .param("lambda_r", a.lambda_r)
        .param("epsilon", a.epsilon)
        .param("max_iter", a.max_iter)
        .param("rho", sol.diagnostics.rho)
        .param("normalize_data", !a.no_normalize_data)
        .param("masks", a.masks.as_ref().map(|p| p.display().to_string()))
        .param("pca", a.pca)
        .param("center", a.center);
    let c_path = a.out_coeffs.clone().unwrap_or_else(|| a.out_dir.join("C.csv"));
    write_matrix(sol.coefficients.values(), &c_path).map_err(io_err(&c_path))?;
    rec.artifact(&c_path);
    if let Some(e) = &sol.errors {
        let e_path = a.out_errors.clone().unwrap_or_else(|| a.out_dir.join("E.csv"));
        write_matrix(e, &e_path).map_err(io_err(&e_path))?;
        rec.artifact(&e_path);
    }
    let d = &sol.diagnostics;
    let diag = json!({
        "format_version": FORMAT_VERSION,
        "iterations": d.iterations,
        "converged": d.converged,
        "primal_residual_affine": d.primal_residual_affine,
        "primal_residual_consensus": d.primal_residual_consensus,
        "dual_residual_consensus": d.dual_residuals.0,
        "dual_residual_errors": d.dual_residuals.1,
        "objective": d.objective,
        "reconstruction_residual": d.reconstruction_residual,
        "lambda_z": d.lambda_z,
        "lambda_e": d.lambda_e,
        "rho": d.rho,
        "zero_columns": d.zero_columns.iter().map(|c| c + 1).collect::<Vec<_>>(),
    });
    let diag_path = a.out_dir.join("diagnostics.json");
    write_json(&diag_path, &diag)?;
    rec.artifact(&diag_path);
    rec.finish(&a.out_dir.join("manifest.json"))?;
    if !d.zero_columns.is_empty() {
        log::warn!("{} columns of C are identically zero", d.zero_columns.len());
    }
    if !d.converged && !a.allow_nonconverged {
        return Err(CliError::NotConverged { iterations: d.iterations });
    }
    Ok(())
}

pub fn cluster(a: ClusterArgs) -> Res {
    let seed = resolve_seed(a.seed)?;
    let raw = read_matrix::<f64>(&a.coeffs).map_err(io_err(&a.coeffs))?;
    let mut c = CoefficientMatrix::new(raw.into_values())?;
    if !a.no_normalize {
        c = normalize_coefficients(&c);
    }
    let graph = build_graph(&c);
    let n = match a.n {
        Some(n) => n,
        None => estimate_num_subspaces(&graph, a.n_max)?,
    };
    let result = spectral_cluster(&graph, n, seed, a.restarts)?;
    let spectrum = laplacian_spectrum(&graph);

    ensure_dir(&a.out_dir)?;
    let mut rec = Recorder::new("cluster", seed);
    rec.param("coeffs", a.coeffs.display().to_string())
        .param("n", n)
        .param("estimated", a.estimate_n)
        .param("n_max", a.n_max)
        .param("restarts", a.restarts)
        .param("normalize", !a.no_normalize);
    let labels_path = a.out_labels.clone().unwrap_or_else(|| a.out_dir.join("labels.txt"));
    write_text(&labels_path, &format_labels(&result.labels))?;
    rec.artifact(&labels_path);
    let mut spec_csv = String::from("index,eigenvalue\n");
    for (k, v) in spectrum.iter().enumerate() {
        spec_csv.push_str(&format!("{},{}\n", k + 1, v));
    }
    let spectrum_path = a.out_dir.join("spectrum.csv");
    write_text(&spectrum_path, &spec_csv)?;
    rec.artifact(&spectrum_path);
    let error = match &a.truth {
        Some(p) => Some(clustering_error(&result.labels, &read_labels(p).map_err(io_err(p))?)?),
        None => None,
    };
    let summary = json!({
        "format_version": FORMAT_VERSION,
        "n_clusters": result.n_clusters,
        "estimated": a.estimate_n,
        "graph_components": graph.num_components(),
        "kmeans_inertia": result.kmeans_inertia,
        "clustering_error": error,
    });
    let summary_path = a.out_dir.join("cluster.json");
    write_json(&summary_path, &summary)?;
    rec.artifact(&summary_path);
    rec.finish(&a.out_dir.join("manifest.json"))
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "sweep".to_owned(), |s| s.to_string_lossy().into_owned());
    sibling(out, &format!("{stem}_summary.csv"))
}

pub fn bench(a: BenchArgs) -> Res {
    let seed = resolve_seed(a.seed)?;
    if a.theta_list.is_empty() || a.ng_list.is_empty() || a.trials == 0 {
        return Err(CliError::Usage("theta list, ng list and trials must be nonempty".into()));
    }
    let base = SynthSpec {
        ambient_dim: a.ambient_dim,
        subspace_dim: a.d,
        num_subspaces: a.n,
        seed,
        noise_sigma: a.noise_sigma,
        outlier_fraction: a.outlier_frac,
        ..SynthSpec::default()
    };
    let grid: Vec<(f64, usize)> =
        a.theta_list.iter().flat_map(|&t| a.ng_list.iter().map(move |&g| (t, g))).collect();
    for &(t, g) in &grid {
        SynthSpec { theta_deg: t, points_per_subspace: g, ..base }.check()?;
    }
    let problem = problem_spec(a.variant, a.alpha_z, a.alpha_e);
    let cfg = AdmmConfig::default().with_epsilon(a.epsilon).with_max_iter(a.max_iter);
    let result = run_sweep::<f64>(&grid, a.trials, &base, &problem, &cfg)?;
    let nonconverged = result.rows.iter().filter(|r| !r.converged).count();
    if nonconverged > 0 {
        log::warn!("{nonconverged} trials stopped before meeting the tolerance");
    }

    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let mut rec = Recorder::new("bench", seed);
    rec.param("theta_list", &a.theta_list)
        .param("ng_list", &a.ng_list)
        .param("trials", a.trials)
        .param("d", a.d)
        .param("ambient_dim", a.ambient_dim)
        .param("n", a.n)
        .param("variant", variant_name(a.variant))
        .param("alpha_z", a.alpha_z)
        .param("alpha_e", a.alpha_e)
        .param("noise_sigma", a.noise_sigma)
        .param("outlier_frac", a.outlier_frac)
        .param("epsilon", a.epsilon)
        .param("max_iter", a.max_iter);
    write_text(&a.out, &result.to_csv())?;
    rec.artifact(&a.out);
    let summary = a.out_summary.clone().unwrap_or_else(|| summary_path(&a.out));
    write_text(&summary, &result.summary_csv())?;
    rec.artifact(&summary);
    rec.finish(&sibling(&a.out, "manifest.json"))
}

pub fn check(a: CheckArgs) -> Res {
    let seed = resolve_seed(a.seed)?;
    let data = read_matrix::<f64>(&a.input).map_err(io_err(&a.input))?;
    let labels = read_labels(&a.labels).map_err(io_err(&a.labels))?;
    let arr = match &a.bases {
        Some(p) => SubspaceArrangement::new(read_bases::<f64>(p).map_err(io_err(p))?, labels)?,
        None => estimate_arrangement(&data, &labels)?,
    };
    let angles = angle_report(&arr)?;
    let mut report = json!({
        "format_version": FORMAT_VERSION,
        "dims": arr.dims(),
        "classification": format!("{:?}", classify_arrangement(&arr)),
        "angles": {
            "pairwise_cos": matrix_json(&angles.pairwise_cos),
            "smallest_angle_deg": matrix_json(&angles.smallest_angle_deg),
        },
    });
    if a.thm3 {
        let r = check_thm3(&data, &arr, a.submatrix_budget, seed)?;
        report["thm3"] = json!({
            "lhs": r.per_subspace_lhs,
            "rhs": r.per_subspace_rhs,
            "holds": r.holds,
            "exhaustive": r.exhaustive,
        });
    }
    if a.thm2_samples > 0 {
        let cfg = AdmmConfig::default();
        let mut margins = Vec::new();
        for i in 0..arr.num_subspaces() {
            let m = check_thm2_margin(&data, &arr, i, a.thm2_samples, derive_seed(seed, &[i as u64]), &cfg)?;
            let entry = if m.min_margin.is_infinite() {
                json!({
                    "subspace": i + 1,
                    "min_margin": null,
                    "note": "trivial intersection with the other subspaces; margin is +infinity",
                    "samples_tested": 0,
                })
            } else {
                json!({
                    "subspace": i + 1,
                    "min_margin": m.min_margin,
                    "verdict": if m.min_margin > 0.0 { "evidence" } else { "counterexample" },
                    "samples_tested": m.samples_tested,
                    "converged": m.converged,
                    "witness": m.witness.map(|w| w.iter().copied().collect::<Vec<f64>>()),
                })
            };
            margins.push(entry);
        }
        report["thm2"] = Value::Array(margins);
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_json(&a.out, &report)?;
    let mut rec = Recorder::new("check", seed);
    rec.param("input", a.input.display().to_string())
        .param("labels", a.labels.display().to_string())
        .param("bases", a.bases.as_ref().map(|p| p.display().to_string()))
        .param("thm3", a.thm3)
        .param("thm2_samples", a.thm2_samples)
        .param("submatrix_budget", a.submatrix_budget);
    rec.artifact(&a.out);
    rec.finish(&sibling(&a.out, "manifest.json"))
}
