//! Experiment runners. Every runner is a pure function of its configuration:
//! runs execute in parallel with seeds derived from `(seed, point, run)` and
//! results are collected in run order, so the numeric output does not depend
//! on the thread count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dccpd::io::{
    problem_from_file, problem_to_file, read_json, solution_to_file, write_json, TensorSetFile,
};
use dccpd::jbss::cpd_c_lite;
use dccpd::model::detect_rank;
use dccpd::random::{complex_gaussian_matrix, derive_seed, rng_from_seed};
use dccpd::uniqueness::{reference_rmax, CPD_RMAX, DCCPD_RMAX};
use dccpd::{
    covariance_tensorize, generic_rmax, mean_relative_error, random_init, solve_algebraic,
    solve_als, synth_mixtures, synth_sources, FrameSpec, Matrix, Problem, Solution, SolverOptions,
    SourceModel,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, SolverKind};
use crate::doa::{estimate_doas, matched_errors, synth_bins, DoaScene};
use crate::error::{CliError, CliResult};
use crate::report::{with_means, Row};

/// Name of the per-tensor GEVD baseline in reports.
pub const BASELINE: &str = "cpd-c-lite";

/// `ε` recorded for a run whose solver failed or does not apply.
pub const FAILURE_EPSILON: f64 = 1.0;

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Outcome of one solver on one problem.
struct SolverRun {
    kind: SolverKind,
    result: CliResult<(Solution, usize)>,
    wall_ms: f64,
}

fn als_rank(p: &Problem, opts: &SolverOptions) -> CliResult<usize> {
    match opts.rank {
        Some(r) => Ok(r),
        None => Ok(detect_rank(p, opts.rank_tol)?.rank),
    }
}

/// Runs every requested solver. The algebraic solution is computed once and
/// shared with `algebraic+als`, whose wall time includes it.
fn run_solvers(
    p: &Problem,
    kinds: &[SolverKind],
    opts: &SolverOptions,
    als_seed: u64,
) -> Vec<SolverRun> {
    let needs_alg = kinds
        .iter()
        .any(|k| matches!(k, SolverKind::Algebraic | SolverKind::AlgebraicAls));
    let alg = needs_alg.then(|| {
        let t = Instant::now();
        let r = solve_algebraic(p, opts)
            .map(|(s, _)| s)
            .map_err(CliError::from);
        (r, elapsed_ms(t))
    });
    kinds
        .iter()
        .map(|&kind| match kind {
            SolverKind::Algebraic => {
                let (r, ms) = alg.as_ref().expect("computed");
                SolverRun {
                    kind,
                    result: r.as_ref().map(|s| (s.clone(), 0)).map_err(clone_err),
                    wall_ms: *ms,
                }
            }
            SolverKind::AlgebraicAls => {
                let (r, ms) = alg.as_ref().expect("computed");
                let t = Instant::now();
                let result = match r {
                    Ok(init) => solve_als(p, init, opts)
                        .map(|(s, tr)| (s, tr.iterations))
                        .map_err(CliError::from),
                    Err(e) => Err(clone_err(e)),
                };
                SolverRun {
                    kind,
                    result,
                    wall_ms: ms + elapsed_ms(t),
                }
            }
            SolverKind::Als => {
                let t = Instant::now();
                let result = als_rank(p, opts).and_then(|r| {
                    let init = random_init(p, r, als_seed)?;
                    Ok(solve_als(p, &init, opts).map(|(s, tr)| (s, tr.iterations))?)
                });
                SolverRun {
                    kind,
                    result,
                    wall_ms: elapsed_ms(t),
                }
            }
        })
        .collect()
}

fn clone_err(e: &CliError) -> CliError {
    match e {
        CliError::Input(s) => CliError::Input(s.clone()),
        CliError::Solver(s) => CliError::Solver(s.clone()),
        CliError::Io(s) => CliError::Io(s.clone()),
    }
}

fn solver_row(
    experiment: Experiment,
    run: usize,
    snr_db: f64,
    seed: u64,
    sr: &SolverRun,
    truth: &[Matrix],
) -> Row {
    let (epsilon, iterations, status) = match &sr.result {
        Ok((sol, it)) => match mean_relative_error(&sol.a, truth) {
            Ok(e) => (e, *it as f64, "ok".to_string()),
            Err(e) => (FAILURE_EPSILON, *it as f64, format!("failed: {e}")),
        },
        Err(e) => (FAILURE_EPSILON, 0.0, format!("failed: {e}")),
    };
    Row {
        experiment: experiment.name().into(),
        run: Some(run),
        snr_db,
        solver: sr.kind.name().into(),
        epsilon,
        iterations,
        wall_ms: sr.wall_ms,
        seed,
        status,
    }
}

fn exact_options(cfg: &ExperimentConfig, seed: u64) -> SolverOptions {
    SolverOptions {
        rank: cfg.rank,
        rel_tol: cfg.rel_tol.unwrap_or(1e-16),
        max_iter: cfg.max_iter,
        seed,
        ..SolverOptions::default()
    }
}

fn noisy_options(cfg: &ExperimentConfig, rank: usize, seed: u64) -> SolverOptions {
    SolverOptions {
        rank: Some(cfg.rank.unwrap_or(rank)),
        rel_tol: cfg.rel_tol.unwrap_or(1e-7),
        max_iter: cfg.max_iter,
        seed,
        ..SolverOptions::noisy()
    }
}

/// Exact decompositions of random conjugate-symmetric grids with standard
/// complex Gaussian factors and third dimension `T` (default `R`).
pub fn exact_bench(cfg: &ExperimentConfig) -> CliResult<Vec<Row>> {
    cfg.validate()?;
    let dims = vec![cfg.n; cfg.m];
    let rows: Vec<Vec<Row>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let seed = derive_seed(cfg.seed, run as u64);
            let mut rng = rng_from_seed(seed);
            let truth = Solution::random_symmetric(&dims, cfg.third_dim(), cfg.r, &mut rng);
            let p = match Problem::from_solution(&truth, true) {
                Ok(p) => p,
                Err(e) => {
                    return cfg
                        .solvers
                        .iter()
                        .map(|&kind| {
                            let sr = SolverRun {
                                kind,
                                result: Err(e.clone().into()),
                                wall_ms: 0.0,
                            };
                            solver_row(Experiment::Exact, run, f64::INFINITY, seed, &sr, &truth.a)
                        })
                        .collect()
                }
            };
            let opts = exact_options(cfg, seed);
            run_solvers(&p, &cfg.solvers, &opts, derive_seed(seed, 3))
                .iter()
                .map(|sr| solver_row(Experiment::Exact, run, f64::INFINITY, seed, sr, &truth.a))
                .collect()
        })
        .collect();
    Ok(with_means(rows.into_iter().flatten().collect()))
}

/// One synthetic J-BSS instance: mixing matrices and the covariance grid.
pub fn jbss_instance(
    cfg: &ExperimentConfig,
    snr_db: f64,
    seed: u64,
) -> CliResult<(Vec<Matrix>, Problem)> {
    let spec = FrameSpec {
        l: cfg.l,
        alpha: cfg.alpha,
        t: cfg.third_dim(),
    };
    let q = spec.required_samples()?;
    // round the sample count up to a whole number of segments
    let q = q.div_ceil(cfg.p) * cfg.p;
    let mut rng = rng_from_seed(seed);
    let a: Vec<Matrix> = (0..cfg.m)
        .map(|_| complex_gaussian_matrix::<f64, _>(cfg.n, cfg.r, &mut rng))
        .collect();
    let src = synth_sources::<f64>(&SourceModel::new(
        cfg.r,
        cfg.m,
        cfg.p,
        q,
        derive_seed(seed, 1),
    ))?;
    let x = synth_mixtures(&src.s, &a, snr_db, &mut rng)?;
    let p = covariance_tensorize(&x, &spec)?;
    Ok((a, p))
}

fn baseline_row(
    experiment: Experiment,
    run: usize,
    snr_db: f64,
    seed: u64,
    p: &Problem,
    truth: &[Matrix],
    r: usize,
) -> Row {
    let t = Instant::now();
    let min_n = p.dims_n().iter().copied().min().unwrap_or(0);
    let (epsilon, status) = if r > min_n {
        (FAILURE_EPSILON, "inapplicable".to_string())
    } else {
        match cpd_c_lite(p, r, derive_seed(seed, 4)).and_then(|a| mean_relative_error(&a, truth)) {
            Ok(e) => (e, "ok".to_string()),
            Err(e) => (FAILURE_EPSILON, format!("failed: {e}")),
        }
    };
    Row {
        experiment: experiment.name().into(),
        run: Some(run),
        snr_db,
        solver: BASELINE.into(),
        epsilon,
        iterations: 0.0,
        wall_ms: elapsed_ms(t),
        seed,
        status,
    }
}

/// `ε` against SNR for the configured solvers and the per-tensor baseline.
pub fn jbss_bench(cfg: &ExperimentConfig) -> CliResult<Vec<Row>> {
    cfg.validate()?;
    // fail early on framing errors instead of once per run
    FrameSpec {
        l: cfg.l,
        alpha: cfg.alpha,
        t: cfg.third_dim(),
    }
    .required_samples()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db_list.len())
        .flat_map(|i| (0..cfg.runs).map(move |run| (i, run)))
        .collect();
    let rows: Vec<Vec<Row>> = jobs
        .into_par_iter()
        .map(|(i, run)| {
            let snr = cfg.snr_db_list[i];
            let seed = derive_seed(derive_seed(cfg.seed, i as u64), run as u64);
            let (truth, p) = match jbss_instance(cfg, snr, seed) {
                Ok(x) => x,
                Err(e) => {
                    return vec![Row {
                        experiment: "jbss".into(),
                        run: Some(run),
                        snr_db: snr,
                        solver: "instance".into(),
                        epsilon: FAILURE_EPSILON,
                        iterations: 0.0,
                        wall_ms: 0.0,
                        seed,
                        status: format!("failed: {e}"),
                    }]
                }
            };
            let opts = noisy_options(cfg, cfg.r, seed);
            let mut out: Vec<Row> = run_solvers(&p, &cfg.solvers, &opts, derive_seed(seed, 3))
                .iter()
                .map(|sr| solver_row(Experiment::Jbss, run, snr, seed, sr, &truth))
                .collect();
            out.push(baseline_row(
                Experiment::Jbss,
                run,
                snr,
                seed,
                &p,
                &truth,
                cfg.r,
            ));
            out
        })
        .collect();
    Ok(with_means(rows.into_iter().flatten().collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmaxRow {
    pub n: usize,
    pub m: usize,
    pub rmax: usize,
    pub reference_dccpd: Option<usize>,
    pub reference_cpd: Option<usize>,
    /// `false` when a reference exists and differs.
    pub matches: bool,
}

/// Generic `R_max` for each `N` in the list next to the reference values.
pub fn rmax_table(cfg: &ExperimentConfig) -> CliResult<Vec<RmaxRow>> {
    cfg.validate()?;
    cfg.n_list
        .par_iter()
        .map(|&n| {
            let rmax = generic_rmax(n, cfg.m, cfg.trials, derive_seed(cfg.seed, n as u64))?;
            let reference_dccpd = reference_rmax(&DCCPD_RMAX, n);
            Ok(RmaxRow {
                n,
                m: cfg.m,
                rmax,
                reference_dccpd,
                reference_cpd: reference_rmax(&CPD_RMAX, n),
                matches: reference_dccpd.is_none_or(|r| r == rmax),
            })
        })
        .collect()
}

pub fn write_rmax_csv<W: std::io::Write>(out: W, rows: &[RmaxRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "m",
        "rmax",
        "reference_dccpd",
        "reference_cpd",
        "matches",
    ])?;
    let opt = |x: Option<usize>| x.map_or_else(String::new, |v| v.to_string());
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            r.rmax.to_string(),
            opt(r.reference_dccpd),
            opt(r.reference_cpd),
            r.matches.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Data-model note carried by every DOA report.
pub const DOA_NOTE: &str = "narrowband per-bin data Y(f) = A(f) S(f)^T + noise generated directly in \
the frequency domain; no time-domain synthesis or STFT is performed, so the bin selection step does not apply";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaRun {
    pub run: usize,
    pub snr_db: f64,
    pub solver: String,
    /// `(azimuth, elevation)` in degrees, matched to the true sources.
    pub estimates: Vec<(f64, f64)>,
    /// Absolute `(azimuth, elevation)` errors in degrees per true source.
    pub errors: Vec<(f64, f64)>,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaReport {
    pub note: String,
    pub sensors: Vec<[f64; 3]>,
    pub bins_hz: Vec<f64>,
    pub sources: Vec<(f64, f64)>,
    pub runs: Vec<DoaRun>,
}

/// Steering-vector `ε` rows for every solver and the baseline, plus the
/// DOA estimates of every successful DC-CPD solution.
pub fn doa_demo(cfg: &ExperimentConfig) -> CliResult<(Vec<Row>, DoaReport)> {
    cfg.validate()?;
    let scene = DoaScene::from_config(&cfg.doa)?;
    let spec = FrameSpec {
        l: cfg.doa.frame_len,
        alpha: 0.5,
        t: 0,
    };
    let hop = spec.hop()?;
    let t = (scene.samples_per_bin - cfg.doa.frame_len) / hop + 1;
    let spec = FrameSpec { t, ..spec };
    let r = scene.sources.len();
    let jobs: Vec<(usize, usize)> = (0..cfg.snr_db_list.len())
        .flat_map(|i| (0..cfg.runs).map(move |run| (i, run)))
        .collect();
    let results: Vec<CliResult<(Vec<Row>, Vec<DoaRun>)>> = jobs
        .into_par_iter()
        .map(|(i, run)| {
            let snr = cfg.snr_db_list[i];
            let seed = derive_seed(derive_seed(cfg.seed, i as u64), run as u64);
            let (truth, x) = synth_bins(&scene, cfg.doa.segments, snr, seed)?;
            let p = covariance_tensorize(&x, &spec)?;
            let opts = noisy_options(cfg, r, seed);
            let mut rows = Vec::new();
            let mut doa_runs = Vec::new();
            for sr in run_solvers(&p, &cfg.solvers, &opts, derive_seed(seed, 3)) {
                rows.push(solver_row(Experiment::Doa, run, snr, seed, &sr, &truth));
                if let Ok((sol, _)) = &sr.result {
                    let est = estimate_doas(&scene, &sol.a);
                    let errors = matched_errors(&est, &scene.sources);
                    let max_error = errors.iter().map(|e| e.0.max(e.1)).fold(0.0, f64::max);
                    doa_runs.push(DoaRun {
                        run,
                        snr_db: snr,
                        solver: sr.kind.name().into(),
                        estimates: est,
                        errors,
                        max_error,
                    });
                }
            }
            rows.push(baseline_row(Experiment::Doa, run, snr, seed, &p, &truth, r));
            Ok((rows, doa_runs))
        })
        .collect();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for res in results {
        let (r, d) = res?;
        rows.extend(r);
        runs.extend(d);
    }
    Ok((
        with_means(rows),
        DoaReport {
            note: DOA_NOTE.into(),
            sensors: scene.sensors.clone(),
            bins_hz: scene.bins.clone(),
            sources: scene.sources.clone(),
            runs,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecomposeReport {
    pub solver: String,
    pub rank: usize,
    pub cost: f64,
    pub relative_cost: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    /// `ε` against the embedded truth, when the file carries one.
    pub epsilon: Option<f64>,
}

/// Solves the tensor set in `cfg.input` with the last configured solver.
pub fn decompose(cfg: &ExperimentConfig) -> CliResult<(Solution, DecomposeReport)> {
    cfg.validate()?;
    let path = cfg.input.as_ref().expect("validated");
    let file: TensorSetFile = read_json(path)?;
    let (p, truth) = problem_from_file(&file)?;
    let exactish = cfg.rel_tol.is_none_or(|t| t < 1e-12);
    let opts = SolverOptions {
        rank: cfg.rank,
        rel_tol: cfg.rel_tol.unwrap_or(1e-16),
        max_iter: cfg.max_iter,
        seed: cfg.seed,
        strict: exactish,
        ..SolverOptions::default()
    };
    let kind = *cfg.solvers.last().expect("validated");
    let sr = run_solvers(&p, &[kind], &opts, derive_seed(cfg.seed, 3))
        .pop()
        .expect("one run");
    let (sol, iterations) = sr.result?;
    let cost = dccpd::cost_eta(&p, &sol)?;
    let energy = p.total_energy();
    // The error is undefined when a forced rank differs from the reference.
    let epsilon = match &truth {
        Some(t) if t.rank() == sol.rank() => Some(mean_relative_error(&sol.a, &t.a)?),
        _ => None,
    };
    Ok((
        sol.clone(),
        DecomposeReport {
            solver: kind.name().into(),
            rank: sol.rank(),
            cost,
            relative_cost: if energy > 0.0 { cost / energy } else { 0.0 },
            iterations,
            wall_ms: sr.wall_ms,
            epsilon,
        },
    ))
}

/// Sidecar path `<out>.<suffix>` used for secondary reports.
pub fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Exact tensor-set file with embedded truth.
pub fn generate(cfg: &ExperimentConfig) -> CliResult<TensorSetFile> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let dims = vec![cfg.n; cfg.m];
    let symmetric = !cfg.nonsymmetric;
    let truth = if symmetric {
        Solution::random_symmetric(&dims, cfg.third_dim(), cfg.r, &mut rng)
    } else {
        Solution::random_general(&dims, cfg.third_dim(), cfg.r, &mut rng)
    };
    let p = Problem::from_solution(&truth, symmetric)?;
    Ok(problem_to_file(&p, Some(&truth)))
}

pub fn write_solution(path: &Path, sol: &Solution) -> CliResult<()> {
    Ok(write_json(path, &solution_to_file(sol))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_exact() -> ExperimentConfig {
        ExperimentConfig {
            n: 3,
            r: 3,
            m: 2,
            runs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn exact_bench_rows_and_means() {
        let rows = exact_bench(&small_exact()).unwrap();
        // 3 runs × 2 solvers + 2 means
        assert_eq!(rows.len(), 8);
        for r in &rows {
            assert!(r.is_ok(), "{r:?}");
            assert!(r.epsilon < 1e-20, "{r:?}");
        }
    }

    #[test]
    fn jbss_baseline_is_flagged_when_underdetermined() {
        let cfg = ExperimentConfig {
            experiment: Experiment::Jbss,
            n: 2,
            r: 3,
            m: 3,
            l: 20,
            t: Some(12),
            p: 10,
            runs: 2,
            snr_db_list: vec![30.0],
            solvers: vec![SolverKind::Algebraic],
            ..Default::default()
        };
        let rows = jbss_bench(&cfg).unwrap();
        let base: Vec<_> = rows
            .iter()
            .filter(|r| r.solver == BASELINE && r.run.is_some())
            .collect();
        assert_eq!(base.len(), 2);
        for b in base {
            assert_eq!(b.status, "inapplicable");
            assert_eq!(b.epsilon, FAILURE_EPSILON);
        }
    }

    #[test]
    fn generated_file_decomposes() {
        let dir = std::env::temp_dir().join(format!("dccpd-gen-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("set.json");
        let cfg = ExperimentConfig {
            experiment: Experiment::Generate,
            n: 3,
            r: 4,
            m: 3,
            seed: 5,
            ..Default::default()
        };
        write_json(&path, &generate(&cfg).unwrap()).unwrap();
        let dc = ExperimentConfig {
            experiment: Experiment::Decompose,
            input: Some(path),
            solvers: vec![SolverKind::Algebraic],
            ..Default::default()
        };
        let (sol, rep) = decompose(&dc).unwrap();
        assert_eq!(sol.rank(), 4);
        assert!(rep.epsilon.unwrap() < 1e-8);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(
            sidecar(Path::new("out/a.csv"), "doa.json"),
            PathBuf::from("out/a.csv.doa.json")
        );
    }
}
