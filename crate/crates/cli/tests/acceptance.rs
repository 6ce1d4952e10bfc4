//! Acceptance suite: one PASS/FAIL line per criterion, every tolerance
//! pinned below. Runs as a plain binary so the lines appear in the output
//! of `cargo test`.

use std::time::Instant;

use dccpd::algebraic::{all_triples, build_gamma, build_omega, coupled_rank1_map};
use dccpd::als::update_c;
use dccpd::linalg::singular_values;
use dccpd::model::add_noise;
use dccpd::random::{complex_gaussian_matrix, derive_seed, rng_from_seed};
use dccpd::uniqueness::{reference_rmax, DCCPD_RMAX};
use dccpd::{
    cost_eta, mean_relative_error, random_init, solve_algebraic, solve_als, symmetrize, DcCpdError,
    Matrix, Problem, Solution, SolverOptions,
};
use dccpd_cli::experiments::{exact_bench, jbss_bench, rmax_table, BASELINE};
use dccpd_cli::report::{mean_of, write_csv, Row};
use dccpd_cli::{Experiment, ExperimentConfig, SolverKind};
use num_complex::Complex;

const EXACT_EPS_TOL: f64 = 1e-8;
const NULL_SV_TOL: f64 = 1e-9;
const OMEGA_REL_TOL: f64 = 1e-10;
const PSI_ZERO_TOL: f64 = 1e-12;
const PSI_NONZERO_TOL: f64 = 1e-6;
const ALS_MONOTONE_SLACK: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-4;
const SYMMETRIZED_EPS_TOL: f64 = 1e-6;
const UNDERDETERMINED_EPS_TOL: f64 = 0.3;
const METRIC_ORACLE_TOL: f64 = 1e-12;
const METRIC_ZERO_TOL: f64 = 1e-24;

type Z = Complex<f64>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn exact(dims: &[usize], t: usize, r: usize, seed: u64) -> (Problem, Solution) {
    let mut rng = rng_from_seed(seed);
    let truth = Solution::random_symmetric(dims, t, r, &mut rng);
    (Problem::from_solution(&truth, true).unwrap(), truth)
}

fn criterion_1() -> Outcome {
    let mut means = Vec::new();
    let mut pass = true;
    for (n, r) in [(3, 5), (4, 10), (5, 16)] {
        let cfg = ExperimentConfig {
            experiment: Experiment::Exact,
            n,
            r,
            m: 3,
            runs: 20,
            seed: 1,
            solvers: vec![SolverKind::Algebraic],
            ..Default::default()
        };
        let rows = exact_bench(&cfg).unwrap();
        let mean = mean_of(&rows, f64::INFINITY, "algebraic").unwrap();
        pass &= mean.is_ok() && mean.epsilon < EXACT_EPS_TOL;
        means.push(format!("(N={n},R={r}) ε={:.2e}", mean.epsilon));
    }
    check(
        pass,
        format!(
            "exact recovery, mean over 20 runs: {} (tol {EXACT_EPS_TOL:e})",
            means.join(", ")
        ),
    )
}

fn criterion_2() -> Outcome {
    let cfg = ExperimentConfig {
        experiment: Experiment::Rmax,
        m: 3,
        n_list: vec![2, 3, 4, 5],
        ..Default::default()
    };
    let rows = rmax_table(&cfg).unwrap();
    let got: Vec<usize> = rows.iter().map(|r| r.rmax).collect();
    let m2 = rmax_table(&ExperimentConfig {
        m: 2,
        n_list: vec![3],
        ..cfg.clone()
    })
    .unwrap()[0]
        .rmax;
    let pass = got == [2, 5, 10, 16] && m2 == 5 && rows.iter().all(|r| r.matches);
    check(
        pass,
        format!("generic R_max for N=2..5 at M=3: {got:?}; N=3 at M=2: {m2}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng_seed = 0u64;
    let mut bad = Vec::new();
    let (mut max_null, mut min_nonnull) = (0.0f64, f64::INFINITY);
    let mut count = 0;
    for n in [2usize, 3, 4] {
        let rmax = reference_rmax(&DCCPD_RMAX, n).unwrap();
        for k in 0..17 {
            if count == 50 {
                break;
            }
            let r = 2 + k % (rmax - 1);
            rng_seed += 1;
            let (p, _) = exact(&[n; 3], r, r, derive_seed(3, rng_seed));
            for (m, g, h) in all_triples(3) {
                let gamma = build_gamma(p.tensor(m, g), p.tensor(m, h)).unwrap();
                let s = singular_values(&gamma).unwrap();
                let nullity = s.iter().filter(|&&x| x <= NULL_SV_TOL * s[0]).count()
                    + gamma.ncols().saturating_sub(s.len());
                let cut = gamma.ncols() - r;
                max_null = max_null.max(s.get(cut).map_or(0.0, |x| x / s[0]));
                min_nonnull = min_nonnull.min(s[cut - 1] / s[0]);
                if nullity != r {
                    bad.push(format!(
                        "N={n} R={r} triple ({m},{g},{h}) nullity {nullity}"
                    ));
                }
            }
            count += 1;
        }
    }
    let (p, _) = exact(&[3; 3], 6, 6, 99);
    let over = solve_algebraic(&p, &SolverOptions::default());
    let mismatch = matches!(over, Err(DcCpdError::RankMismatch { .. }));
    check(
        bad.is_empty() && mismatch && count == 50,
        format!(
            "nullity = R on {count} instances ({} violations; null σ ≤ {max_null:.1e}, non-null σ ≥ {min_nonnull:.1e} relative, tol {NULL_SV_TOL:e}); N=3,R=6 rank mismatch: {mismatch}",
            bad.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let n = 2 + (i % 3) as usize;
        let r = 2 + (i % 7) as usize;
        let mut rng = rng_from_seed(derive_seed(4, i));
        let t1 = complex_gaussian_tensor(n, n, r, &mut rng);
        let t2 = complex_gaussian_tensor(n, n, r, &mut rng);
        let gamma = build_gamma(&t1, &t2).unwrap();
        let explicit = gamma.adjoint() * &gamma;
        let omega = build_omega(&t1, &t2).unwrap();
        worst = worst.max((omega - &explicit).norm() / explicit.norm());
    }
    check(worst <= OMEGA_REL_TOL, format!("Gram form vs ΓᴴΓ, 20 instances up to N=4,R=8: worst relative {worst:.2e} (tol {OMEGA_REL_TOL:e})"))
}

fn complex_gaussian_tensor(
    i: usize,
    j: usize,
    k: usize,
    rng: &mut dccpd::random::SeededRng,
) -> dccpd::Tensor {
    let slices: Vec<Matrix> = (0..k)
        .map(|_| complex_gaussian_matrix::<f64, _>(i, j, rng))
        .collect();
    dccpd::Tensor::from_slices(&slices).unwrap()
}

fn psi_norm(x1: &Matrix, x2: &Matrix) -> f64 {
    let psi = coupled_rank1_map(x1, x2).unwrap();
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / (x1.norm() * x2.norm())
}

fn criterion_5() -> Outcome {
    let mut rng = rng_from_seed(5);
    let (mut worst_zero, mut least_nonzero) = (0.0f64, f64::INFINITY);
    for i in 0..100 {
        let n = 2 + i % 4;
        let (p, q) = (1 + i % 3, 1 + (i / 3) % 3);
        let a = complex_gaussian_matrix::<f64, _>(n, 1, &mut rng);
        let x1 = &a * complex_gaussian_matrix::<f64, _>(1, p, &mut rng);
        let x2 = &a * complex_gaussian_matrix::<f64, _>(1, q, &mut rng) * Z::new(0.0, 3.0);
        worst_zero = worst_zero.max(psi_norm(&x1, &x2));

        let c = complex_gaussian_matrix::<f64, _>(n, 1, &mut rng);
        let y1 = &a * complex_gaussian_matrix::<f64, _>(1, p, &mut rng);
        let y2 = if i % 2 == 0 {
            // rank-1 with a different column space
            &c * complex_gaussian_matrix::<f64, _>(1, q, &mut rng)
        } else {
            // rank 2
            complex_gaussian_matrix::<f64, _>(n, 2, &mut rng)
                * complex_gaussian_matrix::<f64, _>(2, q.max(2), &mut rng)
        };
        least_nonzero = least_nonzero.min(psi_norm(&y1, &y2));
    }
    check(
        worst_zero <= PSI_ZERO_TOL && least_nonzero > PSI_NONZERO_TOL,
        format!(
            "ψ on 100 coupled pairs ≤ {worst_zero:.1e} (tol {PSI_ZERO_TOL:e}), on 100 non-coupled/rank-2 pairs ≥ {least_nonzero:.1e} (tol {PSI_NONZERO_TOL:e}), relative to ‖X1‖‖X2‖"
        ),
    )
}

/// Central-difference gradient of `η` with respect to the real and
/// imaginary parts of `C^(m,n)`.
fn fd_gradient(p: &Problem, sol: &Solution, m: usize, n: usize) -> Vec<f64> {
    let c = sol.c(m, n).clone();
    let h = 1e-6 * c.norm().max(1.0) / (c.len() as f64).sqrt();
    let mut g = Vec::with_capacity(2 * c.len());
    for idx in 0..c.len() {
        for dir in [Z::new(1.0, 0.0), Z::new(0.0, 1.0)] {
            let eval = |step: f64| {
                let mut s = sol.clone();
                s.c_mut(m, n)[idx] = c[idx] + dir * step;
                cost_eta(p, &s).unwrap()
            };
            g.push((eval(h) - eval(-h)) / (2.0 * h));
        }
    }
    g
}

fn criterion_6() -> Outcome {
    let mut violations = 0;
    let mut updates = 0;
    let mut worst_grad = 0.0f64;
    for i in 0..50u64 {
        let n = 3 + (i % 2) as usize;
        let r = 2 + (i % 3) as usize;
        let seed = derive_seed(6, i);
        let (p0, _) = exact(&[n; 3], r + 1, r, seed);
        let mut rng = rng_from_seed(derive_seed(seed, 1));
        let p = add_noise(&p0, 0.1, &mut rng).unwrap();
        let init = random_init(&p, r, derive_seed(seed, 2)).unwrap();
        let opts = SolverOptions {
            max_iter: 30,
            rel_tol: 1e-12,
            ..SolverOptions::noisy()
        };
        let (sol, trace) = solve_als(&p, &init, &opts).unwrap();
        let eta0 = trace.costs[0];
        let mut last = eta0;
        for &c in &trace.update_costs {
            updates += 1;
            if c > last + ALS_MONOTONE_SLACK * eta0 {
                violations += 1;
            }
            last = c;
        }
        // gradient before and after the conditional update of one block
        let (m, nn) = (0, 1);
        let before = fd_gradient(&p, &sol, m, nn);
        let mut post = sol.clone();
        *post.c_mut(m, nn) = update_c(&p, &sol, m, nn).unwrap();
        let after = fd_gradient(&p, &post, m, nn);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm(&before).max(1e-3 * cost_eta(&p, &sol).unwrap());
        worst_grad = worst_grad.max(norm(&after) / scale);
    }
    check(
        violations == 0 && worst_grad <= GRADIENT_REL_TOL,
        format!(
            "50 noisy instances: {violations} cost increases over {updates} conditional updates (slack {ALS_MONOTONE_SLACK:e}·η₀); post-update gradient w.r.t. C^(1,2) relative {worst_grad:.1e} (tol {GRADIENT_REL_TOL:e})"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = rng_from_seed(7);
    let truth = Solution::random_general(&[4; 3], 4, 6, &mut rng);
    let p = Problem::from_solution(&truth, false).unwrap();
    let sym = symmetrize(&p).unwrap();
    let eps = solve_algebraic(
        &sym,
        &SolverOptions {
            rank: Some(6),
            ..Default::default()
        },
    )
    .map(|(sol, _)| mean_relative_error(&sol.a, &truth.a).unwrap());
    match eps {
        Ok(e) => check(e < SYMMETRIZED_EPS_TOL, format!("nonsymmetric N=4,T=4,R=6 after symmetrization: ε={e:.2e} (tol {SYMMETRIZED_EPS_TOL:e})")),
        Err(e) => check(false, format!("nonsymmetric N=4,T=4,R=6: solver failed: {e}")),
    }
}

fn criterion_8() -> Outcome {
    let a = ExperimentConfig {
        experiment: Experiment::Jbss,
        n: 3,
        r: 3,
        m: 3,
        l: 50,
        t: Some(39),
        p: 20,
        runs: 50,
        seed: 8,
        snr_db_list: vec![10.0, 20.0, 30.0],
        solvers: vec![SolverKind::AlgebraicAls],
        ..Default::default()
    };
    let rows = jbss_bench(&a).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for snr in [10.0, 20.0, 30.0] {
        let dc = mean_of(&rows, snr, "algebraic+als").unwrap().epsilon;
        let base = mean_of(&rows, snr, BASELINE).unwrap().epsilon;
        pass &= dc < base;
        parts.push(format!("{snr} dB: {dc:.3} vs {base:.3}"));
    }
    let b = ExperimentConfig {
        r: 4,
        l: 100,
        snr_db_list: vec![30.0],
        ..a
    };
    let rows_b = jbss_bench(&b).unwrap();
    let dc_b = mean_of(&rows_b, 30.0, "algebraic+als").unwrap();
    let inapplicable = rows_b
        .iter()
        .filter(|r| r.run.is_some() && r.solver == BASELINE)
        .all(|r| r.status == "inapplicable");
    pass &= dc_b.epsilon < UNDERDETERMINED_EPS_TOL && dc_b.is_ok() && inapplicable;
    check(
        pass,
        format!(
            "setting (a) DC-CPD vs baseline mean ε, 50 runs: {}; setting (b) 30 dB ε={:.3} (tol {UNDERDETERMINED_EPS_TOL}), baseline inapplicable: {inapplicable}",
            parts.join(", "),
            dc_b.epsilon
        ),
    )
}

/// Exhaustive minimum over permutations with the optimal complex scale per
/// column, written independently of the assignment solver.
fn brute_force_error(est: &[Matrix], truth: &[Matrix]) -> f64 {
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut total = 0.0;
    for (e, t) in est.iter().zip(truth) {
        let best = perms
            .iter()
            .map(|perm| {
                (0..3)
                    .map(|i| {
                        let a = t.column(i);
                        let b = e.column(perm[i]);
                        let d = b.dotc(&a) / b.dotc(&b);
                        (a - b * d).norm_squared()
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        total += best / t.norm_squared();
    }
    total / truth.len() as f64
}

fn criterion_9() -> Outcome {
    let mut rng = rng_from_seed(9);
    let (mut worst_diff, mut worst_zero) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let n = 3 + i % 3;
        let truth: Vec<Matrix> = (0..3)
            .map(|_| complex_gaussian_matrix::<f64, _>(n, 3, &mut rng))
            .collect();
        let est: Vec<Matrix> = truth
            .iter()
            .map(|t| t + complex_gaussian_matrix::<f64, _>(n, 3, &mut rng) * Z::new(0.3, 0.0))
            .collect();
        let got = mean_relative_error(&est, &truth).unwrap();
        worst_diff = worst_diff.max((got - brute_force_error(&est, &truth)).abs());

        let scaled: Vec<Matrix> = truth
            .iter()
            .map(|t| {
                let d = complex_gaussian_matrix::<f64, _>(1, 3, &mut rng);
                Matrix::from_fn(n, 3, |row, col| {
                    let src = (col + 1 + i) % 3;
                    t[(row, src)] * d[(0, col)]
                })
            })
            .collect();
        worst_zero = worst_zero.max(mean_relative_error(&scaled, &truth).unwrap());
    }
    check(
        worst_diff <= METRIC_ORACLE_TOL && worst_zero <= METRIC_ZERO_TOL,
        format!(
            "metric vs exhaustive permutations on 100 R=3 cases: max diff {worst_diff:.1e} (tol {METRIC_ORACLE_TOL:e}); permuted+scaled truth gives {worst_zero:.1e} (tol {METRIC_ZERO_TOL:e})"
        ),
    )
}

/// CSV text of the rows with the timing column removed.
fn numeric_csv(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let timing = text
        .lines()
        .next()
        .and_then(|h| h.split(',').position(|c| c == "wall_ms"))
        .expect("wall_ms column");
    text.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(timing);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_10() -> Outcome {
    let exact_cfg = ExperimentConfig {
        experiment: Experiment::Exact,
        n: 3,
        r: 5,
        m: 3,
        runs: 4,
        seed: 10,
        solvers: vec![
            SolverKind::Algebraic,
            SolverKind::Als,
            SolverKind::AlgebraicAls,
        ],
        ..Default::default()
    };
    let jbss_cfg = ExperimentConfig {
        experiment: Experiment::Jbss,
        n: 3,
        r: 3,
        m: 3,
        l: 20,
        t: Some(15),
        p: 10,
        runs: 3,
        seed: 10,
        snr_db_list: vec![10.0, 30.0],
        solvers: vec![SolverKind::Algebraic, SolverKind::AlgebraicAls],
        ..Default::default()
    };
    let mut same = true;
    for cfg in [&exact_cfg, &jbss_cfg] {
        let run = |threads| {
            in_pool(threads, || match cfg.experiment {
                Experiment::Exact => exact_bench(cfg).unwrap(),
                _ => jbss_bench(cfg).unwrap(),
            })
        };
        let one = numeric_csv(&run(1));
        for other in [numeric_csv(&run(4)), numeric_csv(&run(1))] {
            if let Some((a, b)) = one.lines().zip(other.lines()).find(|(a, b)| a != b) {
                eprintln!("  differs: {a}\n       vs: {b}");
                same = false;
            }
        }
    }
    check(
        same,
        "exact and jbss CSV numeric columns identical across 1/4 threads and repeated runs",
    )
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (k, f) in criteria {
        if filter.is_some_and(|want| want != k) {
            continue;
        }
        let t = Instant::now();
        let out = f();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {k}: {} [{:.1}s]",
            out.detail,
            t.elapsed().as_secs_f64()
        );
        if !out.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
