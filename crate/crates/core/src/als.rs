//! Alternating least squares for the double coupled decomposition.

use num_complex::Complex;
use rand::Rng;

use crate::error::{DcCpdError, Result};
use crate::linalg::lstsq;
use crate::model::{
    check_compatible, cost_eta, pair_cost, DcCpdProblem, DcCpdSolution, SolverOptions,
};
use crate::random::rng_from_seed;
use crate::scalar::{conj_mat, lit, to_f64, ComplexMatrix, Real};
use crate::tensor::{khatri_rao, matricize, Mode};

/// Number of random starting points tried by [`random_init`].
pub const MULTISTART_DRAWS: usize = 10;
/// Sweeps run from every random starting point before selecting one.
pub const MULTISTART_SWEEPS: usize = 10;
/// Step halvings tried before a loading update is rejected.
const MAX_BACKTRACK: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tol,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsTrace {
    /// `η` at the start and after every sweep.
    pub costs: Vec<f64>,
    /// `η` after every conditional update, in update order.
    pub update_costs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

/// Stacked system whose least-squares solution is the conditional update of
/// `A^(m)`: returns `(K, Y)` with `Y ≈ K · A^(m)ᵀ`.
///
/// For every `n` the grid contributes `T₁^(m,n) ≈ (conj A^(n) ⊙ C^(m,n)) A^(m)ᵀ`
/// and `conj T₂^(n,m) ≈ (conj A^(n) ⊙ conj C^(n,m)) A^(m)ᵀ`. On the diagonal
/// both copies use the current `A^(m)` in the conjugated slot, so `T^(m,m)`
/// enters twice.
pub fn stacked_system<T: Real>(
    p: &DcCpdProblem<T>,
    sol: &DcCpdSolution<T>,
    m: usize,
) -> Result<(ComplexMatrix<T>, ComplexMatrix<T>)> {
    check_compatible(p, sol)?;
    let mm = p.dataset_count();
    let r = sol.rank();
    let nm = p.dims_n()[m];
    let rows: usize = (0..mm).map(|n| 2 * p.dims_n()[n] * p.third_dim()).sum();
    let mut k = ComplexMatrix::zeros(rows, r);
    let mut y = ComplexMatrix::zeros(rows, nm);
    let mut off = 0;
    for n in 0..mm {
        let an = conj_mat(&sol.a[n]);
        let blocks = [
            (
                khatri_rao(&an, sol.c(m, n))?,
                matricize(p.tensor(m, n), Mode::One),
            ),
            (
                khatri_rao(&an, &conj_mat(sol.c(n, m)))?,
                conj_mat(&matricize(p.tensor(n, m), Mode::Two)),
            ),
        ];
        for (coef, data) in blocks {
            let h = coef.nrows();
            k.rows_mut(off, h).copy_from(&coef);
            y.rows_mut(off, h).copy_from(&data);
            off += h;
        }
    }
    Ok((k, y))
}

/// Least-squares update of `A^(m)` with every other factor fixed.
pub fn update_a<T: Real>(
    p: &DcCpdProblem<T>,
    sol: &DcCpdSolution<T>,
    m: usize,
) -> Result<ComplexMatrix<T>> {
    let (k, y) = stacked_system(p, sol, m)?;
    let at = lstsq(&k, &y).map_err(|e| match e {
        DcCpdError::RankDeficient { rank, cols, .. } => DcCpdError::RankDeficient {
            rank,
            cols,
            context: format!(
                "stacked coefficient of A^({m}) lacks full column rank, \
                 so the decomposition is not unique and fewer terms suffice"
            ),
        },
        other => other,
    })?;
    Ok(at.transpose())
}

/// Least-squares update of `C^(m,n)`; the diagonal blocks of a symmetric grid
/// are kept real.
pub fn update_c<T: Real>(
    p: &DcCpdProblem<T>,
    sol: &DcCpdSolution<T>,
    m: usize,
    n: usize,
) -> Result<ComplexMatrix<T>> {
    check_compatible(p, sol)?;
    let kr = khatri_rao(&sol.a[m], &conj_mat(&sol.a[n]))?;
    let ct = lstsq(&kr, &matricize(p.tensor(m, n), Mode::Three)).map_err(|e| match e {
        DcCpdError::RankDeficient { rank, cols, .. } => DcCpdError::RankDeficient {
            rank,
            cols,
            context: format!(
                "A^({m}) ⊙ conj A^({n}) lacks full column rank, \
                 so the decomposition is not unique and fewer terms suffice"
            ),
        },
        other => other,
    })?;
    let mut c = ct.transpose();
    if m == n && p.is_symmetric() {
        for z in c.iter_mut() {
            z.im = T::zero();
        }
    }
    Ok(c)
}

/// Applies the loading update of `A^(m)` in place. The diagonal term makes
/// the stacked system a linearization, so the step is halved until `η` does
/// not increase; the new cost is returned.
fn safeguarded_a_step<T: Real>(
    p: &DcCpdProblem<T>,
    sol: &mut DcCpdSolution<T>,
    m: usize,
    eta: T,
) -> Result<T> {
    let target = update_a(p, sol, m)?;
    let old = sol.a[m].clone();
    // only the pairs in row and column m depend on A^(m)
    let base = eta - touched_cost(p, sol, m);
    let mut step = T::one();
    for _ in 0..MAX_BACKTRACK {
        sol.a[m] = &old + (&target - &old) * Complex::new(step, T::zero());
        let cand = base + touched_cost(p, sol, m);
        if cand <= eta {
            return Ok(cand);
        }
        step *= lit(0.5);
    }
    sol.a[m] = old;
    Ok(eta)
}

/// Cost of the pairs `(m, ·)` and `(·, m)`.
fn touched_cost<T: Real>(p: &DcCpdProblem<T>, sol: &DcCpdSolution<T>, m: usize) -> T {
    let mut acc = T::zero();
    for n in 0..p.dataset_count() {
        acc += pair_cost(p, sol, m, n);
        if n != m {
            acc += pair_cost(p, sol, n, m);
        }
    }
    acc
}

/// One sweep: every `A^(m)` in turn, then every `C^(m,n)`. Costs after each
/// conditional update are appended to `log`.
fn sweep<T: Real>(
    p: &DcCpdProblem<T>,
    sol: &mut DcCpdSolution<T>,
    mut eta: T,
    log: &mut Vec<f64>,
) -> Result<T> {
    let mm = p.dataset_count();
    for m in 0..mm {
        eta = safeguarded_a_step(p, sol, m, eta)?;
        log.push(to_f64(eta));
    }
    for m in 0..mm {
        for n in 0..mm {
            let before = pair_cost(p, sol, m, n);
            let c = update_c(p, sol, m, n)?;
            let old = std::mem::replace(sol.c_mut(m, n), c);
            let after = pair_cost(p, sol, m, n);
            // the update is an exact minimizer; only rounding can raise η
            if after <= before {
                eta = eta - before + after;
            } else {
                *sol.c_mut(m, n) = old;
            }
            log.push(to_f64(eta));
        }
    }
    // refresh the running sum so rounding does not accumulate across sweeps
    cost_eta(p, sol)
}

/// `η` below this fraction of the data energy is treated as exact.
fn exact_floor<T: Real>() -> f64 {
    let e = to_f64(T::default_epsilon()) * 64.0;
    e * e
}

/// Runs ALS from `init` until the relative change of `η` per sweep drops to
/// `opts.rel_tol` or `opts.max_iter` sweeps are done.
pub fn solve_als<T: Real>(
    p: &DcCpdProblem<T>,
    init: &DcCpdSolution<T>,
    opts: &SolverOptions,
) -> Result<(DcCpdSolution<T>, AlsTrace)> {
    opts.validate()?;
    check_compatible(p, init)?;
    let mut sol = init.clone();
    if p.is_symmetric() {
        sol.project_diagonal_real();
    }
    let energy = to_f64(p.total_energy());
    let mut eta = cost_eta(p, &sol)?;
    let eta0 = to_f64(eta);
    let mut costs = vec![eta0];
    let mut update_costs = Vec::new();
    let mut stop_reason = StopReason::MaxIter;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let prev = to_f64(eta);
        let start = update_costs.len();
        eta = sweep(p, &mut sol, eta, &mut update_costs)?;
        iterations += 1;
        let mut last = prev;
        let slack = 1e-12 * eta0.max(exact_floor::<T>() * energy);
        for &c in &update_costs[start..] {
            if c > last + slack {
                return Err(DcCpdError::Contract(format!(
                    "cost rose from {last:.6e} to {c:.6e} in sweep {iterations}"
                )));
            }
            last = c;
        }
        let cur = to_f64(eta);
        costs.push(cur);
        let rel = if prev > 0.0 {
            (prev - cur).abs() / prev
        } else {
            0.0
        };
        if rel <= opts.rel_tol || cur <= exact_floor::<T>() * energy {
            stop_reason = StopReason::Tol;
            break;
        }
    }
    sol.normalize();
    if p.is_symmetric() {
        sol.project_diagonal_real();
    }
    Ok((
        sol,
        AlsTrace {
            costs,
            update_costs,
            iterations,
            converged: stop_reason == StopReason::Tol,
            stop_reason,
        },
    ))
}

/// Best of [`MULTISTART_DRAWS`] random starting points, each run for
/// [`MULTISTART_SWEEPS`] sweeps. Draws that hit a rank-deficient update are
/// skipped.
pub fn random_init<T: Real>(p: &DcCpdProblem<T>, r: usize, seed: u64) -> Result<DcCpdSolution<T>> {
    let mut rng = rng_from_seed(seed);
    let mut best: Option<(T, DcCpdSolution<T>)> = None;
    let mut last_err = None;
    for _ in 0..MULTISTART_DRAWS {
        let start = draw_start(p, r, &mut rng);
        let mut sol = start;
        let mut eta = cost_eta(p, &sol)?;
        let mut log = Vec::new();
        let mut ok = true;
        for _ in 0..MULTISTART_SWEEPS {
            match sweep(p, &mut sol, eta, &mut log) {
                Ok(e) => eta = e,
                Err(e) => {
                    last_err = Some(e);
                    ok = false;
                    break;
                }
            }
        }
        if ok && best.as_ref().is_none_or(|(b, _)| eta < *b) {
            best = Some((eta, sol));
        }
    }
    match best {
        Some((_, s)) => Ok(s),
        None => {
            Err(last_err.unwrap_or_else(|| DcCpdError::Internal("no random start survived".into())))
        }
    }
}

fn draw_start<T: Real, R: Rng + ?Sized>(
    p: &DcCpdProblem<T>,
    r: usize,
    rng: &mut R,
) -> DcCpdSolution<T> {
    if p.is_symmetric() {
        DcCpdSolution::random_symmetric(p.dims_n(), p.third_dim(), r, rng)
    } else {
        DcCpdSolution::random_general(p.dims_n(), p.third_dim(), r, rng)
    }
}
