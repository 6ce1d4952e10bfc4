//! The coupled tensor grid, its factor solutions and the preprocessing
//! steps shared by all solvers.
//!
//! Dataset indices are 0-based in the API. Tensor `(m, n)` has dims
//! `(N_m, N_n, T)` and models `Σ_r a_r^(m) ∘ conj(a_r^(n)) ∘ c_r^(m,n)`.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;

use crate::error::{DcCpdError, Result, Warning};
use crate::linalg::{normalize_columns, real_right_singular, svd};
use crate::random::{complex_gaussian_matrix, real_gaussian_matrix};
use crate::scalar::{conj_mat, czero, lit, to_f64, ComplexMatrix, Real};
use crate::tensor::{concat3, khatri_rao, matricize, perm213, tensorize, ComplexTensor3, Mode};

/// Relative tolerance for the conjugate-symmetry invariant.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DcCpdProblem<T: Real> {
    dims_n: Vec<usize>,
    t: usize,
    tensors: Vec<ComplexTensor3<T>>,
    symmetric: bool,
}

impl<T: Real> DcCpdProblem<T> {
    /// `tensors` are given row-major over `(m, n)`.
    pub fn new(
        dims_n: Vec<usize>,
        t: usize,
        tensors: Vec<ComplexTensor3<T>>,
        symmetric: bool,
    ) -> Result<Self> {
        let mm = dims_n.len();
        if mm == 0 {
            return Err(DcCpdError::InvalidInput(
                "problem needs at least one dataset".into(),
            ));
        }
        if dims_n.contains(&0) || t == 0 {
            return Err(DcCpdError::InvalidInput(
                "dimensions must be positive".into(),
            ));
        }
        if tensors.len() != mm * mm {
            return Err(DcCpdError::Dimension(format!(
                "expected {} tensors, got {}",
                mm * mm,
                tensors.len()
            )));
        }
        for m in 0..mm {
            for n in 0..mm {
                let d = tensors[m * mm + n].dims();
                if d != (dims_n[m], dims_n[n], t) {
                    return Err(DcCpdError::Dimension(format!(
                        "tensor ({m},{n}) has dims {d:?}, expected {:?}",
                        (dims_n[m], dims_n[n], t)
                    )));
                }
            }
        }
        for tensor in &tensors {
            if tensor
                .data()
                .iter()
                .any(|z| !z.re.is_finite() || !z.im.is_finite())
            {
                return Err(DcCpdError::InvalidInput(
                    "tensor contains non-finite entries".into(),
                ));
            }
        }
        let p = Self {
            dims_n,
            t,
            tensors,
            symmetric,
        };
        if symmetric {
            let dev = p.symmetry_deviation();
            if dev > lit(SYMMETRY_TOL) {
                return Err(DcCpdError::InvalidInput(format!(
                    "grid flagged symmetric but deviates by {:e}",
                    to_f64(dev)
                )));
            }
        }
        Ok(p)
    }

    pub fn from_fn(
        dims_n: Vec<usize>,
        t: usize,
        symmetric: bool,
        mut f: impl FnMut(usize, usize) -> ComplexTensor3<T>,
    ) -> Result<Self> {
        let mm = dims_n.len();
        let mut tensors = Vec::with_capacity(mm * mm);
        for m in 0..mm {
            for n in 0..mm {
                tensors.push(f(m, n));
            }
        }
        Self::new(dims_n, t, tensors, symmetric)
    }

    /// Exact grid generated by a solution.
    pub fn from_solution(sol: &DcCpdSolution<T>, symmetric: bool) -> Result<Self> {
        let dims_n = sol.dims_n();
        let t = sol.c[0].nrows();
        Self::from_fn(dims_n, t, symmetric, |m, n| sol.reconstruct(m, n))
    }

    pub fn dataset_count(&self) -> usize {
        self.dims_n.len()
    }

    pub fn dims_n(&self) -> &[usize] {
        &self.dims_n
    }

    pub fn third_dim(&self) -> usize {
        self.t
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn tensor(&self, m: usize, n: usize) -> &ComplexTensor3<T> {
        &self.tensors[m * self.dims_n.len() + n]
    }

    pub fn tensors(&self) -> &[ComplexTensor3<T>] {
        &self.tensors
    }

    /// `Σ ‖T^(m,n)‖²`.
    pub fn total_energy(&self) -> T {
        self.tensors
            .iter()
            .fold(T::zero(), |acc, t| acc + t.norm_sqr())
    }

    /// Largest relative deviation from `T^(m,n) = perm213(conj T^(n,m))`.
    pub fn symmetry_deviation(&self) -> T {
        let mm = self.dims_n.len();
        let mut worst = T::zero();
        for m in 0..mm {
            for n in m..mm {
                let mirrored = perm213(&self.tensor(n, m).conj());
                let dev = self
                    .tensor(m, n)
                    .dist_sqr(&mirrored)
                    .map(|d| d.sqrt())
                    .unwrap_or_else(|_| T::max_value().unwrap_or(T::one()));
                let scale = self.tensor(m, n).norm().max(mirrored.norm());
                if scale > T::zero() {
                    worst = worst.max(dev / scale);
                }
            }
        }
        worst
    }
}

/// Factor matrices `A^(m)` (`N_m × R`) and `C^(m,n)` (`T × R`).
#[derive(Debug, Clone, PartialEq)]
pub struct DcCpdSolution<T: Real> {
    pub a: Vec<ComplexMatrix<T>>,
    /// Row-major over `(m, n)`.
    pub c: Vec<ComplexMatrix<T>>,
}

impl<T: Real> DcCpdSolution<T> {
    pub fn new(a: Vec<ComplexMatrix<T>>, c: Vec<ComplexMatrix<T>>) -> Result<Self> {
        let mm = a.len();
        if mm == 0 || c.len() != mm * mm {
            return Err(DcCpdError::Dimension(format!(
                "solution needs M A-factors and M² C-factors; got {} and {}",
                mm,
                c.len()
            )));
        }
        let r = a[0].ncols();
        let t = c[0].nrows();
        if a.iter().any(|x| x.ncols() != r) || c.iter().any(|x| x.ncols() != r || x.nrows() != t) {
            return Err(DcCpdError::Dimension(
                "factor shapes are inconsistent".into(),
            ));
        }
        Ok(Self { a, c })
    }

    pub fn rank(&self) -> usize {
        self.a[0].ncols()
    }

    pub fn dataset_count(&self) -> usize {
        self.a.len()
    }

    pub fn dims_n(&self) -> Vec<usize> {
        self.a.iter().map(|x| x.nrows()).collect()
    }

    pub fn c(&self, m: usize, n: usize) -> &ComplexMatrix<T> {
        &self.c[m * self.a.len() + n]
    }

    pub fn c_mut(&mut self, m: usize, n: usize) -> &mut ComplexMatrix<T> {
        let mm = self.a.len();
        &mut self.c[m * mm + n]
    }

    /// `[[A^(m), conj A^(n), C^(m,n)]]`.
    pub fn reconstruct(&self, m: usize, n: usize) -> ComplexTensor3<T> {
        ComplexTensor3::from_cpd(&self.a[m], &conj_mat(&self.a[n]), self.c(m, n))
            .expect("solution factors are consistent by construction")
    }

    /// Applies the unit-column convention to every `A^(m)` and moves the
    /// removed scale into the `C^(m,n)`. For a symmetric grid this keeps
    /// `C^(m,m)` real.
    pub fn normalize(&mut self) {
        let mm = self.a.len();
        let scales: Vec<Vec<Complex<T>>> = self.a.iter_mut().map(normalize_columns).collect();
        for m in 0..mm {
            for n in 0..mm {
                let c = self.c_mut(m, n);
                for (r, mut col) in c.column_iter_mut().enumerate() {
                    let s = scales[m][r] * scales[n][r].conj();
                    for z in col.iter_mut() {
                        *z *= s;
                    }
                }
            }
        }
    }

    /// Replaces every `C^(m,m)` by its real part.
    pub fn project_diagonal_real(&mut self) {
        for m in 0..self.a.len() {
            let c = self.c_mut(m, m);
            for z in c.iter_mut() {
                z.im = T::zero();
            }
        }
    }

    /// Random factors consistent with a conjugate-symmetric grid:
    /// `C^(n,m) = conj C^(m,n)` and real `C^(m,m)`.
    pub fn random_symmetric<R: Rng + ?Sized>(
        dims_n: &[usize],
        t: usize,
        r: usize,
        rng: &mut R,
    ) -> Self {
        let mm = dims_n.len();
        let a: Vec<_> = dims_n
            .iter()
            .map(|&n| complex_gaussian_matrix::<T, R>(n, r, rng))
            .collect();
        let mut c = vec![ComplexMatrix::zeros(t, r); mm * mm];
        for m in 0..mm {
            c[m * mm + m] = real_gaussian_matrix::<T, R>(t, r, rng);
            for n in (m + 1)..mm {
                let x = complex_gaussian_matrix::<T, R>(t, r, rng);
                c[n * mm + m] = conj_mat(&x);
                c[m * mm + n] = x;
            }
        }
        Self { a, c }
    }

    /// Random factors with independent `C^(m,n)` for every pair.
    pub fn random_general<R: Rng + ?Sized>(
        dims_n: &[usize],
        t: usize,
        r: usize,
        rng: &mut R,
    ) -> Self {
        let mm = dims_n.len();
        let a: Vec<_> = dims_n
            .iter()
            .map(|&n| complex_gaussian_matrix::<T, R>(n, r, rng))
            .collect();
        let c = (0..mm * mm)
            .map(|_| complex_gaussian_matrix::<T, R>(t, r, rng))
            .collect();
        Self { a, c }
    }
}

/// `η = Σ_{m,n} ‖T^(m,n) − [[A^(m), conj A^(n), C^(m,n)]]‖²`.
pub fn cost_eta<T: Real>(p: &DcCpdProblem<T>, sol: &DcCpdSolution<T>) -> Result<T> {
    check_compatible(p, sol)?;
    let mm = p.dataset_count();
    let mut eta = T::zero();
    for m in 0..mm {
        for n in 0..mm {
            eta += pair_cost(p, sol, m, n);
        }
    }
    Ok(eta)
}

/// Residual energy of one tensor of the grid, evaluated through the mode-3
/// unfolding.
pub(crate) fn pair_cost<T: Real>(
    p: &DcCpdProblem<T>,
    sol: &DcCpdSolution<T>,
    m: usize,
    n: usize,
) -> T {
    let kr = khatri_rao(&sol.a[m], &conj_mat(&sol.a[n])).expect("consistent factors");
    let model = kr * sol.c(m, n).transpose();
    let data = p.tensor(m, n).data();
    // mode-3 unfolding rows are (i, j), columns k: matches row-major storage
    let k = p.third_dim();
    let mut acc = T::zero();
    for (idx, z) in data.iter().enumerate() {
        let d = z - model[(idx / k, idx % k)];
        acc += d.re * d.re + d.im * d.im;
    }
    acc
}

pub(crate) fn check_compatible<T: Real>(p: &DcCpdProblem<T>, sol: &DcCpdSolution<T>) -> Result<()> {
    if sol.dims_n() != p.dims_n() || sol.c[0].nrows() != p.third_dim() {
        return Err(DcCpdError::Dimension(format!(
            "solution dims {:?}/T={} do not match problem {:?}/T={}",
            sol.dims_n(),
            sol.c[0].nrows(),
            p.dims_n(),
            p.third_dim()
        )));
    }
    Ok(())
}

/// Adds circular Gaussian noise with `‖noise‖ = level · ‖data‖` over the
/// whole grid. A symmetric grid stays exactly symmetric: the noise of
/// `T^(n,m)` mirrors that of `T^(m,n)` and diagonal noise is Hermitian.
pub fn add_noise<T: Real, R: Rng + ?Sized>(
    p: &DcCpdProblem<T>,
    level: T,
    rng: &mut R,
) -> Result<DcCpdProblem<T>> {
    let mm = p.dataset_count();
    let dims = &p.dims_n;
    let t = p.t;
    let half = Complex::new(lit::<T>(0.5), T::zero());
    let mut noise: Vec<Option<ComplexTensor3<T>>> = vec![None; mm * mm];
    for m in 0..mm {
        for n in 0..mm {
            if p.symmetric && n < m {
                continue;
            }
            let g = complex_gaussian_matrix::<T, R>(dims[m] * dims[n], t, rng);
            let mut e = tensorize(&g, (dims[m], dims[n], t))?;
            if p.symmetric {
                if m == n {
                    e = e.add(&perm213(&e.conj()))?.scale(half);
                } else {
                    noise[n * mm + m] = Some(perm213(&e.conj()));
                }
            }
            noise[m * mm + n] = Some(e);
        }
    }
    let noise: Vec<_> = noise.into_iter().map(|e| e.expect("filled")).collect();
    let ne = noise
        .iter()
        .fold(T::zero(), |acc, e| acc + e.norm_sqr())
        .sqrt();
    let scale = if ne > T::zero() {
        level * p.total_energy().sqrt() / ne
    } else {
        T::zero()
    };
    let tensors = p
        .tensors
        .iter()
        .zip(&noise)
        .map(|(x, e)| x.add(&e.scale(Complex::new(scale, T::zero()))))
        .collect::<Result<Vec<_>>>()?;
    DcCpdProblem::new(dims.clone(), t, tensors, p.symmetric)
}

/// Conjugate-symmetric grid with doubled third dimension built from an
/// arbitrary grid. The stacked third factors are `[C^(m,n); conj C^(n,m)]`
/// off the diagonal and the Hermitian and anti-Hermitian parts on it.
pub fn symmetrize<T: Real>(p: &DcCpdProblem<T>) -> Result<DcCpdProblem<T>> {
    let mm = p.dataset_count();
    let half = Complex::new(lit::<T>(0.5), T::zero());
    let minus_half_i = Complex::new(T::zero(), lit::<T>(-0.5));
    let mut tensors = Vec::with_capacity(mm * mm);
    for m in 0..mm {
        for n in 0..mm {
            let t = match m.cmp(&n) {
                std::cmp::Ordering::Less => {
                    concat3(p.tensor(m, n), &perm213(&p.tensor(n, m).conj()))?
                }
                std::cmp::Ordering::Greater => {
                    concat3(&perm213(&p.tensor(n, m).conj()), p.tensor(m, n))?
                }
                std::cmp::Ordering::Equal => {
                    let x = p.tensor(m, m);
                    let xh = perm213(&x.conj());
                    concat3(&x.add(&xh)?.scale(half), &x.sub(&xh)?.scale(minus_half_i))?
                }
            };
            tensors.push(t);
        }
    }
    DcCpdProblem::new(p.dims_n.clone(), 2 * p.t, tensors, true)
}

/// Third-mode bases retained by [`reduce_third_mode`].
#[derive(Debug, Clone)]
pub struct CompressionMaps<T: Real> {
    /// `T × r` basis per `(m, n)`, row-major.
    pub u: Vec<ComplexMatrix<T>>,
    pub m: usize,
}

impl<T: Real> CompressionMaps<T> {
    pub fn basis(&self, m: usize, n: usize) -> &ComplexMatrix<T> {
        &self.u[m * self.m + n]
    }

    /// Maps a reduced third factor back: `C = conj(U) · C_reduced`.
    pub fn lift(&self, m: usize, n: usize, c_reduced: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        conj_mat(self.basis(m, n)) * c_reduced
    }
}

/// Projects every mode-3 unfolding onto its top-`r` right singular basis.
///
/// For a symmetric grid the bases are chosen so the reduced grid stays
/// symmetric: `U^(n,m) = conj U^(m,n)` and real `U^(m,m)`.
pub fn reduce_third_mode<T: Real>(
    p: &DcCpdProblem<T>,
    r: usize,
) -> Result<(DcCpdProblem<T>, CompressionMaps<T>)> {
    if r == 0 || r > p.t {
        return Err(DcCpdError::Dimension(format!(
            "reduction rank {r} must lie in 1..={}",
            p.t
        )));
    }
    let mm = p.dataset_count();
    let mut bases: Vec<Option<ComplexMatrix<T>>> = vec![None; mm * mm];
    for m in 0..mm {
        for n in 0..mm {
            if bases[m * mm + n].is_some() {
                continue;
            }
            let t3 = matricize(p.tensor(m, n), Mode::Three);
            let u = if p.symmetric && m == n {
                real_right_basis(&t3, r)?
            } else {
                let d = svd(&t3)?;
                right_basis_padded(&d.v, p.t, r)
            };
            if p.symmetric && m != n {
                bases[n * mm + m] = Some(conj_mat(&u));
            }
            bases[m * mm + n] = Some(u);
        }
    }
    let u: Vec<ComplexMatrix<T>> = bases.into_iter().map(|b| b.expect("filled")).collect();
    let mut tensors = Vec::with_capacity(mm * mm);
    for m in 0..mm {
        for n in 0..mm {
            let t3 = matricize(p.tensor(m, n), Mode::Three) * &u[m * mm + n];
            tensors.push(tensorize(&t3, (p.dims_n[m], p.dims_n[n], r))?);
        }
    }
    let reduced = DcCpdProblem {
        dims_n: p.dims_n.clone(),
        t: r,
        tensors,
        symmetric: p.symmetric,
    };
    Ok((reduced, CompressionMaps { u, m: mm }))
}

/// First `r` columns of the right singular vectors, completed to an
/// orthonormal set when the unfolding has fewer than `r` rows.
fn right_basis_padded<T: Real>(v: &ComplexMatrix<T>, t: usize, r: usize) -> ComplexMatrix<T> {
    if v.ncols() >= r {
        return v.columns(0, r).into_owned();
    }
    let mut full = ComplexMatrix::zeros(t, r);
    full.columns_mut(0, v.ncols()).copy_from(v);
    // Gram-Schmidt against canonical vectors fills the remaining columns
    let mut filled = v.ncols();
    for e in 0..t {
        if filled == r {
            break;
        }
        let mut x = ComplexMatrix::zeros(t, 1);
        x[(e, 0)] = Complex::new(T::one(), T::zero());
        for _ in 0..2 {
            let proj = full.columns(0, filled).adjoint() * &x;
            x -= full.columns(0, filled) * proj;
        }
        let nrm = x.norm();
        if nrm > lit(1e-6) {
            x /= Complex::new(nrm, T::zero());
            full.set_column(filled, &x.column(0));
            filled += 1;
        }
    }
    full
}

/// Real orthonormal basis of the dominant right singular subspace of a mode-3
/// unfolding whose Gram matrix is real.
fn real_right_basis<T: Real>(t3: &ComplexMatrix<T>, r: usize) -> Result<ComplexMatrix<T>> {
    let (rows, k) = t3.shape();
    let stacked = DMatrix::<T>::from_fn(2 * rows, k, |i, j| {
        if i < rows {
            t3[(i, j)].re
        } else {
            t3[(i - rows, j)].im
        }
    });
    let v = real_right_singular(&stacked)?;
    let vc = v.map(|x| Complex::new(x, T::zero()));
    Ok(right_basis_padded(&vc, k, r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEstimate {
    pub rank: usize,
    /// Per-tensor counts, row-major over `(m, n)`.
    pub counts: Vec<usize>,
    pub warning: Option<Warning>,
}

/// Median over the grid of the number of mode-3 singular values above
/// `rel_tol · σ_max`. With an even number of tensors the lower median is
/// used.
pub fn detect_rank<T: Real>(p: &DcCpdProblem<T>, rel_tol: T) -> Result<RankEstimate> {
    let mut counts = Vec::with_capacity(p.tensors.len());
    for t in &p.tensors {
        let s = svd(&matricize(t, Mode::Three))?.s;
        let smax = s.first().copied().unwrap_or_else(T::zero);
        counts.push(if smax > T::zero() {
            s.iter().filter(|&&x| x > rel_tol * smax).count()
        } else {
            0
        });
    }
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let rank = sorted[(sorted.len() - 1) / 2];
    let warning = if sorted.first() != sorted.last() {
        Some(Warning::RankDisagreement {
            counts: counts.clone(),
        })
    } else {
        None
    };
    Ok(RankEstimate {
        rank,
        counts,
        warning,
    })
}

/// Options shared by the algebraic and ALS solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Rank to fit; detected from the data when absent.
    pub rank: Option<usize>,
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    /// ALS stopping threshold on the relative cost change.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Refine the intermediate overdetermined decompositions with ALS.
    pub refine: bool,
    /// Treat the input as exact: a null space without a clear singular-value
    /// gap is reported as a rank mismatch instead of being forced.
    pub strict: bool,
    /// Build the full detection matrix instead of its Gram form.
    pub explicit_gamma: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rank: None,
            rank_tol: 1e-8,
            rel_tol: 1e-7,
            max_iter: 1000,
            seed: 0,
            refine: false,
            strict: true,
            explicit_gamma: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(DcCpdError::InvalidInput(
                "max_iter must be at least 1".into(),
            ));
        }
        for (name, v) in [("rank_tol", self.rank_tol), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(DcCpdError::InvalidInput(format!(
                    "{name} must lie in (0,1)"
                )));
            }
        }
        if self.rank == Some(0) {
            return Err(DcCpdError::InvalidInput("rank must be positive".into()));
        }
        Ok(())
    }

    /// Settings for noisy data: forced null-space dimensions.
    pub fn noisy() -> Self {
        Self {
            strict: false,
            ..Self::default()
        }
    }
}

/// Zero solution with the shape of a problem.
pub fn zero_solution<T: Real>(p: &DcCpdProblem<T>, r: usize) -> DcCpdSolution<T> {
    let mm = p.dataset_count();
    DcCpdSolution {
        a: p.dims_n
            .iter()
            .map(|&n| ComplexMatrix::from_element(n, r, czero::<T>()))
            .collect(),
        c: vec![ComplexMatrix::zeros(p.t, r); mm * mm],
    }
}
