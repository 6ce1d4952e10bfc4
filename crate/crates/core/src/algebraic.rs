//! Algebraic solver: coupled rank-1 detection reduces the grid to small
//! overdetermined decompositions solved by GEVD, from which the loading
//! matrices are recovered.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{DcCpdError, Result, Warning};
use crate::linalg::{
    best_rank1_with_ratio, dominant_eigvec, gevd_cpd, lstsq, normalize_columns, nullspace,
    CpdFactors,
};
use crate::model::{
    cost_eta, detect_rank, reduce_third_mode, symmetrize, DcCpdProblem, DcCpdSolution,
    SolverOptions,
};
use crate::random::rng_from_seed;
use crate::scalar::{cabs, conj_mat, fro, lit, phase_of, to_f64, ComplexMatrix, Real};
use crate::tensor::{khatri_rao, matricize, tensorize, ComplexTensor3, Mode};

/// Minimum ratio between the smallest non-null and the largest null
/// singular value (in the scale of the detection matrix Γ) accepted on the
/// strict path.
pub const STRICT_GAP: f64 = 1e2;

/// Largest admissible `λ₂/λ₁` of the recovery matrices on the strict path.
pub const MAX_EIG_RATIO: f64 = 0.1;

/// `ψ(x1, x2)` with entries `x1[i,p]·x2[j,q] − x1[j,p]·x2[i,q]`, flattened
/// row-major over `(i, j, p, q)`.
pub fn coupled_rank1_map<T: Real>(
    x1: &ComplexMatrix<T>,
    x2: &ComplexMatrix<T>,
) -> Result<Vec<Complex<T>>> {
    let n = x1.nrows();
    if x2.nrows() != n {
        return Err(DcCpdError::Dimension(format!(
            "coupled_rank1_map row counts differ: {} vs {}",
            n,
            x2.nrows()
        )));
    }
    let (pp, qq) = (x1.ncols(), x2.ncols());
    let mut out = Vec::with_capacity(n * n * pp * qq);
    for i in 0..n {
        for j in 0..n {
            for p in 0..pp {
                for q in 0..qq {
                    out.push(x1[(i, p)] * x2[(j, q)] - x1[(j, p)] * x2[(i, q)]);
                }
            }
        }
    }
    Ok(out)
}

fn check_pair<T: Real>(t_mg: &ComplexTensor3<T>, t_mh: &ComplexTensor3<T>) -> Result<()> {
    if t_mg.dims().0 != t_mh.dims().0 {
        return Err(DcCpdError::Dimension(format!(
            "detection tensors differ in first dimension: {:?} vs {:?}",
            t_mg.dims(),
            t_mh.dims()
        )));
    }
    Ok(())
}

/// Detection matrix with column `s·K₂ + u` equal to
/// `ψ(slice s of t_mg, slice u of t_mh)`.
pub fn build_gamma<T: Real>(
    t_mg: &ComplexTensor3<T>,
    t_mh: &ComplexTensor3<T>,
) -> Result<ComplexMatrix<T>> {
    check_pair(t_mg, t_mh)?;
    let xs = t_mg.frontal_slices();
    let ys = t_mh.frontal_slices();
    let (n, ng, _) = t_mg.dims();
    let nh = t_mh.dims().1;
    let rows = n * n * ng * nh;
    let mut gamma = ComplexMatrix::zeros(rows, xs.len() * ys.len());
    for (s, x) in xs.iter().enumerate() {
        for (u, y) in ys.iter().enumerate() {
            let col = coupled_rank1_map(x, y)?;
            gamma.column_mut(s * ys.len() + u).copy_from_slice(&col);
        }
    }
    Ok(gamma)
}

/// `Z[s, s'] = ⟨X_s, X_s'⟩` and `Y[(s, s'), (i, j)] = (conj(X_s) X_s'ᵀ)[i, j]`
/// for the frontal slices `X_s` of `t`; `transpose_inner` swaps `(i, j)`.
fn gram_parts<T: Real>(
    t: &ComplexTensor3<T>,
    transpose_inner: bool,
) -> (ComplexMatrix<T>, ComplexMatrix<T>) {
    let slices = t.frontal_slices();
    let k = slices.len();
    let n = t.dims().0;
    let t3 = matricize(t, Mode::Three);
    let z = t3.adjoint() * &t3;
    let conj: Vec<ComplexMatrix<T>> = slices.iter().map(conj_mat).collect();
    let trans: Vec<ComplexMatrix<T>> = slices.iter().map(|s| s.transpose()).collect();
    let mut y = ComplexMatrix::zeros(k * k, n * n);
    for s in 0..k {
        for s2 in 0..k {
            let g = &conj[s] * &trans[s2];
            let row = s * k + s2;
            for i in 0..n {
                for j in 0..n {
                    let v = if transpose_inner {
                        g[(j, i)]
                    } else {
                        g[(i, j)]
                    };
                    y[(row, i * n + j)] = v;
                }
            }
        }
    }
    (z, y)
}

/// Gram matrix `Γᴴ Γ` of the detection matrix, assembled from slice inner
/// products without forming `Γ`:
/// `Ω[(s,u),(s',u')] = 2·Z_g[s,s']·Z_h[u,u'] − 2·Σ_ij G_g[s,s'][i,j]·G_h[u,u'][j,i]`.
pub fn build_omega<T: Real>(
    t_mg: &ComplexTensor3<T>,
    t_mh: &ComplexTensor3<T>,
) -> Result<ComplexMatrix<T>> {
    check_pair(t_mg, t_mh)?;
    let (zg, yg) = gram_parts(t_mg, false);
    let (zh, yh) = gram_parts(t_mh, true);
    let cross = &yg * yh.transpose();
    let kg = zg.nrows();
    let kh = zh.nrows();
    let two = Complex::new(lit::<T>(2.0), T::zero());
    let mut omega = ComplexMatrix::zeros(kg * kh, kg * kh);
    for s in 0..kg {
        for u in 0..kh {
            for s2 in 0..kg {
                for u2 in 0..kh {
                    omega[(s * kh + u, s2 * kh + u2)] =
                        two * (zg[(s, s2)] * zh[(u, u2)] - cross[(s * kg + s2, u * kh + u2)]);
                }
            }
        }
    }
    Ok(omega)
}

/// Output of the detection stage for one triple `(m, g, h)`.
#[derive(Debug, Clone)]
pub struct CoupledDetectionResult<T: Real> {
    pub triple: (usize, usize, usize),
    /// Gram form of the detection matrix, present unless the explicit
    /// matrix was requested.
    pub omega: Option<ComplexMatrix<T>>,
    pub gamma: Option<ComplexMatrix<T>>,
    /// Null-space basis reshaped to `R × R × R`.
    pub w_tensor: ComplexTensor3<T>,
    /// Smallest non-null over largest null singular value, in the scale of Γ.
    pub sigma_gap: f64,
    /// Largest null singular value of Γ relative to `‖T^(m,g)‖‖T^(m,h)‖`.
    pub null_level: f64,
    /// Singular values of Γ, descending.
    pub singular_values: Vec<f64>,
}

/// Null space of the detection matrix for `(m, g, h)` as a third-order
/// tensor admitting the CPD `[[B^(m,g), B^(m,h), F^(m,g,h)]]`.
pub fn detect_to_w<T: Real>(
    p: &DcCpdProblem<T>,
    r: usize,
    m: usize,
    g: usize,
    h: usize,
    opts: &SolverOptions,
) -> Result<CoupledDetectionResult<T>> {
    let mm = p.dataset_count();
    if m >= mm || g >= h || h >= mm {
        return Err(DcCpdError::InvalidInput(format!(
            "invalid triple ({m},{g},{h}) for {mm} datasets"
        )));
    }
    if p.third_dim() != r {
        return Err(DcCpdError::Dimension(format!(
            "detection expects third dimension {r}, got {}",
            p.third_dim()
        )));
    }
    let t_mg = p.tensor(m, g);
    let t_mh = p.tensor(m, h);
    let (gamma, omega, basis_src) = if opts.explicit_gamma {
        let gm = build_gamma(t_mg, t_mh)?;
        (Some(gm.clone()), None, gm)
    } else {
        let om = build_omega(t_mg, t_mh)?;
        (None, Some(om.clone()), om)
    };
    let ns = nullspace(&basis_src, Some(r), lit(0.5))?;
    // singular values in the scale of Γ
    let sv: Vec<f64> = ns
        .singular_values
        .iter()
        .map(|&s| {
            let s = to_f64(s).max(0.0);
            if opts.explicit_gamma {
                s
            } else {
                s.sqrt()
            }
        })
        .collect();
    let cut = sv.len() - r;
    let scale = to_f64(t_mg.norm() * t_mh.norm());
    let null_max = if r > 0 { sv[cut] } else { 0.0 };
    let null_level = if scale > 0.0 { null_max / scale } else { 0.0 };
    // the SVD deflates tiny values to exact zeros; floor both sides so that
    // an all-zero neighbourhood reads as no gap
    let floor = sv.first().copied().unwrap_or(0.0) * f64::EPSILON;
    let sigma_gap = if cut > 0 && floor > 0.0 {
        sv[cut - 1].max(floor) / null_max.max(floor)
    } else {
        f64::INFINITY
    };
    if opts.strict && (sigma_gap < STRICT_GAP || null_level > opts.rank_tol.sqrt()) {
        return Err(DcCpdError::RankMismatch {
            expected: r,
            context: format!(
                "triple ({m},{g},{h}): gap {sigma_gap:.3e}, null level {null_level:.3e}"
            ),
            singular_values: sv,
        });
    }
    let w_tensor = tensorize(&ns.basis, (r, r, r))?;
    Ok(CoupledDetectionResult {
        triple: (m, g, h),
        omega,
        gamma,
        w_tensor,
        sigma_gap,
        null_level,
        singular_values: sv,
    })
}

/// All triples `(m, g, h)` with `g < h`, in lexicographic order.
pub fn all_triples(mm: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for m in 0..mm {
        for g in 0..mm {
            for h in (g + 1)..mm {
                out.push((m, g, h));
            }
        }
    }
    out
}

/// Detection for every triple, evaluated in parallel.
pub fn detect_all<T: Real>(
    p: &DcCpdProblem<T>,
    r: usize,
    opts: &SolverOptions,
) -> Result<BTreeMap<(usize, usize, usize), CoupledDetectionResult<T>>> {
    let triples = all_triples(p.dataset_count());
    let results: Vec<Result<CoupledDetectionResult<T>>> = triples
        .par_iter()
        .map(|&(m, g, h)| detect_to_w(p, r, m, g, h, opts))
        .collect();
    let mut out = BTreeMap::new();
    for res in results {
        let d = res.map_err(|e| e.in_stage("coupled detection"))?;
        out.insert(d.triple, d);
    }
    Ok(out)
}

/// Bases `B^(m,n)` recovered from the detection stage, row-major over
/// `(m, n)`, together with diagnostics of the rank-1 extraction.
#[derive(Debug, Clone)]
pub struct CoupledBases<T: Real> {
    pub b: Vec<ComplexMatrix<T>>,
    pub m: usize,
    /// Largest `σ₂/σ₁` seen when extracting propagated columns.
    pub worst_rank1_ratio: f64,
}

impl<T: Real> CoupledBases<T> {
    pub fn get(&self, m: usize, n: usize) -> &ComplexMatrix<T> {
        &self.b[m * self.m + n]
    }
}

fn smallest_partner(m: usize) -> usize {
    if m == 0 {
        1
    } else {
        0
    }
}

/// Solves the overdetermined decompositions of the W tensors for every `m`:
/// one GEVD per `m` yields `B^(m,g₀)`, the remaining `B^(m,n)` follow from
/// rank-1 extraction, so all `B^(m,·)` share one column order.
pub fn solve_coupled_overdet<T: Real, R: Rng + ?Sized>(
    ws: &BTreeMap<(usize, usize, usize), CoupledDetectionResult<T>>,
    mm: usize,
    r: usize,
    refine_sweeps: usize,
    rng: &mut R,
) -> Result<CoupledBases<T>> {
    if mm < 2 {
        return Err(DcCpdError::InvalidInput(
            "coupled detection needs M >= 2".into(),
        ));
    }
    let mut b = vec![ComplexMatrix::zeros(r, r); mm * mm];
    let mut worst = 0.0f64;
    for m in 0..mm {
        let g0 = smallest_partner(m);
        let n0 = (0..mm).find(|&n| n != g0).expect("M >= 2");
        let key = (m, g0.min(n0), g0.max(n0));
        let w = ws
            .get(&key)
            .ok_or_else(|| DcCpdError::InvalidInput(format!("missing detection result {key:?}")))?;
        let f =
            gevd_cpd(&w.w_tensor, r, rng).map_err(|e| e.in_stage(&format!("triple {key:?}")))?;
        let (bg0, bn0) = if g0 < n0 { (f.a, f.b) } else { (f.b, f.a) };
        b[m * mm + g0] = bg0.clone();
        b[m * mm + n0] = bn0;
        for n in 0..mm {
            if n == g0 || n == n0 {
                continue;
            }
            let key = (m, g0.min(n), g0.max(n));
            let w = ws.get(&key).ok_or_else(|| {
                DcCpdError::InvalidInput(format!("missing detection result {key:?}"))
            })?;
            let unfold = if g0 < n {
                matricize(&w.w_tensor, Mode::One)
            } else {
                matricize(&w.w_tensor, Mode::Two)
            };
            // unfold = (B^(m,n) ⊙ F) · B^(m,g0)ᵀ
            let q = lstsq(&bg0, &unfold.transpose())
                .map_err(|e| e.in_stage(&format!("propagation {key:?}")))?
                .transpose();
            let mut bn = ComplexMatrix::zeros(r, r);
            for col in 0..r {
                let mat = ComplexMatrix::from_fn(r, r, |j, k| q[(j * r + k, col)]);
                let (u, _, _, ratio) = best_rank1_with_ratio(&mat)
                    .map_err(|e| e.in_stage(&format!("propagation {key:?}")))?;
                worst = worst.max(to_f64(ratio));
                bn.set_column(col, &u);
            }
            b[m * mm + n] = bn;
        }
        if refine_sweeps > 0 {
            refine_bases(ws, m, mm, r, &mut b, refine_sweeps)?;
        }
    }
    Ok(CoupledBases {
        b,
        m: mm,
        worst_rank1_ratio: worst,
    })
}

/// Alternating least squares over the coupled W decompositions of one `m`,
/// with the `B^(m,l)` shared across triples.
fn refine_bases<T: Real>(
    ws: &BTreeMap<(usize, usize, usize), CoupledDetectionResult<T>>,
    m: usize,
    mm: usize,
    r: usize,
    b: &mut [ComplexMatrix<T>],
    sweeps: usize,
) -> Result<()> {
    let triples: Vec<(usize, usize)> = (0..mm)
        .flat_map(|g| ((g + 1)..mm).map(move |h| (g, h)))
        .collect();
    let mut f: Vec<ComplexMatrix<T>> = vec![ComplexMatrix::zeros(r, r); triples.len()];
    let update_f = |b: &[ComplexMatrix<T>], f: &mut [ComplexMatrix<T>]| -> Result<()> {
        for (idx, &(g, h)) in triples.iter().enumerate() {
            let w = &ws[&(m, g, h)].w_tensor;
            let kr = khatri_rao(&b[m * mm + g], &b[m * mm + h])?;
            f[idx] = lstsq(&kr, &matricize(w, Mode::Three))?.transpose();
        }
        Ok(())
    };
    update_f(b, &mut f)?;
    for _ in 0..sweeps {
        for l in 0..mm {
            let mut coef_blocks = Vec::new();
            let mut data_blocks = Vec::new();
            for (idx, &(g, h)) in triples.iter().enumerate() {
                let w = &ws[&(m, g, h)].w_tensor;
                if g == l {
                    coef_blocks.push(khatri_rao(&b[m * mm + h], &f[idx])?);
                    data_blocks.push(matricize(w, Mode::One));
                } else if h == l {
                    coef_blocks.push(khatri_rao(&b[m * mm + g], &f[idx])?);
                    data_blocks.push(matricize(w, Mode::Two));
                }
            }
            let coef = vstack(&coef_blocks);
            let data = vstack(&data_blocks);
            let mut bl = lstsq(&coef, &data)?.transpose();
            normalize_columns(&mut bl);
            b[m * mm + l] = bl;
        }
        update_f(b, &mut f)?;
    }
    Ok(())
}

pub(crate) fn vstack<T: Real>(blocks: &[ComplexMatrix<T>]) -> ComplexMatrix<T> {
    let cols = blocks.first().map(|x| x.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|x| x.nrows()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut at = 0;
    for blk in blocks {
        out.rows_mut(at, blk.nrows()).copy_from(blk);
        at += blk.nrows();
    }
    out
}

/// Loading matrices from the coupled bases.
///
/// For each `(m, n)` the columns of `T₃^(m,n)·B^(m,n)` unfold into rank-1
/// blocks `∝ a_r^(m) a_r^(n)ᴴ`. Column orders of different `m` are matched
/// against `m = 0`, block scales and phases are fixed by convention, and
/// the stacked `a_r` is the dominant eigenvector of the assembled Hermitian
/// block matrix. The third factors are fitted by least squares on `p`.
pub fn recover_a<T: Real>(
    p: &DcCpdProblem<T>,
    bases: &CoupledBases<T>,
    strict: bool,
) -> Result<DcCpdSolution<T>> {
    let mm = p.dataset_count();
    let r = bases.get(0, 0).ncols();
    let dims = p.dims_n();
    // blocks[m][n][col] = unvec of column col of T3^(m,n) B^(m,n)
    let mut blocks: Vec<Vec<Vec<ComplexMatrix<T>>>> = Vec::with_capacity(mm);
    for m in 0..mm {
        let mut row = Vec::with_capacity(mm);
        for n in 0..mm {
            let k = matricize(p.tensor(m, n), Mode::Three) * bases.get(m, n);
            let cols = (0..r)
                .map(|c| ComplexMatrix::from_fn(dims[m], dims[n], |i, j| k[(i * dims[n] + j, c)]))
                .collect();
            row.push(cols);
        }
        blocks.push(row);
    }

    let mut perms: Vec<Vec<usize>> = vec![(0..r).collect()];
    for m in 1..mm {
        let mut scores = Vec::with_capacity(r * r);
        for rm in 0..r {
            for r0 in 0..r {
                let x = &blocks[m][0][rm];
                let y = blocks[0][m][r0].adjoint();
                let denom = fro(x) * fro(&y);
                let s = if denom > T::zero() {
                    to_f64(cabs(x.dotc(&y)) / denom)
                } else {
                    0.0
                };
                scores.push((s, r0, rm));
            }
        }
        perms.push(greedy_match(scores, r));
    }

    let total: usize = dims.iter().sum();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let mut a: Vec<ComplexMatrix<T>> = dims.iter().map(|&n| ComplexMatrix::zeros(n, r)).collect();
    for r0 in 0..r {
        let pick = |m: usize, n: usize| -> ComplexMatrix<T> { blocks[m][n][perms[m][r0]].clone() };
        let mut diag_vecs = Vec::with_capacity(mm);
        for m in 0..mm {
            let d = unit_block(pick(m, m))?;
            let tr = d.trace();
            let d = &d * phase_of(tr).conj();
            let herm = (&d + d.adjoint()) * Complex::new(lit::<T>(0.5), T::zero());
            diag_vecs.push(dominant_eigvec(&herm)?.vector);
        }
        let mut big = ComplexMatrix::zeros(total, total);
        for m in 0..mm {
            for n in 0..mm {
                let blk = unit_block(pick(m, n))?;
                let c = (diag_vecs[m].adjoint() * &blk * &diag_vecs[n])[(0, 0)];
                let blk = &blk * phase_of(c).conj();
                big.view_mut((offsets[m], offsets[n]), (dims[m], dims[n]))
                    .copy_from(&blk);
            }
        }
        let herm = (&big + big.adjoint()) * Complex::new(lit::<T>(0.5), T::zero());
        let eig = dominant_eigvec(&herm)?;
        if strict && eig.lambda > T::zero() && eig.lambda2 / eig.lambda > lit(MAX_EIG_RATIO) {
            return Err(DcCpdError::Consistency(format!(
                "recovery matrix of column {r0} is not rank-1: λ₂/λ₁ = {:.3e}",
                to_f64(eig.lambda2 / eig.lambda)
            )));
        }
        for m in 0..mm {
            let seg = eig.vector.rows(offsets[m], dims[m]);
            a[m].set_column(r0, &seg);
        }
    }
    for x in &mut a {
        normalize_columns(x);
    }
    fit_c(p, a)
}

fn unit_block<T: Real>(b: ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let nrm = fro(&b);
    if nrm == T::zero() || !nrm.is_finite() {
        return Err(DcCpdError::Consistency("vanishing recovery block".into()));
    }
    Ok(b / Complex::new(nrm, T::zero()))
}

/// Greedy assignment on `(score, reference column, candidate column)`
/// triples: highest score first, ties by reference then candidate index.
/// Returns `perm[reference] = candidate`.
pub fn greedy_match(mut scores: Vec<(f64, usize, usize)>, r: usize) -> Vec<usize> {
    scores.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let mut perm = vec![usize::MAX; r];
    let mut used = vec![false; r];
    for (_, r0, rm) in scores {
        if perm[r0] == usize::MAX && !used[rm] {
            perm[r0] = rm;
            used[rm] = true;
        }
    }
    perm
}

/// Least-squares third factors for given loading matrices.
pub fn fit_c<T: Real>(p: &DcCpdProblem<T>, a: Vec<ComplexMatrix<T>>) -> Result<DcCpdSolution<T>> {
    let mm = p.dataset_count();
    let mut c = Vec::with_capacity(mm * mm);
    for m in 0..mm {
        for n in 0..mm {
            let kr = khatri_rao(&a[m], &conj_mat(&a[n]))?;
            let ct = lstsq(&kr, &matricize(p.tensor(m, n), Mode::Three))
                .map_err(|e| e.in_stage(&format!("third factor ({m},{n})")))?;
            c.push(ct.transpose());
        }
    }
    let mut sol = DcCpdSolution::new(a, c)?;
    if p.is_symmetric() {
        sol.project_diagonal_real();
    }
    Ok(sol)
}

/// Direct solution when every `A^(m)` has full column rank: GEVD of
/// `T^(0,1)` gives `A^(0)`, and each `A^(n)` follows from rank-1
/// approximations of the columns of `T₁^(0,n)·(A^(0)ᵀ)†`.
pub fn solve_overdetermined<T: Real, R: Rng + ?Sized>(
    p: &DcCpdProblem<T>,
    r: usize,
    rng: &mut R,
) -> Result<Vec<ComplexMatrix<T>>> {
    let mm = p.dataset_count();
    let dims = p.dims_n();
    let tdim = p.third_dim();
    if mm == 1 {
        let f = gevd_cpd(p.tensor(0, 0), r, rng)?;
        return Ok(vec![f.a]);
    }
    let CpdFactors { a: a0, .. } = gevd_cpd(p.tensor(0, 1), r, rng)?;
    let mut a = vec![a0.clone()];
    for n in 1..mm {
        let t1 = matricize(p.tensor(0, n), Mode::One);
        // t1 = (conj A^(n) ⊙ C^(0,n)) · A^(0)ᵀ
        let kt = lstsq(&a0, &t1.transpose())?;
        let mut an = ComplexMatrix::zeros(dims[n], r);
        for col in 0..r {
            let mat = ComplexMatrix::from_fn(dims[n], tdim, |j, k| kt[(col, j * tdim + k)]);
            let (u, _, _, _) = best_rank1_with_ratio(&mat)?;
            an.set_column(col, &u.map(|z| z.conj()));
        }
        a.push(an);
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgebraicPath {
    Overdetermined,
    Detection,
}

#[derive(Debug, Clone)]
pub struct TripleDiagnostics {
    pub triple: (usize, usize, usize),
    pub sigma_gap: f64,
    pub null_level: f64,
}

#[derive(Debug, Clone)]
pub struct AlgebraicReport {
    pub rank: usize,
    pub path: AlgebraicPath,
    pub symmetrized: bool,
    pub triples: Vec<TripleDiagnostics>,
    pub worst_rank1_ratio: f64,
    /// `η / Σ‖T‖²` on the input grid.
    pub relative_cost: f64,
    pub warnings: Vec<Warning>,
}

/// Full algebraic pipeline: symmetrize when needed, fix the rank, compress
/// the third mode, solve by the direct or the detection path and fit the
/// third factors on the input grid.
pub fn solve_algebraic<T: Real>(
    p: &DcCpdProblem<T>,
    opts: &SolverOptions,
) -> Result<(DcCpdSolution<T>, AlgebraicReport)> {
    opts.validate()?;
    let mut warnings = Vec::new();
    let symmetrized = !p.is_symmetric();
    let sym = if symmetrized {
        symmetrize(p)?
    } else {
        p.clone()
    };
    let r = match opts.rank {
        Some(r) => r,
        None => {
            let est = detect_rank(&sym, lit(opts.rank_tol))?;
            if let Some(w) = est.warning {
                warnings.push(w);
            }
            est.rank
        }
    };
    if r == 0 {
        return Err(DcCpdError::Degenerate("detected rank is zero".into()));
    }
    if r > sym.third_dim() {
        return Err(DcCpdError::Dimension(format!(
            "rank {r} exceeds third dimension {}",
            sym.third_dim()
        )));
    }
    let (red, _) = reduce_third_mode(&sym, r).map_err(|e| e.in_stage("third-mode reduction"))?;
    let mut rng = rng_from_seed(opts.seed);
    let min_n = *p.dims_n().iter().min().expect("nonempty");

    let mut path = AlgebraicPath::Detection;
    let mut triples = Vec::new();
    let mut worst_rank1_ratio = 0.0;
    let mut a = None;
    if r <= min_n {
        if let Ok(x) = solve_overdetermined(&red, r, &mut rng) {
            path = AlgebraicPath::Overdetermined;
            a = Some(x);
        }
    }
    let a = match a {
        Some(a) => a,
        None => {
            if p.dataset_count() < 2 {
                return Err(DcCpdError::InvalidInput(
                    "rank exceeds sensor count and a single dataset admits no coupled detection"
                        .into(),
                ));
            }
            let ws = detect_all(&red, r, opts)?;
            triples = ws
                .values()
                .map(|w| TripleDiagnostics {
                    triple: w.triple,
                    sigma_gap: w.sigma_gap,
                    null_level: w.null_level,
                })
                .collect();
            let sweeps = if opts.refine {
                opts.max_iter.min(50)
            } else {
                0
            };
            let bases = solve_coupled_overdet(&ws, p.dataset_count(), r, sweeps, &mut rng)?;
            worst_rank1_ratio = bases.worst_rank1_ratio;
            recover_a(&red, &bases, opts.strict)
                .map_err(|e| e.in_stage("loading recovery"))?
                .a
        }
    };
    let mut sol = fit_c(p, a)?;
    sol.normalize();
    if p.is_symmetric() {
        sol.project_diagonal_real();
    }
    let energy = p.total_energy();
    let eta = cost_eta(p, &sol)?;
    let relative_cost = if energy > T::zero() {
        to_f64(eta / energy)
    } else {
        0.0
    };
    Ok((
        sol,
        AlgebraicReport {
            rank: r,
            path,
            symmetrized,
            triples,
            worst_rank1_ratio,
            relative_cost,
            warnings,
        },
    ))
}
