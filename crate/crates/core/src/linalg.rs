//! Dense complex factorizations with explicit rank and tolerance contracts.

use faer::c64;
use nalgebra::linalg::Schur;
use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;

use crate::error::{DcCpdError, Result, Warning};
use crate::random::random_unit_vector;
use crate::scalar::{
    abs2, cabs, cone, czero, fabs, fro, lit, phase_of, to_f64, tol, ComplexMatrix, ComplexVector,
    Real,
};
use crate::tensor::{khatri_rao, matricize, ComplexTensor3, Mode};

const SVD_MAX_ITER: usize = 200_000;

/// Thin SVD with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd<T: Real> {
    /// Left singular vectors as columns (`rows × k`).
    pub u: ComplexMatrix<T>,
    pub s: Vec<T>,
    /// Right singular vectors as columns (`cols × k`).
    pub v: ComplexMatrix<T>,
}

pub fn svd<T: Real>(m: &ComplexMatrix<T>) -> Result<Svd<T>> {
    ensure_finite(m)?;
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Svd {
            u: ComplexMatrix::zeros(r, 0),
            s: vec![],
            v: ComplexMatrix::zeros(c, 0),
        });
    }
    let fm = faer::Mat::<c64>::from_fn(r, c, |i, j| {
        let z = m[(i, j)];
        c64::new(to_f64(z.re), to_f64(z.im))
    });
    let dec = fm
        .thin_svd()
        .map_err(|e| DcCpdError::Internal(format!("SVD did not converge: {e:?}")))?;
    let k = r.min(c);
    let sv: Vec<f64> = (0..k).map(|i| dec.S()[i].re).collect();
    let order = descending_order(&sv);
    let back = |z: c64| Complex::new(lit::<T>(z.re), lit::<T>(z.im));
    let (fu, fv) = (dec.U(), dec.V());
    Ok(Svd {
        u: ComplexMatrix::from_fn(r, k, |i, j| back(fu[(i, order[j])])),
        s: order.iter().map(|&i| lit::<T>(sv[i])).collect(),
        v: ComplexMatrix::from_fn(c, k, |i, j| back(fv[(i, order[j])])),
    })
}

fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Singular values only, sorted in descending order.
pub fn singular_values<T: Real>(m: &ComplexMatrix<T>) -> Result<Vec<T>> {
    ensure_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(vec![]);
    }
    let fm = faer::Mat::<c64>::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        c64::new(to_f64(z.re), to_f64(z.im))
    });
    let mut s = fm
        .singular_values()
        .map_err(|e| DcCpdError::Internal(format!("SVD did not converge: {e:?}")))?;
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(s.into_iter().map(lit::<T>).collect())
}

/// Right singular vectors of a real matrix, ordered by descending singular
/// value (`cols × min(rows, cols)`).
pub fn real_right_singular<T: Real>(m: &nalgebra::DMatrix<T>) -> Result<nalgebra::DMatrix<T>> {
    let (r, c) = m.shape();
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| to_f64(m[(i, j)]));
    let dec = fm
        .thin_svd()
        .map_err(|e| DcCpdError::Internal(format!("SVD did not converge: {e:?}")))?;
    let k = r.min(c);
    let sv: Vec<f64> = (0..k).map(|i| dec.S()[i]).collect();
    let order = descending_order(&sv);
    let fv = dec.V();
    Ok(nalgebra::DMatrix::from_fn(c, k, |i, j| {
        lit::<T>(fv[(i, order[j])])
    }))
}

/// Right singular vectors of `m` forming a full basis of the column space
/// of `mᴴ` plus its complement, with `cols` singular values (zeros padded).
fn full_right_svd<T: Real>(m: &ComplexMatrix<T>) -> Result<(Vec<T>, ComplexMatrix<T>)> {
    let (r, c) = m.shape();
    if r >= c {
        let d = svd(m)?;
        return Ok((d.s, d.v));
    }
    // pad with zero rows so the thin SVD returns all c right vectors
    let mut padded = ComplexMatrix::zeros(c, c);
    padded.rows_mut(0, r).copy_from(m);
    let d = svd(&padded)?;
    Ok((d.s, d.v))
}

pub fn ensure_finite<T: Real>(m: &ComplexMatrix<T>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(DcCpdError::InvalidInput(
            "matrix contains non-finite entries".into(),
        ))
    }
}

#[derive(Debug, Clone)]
pub struct NullspaceBasis<T: Real> {
    /// Orthonormal basis vectors stacked as columns.
    pub basis: ComplexMatrix<T>,
    /// Bound on `‖M v‖ / ‖M‖` for every returned vector.
    pub tolerance_used: T,
    /// All singular values of the source matrix, descending, padded with
    /// zeros up to its column count.
    pub singular_values: Vec<T>,
    /// Ratio between the smallest retained non-null singular value and the
    /// largest null one; `None` when one side of the cut is empty.
    pub gap: Option<T>,
    pub warning: Option<Warning>,
}

impl<T: Real> NullspaceBasis<T> {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn vector(&self, i: usize) -> ComplexVector<T> {
        self.basis.column(i).into_owned()
    }
}

/// Null space via right singular vectors.
///
/// With `expected_dim` the `expected_dim` smallest right singular vectors are
/// returned regardless of threshold. Otherwise every vector with
/// `σ ≤ rel_tol · σ_max` is returned and an ambiguous-rank warning is
/// attached when the singular values around the cut differ by less than 10×.
pub fn nullspace<T: Real>(
    m: &ComplexMatrix<T>,
    expected_dim: Option<usize>,
    rel_tol: T,
) -> Result<NullspaceBasis<T>> {
    if !(rel_tol > T::zero() && rel_tol < T::one()) {
        return Err(DcCpdError::InvalidInput("rel_tol must lie in (0,1)".into()));
    }
    let cols = m.ncols();
    if let Some(d) = expected_dim {
        if d > cols {
            return Err(DcCpdError::Dimension(format!(
                "expected null dimension {d} exceeds column count {cols}"
            )));
        }
    }
    let (s, v) = full_right_svd(m)?;
    let smax = s.first().copied().unwrap_or_else(T::zero);
    let (dim, forced) = match expected_dim {
        Some(d) => (d, true),
        None => (s.iter().filter(|&&x| x <= rel_tol * smax).count(), false),
    };
    let cut = cols - dim;
    let gap = if dim > 0 && cut > 0 {
        let hi = s[cut - 1];
        let lo = s[cut];
        Some(if lo > T::zero() {
            hi / lo
        } else {
            T::max_value().unwrap_or(hi)
        })
    } else {
        None
    };
    let warning = match (forced, gap) {
        (false, Some(g)) if g < lit(10.0) => Some(Warning::AmbiguousRank {
            dim,
            gap_ratio: to_f64(g),
        }),
        _ => None,
    };
    let tolerance_used = if forced {
        if dim == 0 || smax == T::zero() {
            T::zero()
        } else {
            s[cut] / smax
        }
    } else {
        rel_tol
    };
    let basis = v.columns(cut, dim).into_owned();
    Ok(NullspaceBasis {
        basis,
        tolerance_used,
        singular_values: s,
        gap,
        warning,
    })
}

/// Index of the first entry whose modulus exceeds `1e-8 · max |v_k|`.
fn first_significant<T: Real>(v: &[Complex<T>]) -> Option<usize> {
    let vmax = v.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)));
    if vmax == T::zero() {
        return None;
    }
    let thr = vmax * lit(1e-8);
    v.iter().position(|z| cabs(*z) > thr)
}

/// Unit-modulus factor `p` such that `p · v` has its first significant
/// entry real and nonnegative.
pub fn phase_fix<T: Real>(v: &[Complex<T>]) -> Complex<T> {
    match first_significant(v) {
        Some(i) => phase_of(v[i]).conj(),
        None => cone::<T>(),
    }
}

/// Closest rank-1 approximation `u σ vᴴ`.
pub fn best_rank1<T: Real>(
    m: &ComplexMatrix<T>,
) -> Result<(ComplexVector<T>, ComplexVector<T>, T)> {
    let (u, v, s, _) = best_rank1_with_ratio(m)?;
    Ok((u, v, s))
}

/// As [`best_rank1`], also returning `σ₂/σ₁`.
pub fn best_rank1_with_ratio<T: Real>(
    m: &ComplexMatrix<T>,
) -> Result<(ComplexVector<T>, ComplexVector<T>, T, T)> {
    if m.iter().all(|z| z.is_zero()) {
        return Err(DcCpdError::Degenerate(
            "best rank-1 of a zero matrix".into(),
        ));
    }
    let d = svd(m)?;
    let mut u = d.u.column(0).into_owned();
    let mut v = d.v.column(0).into_owned();
    let p = phase_fix(u.as_slice());
    u *= p;
    v *= p;
    let ratio = if d.s.len() > 1 {
        d.s[1] / d.s[0]
    } else {
        T::zero()
    };
    Ok((u, v, d.s[0], ratio))
}

#[derive(Debug, Clone)]
pub struct DominantEig<T: Real> {
    pub vector: ComplexVector<T>,
    pub lambda: T,
    /// Second largest eigenvalue (zero for 1×1 input).
    pub lambda2: T,
    pub warning: Option<Warning>,
}

/// Hermitian eigendecomposition with eigenvalues in descending order.
pub fn hermitian_eig<T: Real>(h: &ComplexMatrix<T>) -> Result<(Vec<T>, ComplexMatrix<T>)> {
    check_hermitian(h, tol(1e-10))?;
    let sym = (h + h.adjoint()) * Complex::new(lit::<T>(0.5), T::zero());
    let n = sym.nrows();
    let fm = faer::Mat::<c64>::from_fn(n, n, |i, j| {
        let z = sym[(i, j)];
        c64::new(to_f64(z.re), to_f64(z.im))
    });
    let dec = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| DcCpdError::Internal(format!("eigendecomposition did not converge: {e:?}")))?;
    let ev: Vec<f64> = (0..n).map(|i| dec.S()[i].re).collect();
    let order = descending_order(&ev);
    let fu = dec.U();
    let vals = order.iter().map(|&i| lit::<T>(ev[i])).collect();
    let vecs = ComplexMatrix::from_fn(n, n, |r, c| {
        let z = fu[(r, order[c])];
        Complex::new(lit::<T>(z.re), lit::<T>(z.im))
    });
    Ok((vals, vecs))
}

fn check_hermitian<T: Real>(h: &ComplexMatrix<T>, rel: T) -> Result<()> {
    if !h.is_square() {
        return Err(DcCpdError::Contract(
            "Hermitian input must be square".into(),
        ));
    }
    ensure_finite(h)?;
    let dev = fro(&(h - h.adjoint()));
    let scale = fro(h);
    if dev > rel * scale {
        return Err(DcCpdError::Contract(format!(
            "matrix is not Hermitian: relative deviation {:e}",
            to_f64(dev / scale)
        )));
    }
    Ok(())
}

/// Unit eigenvector of the largest eigenvalue of a Hermitian matrix.
pub fn dominant_eigvec<T: Real>(h: &ComplexMatrix<T>) -> Result<DominantEig<T>> {
    if h.nrows() == 0 {
        return Err(DcCpdError::Dimension("empty matrix".into()));
    }
    let (vals, vecs) = hermitian_eig(h)?;
    let mut v = vecs.column(0).into_owned();
    v *= phase_fix(v.as_slice());
    let lambda = vals[0];
    let lambda2 = vals.get(1).copied().unwrap_or_else(T::zero);
    let warning = if vals.len() > 1 && fabs(lambda - lambda2) <= lit::<T>(1e-8) * fabs(lambda) {
        Some(Warning::EigenvalueTie {
            lambda1: to_f64(lambda),
            lambda2: to_f64(lambda2),
        })
    } else {
        None
    };
    Ok(DominantEig {
        vector: v,
        lambda,
        lambda2,
        warning,
    })
}

/// Least-squares solution of `a x = b` through the SVD of `a`.
///
/// Fails when `σ_min(a) ≤ 1e-12 · σ_max(a)`.
pub fn lstsq<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    lstsq_tol(a, b, tol(1e-12))
}

pub fn lstsq_tol<T: Real>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
    rel_tol: T,
) -> Result<ComplexMatrix<T>> {
    if a.nrows() != b.nrows() {
        return Err(DcCpdError::Dimension(format!(
            "lstsq row mismatch: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let cols = a.ncols();
    if cols == 0 {
        return Ok(ComplexMatrix::zeros(0, b.ncols()));
    }
    ensure_finite(b)?;
    let d = svd(a)?;
    let smax = d.s[0];
    let rank = d.s.iter().filter(|&&x| x > rel_tol * smax).count();
    if rank < cols || smax == T::zero() {
        return Err(DcCpdError::RankDeficient {
            rank,
            cols,
            context: "least-squares coefficient matrix".into(),
        });
    }
    let mut uhb = d.u.adjoint() * b;
    for (i, s) in d.s.iter().enumerate() {
        let inv = Complex::new(T::one() / *s, T::zero());
        for c in 0..uhb.ncols() {
            uhb[(i, c)] *= inv;
        }
    }
    Ok(&d.v * uhb)
}

/// Top-`r` left singular vectors.
pub fn leading_left_singular<T: Real>(m: &ComplexMatrix<T>, r: usize) -> Result<ComplexMatrix<T>> {
    let d = svd(m)?;
    if d.u.ncols() < r {
        return Err(DcCpdError::Dimension(format!(
            "requested {r} singular vectors of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(d.u.columns(0, r).into_owned())
}

/// Scales every column to unit norm with the phase convention and returns
/// the complex factors removed (`m = normalized · diag(scales)`).
pub fn normalize_columns<T: Real>(m: &mut ComplexMatrix<T>) -> Vec<Complex<T>> {
    let mut scales = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let nrm = col.iter().fold(T::zero(), |acc, z| acc + abs2(*z)).sqrt();
        if nrm == T::zero() {
            scales.push(czero::<T>());
            continue;
        }
        let p = phase_fix(col.as_slice());
        // col = s * unit with s = nrm / p
        let s = Complex::new(nrm, T::zero()) * p.conj();
        let inv = cone::<T>() / s;
        for z in col.iter_mut() {
            *z *= inv;
        }
        scales.push(s);
    }
    scales
}

/// CPD factors `[[A, B, C]]`.
#[derive(Debug, Clone)]
pub struct CpdFactors<T: Real> {
    pub a: ComplexMatrix<T>,
    pub b: ComplexMatrix<T>,
    pub c: ComplexMatrix<T>,
}

impl<T: Real> CpdFactors<T> {
    pub fn reconstruct(&self) -> Result<ComplexTensor3<T>> {
        ComplexTensor3::from_cpd(&self.a, &self.b, &self.c)
    }
}

pub const GEVD_ATTEMPTS: usize = 5;

/// Rank-`r` CPD by a generalized eigenvalue decomposition.
///
/// Modes 1 and 2 are projected onto their dominant `r`-dimensional
/// subspaces; two random unit-norm combinations of all frontal slices form
/// the pencil. A degenerate pencil (repeated eigenvalues or a singular
/// second matrix) triggers a redraw, up to [`GEVD_ATTEMPTS`] in total.
/// Columns of `A` and `B` are unit-norm with the phase convention; the scale
/// lives in `C`.
pub fn gevd_cpd<T: Real, R: Rng + ?Sized>(
    t: &ComplexTensor3<T>,
    r: usize,
    rng: &mut R,
) -> Result<CpdFactors<T>> {
    let (ni, nj, nk) = t.dims();
    if r == 0 || r > ni || r > nj {
        return Err(DcCpdError::Dimension(format!(
            "gevd_cpd needs 1 <= r <= min(I, J); got r={r} for dims {:?}",
            t.dims()
        )));
    }
    let ua = leading_left_singular(&matricize(t, Mode::One).transpose(), r)?;
    let ub = leading_left_singular(&matricize(t, Mode::Two).transpose(), r)?;
    let ua_h = ua.adjoint();
    let ub_c = ub.map(|z| z.conj());
    let core: Vec<ComplexMatrix<T>> = t
        .frontal_slices()
        .iter()
        .map(|s| &ua_h * s * &ub_c)
        .collect();

    for _ in 0..GEVD_ATTEMPTS {
        let w1 = random_unit_vector::<T, R>(nk, rng);
        let w2 = random_unit_vector::<T, R>(nk, rng);
        let mix = |w: &[Complex<T>]| {
            core.iter()
                .zip(w)
                .fold(ComplexMatrix::zeros(r, r), |acc, (s, wk)| acc + s * *wk)
        };
        let s1 = mix(&w1);
        let s2 = mix(&w2);
        let Some(at) = pencil_eigenvectors(&s1, &s2)? else {
            continue;
        };
        let Some(at_inv) = at.clone().try_inverse() else {
            continue;
        };
        let bt = (at_inv * &s2).transpose();
        let mut a = &ua * at;
        let mut b = &ub * bt;
        normalize_columns(&mut a);
        normalize_columns(&mut b);
        let kr = khatri_rao(&a, &b)?;
        let ct = match lstsq(&kr, &matricize(t, Mode::Three)) {
            Ok(x) => x,
            Err(DcCpdError::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        };
        return Ok(CpdFactors {
            a,
            b,
            c: ct.transpose(),
        });
    }
    Err(DcCpdError::DegeneratePencil {
        attempts: GEVD_ATTEMPTS,
        context: String::new(),
    })
}

/// Eigenvectors of `s1 s2⁻¹`, or `None` if the pencil is degenerate.
fn pencil_eigenvectors<T: Real>(
    s1: &ComplexMatrix<T>,
    s2: &ComplexMatrix<T>,
) -> Result<Option<ComplexMatrix<T>>> {
    let r = s1.nrows();
    let d2 = svd(s2)?;
    if d2.s[0] == T::zero() || d2.s[r - 1] <= tol::<T>(1e-13) * d2.s[0] {
        return Ok(None);
    }
    let Some(s2_inv) = s2.clone().try_inverse() else {
        return Ok(None);
    };
    let mat = s1 * s2_inv;
    let Some(schur) = Schur::try_new(mat, T::default_epsilon(), SVD_MAX_ITER) else {
        return Ok(None);
    };
    let (q, tri) = schur.unpack();
    let lambdas: Vec<Complex<T>> = (0..r).map(|i| tri[(i, i)]).collect();
    let gap_tol = tol::<T>(1e-10);
    for i in 0..r {
        for j in (i + 1)..r {
            let scale = cabs(lambdas[i]).max(cabs(lambdas[j]));
            if scale == T::zero() || cabs(lambdas[i] - lambdas[j]) < gap_tol * scale {
                return Ok(None);
            }
        }
    }
    // eigenvectors of the upper triangular factor by back-substitution
    let mut y = ComplexMatrix::<T>::zeros(r, r);
    for k in 0..r {
        y[(k, k)] = cone::<T>();
        for j in (0..k).rev() {
            let mut acc = czero::<T>();
            for l in (j + 1)..=k {
                acc += tri[(j, l)] * y[(l, k)];
            }
            y[(j, k)] = -acc / (tri[(j, j)] - lambdas[k]);
        }
    }
    let mut v = q * y;
    normalize_columns(&mut v);
    Ok(Some(v))
}
