//! Dense third-order complex tensors and the reshaping kernels built on them.
//!
//! Storage is row-major over `(i, j, k)`: the element `t[i][j][k]` (0-based)
//! lives at `(i * J + j) * K + k`. All unfoldings follow the index law
//! `T1[(j, k), i] = T2[(i, k), j] = T3[(i, j), k]` with the slower index first,
//! so `T1` is `JK × I`, `T2` is `IK × J` and `T3` is `IJ × K`.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{DcCpdError, Result};
use crate::scalar::{abs2, ComplexMatrix, Real};

/// Unfolding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3<T: Real> {
    dims: (usize, usize, usize),
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexTensor3<T> {
    pub fn new(dims: (usize, usize, usize), data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(DcCpdError::Dimension(format!(
                "tensor data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(i: usize, j: usize, k: usize) -> Self {
        Self {
            dims: (i, j, k),
            data: vec![Complex::zero(); i * j * k],
        }
    }

    pub fn from_fn(
        i: usize,
        j: usize,
        k: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(i * j * k);
        for a in 0..i {
            for b in 0..j {
                for c in 0..k {
                    data.push(f(a, b, c));
                }
            }
        }
        Self {
            dims: (i, j, k),
            data,
        }
    }

    /// Builds a tensor from frontal slices, each `I × J`.
    pub fn from_slices(slices: &[ComplexMatrix<T>]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(DcCpdError::Dimension("no slices given".into()));
        };
        let (i, j) = first.shape();
        if slices.iter().any(|s| s.shape() != (i, j)) {
            return Err(DcCpdError::Dimension(
                "frontal slices differ in shape".into(),
            ));
        }
        Ok(Self::from_fn(i, j, slices.len(), |a, b, c| {
            slices[c][(a, b)]
        }))
    }

    /// Rank-R tensor `Σ_r a_r ∘ b_r ∘ c_r`.
    pub fn from_cpd(
        a: &ComplexMatrix<T>,
        b: &ComplexMatrix<T>,
        c: &ComplexMatrix<T>,
    ) -> Result<Self> {
        let r = a.ncols();
        if b.ncols() != r || c.ncols() != r {
            return Err(DcCpdError::Dimension(format!(
                "factor column counts differ: {}, {}, {}",
                r,
                b.ncols(),
                c.ncols()
            )));
        }
        let t3 = khatri_rao(a, b)? * c.transpose();
        tensorize(&t3, (a.nrows(), b.nrows(), c.nrows()))
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex<T> {
        self.data[self.offset(i, j, k)]
    }

    /// Frontal slice `k` as an `I × J` matrix.
    pub fn frontal_slice(&self, k: usize) -> ComplexMatrix<T> {
        let (i, j, _) = self.dims;
        ComplexMatrix::from_fn(i, j, |a, b| self.get(a, b, k))
    }

    pub fn frontal_slices(&self) -> Vec<ComplexMatrix<T>> {
        (0..self.dims.2).map(|k| self.frontal_slice(k)).collect()
    }

    pub fn matricize(&self, mode: Mode) -> ComplexMatrix<T> {
        matricize(self, mode)
    }

    pub fn conj(&self) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        if self.dims != other.dims {
            return Err(DcCpdError::Dimension(format!(
                "tensor dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| f(*x, *y))
                .collect(),
        })
    }

    pub fn norm_sqr(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + abs2(*z))
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Squared Frobenius distance to another tensor of the same dims.
    pub fn dist_sqr(&self, other: &Self) -> Result<T> {
        if self.dims != other.dims {
            return Err(DcCpdError::Dimension(format!(
                "tensor dims {:?} and {:?} differ",
                self.dims, other.dims
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (x, y)| acc + abs2(x - y)))
    }
}

impl<T: Real> Index<(usize, usize, usize)> for ComplexTensor3<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &Complex<T> {
        &self.data[self.offset(i, j, k)]
    }
}

impl<T: Real> IndexMut<(usize, usize, usize)> for ComplexTensor3<T> {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut Complex<T> {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

pub fn matricize<T: Real>(t: &ComplexTensor3<T>, mode: Mode) -> ComplexMatrix<T> {
    let (ni, nj, nk) = t.dims;
    match mode {
        Mode::One => ComplexMatrix::from_fn(nj * nk, ni, |row, i| t.get(i, row / nk, row % nk)),
        Mode::Two => ComplexMatrix::from_fn(ni * nk, nj, |row, j| t.get(row / nk, j, row % nk)),
        Mode::Three => ComplexMatrix::from_fn(ni * nj, nk, |row, k| t.get(row / nj, row % nj, k)),
    }
}

/// Inverse of the mode-3 unfolding: `t[i][j][k] = m[(i J + j), k]`.
pub fn tensorize<T: Real>(
    m: &ComplexMatrix<T>,
    dims: (usize, usize, usize),
) -> Result<ComplexTensor3<T>> {
    let (ni, nj, nk) = dims;
    if m.nrows() != ni * nj || m.ncols() != nk {
        return Err(DcCpdError::Dimension(format!(
            "cannot tensorize {}x{} matrix into {:?}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    Ok(ComplexTensor3::from_fn(ni, nj, nk, |i, j, k| {
        m[(i * nj + j, k)]
    }))
}

/// Column-wise Kronecker product; column `r` is `a_r ⊗ b_r`.
pub fn khatri_rao<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(DcCpdError::Dimension(format!(
            "khatri_rao column counts differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let nb = b.nrows();
    Ok(ComplexMatrix::from_fn(
        a.nrows() * nb,
        a.ncols(),
        |row, r| a[(row / nb, r)] * b[(row % nb, r)],
    ))
}

/// Swaps the first two indices: `out[j][i][k] = t[i][j][k]`.
pub fn perm213<T: Real>(t: &ComplexTensor3<T>) -> ComplexTensor3<T> {
    let (ni, nj, nk) = t.dims;
    ComplexTensor3::from_fn(nj, ni, nk, |j, i, k| t.get(i, j, k))
}

/// Stacks `y` after `x` along the third mode.
pub fn concat3<T: Real>(x: &ComplexTensor3<T>, y: &ComplexTensor3<T>) -> Result<ComplexTensor3<T>> {
    let (xi, xj, xk) = x.dims;
    let (yi, yj, yk) = y.dims;
    if (xi, xj) != (yi, yj) {
        return Err(DcCpdError::Dimension(format!(
            "concat3 leading dims differ: {:?} vs {:?}",
            x.dims, y.dims
        )));
    }
    Ok(ComplexTensor3::from_fn(xi, xj, xk + yk, |i, j, k| {
        if k < xk {
            x.get(i, j, k)
        } else {
            y.get(i, j, k - xk)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{complex_gaussian_matrix, rng_from_seed};
    use crate::scalar::fro;

    type Z = Complex<f64>;

    fn z(re: f64) -> Z {
        Z::new(re, 0.0)
    }

    fn counting(i: usize, j: usize, k: usize) -> ComplexTensor3<f64> {
        ComplexTensor3::from_fn(i, j, k, |a, b, c| {
            Z::new((100 * a + 10 * b + c) as f64, a as f64 - c as f64)
        })
    }

    #[test]
    fn scalar_tensor_unfolds_to_itself() {
        let t = ComplexTensor3::new((1, 1, 1), vec![z(5.0)]).unwrap();
        for mode in [Mode::One, Mode::Two, Mode::Three] {
            let m = matricize(&t, mode);
            assert_eq!(m.shape(), (1, 1));
            assert_eq!(m[(0, 0)], z(5.0));
        }
    }

    #[test]
    fn mode_one_index_law_on_2x2x2() {
        let t = counting(2, 2, 2);
        // logical t_{2,1,2} sits at row (1-1)*2+2 = 2, column 2 (1-based)
        let m = matricize(&t, Mode::One);
        assert_eq!(m[(1, 1)], t[(1, 0, 1)]);
    }

    #[test]
    fn unfoldings_match_index_formulas_exhaustively() {
        let (ni, nj, nk) = (3, 4, 5);
        let t = counting(ni, nj, nk);
        let m1 = matricize(&t, Mode::One);
        let m2 = matricize(&t, Mode::Two);
        let m3 = matricize(&t, Mode::Three);
        assert_eq!(m1.shape(), (nj * nk, ni));
        assert_eq!(m2.shape(), (ni * nk, nj));
        assert_eq!(m3.shape(), (ni * nj, nk));
        for i in 0..ni {
            for j in 0..nj {
                for k in 0..nk {
                    let v = t[(i, j, k)];
                    assert_eq!(m1[(j * nk + k, i)], v);
                    assert_eq!(m2[(i * nk + k, j)], v);
                    assert_eq!(m3[(i * nj + j, k)], v);
                }
            }
        }
        assert_eq!(tensorize(&m3, (ni, nj, nk)).unwrap(), t);
    }

    #[test]
    fn tensorize_examples() {
        let m = ComplexMatrix::from_column_slice(2, 1, &[z(1.0), z(2.0)]);
        let t = tensorize(&m, (2, 1, 1)).unwrap();
        assert_eq!(t[(0, 0, 0)], z(1.0));
        assert_eq!(t[(1, 0, 0)], z(2.0));

        let m = ComplexMatrix::from_column_slice(4, 1, &[z(1.0), z(2.0), z(3.0), z(4.0)]);
        let t = tensorize(&m, (2, 2, 1)).unwrap();
        assert_eq!(t[(0, 0, 0)], z(1.0));
        assert_eq!(t[(0, 1, 0)], z(2.0));
        assert_eq!(t[(1, 0, 0)], z(3.0));
        assert_eq!(t[(1, 1, 0)], z(4.0));

        assert!(matches!(
            tensorize(&m, (3, 1, 1)),
            Err(DcCpdError::Dimension(_))
        ));
    }

    #[test]
    fn khatri_rao_hand_example() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[z(1.0), z(2.0), z(3.0), z(4.0)]);
        let b = ComplexMatrix::from_row_slice(2, 2, &[z(5.0), z(6.0), z(7.0), z(8.0)]);
        let kr = khatri_rao(&a, &b).unwrap();
        let expect = ComplexMatrix::from_row_slice(
            4,
            2,
            &[
                z(5.0),
                z(12.0),
                z(7.0),
                z(16.0),
                z(15.0),
                z(24.0),
                z(21.0),
                z(32.0),
            ],
        );
        assert_eq!(kr, expect);
    }

    #[test]
    fn khatri_rao_of_identities() {
        let i2 = ComplexMatrix::<f64>::identity(2, 2);
        let kr = khatri_rao(&i2, &i2).unwrap();
        let mut expect = ComplexMatrix::zeros(4, 2);
        expect[(0, 0)] = z(1.0);
        expect[(3, 1)] = z(1.0);
        assert_eq!(kr, expect);
        let bad = ComplexMatrix::<f64>::identity(2, 3);
        assert!(khatri_rao(&i2, &bad).is_err());
    }

    #[test]
    fn mode_three_of_cpd_is_khatri_rao_product() {
        let mut rng = rng_from_seed(3);
        let a = complex_gaussian_matrix::<f64, _>(3, 2, &mut rng);
        let b = complex_gaussian_matrix::<f64, _>(4, 2, &mut rng);
        let c = complex_gaussian_matrix::<f64, _>(5, 2, &mut rng);
        // oracle: explicit triple sum of rank-1 terms
        let t = ComplexTensor3::from_fn(3, 4, 5, |i, j, k| {
            (0..2).map(|r| a[(i, r)] * b[(j, r)] * c[(k, r)]).sum()
        });
        let kr = khatri_rao(&a, &b).unwrap() * c.transpose();
        assert!(fro(&(matricize(&t, Mode::Three) - &kr)) < 1e-12);
        assert!(
            fro(&(matricize(&t, Mode::One) - khatri_rao(&b, &c).unwrap() * a.transpose())) < 1e-12
        );
        assert!(
            fro(&(matricize(&t, Mode::Two) - khatri_rao(&a, &c).unwrap() * b.transpose())) < 1e-12
        );
        let built = ComplexTensor3::from_cpd(&a, &b, &c).unwrap();
        assert!(built.dist_sqr(&t).unwrap() < 1e-24);
    }

    #[test]
    fn perm213_moves_elements() {
        let t = counting(2, 3, 2);
        let p = perm213(&t);
        assert_eq!(p.dims(), (3, 2, 2));
        assert_eq!(p[(2, 0, 1)], t[(0, 2, 1)]);
        assert_eq!(perm213(&p), t);
    }

    #[test]
    fn hermitian_slices_are_conjugate_symmetric() {
        let mut rng = rng_from_seed(5);
        let slices: Vec<_> = (0..3)
            .map(|_| {
                let x = complex_gaussian_matrix::<f64, _>(3, 3, &mut rng);
                &x + x.adjoint()
            })
            .collect();
        let t = ComplexTensor3::from_slices(&slices).unwrap();
        assert!(perm213(&t.conj()).dist_sqr(&t).unwrap() < 1e-28);
    }

    #[test]
    fn concat3_examples() {
        let t = counting(2, 3, 2);
        let empty = ComplexTensor3::zeros(2, 3, 0);
        assert_eq!(concat3(&t, &empty).unwrap(), t);

        let x = ComplexTensor3::from_fn(2, 2, 1, |i, j, _| z((i * 2 + j) as f64));
        let y = ComplexTensor3::from_fn(2, 2, 1, |i, j, _| z(10.0 + (i * 2 + j) as f64));
        let c = concat3(&x, &y).unwrap();
        assert_eq!(c.frontal_slice(0), x.frontal_slice(0));
        assert_eq!(c.frontal_slice(1), y.frontal_slice(0));

        assert!(concat3(&t, &x).is_err());
    }

    #[test]
    fn concat_of_cpds_stacks_third_factor() {
        let mut rng = rng_from_seed(8);
        let a = complex_gaussian_matrix::<f64, _>(3, 2, &mut rng);
        let b = complex_gaussian_matrix::<f64, _>(2, 2, &mut rng);
        let c1 = complex_gaussian_matrix::<f64, _>(2, 2, &mut rng);
        let c2 = complex_gaussian_matrix::<f64, _>(3, 2, &mut rng);
        let mut c = ComplexMatrix::zeros(5, 2);
        c.rows_mut(0, 2).copy_from(&c1);
        c.rows_mut(2, 3).copy_from(&c2);
        let lhs = concat3(
            &ComplexTensor3::from_cpd(&a, &b, &c1).unwrap(),
            &ComplexTensor3::from_cpd(&a, &b, &c2).unwrap(),
        )
        .unwrap();
        let rhs = ComplexTensor3::from_cpd(&a, &b, &c).unwrap();
        assert!(lhs.dist_sqr(&rhs).unwrap() < 1e-24);
    }

    #[test]
    fn new_rejects_wrong_length() {
        assert!(ComplexTensor3::<f64>::new((2, 2, 2), vec![z(0.0); 7]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn unfold_fold_roundtrip(i in 1usize..5, j in 1usize..5, k in 1usize..5, seed in any::<u64>()) {
                let mut rng = rng_from_seed(seed);
                let x = complex_gaussian_matrix::<f64, _>(i * j, k, &mut rng);
                let t = tensorize(&x, (i, j, k)).unwrap();
                prop_assert_eq!(matricize(&t, Mode::Three), x);
                let m1 = matricize(&t, Mode::One);
                let back = ComplexTensor3::from_fn(i, j, k, |a, b, c| m1[(b * k + c, a)]);
                prop_assert_eq!(&back, &t);
                let m2 = matricize(&t, Mode::Two);
                let back = ComplexTensor3::from_fn(i, j, k, |a, b, c| m2[(a * k + c, b)]);
                prop_assert_eq!(back, t);
            }

            #[test]
            fn khatri_rao_shape(ra in 1usize..5, rb in 1usize..5, r in 1usize..4) {
                let a = ComplexMatrix::<f64>::zeros(ra, r);
                let b = ComplexMatrix::<f64>::zeros(rb, r);
                prop_assert_eq!(khatri_rao(&a, &b).unwrap().shape(), (ra * rb, r));
            }
        }
    }
}
