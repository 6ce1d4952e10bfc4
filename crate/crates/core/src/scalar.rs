//! Scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type usable by the solvers (`f32` or `f64`).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

/// Dense complex matrix, column-major storage.
pub type ComplexMatrix<T> = DMatrix<Complex<T>>;

/// Dense complex column vector.
pub type ComplexVector<T> = DVector<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts `T` into `f64`.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Returns `x` unless it is below the working precision of `T`, in which
/// case a small multiple of machine epsilon is returned instead.
#[inline]
pub fn tol<T: Real>(x: f64) -> T {
    let floor = lit::<T>(64.0) * T::default_epsilon();
    let v = lit::<T>(x);
    if v < floor {
        floor
    } else {
        v
    }
}

#[inline]
pub fn fabs<T: Real>(x: T) -> T {
    if x < T::zero() {
        -x
    } else {
        x
    }
}

#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

#[inline]
pub fn abs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// Unit-modulus number with the phase of `z`; returns 1 for `z = 0`.
#[inline]
pub fn phase_of<T: Real>(z: Complex<T>) -> Complex<T> {
    let r = cabs(z);
    if r > T::zero() {
        Complex::new(z.re / r, z.im / r)
    } else {
        Complex::new(T::one(), T::zero())
    }
}

/// Squared Frobenius norm of a complex matrix.
pub fn fro2<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + abs2(*z))
}

/// Frobenius norm of a complex matrix.
pub fn fro<T: Real>(m: &ComplexMatrix<T>) -> T {
    fro2(m).sqrt()
}

/// Euclidean norm of a complex slice.
pub fn vnorm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + abs2(*z)).sqrt()
}

/// `Σ conj(a_i) b_i`.
pub fn cdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        })
}

/// Elementwise conjugate of a matrix.
pub fn conj_mat<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    m.map(|z| z.conj())
}

/// Converts an `f64` complex matrix to `T`.
pub fn cast_matrix<T: Real>(m: &DMatrix<Complex<f64>>) -> ComplexMatrix<T> {
    m.map(|z| Complex::new(lit::<T>(z.re), lit::<T>(z.im)))
}

/// Converts a `T` complex matrix to `f64`.
pub fn matrix_to_f64<T: Real>(m: &ComplexMatrix<T>) -> DMatrix<Complex<f64>> {
    m.map(|z| Complex::new(to_f64(z.re), to_f64(z.im)))
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}
