//! Joint blind source separation front end: multi-set source synthesis,
//! noisy mixtures, covariance tensorization and the error metric.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::assign::min_cost_assignment;
use crate::error::{DcCpdError, Result};
use crate::linalg::{gevd_cpd, svd};
use crate::model::DcCpdProblem;
use crate::random::{complex_gaussian_matrix, rng_from_seed};
use crate::scalar::{abs2, fro, lit, to_f64, ComplexMatrix, Real};
use crate::tensor::ComplexTensor3;

/// `M` observation matrices `X^(m)` (`N_m × Q`) over a common sample axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSetSignals<T: Real> {
    pub x: Vec<ComplexMatrix<T>>,
}

impl<T: Real> MultiSetSignals<T> {
    pub fn new(x: Vec<ComplexMatrix<T>>) -> Result<Self> {
        let Some(first) = x.first() else {
            return Err(DcCpdError::InvalidInput("no datasets".into()));
        };
        let q = first.ncols();
        if x.iter().any(|m| m.ncols() != q) {
            return Err(DcCpdError::Dimension(
                "datasets differ in sample count".into(),
            ));
        }
        Ok(Self { x })
    }

    pub fn dataset_count(&self) -> usize {
        self.x.len()
    }

    pub fn samples(&self) -> usize {
        self.x[0].ncols()
    }

    pub fn dims_n(&self) -> Vec<usize> {
        self.x.iter().map(|m| m.nrows()).collect()
    }
}

/// Framing of the sample axis: `t` frames of length `l`, consecutive frames
/// overlapping by the fraction `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub l: usize,
    pub alpha: f64,
    pub t: usize,
}

impl FrameSpec {
    pub fn hop(&self) -> Result<usize> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(DcCpdError::InvalidInput("overlap must lie in [0,1)".into()));
        }
        let hop = self.l as f64 * (1.0 - self.alpha);
        if self.l == 0 || (hop - hop.round()).abs() > 1e-9 || hop.round() < 1.0 {
            return Err(DcCpdError::InvalidInput(format!(
                "frame length {} with overlap {} gives a non-integer hop",
                self.l, self.alpha
            )));
        }
        Ok(hop.round() as usize)
    }

    /// Samples needed to hold all frames.
    pub fn required_samples(&self) -> Result<usize> {
        Ok((self.t.max(1) - 1) * self.hop()? + self.l)
    }
}

/// Sample cross-covariance tensors: slice `k` of `T^(m,n)` is
/// `L⁻¹ X_k^(m) X_k^(n)ᴴ` over frame `k`. Only `m ≤ n` are computed; the
/// rest are mirrored so the grid is exactly conjugate-symmetric.
pub fn covariance_tensorize<T: Real>(
    sig: &MultiSetSignals<T>,
    spec: &FrameSpec,
) -> Result<DcCpdProblem<T>> {
    let hop = spec.hop()?;
    if spec.t == 0 {
        return Err(DcCpdError::InvalidInput(
            "frame count must be positive".into(),
        ));
    }
    let need = spec.required_samples()?;
    if need > sig.samples() {
        return Err(DcCpdError::Dimension(format!(
            "frames need {need} samples, only {} available",
            sig.samples()
        )));
    }
    let mm = sig.dataset_count();
    let dims = sig.dims_n();
    let inv_l = Complex::new(T::one() / lit::<T>(spec.l as f64), T::zero());
    let mut grid: Vec<Option<ComplexTensor3<T>>> = vec![None; mm * mm];
    for m in 0..mm {
        for n in m..mm {
            let slices: Vec<ComplexMatrix<T>> = (0..spec.t)
                .map(|k| {
                    let xm = sig.x[m].columns(k * hop, spec.l);
                    let xn = sig.x[n].columns(k * hop, spec.l);
                    let mut s = xm * xn.adjoint() * inv_l;
                    if m == n {
                        s = (&s + s.adjoint()) * Complex::new(lit::<T>(0.5), T::zero());
                    }
                    s
                })
                .collect();
            let t = ComplexTensor3::from_slices(&slices)?;
            if m != n {
                grid[n * mm + m] = Some(crate::tensor::perm213(&t.conj()));
            }
            grid[m * mm + n] = Some(t);
        }
    }
    let tensors = grid.into_iter().map(|t| t.expect("filled")).collect();
    DcCpdProblem::new(dims, spec.t, tensors, true)
}

/// Parameters of the multi-set source generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub r: usize,
    pub m: usize,
    /// Number of amplitude-modulated segments.
    pub p: usize,
    pub q: usize,
    pub seed: u64,
    /// Use `Q_r = I`, leaving the datasets independent.
    pub identity_mixers: bool,
}

impl SourceModel {
    pub fn new(r: usize, m: usize, p: usize, q: usize, seed: u64) -> Self {
        Self {
            r,
            m,
            p,
            q,
            seed,
            identity_mixers: false,
        }
    }
}

/// Generated sources `S^(m)` (`Q × R`) and the mixers `Q_r` (`M × M`) that
/// couple the datasets.
#[derive(Debug, Clone)]
pub struct Sources<T: Real> {
    pub s: Vec<ComplexMatrix<T>>,
    pub mixers: Vec<ComplexMatrix<T>>,
}

/// Largest accepted condition number of a mixer.
pub const MIXER_MAX_COND: f64 = 1e6;

/// For each source `r`: `P` amplitudes `η_p ~ U[0,1]` shared by all
/// datasets, independent ±1 symbols per dataset and segment, then the
/// dataset columns are mixed by `Q_r` (`S_r = S'_r Q_rᵀ`).
pub fn synth_sources<T: Real>(model: &SourceModel) -> Result<Sources<T>> {
    if model.p == 0 || !model.q.is_multiple_of(model.p) {
        return Err(DcCpdError::Dimension(format!(
            "sample count {} is not divisible by segment count {}",
            model.q, model.p
        )));
    }
    let seg = model.q / model.p;
    let mut rng = rng_from_seed(model.seed);
    let unif = Uniform::new(0.0f64, 1.0).expect("valid range");
    let mut s = vec![ComplexMatrix::<T>::zeros(model.q, model.r); model.m];
    let mut mixers = Vec::with_capacity(model.r);
    for r in 0..model.r {
        let eta: Vec<f64> = (0..model.p).map(|_| unif.sample(&mut rng)).collect();
        let mut gen = ComplexMatrix::<T>::zeros(model.q, model.m);
        for col in 0..model.m {
            for (p, &e) in eta.iter().enumerate() {
                for i in 0..seg {
                    let sym = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    gen[(p * seg + i, col)] = Complex::new(lit::<T>(sym * e), T::zero());
                }
            }
        }
        let qr = if model.identity_mixers {
            ComplexMatrix::identity(model.m, model.m)
        } else {
            draw_mixer::<T, _>(model.m, &mut rng)?
        };
        let mixed = gen * qr.transpose();
        for (m, sm) in s.iter_mut().enumerate() {
            sm.set_column(r, &mixed.column(m));
        }
        mixers.push(qr);
    }
    Ok(Sources { s, mixers })
}

fn draw_mixer<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<ComplexMatrix<T>> {
    loop {
        // overall scale cancels in the normalized mixtures
        let q = complex_gaussian_matrix::<T, R>(m, m, rng);
        let s = svd(&q)?.s;
        let smin = *s.last().expect("nonempty");
        if smin > T::zero() && to_f64(s[0] / smin) < MIXER_MAX_COND {
            return Ok(q);
        }
    }
}

/// `X^(m) = A^(m)S^(m)ᵀ/‖·‖_F + σ_n N^(m)/‖N^(m)‖_F` with circular complex
/// Gaussian noise and `σ_n = 10^(−snr/20)`; an infinite SNR disables noise.
pub fn synth_mixtures<T: Real, R: Rng + ?Sized>(
    s: &[ComplexMatrix<T>],
    a: &[ComplexMatrix<T>],
    snr_db: f64,
    rng: &mut R,
) -> Result<MultiSetSignals<T>> {
    if s.len() != a.len() {
        return Err(DcCpdError::Dimension(
            "source and mixing counts differ".into(),
        ));
    }
    let sigma_n = 10f64.powf(-snr_db / 20.0);
    let mut x = Vec::with_capacity(a.len());
    for (am, sm) in a.iter().zip(s) {
        if am.ncols() != sm.ncols() {
            return Err(DcCpdError::Dimension(
                "mixing matrix and sources disagree on R".into(),
            ));
        }
        let clean = am * sm.transpose();
        let cn = fro(&clean);
        if cn == T::zero() {
            return Err(DcCpdError::Degenerate("signal part vanishes".into()));
        }
        let mut xm = clean / Complex::new(cn, T::zero());
        if snr_db.is_finite() {
            let noise = complex_gaussian_matrix::<T, R>(xm.nrows(), xm.ncols(), rng);
            let nn = fro(&noise);
            xm += noise * Complex::new(lit::<T>(sigma_n) / nn, T::zero());
        }
        x.push(xm);
    }
    MultiSetSignals::new(x)
}

/// Residual cost `cost[i][j] = ‖a_i‖² − |ã_jᴴ a_i|²/‖ã_j‖²` of matching true
/// column `i` with estimated column `j` under the optimal complex scale.
fn pair_costs<T: Real>(est: &ComplexMatrix<T>, truth: &ComplexMatrix<T>) -> Vec<f64> {
    let r = truth.ncols();
    let mut cost = vec![0.0; r * r];
    for i in 0..r {
        let a = truth.column(i);
        for j in 0..r {
            let e = est.column(j);
            let en = e.iter().fold(T::zero(), |acc, z| acc + abs2(*z));
            // residual of the projection, formed explicitly to avoid cancellation
            let res = if en > T::zero() {
                let coef = e.dotc(&a) / Complex::new(en, T::zero());
                a.iter()
                    .zip(e.iter())
                    .fold(T::zero(), |acc, (x, y)| acc + abs2(*x - *y * coef))
            } else {
                a.iter().fold(T::zero(), |acc, z| acc + abs2(*z))
            };
            cost[i * r + j] = to_f64(res);
        }
    }
    cost
}

fn check_shapes<T: Real>(est: &[ComplexMatrix<T>], truth: &[ComplexMatrix<T>]) -> Result<()> {
    if est.len() != truth.len() || truth.is_empty() {
        return Err(DcCpdError::Dimension(format!(
            "estimate has {} matrices, truth {}",
            est.len(),
            truth.len()
        )));
    }
    for (m, (e, t)) in est.iter().zip(truth).enumerate() {
        if e.shape() != t.shape() {
            return Err(DcCpdError::Dimension(format!(
                "dataset {m}: estimate {:?} vs truth {:?}",
                e.shape(),
                t.shape()
            )));
        }
    }
    Ok(())
}

/// Mean over datasets of `min_{Π,D} ‖A − Ã Π D‖²_F / ‖A‖²_F`, each dataset
/// with its own column permutation and complex scaling.
pub fn mean_relative_error<T: Real>(
    est: &[ComplexMatrix<T>],
    truth: &[ComplexMatrix<T>],
) -> Result<f64> {
    check_shapes(est, truth)?;
    let mut total = 0.0;
    for (e, t) in est.iter().zip(truth) {
        let r = t.ncols();
        let (_, best) = min_cost_assignment(&pair_costs(e, t), r);
        let tn = to_f64(fro(t).powi(2));
        total += if tn > 0.0 { best / tn } else { 0.0 };
    }
    Ok(total / truth.len() as f64)
}

/// As [`mean_relative_error`] but with one permutation shared by all
/// datasets, which measures whether the solver aligned the sources.
pub fn coupled_mean_relative_error<T: Real>(
    est: &[ComplexMatrix<T>],
    truth: &[ComplexMatrix<T>],
) -> Result<f64> {
    check_shapes(est, truth)?;
    let r = truth[0].ncols();
    let mut cost = vec![0.0; r * r];
    for (e, t) in est.iter().zip(truth) {
        let tn = to_f64(fro(t).powi(2));
        for (acc, c) in cost.iter_mut().zip(pair_costs(e, t)) {
            *acc += if tn > 0.0 { c / tn } else { 0.0 };
        }
    }
    let (_, best) = min_cost_assignment(&cost, r);
    Ok(best / truth.len() as f64)
}

/// Per-tensor baseline: `A^(m)` from the GEVD-based CPD of `T^(m, m+1)`
/// (cyclically). Requires `R ≤ N_m`.
pub fn cpd_c_lite<T: Real>(
    p: &DcCpdProblem<T>,
    r: usize,
    seed: u64,
) -> Result<Vec<ComplexMatrix<T>>> {
    let mm = p.dataset_count();
    if mm < 2 {
        return Err(DcCpdError::InvalidInput(
            "baseline needs at least two datasets".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(mm);
    for m in 0..mm {
        let n = (m + 1) % mm;
        let f = gevd_cpd(p.tensor(m, n), r, &mut rng)?;
        out.push(f.a);
    }
    Ok(out)
}
