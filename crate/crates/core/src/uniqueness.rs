//! Generic uniqueness certification through the rank of the pairwise
//! detection matrices `Φ^(m)_{g,h}`.

use rayon::prelude::*;

use crate::algebraic::{all_triples, coupled_rank1_map};
use crate::error::{DcCpdError, Result};
use crate::linalg::singular_values;
use crate::random::{complex_gaussian_matrix, derive_seed, rng_from_seed};
use crate::scalar::{to_f64, ComplexMatrix, Real};

/// Smallest accepted `σ_min/σ_max` of a full-column-rank `Φ`.
pub const PHI_RANK_TOL: f64 = 1e-9;

/// Generic `R_max` of the single-tensor CPD for `N = 2..=8`, listed for
/// comparison.
pub const CPD_RMAX: [(usize, usize); 7] =
    [(2, 2), (3, 4), (4, 9), (5, 14), (6, 21), (7, 30), (8, 40)];

/// Published generic `R_max` of the double coupled decomposition for
/// `N = 2..=8`.
pub const DCCPD_RMAX: [(usize, usize); 7] =
    [(2, 2), (3, 5), (4, 10), (5, 16), (6, 23), (7, 32), (8, 42)];

/// Looks up `N` in one of the reference tables.
pub fn reference_rmax(table: &[(usize, usize)], n: usize) -> Option<usize> {
    table.iter().find(|(k, _)| *k == n).map(|(_, r)| *r)
}

/// `Φ^(m)_{g,h}` with one column per ordered pair `(t, r)`, `t ≠ r`, in
/// row-major pair order: `ψ(a_t^(m) a_t^(g)ᴴ, a_r^(m) a_r^(h)ᴴ)`.
pub fn build_phi<T: Real>(
    a: &[ComplexMatrix<T>],
    m: usize,
    g: usize,
    h: usize,
) -> Result<ComplexMatrix<T>> {
    let mm = a.len();
    if m >= mm || g >= mm || h >= mm {
        return Err(DcCpdError::InvalidInput(format!(
            "indices ({m},{g},{h}) out of range for {mm} datasets"
        )));
    }
    let r = a[0].ncols();
    if a.iter().any(|x| x.ncols() != r) {
        return Err(DcCpdError::Dimension(
            "loading matrices differ in column count".into(),
        ));
    }
    let n = a[m].nrows();
    let rows = n * n * a[g].nrows() * a[h].nrows();
    let pairs: Vec<(usize, usize)> = (0..r)
        .flat_map(|t| (0..r).filter(move |&u| u != t).map(move |u| (t, u)))
        .collect();
    let mut phi = ComplexMatrix::zeros(rows, pairs.len());
    for (col, &(t, u)) in pairs.iter().enumerate() {
        let x1 = a[m].column(t) * a[g].column(t).adjoint();
        let x2 = a[m].column(u) * a[h].column(u).adjoint();
        let psi = coupled_rank1_map(&x1, &x2)?;
        for (i, z) in psi.into_iter().enumerate() {
            phi[(i, col)] = z;
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    /// `((m, g, h), full column rank)` for every triple, in lexicographic order.
    pub full_rank: Vec<((usize, usize, usize), bool)>,
    /// Smallest `σ_min/σ_max` over all `Φ`.
    pub min_sigma_ratio: f64,
    pub trials: usize,
}

impl UniquenessReport {
    pub fn all_full_rank(&self) -> bool {
        self.full_rank.iter().all(|(_, ok)| *ok)
    }
}

fn sigma_ratio<T: Real>(phi: &ComplexMatrix<T>) -> Result<f64> {
    if phi.ncols() == 0 {
        return Ok(1.0);
    }
    if phi.nrows() < phi.ncols() {
        return Ok(0.0);
    }
    let s = singular_values(phi)?;
    let smax = to_f64(s[0]);
    if smax == 0.0 {
        return Ok(0.0);
    }
    Ok(to_f64(*s.last().expect("nonempty")) / smax)
}

/// Rank test of every `Φ^(m)_{g,h}` for one set of loading matrices.
pub fn check_generic<T: Real>(a: &[ComplexMatrix<T>]) -> Result<UniquenessReport> {
    let mm = a.len();
    if mm < 2 {
        return Err(DcCpdError::InvalidInput(
            "uniqueness check needs two datasets".into(),
        ));
    }
    let triples = all_triples(mm);
    let ratios = triples
        .par_iter()
        .map(|&(m, g, h)| sigma_ratio(&build_phi(a, m, g, h)?))
        .collect::<Result<Vec<f64>>>()?;
    let full_rank = triples
        .iter()
        .zip(&ratios)
        .map(|(&t, &q)| (t, q > PHI_RANK_TOL))
        .collect();
    Ok(UniquenessReport {
        n: a[0].nrows(),
        m: mm,
        r: a[0].ncols(),
        full_rank,
        min_sigma_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        trials: 1,
    })
}

/// Tests whether rank `r` is generically unique for `N` sensors and `M`
/// datasets: one passing random draw certifies it. Up to `trials` draws plus
/// one redraw are tried.
pub fn certify_rank(
    n: usize,
    mm: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    let attempts = trials.max(1) + 1;
    let mut last = None;
    for k in 0..attempts {
        let mut rng = rng_from_seed(derive_seed(seed, (r as u64) << 32 | k as u64));
        let a: Vec<ComplexMatrix<f64>> = (0..mm)
            .map(|_| complex_gaussian_matrix::<f64, _>(n, r, &mut rng))
            .collect();
        let mut rep = check_generic(&a)?;
        rep.trials = k + 1;
        if rep.all_full_rank() {
            return Ok(rep);
        }
        last = Some(rep);
    }
    Ok(last.expect("at least one attempt"))
}

/// Largest `R` for which every `Φ^(m)_{g,h}` has full column rank for a
/// random draw, searching upwards from `R = 2` and stopping at the first
/// failure. Returns 1 when even `R = 2` fails.
pub fn generic_rmax(n: usize, mm: usize, trials: usize, seed: u64) -> Result<usize> {
    if n < 2 || mm < 2 || trials == 0 {
        return Err(DcCpdError::InvalidInput(
            "generic_rmax needs N ≥ 2, M ≥ 2 and at least one trial".into(),
        ));
    }
    let mut best = 1;
    for r in 2.. {
        // Φ has N⁴ rows and R² − R columns
        if n.pow(4) < r * r - r {
            break;
        }
        if !certify_rank(n, mm, r, trials, seed)?.all_full_rank() {
            break;
        }
        best = r;
    }
    Ok(best)
}
