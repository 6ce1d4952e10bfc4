//! JSON file formats for tensor grids, solutions and multi-set signals.
//!
//! Arrays are flattened row-major (tensors in `(i, j, k)` order, matrices in
//! `(row, col)` order) with separate real and imaginary parts. Dataset
//! indices are 1-based in files. Doubles round-trip bit-exactly.

use std::fs;
use std::path::Path;

use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{DcCpdError, Result};
use crate::jbss::MultiSetSignals;
use crate::model::{DcCpdProblem, DcCpdSolution};
use crate::scalar::ComplexMatrix;
use crate::tensor::ComplexTensor3;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub m: usize,
    pub n: usize,
    pub shape: [usize; 3],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub m: usize,
    /// Present for third factors, absent for loading matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub shape: [usize; 2],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "A")]
    pub a: Vec<MatrixEntry>,
    #[serde(rename = "C")]
    pub c: Vec<MatrixEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSetFile {
    pub version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub dims_n: Vec<usize>,
    #[serde(rename = "T")]
    pub t: usize,
    pub symmetric: bool,
    pub tensors: Vec<TensorEntry>,
    /// Generating factors, when the grid was synthesized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SolutionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub m: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFile {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub dims_n: Vec<usize>,
    pub datasets: Vec<DatasetEntry>,
}

fn split(vals: impl Iterator<Item = Complex<f64>>) -> (Vec<f64>, Vec<f64>) {
    vals.map(|z| (z.re, z.im)).unzip()
}

fn join(re: &[f64], im: &[f64], len: usize, what: &str) -> Result<Vec<Complex<f64>>> {
    if re.len() != len || im.len() != len {
        return Err(DcCpdError::Parse(format!(
            "{what}: expected {len} values, got {} real and {} imaginary",
            re.len(),
            im.len()
        )));
    }
    Ok(re
        .iter()
        .zip(im)
        .map(|(&a, &b)| Complex::new(a, b))
        .collect())
}

fn matrix_entry(m: usize, n: Option<usize>, x: &ComplexMatrix<f64>) -> MatrixEntry {
    let (rows, cols) = x.shape();
    let (re, im) = split((0..rows).flat_map(|i| (0..cols).map(move |j| x[(i, j)])));
    MatrixEntry {
        m,
        n,
        shape: [rows, cols],
        re,
        im,
    }
}

fn entry_matrix(e: &MatrixEntry, what: &str) -> Result<ComplexMatrix<f64>> {
    let [rows, cols] = e.shape;
    let v = join(&e.re, &e.im, rows * cols, what)?;
    Ok(ComplexMatrix::from_row_slice(rows, cols, &v))
}

fn check_index(i: usize, mm: usize, what: &str) -> Result<usize> {
    if i == 0 || i > mm {
        return Err(DcCpdError::Parse(format!(
            "{what}: index {i} outside 1..={mm}"
        )));
    }
    Ok(i - 1)
}

pub fn solution_to_file(sol: &DcCpdSolution<f64>) -> SolutionFile {
    let mm = sol.dataset_count();
    let a = sol
        .a
        .iter()
        .enumerate()
        .map(|(m, x)| matrix_entry(m + 1, None, x))
        .collect();
    let c = (0..mm)
        .flat_map(|m| (0..mm).map(move |n| (m, n)))
        .map(|(m, n)| matrix_entry(m + 1, Some(n + 1), sol.c(m, n)))
        .collect();
    SolutionFile {
        version: FORMAT_VERSION,
        m: mm,
        r: sol.rank(),
        a,
        c,
    }
}

pub fn solution_from_file(f: &SolutionFile) -> Result<DcCpdSolution<f64>> {
    let mm = f.m;
    if f.a.len() != mm || f.c.len() != mm * mm {
        return Err(DcCpdError::Parse(format!(
            "solution lists {} loading and {} third factors for M={mm}",
            f.a.len(),
            f.c.len()
        )));
    }
    let mut a = vec![None; mm];
    for e in &f.a {
        let m = check_index(e.m, mm, "loading matrix")?;
        a[m] = Some(entry_matrix(e, "loading matrix")?);
    }
    let mut c = vec![None; mm * mm];
    for e in &f.c {
        let m = check_index(e.m, mm, "third factor")?;
        let n = check_index(e.n.unwrap_or(0), mm, "third factor")?;
        c[m * mm + n] = Some(entry_matrix(e, "third factor")?);
    }
    let a = a
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| DcCpdError::Parse("duplicate loading matrix index".into()))?;
    let c = c
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| DcCpdError::Parse("duplicate third factor index".into()))?;
    let sol = DcCpdSolution::new(a, c).map_err(|e| DcCpdError::Parse(e.to_string()))?;
    if sol.rank() != f.r {
        return Err(DcCpdError::Parse(format!(
            "declared R={} but factors have {}",
            f.r,
            sol.rank()
        )));
    }
    Ok(sol)
}

pub fn problem_to_file(p: &DcCpdProblem<f64>, truth: Option<&DcCpdSolution<f64>>) -> TensorSetFile {
    let mm = p.dataset_count();
    let mut tensors = Vec::with_capacity(mm * mm);
    for m in 0..mm {
        for n in 0..mm {
            let t = p.tensor(m, n);
            let (i, j, k) = t.dims();
            let (re, im) = split(t.data().iter().copied());
            tensors.push(TensorEntry {
                m: m + 1,
                n: n + 1,
                shape: [i, j, k],
                re,
                im,
            });
        }
    }
    TensorSetFile {
        version: FORMAT_VERSION,
        m: mm,
        dims_n: p.dims_n().to_vec(),
        t: p.third_dim(),
        symmetric: p.is_symmetric(),
        tensors,
        truth: truth.map(solution_to_file),
    }
}

/// Parses a tensor-set file; the optional truth is returned alongside.
pub fn problem_from_file(
    f: &TensorSetFile,
) -> Result<(DcCpdProblem<f64>, Option<DcCpdSolution<f64>>)> {
    if f.version != FORMAT_VERSION {
        return Err(DcCpdError::Parse(format!(
            "unsupported format version {}",
            f.version
        )));
    }
    let mm = f.m;
    if f.dims_n.len() != mm || f.tensors.len() != mm * mm {
        return Err(DcCpdError::Parse(format!(
            "M={mm} needs {mm} dims and {} tensors; got {} and {}",
            mm * mm,
            f.dims_n.len(),
            f.tensors.len()
        )));
    }
    let mut grid = vec![None; mm * mm];
    for e in &f.tensors {
        let m = check_index(e.m, mm, "tensor")?;
        let n = check_index(e.n, mm, "tensor")?;
        let expect = [f.dims_n[m], f.dims_n[n], f.t];
        if e.shape != expect {
            return Err(DcCpdError::Parse(format!(
                "tensor ({}, {}) has shape {:?}, expected {:?}",
                e.m, e.n, e.shape, expect
            )));
        }
        let v = join(&e.re, &e.im, expect.iter().product(), "tensor")?;
        grid[m * mm + n] = Some(ComplexTensor3::new((expect[0], expect[1], expect[2]), v)?);
    }
    let tensors = grid
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| DcCpdError::Parse("duplicate tensor index".into()))?;
    let p = DcCpdProblem::new(f.dims_n.clone(), f.t, tensors, f.symmetric)?;
    let truth = f.truth.as_ref().map(solution_from_file).transpose()?;
    Ok((p, truth))
}

pub fn signals_to_file(sig: &MultiSetSignals<f64>) -> SignalFile {
    SignalFile {
        m: sig.dataset_count(),
        q: sig.samples(),
        dims_n: sig.dims_n(),
        datasets: sig
            .x
            .iter()
            .enumerate()
            .map(|(m, x)| {
                let e = matrix_entry(m + 1, None, x);
                DatasetEntry {
                    m: e.m,
                    re: e.re,
                    im: e.im,
                }
            })
            .collect(),
    }
}

pub fn signals_from_file(f: &SignalFile) -> Result<MultiSetSignals<f64>> {
    if f.dims_n.len() != f.m || f.datasets.len() != f.m {
        return Err(DcCpdError::Parse("dataset count disagrees with M".into()));
    }
    let mut x = vec![None; f.m];
    for d in &f.datasets {
        let m = check_index(d.m, f.m, "dataset")?;
        let v = join(&d.re, &d.im, f.dims_n[m] * f.q, "dataset")?;
        x[m] = Some(ComplexMatrix::from_row_slice(f.dims_n[m], f.q, &v));
    }
    let x = x
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| DcCpdError::Parse("duplicate dataset index".into()))?;
    MultiSetSignals::new(x)
}

pub fn to_json<S: Serialize>(value: &S) -> Result<String> {
    serde_json::to_string(value).map_err(|e| DcCpdError::Parse(e.to_string()))
}

pub fn from_json<D: DeserializeOwned>(text: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| DcCpdError::Parse(e.to_string()))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, to_json(value)?).map_err(|e| DcCpdError::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text =
        fs::read_to_string(path).map_err(|e| DcCpdError::Io(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{complex_gaussian_matrix, rng_from_seed};

    #[test]
    fn tensor_set_round_trip_is_bit_exact() {
        let sol = DcCpdSolution::<f64>::random_symmetric(&[2, 3], 4, 2, &mut rng_from_seed(1));
        let p = DcCpdProblem::from_solution(&sol, true).unwrap();
        let text = to_json(&problem_to_file(&p, Some(&sol))).unwrap();
        let (q, truth) = problem_from_file(&from_json(&text).unwrap()).unwrap();
        assert_eq!(q, p);
        assert_eq!(truth.unwrap(), sol);
    }

    #[test]
    fn awkward_doubles_survive() {
        let vals = [
            0.1,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            5e-324,
            -1.7976931348623157e308,
            2.0f64.sqrt(),
        ];
        let text = to_json(&vals.to_vec()).unwrap();
        let back: Vec<f64> = from_json(&text).unwrap();
        for (a, b) in vals.iter().zip(back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn matrices_are_row_major_and_one_based() {
        let a = ComplexMatrix::from_row_slice(
            2,
            2,
            &[1.0, 2.0, 3.0, 4.0].map(|x| Complex::new(x, 0.0)),
        );
        let c = ComplexMatrix::from_element(1, 2, Complex::new(0.0, 1.0));
        let sol = DcCpdSolution::new(vec![a], vec![c]).unwrap();
        let f = solution_to_file(&sol);
        assert_eq!(f.a[0].re, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.a[0].m, 1);
        assert_eq!(f.c[0].n, Some(1));
    }

    #[test]
    fn signals_round_trip() {
        let mut rng = rng_from_seed(2);
        let sig = MultiSetSignals::new(vec![
            complex_gaussian_matrix::<f64, _>(2, 5, &mut rng),
            complex_gaussian_matrix::<f64, _>(3, 5, &mut rng),
        ])
        .unwrap();
        let text = to_json(&signals_to_file(&sig)).unwrap();
        assert_eq!(signals_from_file(&from_json(&text).unwrap()).unwrap(), sig);
    }

    #[test]
    fn malformed_inputs_are_parse_errors() {
        assert!(matches!(
            from_json::<TensorSetFile>("{ not json"),
            Err(DcCpdError::Parse(_))
        ));
        let sol = DcCpdSolution::<f64>::random_symmetric(&[2], 2, 1, &mut rng_from_seed(3));
        let p = DcCpdProblem::from_solution(&sol, true).unwrap();
        let mut f = problem_to_file(&p, None);
        f.tensors[0].re.pop();
        assert!(matches!(problem_from_file(&f), Err(DcCpdError::Parse(_))));
        let mut f = problem_to_file(&p, None);
        f.tensors[0].m = 2;
        assert!(matches!(problem_from_file(&f), Err(DcCpdError::Parse(_))));
    }
}
