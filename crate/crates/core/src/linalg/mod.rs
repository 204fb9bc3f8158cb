//! Compressed sparse row matrices and a direct solver.

mod lu;
mod ordering;

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use lu::{LuFactors, PIVOT_THRESHOLD, STRICT_PIVOT_THRESHOLD};
pub use ordering::{nested_dissection, reverse_cuthill_mckee, Ordering};

/// Square matrix in compressed-row form with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator. Duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Triplets {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn extend(&mut self, other: &Triplets) {
        self.entries.extend_from_slice(&other.entries);
    }

    pub fn to_csr(&self) -> Result<SparseMatrix> {
        SparseMatrix::from_triplets(self.n, &self.entries)
    }

    /// Dense `n x n` accumulation, for tests and small debugging cases.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for &(i, j, v) in &self.entries {
            d[i][j] += v;
        }
        d
    }
}

impl SparseMatrix {
    /// Sums duplicate entries; explicit zeros are kept in the pattern.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in triplets {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n });
            }
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            for &(j, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension");
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            n: self.n,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` over the index block `range x range`.
    pub fn asymmetry(&self, range: std::ops::Range<usize>) -> f64 {
        let mut worst = 0.0f64;
        for i in range.clone() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if range.contains(&j) {
                    worst = worst.max((v - self.get(j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "%%MatrixMarket matrix coordinate real general");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_matrix_market().as_bytes())?;
        Ok(())
    }
}

/// Matrix and right-hand side of one linear solve.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != matrix.dim() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side of length {} for a {}x{} matrix",
                rhs.len(),
                matrix.dim(),
                matrix.dim()
            )));
        }
        Ok(LinearSystem { matrix, rhs })
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        solve_with(&self.matrix, &self.rhs, Ordering::default())
    }

    /// `||A x - b||_2 / ||b||_2` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        relative_residual(&self.matrix, x, &self.rhs)
    }
}

pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = a.matvec(x);
    let num = r.iter().zip(b).map(|(ri, bi)| (ri - bi).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

pub fn solve(sys: &LinearSystem) -> Result<Vec<f64>> {
    sys.solve()
}

/// Residual above which a solve is repeated with strict pivoting.
const ACCEPT_RESIDUAL: f64 = 1e-10;

/// LU solve with up to two steps of iterative refinement. Factors first with
/// the relaxed diagonal preference; if refinement does not bring the residual
/// below `1e-10`, refactors with [`STRICT_PIVOT_THRESHOLD`].
pub fn solve_with(a: &SparseMatrix, b: &[f64], ordering: Ordering) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side of length {} for dimension {}",
            b.len(),
            a.dim()
        )));
    }
    let relaxed = LuFactors::factor(a, ordering).and_then(|lu| refined_solve(a, b, &lu));
    match relaxed {
        Ok(x) if relative_residual(a, &x, b) <= ACCEPT_RESIDUAL => Ok(x),
        _ => {
            let lu = LuFactors::factor_with_threshold(a, ordering, STRICT_PIVOT_THRESHOLD)?;
            refined_solve(a, b, &lu)
        }
    }
}

fn refined_solve(a: &SparseMatrix, b: &[f64], lu: &LuFactors) -> Result<Vec<f64>> {
    let mut x = lu.solve(b);
    for _ in 0..2 {
        if relative_residual(a, &x, b) <= 1e-13 {
            break;
        }
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { pivot: a.dim() });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
        assert!(matches!(
            SparseMatrix::from_triplets(2, &[(2, 0, 1.0)]),
            Err(Error::IndexOutOfRange { row: 2, col: 0, n: 2 })
        ));
    }

    #[test]
    fn identity_and_diagonal_solves() {
        let id = SparseMatrix::identity(5);
        let x = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(id.matvec(&x), x.to_vec());
        let sys = LinearSystem::new(id, x.to_vec()).unwrap();
        assert_eq!(sys.solve().unwrap(), x.to_vec());
        let d = SparseMatrix::from_triplets(2, &[(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let sys = LinearSystem::new(d, vec![2.0, 8.0]).unwrap();
        assert_eq!(sys.solve().unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn transpose_and_market_export() {
        let m = SparseMatrix::from_triplets(3, &[(0, 1, 2.0), (2, 0, -1.0), (1, 1, 5.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 2.0);
        assert_eq!(t.get(0, 2), -1.0);
        assert_eq!(t.transpose(), m);
        let mm = m.to_matrix_market();
        assert!(mm.starts_with("%%MatrixMarket matrix coordinate real general\n3 3 3\n"));
        assert!(mm.contains("1 2 2e0"));
    }
}
