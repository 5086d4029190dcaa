//! Minimal CSR matrix used for assembly, with conversions into faer for
//! factorization and eigensolves, and Matrix Market export.

use crate::error::{CutFemError, Result};
use std::io::Write;
use std::path::Path;

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets, summing duplicates. The merge is a stable sort
    /// by (row, col), so identical triplet streams give bit-identical sums.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut k = 0;
        while k < triplets.len() {
            let (i, j, _) = triplets[k];
            let mut sum = 0.0;
            while k < triplets.len() && triplets[k].0 == i && triplets[k].1 == j {
                sum += triplets[k].2;
                k += 1;
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(sum);
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Operator infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max absolute symmetry defect, `max |a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                defect = defect.max((v - self.get(*c, i)).abs());
            }
        }
        defect
    }

    /// Symmetric diagonal scaling `D A D`.
    pub fn scale_symmetric(&self, d: &[f64]) -> CsrMatrix {
        assert_eq!(d.len(), self.n_rows);
        assert_eq!(d.len(), self.n_cols);
        let mut out = self.clone();
        for i in 0..self.n_rows {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            for k in span {
                out.values[k] = d[i] * self.values[k] * d[self.col_idx[k]];
            }
        }
        out
    }

    pub fn to_faer_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] = *v;
            }
        }
        m
    }

    pub fn to_faer_sparse(&self) -> Result<faer::sparse::SparseColMat<usize, f64>> {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push(faer::sparse::Triplet::new(i, *c, *v));
            }
        }
        faer::sparse::SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &triplets)
            .map_err(|e| CutFemError::Internal(format!("sparse conversion failed: {e:?}")))
    }

    /// Writes the lower triangle in Matrix Market coordinate format
    /// (symmetric, 1-based). The matrix must be symmetric.
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(CutFemError::InvalidArgument(
                "matrix market symmetric export needs a square matrix".into(),
            ));
        }
        let scale = self.max_abs();
        if self.symmetry_defect() > 1e-12 * scale.max(1.0) {
            return Err(CutFemError::InvalidArgument(
                "matrix market symmetric export needs a symmetric matrix".into(),
            ));
        }
        let mut entries = Vec::new();
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c <= i {
                    entries.push((i, *c, *v));
                }
            }
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, entries.len())?;
        for (i, j, v) in entries {
            writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_merge_and_lookup() {
        let m = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 1.0), (2, 1, 4.0), (0, 0, 2.0), (1, 2, -1.0)],
        );
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 2), -1.0);
        assert_eq!(m.get(2, 1), 4.0);
        assert_eq!(m.get(2, 2), 0.0);
    }

    #[test]
    fn matvec_against_dense() {
        let m = CsrMatrix::from_triplets(
            2,
            3,
            vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, -3.0)],
        );
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 2];
        m.matvec(&x, &mut y);
        assert_eq!(y, [7.0, -6.0]);
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let sym = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 5.0), (1, 0, 5.0), (0, 0, 1.0)]);
        assert_eq!(sym.symmetry_defect(), 0.0);
        let asym = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 5.0), (1, 0, 4.0)]);
        assert_eq!(asym.symmetry_defect(), 1.0);
    }

    #[test]
    fn symmetric_scaling() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let s = m.scale_symmetric(&[1.0, 2.0]);
        assert_eq!(s.get(0, 0), 2.0);
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 2.0);
        assert_eq!(s.get(1, 1), 12.0);
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 1.5), (1, 0, -2.0), (0, 1, -2.0), (2, 2, 4.25)],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        m.write_matrix_market(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "%%MatrixMarket matrix coordinate real symmetric"
        );
        assert_eq!(lines.next().unwrap(), "3 3 3");
        let entries: Vec<&str> = lines.collect();
        assert!(entries.contains(&"1 1 1.5"));
        assert!(entries.contains(&"2 1 -2"));
        assert!(entries.contains(&"3 3 4.25"));
    }
}
