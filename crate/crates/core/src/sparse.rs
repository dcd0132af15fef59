//! Compressed-row Hermitian matrices and a Hermitian triplet accumulator.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Collects contributions of a Hermitian matrix.
///
/// Callers add the full matrix (both triangles). Only entries with `row <= col`
/// are kept; the lower triangle is rebuilt by conjugation in [`TripletBuilder::build`],
/// so the result is Hermitian bit for bit. Duplicates are summed in insertion order.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(u32, u32, Complex64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        assert!(n < u32::MAX as usize, "matrix dimension exceeds u32 indexing");
        Self { n, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.n && col < self.n);
        if row <= col {
            self.entries.push((row as u32, col as u32, value));
        }
    }

    pub fn append(&mut self, mut other: TripletBuilder) {
        assert_eq!(self.n, other.n);
        self.entries.append(&mut other.entries);
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut upper: Vec<(u32, u32, Complex64)> = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            match upper.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => upper.push((r, c, v)),
            }
        }
        let mut per_row = vec![0usize; self.n];
        for &(r, c, _) in &upper {
            per_row[r as usize] += 1;
            if r != c {
                per_row[c as usize] += 1;
            }
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        for i in 0..self.n {
            row_ptr[i + 1] = row_ptr[i] + per_row[i];
        }
        let nnz = row_ptr[self.n];
        let mut col_idx = vec![0u32; nnz];
        let mut values = vec![Complex64::new(0.0, 0.0); nnz];
        let mut fill = row_ptr.clone();
        // lower-triangle entries of row c come from column c of the upper part,
        // visited in increasing row order, so each row ends up sorted
        let mut lower: Vec<Vec<(u32, Complex64)>> = vec![Vec::new(); self.n];
        for &(r, c, v) in &upper {
            if r != c {
                lower[c as usize].push((r, v.conj()));
            }
        }
        let mut upper_iter = upper.into_iter().peekable();
        for i in 0..self.n {
            for &(c, v) in &lower[i] {
                col_idx[fill[i]] = c;
                values[fill[i]] = v;
                fill[i] += 1;
            }
            while let Some(&(r, c, v)) = upper_iter.peek() {
                if r as usize != i {
                    break;
                }
                col_idx[fill[i]] = c;
                values[fill[i]] = if r == c { Complex64::new(v.re, 0.0) } else { v };
                fill[i] += 1;
                upper_iter.next();
            }
        }
        CsrMatrix { n: self.n, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != Complex64::new(0.0, 0.0) || i == j {
                    b.add(i, j, m[(i, j)]);
                }
            }
        }
        b.build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, Complex64::new(1.0, 0.0));
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().map(|&c| c as usize).zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&(j as u32)) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).re).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0)
    }

    /// `y = A x`, rows computed independently so the result does not depend on the thread count.
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_chunks_mut(1024).enumerate().for_each(|(chunk, out)| {
            let base = chunk * 1024;
            for (k, yi) in out.iter_mut().enumerate() {
                let i = base + k;
                let mut acc = Complex64::new(0.0, 0.0);
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.values[p] * x[self.col_idx[p] as usize];
                }
                *yi = acc;
            }
        });
    }

    /// `x^H A x`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.mul_vec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (v - self.get(j, i).conj()).norm()))
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Matrix Market coordinate format, `complex hermitian`, lower triangle, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let lower: Vec<(usize, usize, Complex64)> =
            (0..self.n).flat_map(|i| self.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v))).collect();
        let mut out = String::with_capacity(lower.len() * 60 + 128);
        out.push_str("%%MatrixMarket matrix coordinate complex hermitian\n");
        let _ = writeln!(out, "{} {} {}", self.n, self.n, lower.len());
        for (i, j, v) in lower {
            let _ = writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im);
        }
        out
    }

    pub fn write_matrix_market(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_matrix_market().as_bytes())?;
        f.flush()
    }
}
