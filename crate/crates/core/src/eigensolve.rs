//! Lowest eigenpairs of sparse Hermitian pencils `A x = mu B x`.
//!
//! The driver is a block preconditioned conjugate-gradient eigeniteration
//! (LOBPCG) with Rayleigh–Ritz on `[X, W, P]`, per-pair convergence and soft
//! locking. Three preconditioners are available: Jacobi, symmetric
//! Gauss–Seidel and a shift-invert banded factorization of `A - sigma B`
//! whose shift is kept below the lowest eigenvalue by inertia checks.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandedLdl;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::strip::AssembledForms;

pub const DENSE_LIMIT: usize = 2000;

type Block = Vec<Vec<Complex64>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preconditioner {
    Jacobi,
    SymmetricGaussSeidel,
    /// `(A - shift B)^{-1}`; `None` picks the shift automatically.
    ShiftInvert { shift: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub count: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { count: 4, tol: 1e-8, max_iter: 500, seed: 0, preconditioner: Preconditioner::Jacobi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// `|A x - mu B x| / |x|_B` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: Vec<bool>,
    #[serde(skip)]
    pub vectors: Vec<Vec<Complex64>>,
}

impl SpectralResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// `|A x - mu B x| / |x|_B`, evaluated from scratch.
pub fn residual_norm(forms: &AssembledForms, mu: f64, x: &[Complex64]) -> f64 {
    let n = x.len();
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    let mut bx = vec![Complex64::new(0.0, 0.0); n];
    forms.a.mul_vec(x, &mut ax);
    forms.b.mul_vec(x, &mut bx);
    let r: f64 = ax.iter().zip(&bx).map(|(a, b)| (a - mu * b).norm_sqr()).sum::<f64>().sqrt();
    let xb: f64 = x.iter().zip(&bx).map(|(xi, b)| (xi.conj() * b).re).sum::<f64>().sqrt();
    r / xb
}

/// Number of eigenvalues of `(A, B)` strictly below `shift`.
pub fn count_below(forms: &AssembledForms, shift: f64) -> Result<usize> {
    Ok(BandedLdl::factor_shifted(&forms.a, &forms.b, shift)?.negative_pivots())
}

/// Full spectrum by Cholesky reduction and dense Hermitian eigensolve. Test oracle.
pub fn dense_oracle(forms: &AssembledForms) -> Result<Vec<f64>> {
    let n = forms.a.dim();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: n, limit: DENSE_LIMIT });
    }
    let a = forms.a.to_dense();
    let b = forms.b.to_dense();
    let chol = b.cholesky().ok_or(Error::IndefiniteMass)?;
    let l = chol.l();
    // C = L^{-1} A L^{-H}
    let y = l.solve_lower_triangular(&a).ok_or(Error::IndefiniteMass)?;
    let c = l.solve_lower_triangular(&y.adjoint()).ok_or(Error::IndefiniteMass)?;
    let c = hermitize(&c);
    let mut values: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

enum Applied {
    Jacobi(Vec<f64>),
    Gauss { a: CsrMatrix, diag: Vec<f64> },
    Shift { factor: BandedLdl, shift: f64 },
}

impl Applied {
    fn apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        match self {
            Applied::Jacobi(inv) => r.iter().zip(inv).map(|(x, d)| x * d).collect(),
            Applied::Gauss { a, diag } => symmetric_gauss_seidel(a, diag, r),
            Applied::Shift { factor, .. } => {
                let mut x = r.to_vec();
                factor.solve_in_place(&mut x);
                x
            }
        }
    }
}

fn symmetric_gauss_seidel(a: &CsrMatrix, diag: &[f64], r: &[Complex64]) -> Vec<Complex64> {
    // M = (D + L) D^{-1} (D + U); solve by forward then backward sweep
    let n = r.len();
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = r[i];
        for (j, v) in a.row(i) {
            if j < i {
                acc -= v * y[j];
            }
        }
        y[i] = acc / diag[i];
    }
    for i in 0..n {
        y[i] *= diag[i];
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for (j, v) in a.row(i) {
            if j > i {
                acc -= v * x[j];
            }
        }
        x[i] = acc / diag[i];
    }
    x
}

fn diag_floor(diag: &[f64]) -> Vec<f64> {
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
    diag.iter().map(|d| d.abs().max(1e-12 * scale)).collect()
}

/// Largest shift below the spectrum reachable by stepping down from `start`.
fn shift_below_spectrum(forms: &AssembledForms, start: f64) -> Result<(BandedLdl, f64)> {
    let mut shift = start;
    let mut step = 0.05 * start.abs().max(1.0);
    for _ in 0..80 {
        match BandedLdl::factor_shifted(&forms.a, &forms.b, shift) {
            Ok(f) if f.negative_pivots() == 0 => return Ok((f, shift)),
            Ok(_) | Err(Error::SingularShift { .. }) => {
                shift -= step;
                step *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidArgument("could not place a shift below the spectrum".into()))
}

fn build_preconditioner(forms: &AssembledForms, kind: Preconditioner) -> Result<Applied> {
    Ok(match kind {
        Preconditioner::Jacobi => Applied::Jacobi(diag_floor(&forms.a.diagonal()).iter().map(|d| 1.0 / d).collect()),
        Preconditioner::SymmetricGaussSeidel => Applied::Gauss { a: forms.a.clone(), diag: diag_floor(&forms.a.diagonal()) },
        Preconditioner::ShiftInvert { shift } => {
            let start = match shift {
                Some(s) => s,
                None => {
                    let da = forms.a.diagonal();
                    let db = forms.b.diagonal();
                    da.iter().zip(&db).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min)
                }
            };
            let (factor, shift) = shift_below_spectrum(forms, start)?;
            Applied::Shift { factor, shift }
        }
    })
}

fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn gram(x: &Block, y: &Block) -> DMatrix<Complex64> {
    let pairs: Vec<(usize, usize)> = (0..x.len()).flat_map(|i| (0..y.len()).map(move |j| (i, j))).collect();
    let vals: Vec<Complex64> = pairs.par_iter().map(|&(i, j)| dot(&x[i], &y[j])).collect();
    DMatrix::from_fn(x.len(), y.len(), |i, j| vals[i * y.len() + j])
}

/// Columns `sum_j cols[j] * coeffs[(j, i)]`.
fn combine(cols: &[&Vec<Complex64>], coeffs: &DMatrix<Complex64>) -> Block {
    let n = cols.first().map_or(0, |c| c.len());
    (0..coeffs.ncols())
        .into_par_iter()
        .map(|i| {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (j, col) in cols.iter().enumerate() {
                let c = coeffs[(j, i)];
                if c != Complex64::new(0.0, 0.0) {
                    for (o, v) in out.iter_mut().zip(col.iter()) {
                        *o += c * v;
                    }
                }
            }
            out
        })
        .collect()
}

fn apply_matrix(m: &CsrMatrix, cols: &Block) -> Block {
    cols.iter()
        .map(|c| {
            let mut y = vec![Complex64::new(0.0, 0.0); c.len()];
            m.mul_vec(c, &mut y);
            y
        })
        .collect()
}

fn sorted_eigen(h: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(hermitize(&h));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// A block of vectors with their images under `A` and `B`.
#[derive(Default)]
struct Triple {
    v: Block,
    av: Block,
    bv: Block,
}

impl Triple {
    fn len(&self) -> usize {
        self.v.len()
    }
}

/// Appends the columns of `cand` to `basis`, B-orthonormalized against everything already in it.
///
/// Two passes of modified Gram–Schmidt; a column whose B-norm collapses below
/// `1e-10` of its original size is dropped as linearly dependent. Columns that
/// lose most of their norm get `A v` and `B v` recomputed, since the updated
/// products would carry the cancellation error.
fn extend_orthonormal(forms: &AssembledForms, basis: &mut Triple, cand: Triple) {
    for ((mut v, mut av), mut bv) in cand.v.into_iter().zip(cand.av).zip(cand.bv) {
        let original = dot(&v, &bv).re.max(0.0).sqrt();
        if !(original > 0.0) || !original.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for j in 0..basis.len() {
                let c = dot(&basis.bv[j], &v);
                axpy(&mut v, -c, &basis.v[j]);
                axpy(&mut av, -c, &basis.av[j]);
                axpy(&mut bv, -c, &basis.bv[j]);
            }
        }
        let mut norm = dot(&v, &bv).re.max(0.0).sqrt();
        if norm <= 1e-10 * original {
            continue;
        }
        if norm < 1e-3 * original {
            forms.a.mul_vec(&v, &mut av);
            forms.b.mul_vec(&v, &mut bv);
            norm = dot(&v, &bv).re.max(0.0).sqrt();
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        for col in [&mut v, &mut av, &mut bv] {
            col.iter_mut().for_each(|z| *z *= inv);
        }
        basis.v.push(v);
        basis.av.push(av);
        basis.bv.push(bv);
    }
}

/// Rayleigh–Ritz on a B-orthonormal basis: lowest `k` Ritz values and coefficient columns.
fn rayleigh_ritz(basis: &Triple, k: usize) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    if basis.len() < k {
        return Err(Error::IndefiniteMass);
    }
    let (theta, y) = sorted_eigen(gram(&basis.v, &basis.av));
    Ok((theta[..k].to_vec(), y.columns(0, k).into_owned()))
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn random_block(n: usize, k: usize, seed: u64) -> Block {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
        .collect()
}

fn refs(b: &Block) -> Vec<&Vec<Complex64>> {
    b.iter().collect()
}

fn direct_small(forms: &AssembledForms, opts: &SolverOptions) -> Result<SpectralResult> {
    let a = forms.a.to_dense();
    let b = forms.b.to_dense();
    let chol = b.clone().cholesky().ok_or(Error::IndefiniteMass)?;
    let l = chol.l();
    let y = l.solve_lower_triangular(&a).ok_or(Error::IndefiniteMass)?;
    let c = l.solve_lower_triangular(&y.adjoint()).ok_or(Error::IndefiniteMass)?;
    let (values, vecs) = sorted_eigen(c);
    let lh = l.adjoint();
    let mut result = SpectralResult { eigenvalues: Vec::new(), residuals: Vec::new(), iterations: 0, converged: Vec::new(), vectors: Vec::new() };
    for i in 0..opts.count {
        let x = lh.solve_upper_triangular(&vecs.column(i).into_owned()).ok_or(Error::IndefiniteMass)?;
        let x: Vec<Complex64> = x.iter().copied().collect();
        let r = residual_norm(forms, values[i], &x);
        result.eigenvalues.push(values[i]);
        result.residuals.push(r);
        result.converged.push(r <= opts.tol);
        result.vectors.push(x);
    }
    finish(result)
}

fn finish(result: SpectralResult) -> Result<SpectralResult> {
    if result.all_converged() {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

/// Lowest `opts.count` eigenpairs of `(A, B)`.
pub fn lowest_pairs(forms: &AssembledForms, opts: &SolverOptions) -> Result<SpectralResult> {
    let n = forms.a.dim();
    if opts.count == 0 || opts.count > n {
        return Err(Error::InvalidArgument(format!("requested {} eigenpairs of a {n}-dimensional pencil", opts.count)));
    }
    if forms.b.diagonal().iter().any(|&d| !(d > 0.0)) {
        return Err(Error::IndefiniteMass);
    }
    let k = (opts.count + 2).min(n);
    if n <= 3 * k {
        return direct_small(forms, opts);
    }
    let mut prec = build_preconditioner(forms, opts.preconditioner)?;

    let start = random_block(n, k, opts.seed);
    let mut init = Triple::default();
    let (a_start, b_start) = (apply_matrix(&forms.a, &start), apply_matrix(&forms.b, &start));
    extend_orthonormal(forms, &mut init, Triple { v: start, av: a_start, bv: b_start });
    let (mut theta, c) = rayleigh_ritz(&init, k)?;
    let mut x = Triple { v: combine(&refs(&init.v), &c), av: combine(&refs(&init.av), &c), bv: combine(&refs(&init.bv), &c) };
    let mut p = Triple::default();

    let mut residuals = vec![f64::INFINITY; k];
    let mut iterations = 0;
    let mut fresh = false;
    for iter in 1..=opts.max_iter {
        iterations = iter;
        let r: Block = (0..k)
            .map(|j| x.av[j].iter().zip(&x.bv[j]).map(|(a, b)| a - theta[j] * b).collect())
            .collect();
        for j in 0..k {
            let xb = dot(&x.v[j], &x.bv[j]).re.max(f64::MIN_POSITIVE).sqrt();
            residuals[j] = r[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / xb;
        }
        if residuals[..opts.count].iter().all(|&res| res <= opts.tol) {
            if fresh {
                break;
            }
            // confirm against products recomputed from scratch
            x.av = apply_matrix(&forms.a, &x.v);
            x.bv = apply_matrix(&forms.b, &x.v);
            fresh = true;
            continue;
        }
        fresh = false;
        if let Applied::Shift { factor, shift } = &mut prec {
            if iter % 4 == 0 {
                let spread = theta[k - 1] - theta[0];
                if theta[0] - *shift > 0.02 * spread {
                    for frac in [0.9, 0.5] {
                        let candidate = *shift + frac * (theta[0] - *shift);
                        if let Ok(f) = BandedLdl::factor_shifted(&forms.a, &forms.b, candidate) {
                            if f.negative_pivots() == 0 {
                                *factor = f;
                                *shift = candidate;
                                break;
                            }
                        }
                    }
                }
            }
        }
        let active: Vec<usize> = (0..k).filter(|&j| residuals[j] > opts.tol).collect();
        let w: Block = active.par_iter().map(|&j| prec.apply(&r[j])).collect();
        let (aw, bw) = (apply_matrix(&forms.a, &w), apply_matrix(&forms.b, &w));

        let mut basis = Triple::default();
        extend_orthonormal(forms, &mut basis, x);
        let lead = basis.len();
        extend_orthonormal(forms, &mut basis, Triple { v: w, av: aw, bv: bw });
        extend_orthonormal(forms, &mut basis, p);
        let (new_theta, coeffs) = rayleigh_ritz(&basis, k)?;
        let used = basis.len();
        // implicit search directions: the part of the new X outside the old X
        let tail = coeffs.rows(lead, used - lead).into_owned();
        p = Triple {
            v: combine(&refs(&basis.v)[lead..], &tail),
            av: combine(&refs(&basis.av)[lead..], &tail),
            bv: combine(&refs(&basis.bv)[lead..], &tail),
        };
        let new_v = combine(&refs(&basis.v), &coeffs);
        x = if iter % 10 == 0 {
            let (av, bv) = (apply_matrix(&forms.a, &new_v), apply_matrix(&forms.b, &new_v));
            Triple { v: new_v, av, bv }
        } else {
            Triple { v: new_v, av: combine(&refs(&basis.av), &coeffs), bv: combine(&refs(&basis.bv), &coeffs) }
        };
        theta = new_theta;
    }

    let mut result = SpectralResult { eigenvalues: Vec::new(), residuals: Vec::new(), iterations, converged: Vec::new(), vectors: Vec::new() };
    for j in 0..opts.count {
        let res = residual_norm(forms, theta[j], &x.v[j]);
        result.eigenvalues.push(theta[j]);
        result.residuals.push(res);
        result.converged.push(res <= opts.tol);
        result.vectors.push(x.v[j].clone());
    }
    finish(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;
    use std::f64::consts::PI;

    fn diag_forms(d: &[f64]) -> AssembledForms {
        let mut t = TripletBuilder::new(d.len());
        for (i, &v) in d.iter().enumerate() {
            t.add(i, i, Complex64::new(v, 0.0));
        }
        AssembledForms::from_matrices(t.build(), CsrMatrix::identity(d.len()))
    }

    /// P1 Dirichlet Laplacian on (-1, 1) with `cells` cells: stiffness and consistent mass.
    fn laplacian_1d(cells: usize) -> AssembledForms {
        let n = cells - 1;
        let h = 2.0 / cells as f64;
        let mut a = TripletBuilder::new(n);
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            a.add(i, i, Complex64::new(2.0 / h, 0.0));
            b.add(i, i, Complex64::new(4.0 * h / 6.0, 0.0));
            if i + 1 < n {
                for (r, c) in [(i, i + 1), (i + 1, i)] {
                    a.add(r, c, Complex64::new(-1.0 / h, 0.0));
                    b.add(r, c, Complex64::new(h / 6.0, 0.0));
                }
            }
        }
        AssembledForms::from_matrices(a.build(), b.build())
    }

    #[test]
    fn diagonal_problem() {
        let forms = diag_forms(&[3.0, 1.0, 2.0]);
        let res = lowest_pairs(&forms, &SolverOptions { count: 2, ..Default::default() }).unwrap();
        assert!((res.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((res.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_laplacian_matches_discrete_closed_form() {
        // P1 with consistent mass: mu_j = (6/h^2) (1 - cos(j pi h/2)) / (2 + cos(j pi h/2))
        for cells in [32usize, 64, 128] {
            let forms = laplacian_1d(cells);
            let h = 2.0 / cells as f64;
            let c = (PI * h / 2.0).cos();
            let exact = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
            for prec in [Preconditioner::Jacobi, Preconditioner::SymmetricGaussSeidel, Preconditioner::ShiftInvert { shift: None }] {
                let opts = SolverOptions { count: 1, tol: 1e-9, max_iter: 3000, seed: 3, preconditioner: prec };
                let res = lowest_pairs(&forms, &opts).unwrap();
                assert!((res.eigenvalues[0] - exact).abs() < 1e-9, "cells={cells} {prec:?}");
                assert!((res.eigenvalues[0] - PI * PI / 4.0).abs() < 2.0 * h * h);
            }
        }
    }

    #[test]
    fn dense_oracle_small_cases() {
        let forms = diag_forms(&[2.0, 3.0]);
        assert_eq!(dense_oracle(&forms).unwrap(), vec![2.0, 3.0]);
        let big = diag_forms(&vec![1.0; DENSE_LIMIT + 1]);
        assert!(matches!(dense_oracle(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn inertia_matches_dense_spectrum() {
        let forms = laplacian_1d(40);
        let all = dense_oracle(&forms).unwrap();
        for shift in [1.0, 20.0, 100.0, 1000.0] {
            let expected = all.iter().filter(|&&v| v < shift).count();
            assert_eq!(count_below(&forms, shift).unwrap(), expected);
        }
    }

    #[test]
    fn rejects_indefinite_mass() {
        let mut t = TripletBuilder::new(12);
        for i in 0..12 {
            t.add(i, i, Complex64::new(if i == 5 { -1.0 } else { 1.0 }, 0.0));
        }
        let forms = AssembledForms::from_matrices(CsrMatrix::identity(12), t.build());
        assert!(matches!(lowest_pairs(&forms, &SolverOptions::default()), Err(Error::IndefiniteMass)));
    }

    #[test]
    fn reports_non_convergence_with_partial_result() {
        let forms = laplacian_1d(256);
        let opts = SolverOptions { count: 2, tol: 1e-14, max_iter: 2, seed: 1, preconditioner: Preconditioner::Jacobi };
        match lowest_pairs(&forms, &opts) {
            Err(Error::NotConverged(partial)) => {
                assert_eq!(partial.eigenvalues.len(), 2);
                assert_eq!(partial.iterations, 2);
                assert!(!partial.all_converged());
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
