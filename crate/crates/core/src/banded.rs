//! Banded `L D L^H` factorization of Hermitian matrices without pivoting.
//!
//! Used as a shift-invert preconditioner and, through Sylvester's law of
//! inertia, to count eigenvalues of a pencil `(A, B)` below a shift.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i][i - bw..i]` in positions `0..bw`; unit diagonal implied.
    lower: Vec<Complex64>,
    diag: Vec<f64>,
}

impl BandedLdl {
    /// Factor `A - shift * B`.
    pub fn factor_shifted(a: &CsrMatrix, b: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.dim();
        assert_eq!(b.dim(), n);
        let bw = a.bandwidth().max(b.bandwidth());
        let mut lower = vec![Complex64::new(0.0, 0.0); n * bw];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j < i {
                    lower[i * bw + (j + bw - i)] += v;
                } else if j == i {
                    diag[i] += v.re;
                }
            }
            for (j, v) in b.row(i) {
                if j < i {
                    lower[i * bw + (j + bw - i)] -= shift * v;
                } else if j == i {
                    diag[i] -= shift * v.re;
                }
            }
        }
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
        // row-oriented elimination; `lower` holds A entries until overwritten by L
        let mut work = vec![Complex64::new(0.0, 0.0); bw];
        for i in 0..n {
            let first = i.saturating_sub(bw);
            for j in first..i {
                // work[j] = L_ij d_j
                let mut acc = lower[i * bw + (j + bw - i)];
                let k_first = first.max(j.saturating_sub(bw));
                for k in k_first..j {
                    acc -= work[k + bw - i] * lower[j * bw + (k + bw - j)].conj();
                }
                work[j + bw - i] = acc;
            }
            let mut d = diag[i];
            for j in first..i {
                let w = work[j + bw - i];
                let l = w / diag[j];
                d -= (w * l.conj()).re;
                lower[i * bw + (j + bw - i)] = l;
            }
            if d.abs() <= 1e-14 * scale || !d.is_finite() {
                return Err(Error::SingularShift { row: i });
            }
            diag[i] = d;
        }
        Ok(Self { n, bw, lower, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of negative pivots, equal to the number of eigenvalues below the shift.
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|&&d| d < 0.0).count()
    }

    /// Solve `(L D L^H) x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut acc = x[i];
            for j in first..i {
                acc -= self.lower[i * bw + (j + bw - i)] * x[j];
            }
            x[i] = acc;
        }
        for i in 0..n {
            x[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            let first = i.saturating_sub(bw);
            for j in first..i {
                x[j] -= self.lower[i * bw + (j + bw - i)].conj() * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn tridiagonal(n: usize, d: f64, off: Complex64) -> CsrMatrix {
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, Complex64::new(d, 0.0));
            if i + 1 < n {
                t.add(i, i + 1, off);
                t.add(i + 1, i, off.conj());
            }
        }
        t.build()
    }

    #[test]
    fn solves_hermitian_band_system() {
        let a = tridiagonal(50, 4.0, Complex64::new(1.0, 0.5));
        let id = CsrMatrix::identity(50);
        let f = BandedLdl::factor_shifted(&a, &id, 0.5).unwrap();
        let x_true: Vec<Complex64> = (0..50).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut rhs = vec![Complex64::new(0.0, 0.0); 50];
        a.mul_vec(&x_true, &mut rhs);
        for (r, x) in rhs.iter_mut().zip(&x_true) {
            *r -= 0.5 * x;
        }
        f.solve_in_place(&mut rhs);
        for (x, y) in rhs.iter().zip(&x_true) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn inertia_counts_eigenvalues_below_shift() {
        // 1D Dirichlet Laplacian stencil: eigenvalues 2 - 2 cos(j pi/(n+1))
        let n = 40;
        let a = tridiagonal(n, 2.0, Complex64::new(-1.0, 0.0));
        let id = CsrMatrix::identity(n);
        let exact: Vec<f64> = (1..=n).map(|j| 2.0 - 2.0 * (j as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos()).collect();
        for &shift in &[0.01, 0.5, 1.3, 2.7, 3.99] {
            let f = BandedLdl::factor_shifted(&a, &id, shift).unwrap();
            let below = exact.iter().filter(|&&e| e < shift).count();
            assert_eq!(f.negative_pivots(), below, "shift {shift}");
        }
    }
}
