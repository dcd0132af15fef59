//! Spectrum of the transverse Dirac operator `T(k, m) = -i sigma_2 d/dt + k sigma_1 + m sigma_3`
//! on (-1, 1) with the infinite-mass condition `u_2(+-1) = -+u_1(+-1)`.
//!
//! Eigenvalues are `+-sqrt(m^2 + k^2 + E_p(m))`, where `E_p(m)` is the unique
//! root of the secular function `m sin(2 sqrt E) + sqrt E cos(2 sqrt E)` in
//! `[(2p-1)^2 pi^2/16, p^2 pi^2/4)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{self, Preconditioner, SolverOptions};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::sparse::TripletBuilder;
use crate::strip::{AssembledForms, DofMap, MassShift};

pub const DEFAULT_ROOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseRoot {
    pub p: usize,
    pub mass: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub bracket: [f64; 2],
    pub residual: f64,
}

/// `mass sin(2 sqrt E) + sqrt E cos(2 sqrt E)`.
pub fn secular(mass: f64, energy: f64) -> f64 {
    let r = energy.sqrt();
    mass * (2.0 * r).sin() + r * (2.0 * r).cos()
}

/// Half-open bracket `[(2p-1)^2 pi^2/16, p^2 pi^2/4)` containing `E_p`.
pub fn bracket(p: usize) -> [f64; 2] {
    let q = p as f64;
    [(2.0 * q - 1.0).powi(2) * PI * PI / 16.0, q * q * PI * PI / 4.0]
}

/// `E_p(mass)` by safeguarded Newton iteration in `x = 2 sqrt E`.
///
/// In `x` the root solves `f(x) = mass sin x + (x/2) cos x = 0` on
/// `((2p-1) pi/2, p pi)`, where `f` is smooth and changes sign exactly once.
/// Working with `f` instead of `tan x + x/(2 mass)` keeps the iteration away
/// from the poles of the tangent.
pub fn solve_root(mass: f64, p: usize, tol: f64) -> Result<TransverseRoot> {
    if p == 0 {
        return Err(Error::InvalidArgument("mode index p starts at 1".into()));
    }
    if !(mass >= 0.0) || !mass.is_finite() {
        return Err(Error::InvalidArgument(format!("mass must be nonnegative and finite, got {mass}")));
    }
    if !(tol >= 1e-14) {
        return Err(Error::InvalidArgument(format!("root tolerance {tol} below 1e-14")));
    }
    let br = bracket(p);
    if mass == 0.0 {
        return Ok(TransverseRoot { p, mass, energy: br[0], bracket: br, residual: secular(0.0, br[0]).abs() });
    }
    let f = |x: f64| mass * x.sin() + 0.5 * x * x.cos();
    let df = |x: f64| (mass + 0.5) * x.cos() - 0.5 * x * x.sin();
    let (mut lo, mut hi) = ((2.0 * p as f64 - 1.0) * PI / 2.0, p as f64 * PI);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        hi = lo;
    } else if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo: br[0], hi: br[1] });
    }
    let rising = f_hi > f_lo;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        if hi - lo <= tol * hi {
            break;
        }
        let fx = f(x);
        if fx == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / df(x);
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    // a few clamped Newton steps polish the root to rounding level
    for _ in 0..3 {
        let next = x - f(x) / df(x);
        if next > lo && next < hi {
            x = next;
        }
    }
    let best = [x, 0.5 * (lo + hi), lo, hi]
        .into_iter()
        .min_by(|a, b| f(*a).abs().total_cmp(&f(*b).abs()))
        .unwrap_or(x);
    let mut energy = 0.25 * best * best;
    if energy <= br[0] {
        energy = f64::from_bits(br[0].to_bits() + 1);
    }
    if energy >= br[1] {
        energy = f64::from_bits(br[1].to_bits() - 1);
    }
    Ok(TransverseRoot { p, mass, energy, bracket: br, residual: secular(mass, energy).abs() })
}

pub fn first_energy(mass: f64) -> Result<f64> {
    solve_root(mass, 1, DEFAULT_ROOT_TOL).map(|r| r.energy)
}

/// `pi^2/4 - E_1(mass)` without cancellation.
///
/// With `2 sqrt E_1 = pi - y` the root solves `mass sin y = ((pi - y)/2) cos y` on `(0, pi/2)`,
/// and the deficit is `y (2 pi - y)/4`, accurate even when `E_1` is within rounding of `pi^2/4`.
pub fn edge_deficit(mass: f64) -> Result<f64> {
    if !(mass >= 0.0) || !mass.is_finite() {
        return Err(Error::InvalidArgument(format!("mass must be nonnegative and finite, got {mass}")));
    }
    let g = |y: f64| mass * y.sin() - 0.5 * (PI - y) * y.cos();
    let dg = |y: f64| (mass + 0.5) * y.cos() + 0.5 * (PI - y) * y.sin();
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    let mut y = if mass > 1.0 { PI / (2.0 * mass + 1.0) } else { PI / 4.0 };
    for _ in 0..200 {
        let gy = g(y);
        if gy == 0.0 {
            break;
        }
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let next = y - gy / dg(y);
        let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if (next - y).abs() <= 1e-16 * y {
            y = next;
            break;
        }
        y = next;
    }
    Ok(0.25 * y * (2.0 * PI - y))
}

/// `|E_1(m) - pi^2/16 - m| / m^2`.
pub fn small_mass_check(mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass <= 1e-2) {
        return Err(Error::InvalidArgument(format!("small-mass check needs 0 < m <= 1e-2, got {mass}")));
    }
    let e1 = first_energy(mass)?;
    Ok((e1 - PI * PI / 16.0 - mass).abs() / (mass * mass))
}

/// `|E_1(m) - pi^2/4 + pi^2/(4m)| m^2`.
pub fn large_mass_check(mass: f64) -> Result<f64> {
    if !(mass >= 1e2) || !mass.is_finite() {
        return Err(Error::InvalidArgument(format!("large-mass check needs m >= 100, got {mass}")));
    }
    let e1 = first_energy(mass)?;
    Ok((e1 - PI * PI / 4.0 + PI * PI / (4.0 * mass)).abs() * mass * mass)
}

/// Band `p` of the straight strip at wavenumber `k`: `(-lambda, +lambda)`.
pub fn dispersion(k: f64, mass: f64, p: usize) -> Result<(f64, f64)> {
    let e = solve_root(mass, p, DEFAULT_ROOT_TOL)?.energy;
    let plus = (mass * mass + k * k + e).sqrt();
    Ok((-plus, plus))
}

/// Positive threshold `sqrt(E_1(m eps)/eps^2 + m^2)` of the essential spectrum.
pub fn essential_edge(epsilon: f64, m: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveWidth(epsilon));
    }
    let e1 = first_energy(m * epsilon)?;
    Ok((e1 / (epsilon * epsilon) + m * m).sqrt())
}

/// Bottom of the essential spectrum of the mass-shifted square, `E_1(m eps) / eps^2`.
pub fn shifted_square_edge(epsilon: f64, m: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveWidth(epsilon));
    }
    Ok(first_energy(m * epsilon)? / (epsilon * epsilon))
}

/// Normalized eigenfunction of `T(k, mass)`:
/// `u_1 = alpha cos(sqrt E (t+1)) + beta sin(sqrt E (t+1))`, with `u_2` fixed by the first-order system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMode {
    pub lambda: f64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub mass: f64,
    pub k: f64,
    pub energy: f64,
}

impl TransverseMode {
    /// Mode of band `p` with eigenvalue of sign `positive`.
    pub fn new(k: f64, mass: f64, p: usize, positive: bool) -> Result<Self> {
        let energy = solve_root(mass, p, DEFAULT_ROOT_TOL)?.energy;
        let size = (mass * mass + k * k + energy).sqrt();
        let lambda = if positive { size } else { -size };
        let root = energy.sqrt();
        let mut mode = Self {
            lambda,
            alpha: Complex64::new(root, 0.0),
            beta: Complex64::new(mass + lambda - k, 0.0),
            mass,
            k,
            energy,
        };
        let (nodes, weights) = quadrature::gauss_legendre(64);
        let norm2: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| {
                let [a, b] = mode.eval(t);
                w * (a.norm_sqr() + b.norm_sqr())
            })
            .sum();
        let scale = 1.0 / norm2.sqrt();
        mode.alpha *= scale;
        mode.beta *= scale;
        Ok(mode)
    }

    pub fn eval(&self, t: f64) -> [Complex64; 2] {
        let r = self.energy.sqrt();
        let (sin, cos) = (r * (t + 1.0)).sin_cos();
        let u1 = self.alpha * cos + self.beta * sin;
        let u2 = (cos * (self.k * self.alpha + r * self.beta) + sin * (self.k * self.beta - r * self.alpha))
            / (self.lambda + self.mass);
        [u1, u2]
    }

    pub fn derivative(&self, t: f64) -> [Complex64; 2] {
        let r = self.energy.sqrt();
        let (sin, cos) = (r * (t + 1.0)).sin_cos();
        let d1 = r * (-self.alpha * sin + self.beta * cos);
        let d2 = r * (-sin * (self.k * self.alpha + r * self.beta) + cos * (self.k * self.beta - r * self.alpha))
            / (self.lambda + self.mass);
        [d1, d2]
    }
}

/// Quadratic form `|u'|^2 + (mass^2 + k^2)|u|^2 + mass (|u(1)|^2 + |u(-1)|^2)` of `T(k, mass)^2`
/// on a uniform P1 grid with `intervals` cells, boundary components `u_2` eliminated.
///
/// Degrees of freedom are ordered node by node, `u_1` before `u_2`.
pub fn transverse_forms(k: f64, mass: f64, intervals: usize) -> Result<AssembledForms> {
    transverse_forms_with(mass * mass + k * k, mass, intervals, MassShift::None)
}

/// Same form with `mass^2` removed and `k = 0`: the transverse part of the strip form, in units of `eps^-2`.
pub fn shifted_transverse_forms(mass: f64, intervals: usize) -> Result<AssembledForms> {
    transverse_forms_with(0.0, mass, intervals, MassShift::SubtractedSquare { m: mass })
}

/// Bottom of the spectrum of the straight strip on a grid with `n_t` transverse nodes,
/// the discrete counterpart of [`shifted_square_edge`].
pub fn discrete_shifted_edge(epsilon: f64, m: f64, n_t: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveWidth(epsilon));
    }
    let forms = shifted_transverse_forms(m * epsilon, n_t.saturating_sub(1))?;
    Ok(eigensolve::dense_oracle(&forms)?[0] / (epsilon * epsilon))
}

fn transverse_forms_with(potential: f64, mass: f64, intervals: usize, shift: MassShift) -> Result<AssembledForms> {
    if intervals < 2 {
        return Err(Error::InvalidArgument("transverse grid needs at least two cells".into()));
    }
    let map = DofMap::transverse(intervals + 1);
    let n = map.n_dofs();
    let h = 2.0 / intervals as f64;
    let mut a = TripletBuilder::new(n);
    let mut b = TripletBuilder::new(n);
    let stiff = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
    let mass_local = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    for cell in 0..intervals {
        for comp in 0..2 {
            for (la, &na) in [cell, cell + 1].iter().enumerate() {
                for (lb, &nb) in [cell, cell + 1].iter().enumerate() {
                    let kab = stiff[la][lb] + potential * mass_local[la][lb];
                    let mab = mass_local[la][lb];
                    map.scatter(na, comp, nb, comp, kab, &mut a);
                    map.scatter(na, comp, nb, comp, mab, &mut b);
                }
            }
        }
    }
    for node in [0, intervals] {
        for comp in 0..2 {
            map.scatter(node, comp, node, comp, mass, &mut a);
        }
    }
    Ok(AssembledForms::new(a.build(), b.build(), map, shift))
}

/// Lowest eight eigenvalues `mu` of the discretized `T(k, mass)^2`; `+-sqrt(mu)` approximate its spectrum.
pub fn transverse_fem_oracle(k: f64, mass: f64, n: usize) -> Result<Vec<f64>> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!("transverse oracle needs n >= 16 cells, got {n}")));
    }
    let forms = transverse_forms(k, mass, n)?;
    let scale = mass * mass + k * k + PI * PI / 16.0;
    let opts = SolverOptions {
        count: 8,
        tol: 1e-9 * scale,
        max_iter: 500,
        seed: 0x7a11,
        preconditioner: Preconditioner::ShiftInvert { shift: Some(mass * mass + k * k) },
    };
    Ok(eigensolve::lowest_pairs(&forms, &opts)?.eigenvalues)
}
