//! Thin-width effective Dirac model, mode coupling coefficients, and the
//! Dirichlet Laplacian reached in the large-mass limit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{lowest_pairs, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::TubeGeometry;
use crate::strip::{assemble_on, assemble_square_form, AssembledForms, DofMap, FormKind, StripGrid};

/// `m_e = 2m/pi`.
pub fn effective_mass(m: f64) -> f64 {
    2.0 * m / PI
}

/// `m <sigma_3 u_k, u_k>` for the `k`-th massless transverse mode: zero for even `k`, `2m/(k pi)` for odd `k`.
pub fn mode_effective_mass(m: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("mode index k starts at 1".into()));
    }
    Ok(if k % 2 == 0 { 0.0 } else { 2.0 * m / (k as f64 * PI) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub k: usize,
    pub a_k: f64,
    pub b_k: f64,
}

fn sin2_over(j: usize) -> f64 {
    let x = (PI * j as f64 / 4.0).sin();
    4.0 / PI * x * x / j as f64
}

pub fn coupling(k: usize) -> Result<ModeCoefficients> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("coupling coefficients need k >= 2, got {k}")));
    }
    Ok(ModeCoefficients { k, a_k: sin2_over(k + 1), b_k: sin2_over(k - 1) })
}

/// `sum_{k=2}^{max_k} a_k^2`.
pub fn coupling_square_sum(max_k: usize) -> f64 {
    (2..=max_k).map(|k| sin2_over(k + 1).powi(2)).sum()
}

/// `-i sigma_1 d/ds + m_e sigma_3` on the line; only its spectral edges are represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDirac {
    pub m_e: f64,
}

impl EffectiveDirac {
    pub fn from_mass(m: f64) -> Self {
        Self { m_e: effective_mass(m) }
    }

    /// Positive band `sqrt(p^2 + m_e^2)` at longitudinal momentum `p`.
    pub fn band(&self, p: f64) -> f64 {
        p.hypot(self.m_e)
    }
}

/// Straightened Dirichlet Laplacian on the same grid and node ordering as the strip form.
pub fn assemble_dirichlet_form(geom: &TubeGeometry, grid: &StripGrid) -> Result<AssembledForms> {
    assemble_on(geom, grid, DofMap::dirichlet(grid), FormKind::Dirichlet)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub m: f64,
    pub mu_q_m: f64,
    pub mu_q_inf: f64,
    pub gap: f64,
}

impl GapRow {
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.mu_q_inf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    pub rows: Vec<GapRow>,
    /// `mu_1(q_m) <= mu_1(q_inf)` up to the solver tolerance on every row.
    pub below_dirichlet: bool,
    pub nondecreasing: bool,
    pub gap_decreasing: bool,
}

/// Lowest eigenvalue of the shifted square form against the Dirichlet value, for each mass.
pub fn large_mass_gap(geom: &TubeGeometry, grid: &StripGrid, m_list: &[f64], opts: &SolverOptions) -> Result<GapTable> {
    if !geom.profile.is_compactly_supported() {
        return Err(Error::UnsupportedProfile);
    }
    if m_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("mass list must be strictly increasing".into()));
    }
    let opts = SolverOptions { count: opts.count.max(1), ..*opts };
    let lowest = |forms: &AssembledForms| -> Result<f64> { Ok(lowest_pairs(forms, &opts)?.eigenvalues[0]) };
    let mu_q_inf = lowest(&assemble_dirichlet_form(geom, grid)?)?;
    let values: Vec<f64> = m_list
        .par_iter()
        .map(|&m| lowest(&assemble_square_form(geom, m, grid)?))
        .collect::<Result<_>>()?;
    let rows: Vec<GapRow> =
        m_list.iter().zip(&values).map(|(&m, &mu)| GapRow { m, mu_q_m: mu, mu_q_inf, gap: mu_q_inf - mu }).collect();
    let slack = opts.tol * mu_q_inf.abs().max(1.0);
    Ok(GapTable {
        below_dirichlet: rows.iter().all(|r| r.gap >= -slack),
        nondecreasing: rows.windows(2).all(|w| w[1].mu_q_m >= w[0].mu_q_m - slack),
        gap_decreasing: rows.windows(2).all(|w| w[1].gap < w[0].gap),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::dense_oracle;
    use crate::geometry::{check_width, CurvatureProfile};
    use crate::quadrature::gauss_integrate;
    use crate::strip::NodeDof;

    /// Massless transverse mode `u_k^+-` of the straight strip, with `phi = pi (t + 1)/4`.
    fn mode(k: usize, sign: f64, t: f64) -> [f64; 2] {
        let phi = PI * (t + 1.0) / 4.0;
        let (s, c) = (k as f64 * phi).sin_cos();
        [0.5 * (c + sign * s), 0.5 * (c - sign * s)]
    }

    fn sigma3_product(k: usize, sk: f64, j: usize, sj: f64) -> f64 {
        gauss_integrate(
            |t| {
                let (u, v) = (mode(k, sk, t), mode(j, sj, t));
                u[0] * v[0] - u[1] * v[1]
            },
            -1.0,
            1.0,
            80,
        )
    }

    #[test]
    fn effective_mass_values() {
        assert_eq!(effective_mass(0.0), 0.0);
        assert!((effective_mass(PI) - 2.0).abs() < 1e-15);
        assert_eq!(mode_effective_mass(1.0, 2).unwrap(), 0.0);
        assert!((mode_effective_mass(1.0, 1).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert!(mode_effective_mass(1.0, 0).is_err());
    }

    #[test]
    fn mode_mass_matches_quadrature() {
        for k in (1..=9).step_by(2) {
            let m = 5.0;
            let oracle = m * sigma3_product(k, 1.0, k, 1.0);
            assert!((mode_effective_mass(m, k).unwrap() - oracle).abs() < 1e-10, "k={k}");
        }
        assert!((mode_effective_mass(5.0, 3).unwrap() - 10.0 / (3.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn coupling_matches_quadrature() {
        for k in 2..=9 {
            let c = coupling(k).unwrap();
            assert!((c.a_k - sigma3_product(k, 1.0, 1, 1.0)).abs() < 1e-10, "a_{k}");
            assert!((c.b_k - sigma3_product(k, 1.0, 1, -1.0)).abs() < 1e-10, "b_{k}");
        }
        assert!(coupling(3).unwrap().a_k.abs() < 1e-16);
        assert!((coupling(2).unwrap().a_k - 2.0 / (3.0 * PI)).abs() < 1e-15);
        assert!((coupling(2).unwrap().b_k - 2.0 / PI).abs() < 1e-15);
        assert!(coupling(1).is_err());
    }

    #[test]
    fn coupling_squares_converge() {
        assert!((coupling_square_sum(10_000) - coupling_square_sum(1000)).abs() < 1e-3);
    }

    #[test]
    fn effective_band_edge() {
        let d = EffectiveDirac::from_mass(PI);
        assert_eq!(d.band(0.0), 2.0);
    }

    #[test]
    fn straight_dirichlet_matches_laplacian() {
        let eps = 0.5;
        let geom = check_width(CurvatureProfile::zero(), eps).unwrap().with_truncation(3.0).unwrap();
        let grid = StripGrid::for_geometry(&geom, 25, 21).unwrap();
        let forms = assemble_dirichlet_form(&geom, &grid).unwrap();
        let values = dense_oracle(&forms).unwrap();
        let limit = PI * PI / (4.0 * eps * eps) + (PI / 6.0).powi(2);
        assert!((values[0] - limit).abs() < 0.01 * limit);
        assert!((values[0] - values[1]).abs() < 1e-12 * limit);
    }

    #[test]
    fn curved_dirichlet_pairs_and_binds() {
        let eps = 0.25;
        let geom = check_width(CurvatureProfile::polynomial_bump(1.0, 1.0).unwrap(), eps).unwrap().with_truncation(4.0).unwrap();
        let grid = StripGrid::for_geometry(&geom, 41, 9).unwrap();
        let forms = assemble_dirichlet_form(&geom, &grid).unwrap();
        let values = dense_oracle(&forms).unwrap();
        for pair in values[..6].chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-8 * pair[0]);
        }
        let straight = check_width(CurvatureProfile::zero(), eps).unwrap().with_truncation(4.0).unwrap();
        let reference = dense_oracle(&assemble_dirichlet_form(&straight, &grid).unwrap()).unwrap()[0];
        assert!(values[0] < reference);
    }

    #[test]
    fn dirichlet_unknowns_are_an_ordered_subset_of_strip_unknowns() {
        let grid = StripGrid::new(2.0, 7, 5).unwrap();
        let (strip, dir) = (DofMap::strip(&grid), DofMap::dirichlet(&grid));
        let mut last = None;
        for node in 0..grid.n_nodes() {
            for comp in 0..2 {
                if let NodeDof::Free(_) = dir.entry(node, comp) {
                    let NodeDof::Free(d) = strip.entry(node, comp) else { panic!("node {node} comp {comp}") };
                    assert!(last.map_or(true, |l| d > l));
                    last = Some(d);
                }
            }
        }
    }

    #[test]
    fn gap_table_on_small_grid() {
        let eps = 0.25;
        let geom = check_width(CurvatureProfile::polynomial_bump(1.0, 1.0).unwrap(), eps).unwrap().with_truncation(4.0).unwrap();
        let grid = StripGrid::for_geometry(&geom, 41, 9).unwrap();
        let opts = SolverOptions { count: 2, tol: 1e-9, max_iter: 400, seed: 9, preconditioner: crate::eigensolve::Preconditioner::ShiftInvert { shift: None } };
        let ms: Vec<f64> = [1.0, 5.0, 20.0].iter().map(|x| x / eps).collect();
        let table = large_mass_gap(&geom, &grid, &ms, &opts).unwrap();
        assert!(table.below_dirichlet && table.nondecreasing && table.gap_decreasing, "{table:?}");
        let gauss = check_width(CurvatureProfile::gaussian_bump(1.0, 1.0).unwrap(), eps).unwrap();
        assert!(matches!(large_mass_gap(&gauss, &grid, &ms, &opts), Err(Error::UnsupportedProfile)));
    }
}
