//! Discrete spectrum of a curved strip below the essential edge.

use serde::{Deserialize, Serialize};

use crate::eigensolve::{count_below, lowest_pairs, SolverOptions};
use crate::error::Result;
use crate::geometry::TubeGeometry;
use crate::strip::{assemble_square_form, StripGrid};
use crate::transverse::{discrete_shifted_edge, shifted_square_edge};

/// Relative distance below which two eigenvalues are reported as one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub epsilon: f64,
    pub mass: f64,
    pub grid: StripGrid,
    /// `E_1(m eps)/eps^2`.
    pub edge: f64,
    /// Bottom of the straight-strip spectrum on the same transverse grid.
    pub discrete_edge: f64,
    /// Inertia count of the shifted square form below `discrete_edge`.
    pub count_below_edge: usize,
    /// Lowest computed eigenvalues of the shifted square form, ascending.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Eigenvalues below `discrete_edge`, grouped into clusters: `(value, multiplicity)`.
    pub bound_states: Vec<(f64, usize)>,
    /// Positive Dirac eigenvalues `sqrt(mu + m^2)` of the bound states; the spectrum holds their negatives too.
    pub dirac_eigenvalues: Vec<f64>,
}

impl SpectrumReport {
    pub fn below_edge(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().copied().filter(move |&v| v < self.discrete_edge)
    }

    /// `discrete_edge - mu_1`, positive when a bound state exists.
    pub fn gap_depth(&self) -> f64 {
        self.discrete_edge - self.eigenvalues[0]
    }
}

/// Groups ascending values whose relative spacing is at most `tol`.
pub fn clusters(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || (values[i] - values[i - 1]).abs() > tol * values[i].abs().max(1.0);
        if split && i > start {
            out.push((values[start], i - start));
            start = i;
        }
    }
    out
}

/// Assemble the shifted square form, count eigenvalues below the edge by inertia, and solve for at least that many.
pub fn discrete_spectrum(geom: &TubeGeometry, m: f64, grid: &StripGrid, opts: &SolverOptions) -> Result<SpectrumReport> {
    let edge = shifted_square_edge(geom.epsilon, m)?;
    let discrete_edge = discrete_shifted_edge(geom.epsilon, m, grid.n_t)?;
    let forms = assemble_square_form(geom, m, grid)?;
    let count = count_below(&forms, discrete_edge)?;
    let solve = SolverOptions { count: opts.count.max(count).max(1).min(forms.dim()), ..*opts };
    let result = lowest_pairs(&forms, &solve)?;
    let below: Vec<f64> = result.eigenvalues.iter().copied().filter(|&v| v < discrete_edge).collect();
    let bound_states = clusters(&below, CLUSTER_TOL);
    Ok(SpectrumReport {
        epsilon: geom.epsilon,
        mass: m,
        grid: *grid,
        edge,
        discrete_edge,
        count_below_edge: count,
        dirac_eigenvalues: bound_states.iter().map(|&(mu, _)| (mu + m * m).sqrt()).collect(),
        bound_states,
        eigenvalues: result.eigenvalues,
        residuals: result.residuals,
        iterations: result.iterations,
    })
}
