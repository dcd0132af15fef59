//! Q1 finite elements for the quadratic form of the squared strip operator.
//!
//! Unknowns are spinors `u = (u_1, u_2)` on the straightened strip
//! `[-S, S] x [-1, 1]`. The boundary condition `u_2(s, +-1) = -+u_1(s, +-1)`
//! and the truncation `u(+-S, t) = 0` are eliminated from the unknowns, so the
//! assembled pencil lives on the free degrees of freedom only.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{potential_from_jet, TubeGeometry};
use crate::quadrature::gauss_legendre;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Uniform tensor grid on `[-s_max, s_max] x [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGrid {
    pub s_max: f64,
    pub n_s: usize,
    pub n_t: usize,
}

impl StripGrid {
    pub fn new(s_max: f64, n_s: usize, n_t: usize) -> Result<Self> {
        if !(s_max > 0.0) || !s_max.is_finite() {
            return Err(Error::InvalidArgument(format!("strip half-length must be positive, got {s_max}")));
        }
        if n_s < 3 || n_t < 3 || n_t % 2 == 0 {
            return Err(Error::InvalidArgument(format!("grid needs n_s >= 3 and odd n_t >= 3, got {n_s} x {n_t}")));
        }
        Ok(Self { s_max, n_s, n_t })
    }

    pub fn for_geometry(geom: &TubeGeometry, n_s: usize, n_t: usize) -> Result<Self> {
        Self::new(geom.truncation_s, n_s, n_t)
    }

    pub fn h_s(&self) -> f64 {
        2.0 * self.s_max / (self.n_s - 1) as f64
    }

    pub fn h_t(&self) -> f64 {
        2.0 / (self.n_t - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        if i == self.n_s - 1 {
            self.s_max
        } else {
            -self.s_max + i as f64 * self.h_s()
        }
    }

    pub fn t(&self, j: usize) -> f64 {
        if 2 * j + 1 == self.n_t {
            0.0
        } else if j == self.n_t - 1 {
            1.0
        } else {
            -1.0 + j as f64 * self.h_t()
        }
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n_t + j
    }

    pub fn n_nodes(&self) -> usize {
        self.n_s * self.n_t
    }

    /// The grid with every cell split in two along each axis.
    pub fn refined(&self) -> Self {
        Self { s_max: self.s_max, n_s: 2 * self.n_s - 1, n_t: 2 * self.n_t - 1 }
    }
}

/// Fate of one spinor component at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeDof {
    Free(usize),
    /// Equal to `factor` times the free unknown `dof`.
    Tied { dof: usize, factor: f64 },
    Fixed,
}

/// Map from (node, component) to free unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofMap {
    entries: Vec<NodeDof>,
    n_dofs: usize,
}

impl DofMap {
    fn from_rule(n_nodes: usize, rule: impl Fn(usize, usize) -> Option<NodeDof>) -> Self {
        // rule returns None for free entries and the constraint otherwise;
        // tied entries reference the component-0 unknown of the same node
        let mut entries = Vec::with_capacity(2 * n_nodes);
        let mut n_dofs = 0;
        for node in 0..n_nodes {
            for comp in 0..2 {
                let entry = match rule(node, comp) {
                    None => {
                        n_dofs += 1;
                        NodeDof::Free(n_dofs - 1)
                    }
                    Some(NodeDof::Tied { factor, .. }) => match entries[2 * node] {
                        NodeDof::Free(d) => NodeDof::Tied { dof: d, factor },
                        _ => NodeDof::Fixed,
                    },
                    Some(other) => other,
                };
                entries.push(entry);
            }
        }
        Self { entries, n_dofs }
    }

    /// Every component of every node free.
    pub fn plain(n: usize) -> Self {
        Self { entries: (0..n).map(NodeDof::Free).collect(), n_dofs: n }
    }

    /// A line of `nodes` transverse nodes from `t = -1` to `t = 1` with the spinor boundary condition.
    pub fn transverse(nodes: usize) -> Self {
        Self::from_rule(nodes, |j, comp| spinor_rule(j, comp, nodes))
    }

    /// Strip grid with the spinor boundary condition at `t = +-1` and zero at `s = +-S`.
    pub fn strip(grid: &StripGrid) -> Self {
        let n_t = grid.n_t;
        Self::from_rule(grid.n_nodes(), |node, comp| {
            let (i, j) = (node / n_t, node % n_t);
            if i == 0 || i == grid.n_s - 1 {
                Some(NodeDof::Fixed)
            } else {
                spinor_rule(j, comp, n_t)
            }
        })
    }

    /// Strip grid with both components zero on the whole boundary.
    pub fn dirichlet(grid: &StripGrid) -> Self {
        let n_t = grid.n_t;
        Self::from_rule(grid.n_nodes(), |node, _| {
            let (i, j) = (node / n_t, node % n_t);
            if i == 0 || i == grid.n_s - 1 || j == 0 || j == n_t - 1 {
                Some(NodeDof::Fixed)
            } else {
                None
            }
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn entry(&self, node: usize, comp: usize) -> NodeDof {
        self.entries[2 * node + comp]
    }

    fn resolve(&self, node: usize, comp: usize) -> Option<(usize, f64)> {
        match self.entry(node, comp) {
            NodeDof::Free(d) => Some((d, 1.0)),
            NodeDof::Tied { dof, factor } => Some((dof, factor)),
            NodeDof::Fixed => None,
        }
    }

    /// Add `value` to the form entry coupling `(node_a, comp_a)` with `(node_b, comp_b)`.
    pub fn scatter(
        &self,
        node_a: usize,
        comp_a: usize,
        node_b: usize,
        comp_b: usize,
        value: impl Into<Complex64>,
        out: &mut TripletBuilder,
    ) {
        if let (Some((da, fa)), Some((db, fb))) = (self.resolve(node_a, comp_a), self.resolve(node_b, comp_b)) {
            out.add(da, db, value.into() * (fa * fb));
        }
    }
}

fn spinor_rule(j: usize, comp: usize, n_t: usize) -> Option<NodeDof> {
    match (j, comp) {
        (0, 1) => Some(NodeDof::Tied { dof: 0, factor: 1.0 }),
        (j, 1) if j == n_t - 1 => Some(NodeDof::Tied { dof: 0, factor: -1.0 }),
        _ => None,
    }
}

/// Whether the stiffness matrix has the `m^2` term removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MassShift {
    None,
    SubtractedSquare { m: f64 },
}

/// Hermitian pencil `(A, B)` on the free unknowns of a [`DofMap`].
#[derive(Debug, Clone)]
pub struct AssembledForms {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub dof_map: DofMap,
    pub shift_record: MassShift,
}

impl AssembledForms {
    pub fn new(a: CsrMatrix, b: CsrMatrix, dof_map: DofMap, shift_record: MassShift) -> Self {
        assert_eq!(a.dim(), dof_map.n_dofs());
        assert_eq!(b.dim(), dof_map.n_dofs());
        Self { a, b, dof_map, shift_record }
    }

    pub fn from_matrices(a: CsrMatrix, b: CsrMatrix) -> Self {
        let map = DofMap::plain(a.dim());
        Self::new(a, b, map, MassShift::None)
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Writes `<stem>_A.mtx` and `<stem>_B.mtx` into `dir`.
    pub fn write_matrix_market(&self, dir: &Path, stem: &str) -> Result<()> {
        self.a.write_matrix_market(&dir.join(format!("{stem}_A.mtx")))?;
        self.b.write_matrix_market(&dir.join(format!("{stem}_B.mtx")))?;
        Ok(())
    }
}

/// Spinor nodal values on a [`StripGrid`], indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: StripGrid,
    pub values: Vec<[Complex64; 2]>,
}

impl SpinorField {
    pub fn from_fn(grid: StripGrid, f: impl Fn(f64, f64) -> [Complex64; 2]) -> Self {
        let mut values = Vec::with_capacity(grid.n_nodes());
        for i in 0..grid.n_s {
            for j in 0..grid.n_t {
                values.push(f(grid.s(i), grid.t(j)));
            }
        }
        Self { grid, values }
    }

    /// Nodal values from a coefficient vector on the free unknowns.
    pub fn from_coefficients(grid: StripGrid, map: &DofMap, x: &[Complex64]) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let values = (0..grid.n_nodes())
            .map(|node| {
                let get = |comp| map.resolve(node, comp).map_or(zero, |(d, f)| x[d] * f);
                [get(0), get(1)]
            })
            .collect();
        Self { grid, values }
    }

    /// Coefficients on the free unknowns; fails if a nodal value breaks a constraint.
    pub fn to_coefficients(&self, map: &DofMap) -> Result<Vec<Complex64>> {
        let scale = self.values.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, z| m.max(z.norm()));
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let mut x = vec![Complex64::new(0.0, 0.0); map.n_dofs()];
        for (node, v) in self.values.iter().enumerate() {
            for comp in 0..2 {
                if let NodeDof::Free(d) = map.entry(node, comp) {
                    x[d] = v[comp];
                }
            }
        }
        for (node, v) in self.values.iter().enumerate() {
            for comp in 0..2 {
                let expected = match map.entry(node, comp) {
                    NodeDof::Free(_) => continue,
                    NodeDof::Tied { dof, factor } => x[dof] * factor,
                    NodeDof::Fixed => Complex64::new(0.0, 0.0),
                };
                if (v[comp] - expected).norm() > tol {
                    let n_t = self.grid.n_t;
                    return Err(Error::ConstraintViolation { i: node / n_t, j: node % n_t });
                }
            }
        }
        Ok(x)
    }
}

/// Per-cell coefficients at one Gauss point.
struct PointData {
    weight: f64,
    /// `(1 - eps t kappa)^{-2}`
    w: f64,
    kappa: f64,
    potential: f64,
    n: [f64; 4],
    dn_s: [f64; 4],
    dn_t: [f64; 4],
}

fn cell_points(geom: &TubeGeometry, grid: &StripGrid, i: usize, j: usize, gauss: &[f64; 2]) -> Result<Vec<PointData>> {
    let (s0, s1, t0, t1) = (grid.s(i), grid.s(i + 1), grid.t(j), grid.t(j + 1));
    let (hs, ht) = (s1 - s0, t1 - t0);
    let mut out = Vec::with_capacity(4);
    for &xi in gauss {
        let s = s0 + 0.5 * (xi + 1.0) * hs;
        let jet = geom.profile.jet(s);
        let a = 0.5 * (xi + 1.0);
        for &eta in gauss {
            let t = t0 + 0.5 * (eta + 1.0) * ht;
            let b = 0.5 * (eta + 1.0);
            let g = 1.0 - geom.epsilon * t * jet.kappa;
            if g <= 0.5 {
                return Err(Error::DegenerateJacobian { s, t, value: g });
            }
            let potential = potential_from_jet(geom.epsilon, t, jet).expect("metric factor checked above");
            // local nodes (i, j), (i+1, j), (i, j+1), (i+1, j+1)
            out.push(PointData {
                weight: 0.25 * hs * ht,
                w: 1.0 / (g * g),
                kappa: jet.kappa,
                potential,
                n: [(1.0 - a) * (1.0 - b), a * (1.0 - b), (1.0 - a) * b, a * b],
                dn_s: [-(1.0 - b) / hs, (1.0 - b) / hs, -b / hs, b / hs],
                dn_t: [-(1.0 - a) / ht, -a / ht, (1.0 - a) / ht, a / ht],
            });
        }
    }
    Ok(out)
}

/// Which quadratic form [`assemble_on`] builds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FormKind {
    /// Squared strip operator with `m^2` subtracted, spinor boundary condition.
    Square { m: f64 },
    /// Straightened Dirichlet Laplacian, no spin connection.
    Dirichlet,
}

/// Quadratic form of the squared strip operator with `m^2` subtracted, and the `L^2` mass.
pub fn assemble_square_form(geom: &TubeGeometry, m: f64, grid: &StripGrid) -> Result<AssembledForms> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("mass must be nonnegative and finite, got {m}")));
    }
    assemble_on(geom, grid, DofMap::strip(grid), FormKind::Square { m })
}

pub(crate) fn assemble_on(geom: &TubeGeometry, grid: &StripGrid, map: DofMap, kind: FormKind) -> Result<AssembledForms> {
    let (m, spin) = match kind {
        FormKind::Square { m } => (m, 1.0),
        FormKind::Dirichlet => (0.0, 0.0),
    };
    let n = map.n_dofs();
    let eps = geom.epsilon;
    let (nodes, _) = gauss_legendre(2);
    let gauss = [nodes[0], nodes[1]];
    let hs = grid.h_s();
    let edge_mass = [[hs / 3.0, hs / 6.0], [hs / 6.0, hs / 3.0]];

    let columns: Vec<(TripletBuilder, TripletBuilder)> = (0..grid.n_s - 1)
        .into_par_iter()
        .map(|i| -> Result<(TripletBuilder, TripletBuilder)> {
            let mut a = TripletBuilder::new(n);
            let mut b = TripletBuilder::new(n);
            for j in 0..grid.n_t - 1 {
                let local = [grid.node(i, j), grid.node(i + 1, j), grid.node(i, j + 1), grid.node(i + 1, j + 1)];
                let points = cell_points(geom, grid, i, j, &gauss)?;
                for comp in 0..2 {
                    let sigma = spin * if comp == 0 { 1.0 } else { -1.0 };
                    for la in 0..4 {
                        for lb in 0..4 {
                            let mut re = 0.0;
                            let mut im = 0.0;
                            let mut mass = 0.0;
                            for p in &points {
                                let nn = p.n[la] * p.n[lb];
                                re += p.weight
                                    * (p.w * (p.dn_s[la] * p.dn_s[lb] + spin * 0.25 * p.kappa * p.kappa * nn)
                                        + p.dn_t[la] * p.dn_t[lb] / (eps * eps)
                                        + p.potential * nn);
                                im += p.weight * sigma * 0.5 * p.kappa * p.w * (p.n[la] * p.dn_s[lb] - p.dn_s[la] * p.n[lb]);
                                mass += p.weight * nn;
                            }
                            map.scatter(local[la], comp, local[lb], comp, Complex64::new(re, im), &mut a);
                            map.scatter(local[la], comp, local[lb], comp, mass, &mut b);
                        }
                    }
                }
            }
            if m > 0.0 {
                for j in [0, grid.n_t - 1] {
                    let edge = [grid.node(i, j), grid.node(i + 1, j)];
                    for comp in 0..2 {
                        for la in 0..2 {
                            for lb in 0..2 {
                                map.scatter(edge[la], comp, edge[lb], comp, m / eps * edge_mass[la][lb], &mut a);
                            }
                        }
                    }
                }
            }
            Ok((a, b))
        })
        .collect::<Result<_>>()?;

    let mut a = TripletBuilder::new(n);
    let mut b = TripletBuilder::new(n);
    for (ca, cb) in columns {
        a.append(ca);
        b.append(cb);
    }
    let shift = match kind {
        FormKind::Square { m } => MassShift::SubtractedSquare { m },
        FormKind::Dirichlet => MassShift::None,
    };
    Ok(AssembledForms::new(a.build(), b.build(), map, shift))
}

/// `x^H A x / x^H B x` for a constrained field.
pub fn rayleigh(forms: &AssembledForms, field: &SpinorField) -> Result<f64> {
    let x = field.to_coefficients(&forms.dof_map)?;
    let den = forms.b.quadratic_form(&x).re;
    if !(den > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(forms.a.quadratic_form(&x).re / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{dense_oracle, lowest_pairs, Preconditioner, SolverOptions};
    use crate::geometry::{check_width, CurvatureProfile};
    use crate::transverse;
    use std::f64::consts::PI;

    fn straight(eps: f64, s_max: f64) -> TubeGeometry {
        check_width(CurvatureProfile::zero(), eps).unwrap().with_truncation(s_max).unwrap()
    }

    fn bump(eps: f64) -> TubeGeometry {
        check_width(CurvatureProfile::gaussian_bump(1.0, 1.0).unwrap(), eps).unwrap()
    }

    #[test]
    fn grid_nodes_hit_ends_and_center() {
        let g = StripGrid::new(3.0, 7, 5).unwrap();
        assert_eq!(g.t(0), -1.0);
        assert_eq!(g.t(2), 0.0);
        assert_eq!(g.t(4), 1.0);
        assert_eq!(g.s(6), 3.0);
        assert!(StripGrid::new(3.0, 7, 4).is_err());
        assert!(StripGrid::new(3.0, 2, 5).is_err());
    }

    #[test]
    fn dof_counts() {
        let g = StripGrid::new(1.0, 5, 5).unwrap();
        // interior s-columns: 3, each with 5 u1 and 3 free u2
        assert_eq!(DofMap::strip(&g).n_dofs(), 3 * 8);
        assert_eq!(DofMap::dirichlet(&g).n_dofs(), 3 * 3 * 2);
        assert_eq!(DofMap::transverse(5).n_dofs(), 8);
    }

    #[test]
    fn assembled_pencil_is_exactly_hermitian() {
        let geom = bump(0.1);
        let grid = StripGrid::for_geometry(&geom, 41, 9).unwrap();
        let forms = assemble_square_form(&geom, 2.0, &grid).unwrap();
        assert_eq!(forms.a.hermitian_defect(), 0.0);
        assert_eq!(forms.b.hermitian_defect(), 0.0);
        assert!(forms.a.bandwidth() <= 2 * grid.n_t + 2);
    }

    #[test]
    fn massless_straight_strip_approaches_quarter_edge() {
        let eps = 0.5;
        let geom = straight(eps, 4.0);
        let grid = StripGrid::for_geometry(&geom, 33, 17).unwrap();
        let forms = assemble_square_form(&geom, 0.0, &grid).unwrap();
        let lowest = dense_oracle(&forms).unwrap()[0];
        // transverse ground state plus the lowest longitudinal Dirichlet mode
        let limit = PI * PI / (16.0 * eps * eps) + (PI / 8.0).powi(2);
        assert!((lowest - limit).abs() < 0.01 * limit, "{lowest} vs {limit}");
    }

    #[test]
    fn straight_strip_matches_transverse_roots() {
        let eps = 0.5;
        let m = 1.5;
        let geom = straight(eps, 3.0);
        let grid = StripGrid::for_geometry(&geom, 25, 21).unwrap();
        let forms = assemble_square_form(&geom, m, &grid).unwrap();
        let values = dense_oracle(&forms).unwrap();
        let e1 = transverse::first_energy(m * eps).unwrap();
        let limit = e1 / (eps * eps) + (PI / 6.0).powi(2);
        assert!((values[0] - limit).abs() < 0.01 * limit, "{} vs {limit}", values[0]);
        // the straight pencil decouples u1/u2 only through the boundary; pairs are exact
        assert!((values[0] - values[1]).abs() < 1e-9 * values[0]);
    }

    #[test]
    fn rayleigh_bounds_lowest_eigenvalue() {
        let geom = bump(0.2).with_truncation(4.0).unwrap();
        let grid = StripGrid::for_geometry(&geom, 21, 7).unwrap();
        let forms = assemble_square_form(&geom, 1.0, &grid).unwrap();
        let lowest = dense_oracle(&forms).unwrap()[0];
        let field = SpinorField::from_fn(grid, |s, t| {
            let v = Complex64::new((PI * s / 8.0).cos() * (PI * t / 2.0 + 0.3).cos(), 0.2 * s);
            let c = v * (PI * s / 8.0).cos();
            [c, c * Complex64::new(-t, 0.0)]
        });
        // u2 = -t u1 enforces the boundary condition at t = +-1
        let r = rayleigh(&forms, &field).unwrap();
        assert!(r >= lowest - 1e-10);
    }

    #[test]
    fn constraint_violation_and_zero_field() {
        let geom = straight(0.5, 2.0);
        let grid = StripGrid::for_geometry(&geom, 9, 5).unwrap();
        let forms = assemble_square_form(&geom, 1.0, &grid).unwrap();
        let bad = SpinorField::from_fn(grid, |s, _| [Complex64::new((PI * s / 4.0).cos(), 0.0); 2]);
        assert!(matches!(rayleigh(&forms, &bad), Err(Error::ConstraintViolation { .. })));
        let zero = SpinorField::from_fn(grid, |_, _| [Complex64::new(0.0, 0.0); 2]);
        assert!(matches!(rayleigh(&forms, &zero), Err(Error::ZeroField)));
    }

    #[test]
    fn degenerate_metric_rejected() {
        // valid width check alone does not catch it: force eps kappa close to one half
        let profile = CurvatureProfile::gaussian_bump(1.0, 1.0).unwrap();
        let mut geom = check_width(profile, 0.4).unwrap();
        geom.epsilon = 0.6;
        let grid = StripGrid::for_geometry(&geom, 41, 9).unwrap();
        assert!(matches!(assemble_square_form(&geom, 1.0, &grid), Err(Error::DegenerateJacobian { .. })));
    }

    #[test]
    fn eigenvectors_round_trip_through_fields() {
        let geom = bump(0.2).with_truncation(4.0).unwrap();
        let grid = StripGrid::for_geometry(&geom, 21, 7).unwrap();
        let forms = assemble_square_form(&geom, 1.0, &grid).unwrap();
        let opts = SolverOptions { count: 2, tol: 1e-8, max_iter: 500, seed: 5, preconditioner: Preconditioner::ShiftInvert { shift: None } };
        let res = lowest_pairs(&forms, &opts).unwrap();
        let field = SpinorField::from_coefficients(grid, &forms.dof_map, &res.vectors[0]);
        let r = rayleigh(&forms, &field).unwrap();
        assert!((r - res.eigenvalues[0]).abs() < 1e-8 * res.eigenvalues[0].abs().max(1.0));
    }
}
