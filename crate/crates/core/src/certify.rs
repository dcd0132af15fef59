//! Computable certificate for discrete spectrum of curved strips with compactly
//! supported curvature: the integral `I_eps`, the mass threshold `m_0`, and the
//! energy of the explicit trial spinor `u_eta`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{potential_from_jet, TubeGeometry};
use crate::quadrature::gauss_legendre;
use crate::strip::{SpinorField, StripGrid};
use crate::transverse::edge_deficit;

pub const DEFAULT_QUAD_POINTS: usize = 200;

fn finite_or_null<S: Serializer>(value: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    if value.is_finite() {
        ser.serialize_f64(*value)
    } else {
        ser.serialize_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(rename = "I_epsilon")]
    pub i_epsilon: f64,
    /// `+inf` when the condition fails; serialized as `null`.
    #[serde(serialize_with = "finite_or_null")]
    pub m0_bound: f64,
    pub condition_holds: bool,
    pub predicted_discrete_count_at_least: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionEnergy {
    pub eta: f64,
    pub q_value: f64,
    pub edge_term: f64,
    pub kinetic_term: f64,
    pub potential_term: f64,
}

fn require_compact(geom: &TubeGeometry) -> Result<()> {
    if geom.profile.is_compactly_supported() {
        Ok(())
    } else {
        Err(Error::UnsupportedProfile)
    }
}

/// `-int int V_eps(s, t) cos^2(pi t/2) dt ds` over the curvature support.
pub fn compute_i_epsilon(geom: &TubeGeometry, quad_points: usize) -> Result<f64> {
    require_compact(geom)?;
    if quad_points < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 quadrature points, got {quad_points}")));
    }
    let l = geom.profile.support_radius;
    if geom.profile.is_straight() || l == 0.0 {
        return Ok(0.0);
    }
    let (nodes, weights) = gauss_legendre(quad_points);
    let mut total = 0.0;
    for (&xs, &ws) in nodes.iter().zip(&weights) {
        let s = l * xs;
        let jet = geom.profile.jet(s);
        let mut inner = 0.0;
        for (&t, &wt) in nodes.iter().zip(&weights) {
            let v = potential_from_jet(geom.epsilon, t, jet)
                .ok_or(Error::DegenerateJacobian { s, t, value: geom.metric_factor(s, t) })?;
            let c = (PI * t / 2.0).cos();
            inner += wt * v * c * c;
        }
        total += ws * l * inner;
    }
    Ok(-total)
}

/// `4 pi^2 L/(3 eps^2) + 2/L`.
fn bracket_constant(eps: f64, l: f64) -> f64 {
    4.0 * PI * PI * l / (3.0 * eps * eps) + 2.0 / l
}

/// `(1/(2 eps)) [I^-2 (4 pi^2 L/(3 eps^2) + 2/L)^2 - 1]`.
pub fn m0_bound(geom: &TubeGeometry, i_eps: f64) -> Result<f64> {
    if !(i_eps > 0.0) {
        return Err(Error::NonPositiveCertificate(i_eps));
    }
    let eps = geom.epsilon;
    let ratio = bracket_constant(eps, geom.profile.support_radius) / i_eps;
    Ok((ratio * ratio - 1.0) / (2.0 * eps))
}

/// The trial energy `q(u_eta)` relative to the edge `E_1(m eps)/eps^2`, in its closed three-term form.
pub fn variational_energy(geom: &TubeGeometry, m: f64, eta: f64) -> Result<TestFunctionEnergy> {
    require_compact(geom)?;
    if !(eta >= geom.profile.support_radius) || !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must cover the curvature support")));
    }
    let eps = geom.epsilon;
    let edge_term = edge_deficit(m * eps)? / (eps * eps) * (8.0 / 3.0) * eta;
    let kinetic_term = 2.0 / eta;
    let potential_term = -compute_i_epsilon(geom, DEFAULT_QUAD_POINTS)?;
    Ok(TestFunctionEnergy { eta, q_value: edge_term + kinetic_term + potential_term, edge_term, kinetic_term, potential_term })
}

/// `eta = L sqrt(1 + 2 m eps)`.
pub fn optimal_eta(geom: &TubeGeometry, m: f64) -> f64 {
    geom.profile.support_radius * (1.0 + 2.0 * m * geom.epsilon).sqrt()
}

pub fn certify(geom: &TubeGeometry, m: f64) -> Result<Certificate> {
    let i_eps = compute_i_epsilon(geom, DEFAULT_QUAD_POINTS)?;
    let condition_holds = i_eps > 0.0;
    let m0 = if condition_holds { m0_bound(geom, i_eps)? } else { f64::INFINITY };
    Ok(Certificate {
        i_epsilon: i_eps,
        m0_bound: m0,
        condition_holds,
        predicted_discrete_count_at_least: if condition_holds && m > m0 { 2 } else { 0 },
    })
}

/// Plateau cutoff: 1 on `|s| <= eta`, linear down to 0 at `|s| = 2 eta`.
pub fn cutoff(eta: f64, s: f64) -> f64 {
    (2.0 - s.abs() / eta).clamp(0.0, 1.0)
}

/// Nodal values of `u_eta = phi_eta(s) cos(pi t/2) (e^{i theta/2}, e^{-i theta/2}) / sqrt 2`.
pub fn test_function_field(geom: &TubeGeometry, eta: f64, grid: StripGrid) -> Result<SpinorField> {
    if 2.0 * eta > grid.s_max {
        return Err(Error::InvalidArgument(format!("cutoff support 2 eta = {} exceeds the strip", 2.0 * eta)));
    }
    Ok(SpinorField::from_fn(grid, |s, t| {
        let amp = cutoff(eta, s) * (PI * t / 2.0).cos() / 2f64.sqrt();
        let phase = Complex64::from_polar(1.0, 0.5 * geom.profile.theta(s));
        [phase * amp, phase.conj() * amp]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{check_width, CurvatureProfile};
    use crate::quadrature::gauss_integrate;
    use crate::strip::{assemble_square_form, rayleigh};
    use crate::transverse::first_energy;

    fn bump(eps: f64) -> TubeGeometry {
        check_width(CurvatureProfile::polynomial_bump(1.0, 1.0).unwrap(), eps).unwrap()
    }

    #[test]
    fn straight_strip_has_no_certificate() {
        let geom = check_width(CurvatureProfile::zero(), 0.1).unwrap();
        assert_eq!(compute_i_epsilon(&geom, 50).unwrap(), 0.0);
        let c = certify(&geom, 10.0).unwrap();
        assert!(!c.condition_holds && c.m0_bound.is_infinite());
        assert_eq!(c.predicted_discrete_count_at_least, 0);
        assert_eq!(serde_json::to_value(c).unwrap()["m0_bound"], serde_json::Value::Null);
        let e = variational_energy(&geom, 3.0, 2.0).unwrap();
        assert!(e.q_value > 0.0);
        assert!((e.q_value - e.edge_term - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_bump_unsupported() {
        let geom = check_width(CurvatureProfile::gaussian_bump(1.0, 1.0).unwrap(), 0.1).unwrap();
        assert!(matches!(compute_i_epsilon(&geom, 50), Err(Error::UnsupportedProfile)));
        assert!(matches!(certify(&geom, 1.0), Err(Error::UnsupportedProfile)));
    }

    #[test]
    fn thin_limit_matches_riemann_sum() {
        let geom = bump(1e-3);
        let i_eps = compute_i_epsilon(&geom, DEFAULT_QUAD_POINTS).unwrap();
        // midpoint sum of kappa^2/4 over (-1, 1), times int cos^2(pi t/2) dt = 1
        let n = 1_000_000;
        let h = 2.0 / n as f64;
        let riemann: f64 = (0..n).map(|i| geom.profile.kappa(-1.0 + (i as f64 + 0.5) * h).powi(2)).sum::<f64>() * h / 4.0;
        assert!((i_eps - riemann).abs() < 0.01 * riemann, "{i_eps} vs {riemann}");
    }

    #[test]
    fn quadrature_is_stable_under_doubling() {
        let geom = bump(0.1);
        let a = compute_i_epsilon(&geom, 200).unwrap();
        let b = compute_i_epsilon(&geom, 400).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(a > 0.0);
    }

    #[test]
    fn m0_algebra() {
        let geom = bump(0.1);
        let k = bracket_constant(0.1, 1.0);
        assert!(m0_bound(&geom, k).unwrap().abs() < 1e-9);
        let (a, b) = (m0_bound(&geom, 2.0).unwrap(), m0_bound(&geom, 4.0).unwrap());
        // first bracketed term divided by four
        assert!(((2.0 * 0.1 * b + 1.0) * 4.0 - (2.0 * 0.1 * a + 1.0)).abs() < 1e-9 * a);
        assert!(matches!(m0_bound(&geom, 0.0), Err(Error::NonPositiveCertificate(_))));
    }

    #[test]
    fn certificate_is_consistent_with_trial_energy() {
        for eps in [1e-2, 0.1] {
            let geom = bump(eps);
            let c = certify(&geom, 1.0).unwrap();
            assert!(c.condition_holds && c.m0_bound.is_finite());
            let m = 2.0 * c.m0_bound;
            let eta = optimal_eta(&geom, m);
            let e = variational_energy(&geom, m, eta).unwrap();
            assert!(e.q_value < 0.0, "eps={eps}: {e:?}");
            let bound = bracket_constant(eps, 1.0) / (1.0 + 2.0 * m * eps).sqrt() - c.i_epsilon;
            assert!(e.q_value <= bound + 1e-12 * c.i_epsilon);
            assert_eq!(certify(&geom, m).unwrap().predicted_discrete_count_at_least, 2);
        }
    }

    #[test]
    fn i_epsilon_is_lipschitz_in_width() {
        let values: Vec<f64> = [0.05, 0.06, 0.07, 0.08].iter().map(|&e| compute_i_epsilon(&bump(e), 100).unwrap()).collect();
        for w in values.windows(2) {
            assert!((w[1] - w[0]).abs() <= 5.0 * 0.01);
        }
    }

    #[test]
    fn discrete_trial_function_reproduces_closed_form() {
        let eps = 0.4;
        let m = 1.0;
        let eta = 1.0;
        let geom = bump(eps).with_truncation(2.5).unwrap();
        let grid = StripGrid::for_geometry(&geom, 401, 101).unwrap();
        let forms = assemble_square_form(&geom, m, &grid).unwrap();
        let field = test_function_field(&geom, eta, grid).unwrap();
        let r = rayleigh(&forms, &field).unwrap();
        let e = variational_energy(&geom, m, eta).unwrap();
        let e1 = first_energy(m * eps).unwrap() / (eps * eps);
        let predicted = e1 + e.q_value / (8.0 * eta / 3.0);
        // interpolation error of cos(pi t/2) in the transverse stiffness dominates
        let h = grid.h_t();
        let slack = (PI * h).powi(2) / 12.0 * PI * PI / (4.0 * eps * eps) * 2.0 + 1e-3;
        assert!((r - predicted).abs() < slack, "{r} vs {predicted} (slack {slack})");
    }

    #[test]
    fn cutoff_norms() {
        let eta = 1.7;
        let mass = gauss_integrate(|s| cutoff(eta, s).powi(2), -2.0 * eta, -eta, 10) * 2.0 + 2.0 * eta;
        assert!((mass - 8.0 * eta / 3.0).abs() < 1e-12);
    }
}
