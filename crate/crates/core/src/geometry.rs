//! Base-curve geometry: curvature profiles, Frenet reconstruction, the tube map
//! and the curvature-induced potential of the straightened strip.
//!
//! The curve is never stored as points. Its curvature is the single source of
//! truth; tangent angle and position are recovered by quadrature with the
//! convention `theta(0) = 0`, `gamma(0) = 0`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

const FRENET_TOL: f64 = 1e-12;
/// Relative level below which the Gaussian tail is treated as zero.
const GAUSSIAN_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Zero,
    /// `kappa0 * exp(-s^2 / (2 sigma^2))`.
    GaussianBump { kappa0: f64, sigma: f64 },
    /// `kappa0 * (1 - (s/L)^2)^5` on `|s| < L`, zero outside.
    PolynomialBump { kappa0: f64, length: f64 },
    /// Constant curvature `kappa0` on `|s| <= L`, zero outside.
    CircularArcSegment { kappa0: f64, length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub kind: ProfileKind,
    pub sup_kappa: f64,
    pub sup_kappa_prime: f64,
    pub support_radius: f64,
}

/// Curvature and its first two derivatives at one arc-length position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureJet {
    pub kappa: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Flat,
    Constant(f64),
    Smooth,
}

impl CurvatureProfile {
    pub fn new(kind: ProfileKind) -> Result<Self> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let finite = |v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("kappa0 must be finite, got {v}")))
            }
        };
        let (sup_kappa, sup_kappa_prime, support_radius) = match kind {
            ProfileKind::Zero => (0.0, 0.0, 0.0),
            ProfileKind::GaussianBump { kappa0, sigma } => {
                finite(kappa0)?;
                check("sigma", sigma)?;
                let cutoff = sigma * (2.0 * (1.0 / GAUSSIAN_CUTOFF).ln()).sqrt();
                (kappa0.abs(), kappa0.abs() / sigma * (-0.5f64).exp(), cutoff)
            }
            ProfileKind::PolynomialBump { kappa0, length } => {
                finite(kappa0)?;
                check("length", length)?;
                // max of x (1 - x^2)^4 on [0, 1] sits at x = 1/3
                let peak = (1.0 / 3.0) * (8.0f64 / 9.0).powi(4);
                (kappa0.abs(), 10.0 * kappa0.abs() / length * peak, length)
            }
            ProfileKind::CircularArcSegment { kappa0, length } => {
                finite(kappa0)?;
                check("length", length)?;
                (kappa0.abs(), 0.0, length)
            }
        };
        Ok(Self { kind, sup_kappa, sup_kappa_prime, support_radius })
    }

    pub fn zero() -> Self {
        Self::new(ProfileKind::Zero).expect("zero profile is always valid")
    }

    pub fn gaussian_bump(kappa0: f64, sigma: f64) -> Result<Self> {
        Self::new(ProfileKind::GaussianBump { kappa0, sigma })
    }

    pub fn polynomial_bump(kappa0: f64, length: f64) -> Result<Self> {
        Self::new(ProfileKind::PolynomialBump { kappa0, length })
    }

    pub fn circular_arc(kappa0: f64, length: f64) -> Result<Self> {
        Self::new(ProfileKind::CircularArcSegment { kappa0, length })
    }

    /// True when the curvature vanishes identically outside `(-L, L)` with `L = support_radius`.
    pub fn is_compactly_supported(&self) -> bool {
        matches!(
            self.kind,
            ProfileKind::Zero | ProfileKind::PolynomialBump { .. } | ProfileKind::CircularArcSegment { .. }
        )
    }

    pub fn is_straight(&self) -> bool {
        self.sup_kappa == 0.0
    }

    pub fn kappa(&self, s: f64) -> f64 {
        self.jet(s).kappa
    }

    /// `kappa`, `kappa'` and `kappa''` at `s`.
    ///
    /// The arc segment is piecewise constant; its derivatives are reported as
    /// zero (their almost-everywhere values).
    pub fn jet(&self, s: f64) -> CurvatureJet {
        match self.kind {
            ProfileKind::Zero => CurvatureJet { kappa: 0.0, d1: 0.0, d2: 0.0 },
            ProfileKind::GaussianBump { kappa0, sigma } => {
                let s2 = sigma * sigma;
                let k = kappa0 * (-0.5 * s * s / s2).exp();
                CurvatureJet { kappa: k, d1: -s / s2 * k, d2: (s * s / (s2 * s2) - 1.0 / s2) * k }
            }
            ProfileKind::PolynomialBump { kappa0, length } => {
                let x = s / length;
                if x.abs() >= 1.0 {
                    return CurvatureJet { kappa: 0.0, d1: 0.0, d2: 0.0 };
                }
                let w = 1.0 - x * x;
                let w3 = w * w * w;
                CurvatureJet {
                    kappa: kappa0 * w3 * w * w,
                    d1: -10.0 * kappa0 * x * w3 * w / length,
                    d2: -10.0 * kappa0 * w3 * (1.0 - 9.0 * x * x) / (length * length),
                }
            }
            ProfileKind::CircularArcSegment { kappa0, length } => {
                let k = if s.abs() <= length { kappa0 } else { 0.0 };
                CurvatureJet { kappa: k, d1: 0.0, d2: 0.0 }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            ProfileKind::Zero => Vec::new(),
            _ => vec![-self.support_radius, self.support_radius],
        }
    }

    fn piece(&self, mid: f64) -> Piece {
        match self.kind {
            ProfileKind::Zero => Piece::Flat,
            _ if mid.abs() >= self.support_radius => Piece::Flat,
            ProfileKind::CircularArcSegment { kappa0, .. } => Piece::Constant(kappa0),
            _ => Piece::Smooth,
        }
    }

    /// Tangent angle `theta(s) = integral_0^s kappa`.
    pub fn theta(&self, s: f64) -> f64 {
        let mut theta = 0.0;
        for (a, b) in self.pieces(0.0, s) {
            theta += self.kappa_integral(a, b);
        }
        theta
    }

    fn kappa_integral(&self, a: f64, b: f64) -> f64 {
        match self.piece(0.5 * (a + b)) {
            Piece::Flat => 0.0,
            Piece::Constant(k) => k * (b - a),
            Piece::Smooth => quadrature::adaptive(|x| self.kappa(x), a, b, FRENET_TOL),
        }
    }

    /// Sub-intervals of [a, b] (or [b, a] traversed backwards) split at the support boundary.
    fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mut cuts = vec![a];
        let mut inner: Vec<f64> = self.breakpoints().into_iter().filter(|&p| p > lo && p < hi).collect();
        if a > b {
            inner.reverse();
        }
        cuts.extend(inner);
        cuts.push(b);
        cuts.windows(2).filter(|w| w[0] != w[1]).map(|w| (w[0], w[1])).collect()
    }
}

/// Position and moving frame of the base curve at arc length `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetState {
    pub s: f64,
    pub gamma: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub theta: f64,
}

impl FrenetState {
    fn origin() -> Self {
        Self::from_angle(0.0, [0.0, 0.0], 0.0)
    }

    fn from_angle(s: f64, gamma: [f64; 2], theta: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Self { s, gamma, tangent: [cos, sin], normal: [-sin, cos], theta }
    }

    fn advance(&self, profile: &CurvatureProfile, target: f64) -> Self {
        let mut gamma = self.gamma;
        let mut theta = self.theta;
        for (a, b) in profile.pieces(self.s, target) {
            match profile.piece(0.5 * (a + b)) {
                Piece::Flat => {
                    gamma[0] += (b - a) * theta.cos();
                    gamma[1] += (b - a) * theta.sin();
                }
                Piece::Constant(k) => {
                    let next = theta + k * (b - a);
                    gamma[0] += (next.sin() - theta.sin()) / k;
                    gamma[1] += (theta.cos() - next.cos()) / k;
                    theta = next;
                }
                Piece::Smooth => {
                    let start = theta;
                    let angle = |x: f64| start + profile.kappa_integral(a, x);
                    gamma[0] += quadrature::adaptive(|x| angle(x).cos(), a, b, FRENET_TOL);
                    gamma[1] += quadrature::adaptive(|x| angle(x).sin(), a, b, FRENET_TOL);
                    theta = angle(b);
                }
            }
        }
        Self::from_angle(target, gamma, theta)
    }
}

pub fn frenet(profile: &CurvatureProfile, s: f64) -> FrenetState {
    FrenetState::origin().advance(profile, s)
}

/// Frenet states at many arc-length positions, integrated outward from `s = 0`.
pub fn frenet_path(profile: &CurvatureProfile, s_values: &[f64]) -> Vec<FrenetState> {
    let mut order: Vec<usize> = (0..s_values.len()).collect();
    order.sort_by(|&a, &b| s_values[a].total_cmp(&s_values[b]));
    let mut out = vec![FrenetState::origin(); s_values.len()];
    let split = order.partition_point(|&i| s_values[i] < 0.0);
    let mut state = FrenetState::origin();
    for &i in &order[split..] {
        state = state.advance(profile, s_values[i]);
        out[i] = state;
    }
    state = FrenetState::origin();
    for &i in order[..split].iter().rev() {
        state = state.advance(profile, s_values[i]);
        out[i] = state;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub width_ok: bool,
    pub injectivity_sampled_ok: bool,
}

/// A curvature profile thickened to half-width `epsilon`, truncated to `|s| <= truncation_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeGeometry {
    pub profile: CurvatureProfile,
    pub epsilon: f64,
    pub truncation_s: f64,
    pub validity: Validity,
}

/// Default truncation: curvature support plus ten decay lengths.
pub fn default_truncation(profile: &CurvatureProfile, epsilon: f64) -> f64 {
    profile.support_radius + 10.0 * f64::max(1.0, 1.0 / epsilon)
}

pub fn validate_tube(profile: CurvatureProfile, epsilon: f64, samples: usize) -> Result<TubeGeometry> {
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!("injectivity sampling needs at least 1000 samples, got {samples}")));
    }
    let geom = check_width(profile, epsilon)?;
    let ok = sampled_overlap_count(&geom, samples, epsilon / samples as f64) == 0;
    Ok(TubeGeometry { validity: Validity { injectivity_sampled_ok: ok, ..geom.validity }, ..geom })
}

/// Width checks only; injectivity is recorded as unchecked (`false`).
pub fn check_width(profile: CurvatureProfile, epsilon: f64) -> Result<TubeGeometry> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::NonPositiveWidth(epsilon));
    }
    if profile.sup_kappa > 0.0 {
        let limit = 1.0 / (2.0 * profile.sup_kappa);
        if epsilon >= limit {
            return Err(Error::WidthTooLarge { epsilon, limit });
        }
    }
    Ok(TubeGeometry {
        profile,
        epsilon,
        truncation_s: default_truncation(&profile, epsilon),
        validity: Validity { width_ok: true, injectivity_sampled_ok: false },
    })
}

/// Number of pairs of sample points, not adjacent in the parameter grid, whose
/// images under the tube map are closer than `min_separation`.
///
/// The grid is `samples x samples` over `[-S, S] x [-1, 1]`.
pub fn sampled_overlap_count(geom: &TubeGeometry, samples: usize, min_separation: f64) -> usize {
    let points = sample_images(geom, samples);
    let cell = min_separation;
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (idx, &p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(idx);
    }
    let mut count = 0;
    for (idx, &p) in points.iter().enumerate() {
        let (cx, cy) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(others) = buckets.get(&(cx + dx, cy + dy)) else { continue };
                for &other in others {
                    if other <= idx || grid_adjacent(idx, other, samples) {
                        continue;
                    }
                    let q = points[other];
                    if (p[0] - q[0]).hypot(p[1] - q[1]) < min_separation {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

pub(crate) fn grid_adjacent(a: usize, b: usize, samples: usize) -> bool {
    let (ia, ja) = (a / samples, a % samples);
    let (ib, jb) = (b / samples, b % samples);
    ia.abs_diff(ib) <= 1 && ja.abs_diff(jb) <= 1
}

/// Images of the `samples x samples` parameter grid, indexed `i * samples + j`.
pub fn sample_images(geom: &TubeGeometry, samples: usize) -> Vec<[f64; 2]> {
    let s_max = geom.truncation_s;
    let step = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * k as f64 / (samples - 1) as f64;
    let s_values: Vec<f64> = (0..samples).map(|i| step(i, -s_max, s_max)).collect();
    let frames = frenet_path(&geom.profile, &s_values);
    let mut points = Vec::with_capacity(samples * samples);
    for frame in &frames {
        for j in 0..samples {
            let offset = geom.epsilon * step(j, -1.0, 1.0);
            points.push([frame.gamma[0] + offset * frame.normal[0], frame.gamma[1] + offset * frame.normal[1]]);
        }
    }
    points
}

impl TubeGeometry {
    /// Replace the truncation length of the straightened strip.
    pub fn with_truncation(mut self, truncation_s: f64) -> Result<Self> {
        if !(truncation_s > 0.0) || !truncation_s.is_finite() {
            return Err(Error::InvalidArgument(format!("truncation length must be positive, got {truncation_s}")));
        }
        self.truncation_s = truncation_s;
        Ok(self)
    }

    /// `1 - epsilon t kappa(s)`.
    pub fn metric_factor(&self, s: f64, t: f64) -> f64 {
        1.0 - self.epsilon * t * self.profile.kappa(s)
    }
}

pub fn tube_map(geom: &TubeGeometry, s: f64, t: f64) -> Result<[f64; 2]> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(t));
    }
    let frame = frenet(&geom.profile, s);
    let offset = geom.epsilon * t;
    Ok([frame.gamma[0] + offset * frame.normal[0], frame.gamma[1] + offset * frame.normal[1]])
}

/// Curvature-induced potential of the straightened strip at `(s, t)`.
pub fn geometric_potential(geom: &TubeGeometry, s: f64, t: f64) -> Result<f64> {
    potential_from_jet(geom.epsilon, t, geom.profile.jet(s)).ok_or_else(|| Error::DegenerateJacobian {
        s,
        t,
        value: geom.metric_factor(s, t),
    })
}

/// Same as [`geometric_potential`] for a precomputed jet; `None` when `1 - eps t kappa <= 0`.
pub fn potential_from_jet(epsilon: f64, t: f64, jet: CurvatureJet) -> Option<f64> {
    let et = epsilon * t;
    let g = 1.0 - et * jet.kappa;
    if g <= 0.0 {
        return None;
    }
    Some(
        -jet.kappa * jet.kappa / (4.0 * g * g)
            - jet.d2 * et / (2.0 * g * g * g)
            - 5.0 * jet.d1 * jet.d1 * et * et / (4.0 * g * g * g * g),
    )
}
