use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use waveguide_core::eigensolve::{count_below, dense_oracle};
use waveguide_core::geometry::{check_width, frenet, CurvatureProfile};
use waveguide_core::spectrum::clusters;
use waveguide_core::strip::{assemble_square_form, rayleigh, SpinorField, StripGrid};
use waveguide_core::transverse::{bracket, edge_deficit, first_energy, secular, solve_root, TransverseMode};

fn profile() -> impl Strategy<Value = CurvatureProfile> {
    prop_oneof![
        (0.1..2.0f64, 0.3..2.0f64).prop_map(|(k, l)| CurvatureProfile::polynomial_bump(k, l).unwrap()),
        (0.1..2.0f64, 0.3..2.0f64).prop_map(|(k, s)| CurvatureProfile::gaussian_bump(k, s).unwrap()),
        (0.1..2.0f64, 0.3..2.0f64).prop_map(|(k, l)| CurvatureProfile::circular_arc(k, l).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_stay_in_their_brackets(m in 0.0..200.0f64, p in 1usize..8) {
        let r = solve_root(m, p, 1e-14).unwrap();
        let [lo, hi] = bracket(p);
        prop_assert!(r.energy >= lo && r.energy < hi);
        let scale = 1.0 + m + r.energy.sqrt();
        prop_assert!(secular(m, r.energy).abs() <= 1e-12 * scale);
    }

    #[test]
    fn first_energy_increases_with_mass(m in 0.0..100.0f64, dm in 1e-3..10.0f64) {
        let (a, b) = (first_energy(m).unwrap(), first_energy(m + dm).unwrap());
        prop_assert!(b > a);
        prop_assert!(b < PI * PI / 4.0);
    }

    #[test]
    fn edge_deficit_matches_difference(m in 0.0..50.0f64) {
        let direct = PI * PI / 4.0 - first_energy(m).unwrap();
        prop_assert!((edge_deficit(m).unwrap() - direct).abs() <= 1e-12);
    }

    #[test]
    fn transverse_modes_obey_boundary_condition(k in -5.0..5.0f64, m in 0.01..20.0f64, p in 1usize..4) {
        let mode = TransverseMode::new(k, m, p, true).unwrap();
        let [a, b] = mode.eval(-1.0);
        prop_assert!((b - a).norm() <= 1e-9 * (1.0 + a.norm()));
        let [a, b] = mode.eval(1.0);
        prop_assert!((b + a).norm() <= 1e-9 * (1.0 + a.norm()));
    }

    #[test]
    fn frenet_frame_is_orthonormal(prof in profile(), s in -4.0..4.0f64) {
        let f = frenet(&prof, s);
        let dot = f.tangent[0] * f.normal[0] + f.tangent[1] * f.normal[1];
        prop_assert!(dot.abs() < 1e-14);
        prop_assert!((f.tangent[0].hypot(f.tangent[1]) - 1.0).abs() < 1e-14);
        prop_assert!((f.theta - prof.theta(s)).abs() < 1e-9);
        prop_assert!(f.gamma[0].hypot(f.gamma[1]) <= s.abs() + 1e-9);
    }

    #[test]
    fn metric_factor_is_affine_in_t(prof in profile(), s in -3.0..3.0f64, t in -1.0..1.0f64) {
        let eps = 0.4 / prof.sup_kappa;
        let geom = check_width(prof, eps).unwrap();
        let g = geom.metric_factor(s, t);
        prop_assert!((g - (1.0 - eps * t * prof.kappa(s))).abs() < 1e-15);
        prop_assert!(g >= 0.5);
    }

    #[test]
    fn clusters_preserve_multiplicity(mut values in prop::collection::vec(0.0..10.0f64, 0..20)) {
        values.sort_by(f64::total_cmp);
        let total: usize = clusters(&values, 1e-6).iter().map(|c| c.1).sum();
        prop_assert_eq!(total, values.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rayleigh_quotient_bounds_lowest_eigenvalue(m in 0.0..10.0f64, seed in prop::collection::vec(-1.0..1.0f64, 8)) {
        let geom = check_width(CurvatureProfile::polynomial_bump(1.0, 1.0).unwrap(), 0.3).unwrap().with_truncation(2.5).unwrap();
        let grid = StripGrid::for_geometry(&geom, 15, 5).unwrap();
        let forms = assemble_square_form(&geom, m, &grid).unwrap();
        let lowest = dense_oracle(&forms).unwrap()[0];
        let s_max = grid.s_max;
        let field = SpinorField::from_fn(grid, |s, t| {
            let envelope = if s.abs() == s_max { 0.0 } else { s_max * s_max - s * s };
            let w = (PI * t / 2.0).cos() + seed[0] * t + seed[1] * s;
            let bulk = Complex64::new(w + seed[2] * s * t, seed[3] * s) * envelope;
            let z = Complex64::new(seed[4] + seed[5] * s, seed[6] + seed[7] * t) * (1.0 - t * t) * envelope;
            [bulk, bulk * -t + z]
        });
        let q = rayleigh(&forms, &field).unwrap();
        prop_assert!(q >= lowest - 1e-9 * lowest.abs().max(1.0));
    }

    #[test]
    fn inertia_is_monotone_in_shift(m in 0.0..10.0f64, a in 0.0..400.0f64, d in 0.0..400.0f64) {
        let geom = check_width(CurvatureProfile::polynomial_bump(1.0, 1.0).unwrap(), 0.3).unwrap().with_truncation(2.5).unwrap();
        let grid = StripGrid::for_geometry(&geom, 15, 5).unwrap();
        let forms = assemble_square_form(&geom, m, &grid).unwrap();
        let values = dense_oracle(&forms).unwrap();
        let (lo, hi) = (count_below(&forms, a).unwrap(), count_below(&forms, a + d).unwrap());
        prop_assert!(lo <= hi);
        let near = |x: f64| values.iter().any(|v| (v - x).abs() < 1e-8 * x.max(1.0));
        if !near(a) {
            prop_assert_eq!(lo, values.iter().filter(|&&v| v < a).count());
        }
    }
}
