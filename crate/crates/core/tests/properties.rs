use std::f64::consts::PI;

use mosco_core::elliptic::PoissonProblem;
use mosco_core::spectral::HeatFlow;
use mosco_core::{
    build_mesh, classify_nodes, dirichlet_spectrum, BallSpec, Convention, MassKind, SpaceDescriptor, Weight,
};
use proptest::prelude::*;

fn spaces() -> impl Strategy<Value = SpaceDescriptor> {
    prop_oneof![
        (-5.0..5.0f64, 0.5..10.0f64).prop_map(|(a, l)| SpaceDescriptor::interval(a, a + l).unwrap()),
        (-5.0..5.0f64).prop_map(|a| SpaceDescriptor::half_line(a).unwrap()),
        Just(SpaceDescriptor::line()),
        (0.5..20.0f64).prop_map(|l| SpaceDescriptor::circle(l).unwrap()),
        (1.0..5.0f64).prop_map(|n| SpaceDescriptor::cone(n).unwrap()),
    ]
}

/// A point of the space from a unit parameter.
fn point(space: &SpaceDescriptor, u: f64) -> f64 {
    let (lo, hi) = space.bounds();
    let lo = if lo.is_finite() { lo } else { -10.0 };
    let hi = if hi.is_finite() { hi } else { lo.max(-10.0) + 20.0 };
    lo + u * (hi - lo)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(space in spaces(), u in 0.0..1.0f64, v in 0.0..1.0f64, w in 0.0..1.0f64) {
        let (x, y, z) = (point(&space, u), point(&space, v), point(&space, w));
        let dxy = space.distance(x, y).unwrap();
        let dyz = space.distance(y, z).unwrap();
        let dxz = space.distance(x, z).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!(space.distance(x, x).unwrap() == 0.0);
        prop_assert!((dxy - space.distance(y, x).unwrap()).abs() <= 1e-12 * (1.0 + dxy));
        prop_assert!(dxz <= dxy + dyz + 1e-12 * (1.0 + dxy + dyz));
    }

    #[test]
    fn annulus_is_additive_and_monotone(
        space in spaces(),
        u in 0.0..1.0f64,
        r in 0.05..3.0f64,
        d1 in 0.01..0.5f64,
        d2 in 0.01..0.5f64,
    ) {
        let ball = BallSpec::new(point(&space, u), r);
        prop_assume!(space.validate_ball(&ball).is_ok());
        let total = space.ball_measure(&ball).unwrap();
        prop_assume!(total > 0.0);
        let (small, large) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let a_small = space.annulus_measure(&ball, small).unwrap();
        let a_large = space.annulus_measure(&ball, large).unwrap();
        prop_assert!(a_small <= a_large + 1e-12 * total);
        // annulus plus inner ball is the whole ball
        let inner = space.ball_measure(&BallSpec::new(ball.center, (1.0 - large) * r)).unwrap();
        prop_assert!((inner + a_large - total).abs() <= 1e-10 * total);
        let bound = space.annulus_ratio_bound(&ball).unwrap();
        prop_assert!(space.annulus_ratio(&ball, small).unwrap() <= bound * small * (1.0 + 1e-10));
    }

    #[test]
    fn key_value_text_round_trips(space in spaces()) {
        let text = space.to_string();
        let back: SpaceDescriptor = text.parse().unwrap();
        prop_assert_eq!(back, space);
    }

    #[test]
    fn h0_free_set_is_inside_hhat0(space in spaces(), u in 0.0..1.0f64, r in 0.1..3.0f64) {
        let ball = BallSpec::new(point(&space, u), r);
        prop_assume!(space.validate_ball(&ball).is_ok());
        let mesh = build_mesh(&space, &ball, r / 20.0).unwrap();
        let h0 = classify_nodes(&space, &mesh, &ball, Convention::H0).unwrap();
        let hh = classify_nodes(&space, &mesh, &ball, Convention::Hhat0).unwrap();
        prop_assert!(h0.free.iter().all(|i| hh.free.contains(i)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn conventions_are_ordered(space in spaces(), u in 0.0..1.0f64, r in 0.2..3.0f64) {
        let ball = BallSpec::new(point(&space, u), r);
        prop_assume!(space.validate_ball(&ball).is_ok());
        let mesh = build_mesh(&space, &ball, r / 40.0).unwrap();
        let a = dirichlet_spectrum(&space, &mesh, &ball, Convention::H0, 3);
        let b = dirichlet_spectrum(&space, &mesh, &ball, Convention::Hhat0, 3);
        if let (Ok(a), Ok(b)) = (a, b) {
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                prop_assert!(*x >= *y - 1e-10 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn measure_scaling_leaves_spectrum_unchanged(c in 0.01..100.0f64, r in 0.3..2.0f64) {
        let base = SpaceDescriptor::interval(0.0, 4.0).unwrap();
        let scaled = base.clone().with_weight(Weight::Constant { density: c }).unwrap();
        let ball = BallSpec::new(2.0, r);
        let mesh = build_mesh(&base, &ball, 0.01).unwrap();
        let a = dirichlet_spectrum(&base, &mesh, &ball, Convention::H0, 4).unwrap();
        let b = dirichlet_spectrum(&scaled, &mesh, &ball, Convention::H0, 4).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn length_scaling_divides_by_square(c in 0.1..10.0f64) {
        let ball = BallSpec::new(1.0, 0.75);
        let a_space = SpaceDescriptor::half_line(0.0).unwrap();
        let b_space = SpaceDescriptor::half_line(0.0).unwrap();
        let b_ball = BallSpec::new(c, 0.75 * c);
        let a_mesh = build_mesh(&a_space, &ball, 0.01).unwrap();
        let b_mesh = build_mesh(&b_space, &b_ball, 0.01 * c).unwrap();
        let a = dirichlet_spectrum(&a_space, &a_mesh, &ball, Convention::H0, 4).unwrap();
        let b = dirichlet_spectrum(&b_space, &b_mesh, &b_ball, Convention::H0, 4).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x / (c * c) - y).abs() <= 1e-10 * y.abs());
        }
    }

    #[test]
    fn heat_flow_contracts(seed in any::<u64>(), t1 in 0.0..0.5f64, dt in 0.0..0.5f64) {
        use rand::{Rng, SeedableRng};
        let space = SpaceDescriptor::circle(2.0 * PI).unwrap();
        let ball = BallSpec::new(0.0, 2.0);
        let mesh = build_mesh(&space, &ball, 0.05).unwrap();
        let heat = HeatFlow::from_problem(&space, &mesh, &ball, Convention::H0, MassKind::Consistent).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f0 = vec![0.0; mesh.len()];
        for &i in &heat.spectrum().sets.free {
            f0[i] = rng.gen_range(-1.0..1.0);
        }
        let n1 = heat.l2_norm(&heat.evolve(&f0, t1).unwrap());
        let n2 = heat.l2_norm(&heat.evolve(&f0, t1 + dt).unwrap());
        prop_assert!(n2 <= n1 * (1.0 + 1e-12) + 1e-14);
        let e1 = heat.energy(&f0, t1).unwrap();
        let e2 = heat.energy(&f0, t1 + dt).unwrap();
        prop_assert!(e2 <= e1 * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn dirichlet_principle(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let space = SpaceDescriptor::cone(2.5).unwrap();
        let ball = BallSpec::new(1.5, 1.0);
        let mesh = build_mesh(&space, &ball, 0.02).unwrap();
        let problem = PoissonProblem::new(&space, &mesh, &ball, Convention::H0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = mesh.nodes().iter().map(|t| (2.0 * t).sin() + rng.gen_range(-0.1..0.1)).collect();
        let g: Vec<f64> = (0..mesh.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = problem.solve(&f, &g).unwrap();
        prop_assert!(sol.diagnostics.galerkin_residual <= 1e-10);
        let base = problem.functional(&sol.solution, &g);
        for _ in 0..5 {
            let mut p = sol.solution.clone();
            let mut dir = vec![0.0; mesh.len()];
            for &i in &problem.sets().free {
                dir[i] = rng.gen_range(-1.0..1.0);
            }
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (x, d) in p.iter_mut().zip(&dir) {
                *x += 1e-3 * d / norm;
            }
            prop_assert!(problem.functional(&p, &g) >= base - 1e-14 * base.abs().max(1.0));
        }
    }
}
