use proptest::prelude::*;

use fracell::random::{seeded, smooth_random};
use fracell::regularity::{
    boundary_exponent, campanato_seminorm, harnack_quotient, interior_exponent, bump, CampanatoMode, CampanatoProbe,
};
use fracell::{assemble, eigendecompose, BoundaryCondition, CoefficientField, CoefficientSpec, Grid, GridFunction};

fn mode() -> impl Strategy<Value = CampanatoMode> {
    prop_oneof![Just(CampanatoMode::Oscillation), Just(CampanatoMode::Linear), Just(CampanatoMode::Raw)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exponent_fits_are_scale_invariant(beta in 0.2f64..1.8, c in 1e-3f64..1e3, negate in any::<bool>()) {
        let g = Grid::new_1d(1.0, 2049).unwrap();
        let u = GridFunction::from_fn(&g, |x| (x[0] - 0.5).abs().powf(beta) + x[0]);
        let c = if negate { -c } else { c };
        for m in [CampanatoMode::Oscillation, CampanatoMode::Linear] {
            let a = interior_exponent(&u, &[0.5], m).unwrap();
            let b = interior_exponent(&u.scale(c), &[0.5], m).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-10);
        }
        let w = GridFunction::from_fn(&g, |x| x[0].powf(beta));
        let a = boundary_exponent(&w, &[0.0], BoundaryCondition::Dirichlet).unwrap();
        let b = boundary_exponent(&w.scale(c), &[0.0], BoundaryCondition::Dirichlet).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() < 1e-10);
    }

    #[test]
    fn seminorm_triangle_inequality(seed in 0u64..1000, alpha in 0.0f64..1.0, m in mode()) {
        // the seminorm is squared; its square root is a seminorm
        let g = Grid::new_2d([1.0, 1.0], [129, 129]).unwrap();
        let mut rng = seeded(seed);
        let f = smooth_random(&g, BoundaryCondition::Neumann, 6, 0.5, &mut rng);
        let h = smooth_random(&g, BoundaryCondition::Neumann, 6, 0.5, &mut rng);
        let probe = CampanatoProbe::dyadic(&g, &[0.5, 0.5], alpha, m).unwrap();
        let n = |u: &GridFunction| campanato_seminorm(u, &probe).unwrap().sqrt();
        let sum = f.add(&h).unwrap();
        prop_assert!(n(&sum) <= (n(&f) + n(&h)) * (1.0 + 1e-12));
        prop_assert!((n(&f.scale(-2.5)) - 2.5 * n(&f)).abs() <= 1e-12 * n(&f).max(1e-300));
    }

    #[test]
    fn probes_are_deterministic(seed in 0u64..1000) {
        let g = Grid::new_1d(1.0, 1025).unwrap();
        let u = smooth_random(&g, BoundaryCondition::Dirichlet, 10, 1.0, &mut seeded(seed));
        let a = interior_exponent(&u, &[0.37], CampanatoMode::Linear).unwrap();
        let b = interior_exponent(&u, &[0.37], CampanatoMode::Linear).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn recovers_known_power_laws() {
    let g = Grid::new_1d(1.0, 16385).unwrap();
    for beta in [0.3, 0.6, 0.9] {
        let u = GridFunction::from_fn(&g, |x| (x[0] - 0.5).abs().powf(beta));
        let e = interior_exponent(&u, &[0.5], CampanatoMode::Oscillation).unwrap();
        assert!((e.exponent - beta).abs() < 0.05, "β={beta}: {}", e.exponent);
    }
    // beyond 1 only the affine-subtracted mode sees the exponent
    let u = GridFunction::from_fn(&g, |x| (x[0] - 0.5).abs().powf(1.4) + 3.0 * x[0]);
    let e = interior_exponent(&u, &[0.5], CampanatoMode::Linear).unwrap();
    assert!((e.exponent - 1.4).abs() < 0.05, "{}", e.exponent);
}

#[test]
fn harnack_quotient_is_finite_and_resolution_stable() {
    let mut q = Vec::new();
    for n in [65, 129] {
        let g = Grid::new_1d(1.0, n).unwrap();
        let c = CoefficientField::sample(&g, &CoefficientSpec::Sine { amplitude: 0.3, frequency: 1.0 }).unwrap();
        let b = eigendecompose(&assemble(&g, &c, BoundaryCondition::Dirichlet).unwrap()).unwrap();
        let f = bump(&g, &[0.85], 0.1);
        let r = harnack_quotient(&b, 0.4, &[0.35], 0.2, &f).unwrap();
        assert!(r.inf > 0.0 && r.quotient >= 1.0);
        q.push(r.quotient);
    }
    assert!((q[1] / q[0] - 1.0).abs() < 0.2, "{q:?}");
}
