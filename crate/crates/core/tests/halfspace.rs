use proptest::prelude::*;

use fracell::halfspace::{
    boundary_growth_oracle, closed_form_factor, closed_form_halfline, halfline_inverse_quadrature, halfspace_kernel,
    reduction_1d_check, reflect, upper_half, HalfLineBc, HalfLineProblem, HalfLineRhs, Parity,
};
use fracell::regularity::{boundary_exponent_with, BoundaryWindow};
use fracell::special::frac_laplacian_constant;
use fracell::{BoundaryCondition, Grid, GridFunction};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_ordering(
        x in prop::collection::vec(0.01f64..2.0, 2),
        z in prop::collection::vec(0.01f64..2.0, 2),
        s in 0.05f64..0.95,
    ) {
        prop_assume!((x[0] - z[0]).hypot(x[1] - z[1]) > 1e-3);
        let d = (x[0] - z[0]).hypot(x[1] - z[1]);
        let free = frac_laplacian_constant(2, s) * d.powf(-(2.0 + 2.0 * s));
        let dir = halfspace_kernel(&x, &z, s, BoundaryCondition::Dirichlet).unwrap();
        let neu = halfspace_kernel(&x, &z, s, BoundaryCondition::Neumann).unwrap();
        prop_assert!(0.0 < dir && dir <= free && free <= neu);
    }

    #[test]
    fn reflection_is_an_exact_mirror(values in prop::collection::vec(-5.0f64..5.0, 8)) {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let mut v = vec![0.0];
        v.extend(values);
        let u = GridFunction::new(&g, v).unwrap();
        for parity in [Parity::Odd, Parity::Even] {
            let r = reflect(&u, parity).unwrap();
            let sign = if parity == Parity::Odd { -1.0 } else { 1.0 };
            let n = r.values.len();
            for i in 0..n {
                prop_assert_eq!(r.values[i], sign * r.values[n - 1 - i]);
            }
            let top = upper_half(&r.values).unwrap();
            prop_assert_eq!(top.values(), u.values());
        }
    }
}

#[test]
fn odd_reflection_requires_a_zero_trace() {
    let g = Grid::new_1d(1.0, 9).unwrap();
    let u = GridFunction::from_fn(&g, |x| 1.0 + x[0]);
    assert!(reflect(&u, Parity::Odd).is_err());
    assert!(reflect(&u, Parity::Even).is_ok());
}

#[test]
fn quadrature_is_proportional_to_the_closed_forms() {
    let xs: Vec<f64> = (1..10).map(|k| 0.05 * k as f64).collect();
    let cases = [
        (0.2, HalfLineRhs::One),
        (0.35, HalfLineRhs::One),
        (0.3, HalfLineRhs::IndicatorUnit),
        (0.5, HalfLineRhs::IndicatorUnit),
        (0.8, HalfLineRhs::IndicatorUnit),
    ];
    for (s, rhs) in cases {
        let p = HalfLineProblem::new(s, rhs, HalfLineBc::DirichletOdd).unwrap();
        let q = halfline_inverse_quadrature(&p, &xs).unwrap();
        for (x, v) in xs.iter().zip(&q) {
            let c = closed_form_halfline(&p, *x).unwrap() * closed_form_factor(&p);
            assert!((v - c).abs() <= 1e-9 * c.abs(), "s={s} {rhs:?} x={x}: {v} vs {c}");
        }
    }
}

#[test]
fn unsupported_problems_are_rejected() {
    assert!(HalfLineProblem::new(0.6, HalfLineRhs::One, HalfLineBc::DirichletOdd).is_err());
    assert!(HalfLineProblem::new(0.3, HalfLineRhs::One, HalfLineBc::NeumannEven).is_err());
}

#[test]
fn boundary_probe_calibrates_on_the_closed_form() {
    // the exponent probe must recover 2s on u = c x^{2s} before it is trusted
    let g = Grid::new_1d(1.0, 4097).unwrap();
    for s in [0.15, 0.25, 0.4] {
        let p = HalfLineProblem::new(s, HalfLineRhs::One, HalfLineBc::DirichletOdd).unwrap();
        let u = GridFunction::from_fn(&g, |x| if x[0] > 0.0 { closed_form_halfline(&p, x[0]).unwrap() } else { 0.0 });
        let fit = boundary_exponent_with(&u, &[0.0], BoundaryCondition::Dirichlet, &BoundaryWindow::default()).unwrap();
        assert!((fit.exponent - 2.0 * s).abs() <= 0.02, "s={s}: {}", fit.exponent);
        let oracle = boundary_growth_oracle(s).unwrap();
        assert!((oracle.exponent - 2.0 * s).abs() < 1e-15 && !oracle.log_correction);
    }
    assert!(boundary_growth_oracle(0.5).unwrap().log_correction);
}

#[test]
fn strip_reduces_to_one_dimension() {
    let strip = Grid::new_2d([1.0, 1.0], [9, 17]).unwrap();
    for s in [0.3, 0.6] {
        let r = reduction_1d_check(&strip, BoundaryCondition::Dirichlet, |t| t * (1.0 - t) * (1.0 + t), s).unwrap();
        assert!(r.max_deviation < 1e-10, "s={s}: {}", r.max_deviation);
    }
}
