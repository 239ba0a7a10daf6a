use proptest::prelude::*;

use fracell::extension::{
    dtn_extract, energy_target, extension_bessel_eval, extension_energy, extension_semigroup_eval, field_at_height,
    observed_order, solve_extension, ExtensionMesh,
};
use fracell::random::{seeded, smooth_random};
use fracell::spectral::fractional_apply;
use fracell::{assemble, eigendecompose, BoundaryCondition, CoefficientField, CoefficientSpec, EigenBasis, Grid};

fn basis(grid: &Grid) -> EigenBasis {
    let c = CoefficientField::sample(grid, &CoefficientSpec::Sine { amplitude: 0.4, frequency: 1.0 }).unwrap();
    eigendecompose(&assemble(grid, &c, BoundaryCondition::Dirichlet).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weak_residual_is_at_solver_tolerance(seed in 0u64..1000, s in 0.1f64..0.9, layers in 16usize..80) {
        let g = Grid::new_1d(1.0, 33).unwrap();
        let b = basis(&g);
        let u = smooth_random(&g, BoundaryCondition::Dirichlet, 6, 1.0, &mut seeded(seed));
        let field = solve_extension(&b, &u, &ExtensionMesh::for_basis(&b, s, layers).unwrap()).unwrap();
        prop_assert!(field.residual <= 1e-10);
        prop_assert!(field.trace().rel_error(&u).unwrap() <= 1e-13);
    }

    #[test]
    fn solution_is_linear_in_the_trace(seed in 0u64..1000, c in -4.0f64..4.0) {
        let g = Grid::new_1d(1.0, 17).unwrap();
        let b = basis(&g);
        let u = smooth_random(&g, BoundaryCondition::Dirichlet, 4, 1.0, &mut seeded(seed));
        let mesh = ExtensionMesh::for_basis(&b, 0.4, 24).unwrap();
        let a = solve_extension(&b, &u.scale(c), &mesh).unwrap();
        let z = solve_extension(&b, &u, &mesh).unwrap().scaled(c);
        for j in 0..mesh.layers() {
            for (p, q) in a.layer_values(j).iter().zip(z.layer_values(j)) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
            }
        }
    }
}

#[test]
fn dtn_converges_to_the_spectral_power_in_two_dimensions() {
    let g = Grid::new_2d([1.0, 1.0], [17, 17]).unwrap();
    let b = basis(&g);
    let u = smooth_random(&g, BoundaryCondition::Dirichlet, 3, 2.0, &mut seeded(4));
    for s in [0.3, 0.7] {
        let target = fractional_apply(&b, &u, s).unwrap();
        let e_target = energy_target(&b, &u, s).unwrap();
        let mut errs = Vec::new();
        let mut energy = Vec::new();
        for layers in [32, 64, 128] {
            let field = solve_extension(&b, &u, &ExtensionMesh::for_basis(&b, s, layers).unwrap()).unwrap();
            errs.push(dtn_extract(&field).rel_error(&target).unwrap());
            energy.push((extension_energy(&field) - e_target).abs());
        }
        assert!(observed_order(&errs).unwrap() >= 0.8, "s={s}: {errs:?}");
        assert!(energy.windows(2).all(|w| w[1] < w[0]), "s={s}: {energy:?}");
    }
}

#[test]
fn bessel_and_semigroup_representations_agree() {
    let g = Grid::new_1d(1.0, 33).unwrap();
    let b = basis(&g);
    let u = smooth_random(&g, BoundaryCondition::Dirichlet, 6, 1.0, &mut seeded(2));
    for s in [0.25, 0.5, 0.75] {
        for y in [0.02, 0.2, 1.0] {
            let a = extension_bessel_eval(&b, &u, s, y).unwrap();
            let c = extension_semigroup_eval(&b, &u, s, y).unwrap();
            assert!(a.rel_error(&c).unwrap() < 1e-6, "s={s} y={y}");
        }
    }
}

#[test]
fn finite_difference_field_tracks_the_series_inside_the_cylinder() {
    let g = Grid::new_1d(1.0, 65).unwrap();
    let b = basis(&g);
    let u = smooth_random(&g, BoundaryCondition::Dirichlet, 4, 2.0, &mut seeded(8));
    let s = 0.4;
    let field = solve_extension(&b, &u, &ExtensionMesh::for_basis(&b, s, 128).unwrap()).unwrap();
    for y in [0.1, 0.3] {
        let fd = field_at_height(&field, y).unwrap();
        let series = extension_bessel_eval(&b, &u, s, y).unwrap();
        assert!(fd.rel_error(&series).unwrap() < 5e-3, "y={y}");
    }
}
