//! Fractional powers `L^s` of divergence-form elliptic operators
//! `L = -div(A(x) ∇)` on axis-aligned boxes.
//!
//! The crate computes `L^s u` and `L^{-s} f` through three independent routes
//! and cross-checks them against each other:
//!
//! * the **spectral** route ([`spectral`]): a full eigendecomposition of the
//!   discrete operator, `L^s u = Σ λ_k^s u_k φ_k`;
//! * the **semigroup** route ([`heat`], [`kernels`]): singular `t`-integrals of
//!   the heat semigroup `e^{-tL}`, giving the jump kernel `K_s`, the killing
//!   term `B_s`, the Green function `G_s` and the Poisson kernel `P_y^s`;
//! * the **extension** route ([`extension`]): a degenerate weighted elliptic
//!   problem on the cylinder `Ω × (0, Y)` whose conormal flux at `y = 0`
//!   recovers `L^s u`.
//!
//! On top of these sit closed-form half-line oracles ([`halfspace`]) and
//! probes that measure Hölder/Campanato exponents, boundary growth and
//! Harnack quotients of computed solutions ([`regularity`]).
//!
//! ```
//! use fracell::{BoundaryCondition, CoefficientField, CoefficientSpec, Grid, GridFunction};
//! use fracell::{assemble, eigendecompose, spectral};
//!
//! let grid = Grid::new_1d(1.0, 65).unwrap();
//! let coef = CoefficientField::sample(&grid, &CoefficientSpec::Identity).unwrap();
//! let op = assemble(&grid, &coef, BoundaryCondition::Dirichlet).unwrap();
//! let basis = eigendecompose(&op).unwrap();
//!
//! let f = GridFunction::from_fn(&grid, |x| (std::f64::consts::PI * x[0]).sin());
//! let u = spectral::fractional_solve(&basis, &f, 0.5).unwrap();
//! let back = spectral::fractional_apply(&basis, &u, 0.5).unwrap();
//! assert!(back.sub(&f).unwrap().max_abs() < 1e-9);
//! ```

pub mod coefficient;
pub mod eigen;
pub mod error;
pub mod extension;
pub mod fit;
pub mod grid;
pub mod halfspace;
pub mod heat;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod norms;
pub mod operator;
pub mod quadrature;
pub mod random;
pub mod regularity;
pub mod special;
pub mod spectral;

pub use coefficient::{ellipticity_check, CoefficientField, CoefficientSpec, EllipticityReport};
pub use eigen::{eigendecompose, eigendecompose_dense, EigenBasis, SpectralCoefficients};
pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, Point};
/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use operator::{apply, assemble, assemble_per_axis, BoundaryCondition, DiscreteOperator};

/// Book chapters compiled as doctests so the guide cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/semigroup.md")]
    mod semigroup {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/extension.md")]
    mod extension {}
    #[doc = include_str!("../../../book/src/halfline.md")]
    mod halfline {}
    #[doc = include_str!("../../../book/src/regularity.md")]
    mod regularity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
