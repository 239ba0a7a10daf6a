//! The extension problem `div(y^a B ∇U) = 0` on `Ω × (0, Y)`, `a = 1 − 2s`,
//! whose weighted conormal flux at `y = 0` is `c_s L^s u`.
//!
//! Discretization: the base operator's finite-difference stencil in `x`
//! and piecewise-linear elements on a graded mesh in `y`, with `∫ y^a`
//! integrated exactly on every cell and a lumped (exact weighted hat) mass.
//! The resulting system `S_y ⊗ I + D_y ⊗ M` is diagonalised in `x` by the
//! eigenbasis of `M`, leaving one tridiagonal solve per eigenmode. The top
//! `y = Y` carries a homogeneous Dirichlet lid.

use serde::Serialize;

use crate::eigen::EigenBasis;
use crate::error::{check_fraction, Error, Result};
use crate::fit::fit_line;
use crate::grid::{Grid, GridFunction};
use crate::linalg::solve_tridiagonal;
use crate::operator::DiscreteOperator;
use crate::quadrature::{PowerWeight, SingularQuadrature};
use crate::special::{c_quotient, c_s, gamma};
use crate::kernels::poisson_weight_bessel;
use crate::spectral::check_compatible;

/// Decay required of the lowest mode at the lid.
pub const LID_DECAY: f64 = 1e-8;

/// Graded `y`-mesh `y_j = Y (j/M)^γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionMesh {
    pub s: f64,
    pub a: f64,
    pub grading: f64,
    pub height: f64,
    y: Vec<f64>,
    /// `∫ y^a` over each cell.
    cell_weights: Vec<f64>,
    /// `∫ y^a ψ_j` for each hat function (lumped mass).
    mass: Vec<f64>,
}

/// Default grading `max(2, 1/s)`, enough to resolve the `y^{2s}` layer.
pub fn default_grading(s: f64) -> f64 {
    (1.0 / s).max(2.0)
}

/// Smallest `Y` with `(2^{1−s}/Γ(s)) (√λ Y)^s K_s(√λ Y) < LID_DECAY`.
pub fn lid_height(lambda: f64, s: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            range: "(0, ∞)",
        });
    }
    let mut z = 1.0;
    while poisson_weight_bessel(1.0, s, z)? >= LID_DECAY {
        z += 0.25;
    }
    Ok(z / lambda.sqrt())
}

impl ExtensionMesh {
    pub fn new(s: f64, layers: usize, height: f64, grading: f64) -> Result<Self> {
        check_fraction("s", s)?;
        if layers < 2 {
            return Err(Error::InvalidGrid(format!("{layers} y-layers; need at least 2")));
        }
        if !(height > 0.0 && height.is_finite()) {
            return Err(Error::OutOfRange {
                name: "height",
                value: height,
                range: "(0, ∞)",
            });
        }
        if !(grading >= 1.0) {
            return Err(Error::OutOfRange {
                name: "grading",
                value: grading,
                range: "[1, ∞)",
            });
        }
        let a = 1.0 - 2.0 * s;
        let y: Vec<f64> = (0..=layers)
            .map(|j| height * (j as f64 / layers as f64).powf(grading))
            .collect();
        let i0 = |p: f64, q: f64| (q.powf(1.0 + a) - p.powf(1.0 + a)) / (1.0 + a);
        let i1 = |p: f64, q: f64| (q.powf(2.0 + a) - p.powf(2.0 + a)) / (2.0 + a);
        let cell_weights: Vec<f64> = y.windows(2).map(|w| i0(w[0], w[1])).collect();
        let mut mass = vec![0.0; layers + 1];
        for (j, w) in y.windows(2).enumerate() {
            let (p, q) = (w[0], w[1]);
            let d = q - p;
            // ∫ y^a (q − y)/d on the cell goes to node j, ∫ y^a (y − p)/d to node j+1
            mass[j] += (q * i0(p, q) - i1(p, q)) / d;
            mass[j + 1] += (i1(p, q) - p * i0(p, q)) / d;
        }
        Ok(Self {
            s,
            a,
            grading,
            height,
            y,
            cell_weights,
            mass,
        })
    }

    /// Mesh for `basis` with the lid placed by [`lid_height`] at the lowest
    /// positive eigenvalue and the default grading.
    pub fn for_basis(basis: &EigenBasis, s: f64, layers: usize) -> Result<Self> {
        check_fraction("s", s)?;
        let y = lid_height(basis.lambda_min_positive(), s)?;
        Self::new(s, layers, y, default_grading(s))
    }

    pub fn layers(&self) -> usize {
        self.y.len() - 1
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.mass
    }

    /// Weighted stiffness `∫ y^a ψ_j' ψ_k'` as (diagonal, super-diagonal)
    /// over all `M + 1` nodes.
    fn stiffness(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.layers();
        let mut d = vec![0.0; m + 1];
        let mut e = vec![0.0; m];
        for j in 0..m {
            let k = self.cell_weights[j] / (self.y[j + 1] - self.y[j]).powi(2);
            d[j] += k;
            d[j + 1] += k;
            e[j] = -k;
        }
        (d, e)
    }
}

/// `U(x_i, y_j)` on the active nodes of every layer (the lid layer is zero).
#[derive(Debug, Clone)]
pub struct ExtensionField {
    mesh: ExtensionMesh,
    op: DiscreteOperator,
    layers: Vec<Vec<f64>>,
    /// Relative ℓ² residual of the discrete weak equations.
    pub residual: f64,
}

impl ExtensionField {
    pub fn mesh(&self) -> &ExtensionMesh {
        &self.mesh
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    /// Active-node values of layer `j`.
    pub fn layer_values(&self, j: usize) -> &[f64] {
        &self.layers[j]
    }

    /// Layer `j` on the full base grid (zero on eliminated nodes).
    pub fn layer(&self, j: usize) -> GridFunction {
        self.op.extend(&self.layers[j]).expect("layers have operator size")
    }

    pub fn trace(&self) -> GridFunction {
        self.layer(0)
    }

    /// `(i, j, x, y, U)` rows over the full base grid.
    pub fn rows(&self) -> Vec<(usize, usize, f64, f64, f64)> {
        let g = self.grid();
        let mut out = Vec::with_capacity(g.len() * self.layers.len());
        for (j, &y) in self.mesh.y.iter().enumerate() {
            let f = self.layer(j);
            for i in 0..g.len() {
                out.push((i, j, g.coord(i)[0], y, f[i]));
            }
        }
        out
    }

    /// `c · U`, same mesh.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.layers.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }
}

/// Forcing `F` (horizontal components only, so `F_{n+1} = 0` holds by
/// construction) on every node of every layer, and the flux datum `f`.
#[derive(Debug, Clone)]
pub struct ForcingData {
    /// `field[j][i]` is `F` at base node `i` of layer `j`.
    pub field: Vec<Vec<[f64; 2]>>,
    pub flux: GridFunction,
}

impl ForcingData {
    pub fn zero(grid: &Grid, mesh: &ExtensionMesh) -> Self {
        Self {
            field: vec![vec![[0.0; 2]; grid.len()]; mesh.layers() + 1],
            flux: GridFunction::zeros(grid),
        }
    }

    /// Flux datum only.
    pub fn flux_only(mesh: &ExtensionMesh, flux: GridFunction) -> Self {
        let n = flux.len();
        Self {
            field: vec![vec![[0.0; 2]; n]; mesh.layers() + 1],
            flux,
        }
    }

    pub fn from_fn(grid: &Grid, mesh: &ExtensionMesh, field: impl Fn(&[f64], f64) -> [f64; 2], flux: GridFunction) -> Self {
        let field = mesh
            .y
            .iter()
            .map(|&y| (0..grid.len()).map(|i| field(&grid.coord(i)[..grid.dim()], y)).collect())
            .collect();
        Self { field, flux }
    }
}

/// `A_k = S_y + λ D_y` restricted to rows `first..M` (the lid is eliminated).
fn mode_system(stiff: &(Vec<f64>, Vec<f64>), mass: &[f64], lambda: f64, first: usize) -> (Vec<f64>, Vec<f64>) {
    let m = mass.len() - 1;
    let d: Vec<f64> = (first..m).map(|j| stiff.0[j] + lambda * mass[j]).collect();
    let e: Vec<f64> = (first..m - 1).map(|j| stiff.1[j]).collect();
    (d, e)
}

fn check_mesh(basis: &EigenBasis, mesh: &ExtensionMesh) -> Result<()> {
    if mesh.layers() < 2 {
        return Err(Error::InvalidGrid("mesh needs at least two layers".into()));
    }
    if basis.is_empty() {
        return Err(Error::InvalidGrid("operator has no unknowns".into()));
    }
    Ok(())
}

/// Extension with prescribed trace `U(·,0) = u`.
///
/// Under pure Neumann conditions the constant mode is carried unchanged in
/// `y` (its exact extension), the other modes decay to the lid.
pub fn solve_extension(basis: &EigenBasis, u: &GridFunction, mesh: &ExtensionMesh) -> Result<ExtensionField> {
    check_mesh(basis, mesh)?;
    let op = basis.operator();
    let x = op.restrict(u)?;
    let hat = basis.analyze(&x);
    let m = mesh.layers();
    let stiff = mesh.stiffness();
    let n = basis.len();
    let mut coeffs = vec![vec![0.0; n]; m + 1];
    for (k, &lam) in basis.eigenvalues().iter().enumerate() {
        coeffs[0][k] = hat[k];
        if lam == 0.0 && basis.is_pure_neumann() {
            for c in coeffs.iter_mut().take(m) {
                c[k] = hat[k];
            }
            continue;
        }
        let (d, e) = mode_system(&stiff, &mesh.mass, lam, 1);
        let mut rhs = vec![0.0; m - 1];
        rhs[0] = -stiff.1[0] * hat[k];
        let c = solve_tridiagonal(&d, &e, &rhs)?;
        for (j, v) in c.into_iter().enumerate() {
            coeffs[j + 1][k] = v;
        }
    }
    let layers: Vec<Vec<f64>> = coeffs.iter().map(|c| basis.synthesize(c)).collect();
    let mut field = ExtensionField {
        mesh: mesh.clone(),
        op: op.clone(),
        layers,
        residual: 0.0,
    };
    let rhs = vec![vec![0.0; n]; m + 1];
    field.residual = weak_residual(&field, &rhs, 1);
    Ok(field)
}

/// Nodal right-hand side of `∫ f V(x,0) + ∫ y^a F·∇_x V` divided by the
/// cell volume, on the active nodes of layers `0..M`.
fn forced_rhs(op: &DiscreteOperator, mesh: &ExtensionMesh, data: &ForcingData) -> Result<Vec<Vec<f64>>> {
    let g = op.grid();
    g.check_same(data.flux.grid())?;
    if data.field.len() != mesh.layers() + 1 || data.field.iter().any(|l| l.len() != g.len()) {
        return Err(Error::ShapeMismatch {
            expected: (mesh.layers() + 1) * g.len(),
            found: data.field.iter().map(Vec::len).sum(),
        });
    }
    let nodes = g.nodes();
    let mut out = Vec::with_capacity(mesh.layers());
    for j in 0..mesh.layers() {
        let fj = &data.field[j];
        let row: Vec<f64> = op
            .active()
            .iter()
            .map(|&i| {
                let mi = g.multi_index(i);
                let mut v = 0.0;
                for d in 0..g.dim() {
                    let h = g.spacing(d);
                    for step in [-1i64, 1] {
                        let k = mi[d] as i64 + step;
                        if k < 0 || k >= nodes[d] as i64 {
                            continue;
                        }
                        let mut mq = mi;
                        mq[d] = k as usize;
                        let q = g.index(&mq);
                        let face = 0.5 * (fj[i][d] + fj[q][d]);
                        // F·(V_i − V_q)/h for the face behind, −F·(…) ahead
                        v -= step as f64 * face / h;
                    }
                }
                mesh.mass[j] * v
            })
            .collect();
        out.push(row);
    }
    for (r, &i) in out[0].iter_mut().zip(op.active()) {
        *r += data.flux[i];
    }
    Ok(out)
}

/// Free-trace extension with forcing: `div(y^a B ∇U) = div(y^a F)`,
/// `−y^a U_y = f` at `y = 0`, lateral conditions of the base operator.
pub fn solve_extension_forced(basis: &EigenBasis, data: &ForcingData, mesh: &ExtensionMesh) -> Result<ExtensionField> {
    check_mesh(basis, mesh)?;
    let op = basis.operator();
    let rhs = forced_rhs(op, mesh, data)?;
    if basis.is_pure_neumann() {
        let total: Vec<f64> = (0..op.size()).map(|i| rhs.iter().map(|r| r[i]).sum()).collect();
        let all: Vec<f64> = rhs.iter().flatten().copied().collect();
        let mean = total.iter().sum::<f64>() / total.len() as f64;
        let rms = (all.iter().map(|v| v * v).sum::<f64>() / all.len() as f64).sqrt();
        if mean.abs() > 1e-10 * rms.max(f64::MIN_POSITIVE) {
            check_compatible(&total)?;
        }
    }
    let m = mesh.layers();
    let stiff = mesh.stiffness();
    let n = basis.len();
    let hats: Vec<Vec<f64>> = rhs.iter().map(|r| basis.analyze(r)).collect();
    let mut coeffs = vec![vec![0.0; n]; m + 1];
    for (k, &lam) in basis.eigenvalues().iter().enumerate() {
        let (d, e) = mode_system(&stiff, &mesh.mass, lam, 0);
        let r: Vec<f64> = hats.iter().map(|h| h[k]).collect();
        let c = solve_tridiagonal(&d, &e, &r)?;
        for (j, v) in c.into_iter().enumerate() {
            coeffs[j][k] = v;
        }
    }
    let layers: Vec<Vec<f64>> = coeffs.iter().map(|c| basis.synthesize(c)).collect();
    let mut field = ExtensionField {
        mesh: mesh.clone(),
        op: op.clone(),
        layers,
        residual: 0.0,
    };
    let mut full_rhs = rhs;
    full_rhs.push(vec![0.0; n]);
    field.residual = weak_residual(&field, &full_rhs, 0);
    Ok(field)
}

/// `(S_y ⊗ I + D_y ⊗ M) U` on layer `j` (all nodal, Euclidean scaling).
fn apply_layer(field: &ExtensionField, stiff: &(Vec<f64>, Vec<f64>), j: usize) -> Vec<f64> {
    let m = field.mesh.layers();
    let mu = field.op.matrix().matvec(&field.layers[j]);
    let mut out: Vec<f64> = field.layers[j]
        .iter()
        .zip(&mu)
        .map(|(u, lu)| stiff.0[j] * u + field.mesh.mass[j] * lu)
        .collect();
    if j > 0 {
        out.iter_mut().zip(&field.layers[j - 1]).for_each(|(o, u)| *o += stiff.1[j - 1] * u);
    }
    if j < m {
        out.iter_mut().zip(&field.layers[j + 1]).for_each(|(o, u)| *o += stiff.1[j] * u);
    }
    out
}

fn weak_residual(field: &ExtensionField, rhs: &[Vec<f64>], first: usize) -> f64 {
    let stiff = field.mesh.stiffness();
    let (mut num, mut den) = (0.0, 0.0);
    // scale: size of the individual terms, not of their (cancelling) sum
    for j in first..field.mesh.layers() {
        let au = apply_layer(field, &stiff, j);
        let mu = field.op.matrix().matvec(&field.layers[j]);
        for (i, (a, r)) in au.iter().zip(&rhs[j]).enumerate() {
            num += (a - r).powi(2);
            den += (stiff.0[j] * field.layers[j][i]).powi(2) + (field.mesh.mass[j] * mu[i]).powi(2) + r * r;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Weak-form flux `−y^a U_y` at `y = 0` (row 0 of the assembled system),
/// i.e. `c_s L^s u` for a solution of the homogeneous problem.
pub fn weighted_flux(field: &ExtensionField) -> GridFunction {
    let stiff = field.mesh.stiffness();
    field.op.extend(&apply_layer(field, &stiff, 0)).expect("layer has operator size")
}

/// `L^s u` recovered from the weighted flux: `(−lim y^a U_y) / c_s`.
pub fn dtn_extract(field: &ExtensionField) -> GridFunction {
    weighted_flux(field).scale(1.0 / c_s(field.mesh.s))
}

/// Diagnostic DtN from the incremental quotient: least-squares fit of
/// `U(x,y_j) − U(x,0) ≈ β(x) y_j^{2s}` on the first three layers, then
/// `L^s u = −β / c_quotient` with `c_quotient = |Γ(−s)|/(4^s Γ(s))`.
/// Returns the estimate and the worst relative fit residual.
pub fn dtn_quotient_fit(field: &ExtensionField) -> (GridFunction, f64) {
    let s = field.mesh.s;
    let y = field.mesh.y();
    let p: Vec<f64> = (1..=3).map(|j| y[j].powf(2.0 * s)).collect();
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let mut worst: f64 = 0.0;
    let vals: Vec<f64> = (0..field.op.size())
        .map(|i| {
            let d: Vec<f64> = (1..=3).map(|j| field.layers[j][i] - field.layers[0][i]).collect();
            let beta = d.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / pp;
            let res = d.iter().zip(&p).map(|(a, b)| (a - beta * b).powi(2)).sum::<f64>().sqrt();
            let scale = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if scale > 0.0 {
                worst = worst.max(res / scale);
            }
            -beta / c_quotient(s)
        })
        .collect();
    (field.op.extend(&vals).expect("operator size"), worst)
}

/// `∫∫ y^a (B∇U·∇U)` of the discrete solution (includes the `x` cell volume).
pub fn extension_energy(field: &ExtensionField) -> f64 {
    let stiff = field.mesh.stiffness();
    let vol = field.grid().cell_volume();
    let mut e = 0.0;
    for j in 0..=field.mesh.layers() {
        let au = apply_layer(field, &stiff, j);
        e += au.iter().zip(&field.layers[j]).map(|(a, u)| a * u).sum::<f64>();
    }
    e * vol
}

/// `c_s ‖L^{s/2} u‖²`, the value the extension energy converges to.
pub fn energy_target(basis: &EigenBasis, u: &GridFunction, s: f64) -> Result<f64> {
    let e = crate::spectral::hs_energy_norm(basis, u, s)?;
    Ok(c_s(s) * e * e)
}

/// Eigen-series solution `U(·,y) = Σ (2^{1−s}/Γ(s)) (√λ_k y)^s K_s(√λ_k y) u_k φ_k`.
pub fn extension_bessel_eval(basis: &EigenBasis, u: &GridFunction, s: f64, y: f64) -> Result<GridFunction> {
    check_fraction("s", s)?;
    if !(y >= 0.0) {
        return Err(Error::OutOfRange {
            name: "y",
            value: y,
            range: "[0, ∞)",
        });
    }
    let op = basis.operator();
    let x = op.restrict(u)?;
    let w: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .map(|&l| poisson_weight_bessel(l, s, y))
        .collect::<Result<_>>()?;
    op.extend(&basis.apply_weights(&x, &w))
}

/// The same solution as `(1/Γ(s)) ∫ e^{−y²/4t} e^{−tL}(L^s u) t^{s−1} dt`,
/// by a log-uniform rule. The constant mode (Neumann) is carried unchanged.
pub fn extension_semigroup_eval(basis: &EigenBasis, u: &GridFunction, s: f64, y: f64) -> Result<GridFunction> {
    check_fraction("s", s)?;
    if !(y > 0.0) {
        return Err(Error::OutOfRange {
            name: "y",
            value: y,
            range: "(0, ∞)",
        });
    }
    let op = basis.operator();
    let x = op.restrict(u)?;
    let a = y * y / 4.0;
    let q = SingularQuadrature::new(s, PowerWeight::OneMinus, a / 800.0, (40.0 / basis.lambda_min_positive()).max(10.0 * a), 0.05)?;
    let g = gamma(s);
    let w: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .map(|&l| {
            if l > 0.0 {
                l.powf(s) / g * q.integrate(|t| (-a / t - t * l).exp(), &[], &[])
            } else {
                1.0
            }
        })
        .collect();
    op.extend(&basis.apply_weights(&x, &w))
}

/// Linear interpolation of the discrete solution at height `y`.
pub fn field_at_height(field: &ExtensionField, y: f64) -> Result<GridFunction> {
    let ys = field.mesh.y();
    if !(y >= 0.0 && y <= field.mesh.height) {
        return Err(Error::OutOfRange {
            name: "y",
            value: y,
            range: "[0, Y]",
        });
    }
    let j = ys.partition_point(|&v| v <= y).clamp(1, ys.len() - 1);
    let t = (y - ys[j - 1]) / (ys[j] - ys[j - 1]);
    let lo = field.layer(j - 1);
    let hi = field.layer(j);
    lo.scale(1.0 - t).add(&hi.scale(t))
}

// ---------------------------------------------------------------------------
// inequality checks on half balls B_r^* = {|(x − x₀, y)| < r, y > 0}

/// Smooth radial cutoff: 1 on `B_{r/2}`, 0 outside `B_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Cutoff {
    fn rho(&self, x: &[f64], y: f64) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum();
        (d2 + y * y).sqrt()
    }

    pub fn value(&self, x: &[f64], y: f64) -> f64 {
        let t = (2.0 * self.rho(x, y) / self.radius - 1.0).clamp(0.0, 1.0);
        (0.5 * std::f64::consts::PI * t).cos().powi(2)
    }

    /// `|∇η|`.
    pub fn gradient_norm(&self, x: &[f64], y: f64) -> f64 {
        let t = 2.0 * self.rho(x, y) / self.radius - 1.0;
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let th = 0.5 * std::f64::consts::PI * t;
        // d/dρ cos²(πt/2) with dt/dρ = 2/r
        (2.0 * th.cos() * th.sin() * 0.5 * std::f64::consts::PI * 2.0 / self.radius).abs()
    }
}

/// Cellwise values on the cylinder: gradient from edge differences,
/// `U²` from vertex averages, weight `∫ y^a × h^n`.
struct Cell {
    centre: Vec<f64>,
    y: f64,
    weight: f64,
    grad2: f64,
    u2: f64,
    f2: f64,
}

fn cells(field: &ExtensionField, layers: &[GridFunction], forcing: Option<&ForcingData>) -> Vec<Cell> {
    let g = field.grid();
    let dim = g.dim();
    let nodes = g.nodes();
    let mesh = &field.mesh;
    let base_cells: Vec<[usize; 2]> = if dim == 1 {
        (0..nodes[0] - 1).map(|i| [i, 0]).collect()
    } else {
        (0..nodes[1] - 1)
            .flat_map(|j| (0..nodes[0] - 1).map(move |i| [i, j]))
            .collect()
    };
    let vol = g.cell_volume();
    let corners: Vec<[usize; 2]> = if dim == 1 {
        vec![[0, 0], [1, 0]]
    } else {
        vec![[0, 0], [1, 0], [0, 1], [1, 1]]
    };
    let mut out = Vec::with_capacity(base_cells.len() * mesh.layers());
    for j in 0..mesh.layers() {
        let dy = mesh.y[j + 1] - mesh.y[j];
        for bc in &base_cells {
            let idx: Vec<usize> = corners
                .iter()
                .map(|c| {
                    let m = [bc[0] + c[0], bc[1] + c[1]];
                    g.index(&m[..dim])
                })
                .collect();
            let lo: Vec<f64> = idx.iter().map(|&i| layers[j][i]).collect();
            let hi: Vec<f64> = idx.iter().map(|&i| layers[j + 1][i]).collect();
            let nc = idx.len() as f64;
            let mut grad2 = 0.0;
            for d in 0..dim {
                let h = g.spacing(d);
                let mut acc = 0.0;
                let mut count = 0.0;
                for (a, c) in corners.iter().enumerate() {
                    if c[d] == 0 {
                        let b = corners.iter().position(|o| {
                            (0..dim).all(|e| if e == d { o[e] == 1 } else { o[e] == c[e] })
                        });
                        let b = b.expect("partner corner");
                        acc += (lo[b] - lo[a]) / h + (hi[b] - hi[a]) / h;
                        count += 2.0;
                    }
                }
                grad2 += (acc / count).powi(2);
            }
            let uy: f64 = lo.iter().zip(&hi).map(|(l, u)| (u - l) / dy).sum::<f64>() / nc;
            grad2 += uy * uy;
            let u2 = lo.iter().chain(&hi).map(|v| v * v).sum::<f64>() / (2.0 * nc);
            let f2 = forcing.map_or(0.0, |fd| {
                idx.iter()
                    .map(|&i| {
                        let a = fd.field[j][i];
                        let b = fd.field[j + 1][i];
                        (0..dim).map(|d| 0.5 * (a[d] * a[d] + b[d] * b[d])).sum::<f64>()
                    })
                    .sum::<f64>()
                    / nc
            });
            let c0 = g.coord(idx[0]);
            let centre: Vec<f64> = (0..dim).map(|d| c0[d] + 0.5 * g.spacing(d)).collect();
            out.push(Cell {
                centre,
                y: 0.5 * (mesh.y[j] + mesh.y[j + 1]),
                weight: mesh.cell_weights[j] * vol,
                grad2,
                u2,
                f2,
            });
        }
    }
    out
}

fn check_ball(field: &ExtensionField, center: &[f64], r: f64) -> Result<()> {
    let g = field.grid();
    for d in 0..g.dim() {
        let lo = g.origin()[d];
        let hi = lo + g.extents()[d];
        if center[d] - r < lo - 1e-12 || center[d] + r > hi + 1e-12 {
            return Err(Error::Probe(format!("B_{r} around {center:?} leaves the base box")));
        }
    }
    if r > field.mesh.height {
        return Err(Error::Probe(format!("radius {r} exceeds the cylinder height")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaccioppoliReport {
    pub radius: f64,
    /// `∫ y^a η² |∇U|²`.
    pub lhs: f64,
    /// `∫ y^a |∇η|² U²`.
    pub cutoff_term: f64,
    /// `∫ y^a |F|² η²`.
    pub forcing_term: f64,
    /// `∫_{y=0} η² |U| |f|`.
    pub flux_term: f64,
    /// `lhs / (sum of right-hand terms)`; zero when both sides vanish.
    pub ratio: f64,
}

/// Both sides of the Caccioppoli inequality on `B_r^*(x₀)`.
pub fn caccioppoli_check(field: &ExtensionField, eta: &Cutoff, forcing: Option<&ForcingData>) -> Result<CaccioppoliReport> {
    let g = field.grid();
    check_ball(field, &eta.center[..g.dim()], eta.radius)?;
    let layers: Vec<GridFunction> = (0..=field.mesh.layers()).map(|j| field.layer(j)).collect();
    let (mut lhs, mut t1, mut t2) = (0.0, 0.0, 0.0);
    for c in cells(field, &layers, forcing) {
        let e = eta.value(&c.centre, c.y);
        let de = eta.gradient_norm(&c.centre, c.y);
        lhs += c.weight * e * e * c.grad2;
        t1 += c.weight * de * de * c.u2;
        t2 += c.weight * c.f2 * e * e;
    }
    let mut t3 = 0.0;
    if let Some(fd) = forcing {
        let vol = g.cell_volume();
        for i in 0..g.len() {
            let x = g.coord(i);
            let e = eta.value(&x[..g.dim()], 0.0);
            t3 += vol * e * e * layers[0][i].abs() * fd.flux[i].abs();
        }
    }
    let rhs = t1 + t2 + t3;
    Ok(CaccioppoliReport {
        radius: eta.radius,
        lhs,
        cutoff_term: t1,
        forcing_term: t2,
        flux_term: t3,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub radii: Vec<f64>,
    /// `r^{1−s} ‖U(·,0)‖_{L²(B_r)} / ‖U‖_{H¹(B_r^*, y^a)}` per radius.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

pub fn trace_inequality_check(field: &ExtensionField, center: &[f64], radii: &[f64]) -> Result<TraceReport> {
    let g = field.grid();
    let s = field.mesh.s;
    let layers: Vec<GridFunction> = (0..=field.mesh.layers()).map(|j| field.layer(j)).collect();
    let cs = cells(field, &layers, None);
    let vol = g.cell_volume();
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        check_ball(field, center, r)?;
        let inside = |x: &[f64], y: f64| {
            let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
            d2 + y * y < r * r
        };
        let trace2: f64 = (0..g.len())
            .filter(|&i| inside(&g.coord(i)[..g.dim()], 0.0))
            .map(|i| layers[0][i].powi(2) * vol)
            .sum();
        let h1: f64 = cs
            .iter()
            .filter(|c| inside(&c.centre, c.y))
            .map(|c| c.weight * (c.u2 + c.grad2))
            .sum();
        ratios.push(if h1 > 0.0 {
            r.powf(1.0 - s) * trace2.sqrt() / h1.sqrt()
        } else {
            0.0
        });
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(TraceReport {
        radii: radii.to_vec(),
        ratios,
        max_ratio,
    })
}

/// Observed order of a sequence of errors on meshes refined by 2.
pub fn observed_order(errors: &[f64]) -> Option<f64> {
    if errors.len() < 2 || errors.iter().any(|e| !(*e > 0.0)) {
        return None;
    }
    let x: Vec<f64> = (0..errors.len()).map(|k| -(k as f64) * 2f64.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    fit_line(&x, &y).ok().map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{CoefficientField, CoefficientSpec};
    use crate::eigen::eigendecompose;
    use crate::operator::{assemble, BoundaryCondition};
    use crate::spectral::fractional_apply;

    fn basis(n: usize, bc: BoundaryCondition) -> EigenBasis {
        let g = Grid::new_1d(1.0, n).unwrap();
        let c = CoefficientField::sample(&g, &CoefficientSpec::Identity).unwrap();
        eigendecompose(&assemble(&g, &c, bc).unwrap()).unwrap()
    }

    #[test]
    fn mesh_weights_are_exact() {
        let m = ExtensionMesh::new(0.3, 8, 2.0, 3.0).unwrap();
        let total: f64 = m.cell_weights().iter().sum();
        let a = m.a;
        assert!((total - 2f64.powf(1.0 + a) / (1.0 + a)).abs() < 1e-12);
        let mass: f64 = m.lumped_mass().iter().sum();
        assert!((mass - total).abs() < 1e-12);
        assert!(m.lumped_mass().iter().all(|&v| v > 0.0));
        assert_eq!(m.y()[0], 0.0);
    }

    #[test]
    fn zero_trace_gives_zero_field() {
        let b = basis(17, BoundaryCondition::Dirichlet);
        let mesh = ExtensionMesh::for_basis(&b, 0.5, 16).unwrap();
        let f = solve_extension(&b, &GridFunction::zeros(b.grid()), &mesh).unwrap();
        assert!((0..=16).all(|j| f.layer(j).max_abs() == 0.0));
    }

    #[test]
    fn flux_recovers_fractional_power() {
        let b = basis(33, BoundaryCondition::Dirichlet);
        let u = b.eigenfunction(0);
        for s in [0.25, 0.5, 0.75] {
            let mesh = ExtensionMesh::for_basis(&b, s, 128).unwrap();
            let f = solve_extension(&b, &u, &mesh).unwrap();
            assert!(f.residual < 1e-10);
            let want = fractional_apply(&b, &u, s).unwrap();
            let got = dtn_extract(&f);
            assert!(got.rel_error(&want).unwrap() < 2e-2, "s={s}: {}", got.rel_error(&want).unwrap());
            let e = extension_energy(&f);
            let t = energy_target(&b, &u, s).unwrap();
            assert!((e - t).abs() < 2e-2 * t, "s={s}: {e} vs {t}");
        }
    }

    #[test]
    fn bessel_and_semigroup_forms_agree() {
        let b = basis(33, BoundaryCondition::Dirichlet);
        let u = b.eigenfunction(0);
        for y in [0.01, 0.3, 1.5] {
            let a = extension_bessel_eval(&b, &u, 0.4, y).unwrap();
            let c = extension_semigroup_eval(&b, &u, 0.4, y).unwrap();
            assert!(a.sub(&c).unwrap().max_abs() < 1e-8 * u.max_abs());
        }
        let near = extension_bessel_eval(&b, &u, 0.4, 1e-12).unwrap();
        assert!(near.sub(&u).unwrap().max_abs() < 1e-4);
    }

    #[test]
    fn forced_problem_inverts_the_flux() {
        let b = basis(33, BoundaryCondition::Dirichlet);
        let s = 0.5;
        let u = b.eigenfunction(0);
        let flux = fractional_apply(&b, &u, s).unwrap().scale(c_s(s));
        let mesh = ExtensionMesh::for_basis(&b, s, 128).unwrap();
        let f = solve_extension_forced(&b, &ForcingData::flux_only(&mesh, flux), &mesh).unwrap();
        assert!(f.residual < 1e-10);
        assert!(f.trace().rel_error(&u).unwrap() < 2e-2);
    }

    #[test]
    fn caccioppoli_homogeneity() {
        let b = basis(33, BoundaryCondition::Dirichlet);
        let u = b.eigenfunction(0);
        let mesh = ExtensionMesh::for_basis(&b, 0.5, 64).unwrap();
        let f = solve_extension(&b, &u, &mesh).unwrap();
        let eta = Cutoff {
            center: [0.5, 0.0],
            radius: 0.4,
        };
        let r1 = caccioppoli_check(&f, &eta, None).unwrap();
        let r2 = caccioppoli_check(&f.scaled(2.0), &eta, None).unwrap();
        assert!((r2.lhs - 4.0 * r1.lhs).abs() < 1e-12 * r2.lhs);
        assert!((r2.ratio - r1.ratio).abs() < 1e-12 * r1.ratio);
        let t = trace_inequality_check(&f, &[0.5], &[0.1, 0.25, 0.5]).unwrap();
        assert!(t.ratios.iter().all(|r| r.is_finite() && *r > 0.0));
    }
}
