//! Campanato/Hölder exponent probes, boundary growth fits, the Dirichlet
//! boundary-layer split and Harnack quotients.
//!
//! Exponents are measured, not proved: a probe turns a decay statement
//! "for all r small enough" into the slope of a log–log fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::EigenBasis;
use crate::error::{check_fraction, Error, Result};
use crate::fit::{fit_loglog, ExponentFit};
use crate::grid::{Grid, GridFunction};
use crate::operator::BoundaryCondition;
use crate::special::halfline_one_constant;
use crate::spectral::fractional_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampanatoMode {
    /// Subtract a constant.
    Oscillation,
    /// Subtract the best affine function on each ball.
    Linear,
    /// No subtraction.
    Raw,
}

impl std::str::FromStr for CampanatoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oscillation" => Ok(Self::Oscillation),
            "linear" => Ok(Self::Linear),
            "raw" => Ok(Self::Raw),
            other => Err(Error::Parse(format!("unknown Campanato mode `{other}`"))),
        }
    }
}

/// Probe centre, decreasing radii and the exponent `α` of `L^{2,α}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampanatoProbe {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub alpha: f64,
    pub mode: CampanatoMode,
}

/// Dyadic ladder: `r_max_fraction` of the smallest extent down to
/// `r_min_cells·h`, with the `drop_smallest` finest radii left out of fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusLadder {
    pub r_max_fraction: f64,
    pub r_min_cells: f64,
    pub drop_smallest: usize,
}

impl Default for RadiusLadder {
    fn default() -> Self {
        Self {
            r_max_fraction: 0.25,
            r_min_cells: 4.0,
            drop_smallest: 2,
        }
    }
}

impl RadiusLadder {
    pub fn radii(&self, grid: &Grid) -> Vec<f64> {
        let (ext, h) = scales(grid);
        let mut r = self.r_max_fraction * ext;
        let mut out = Vec::new();
        while r >= self.r_min_cells * h * (1.0 - 1e-12) {
            out.push(r);
            r *= 0.5;
        }
        out
    }

    /// Radii actually fitted.
    pub fn fitted(&self, grid: &Grid) -> Vec<f64> {
        let mut r = self.radii(grid);
        r.truncate(r.len().saturating_sub(self.drop_smallest));
        r
    }
}

fn scales(grid: &Grid) -> (f64, f64) {
    let ext = grid.extents().iter().copied().fold(f64::INFINITY, f64::min);
    let h = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    (ext, h)
}

impl CampanatoProbe {
    pub fn new(center: &[f64], radii: Vec<f64>, alpha: f64, mode: CampanatoMode) -> Result<Self> {
        if radii.len() < 4 {
            return Err(Error::Probe(format!("{} radii given, at least 4 are needed", radii.len())));
        }
        if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Probe("radii must be positive and strictly decreasing".into()));
        }
        Ok(Self {
            center: center.to_vec(),
            radii,
            alpha,
            mode,
        })
    }

    pub fn dyadic(grid: &Grid, center: &[f64], alpha: f64, mode: CampanatoMode) -> Result<Self> {
        Self::new(center, RadiusLadder::default().radii(grid), alpha, mode)
    }
}

/// Node indices of the closed ball `|x − x₀| ≤ r`; the ball must lie in the box.
fn ball(grid: &Grid, center: &[f64], r: f64) -> Result<Vec<usize>> {
    let dim = grid.dim();
    if center.len() != dim {
        return Err(Error::ShapeMismatch {
            expected: dim,
            found: center.len(),
        });
    }
    for a in 0..dim {
        let lo = grid.origin()[a];
        let hi = lo + grid.extents()[a];
        let slack = 1e-12 * grid.extents()[a];
        if center[a] - r < lo - slack || center[a] + r > hi + slack {
            return Err(Error::Probe(format!("ball of radius {r} around {center:?} exits the grid")));
        }
    }
    let tol = 1e-12 * r;
    Ok((0..grid.len())
        .filter(|&i| {
            let x = grid.coord(i);
            let d2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
            d2.sqrt() <= r + tol
        })
        .collect())
}

/// `Σ_{B_r} |f − ℓ|²` (no volume factor) and node count, with `ℓ` chosen by `mode`;
/// `reference` is the constant used in oscillation mode (`None`: ball mean).
fn ball_residual(f: &GridFunction, center: &[f64], r: f64, mode: CampanatoMode, reference: Option<f64>) -> Result<(f64, usize)> {
    let grid = f.grid();
    let idx = ball(grid, center, r)?;
    let n = idx.len();
    let vals: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
    let ss = match mode {
        CampanatoMode::Raw => vals.iter().map(|v| v * v).sum(),
        CampanatoMode::Oscillation => {
            let c = reference.unwrap_or_else(|| vals.iter().sum::<f64>() / n as f64);
            vals.iter().map(|v| (v - c).powi(2)).sum()
        }
        CampanatoMode::Linear => {
            let dim = grid.dim();
            if n < dim + 2 {
                return Err(Error::Probe(format!("ball of radius {r} holds {n} nodes, too few for an affine fit")));
            }
            // columns 1, (x − x₀)/r for conditioning
            let a = DMatrix::from_fn(n, dim + 1, |k, c| {
                if c == 0 {
                    1.0
                } else {
                    (grid.coord(idx[k])[c - 1] - center[c - 1]) / r
                }
            });
            let b = DVector::from_vec(vals.clone());
            let coef = a
                .clone()
                .svd(true, true)
                .solve(&b, 1e-14)
                .map_err(|e| Error::Probe(format!("affine fit failed: {e}")))?;
            (b - a * coef).norm_squared()
        }
    };
    Ok((ss, n))
}

/// `sup_r r^{−(n+2α)} ∫_{B_r} |f − ℓ|²`. In oscillation mode `ℓ` is the
/// value at the centre, taken as the average over the smallest ball.
pub fn campanato_seminorm(f: &GridFunction, probe: &CampanatoProbe) -> Result<f64> {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let n = grid.dim() as f64;
    let reference = match probe.mode {
        CampanatoMode::Oscillation => {
            let r = *probe.radii.last().expect("validated");
            let idx = ball(grid, &probe.center, r)?;
            Some(idx.iter().map(|&i| f[i]).sum::<f64>() / idx.len() as f64)
        }
        _ => None,
    };
    let mut sup: f64 = 0.0;
    for &r in &probe.radii {
        let (ss, _) = ball_residual(f, &probe.center, r, probe.mode, reference)?;
        sup = sup.max(ss * vol / r.powf(n + 2.0 * probe.alpha));
    }
    Ok(sup)
}

/// Per-radius values `r^{−(n+2α)} ∫_{B_r}|f − ℓ|²` of the same probe (for
/// inspecting growth on the smallest radii).
pub fn campanato_profile(f: &GridFunction, probe: &CampanatoProbe) -> Result<Vec<f64>> {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let n = grid.dim() as f64;
    probe
        .radii
        .iter()
        .map(|&r| {
            let (ss, _) = ball_residual(f, &probe.center, r, probe.mode, None)?;
            Ok(ss * vol / r.powf(n + 2.0 * probe.alpha))
        })
        .collect()
}

/// Exponent estimate from a decay fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityFit {
    /// Hölder-type exponent (half the slope for mean-square decay).
    pub exponent: f64,
    pub fit: ExponentFit,
    /// The residuals hit the round-off floor: `exponent` is then only a
    /// lower bound set by the resolvable dynamic range.
    pub saturated: bool,
}

/// Mean-square decay `(1/|B_r|)∫_{B_r}|u − ℓ|² ∼ r^{2β}` around an interior
/// point; returns `β` (half the log–log slope).
pub fn interior_exponent(u: &GridFunction, x0: &[f64], mode: CampanatoMode) -> Result<RegularityFit> {
    interior_exponent_with(u, x0, mode, &RadiusLadder::default())
}

pub fn interior_exponent_with(u: &GridFunction, x0: &[f64], mode: CampanatoMode, ladder: &RadiusLadder) -> Result<RegularityFit> {
    let radii = ladder.fitted(u.grid());
    if radii.len() < 4 {
        return Err(Error::Probe(format!("{} radii fit the grid, at least 4 are needed", radii.len())));
    }
    let scale = u.max_abs();
    let floor = (1e-13 * scale).powi(2).max(f64::MIN_POSITIVE);
    let mut saturated = false;
    let mut values = Vec::with_capacity(radii.len());
    for &r in &radii {
        let (ss, n) = ball_residual(u, x0, r, mode, None)?;
        let m = ss / n as f64;
        if m <= floor {
            saturated = true;
        }
        values.push(m.max(floor));
    }
    let fit = fit_loglog(&radii, &values)?;
    let exponent = if saturated {
        // the largest exponent distinguishable from round-off on this ladder
        let range = radii[0] / radii[radii.len() - 1];
        0.5 * (scale * scale / floor).ln() / range.ln()
    } else {
        0.5 * fit.slope
    };
    Ok(RegularityFit {
        exponent,
        fit,
        saturated,
    })
}

/// Distances along the inward normal used by boundary fits: dyadic from
/// `d_max_fraction` of the normal extent down to `d_min_cells·h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryWindow {
    pub d_max_fraction: f64,
    pub d_min_cells: f64,
}

impl Default for BoundaryWindow {
    fn default() -> Self {
        Self {
            d_max_fraction: 1.0 / 16.0,
            d_min_cells: 16.0,
        }
    }
}

/// Face containing `x0`: (axis, inward direction ±1).
fn face_of(grid: &Grid, x0: &[f64]) -> Result<(usize, f64)> {
    for a in (0..grid.dim()).rev() {
        let lo = grid.origin()[a];
        let hi = lo + grid.extents()[a];
        let tol = 1e-9 * grid.spacing(a);
        if (x0[a] - lo).abs() <= tol {
            return Ok((a, 1.0));
        }
        if (x0[a] - hi).abs() <= tol {
            return Ok((a, -1.0));
        }
    }
    Err(Error::Probe(format!("{x0:?} is not on a boundary face")))
}

/// Fit of `ln|u(x₀ + d ν) − u(x₀)|` against `ln d` along the inward
/// normal `ν`. For Dirichlet `u(x₀) = 0`.
pub fn boundary_exponent(u: &GridFunction, x0: &[f64], bc: BoundaryCondition) -> Result<RegularityFit> {
    boundary_exponent_with(u, x0, bc, &BoundaryWindow::default())
}

pub fn boundary_exponent_with(
    u: &GridFunction,
    x0: &[f64],
    bc: BoundaryCondition,
    window: &BoundaryWindow,
) -> Result<RegularityFit> {
    let grid = u.grid();
    if x0.len() != grid.dim() {
        return Err(Error::ShapeMismatch {
            expected: grid.dim(),
            found: x0.len(),
        });
    }
    let (axis, dir) = face_of(grid, x0)?;
    let h = grid.spacing(axis);
    let base = grid.nearest(x0);
    let base_multi = grid.multi_index(base);
    let value_at = |steps: usize| {
        let mut m = base_multi;
        m[axis] = if dir > 0.0 { m[axis] + steps } else { m[axis] - steps };
        u[grid.index(&m[..grid.dim()])]
    };
    let u0 = match bc {
        BoundaryCondition::Dirichlet => 0.0,
        BoundaryCondition::Neumann => u[base],
    };
    let mut dists = Vec::new();
    let mut vals = Vec::new();
    let d_max = window.d_max_fraction * grid.extents()[axis];
    let mut d = d_max;
    let mut last = usize::MAX;
    while d >= window.d_min_cells * h * (1.0 - 1e-12) {
        let k = (d / h).round() as usize;
        if k != last && k > 0 && k < grid.nodes()[axis] {
            let v = (value_at(k) - u0).abs();
            dists.push(k as f64 * h);
            vals.push(v);
            last = k;
        }
        d *= 0.5;
    }
    if dists.len() < 4 {
        return Err(Error::Probe(format!("{} distances fit the window, at least 4 are needed", dists.len())));
    }
    let scale = u.max_abs();
    if vals.iter().all(|v| *v <= 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Probe(format!("u is flat near {x0:?}; the growth fit is undefined")));
    }
    let floor = 1e-14 * scale;
    let saturated = vals.iter().any(|v| *v <= floor);
    let vals: Vec<f64> = vals.into_iter().map(|v| v.max(floor)).collect();
    dists.reverse();
    let mut vals = vals;
    vals.reverse();
    let fit = fit_loglog(&dists, &vals)?;
    Ok(RegularityFit {
        exponent: fit.slope,
        fit,
        saturated,
    })
}

/// `v = u − f(x₀)·w` with the half-space profile `w` placed in the local frame.
#[derive(Debug, Clone)]
pub struct LayerSplit {
    pub f0: f64,
    pub profile: GridFunction,
    pub remainder: GridFunction,
}

/// Subtracts the Dirichlet boundary layer at the face point `x0`:
/// `w(x) = c_s d(x)^{2s} / a_ν^s`, where `d` is the distance to the face,
/// `c_s` the half-line constant for `f ≡ 1` and `a_ν` the normal
/// coefficient at `x0` (`L = −a ∂²` locally gives `L^s = a^s (−∂²)^s`).
/// Only `s < 1/2` has a bounded-data half-line oracle.
pub fn dirichlet_layer_split(u: &GridFunction, f: &GridFunction, s: f64, x0: &[f64], a_normal: f64) -> Result<LayerSplit> {
    check_fraction("s", s)?;
    u.grid().check_same(f.grid())?;
    if s >= 0.5 {
        return Err(Error::Unsupported(format!(
            "no half-line profile for f ≡ 1 at s = {s} (needs s < 1/2)"
        )));
    }
    if !(a_normal > 0.0) {
        return Err(Error::OutOfRange {
            name: "a_normal",
            value: a_normal,
            range: "(0, ∞)",
        });
    }
    let grid = u.grid();
    let (axis, dir) = face_of(grid, x0)?;
    let f0 = f[grid.nearest(x0)];
    let c = halfline_one_constant(s) / a_normal.powf(s);
    let profile = GridFunction::from_fn(grid, |x| {
        let d = (dir * (x[axis] - x0[axis])).max(0.0);
        c * d.powf(2.0 * s)
    });
    let remainder = u.axpy(-f0, &profile)?;
    Ok(LayerSplit { f0, profile, remainder })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub sup: f64,
    pub inf: f64,
    pub quotient: f64,
    pub nodes: usize,
}

/// `sup_{½B} u / inf_{½B} u` for `u = L^{−s} f` with `f ≥ 0` vanishing on
/// the ball `B(center, radius)`, so that `L^s u = 0` in `B`.
pub fn harnack_quotient(basis: &EigenBasis, s: f64, center: &[f64], radius: f64, f: &GridFunction) -> Result<HarnackReport> {
    check_fraction("s", s)?;
    let grid = basis.grid();
    f.grid().check_same(grid)?;
    let scale = f.max_abs();
    if f.values().iter().any(|&v| v < -1e-14 * scale) {
        return Err(Error::Probe("Harnack witness needs f ≥ 0".into()));
    }
    let inside = ball(grid, center, radius)?;
    if inside.iter().any(|&i| f[i] != 0.0) {
        return Err(Error::Probe("Harnack witness f must vanish on the ball".into()));
    }
    let u = fractional_solve(basis, f, s)?;
    if inside.iter().any(|&i| u[i] < 0.0) {
        return Err(Error::Probe("witness rejected: u is negative in the ball".into()));
    }
    let half = ball(grid, center, 0.5 * radius)?;
    let sup = half.iter().map(|&i| u[i]).fold(f64::NEG_INFINITY, f64::max);
    let inf = half.iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min);
    if !(inf > 0.0) {
        return Err(Error::Probe("witness rejected: u vanishes in the half ball".into()));
    }
    Ok(HarnackReport {
        sup,
        inf,
        quotient: sup / inf,
        nodes: half.len(),
    })
}

/// Smooth nonnegative bump `cos²` of the given radius.
pub fn bump(grid: &Grid, center: &[f64], radius: f64) -> GridFunction {
    GridFunction::from_fn(grid, |x| {
        let d = (0..grid.dim()).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>().sqrt();
        if d < radius {
            (0.5 * std::f64::consts::PI * d / radius).cos().powi(2)
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{CoefficientField, CoefficientSpec};
    use crate::eigen::eigendecompose;
    use crate::operator::assemble;

    fn line(n: usize) -> Grid {
        Grid::new_1d(1.0, n).unwrap()
    }

    #[test]
    fn constants_and_affine_vanish() {
        let g = line(1025);
        let c = GridFunction::constant(&g, 3.0);
        let p = CampanatoProbe::dyadic(&g, &[0.5], 0.3, CampanatoMode::Oscillation).unwrap();
        assert_eq!(campanato_seminorm(&c, &p).unwrap(), 0.0);
        let aff = GridFunction::from_fn(&g, |x| 2.0 * x[0] - 1.0);
        let p = CampanatoProbe::dyadic(&g, &[0.5], 0.3, CampanatoMode::Linear).unwrap();
        assert!(campanato_seminorm(&aff, &p).unwrap() < 1e-20);
        let fit = interior_exponent(&aff, &[0.5], CampanatoMode::Linear).unwrap();
        assert!(fit.saturated && fit.exponent > 2.0);
    }

    #[test]
    fn power_law_seminorm() {
        let beta = 0.6;
        let seminorm = |n: usize, alpha: f64| {
            let g = line(n);
            let f = GridFunction::from_fn(&g, |x| (x[0] - 0.5).abs().powf(beta));
            let p = CampanatoProbe::dyadic(&g, &[0.5], alpha, CampanatoMode::Oscillation).unwrap();
            (campanato_seminorm(&f, &p).unwrap(), campanato_profile(&f, &p).unwrap())
        };
        // α < β: finite, attained at the largest radius, stable under refinement
        let (a, prof) = seminorm(4097, 0.4);
        let (b, _) = seminorm(16385, 0.4);
        assert!(prof.windows(2).all(|w| w[1] <= w[0] * 1.001), "{prof:?}");
        assert!((a - b).abs() < 0.05 * a, "{a} {b}");
        // α > β: grows like r^{2(β−α)} on the smallest radii
        let (_, prof) = seminorm(16385, 0.8);
        let k = prof.len();
        let rate = (prof[k - 3] / prof[0]).ln() / 2f64.powi(k as i32 - 3).ln();
        assert!((rate - 2.0 * (0.8 - beta)).abs() < 0.1, "{rate}");
    }

    #[test]
    fn calibration_gate_on_halfline_profile() {
        // even extension of the half-line solution x^{2s}
        let g = Grid::new(&[-1.0], &[2.0], &[8193]).unwrap();
        for s in [0.2, 0.3, 0.4] {
            let u = GridFunction::from_fn(&g, |x| x[0].abs().powf(2.0 * s));
            let e = interior_exponent(&u, &[0.0], CampanatoMode::Oscillation).unwrap();
            assert!((e.exponent - 2.0 * s).abs() < 0.02, "s={s}: {}", e.exponent);
        }
    }

    #[test]
    fn slopes_are_scale_invariant() {
        let g = line(1025);
        let u = GridFunction::from_fn(&g, |x| (x[0] - 0.5).abs().powf(0.7) + x[0]);
        let a = interior_exponent(&u, &[0.5], CampanatoMode::Oscillation).unwrap();
        let b = interior_exponent(&u.scale(7.5), &[0.5], CampanatoMode::Oscillation).unwrap();
        assert!((a.fit.slope - b.fit.slope).abs() < 1e-12);
        assert!((a.fit.intercept - b.fit.intercept).abs() > 1.0);
    }

    #[test]
    fn boundary_fit_of_power() {
        let g = line(4097);
        let u = GridFunction::from_fn(&g, |x| x[0].powf(0.5));
        let e = boundary_exponent(&u, &[0.0], BoundaryCondition::Dirichlet).unwrap();
        assert!((e.exponent - 0.5).abs() < 1e-9);
        let e = boundary_exponent(&u.map(|v| -v), &[0.0], BoundaryCondition::Dirichlet).unwrap();
        assert!((e.exponent - 0.5).abs() < 1e-9);
        let n = GridFunction::from_fn(&g, |x| 1.0 + x[0].powf(2.0));
        let e = boundary_exponent(&n, &[0.0], BoundaryCondition::Neumann).unwrap();
        assert!((e.exponent - 2.0).abs() < 1e-9);
        let right = GridFunction::from_fn(&g, |x| (1.0 - x[0]).powf(0.8));
        let e = boundary_exponent(&right, &[1.0], BoundaryCondition::Dirichlet).unwrap();
        assert!((e.exponent - 0.8).abs() < 1e-9);
        assert!(boundary_exponent(&u, &[0.5], BoundaryCondition::Dirichlet).is_err());
    }

    #[test]
    fn layer_split_is_linear_and_trivial_at_zero() {
        let g = line(129);
        let u1 = GridFunction::from_fn(&g, |x| x[0].sin());
        let u2 = GridFunction::from_fn(&g, |x| x[0] * x[0]);
        let f1 = GridFunction::constant(&g, 2.0);
        let f2 = GridFunction::from_fn(&g, |x| 1.0 + x[0]);
        let s = 0.25;
        let a = dirichlet_layer_split(&u1, &f1, s, &[0.0], 1.0).unwrap();
        let b = dirichlet_layer_split(&u2, &f2, s, &[0.0], 1.0).unwrap();
        let ab = dirichlet_layer_split(&u1.add(&u2).unwrap(), &f1.add(&f2).unwrap(), s, &[0.0], 1.0).unwrap();
        let sum = a.remainder.add(&b.remainder).unwrap();
        assert!(ab.remainder.sub(&sum).unwrap().max_abs() < 1e-14);
        let zero = GridFunction::from_fn(&g, |x| x[0]);
        let same = dirichlet_layer_split(&u1, &zero, s, &[0.0], 1.0).unwrap();
        assert_eq!(same.remainder.values(), u1.values());
        assert!(dirichlet_layer_split(&u1, &f1, 0.75, &[0.0], 1.0).is_err());
    }

    #[test]
    fn harnack_basics() {
        let g = line(129);
        let c = CoefficientField::sample(&g, &CoefficientSpec::Identity).unwrap();
        let basis = eigendecompose(&assemble(&g, &c, BoundaryCondition::Dirichlet).unwrap()).unwrap();
        let f = bump(&g, &[0.85], 0.1);
        let r = harnack_quotient(&basis, 0.5, &[0.35], 0.2, &f).unwrap();
        assert!(r.quotient >= 1.0 && r.quotient.is_finite());
        let r2 = harnack_quotient(&basis, 0.5, &[0.35], 0.2, &f.scale(3.0)).unwrap();
        assert!((r.quotient - r2.quotient).abs() < 1e-12 * r.quotient);
        assert!(harnack_quotient(&basis, 0.5, &[0.8], 0.1, &f).is_err());
    }
}
