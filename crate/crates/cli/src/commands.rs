//! The six pipelines. Each reads what it needs from the config, writes its
//! CSV artifacts into the output directory and returns the report body.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use fracell::extension::{dtn_extract, energy_target, extension_energy, observed_order, solve_extension, ExtensionMesh};
use fracell::fit::{fit_loglog, observed_orders};
use fracell::halfspace::{
    closed_form_factor, closed_form_halfline, halfline_inverse_quadrature, HalfLineBc, HalfLineProblem, HalfLineRhs,
};
use fracell::heat::{balakrishnan_apply, calibrate, resolvent_fractional_solve, semigroup_fractional_solve};
use fracell::io::{eigen_summary, write_eigenvalues, write_extension, write_grid_function, write_kernel_triplets, write_table, GridDescriptor};
use fracell::kernels::{
    greens_function_rows, kernel_ks_rows, kernel_log_fit, kernel_slope, nearest_active, poisson_kernel_rows, PairWindow,
};
use fracell::quadrature::{PowerWeight, SingularQuadrature};
use fracell::random::{seeded, smooth_random};
use fracell::regularity::{boundary_exponent, campanato_profile, interior_exponent, CampanatoProbe, RadiusLadder};
use fracell::spectral::{fractional_apply, fractional_solve};
use fracell::{assemble, eigendecompose, BoundaryCondition, CoefficientField, EigenBasis, Grid, GridFunction};

use crate::config::Config;
use crate::report::Outcome;

pub const COMMANDS: [&str; 6] = ["solve", "kernel", "extension", "halfline", "probe", "converge"];

pub fn run(command: &str, cfg: &Config, out: &Path) -> Result<Outcome> {
    match command {
        "solve" => solve(cfg, out),
        "kernel" => kernel(cfg, out),
        "extension" => extension(cfg, out),
        "halfline" => halfline(cfg, out),
        "probe" => probe(cfg, out),
        "converge" => converge(cfg, out),
        other => bail!("unknown command `{other}` (expected one of {})", COMMANDS.join(", ")),
    }
}

fn create(out: &Path, name: &str, o: &mut Outcome) -> Result<BufWriter<File>> {
    let path = out.join(name);
    o.files.push(name.to_string());
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn basis_for(cfg: &Config, grid: &Grid, bc: BoundaryCondition) -> Result<EigenBasis> {
    let spec = cfg.coefficient()?;
    let coef = CoefficientField::sample(grid, &spec)?;
    let op = assemble(grid, &coef, bc)?;
    let tensor = grid.dim() == 2 && spec.is_constant();
    if op.size() > 4097 && !tensor {
        bail!(
            "{} unknowns exceed the dense eigensolver limit of 4097; reduce `nodes` or use a constant coefficient",
            op.size()
        );
    }
    Ok(eigendecompose(&op)?)
}

fn center(cfg: &Config, grid: &Grid) -> Result<Vec<f64>> {
    let x0: f64 = cfg.get("x0")?;
    let pt: Vec<f64> = (0..grid.dim()).map(|a| grid.origin()[a] + x0 * grid.extents()[a]).collect();
    if !(0.0..=1.0).contains(&x0) {
        bail!("key `x0` = {x0} must be a fraction of the extent in [0, 1]");
    }
    Ok(pt)
}

/// Right-hand side / data named by `rhs`.
fn data(cfg: &Config, grid: &Grid, bc: BoundaryCondition) -> Result<GridFunction> {
    let rhs = cfg.choice("rhs", &["one", "sine", "random", "spike", "indicator"])?;
    let x0 = center(cfg, grid)?;
    let dist = |x: &[f64]| (0..grid.dim()).map(|a| (x[a] - x0[a]).powi(2)).sum::<f64>().sqrt();
    let h = grid.spacing(0);
    let n = grid.dim() as f64;
    let f = match rhs.as_str() {
        "one" => GridFunction::constant(grid, 1.0),
        "sine" => GridFunction::from_fn(grid, |x| {
            (0..grid.dim())
                .map(|a| {
                    let t = PI * (x[a] - grid.origin()[a]) / grid.extents()[a];
                    match bc {
                        BoundaryCondition::Dirichlet => t.sin(),
                        BoundaryCondition::Neumann => t.cos(),
                    }
                })
                .product()
        }),
        "random" => {
            let seed: u64 = cfg.get("seed")?;
            smooth_random(grid, bc, 8, 1.0, &mut seeded(seed))
        }
        "spike" => {
            let p = cfg.f64_in("p", 0.0, 1e6)?;
            if p > 0.0 {
                GridFunction::from_fn(grid, |x| dist(x).max(0.5 * h).powf(-n / p + 0.01))
            } else {
                let alpha = cfg.f64_in("alpha", 0.0, 1.0)?;
                GridFunction::from_fn(grid, |x| dist(x).powf(alpha))
            }
        }
        _ => {
            let r = 0.25 * grid.extents()[0];
            GridFunction::from_fn(grid, |x| if dist(x) < r { 1.0 } else { 0.0 })
        }
    };
    Ok(f)
}

fn solve(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let grid = cfg.grid()?;
    let bc = cfg.bc()?;
    let s = cfg.s()?;
    let tol = cfg.f64_in("tol", 0.0, 1.0)?;
    let basis = basis_for(cfg, &grid, bc)?;
    let mut f = data(cfg, &grid, bc)?;
    if bc == BoundaryCondition::Neumann && cfg.choice("rhs", &["one", "sine", "random", "spike", "indicator"])? != "one" {
        // only the compatible part is solvable; `one` is left to fail loudly
        f = f.remove_mean();
    }
    let u = fractional_solve(&basis, &f, s)?;

    let q_inv = SingularQuadrature::for_spectrum(s, PowerWeight::OneMinus, basis.lambda_min_positive(), basis.lambda_max(), 0.25)?;
    let u_semigroup = semigroup_fractional_solve(&basis, &f, s, &q_inv)?;
    let q = calibrate(s, basis.lambda_min_positive(), basis.lambda_max(), 1e-10)?;
    let back = balakrishnan_apply(&basis, &u, s, &q)?;

    let route = u_semigroup.rel_error(&u)?;
    let residual = back.rel_error(&f)?;
    o.result("eigen", eigen_summary(&basis));
    o.result("solution_max_abs", u.max_abs());
    o.result("solution_l2", u.norm());
    o.at_most("solve_routes_agree", route, tol);
    o.at_most("semigroup_residual", residual, tol);

    let desc = GridDescriptor::new(&grid, basis.operator().bcs(), &cfg.coefficient()?);
    o.files.push("grid.json".into());
    std::fs::write(out.join("grid.json"), desc.to_json()? + "\n")?;
    write_grid_function(&f, create(out, "rhs.csv", &mut o)?)?;
    write_grid_function(&u, create(out, "solution.csv", &mut o)?)?;
    write_eigenvalues(&basis, create(out, "eigenvalues.csv", &mut o)?)?;
    Ok(o)
}

fn kernel(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let grid = cfg.grid()?;
    let bc = cfg.bc()?;
    let s = cfg.s()?;
    let basis = basis_for(cfg, &grid, bc)?;
    let kind = cfg.choice("kernel", &["ks", "gs", "poisson"])?;
    let row = nearest_active(&basis, &center(cfg, &grid)?)?;
    let h = grid.spacing(0);
    let window = PairWindow {
        r_min: cfg.f64_in("window_min", 0.0, 1e6)? * h,
        r_max: cfg.f64_in("window_max", 0.0, 1e6)?,
        margin: cfg.f64_in("margin", 0.0, 1e6)?,
    };
    let slope_tol = cfg.f64_in("slope_tol", 0.0, 10.0)?;
    let n = grid.dim() as f64;
    let k = match kind.as_str() {
        "ks" => {
            let q = calibrate(s, basis.lambda_min_positive(), basis.lambda_max(), 1e-10)?;
            let k = kernel_ks_rows(&basis, s, &q, &[row])?;
            let fit = kernel_slope(&k, &window)?;
            o.near("ks_slope", fit.slope, -(n + 2.0 * s), slope_tol);
            o.result("fit", fit);
            k
        }
        "gs" => {
            let k = greens_function_rows(&basis, s, &[row])?;
            if n > 2.0 * s {
                let fit = kernel_slope(&k, &window)?;
                o.near("gs_slope", fit.slope, -(n - 2.0 * s), slope_tol);
                o.result("fit", fit);
            } else if (n - 2.0 * s).abs() < 1e-12 {
                let fit = kernel_log_fit(&k, &window)?;
                o.at_least("gs_log_fit_r_squared", fit.r_squared, 0.99);
                o.result("fit", fit);
            }
            k
        }
        _ => {
            let y = cfg.f64_in("y", 1e-8, 1e6)?;
            let k = poisson_kernel_rows(&basis, s, y, &[row])?;
            let mass = k.row_integrals()[0];
            o.result("row_integral", mass);
            if basis.is_pure_neumann() {
                o.at_most("neumann_row_integral_defect", (mass - 1.0).abs(), 1e-6);
            } else {
                o.at_most("dirichlet_row_integral_excess", mass - 1.0, 1e-9);
            }
            k
        }
    };
    o.result("kernel", kind);
    o.result("row_grid_index", k.rows()[0]);
    o.at_most("negativity", k.negativity(), 1e-10);
    write_kernel_triplets(&k, create(out, "kernel.csv", &mut o)?)?;
    Ok(o)
}

fn extension(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let grid = cfg.grid()?;
    let bc = cfg.bc()?;
    let s = cfg.s()?;
    let layers = cfg.usize_in("layers", 4, 1 << 16)?;
    let basis = basis_for(cfg, &grid, bc)?;
    let u = data(cfg, &grid, bc)?;
    let mesh = ExtensionMesh::for_basis(&basis, s, layers)?;
    let field = solve_extension(&basis, &u, &mesh)?;
    let dtn = dtn_extract(&field);
    let target = fractional_apply(&basis, &u, s)?;
    let e = extension_energy(&field);
    let e_target = energy_target(&basis, &u, s)?;
    o.result("weak_residual", field.residual);
    o.result("energy", e);
    o.result("energy_target", e_target);
    o.result("height", *mesh.y().last().expect("nonempty mesh"));
    o.at_most("dtn_relative_error", dtn.rel_error(&target)?, cfg.f64_in("dtn_tol", 0.0, 1.0)?);
    o.at_most(
        "energy_relative_error",
        (e - e_target).abs() / e_target.abs().max(f64::MIN_POSITIVE),
        cfg.f64_in("energy_tol", 0.0, 1.0)?,
    );
    o.at_most("weak_residual", field.residual, 1e-10);
    write_extension(&field, create(out, "extension.csv", &mut o)?)?;
    write_grid_function(&dtn, create(out, "dtn.csv", &mut o)?)?;
    Ok(o)
}

fn halfline(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let s = cfg.s()?;
    let rhs = match cfg.choice("halfline_rhs", &["one", "indicator"])?.as_str() {
        "one" => HalfLineRhs::One,
        _ => HalfLineRhs::IndicatorUnit,
    };
    let bc = match cfg.bc()? {
        BoundaryCondition::Dirichlet => HalfLineBc::DirichletOdd,
        BoundaryCondition::Neumann => HalfLineBc::NeumannEven,
    };
    let problem = HalfLineProblem::new(s, rhs, bc)?;
    let points = cfg.usize_in("points", 3, 100_000)?;
    let (lo, hi) = (cfg.f64_in("xmin", 1e-12, 1e3)?, cfg.f64_in("xmax", 1e-12, 1e3)?);
    if lo >= hi {
        bail!("key `xmin` = {lo} must be below `xmax` = {hi}");
    }
    if rhs == HalfLineRhs::IndicatorUnit && hi >= 0.5 {
        bail!("key `xmax` = {hi} must be below 1/2 for the indicator data");
    }
    let xs: Vec<f64> = (0..points)
        .map(|k| lo * (hi / lo).powf(k as f64 / (points - 1) as f64))
        .collect();
    let quad = halfline_inverse_quadrature(&problem, &xs)?;
    let factor = closed_form_factor(&problem);
    let mut rows = Vec::with_capacity(points);
    let mut ratios = Vec::with_capacity(points);
    for (x, q) in xs.iter().zip(&quad) {
        let c = factor * closed_form_halfline(&problem, *x)?;
        ratios.push(q / c);
        rows.push(vec![*x, *q, c, q / c]);
    }
    let lo_r = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_r = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    o.at_most("ratio_spread", hi_r / lo_r - 1.0, 1e-6);
    if rhs == HalfLineRhs::One {
        let fit = fit_loglog(&xs, &quad)?;
        o.near("loglog_slope", fit.slope, 2.0 * s, 1e-3);
        o.result("fit", fit);
    }
    o.result("closed_form_factor", factor);
    write_table(&["x", "quadrature", "closed_form", "ratio"], &rows, create(out, "halfline.csv", &mut o)?)?;
    Ok(o)
}

fn probe(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let grid = cfg.grid()?;
    let bc = cfg.bc()?;
    let s = cfg.s()?;
    let mode = cfg.mode()?;
    let tol = cfg.f64_in("exponent_tol", 0.0, 10.0)?;
    let kind = cfg.choice("probe", &["interior", "boundary"])?;
    let f = data(cfg, &grid, bc)?;
    // 1D goes through banded resolvent solves: O(N) per node and agreeing
    // with the spectral route to 1e-9, which a dense basis cannot reach at
    // probe resolutions
    let u = if grid.dim() == 1 {
        let coef = CoefficientField::sample(&grid, &cfg.coefficient()?)?;
        resolvent_fractional_solve(&assemble(&grid, &coef, bc)?, &f, s)?
    } else {
        fractional_solve(&basis_for(cfg, &grid, bc)?, &f, s)?
    };
    let n = grid.dim() as f64;
    if kind == "interior" {
        let x0 = center(cfg, &grid)?;
        let fit = interior_exponent(&u, &x0, mode)?;
        let rhs = cfg.choice("rhs", &["one", "sine", "random", "spike", "indicator"])?;
        let p = cfg.f64_in("p", 0.0, 1e6)?;
        if rhs == "spike" {
            let target = if p > 0.0 {
                2.0 * s - n / p
            } else {
                cfg.f64_in("alpha", 0.0, 1.0)? + 2.0 * s
            };
            o.near("interior_exponent", fit.exponent, target, tol);
        }
        let radii = RadiusLadder::default().radii(&grid);
        let probe = CampanatoProbe::new(&x0, radii.clone(), 0.0, mode)?;
        let profile = campanato_profile(&u, &probe)?;
        let rows: Vec<Vec<f64>> = radii.iter().zip(&profile).map(|(r, v)| vec![*r, *v]).collect();
        write_table(&["radius", "mean_square"], &rows, create(out, "profile.csv", &mut o)?)?;
        o.result("fit", fit);
    } else {
        let origin = grid.origin().to_vec();
        let fit = boundary_exponent(&u, &origin, bc)?;
        if bc == BoundaryCondition::Dirichlet {
            o.near("boundary_exponent", fit.exponent, (2.0 * s).min(1.0), tol);
        }
        o.result("fit", fit);
    }
    write_grid_function(&u, create(out, "solution.csv", &mut o)?)?;
    Ok(o)
}

fn converge(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let levels = cfg.usize_in("levels", 2, 8)?;
    let order_min = cfg.f64_in("order_min", 0.0, 10.0)?;
    let s = cfg.s()?;
    let target = cfg.choice("target", &["extension", "eigen"])?;
    let rows: Vec<Vec<f64>> = match target.as_str() {
        "extension" => {
            let grid = cfg.grid()?;
            let bc = cfg.bc()?;
            let base = cfg.usize_in("layers", 4, 1 << 14)?;
            let basis = basis_for(cfg, &grid, bc)?;
            let u = data(cfg, &grid, bc)?;
            let exact = fractional_apply(&basis, &u, s)?;
            let e_target = energy_target(&basis, &u, s)?;
            // independent levels run concurrently; collection keeps the order
            (0..levels)
                .into_par_iter()
                .map(|k| -> Result<Vec<f64>> {
                    let layers = base << k;
                    let field = solve_extension(&basis, &u, &ExtensionMesh::for_basis(&basis, s, layers)?)?;
                    let err = dtn_extract(&field).rel_error(&exact)?;
                    let e_err = (extension_energy(&field) - e_target).abs() / e_target;
                    Ok(vec![k as f64, layers as f64, err, e_err])
                })
                .collect::<Result<_>>()?
        }
        _ => {
            if !matches!(cfg.coefficient()?, fracell::CoefficientSpec::Identity) || cfg.get::<usize>("dim")? != 1 {
                bail!("target `eigen` needs `coefficient = identity` and `dim = 1`");
            }
            let bc = cfg.bc()?;
            let nodes = cfg.usize_in("nodes", 5, 1 << 12)?;
            let extent = cfg.f64_in("extent", 1e-6, 1e6)?;
            // first nonzero mode: π/L for both conditions
            let exact = (PI / extent).powf(2.0 * s);
            (0..levels)
                .into_par_iter()
                .map(|k| -> Result<Vec<f64>> {
                    let n = ((nodes - 1) << k) + 1;
                    let g = Grid::new_1d(extent, n)?;
                    let basis = eigendecompose(&assemble(&g, &CoefficientField::sample(&g, &fracell::CoefficientSpec::Identity)?, bc)?)?;
                    let lam = basis.lambda_min_positive().powf(s);
                    Ok(vec![k as f64, n as f64, (lam - exact).abs() / exact, f64::NAN])
                })
                .collect::<Result<_>>()?
        }
    };
    let errors: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let order = observed_order(&errors).unwrap_or(f64::NAN);
    o.result("errors", &errors);
    o.result("orders", observed_orders(&errors));
    o.result("observed_order", order);
    o.at_least("observed_order", order, order_min);
    if target == "extension" {
        let energy: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        let monotone = energy.windows(2).all(|w| w[1] < w[0]);
        o.result("energy_errors", &energy);
        o.at_least("energy_error_decreasing", if monotone { 1.0 } else { 0.0 }, 1.0);
        write_table(&["level", "layers", "dtn_error", "energy_error"], &rows, create(out, "convergence.csv", &mut o)?)?;
    } else {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r[..3].to_vec()).collect();
        write_table(&["level", "nodes", "eigenvalue_power_error"], &rows, create(out, "convergence.csv", &mut o)?)?;
    }
    Ok(o)
}
