//! CSV and JSON import/export. Floats are written with 17 significant
//! digits in `.`-decimal scientific notation, so values round-trip exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientSpec;
use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::extension::ExtensionField;
use crate::grid::{Grid, GridFunction};
use crate::kernels::KernelMatrix;
use crate::operator::BoundaryCondition;

/// Locale-free, round-trip formatting.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// `{dim, extents, nodes, bc, coefficient}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub extents: Vec<f64>,
    pub nodes: Vec<usize>,
    pub bc: Vec<BoundaryCondition>,
    pub coefficient: CoefficientSpec,
}

impl GridDescriptor {
    pub fn new(grid: &Grid, bc: &[BoundaryCondition], coefficient: &CoefficientSpec) -> Self {
        Self {
            dim: grid.dim(),
            origin: grid.origin().to_vec(),
            extents: grid.extents().to_vec(),
            nodes: grid.nodes().to_vec(),
            bc: bc.to_vec(),
            coefficient: coefficient.clone(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        if self.dim != self.nodes.len() {
            return Err(Error::Parse(format!(
                "descriptor dim {} disagrees with {} node counts",
                self.dim,
                self.nodes.len()
            )));
        }
        Grid::new(&self.origin, &self.extents, &self.nodes)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `index, x[, y], value` per node.
pub fn write_grid_function(u: &GridFunction, out: impl Write) -> Result<()> {
    let g = u.grid();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index", "x"];
    if g.dim() == 2 {
        header.push("y");
    }
    header.push("value");
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..g.len() {
        let x = g.coord(i);
        let mut rec = vec![i.to_string()];
        rec.extend((0..g.dim()).map(|a| fmt_f64(x[a])));
        rec.push(fmt_f64(u[i]));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format of [`write_grid_function`] back onto `grid`; the
/// coordinates must match the grid nodes.
pub fn read_grid_function(grid: &Grid, input: impl Read) -> Result<GridFunction> {
    let mut r = csv::Reader::from_reader(input);
    let dim = grid.dim();
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != dim + 2 {
            return Err(Error::Parse(format!("expected {} columns, found {}", dim + 2, rec.len())));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("column {k}: {e}")))
        };
        let i: usize = rec[0]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("index: {e}")))?;
        if i >= grid.len() {
            return Err(Error::Parse(format!("index {i} outside the grid")));
        }
        let x = grid.coord(i);
        for a in 0..dim {
            let c = num(1 + a)?;
            if (c - x[a]).abs() > 1e-9 * grid.extents()[a] {
                return Err(Error::IncompatibleGrids(format!(
                    "node {i}: coordinate {c} does not match {}",
                    x[a]
                )));
            }
        }
        values[i] = num(dim + 1)?;
        seen += 1;
    }
    if seen != grid.len() || values.iter().any(|v| v.is_nan()) {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            found: seen,
        });
    }
    GridFunction::new(grid, values)
}

/// `k, lambda`.
pub fn write_eigenvalues(basis: &EigenBasis, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "lambda"]).map_err(csv_err)?;
    for (k, l) in basis.eigenvalues().iter().enumerate() {
        w.write_record([k.to_string(), fmt_f64(*l)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `{count, lambda_min, lambda_max, bc}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSummary {
    pub count: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub bc: Vec<BoundaryCondition>,
}

pub fn eigen_summary(basis: &EigenBasis) -> EigenSummary {
    EigenSummary {
        count: basis.len(),
        lambda_min: basis.lambda_min(),
        lambda_max: basis.lambda_max(),
        bc: basis.operator().bcs().to_vec(),
    }
}

/// `i, j, value` (grid indices).
pub fn write_kernel_triplets(k: &KernelMatrix, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "value"]).map_err(csv_err)?;
    for (i, j, v) in k.triplets() {
        w.write_record([i.to_string(), j.to_string(), fmt_f64(v)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `i, j, x, y, U`: base node, layer, base abscissa, height, value.
pub fn write_extension(field: &ExtensionField, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "x", "y", "U"]).map_err(csv_err)?;
    for (i, j, x, y, u) in field.rows() {
        w.write_record([i.to_string(), j.to_string(), fmt_f64(x), fmt_f64(y), fmt_f64(u)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic numeric table with a header.
pub fn write_table(header: &[&str], rows: &[Vec<f64>], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::ShapeMismatch {
                expected: header.len(),
                found: r.len(),
            });
        }
        w.write_record(r.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_function_round_trip_is_exact() {
        let g = Grid::new_2d([1.0, 0.5], [5, 4]).unwrap();
        let u = GridFunction::from_fn(&g, |x| (x[0] * 3.1).exp() / 7.0 - x[1].sqrt());
        let mut buf = Vec::new();
        write_grid_function(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,x,y,value\n"));
        let back = read_grid_function(&g, buf.as_slice()).unwrap();
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn rejects_mismatched_grid() {
        let g = Grid::new_1d(1.0, 5).unwrap();
        let mut buf = Vec::new();
        write_grid_function(&GridFunction::constant(&g, 1.0), &mut buf).unwrap();
        let other = Grid::new_1d(2.0, 5).unwrap();
        assert!(read_grid_function(&other, buf.as_slice()).is_err());
        let longer = Grid::new_1d(1.0, 9).unwrap();
        assert!(read_grid_function(&longer, buf.as_slice()).is_err());
    }

    #[test]
    fn descriptor_json() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        let spec = CoefficientSpec::Sine {
            amplitude: 0.5,
            frequency: 1.0,
        };
        let d = GridDescriptor::new(&g, &[BoundaryCondition::Neumann], &spec);
        let back = GridDescriptor::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.grid().unwrap(), g);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
