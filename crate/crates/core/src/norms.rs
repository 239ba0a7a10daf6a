//! Discrete Gagliardo seminorm.

use crate::error::{check_fraction, Result};
use crate::grid::GridFunction;

/// `[u]_{H^s} = ( Σ_{i≠j} (u_i − u_j)² / |x_i − x_j|^{n+2s} · vol² )^{1/2}`
/// over all node pairs of the grid.
pub fn hs_seminorm(u: &GridFunction, s: f64) -> Result<f64> {
    check_fraction("s", s)?;
    let g = u.grid();
    let n = g.len();
    let p = g.dim() as f64 + 2.0 * s;
    let coords: Vec<_> = (0..n).map(|i| g.coord(i)).collect();
    let v = u.values();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = v[i] - v[j];
            if d == 0.0 {
                continue;
            }
            let r2 = (coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2);
            sum += d * d / r2.powf(0.5 * p);
        }
    }
    let vol = g.cell_volume();
    Ok((2.0 * sum).sqrt() * vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn constants_have_zero_seminorm() {
        let g = Grid::new_2d([1.0, 1.0], [6, 6]).unwrap();
        assert_eq!(hs_seminorm(&GridFunction::constant(&g, 3.0), 0.4).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_order() {
        let g = Grid::new_1d(1.0, 6).unwrap();
        let u = GridFunction::zeros(&g);
        assert!(hs_seminorm(&u, 0.0).is_err());
        assert!(hs_seminorm(&u, 1.0).is_err());
    }
}
