//! Least-squares line fits used by the kernel and regularity probes.

use serde::Serialize;

use crate::error::{Error, Result};

/// `y ≈ slope·x + intercept` in whatever coordinates the caller chose
/// (usually `log y` against `log r`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub rmse: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Abscissae of the points used (radii for log–log fits).
    pub abscissae: Vec<f64>,
}

/// Ordinary least squares. Needs at least two distinct abscissae.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<ExponentFit> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Probe(format!("{n} points are not enough for a line fit")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Probe("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    Ok(ExponentFit {
        slope,
        intercept,
        rmse: (sse / nf).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        points: n,
        abscissae: x.to_vec(),
    })
}

/// Fit of `ln y` against `ln r`; nonpositive samples are rejected.
pub fn fit_loglog(r: &[f64], y: &[f64]) -> Result<ExponentFit> {
    if r.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Probe("log–log fit needs positive data".into()));
    }
    let lx: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut fit = fit_line(&lx, &ly)?;
    fit.abscissae = r.to_vec();
    Ok(fit)
}

/// Fit of `y` against `ln(1/r)`: `y ≈ slope·ln(1/r) + intercept`.
pub fn fit_log(r: &[f64], y: &[f64]) -> Result<ExponentFit> {
    if r.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Probe("log fit needs positive radii".into()));
    }
    let lx: Vec<f64> = r.iter().map(|v| -v.ln()).collect();
    let mut fit = fit_line(&lx, y)?;
    fit.abscissae = r.to_vec();
    Ok(fit)
}

/// Observed convergence order from errors on successively halved meshes:
/// `log2(e_k / e_{k+1})` per consecutive pair.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let r: Vec<f64> = (1..8).map(|k| 0.5f64.powi(k)).collect();
        let y: Vec<f64> = r.iter().map(|v| 3.0 * v.powf(1.7)).collect();
        let f = fit_loglog(&r, &y).unwrap();
        assert!((f.slope - 1.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.rmse < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_fit() {
        let r = [0.1, 0.2, 0.3, 0.4];
        let y: Vec<f64> = r.iter().map(|v: &f64| 2.0 * (1.0 / v).ln() + 0.5).collect();
        let f = fit_log(&r, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn orders() {
        let o = observed_orders(&[1.0, 0.25, 0.0625]);
        assert_eq!(o, vec![2.0, 2.0]);
    }
}
