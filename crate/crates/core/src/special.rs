//! Gamma-function constants and the modified Bessel function `K_ν`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma as statrs_gamma;

use crate::error::{Error, Result};

pub fn gamma(x: f64) -> f64 {
    statrs_gamma(x)
}

/// `Γ(−s) = −Γ(1 − s)/s`, negative for `s ∈ (0, 1)`.
pub fn gamma_neg(s: f64) -> f64 {
    -gamma(1.0 - s) / s
}

/// Extension-flux constant `c_s = Γ(1−s) / (4^{s−1/2} Γ(s))`:
/// `−lim y^a U_y = c_s L^s u`.
pub fn c_s(s: f64) -> f64 {
    gamma(1.0 - s) / (4f64.powf(s - 0.5) * gamma(s))
}

/// Incremental-quotient constant `|Γ(−s)| / (4^s Γ(s))`:
/// `−lim (U(x,y) − U(x,0)) / y^{2s} = c · L^s u`. Equals `c_s / (2s)`.
pub fn c_quotient(s: f64) -> f64 {
    gamma_neg(s).abs() / (4f64.powf(s) * gamma(s))
}

/// Normalization of the fractional Laplacian on `ℝ^n`:
/// `(−Δ)^s u(x) = c_{n,s} P.V.∫ (u(x) − u(z)) / |x − z|^{n+2s} dz`.
pub fn frac_laplacian_constant(n: usize, s: f64) -> f64 {
    let h = n as f64 / 2.0;
    4f64.powf(s) * gamma(h + s) / (PI.powf(h) * gamma_neg(s).abs())
}

/// Riesz-potential constant: `(−Δ)^{−s} f = d_{n,s} ∫ f(z) / |x − z|^{n−2s} dz`, `n > 2s`.
pub fn riesz_constant(n: usize, s: f64) -> f64 {
    let h = n as f64 / 2.0;
    gamma(h - s) / (4f64.powf(s) * PI.powf(h) * gamma(s))
}

/// Constant of the logarithmic kernel when `n = 2s = 1`:
/// `(−Δ)^{−1/2} f = (1/π) ∫ ln(1/|x − z|) f(z) dz`.
pub const LOG_KERNEL_CONSTANT_1D: f64 = 1.0 / PI;

/// Leading coefficient `c` of the half-line solution `u = c x^{2s}` of
/// `(−Δ_D^+)^s u = 1`, `s < 1/2`.
pub fn halfline_one_constant(s: f64) -> f64 {
    1.0 / (gamma(1.0 + 2.0 * s) * (PI * s).cos())
}

/// `K_ν(x)` for real `ν ≥ 0`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let v = bessel_k_scaled(nu, x)? * (-x).exp();
    if v == 0.0 && x < 700.0 {
        return Err(Error::SpecialFunction(format!("K_{nu}({x}) underflowed")));
    }
    Ok(v)
}

/// `e^x K_ν(x)`.
///
/// Temme's series for `x < 2`, Steed's continued fraction otherwise, then
/// forward recurrence from `|μ| ≤ 1/2` up to `ν`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::SpecialFunction(format!("K_ν needs finite x > 0, got {x}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::SpecialFunction(format!("K_ν needs finite ν ≥ 0, got {nu}")));
    }
    const EPS: f64 = 1e-16;
    const MAXIT: usize = 10_000;
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut kmu, mut k1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..=MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SpecialFunction(format!("Temme series for K_{nu}({x}) did not converge")));
        }
        let scale = x.exp();
        kmu = sum * scale;
        k1 = sum1 * xi2 * scale;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 2..=MAXIT {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SpecialFunction(format!("continued fraction for K_{nu}({x}) did not converge")));
        }
        h *= a1;
        kmu = (PI / (2.0 * x)).sqrt() / s;
        k1 = kmu * (mu + x + 0.5 - h) * xi;
    }
    for i in 1..=nl {
        let next = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    if !kmu.is_finite() {
        return Err(Error::SpecialFunction(format!("K_{nu}({x}) overflowed")));
    }
    Ok(kmu)
}

/// Taylor coefficients of `1/Γ(z) = Σ c_k z^k`, `c_1 = 1`.
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// `(gam1, gam2, 1/Γ(1+μ), 1/Γ(1−μ))` with
/// `gam1 = (1/Γ(1−μ) − 1/Γ(1+μ)) / (2μ)`, `gam2 = (1/Γ(1−μ) + 1/Γ(1+μ)) / 2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let m2 = mu * mu;
    // 1/Γ(1+μ) = Σ c_{k+1} μ^k: even part gives gam2, odd part −gam1.
    let (mut even, mut odd, mut p) = (0.0, 0.0, 1.0);
    for k in (0..RECIP_GAMMA.len()).step_by(2) {
        even += RECIP_GAMMA[k] * p;
        if k + 1 < RECIP_GAMMA.len() {
            odd += RECIP_GAMMA[k + 1] * p;
        }
        p *= m2;
    }
    let gam1 = -odd;
    let gam2 = even;
    (gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1)
}

/// Lower incomplete gamma `γ(a, z) = ∫_0^z t^{a−1} e^{−t} dt` for small `z`
/// (series; used for tail corrections with `z ≲ 1`).
pub fn lower_incomplete_gamma_series(a: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0 / a;
    for k in 1..200 {
        term *= -z / k as f64;
        let t = term / (a + k as f64);
        sum += t;
        if t.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    z.powf(a) * sum
}
