//! Lognormal SABR (`β = 1`) implied volatility, used as a calibration
//! benchmark against the regime-switching smile.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::lsq::{levenberg_marquardt, LsqOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    /// Initial volatility.
    pub a: f64,
    /// Volatility of volatility.
    pub b: f64,
    pub rho: f64,
}

impl SabrParams {
    pub fn new(a: f64, b: f64, rho: f64) -> Result<Self> {
        let p = Self { a, b, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("a", self.a)?;
        ensure_finite("b", self.b)?;
        ensure_finite("rho", self.rho)?;
        if self.a <= 0.0 {
            return Err(Error::domain(format!(
                "SABR a must be positive, got {}",
                self.a
            )));
        }
        if self.b < 0.0 {
            return Err(Error::domain(format!(
                "SABR b must be non-negative, got {}",
                self.b
            )));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::domain(format!(
                "SABR rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Below this `|z|` the ratio `z / χ(z)` is replaced by its limit 1.
pub const SMALL_Z: f64 = 1e-7;

pub const A_BOUNDS: (f64, f64) = (1e-6, 2.0);
pub const B_BOUNDS: (f64, f64) = (0.0, 10.0);
pub const RHO_BOUNDS: (f64, f64) = (-0.999, 0.999);

/// `a (z/χ(z)) (1 + (ρ b a / 4 + (2 - 3ρ²) b² / 24) T)` with
/// `z = (b/a) ln(F/K)`.
pub fn sabr_vol(strike: f64, forward: f64, maturity: f64, params: &SabrParams) -> Result<f64> {
    params.validate()?;
    for (name, v) in [
        ("strike", strike),
        ("forward", forward),
        ("maturity", maturity),
    ] {
        ensure_finite(name, v)?;
        if v <= 0.0 {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    let SabrParams { a, b, rho } = *params;
    let z = b / a * (forward / strike).ln();
    let ratio = if z.abs() < SMALL_Z {
        1.0
    } else {
        let arg = ((1.0 - 2.0 * rho * z + z * z).sqrt() + z - rho) / (1.0 - rho);
        let chi = arg.ln();
        if !(arg > 0.0) || !chi.is_finite() || chi == 0.0 || chi.signum() != z.signum() {
            return Err(Error::Numerical {
                what: format!("SABR chi({z}) left its domain"),
                estimate: chi,
                error_bound: f64::INFINITY,
            });
        }
        z / chi
    };
    let correction = 1.0 + (rho * b * a / 4.0 + (2.0 - 3.0 * rho * rho) * b * b / 24.0) * maturity;
    Ok(a * ratio * correction)
}

/// Fitted SABR parameters and per-pillar vol residuals (model - quote).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SabrFit {
    pub params: SabrParams,
    pub residuals: Vec<f64>,
    /// Root mean square of the absolute vol residuals.
    pub rmse: f64,
    pub iterations: usize,
}

/// Least-squares fit of `(a, b, ρ)` to `(strike, vol)` pillars.
pub fn sabr_calibrate(smile: &[(f64, f64)], forward: f64, maturity: f64) -> Result<SabrFit> {
    if smile.len() < 3 {
        return Err(Error::domain(
            "SABR calibration needs at least three pillars",
        ));
    }
    for w in smile.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::domain(
                "SABR pillars must have distinct increasing strikes",
            ));
        }
    }
    if smile.iter().any(|&(k, v)| !(k > 0.0) || !(v > 0.0)) {
        return Err(Error::domain("SABR pillars need positive strikes and vols"));
    }
    let atm = smile
        .iter()
        .min_by(|x, y| {
            (x.0 / forward)
                .ln()
                .abs()
                .total_cmp(&(y.0 / forward).ln().abs())
        })
        .map(|p| p.1)
        .unwrap_or(smile[0].1);

    let resid = |x: &[f64]| -> Result<Vec<f64>> {
        let p = SabrParams {
            a: x[0],
            b: x[1],
            rho: x[2],
        };
        smile
            .iter()
            .map(|&(k, v)| Ok(sabr_vol(k, forward, maturity, &p)? - v))
            .collect()
    };
    let lo = [A_BOUNDS.0, B_BOUNDS.0, RHO_BOUNDS.0];
    let hi = [A_BOUNDS.1, B_BOUNDS.1, RHO_BOUNDS.1];
    let starts = [
        [atm, 0.5, 0.0],
        [atm, 2.0, -0.5],
        [atm, 2.0, 0.5],
        [atm, 0.05, 0.0],
    ];
    let opts = LsqOptions {
        max_iter: 400,
        ..LsqOptions::default()
    };
    let mut best: Option<crate::numerics::lsq::LsqResult> = None;
    for x0 in starts {
        let x0 = [x0[0].clamp(lo[0], hi[0]), x0[1], x0[2]];
        let Ok(r) = levenberg_marquardt(resid, &x0, &lo, &hi, opts) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| r.cost < b.cost) {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::Calibration {
        what: "no SABR start produced a finite residual".into(),
        best: Vec::new(),
        residual: f64::INFINITY,
    })?;
    let rmse = (2.0 * best.cost / smile.len() as f64).sqrt();
    Ok(SabrFit {
        params: SabrParams {
            a: best.x[0],
            b: best.x[1],
            rho: best.x[2],
        },
        residuals: best.residuals,
        rmse,
        iterations: best.iterations,
    })
}

/// Density of the SABR volatility at horizon `t` under `β = 1`:
/// `LogNormal(ln a - b² t / 2, b² t)`.
pub fn vol_density(x: f64, t: f64, params: &SabrParams) -> f64 {
    if !(x > 0.0) || params.b == 0.0 || t <= 0.0 {
        return 0.0;
    }
    let s2 = params.b * params.b * t;
    let m = params.a.ln() - 0.5 * s2;
    let z = x.ln() - m;
    (-0.5 * z * z / s2).exp() / (x * (2.0 * std::f64::consts::PI * s2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atm_limit() {
        let p = SabrParams::new(0.01, 0.5, -0.3).unwrap();
        let t = 0.5;
        let expected =
            0.01 * (1.0 + (-0.3 * 0.5 * 0.01 / 4.0 + (2.0 - 3.0 * 0.09) * 0.25 / 24.0) * t);
        assert_eq!(sabr_vol(7.8, 7.8, t, &p).unwrap(), expected);
        let near = sabr_vol(7.8 * (1.0 + 1e-9), 7.8, t, &p).unwrap();
        assert!((near - expected).abs() < 1e-10);
        let near = sabr_vol(7.8 * (1.0 - 1e-9), 7.8, t, &p).unwrap();
        assert!((near - expected).abs() < 1e-10);
    }

    #[test]
    fn zero_vol_of_vol_is_flat() {
        let p = SabrParams::new(0.02, 0.0, 0.4).unwrap();
        for &k in &[6.0, 7.8, 9.0] {
            assert_eq!(sabr_vol(k, 7.8, 1.0, &p).unwrap(), 0.02);
        }
    }

    #[test]
    fn symmetric_without_correlation() {
        let p = SabrParams::new(0.01, 0.8, 0.0).unwrap();
        let f = 7.8;
        let up = sabr_vol(f * 0.01f64.exp(), f, 0.5, &p).unwrap();
        let dn = sabr_vol(f * (-0.01f64).exp(), f, 0.5, &p).unwrap();
        assert!((up - dn).abs() < 1e-15);
    }

    #[test]
    fn round_trip_synthetic_smile() {
        let truth = SabrParams::new(0.01, 0.5, -0.3).unwrap();
        let f = 7.8;
        let smile: Vec<(f64, f64)> = [7.6, 7.7, 7.8, 7.9, 8.0]
            .iter()
            .map(|&k| (k, sabr_vol(k, f, 0.5, &truth).unwrap()))
            .collect();
        let fit = sabr_calibrate(&smile, f, 0.5).unwrap();
        assert!(fit.rmse < 1e-4, "{fit:?}");
    }

    #[test]
    fn flat_smile() {
        let smile: Vec<(f64, f64)> = [7.6, 7.7, 7.8, 7.9, 8.0]
            .iter()
            .map(|&k| (k, 0.01))
            .collect();
        let fit = sabr_calibrate(&smile, 7.8, 0.5).unwrap();
        assert!((fit.params.a - 0.01).abs() < 1e-5, "{fit:?}");
        assert!(fit.params.b < 1e-2, "{fit:?}");
    }

    #[test]
    fn density_integrates_to_one() {
        let p = SabrParams::new(0.01, 0.8, 0.0).unwrap();
        let n = 200_000;
        let h = 0.1 / n as f64;
        let total: f64 = (0..n)
            .map(|i| vol_density((i as f64 + 0.5) * h, 1.0 / 12.0, &p) * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }
}
