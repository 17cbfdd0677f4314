//! Regime-switching jump diffusion with a single switch triggered by the
//! first Poisson jump.
//!
//! Before the switch the spot diffuses with `sigma_low`; at the first jump
//! time `τ ~ Exp(lambda)` it is multiplied by `e^Y`, `Y ~ N(u, delta²)`, and
//! diffuses with `sigma_high` afterwards. Conditionally on `τ` the terminal
//! log-spot is Gaussian, so a call is a mixture of Garman–Kohlhagen prices:
//! one no-switch term plus an integral over the switch time.

use serde::{Deserialize, Serialize};

use crate::black_scholes::{
    call_delta_total_vol, call_total_vol, implied_vol, MarketContext, OptionSpec, Side,
};
use crate::error::{ensure_finite, Error, Result};
use crate::numerics::normal::sqrt_two_pi;
use crate::numerics::quad::integrate;

/// Model parameters `(sigma_low, sigma_high, lambda, u, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsParams {
    pub sigma_low: f64,
    pub sigma_high: f64,
    /// Intensity of the switching jump, per year.
    pub lambda: f64,
    /// Mean of the log jump.
    pub u: f64,
    /// Standard deviation of the log jump.
    pub delta: f64,
}

/// Quantities derived from the parameters for a given maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsDerived {
    pub kappa: f64,
    /// Probability of no switch before maturity, `e^{-lambda T}`.
    pub p: f64,
}

impl RsParams {
    pub fn new(sigma_low: f64, sigma_high: f64, lambda: f64, u: f64, delta: f64) -> Result<Self> {
        let p = Self {
            sigma_low,
            sigma_high,
            lambda,
            u,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_low", self.sigma_low),
            ("sigma_high", self.sigma_high),
            ("lambda", self.lambda),
            ("u", self.u),
            ("delta", self.delta),
        ] {
            ensure_finite(name, v)?;
        }
        if self.sigma_low <= 0.0 {
            return Err(Error::domain("sigma_low must be positive"));
        }
        if self.sigma_high < self.sigma_low {
            return Err(Error::domain(format!(
                "sigma_high ({}) must not be below sigma_low ({})",
                self.sigma_high, self.sigma_low
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::domain("lambda must be non-negative"));
        }
        if self.delta < 0.0 {
            return Err(Error::domain("delta must be non-negative"));
        }
        if self.u <= -10.0 {
            return Err(Error::domain("u must exceed -10"));
        }
        Ok(())
    }

    /// Expected relative jump size `e^{u + delta²/2} - 1`.
    pub fn kappa(&self) -> f64 {
        (self.u + 0.5 * self.delta * self.delta).exp_m1()
    }

    pub fn derived(&self, maturity: f64) -> RsDerived {
        RsDerived {
            kappa: self.kappa(),
            p: (-self.lambda * maturity).exp(),
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.sigma_low,
            self.sigma_high,
            self.lambda,
            self.u,
            self.delta,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [a, b, c, d, e] => Self::new(*a, *b, *c, *d, *e),
            _ => Err(Error::domain(format!(
                "expected 5 parameters, got {}",
                v.len()
            ))),
        }
    }
}

/// Free function form of [`RsParams::kappa`].
pub fn kappa(params: &RsParams) -> f64 {
    params.kappa()
}

/// Maturities at or below this are priced at intrinsic value.
pub const MIN_MATURITY: f64 = 1e-8;
/// Largest admissible `|lambda kappa T|`.
pub const MAX_DRIFT_EXPONENT: f64 = 50.0;
/// Absolute quadrature tolerance on the switch-time integral.
pub const QUAD_TOL: f64 = 1e-10;
pub const QUAD_MAX_PANELS: usize = 10_000;

fn check_call(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<()> {
    mkt.validate()?;
    opt.validate()?;
    params.validate()?;
    if opt.side != Side::Call {
        return Err(Error::domain("regime-switching pricers are call-only"));
    }
    let drift = params.lambda * params.kappa() * opt.maturity;
    if drift.abs() > MAX_DRIFT_EXPONENT {
        return Err(Error::domain(format!(
            "|lambda kappa T| = {} exceeds {MAX_DRIFT_EXPONENT}",
            drift.abs()
        )));
    }
    Ok(())
}

/// Total standard deviation of the log-spot given a switch at `t`.
#[inline]
fn switched_total_vol(params: &RsParams, t: f64, maturity: f64) -> f64 {
    let v = params.sigma_low * params.sigma_low * t
        + params.sigma_high * params.sigma_high * (maturity - t)
        + params.delta * params.delta;
    v.sqrt()
}

/// Exact regime-switching call value.
pub fn rs_price(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<f64> {
    check_call(mkt, opt, params)?;
    let t_mat = opt.maturity;
    if t_mat <= MIN_MATURITY {
        return Ok((mkt.spot - opt.strike).max(0.0));
    }
    let RsParams {
        sigma_low, lambda, ..
    } = *params;
    let kappa = params.kappa();
    let (s0, k, rd, rf) = (mkt.spot, opt.strike, mkt.rd, mkt.rf);
    let p = (-lambda * t_mat).exp();

    let no_switch = p * call_total_vol(
        s0 * (-lambda * kappa * t_mat).exp(),
        k,
        t_mat,
        rd,
        rf,
        sigma_low * t_mat.sqrt(),
    );
    if lambda == 0.0 {
        return Ok(no_switch);
    }
    let integrand = |t: f64| {
        let spot = s0 * (-lambda * kappa * t).exp() * (1.0 + kappa);
        let w = switched_total_vol(params, t, t_mat);
        call_total_vol(spot, k, t_mat, rd, rf, w) * lambda * (-lambda * t).exp()
    };
    let switched = integrate(integrand, 0.0, t_mat, QUAD_TOL, QUAD_MAX_PANELS)?;
    Ok(no_switch + switched.value)
}

/// Exact regime-switching pips spot delta, the spot derivative of
/// [`rs_price`].
pub fn rs_delta(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<f64> {
    check_call(mkt, opt, params)?;
    let t_mat = opt.maturity;
    if t_mat <= MIN_MATURITY {
        return Ok(if mkt.spot > opt.strike { 1.0 } else { 0.0 });
    }
    let RsParams {
        sigma_low, lambda, ..
    } = *params;
    let kappa = params.kappa();
    let (s0, k, rd, rf) = (mkt.spot, opt.strike, mkt.rd, mkt.rf);

    let no_switch = call_delta_total_vol(
        s0 * (-lambda * kappa * t_mat).exp(),
        k,
        t_mat,
        rd,
        rf,
        sigma_low * t_mat.sqrt(),
    ) * (-lambda * t_mat * (1.0 + kappa)).exp();
    if lambda == 0.0 {
        return Ok(no_switch);
    }
    let integrand = |t: f64| {
        let spot = s0 * (-lambda * kappa * t).exp() * (1.0 + kappa);
        let w = switched_total_vol(params, t, t_mat);
        call_delta_total_vol(spot, k, t_mat, rd, rf, w)
            * lambda
            * (-lambda * t * (1.0 + kappa)).exp()
            * (1.0 + kappa)
    };
    let switched = integrate(integrand, 0.0, t_mat, QUAD_TOL, QUAD_MAX_PANELS)?;
    Ok(no_switch + switched.value)
}

/// Black–Scholes volatility reproducing the regime-switching call value.
pub fn rs_implied_vol(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<f64> {
    let price = rs_price(mkt, opt, params)?;
    implied_vol(mkt, opt, price)
}

/// Convex combination of the two regimes evaluated at their endpoints.
pub fn approx_price(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<f64> {
    check_call(mkt, opt, params)?;
    let t_mat = opt.maturity;
    if t_mat <= MIN_MATURITY {
        return Ok((mkt.spot - opt.strike).max(0.0));
    }
    let kappa = params.kappa();
    let p = (-params.lambda * t_mat).exp();
    let sqrt_t = t_mat.sqrt();
    let (s0, k, rd, rf) = (mkt.spot, opt.strike, mkt.rd, mkt.rf);
    let low = call_total_vol(
        s0 * (-params.lambda * kappa * t_mat).exp(),
        k,
        t_mat,
        rd,
        rf,
        params.sigma_low * sqrt_t,
    );
    if p == 1.0 {
        return Ok(low);
    }
    let high = call_total_vol(
        s0 * (1.0 + kappa),
        k,
        t_mat,
        rd,
        rf,
        params.sigma_high * sqrt_t,
    );
    Ok(p * low + (1.0 - p) * high)
}

/// Spot derivative of [`approx_price`].
pub fn approx_delta(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<f64> {
    check_call(mkt, opt, params)?;
    let t_mat = opt.maturity;
    if t_mat <= MIN_MATURITY {
        return Ok(if mkt.spot > opt.strike { 1.0 } else { 0.0 });
    }
    let kappa = params.kappa();
    let p = (-params.lambda * t_mat).exp();
    let sqrt_t = t_mat.sqrt();
    let (s0, k, rd, rf) = (mkt.spot, opt.strike, mkt.rd, mkt.rf);
    let shift = (-params.lambda * kappa * t_mat).exp();
    let low = call_delta_total_vol(s0 * shift, k, t_mat, rd, rf, params.sigma_low * sqrt_t);
    if p == 1.0 {
        return Ok(low);
    }
    let high = call_delta_total_vol(
        s0 * (1.0 + kappa),
        k,
        t_mat,
        rd,
        rf,
        params.sigma_high * sqrt_t,
    );
    Ok(p * shift * low + (1.0 - p) * (1.0 + kappa) * high)
}

/// Upper bound on `|rs_price - approx_price| / S0`.
pub fn approx_error_bound(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<f64> {
    check_call(mkt, opt, params)?;
    let b = error_bound_terms(opt.maturity, params);
    Ok(b.vol + b.jump - b.drift)
}

/// The three terms of the approximation error bound, kept apart so the
/// weakened bound (without the subtracted drift term) can be reported.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBoundTerms {
    /// `(1-p) sqrt(T/2π) (sigma_high - sigma_low)`
    pub vol: f64,
    /// `|kappa| (1-p)`
    pub jump: f64,
    /// `p |e^{-lambda kappa T} - 1|`
    pub drift: f64,
}

pub fn error_bound_terms(maturity: f64, params: &RsParams) -> ErrorBoundTerms {
    let kappa = params.kappa();
    let p = (-params.lambda * maturity).exp();
    let q = -(-params.lambda * maturity).exp_m1();
    ErrorBoundTerms {
        vol: q * maturity.sqrt() / sqrt_two_pi() * (params.sigma_high - params.sigma_low),
        jump: kappa.abs() * q,
        drift: p * (-params.lambda * kappa * maturity).exp_m1().abs(),
    }
}

/// One spot of the approximation diagnostic grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ApproxGridRow {
    pub spot: f64,
    pub exact_price: f64,
    pub approx_price: f64,
    pub exact_delta: f64,
    pub approx_delta: f64,
    /// `(approx - exact) / S0 * 100`
    pub price_rel_err_pct: f64,
    /// `(approx_delta - exact_delta) / S0 * 100`
    pub delta_rel_err_pct: f64,
    /// `|exact - approx| / S0`
    pub spot_adjusted_error: f64,
    pub bound: f64,
    /// Bound without the subtracted drift term.
    pub weak_bound: f64,
}

impl ApproxGridRow {
    pub fn within_bound(&self) -> bool {
        self.spot_adjusted_error <= self.bound
    }

    pub fn within_weak_bound(&self) -> bool {
        self.spot_adjusted_error <= self.weak_bound
    }
}

/// Exact vs. approximate price and delta over a set of spots.
pub fn approx_error_grid(
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
    spots: &[f64],
) -> Result<Vec<ApproxGridRow>> {
    let terms = error_bound_terms(opt.maturity, params);
    spots
        .iter()
        .map(|&s| {
            let m = mkt.with_spot(s);
            let exact_price = rs_price(&m, opt, params)?;
            let approx = approx_price(&m, opt, params)?;
            let exact_delta = rs_delta(&m, opt, params)?;
            let approx_d = approx_delta(&m, opt, params)?;
            Ok(ApproxGridRow {
                spot: s,
                exact_price,
                approx_price: approx,
                exact_delta,
                approx_delta: approx_d,
                price_rel_err_pct: (approx - exact_price) / s * 100.0,
                delta_rel_err_pct: (approx_d - exact_delta) / s * 100.0,
                spot_adjusted_error: (exact_price - approx).abs() / s,
                bound: terms.vol + terms.jump - terms.drift,
                weak_bound: terms.vol + terms.jump,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black_scholes::{bs_delta, bs_price};

    fn hk() -> (MarketContext, OptionSpec, RsParams) {
        (
            MarketContext::new(7.8, 0.01, 0.015).unwrap(),
            OptionSpec::call(7.8, 0.5).unwrap(),
            RsParams::new(0.005, 0.10, 0.2, -0.01, 0.0).unwrap(),
        )
    }

    #[test]
    fn kappa_values() {
        let mut p = RsParams::new(0.01, 0.1, 0.2, 0.0, 0.0).unwrap();
        assert_eq!(p.kappa(), 0.0);
        p.u = -0.01;
        assert!((p.kappa() - ((-0.01f64).exp() - 1.0)).abs() < 1e-16);
        assert!((p.kappa() + 0.009_950_166_250_831_893).abs() < 1e-16);
        p.u = 0.05;
        assert!((p.kappa() - (0.05f64.exp() - 1.0)).abs() < 1e-16);
    }

    #[test]
    fn invariants_enforced() {
        assert!(RsParams::new(0.0, 0.1, 0.2, 0.0, 0.0).is_err());
        assert!(RsParams::new(0.2, 0.1, 0.2, 0.0, 0.0).is_err());
        assert!(RsParams::new(0.1, 0.1, -0.2, 0.0, 0.0).is_err());
        assert!(RsParams::new(0.1, 0.1, 0.2, 0.0, -1.0).is_err());
        assert!(RsParams::new(0.1, 0.1, 0.2, -10.0, 0.0).is_err());
    }

    #[test]
    fn zero_intensity_is_black_scholes() {
        let (mkt, opt, mut p) = hk();
        p.lambda = 0.0;
        let bs = bs_price(&mkt, &opt, p.sigma_low).unwrap();
        assert_eq!(rs_price(&mkt, &opt, &p).unwrap(), bs);
        assert_eq!(approx_price(&mkt, &opt, &p).unwrap(), bs);
        let d = bs_delta(&mkt, &opt, p.sigma_low).unwrap();
        assert_eq!(rs_delta(&mkt, &opt, &p).unwrap(), d);
        assert_eq!(approx_delta(&mkt, &opt, &p).unwrap(), d);
        assert_eq!(approx_error_bound(&mkt, &opt, &p).unwrap(), 0.0);
        assert!((rs_implied_vol(&mkt, &opt, &p).unwrap() - p.sigma_low).abs() < 1e-9);
    }

    #[test]
    fn identical_regimes_collapse() {
        let (mkt, opt, _) = hk();
        let p = RsParams::new(0.04, 0.04, 1.3, 0.0, 0.0).unwrap();
        let bs = bs_price(&mkt, &opt, 0.04).unwrap();
        assert!((rs_price(&mkt, &opt, &p).unwrap() - bs).abs() < 1e-12);
    }

    #[test]
    fn rejects_puts_and_overflow() {
        let (mkt, _, p) = hk();
        let put = OptionSpec::put(7.8, 0.5).unwrap();
        assert!(matches!(rs_price(&mkt, &put, &p), Err(Error::Domain(_))));
        let big = RsParams::new(0.01, 0.1, 100.0, 5.0, 0.0).unwrap();
        let opt = OptionSpec::call(7.8, 1.0).unwrap();
        assert!(matches!(rs_price(&mkt, &opt, &big), Err(Error::Domain(_))));
    }

    #[test]
    fn vanishing_maturity() {
        let (mkt, _, p) = hk();
        for &k in &[7.7, 7.8, 7.9] {
            let intrinsic = (mkt.spot - k).max(0.0);
            let opt = OptionSpec::call(k, 1e-9).unwrap();
            assert_eq!(rs_price(&mkt, &opt, &p).unwrap(), intrinsic);
            // Time value shrinks like the high-regime standard deviation.
            let t = 1e-6;
            let opt = OptionSpec::call(k, t).unwrap();
            let scale = mkt.spot * p.sigma_high * t.sqrt();
            let v = rs_price(&mkt, &opt, &p).unwrap();
            assert!((v - intrinsic).abs() < scale, "{k}: {v} vs {intrinsic}");
            let a = approx_price(&mkt, &opt, &p).unwrap();
            assert!((a - intrinsic).abs() < scale, "{k}: {a} vs {intrinsic}");
        }
    }

    #[test]
    fn delta_matches_finite_difference() {
        let (mkt, opt, p) = hk();
        let h = 1e-5 * mkt.spot;
        let fd = |f: fn(&MarketContext, &OptionSpec, &RsParams) -> Result<f64>| {
            (f(&mkt.with_spot(mkt.spot + h), &opt, &p).unwrap()
                - f(&mkt.with_spot(mkt.spot - h), &opt, &p).unwrap())
                / (2.0 * h)
        };
        assert!((rs_delta(&mkt, &opt, &p).unwrap() - fd(rs_price)).abs() < 1e-6);
        assert!((approx_delta(&mkt, &opt, &p).unwrap() - fd(approx_price)).abs() < 1e-6);
    }

    #[test]
    fn approx_delta_close_to_exact() {
        let (mkt, opt, p) = hk();
        let d = rs_delta(&mkt, &opt, &p).unwrap();
        let a = approx_delta(&mkt, &opt, &p).unwrap();
        assert!((d - a).abs() < 0.05, "{d} vs {a}");
    }

    #[test]
    fn implied_vol_above_low_regime() {
        let (mkt, opt, p) = hk();
        let iv = rs_implied_vol(&mkt, &opt, &p).unwrap();
        assert!(iv > p.sigma_low, "{iv}");
    }

    #[test]
    fn smile_setup_finite_and_positive() {
        let mkt = MarketContext::new(7.77, 0.01, 0.01).unwrap();
        let p = RsParams::new(0.005, 0.1, 0.2, -0.01, 0.0).unwrap();
        for i in 0..=20 {
            let k = 7.5 + 0.025 * i as f64;
            let opt = OptionSpec::call(k, 0.5).unwrap();
            let iv = rs_implied_vol(&mkt, &opt, &p).unwrap();
            assert!(iv.is_finite() && iv > 0.0, "K={k}: {iv}");
        }
    }

    #[test]
    fn atm_vol_increases_with_intensity() {
        let (mkt, opt, p) = hk();
        let mut last = 0.0;
        for &l in &[0.05, 0.1, 0.2, 0.4] {
            let q = RsParams { lambda: l, ..p };
            let iv = rs_implied_vol(&mkt, &opt, &q).unwrap();
            assert!(iv > last);
            last = iv;
        }
    }

    #[test]
    fn bound_terms_degenerate_cases() {
        let (mkt, opt, _) = hk();
        let p = RsParams::new(0.02, 0.1, 0.3, 0.0, 0.0).unwrap();
        let t = opt.maturity;
        let q = 1.0 - (-0.3 * t).exp();
        let expected = q * (t / (2.0 * std::f64::consts::PI)).sqrt() * 0.08;
        assert!((approx_error_bound(&mkt, &opt, &p).unwrap() - expected).abs() < 1e-15);
    }
}
