//! Garman–Kohlhagen pricing of FX vanillas: price, pips spot delta, vega and
//! implied volatility.
//!
//! The `*_total_vol` kernels take the total standard deviation `w = σ√T`
//! directly; the regime-switching pricers integrate over mixtures of such
//! terms where the total variance is not `σ²T` for a single `σ`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Bound, Error, Result};
use crate::numerics::normal::{cdf, pdf};
use crate::numerics::roots::{brent, BrentOptions};

/// Spot and the domestic/foreign continuously compounded rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketContext {
    /// Domestic units per one unit of foreign currency.
    pub spot: f64,
    pub rd: f64,
    pub rf: f64,
}

impl MarketContext {
    pub fn new(spot: f64, rd: f64, rf: f64) -> Result<Self> {
        let mkt = Self { spot, rd, rf };
        mkt.validate()?;
        Ok(mkt)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("spot", self.spot)?;
        ensure_finite("rd", self.rd)?;
        ensure_finite("rf", self.rf)?;
        if self.spot <= 0.0 {
            return Err(Error::domain(format!(
                "spot must be positive, got {}",
                self.spot
            )));
        }
        Ok(())
    }

    pub fn with_spot(&self, spot: f64) -> Self {
        Self { spot, ..*self }
    }

    /// Outright forward for maturity `t`.
    pub fn forward(&self, t: f64) -> f64 {
        self.spot * ((self.rd - self.rf) * t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Call,
    Put,
}

impl Side {
    /// +1 for calls, -1 for puts.
    pub fn omega(self) -> f64 {
        match self {
            Side::Call => 1.0,
            Side::Put => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    pub maturity: f64,
    pub side: Side,
}

impl OptionSpec {
    pub fn new(strike: f64, maturity: f64, side: Side) -> Result<Self> {
        let opt = Self {
            strike,
            maturity,
            side,
        };
        opt.validate()?;
        Ok(opt)
    }

    pub fn call(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(strike, maturity, Side::Call)
    }

    pub fn put(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(strike, maturity, Side::Put)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("strike", self.strike)?;
        ensure_finite("maturity", self.maturity)?;
        if self.strike <= 0.0 {
            return Err(Error::domain(format!(
                "strike must be positive, got {}",
                self.strike
            )));
        }
        if self.maturity <= 0.0 {
            return Err(Error::domain(format!(
                "maturity must be positive, got {}",
                self.maturity
            )));
        }
        Ok(())
    }

    pub fn with_maturity(&self, maturity: f64) -> Self {
        Self { maturity, ..*self }
    }
}

#[inline]
fn d_plus_minus(spot: f64, strike: f64, t: f64, rd: f64, rf: f64, w: f64) -> (f64, f64) {
    let m = (spot / strike).ln() + (rd - rf) * t;
    let dp = m / w + 0.5 * w;
    (dp, dp - w)
}

/// Call value for total standard deviation `w`.
#[inline]
pub fn call_total_vol(spot: f64, strike: f64, t: f64, rd: f64, rf: f64, w: f64) -> f64 {
    let (dp, dm) = d_plus_minus(spot, strike, t, rd, rf, w);
    (-rf * t).exp() * spot * cdf(dp) - (-rd * t).exp() * strike * cdf(dm)
}

/// Pips spot delta of a call for total standard deviation `w`.
#[inline]
pub fn call_delta_total_vol(spot: f64, strike: f64, t: f64, rd: f64, rf: f64, w: f64) -> f64 {
    let (dp, _) = d_plus_minus(spot, strike, t, rd, rf, w);
    (-rf * t).exp() * cdf(dp)
}

/// Either side, total standard deviation `w`.
#[inline]
pub fn price_total_vol(
    side: Side,
    spot: f64,
    strike: f64,
    t: f64,
    rd: f64,
    rf: f64,
    w: f64,
) -> f64 {
    let (dp, dm) = d_plus_minus(spot, strike, t, rd, rf, w);
    let o = side.omega();
    o * ((-rf * t).exp() * spot * cdf(o * dp) - (-rd * t).exp() * strike * cdf(o * dm))
}

fn check(mkt: &MarketContext, opt: &OptionSpec, sigma: f64) -> Result<()> {
    mkt.validate()?;
    opt.validate()?;
    ensure_finite("sigma", sigma)?;
    if sigma <= 0.0 {
        return Err(Error::domain(format!(
            "volatility must be positive, got {sigma}"
        )));
    }
    Ok(())
}

/// Garman–Kohlhagen value of a call or put.
pub fn bs_price(mkt: &MarketContext, opt: &OptionSpec, sigma: f64) -> Result<f64> {
    check(mkt, opt, sigma)?;
    let w = sigma * opt.maturity.sqrt();
    Ok(price_total_vol(
        opt.side,
        mkt.spot,
        opt.strike,
        opt.maturity,
        mkt.rd,
        mkt.rf,
        w,
    ))
}

/// Pips spot delta: `e^{-rf T} N(d+)` for calls, `-e^{-rf T} N(-d+)` for puts.
pub fn bs_delta(mkt: &MarketContext, opt: &OptionSpec, sigma: f64) -> Result<f64> {
    check(mkt, opt, sigma)?;
    let w = sigma * opt.maturity.sqrt();
    let (dp, _) = d_plus_minus(mkt.spot, opt.strike, opt.maturity, mkt.rd, mkt.rf, w);
    let o = opt.side.omega();
    Ok(o * (-mkt.rf * opt.maturity).exp() * cdf(o * dp))
}

/// Sensitivity to `σ`; identical for calls and puts.
pub fn bs_vega(mkt: &MarketContext, opt: &OptionSpec, sigma: f64) -> Result<f64> {
    check(mkt, opt, sigma)?;
    let t = opt.maturity;
    let w = sigma * t.sqrt();
    let (dp, _) = d_plus_minus(mkt.spot, opt.strike, t, mkt.rd, mkt.rf, w);
    Ok(mkt.spot * (-mkt.rf * t).exp() * pdf(dp) * t.sqrt())
}

/// Lower end of the implied-volatility search bracket.
pub const IV_SIGMA_MIN: f64 = 1e-8;
/// Upper end of the implied-volatility search bracket.
pub const IV_SIGMA_MAX: f64 = 5.0;
/// Price tolerance, relative to spot.
pub const IV_PRICE_TOL: f64 = 1e-10;
pub const IV_MAX_ITER: usize = 200;

/// Static no-arbitrage interval `(lower, upper)` for an option value.
pub fn no_arbitrage_bounds(mkt: &MarketContext, opt: &OptionSpec) -> (f64, f64) {
    let t = opt.maturity;
    let fwd_spot = (-mkt.rf * t).exp() * mkt.spot;
    let pv_strike = (-mkt.rd * t).exp() * opt.strike;
    match opt.side {
        Side::Call => ((fwd_spot - pv_strike).max(0.0), fwd_spot),
        Side::Put => ((pv_strike - fwd_spot).max(0.0), pv_strike),
    }
}

/// Volatility reproducing `price`.
///
/// Prices that the bracket `[IV_SIGMA_MIN, IV_SIGMA_MAX]` cannot reach are
/// reported as out of range: a price at or below the value at
/// `IV_SIGMA_MIN` breaches the lower bound (this is the cutoff for prices
/// within a hair of intrinsic), one at or above the value at `IV_SIGMA_MAX`
/// the upper.
pub fn implied_vol(mkt: &MarketContext, opt: &OptionSpec, price: f64) -> Result<f64> {
    mkt.validate()?;
    opt.validate()?;
    ensure_finite("price", price)?;
    let (lower, upper) = no_arbitrage_bounds(mkt, opt);
    if price <= lower {
        return Err(Error::OutOfRange {
            bound: Bound::Lower,
            price,
            limit: lower,
        });
    }
    if price >= upper {
        return Err(Error::OutOfRange {
            bound: Bound::Upper,
            price,
            limit: upper,
        });
    }
    let sqrt_t = opt.maturity.sqrt();
    let f = |sigma: f64| {
        price_total_vol(
            opt.side,
            mkt.spot,
            opt.strike,
            opt.maturity,
            mkt.rd,
            mkt.rf,
            sigma * sqrt_t,
        ) - price
    };
    let f_lo = f(IV_SIGMA_MIN);
    if f_lo >= 0.0 {
        return Err(Error::OutOfRange {
            bound: Bound::Lower,
            price,
            limit: f_lo + price,
        });
    }
    let f_hi = f(IV_SIGMA_MAX);
    if f_hi <= 0.0 {
        return Err(Error::OutOfRange {
            bound: Bound::Upper,
            price,
            limit: f_hi + price,
        });
    }
    let tol = IV_PRICE_TOL * mkt.spot;
    let opts = BrentOptions {
        f_tol: 1e-2 * tol,
        x_tol: 1e-15,
        max_iter: IV_MAX_ITER,
    };
    let sigma = brent(f, IV_SIGMA_MIN, IV_SIGMA_MAX, opts)?;
    let miss = f(sigma).abs();
    if miss > tol {
        return Err(Error::Convergence {
            what: format!("implied volatility: price miss {miss:e} exceeds {tol:e}"),
            iterations: IV_MAX_ITER,
        });
    }
    Ok(sigma)
}
