//! Mean-variance hedge ratio and the regime-conditional value functions.
//!
//! `C(t, s, x)` is the call value at time `t` given spot `s` and regime
//! `x`; after the switch the spot is a plain geometric Brownian motion, so
//! `C(t, s, 1)` is a Garman–Kohlhagen price with `sigma_high`. Hedge ratios
//! are produced on the discounted basis `C̃ = e^{-(rd-rf)t} C`.

use serde::{Deserialize, Serialize};

use crate::black_scholes::{bs_delta, bs_price, MarketContext, OptionSpec, Side};
use crate::error::{ensure_finite, Error, Result};
use crate::numerics::quad::gauss_hermite_normal;
use crate::rs_model::{approx_delta, approx_price, rs_delta, rs_price, RsParams};

/// Regime indicator `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `α = 0`, before the switch.
    Pegged,
    /// `α = 1`, after the switch.
    Floating,
}

impl Regime {
    pub fn alpha(self) -> u8 {
        match self {
            Regime::Pegged => 0,
            Regime::Floating => 1,
        }
    }

    pub fn from_alpha(alpha: u8) -> Result<Self> {
        match alpha {
            0 => Ok(Regime::Pegged),
            1 => Ok(Regime::Floating),
            a => Err(Error::domain(format!(
                "regime indicator must be 0 or 1, got {a}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeState {
    pub regime: Regime,
    /// Current time, `0 <= t <= T`.
    pub t: f64,
    /// Pre-jump spot `S(t-)`.
    pub spot: f64,
}

impl RegimeState {
    pub fn new(regime: Regime, t: f64, spot: f64) -> Result<Self> {
        let s = Self { regime, t, spot };
        ensure_finite("t", t)?;
        ensure_finite("spot", spot)?;
        if t < 0.0 {
            return Err(Error::domain(format!("time must be non-negative, got {t}")));
        }
        if spot <= 0.0 {
            return Err(Error::domain(format!("spot must be positive, got {spot}")));
        }
        Ok(s)
    }

    fn check(&self, opt: &OptionSpec) -> Result<()> {
        Self::new(self.regime, self.t, self.spot)?;
        if self.t >= opt.maturity {
            return Err(Error::domain(format!(
                "time {} is not before maturity {}",
                self.t, opt.maturity
            )));
        }
        Ok(())
    }
}

/// Whether a ratio is expressed against the discounted spot
/// `S̃ = e^{-(rd-rf)t} S` or in plain spot units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscountBasis {
    Discounted,
    Undiscounted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeRatio {
    pub pi: f64,
    pub discount_basis: DiscountBasis,
}

impl HedgeRatio {
    /// Units of spot to hold at time `t`.
    pub fn units(&self, mkt: &MarketContext, t: f64) -> f64 {
        match self.discount_basis {
            DiscountBasis::Discounted => self.pi * ((mkt.rd - mkt.rf) * t).exp(),
            DiscountBasis::Undiscounted => self.pi,
        }
    }
}

/// Pricing engine used for the pre-switch value and its spot derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaEngine {
    /// Switch-time quadrature.
    Exact,
    /// Endpoint mixture of the two regimes.
    Approximate,
}

fn remaining(
    state: &RegimeState,
    mkt: &MarketContext,
    opt: &OptionSpec,
) -> Result<(MarketContext, OptionSpec)> {
    if opt.side != Side::Call {
        return Err(Error::domain("hedge ratios are implemented for calls only"));
    }
    state.check(opt)?;
    Ok((
        mkt.with_spot(state.spot),
        opt.with_maturity(opt.maturity - state.t),
    ))
}

/// `C(t, s, α)`: Garman–Kohlhagen with `sigma_high` after the switch, the
/// regime-switching price over the remaining maturity before it.
pub fn value_fn(
    state: &RegimeState,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
) -> Result<f64> {
    value_with(state, mkt, opt, params, DeltaEngine::Exact)
}

/// [`value_fn`] with a choice of pre-switch engine.
pub fn value_with(
    state: &RegimeState,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
    engine: DeltaEngine,
) -> Result<f64> {
    let (m, o) = remaining(state, mkt, opt)?;
    match (state.regime, engine) {
        (Regime::Floating, _) => bs_price(&m, &o, params.sigma_high),
        (Regime::Pegged, DeltaEngine::Exact) => rs_price(&m, &o, params),
        (Regime::Pegged, DeltaEngine::Approximate) => approx_price(&m, &o, params),
    }
}

/// Spot derivative of `C(t, s, α)` in plain spot units.
pub fn value_delta(
    state: &RegimeState,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
    engine: DeltaEngine,
) -> Result<f64> {
    let (m, o) = remaining(state, mkt, opt)?;
    match (state.regime, engine) {
        (Regime::Floating, _) => bs_delta(&m, &o, params.sigma_high),
        (Regime::Pegged, DeltaEngine::Exact) => rs_delta(&m, &o, params),
        (Regime::Pegged, DeltaEngine::Approximate) => approx_delta(&m, &o, params),
    }
}

/// Mean-variance hedge ratio on the discounted basis.
///
/// Before the switch the ratio mixes the diffusion delta with the value gap
/// across the switch, evaluated at the single post-jump spot
/// `S e^{u + δ²/2}`:
///
/// `π = [σ̲² ∂C̃/∂S + λ(e^u - 1)/S (C̃(S e^{u+δ²/2}, 1) - C̃(S, 0))] / [σ̲² + λκ²]`.
///
/// The approximate engine replaces both the delta and the pre-switch value
/// by the endpoint mixture.
pub fn mv_ratio(
    state: &RegimeState,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
    engine: DeltaEngine,
) -> Result<HedgeRatio> {
    params.validate()?;
    let disc = (-(mkt.rd - mkt.rf) * state.t).exp();
    let delta = value_delta(state, mkt, opt, params, engine)?;
    let pi = match state.regime {
        Regime::Floating => delta,
        Regime::Pegged => {
            let vl = params.sigma_low * params.sigma_low;
            let kappa = params.kappa();
            let lambda = params.lambda;
            if lambda == 0.0 {
                delta
            } else {
                let jumped = RegimeState {
                    regime: Regime::Floating,
                    spot: state.spot * (1.0 + kappa),
                    ..*state
                };
                let c1 = value_with(&jumped, mkt, opt, params, engine)?;
                let c0 = value_with(state, mkt, opt, params, engine)?;
                let gap = lambda * params.u.exp_m1() / state.spot * (c1 - c0);
                (vl * delta + gap) / (vl + lambda * kappa * kappa)
            }
        }
    };
    ensure_finite("hedge ratio", pi)?;
    Ok(HedgeRatio {
        pi: disc * pi,
        discount_basis: DiscountBasis::Discounted,
    })
}

/// Initial capital of the mean-variance strategy, the regime-switching price.
pub fn mv_initial_capital(mkt: &MarketContext, opt: &OptionSpec, params: &RsParams) -> Result<f64> {
    rs_price(mkt, opt, params)
}

/// Mean-variance ratio from the first-order condition with the jump law
/// integrated out (Gauss–Hermite over `Y ~ N(u, δ²)`):
///
/// `π = [σ̲² ∂C̃/∂S + (λ/S) E[(e^Y - 1)(C̃(S e^Y, 1) - C̃(S, 0))]] / [σ̲² + λ E[(e^Y - 1)²]]`.
///
/// Coincides with [`mv_ratio`] when `δ = 0`; reported next to it as a
/// diagnostic for `δ > 0`.
pub fn mv_ratio_jump_integral(
    state: &RegimeState,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
    engine: DeltaEngine,
    nodes: usize,
) -> Result<HedgeRatio> {
    if state.regime == Regime::Floating || params.lambda == 0.0 {
        return mv_ratio(state, mkt, opt, params, engine);
    }
    params.validate()?;
    let disc = (-(mkt.rd - mkt.rf) * state.t).exp();
    let delta = value_delta(state, mkt, opt, params, engine)?;
    let c0 = value_with(state, mkt, opt, params, engine)?;
    let (x, w) = gauss_hermite_normal(nodes.max(1));
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let y = params.u + params.delta * xi;
        let g = y.exp_m1();
        let jumped = RegimeState {
            regime: Regime::Floating,
            spot: state.spot * y.exp(),
            ..*state
        };
        let c1 = value_with(&jumped, mkt, opt, params, engine)?;
        num += wi * g * (c1 - c0);
        den += wi * g * g;
    }
    let vl = params.sigma_low * params.sigma_low;
    let lambda = params.lambda;
    let pi = (vl * delta + lambda / state.spot * num) / (vl + lambda * den);
    ensure_finite("hedge ratio", pi)?;
    Ok(HedgeRatio {
        pi: disc * pi,
        discount_basis: DiscountBasis::Discounted,
    })
}
