//! Discrete hedging of a written call along simulated paths.

use serde::{Deserialize, Serialize};

use crate::black_scholes::{bs_delta, MarketContext, OptionSpec, Side};
use crate::error::{Error, Result};
use crate::mv_hedge::{mv_ratio, value_delta, value_fn, DeltaEngine, Regime, RegimeState};
use crate::par::{map_indexed, Exec};
use crate::rs_model::RsParams;

use super::path::{simulate_indexed, RsPath};
use super::{Scenario, Strategy};

/// Holdings and values of one hedge along one path.
///
/// `eta1[i]` and `eta0[i]` are set at `t_i` (`i < n`): units of spot and the
/// bond account balance. `portfolio[i]` is the value carried into `t_i`
/// before rebalancing and `reference[i]` the model value `C(t_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeLedger {
    pub strategy: Strategy,
    pub times: Vec<f64>,
    pub spots: Vec<f64>,
    pub eta1: Vec<f64>,
    pub eta0: Vec<f64>,
    pub portfolio: Vec<f64>,
    pub reference: Vec<f64>,
    pub strike: f64,
}

impl HedgeLedger {
    /// Largest gap between the value before and after a rebalance, relative
    /// to the size of the positions (rounding scales with the legs, not with
    /// their possibly tiny net value).
    pub fn self_financing_gap(&self) -> f64 {
        (0..self.eta1.len())
            .map(|i| {
                let stock = self.eta1[i] * self.spots[i];
                let after = stock + self.eta0[i];
                let scale = self.portfolio[i]
                    .abs()
                    .max(stock.abs() + self.eta0[i].abs())
                    .max(f64::MIN_POSITIVE);
                (after - self.portfolio[i]).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    /// `|Portfolio(T) - C(T)| / K` in percent.
    pub fn terminal_error(&self) -> f64 {
        let n = self.portfolio.len() - 1;
        100.0 * ((self.portfolio[n] - self.reference[n]) / self.strike).abs()
    }

    /// Average of `|Portfolio(t_i) - C(t_i)| / K` over `i = 1..n`, in percent.
    pub fn mean_tracking_error(&self) -> f64 {
        let n = self.portfolio.len() - 1;
        let total: f64 = (1..=n)
            .map(|i| ((self.portfolio[i] - self.reference[i]) / self.strike).abs())
            .sum();
        100.0 * total / n as f64
    }

    pub fn report(&self, id: u64, scenario: impl Into<String>) -> HedgeReport {
        HedgeReport {
            id,
            scenario: scenario.into(),
            strategy: self.strategy,
            terminal_error: self.terminal_error(),
            mean_tracking_error: self.mean_tracking_error(),
        }
    }
}

/// Error metrics of one hedge, both in percent of the strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    /// Path index, or option index for historical runs.
    pub id: u64,
    pub scenario: String,
    pub strategy: Strategy,
    pub terminal_error: f64,
    pub mean_tracking_error: f64,
}

fn check_grid(path: &RsPath, mkt: &MarketContext, opt: &OptionSpec) -> Result<()> {
    opt.validate()?;
    if opt.side != Side::Call {
        return Err(Error::domain("the backtest hedges a written call"));
    }
    if path.times.len() < 2 {
        return Err(Error::domain("a path needs at least one step"));
    }
    let horizon = path.horizon();
    if (horizon - opt.maturity).abs() > 1e-12 * opt.maturity {
        return Err(Error::domain(format!(
            "path horizon {horizon} does not match the option maturity {}",
            opt.maturity
        )));
    }
    if (path.spots[0] - mkt.spot).abs() > 1e-12 * mkt.spot {
        return Err(Error::domain(format!(
            "path starts at {} but the market spot is {}",
            path.spots[0], mkt.spot
        )));
    }
    Ok(())
}

/// `C(t_i)` along the path: the regime-aware value before maturity and the
/// payoff at maturity.
fn reference_values(
    path: &RsPath,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
) -> Result<Vec<f64>> {
    let n = path.n_steps();
    (0..=n)
        .map(|i| {
            if i == n {
                Ok((path.spots[n] - opt.strike).max(0.0))
            } else {
                let state = RegimeState::new(path.regimes[i], path.times[i], path.spots[i])?;
                value_fn(&state, mkt, opt, params)
            }
        })
        .collect()
}

/// Units of spot held by `strategy` at `state`.
pub(crate) fn hedge_units(
    strategy: Strategy,
    state: &RegimeState,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
) -> Result<f64> {
    match strategy {
        Strategy::BsDelta => {
            let sigma = match state.regime {
                Regime::Pegged => params.sigma_low,
                Regime::Floating => params.sigma_high,
            };
            bs_delta(
                &mkt.with_spot(state.spot),
                &opt.with_maturity(opt.maturity - state.t),
                sigma,
            )
        }
        Strategy::RsDelta => value_delta(state, mkt, opt, params, DeltaEngine::Exact),
        Strategy::ApproxRsDelta => value_delta(state, mkt, opt, params, DeltaEngine::Approximate),
        Strategy::MvRs => {
            Ok(mv_ratio(state, mkt, opt, params, DeltaEngine::Exact)?.units(mkt, state.t))
        }
        Strategy::MvApprox => {
            Ok(mv_ratio(state, mkt, opt, params, DeltaEngine::Approximate)?.units(mkt, state.t))
        }
    }
}

/// Runs the self-financing recursion given the holdings rule `units(i)`:
/// start from `capital`, set `η¹(t_i) = units(i)`, put the rest in the bond
/// account, and carry `η¹ S(t_{i+1}) + η⁰ e^{(rd-rf) dt}` forward.
pub(crate) fn run_recursion<U>(
    strategy: Strategy,
    times: &[f64],
    spots: &[f64],
    reference: Vec<f64>,
    capital: f64,
    growth: impl Fn(usize) -> f64,
    strike: f64,
    mut units: U,
) -> Result<HedgeLedger>
where
    U: FnMut(usize) -> Result<f64>,
{
    let n = times.len() - 1;
    let mut eta1 = Vec::with_capacity(n);
    let mut eta0 = Vec::with_capacity(n);
    let mut portfolio = Vec::with_capacity(n + 1);
    portfolio.push(capital);
    for i in 0..n {
        let value = portfolio[i];
        let h = units(i)?;
        if !h.is_finite() {
            return Err(Error::Numerical {
                what: format!("{strategy} hedge ratio at t = {}", times[i]),
                estimate: h,
                error_bound: f64::INFINITY,
            });
        }
        let bond = value - h * spots[i];
        eta1.push(h);
        eta0.push(bond);
        portfolio.push(h * spots[i + 1] + bond * growth(i));
    }
    Ok(HedgeLedger {
        strategy,
        times: times.to_vec(),
        spots: spots.to_vec(),
        eta1,
        eta0,
        portfolio,
        reference,
        strike,
    })
}

fn ledger_with_reference(
    path: &RsPath,
    strategy: Strategy,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
    reference: Vec<f64>,
) -> Result<HedgeLedger> {
    // The hedger receives the regime-switching price.
    let capital = reference[0];
    let carry = mkt.rd - mkt.rf;
    run_recursion(
        strategy,
        &path.times,
        &path.spots,
        reference,
        capital,
        |i| (carry * (path.times[i + 1] - path.times[i])).exp(),
        opt.strike,
        |i| {
            let state = RegimeState::new(path.regimes[i], path.times[i], path.spots[i])?;
            hedge_units(strategy, &state, mkt, opt, params)
        },
    )
}

/// Full ledger of one strategy on one path.
pub fn backtest_ledger(
    path: &RsPath,
    strategy: Strategy,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
) -> Result<HedgeLedger> {
    check_grid(path, mkt, opt)?;
    params.validate()?;
    let reference = reference_values(path, mkt, opt, params)?;
    ledger_with_reference(path, strategy, mkt, opt, params, reference)
}

/// Terminal and mean tracking error of one strategy on one path.
pub fn backtest_hedge(
    path: &RsPath,
    strategy: Strategy,
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
) -> Result<HedgeReport> {
    Ok(backtest_ledger(path, strategy, mkt, opt, params)?.report(0, "path"))
}

/// Every strategy in `strategies` on one path, sharing the reference values.
pub fn backtest_path(
    path: &RsPath,
    strategies: &[Strategy],
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
) -> Result<Vec<HedgeLedger>> {
    check_grid(path, mkt, opt)?;
    params.validate()?;
    let reference = reference_values(path, mkt, opt, params)?;
    strategies
        .iter()
        .map(|&s| ledger_with_reference(path, s, mkt, opt, params, reference.clone()))
        .collect()
}

/// Settings of a simulated hedging experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mkt: MarketContext,
    pub strike: f64,
    pub maturity: f64,
    pub params: RsParams,
    pub n_steps: usize,
    pub scenario: Scenario,
    pub strategies: Vec<Strategy>,
    pub paths: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Half-year at-the-money call on a pegged spot, hedged daily.
    pub fn pegged_default(scenario: Scenario, paths: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            mkt: MarketContext::new(7.8, 0.01, 0.015)?,
            strike: 7.8,
            maturity: 0.5,
            params: RsParams::new(0.005, 0.10, 0.2, -0.01, 0.0)?,
            n_steps: 130,
            scenario,
            strategies: Strategy::ALL.to_vec(),
            paths,
            seed,
        })
    }
}

/// Reports for every (path, strategy) pair, ordered by path then strategy.
/// Path `i` is drawn from stream `i` of the seed, so all strategies see the
/// same paths.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<HedgeReport>> {
    let opt = OptionSpec::call(cfg.strike, cfg.maturity)?;
    if cfg.strategies.is_empty() {
        return Err(Error::domain("no strategies selected"));
    }
    if cfg.paths == 0 {
        return Err(Error::domain("at least one path is needed"));
    }
    let per_path = map_indexed(exec, cfg.paths, |i| -> Result<Vec<HedgeReport>> {
        let path = simulate_indexed(
            &cfg.mkt,
            &cfg.params,
            cfg.maturity,
            cfg.n_steps,
            cfg.scenario,
            cfg.seed,
            i as u64,
        )?;
        Ok(
            backtest_path(&path, &cfg.strategies, &cfg.mkt, &opt, &cfg.params)?
                .iter()
                .map(|l| l.report(i as u64, cfg.scenario.label()))
                .collect(),
        )
    });
    let mut out = Vec::with_capacity(cfg.paths * cfg.strategies.len());
    for r in per_path {
        out.extend(r?);
    }
    Ok(out)
}
