//! Hedging written calls on a quote history with daily recalibrated
//! parameter surfaces.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{bs_delta, MarketContext, OptionSpec};
use crate::calibration::{ParamSurface, SURFACE_DT};
use crate::conventions::{atm_strike, QuoteRow};
use crate::error::{Error, Result};
use crate::mv_hedge::{mv_ratio, DeltaEngine, Regime, RegimeState};
use crate::par::{map_slice, Exec};
use crate::rs_model::{approx_delta, rs_delta, rs_implied_vol, rs_price, RsParams};

use super::backtest::{run_recursion, HedgeLedger, HedgeReport};
use super::Strategy;

/// Parameter surfaces by calibration date.
#[derive(Debug, Clone, Default)]
pub struct SurfaceStore {
    surfaces: BTreeMap<NaiveDate, ParamSurface>,
}

impl SurfaceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: ParamSurface) {
        self.surfaces.insert(surface.date, surface);
    }

    pub fn get(&self, date: NaiveDate) -> Result<&ParamSurface> {
        self.surfaces
            .get(&date)
            .ok_or_else(|| Error::Gap(format!("{date}: no parameter surface")))
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Loads `surface_<date>.json` from `dir` for each date.
    pub fn load_dir(dir: &Path, dates: impl IntoIterator<Item = NaiveDate>) -> Result<Self> {
        let mut store = Self::new();
        for d in dates {
            store.insert(ParamSurface::load(dir, d)?);
        }
        Ok(store)
    }
}

impl FromIterator<ParamSurface> for SurfaceStore {
    fn from_iter<I: IntoIterator<Item = ParamSurface>>(iter: I) -> Self {
        let mut store = Self::new();
        for s in iter {
            store.insert(s);
        }
        store
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealConfig {
    /// Rebalances per option; the option matures after this many steps.
    pub horizon_steps: usize,
    pub dt: f64,
    pub strategies: Vec<Strategy>,
}

impl Default for RealConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 130,
            dt: SURFACE_DT,
            strategies: vec![
                Strategy::BsDelta,
                Strategy::RsDelta,
                Strategy::ApproxRsDelta,
            ],
        }
    }
}

/// Reports of every written call, ordered by start date then strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealBacktest {
    pub reports: Vec<HedgeReport>,
}

/// Hedge of the at-the-money call written on `history[start]`. The history
/// rows are the quotes of the option's tenor and also serve as the
/// rebalancing calendar: step `m` is `history[start + m]`.
pub fn hedge_written_call(
    history: &[QuoteRow],
    start: usize,
    surfaces: &SurfaceStore,
    cfg: &RealConfig,
    strategy: Strategy,
) -> Result<HedgeLedger> {
    let n = cfg.horizon_steps;
    if n == 0 {
        return Err(Error::domain("the hedge horizon needs at least one step"));
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::domain("the rebalancing step must be positive"));
    }
    let first = history
        .get(start)
        .ok_or_else(|| Error::domain(format!("start index {start} is outside the history")))?;
    if start + n >= history.len() {
        return Err(Error::Gap(format!(
            "{}: the call needs {n} rebalance dates after it but the history ends at {}",
            first.date,
            history[history.len() - 1].date
        )));
    }
    let rows = &history[start..=start + n];
    for w in rows.windows(2) {
        if w[1].date <= w[0].date {
            return Err(Error::data(format!(
                "history dates must increase: {} follows {}",
                w[1].date, w[0].date
            )));
        }
    }
    let maturity = n as f64 * cfg.dt;
    let mkts: Vec<MarketContext> = rows.iter().map(QuoteRow::market).collect::<Result<_>>()?;
    let strike = atm_strike(&mkts[0], first.atm, maturity);

    // Day-m parameters at the remaining maturity.
    let mut thetas: Vec<RsParams> = Vec::with_capacity(n);
    for (m, row) in rows[..n].iter().enumerate() {
        let remaining = maturity - m as f64 * cfg.dt;
        thetas.push(surfaces.get(row.date)?.theta_at(remaining)?);
    }
    let option = |m: usize| OptionSpec::call(strike, maturity - m as f64 * cfg.dt);

    let mut reference = Vec::with_capacity(n + 1);
    for m in 0..n {
        reference.push(rs_price(&mkts[m], &option(m)?, &thetas[m])?);
    }
    reference.push((rows[n].spot - strike).max(0.0));
    let capital = reference[0];
    let times: Vec<f64> = (0..=n).map(|m| m as f64 * cfg.dt).collect();
    let spots: Vec<f64> = rows.iter().map(|r| r.spot).collect();

    run_recursion(
        strategy,
        &times,
        &spots,
        reference,
        capital,
        |m| ((mkts[m].rd - mkts[m].rf) * cfg.dt).exp(),
        strike,
        |m| {
            let (mkt, opt, theta) = (&mkts[m], option(m)?, &thetas[m]);
            match strategy {
                Strategy::BsDelta => {
                    let sigma = rs_implied_vol(mkt, &opt, theta)?;
                    bs_delta(mkt, &opt, sigma)
                }
                Strategy::RsDelta => rs_delta(mkt, &opt, theta),
                Strategy::ApproxRsDelta => approx_delta(mkt, &opt, theta),
                Strategy::MvRs | Strategy::MvApprox => {
                    let engine = if strategy == Strategy::MvRs {
                        DeltaEngine::Exact
                    } else {
                        DeltaEngine::Approximate
                    };
                    let state = RegimeState::new(Regime::Pegged, 0.0, mkt.spot)?;
                    Ok(mv_ratio(&state, mkt, &opt, theta, engine)?.units(mkt, 0.0))
                }
            }
        },
    )
}

/// Writes and hedges one call per start date with every configured strategy.
pub fn backtest_real(
    history: &[QuoteRow],
    surfaces: &SurfaceStore,
    starts: &[NaiveDate],
    cfg: &RealConfig,
    exec: Exec,
) -> Result<RealBacktest> {
    if cfg.strategies.is_empty() {
        return Err(Error::domain("no strategies selected"));
    }
    let mut indices = Vec::with_capacity(starts.len());
    for d in starts {
        let i = history
            .iter()
            .position(|r| r.date == *d)
            .ok_or_else(|| Error::Gap(format!("{d}: no quote for the start date")))?;
        indices.push(i);
    }
    let per_option = map_slice(exec, &indices, |&i| -> Result<Vec<HedgeReport>> {
        cfg.strategies
            .iter()
            .map(|&s| {
                let ledger = hedge_written_call(history, i, surfaces, cfg, s)?;
                Ok(ledger.report(i as u64, history[i].date.to_string()))
            })
            .collect()
    });
    let mut reports = Vec::new();
    for r in per_option {
        reports.extend(r?);
    }
    Ok(RealBacktest { reports })
}
