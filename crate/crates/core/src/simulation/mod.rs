//! Monte Carlo paths of the regime-switching spot and the hedging
//! backtests run on them.

mod backtest;
mod path;
mod real;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use backtest::{
    backtest_hedge, backtest_ledger, backtest_path, run_experiment, ExperimentConfig, HedgeLedger,
    HedgeReport,
};
pub use path::{
    mc_price, mc_terminal_mean, path_rng, sample_terminal, simulate_indexed, simulate_path,
    simulate_paths, McEstimate, RsPath,
};
pub use real::{backtest_real, hedge_written_call, RealBacktest, RealConfig, SurfaceStore};
pub use report::{
    experiment_stats, histogram, read_reports_csv, write_histograms_csv, write_reports_csv,
    write_summary_json, ErrorMetric, HistogramBin, StatsRow,
};

/// Conditioning of the switch time on the hedging horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Unconditional,
    NoJump,
    Jump,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Unconditional => "unconditional",
            Scenario::NoJump => "no-jump",
            Scenario::Jump => "jump",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "unconditional" => Ok(Scenario::Unconditional),
            "no-jump" | "nojump" => Ok(Scenario::NoJump),
            "jump" => Ok(Scenario::Jump),
            other => Err(Error::domain(format!(
                "unknown scenario {other:?} (expected unconditional, no-jump or jump)"
            ))),
        }
    }
}

/// Hedging strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Garman–Kohlhagen delta with the current regime's volatility.
    BsDelta,
    RsDelta,
    ApproxRsDelta,
    /// Mean-variance ratio built on the exact price and delta.
    MvRs,
    /// Mean-variance ratio built on the endpoint approximation.
    MvApprox,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::BsDelta,
        Strategy::RsDelta,
        Strategy::ApproxRsDelta,
        Strategy::MvRs,
        Strategy::MvApprox,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::BsDelta => "bs_delta",
            Strategy::RsDelta => "rs_delta",
            Strategy::ApproxRsDelta => "approx_rs_delta",
            Strategy::MvRs => "mv_rs",
            Strategy::MvApprox => "mv_approx",
        }
    }

    /// Parses a comma-separated list; `all` selects every strategy.
    pub fn parse_list(s: &str) -> Result<Vec<Strategy>, Error> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        let mut out: Vec<Strategy> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let st: Strategy = part.parse()?;
            if !out.contains(&st) {
                out.push(st);
            }
        }
        if out.is_empty() {
            return Err(Error::domain("empty strategy list"));
        }
        Ok(out)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.label() == key)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown strategy {s:?} (expected one of bs_delta, rs_delta, \
                     approx_rs_delta, mv_rs, mv_approx)"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for st in Strategy::ALL {
            assert_eq!(st.label().parse::<Strategy>().unwrap(), st);
        }
        for sc in [Scenario::Unconditional, Scenario::NoJump, Scenario::Jump] {
            assert_eq!(sc.label().parse::<Scenario>().unwrap(), sc);
        }
        assert_eq!(
            Strategy::parse_list("rs_delta, bs-delta,rs_delta").unwrap(),
            vec![Strategy::RsDelta, Strategy::BsDelta]
        );
        assert_eq!(Strategy::parse_list("all").unwrap().len(), 5);
        assert!(Strategy::parse_list("gamma").is_err());
        assert!("sideways".parse::<Scenario>().is_err());
    }
}
