//! FX smile quoting: ATM / risk-reversal / butterfly decomposition into five
//! pillar vols and recovery of pillar strikes under premium-adjusted delta
//! conventions.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{MarketContext, Side};
use crate::error::{Error, Result};
use crate::numerics::normal::cdf;
use crate::numerics::roots::{brent, BrentOptions};

/// Quoted tenors and their fixed year fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tenor {
    #[serde(rename = "1D")]
    D1,
    #[serde(rename = "1W")]
    W1,
    #[serde(rename = "1M")]
    M1,
    #[serde(rename = "3M")]
    M3,
    #[serde(rename = "6M")]
    M6,
    #[serde(rename = "1Y")]
    Y1,
}

impl Tenor {
    pub const ALL: [Tenor; 6] = [
        Tenor::D1,
        Tenor::W1,
        Tenor::M1,
        Tenor::M3,
        Tenor::M6,
        Tenor::Y1,
    ];

    pub fn year_fraction(self) -> f64 {
        match self {
            Tenor::D1 => 1.0 / 260.0,
            Tenor::W1 => 1.0 / 52.0,
            Tenor::M1 => 1.0 / 12.0,
            Tenor::M3 => 0.25,
            Tenor::M6 => 0.5,
            Tenor::Y1 => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Tenor::D1 => "1D",
            Tenor::W1 => "1W",
            Tenor::M1 => "1M",
            Tenor::M3 => "3M",
            Tenor::M6 => "6M",
            Tenor::Y1 => "1Y",
        }
    }

    pub fn convention(self) -> DeltaConvention {
        match self {
            Tenor::Y1 => DeltaConvention::ForwardPremiumAdjusted,
            _ => DeltaConvention::SpotPremiumAdjusted,
        }
    }
}

impl fmt::Display for Tenor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Tenor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tenor::ALL
            .into_iter()
            .find(|t| t.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Convention(format!("unknown tenor {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaConvention {
    SpotPremiumAdjusted,
    ForwardPremiumAdjusted,
}

impl DeltaConvention {
    /// Spot premium-adjusted up to six months, forward premium-adjusted
    /// beyond.
    pub fn for_maturity(t: f64) -> Self {
        if t <= Tenor::M6.year_fraction() + 1e-12 {
            DeltaConvention::SpotPremiumAdjusted
        } else {
            DeltaConvention::ForwardPremiumAdjusted
        }
    }
}

/// One day of quotes for one tenor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteRow {
    pub date: NaiveDate,
    pub spot: f64,
    pub rd: f64,
    pub rf: f64,
    pub atm: f64,
    pub rr25: f64,
    pub bf25: f64,
    pub rr10: f64,
    pub bf10: f64,
    pub tenor: Tenor,
}

impl QuoteRow {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("spot", self.spot),
            ("rd", self.rd),
            ("rf", self.rf),
            ("atm", self.atm),
            ("rr25", self.rr25),
            ("bf25", self.bf25),
            ("rr10", self.rr10),
            ("bf10", self.bf10),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "{} {}: {name} is not finite",
                    self.date, self.tenor
                )));
            }
        }
        if self.spot <= 0.0 {
            return Err(Error::data(format!(
                "{} {}: spot must be positive",
                self.date, self.tenor
            )));
        }
        if self.atm <= 0.0 {
            return Err(Error::data(format!(
                "{} {}: atm vol must be positive",
                self.date, self.tenor
            )));
        }
        Ok(())
    }

    pub fn market(&self) -> Result<MarketContext> {
        MarketContext::new(self.spot, self.rd, self.rf)
    }

    pub fn maturity(&self) -> f64 {
        self.tenor.year_fraction()
    }
}

/// The five smile pillars in strike order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pillar {
    P10,
    P25,
    Atm,
    C25,
    C10,
}

impl Pillar {
    pub const ALL: [Pillar; 5] = [
        Pillar::P10,
        Pillar::P25,
        Pillar::Atm,
        Pillar::C25,
        Pillar::C10,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Pillar::P10 => "10P",
            Pillar::P25 => "25P",
            Pillar::Atm => "ATM",
            Pillar::C25 => "25C",
            Pillar::C10 => "10C",
        }
    }

    /// Absolute delta target and option side; `None` for ATM, whose strike
    /// comes from the delta-neutral straddle.
    pub fn delta_target(self) -> Option<(f64, Side)> {
        match self {
            Pillar::P10 => Some((0.10, Side::Put)),
            Pillar::P25 => Some((0.25, Side::Put)),
            Pillar::Atm => None,
            Pillar::C25 => Some((0.25, Side::Call)),
            Pillar::C10 => Some((0.10, Side::Call)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillarPoint {
    pub pillar: Pillar,
    pub side: Side,
    /// Absolute delta target; 0.5 is recorded for ATM.
    pub delta_target: f64,
    pub vol: f64,
    pub strike: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmilePillars {
    pub points: [PillarPoint; 5],
    pub maturity: f64,
    pub convention: DeltaConvention,
}

impl SmilePillars {
    pub fn strikes(&self) -> [f64; 5] {
        self.points.map(|p| p.strike)
    }

    pub fn vols(&self) -> [f64; 5] {
        self.points.map(|p| p.vol)
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.strike, p.vol)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if !(p.vol > 0.0) || !(p.strike > 0.0) {
                return Err(Error::data(format!(
                    "pillar {} has non-positive vol or strike",
                    p.pillar.label()
                )));
            }
        }
        for w in self.points.windows(2) {
            if w[1].strike <= w[0].strike {
                return Err(Error::data(format!(
                    "pillar strikes out of order: {} {} >= {} {}",
                    w[0].pillar.label(),
                    w[0].strike,
                    w[1].pillar.label(),
                    w[1].strike
                )));
            }
        }
        Ok(())
    }
}

/// `[σ10P, σ25P, σATM, σ25C, σ10C]` from smile-strangle quotes.
pub fn pillar_vols(row: &QuoteRow) -> Result<[f64; 5]> {
    row.validate()?;
    let vols = [
        row.atm + row.bf10 - 0.5 * row.rr10,
        row.atm + row.bf25 - 0.5 * row.rr25,
        row.atm,
        row.atm + row.bf25 + 0.5 * row.rr25,
        row.atm + row.bf10 + 0.5 * row.rr10,
    ];
    for (p, v) in Pillar::ALL.iter().zip(vols) {
        if !(v > 0.0) {
            return Err(Error::data(format!(
                "{} {}: pillar {} vol {v} is not positive",
                row.date,
                row.tenor,
                p.label()
            )));
        }
    }
    Ok(vols)
}

/// Inverse of [`pillar_vols`]: `(atm, rr25, bf25, rr10, bf10)`.
pub fn quotes_from_vols(vols: &[f64; 5]) -> (f64, f64, f64, f64, f64) {
    let [p10, p25, atm, c25, c10] = *vols;
    (
        atm,
        c25 - p25,
        0.5 * (c25 + p25) - atm,
        c10 - p10,
        0.5 * (c10 + p10) - atm,
    )
}

fn d_minus(forward: f64, strike: f64, vol: f64, t: f64) -> f64 {
    let w = vol * t.sqrt();
    (forward / strike).ln() / w - 0.5 * w
}

/// Premium-adjusted delta (signed: negative for puts).
pub fn premium_adjusted_delta(
    strike: f64,
    side: Side,
    vol: f64,
    mkt: &MarketContext,
    t: f64,
    convention: DeltaConvention,
) -> f64 {
    let f = mkt.forward(t);
    let dm = d_minus(f, strike, vol, t);
    let omega = side.omega();
    let n = cdf(omega * dm);
    let scale = match convention {
        DeltaConvention::SpotPremiumAdjusted => strike / mkt.spot * (-mkt.rd * t).exp(),
        DeltaConvention::ForwardPremiumAdjusted => strike / f,
    };
    omega * scale * n
}

/// Strike of the delta-neutral straddle under premium adjustment,
/// `F e^{-σ²T/2}`.
pub fn atm_strike(mkt: &MarketContext, vol: f64, t: f64) -> f64 {
    mkt.forward(t) * (-0.5 * vol * vol * t).exp()
}

fn root_opts() -> BrentOptions {
    BrentOptions {
        f_tol: 0.0,
        x_tol: 1e-15,
        max_iter: 300,
    }
}

/// Strike whose premium-adjusted delta equals `target` (given as an
/// absolute value for both sides).
///
/// Put deltas are monotone in the strike. Call deltas are not; the root on
/// the right-hand branch, in `[K_ATM, K_ATM e^{10σ√T}]`, is returned.
pub fn strike_from_delta(
    target: f64,
    side: Side,
    vol: f64,
    mkt: &MarketContext,
    t: f64,
    convention: DeltaConvention,
) -> Result<f64> {
    mkt.validate()?;
    if !(vol > 0.0) || !vol.is_finite() {
        return Err(Error::domain(format!("vol must be positive, got {vol}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("maturity must be positive, got {t}")));
    }
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::domain(format!(
            "delta target must be positive, got {target}"
        )));
    }
    let k_atm = atm_strike(mkt, vol, t);
    let w = vol * t.sqrt();
    let omega = side.omega();
    let g = |x: f64| {
        premium_adjusted_delta(k_atm * x.exp(), side, vol, mkt, t, convention) * omega - target
    };
    let (lo, hi) = match side {
        Side::Call => (0.0, 10.0 * w),
        Side::Put => {
            // Put delta grows without bound in the strike; walk right until
            // the target is bracketed.
            let mut hi = 0.0;
            let mut steps = 0;
            while g(hi) < 0.0 {
                hi += w;
                steps += 1;
                if steps > 200 {
                    return Err(Error::Convention(format!(
                        "no put strike reaches premium-adjusted delta {target}"
                    )));
                }
            }
            (-40.0 * w, hi)
        }
    };
    let (glo, ghi) = (g(lo), g(hi));
    if glo.signum() == ghi.signum() && glo != 0.0 && ghi != 0.0 {
        return Err(Error::Convention(format!(
            "premium-adjusted {side:?} delta {target} has no root on the search branch \
             (delta ranges {:.6}..{:.6})",
            glo + target,
            ghi + target
        )));
    }
    let x = brent(g, lo, hi, root_opts()).map_err(|e| match e {
        Error::Domain(m) | Error::Convention(m) => Error::Convention(m),
        other => other,
    })?;
    Ok(k_atm * x.exp())
}

/// Five pillars for given vols at maturity `t`.
pub fn pillars_from_vols(
    vols: &[f64; 5],
    mkt: &MarketContext,
    t: f64,
    convention: DeltaConvention,
) -> Result<SmilePillars> {
    let mut points = Vec::with_capacity(5);
    for (pillar, &vol) in Pillar::ALL.iter().zip(vols) {
        if !(vol > 0.0) {
            return Err(Error::data(format!(
                "pillar {} vol {vol} is not positive",
                pillar.label()
            )));
        }
        let point = match pillar.delta_target() {
            None => PillarPoint {
                pillar: *pillar,
                side: Side::Call,
                delta_target: 0.5,
                vol,
                strike: atm_strike(mkt, vol, t),
            },
            Some((target, side)) => PillarPoint {
                pillar: *pillar,
                side,
                delta_target: target,
                vol,
                strike: strike_from_delta(target, side, vol, mkt, t, convention)?,
            },
        };
        points.push(point);
    }
    let smile = SmilePillars {
        points: points.try_into().expect("five pillars"),
        maturity: t,
        convention,
    };
    smile.validate()?;
    Ok(smile)
}

/// Pillar vols and strikes for a quote row under its tenor's convention.
pub fn build_pillars(row: &QuoteRow) -> Result<SmilePillars> {
    let vols = pillar_vols(row)?;
    pillars_from_vols(
        &vols,
        &row.market()?,
        row.maturity(),
        row.tenor.convention(),
    )
}

/// CSV header of quote files.
pub const QUOTE_HEADER: [&str; 9] = [
    "date", "spot", "rd", "rf", "atm", "rr25", "bf25", "rr10", "bf10",
];

#[derive(Debug, Serialize, Deserialize)]
struct QuoteRecord {
    date: NaiveDate,
    spot: f64,
    rd: f64,
    rf: f64,
    atm: f64,
    rr25: f64,
    bf25: f64,
    rr10: f64,
    bf10: f64,
}

/// Read one tenor's quote file. Rows are validated and errors name the
/// 1-based data row.
pub fn read_quotes(path: &Path, tenor: Tenor) -> Result<Vec<QuoteRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != QUOTE_HEADER {
        return Err(Error::data(format!(
            "{}: expected header {}, found {}",
            path.display(),
            QUOTE_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<QuoteRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("{} row {}: {e}", path.display(), i + 1)))?;
        let row = QuoteRow {
            date: rec.date,
            spot: rec.spot,
            rd: rec.rd,
            rf: rec.rf,
            atm: rec.atm,
            rr25: rec.rr25,
            bf25: rec.bf25,
            rr10: rec.rr10,
            bf10: rec.bf10,
            tenor,
        };
        row.validate()
            .and_then(|_| pillar_vols(&row).map(|_| ()))
            .map_err(|e| Error::data(format!("{} row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_quotes(path: &Path, rows: &[QuoteRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(QuoteRecord {
            date: r.date,
            spot: r.spot,
            rd: r.rd,
            rf: r.rf,
            atm: r.atm,
            rr25: r.rr25,
            bf25: r.bf25,
            rr10: r.rr10,
            bf10: r.bf10,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// File name used for a tenor inside a quote directory, e.g. `quotes_1M.csv`.
pub fn quote_file_name(tenor: Tenor) -> String {
    format!("quotes_{}.csv", tenor.label())
}
