//! Single-maturity smile calibration of the regime-switching parameters,
//! tenor interpolation of pillar vols and the daily parameter surface.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{implied_vol, MarketContext, OptionSpec};
use crate::conventions::{
    atm_strike, pillar_vols, pillars_from_vols, quotes_from_vols, strike_from_delta,
    DeltaConvention, Pillar, QuoteRow, SmilePillars, Tenor,
};
use crate::error::{Error, Result};
use crate::fourier::{fourier_prices, FourierOptions};
use crate::numerics::lsq::{levenberg_marquardt, LsqOptions, LsqResult};
use crate::par::{map_indexed, Exec};
use crate::rs_model::{rs_implied_vol, rs_price, RsParams};
use crate::sabr::sabr_calibrate;

/// How model prices are computed inside the calibration loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PricingMethod {
    /// Switch-time quadrature, one integral per strike.
    Martingale,
    /// Contour integral of the characteristic function, shared by all
    /// strikes of the smile.
    Fourier,
}

impl std::str::FromStr for PricingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "martingale" => Ok(PricingMethod::Martingale),
            "fourier" => Ok(PricingMethod::Fourier),
            other => Err(Error::domain(format!("unknown pricer {other:?}"))),
        }
    }
}

impl std::fmt::Display for PricingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PricingMethod::Martingale => "martingale",
            PricingMethod::Fourier => "fourier",
        })
    }
}

/// Parameter box `[lower, upper]` for `(sigma_low, sigma_high, lambda, u, delta)`.
/// `sigma_high >= sigma_low` is enforced separately.
pub const LOWER: [f64; 5] = [1e-4, 1e-4, 0.0, -0.2, 0.0];
pub const UPPER: [f64; 5] = [0.05, 0.5, 5.0, 0.2, 0.1];

#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    pub pricer: PricingMethod,
    /// Free the jump dispersion; pinned to zero otherwise.
    pub free_delta: bool,
    pub lsq: LsqOptions,
    pub fourier: FourierOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            pricer: PricingMethod::Fourier,
            free_delta: false,
            lsq: LsqOptions {
                max_iter: 300,
                cost_rtol: 1e-8,
                cost_atol: 1e-22,
                fd_step: 1e-6,
                step_tol: 1e-8,
            },
            fourier: FourierOptions {
                price_tol: 1e-11,
                ..FourierOptions::default()
            },
        }
    }
}

impl CalibrationOptions {
    pub fn with_pricer(pricer: PricingMethod) -> Self {
        Self {
            pricer,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub theta_star: RsParams,
    /// Mean absolute relative vol error, percent.
    pub me: f64,
    /// Root mean square relative vol error, percent.
    pub rmse: f64,
    /// Model minus quoted vol per pillar, `10P..10C`.
    pub residuals: [f64; 5],
    pub model_vols: [f64; 5],
    pub iterations: usize,
    pub converged: bool,
    pub pricer_used: PricingMethod,
}

impl CalibrationResult {
    /// Relative vol errors in percent.
    pub fn relative_errors_pct(&self, quotes: &[f64; 5]) -> [f64; 5] {
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = self.residuals[i] / quotes[i] * 100.0;
        }
        out
    }
}

/// `(ME, RMSE)` in percent from model and quoted vols.
pub fn error_metrics(model: &[f64], quotes: &[f64]) -> (f64, f64) {
    let n = quotes.len() as f64;
    let rel: Vec<f64> = model.iter().zip(quotes).map(|(m, q)| (m - q) / q).collect();
    let me = rel.iter().map(|r| r.abs()).sum::<f64>() / n * 100.0;
    let rmse = (rel.iter().map(|r| r * r).sum::<f64>() / n).sqrt() * 100.0;
    (me, rmse)
}

/// Model implied vols at the given strikes.
pub fn model_vols(
    strikes: &[f64],
    mkt: &MarketContext,
    t: f64,
    params: &RsParams,
    pricer: PricingMethod,
    fourier: &FourierOptions,
) -> Result<Vec<f64>> {
    match pricer {
        PricingMethod::Martingale => strikes
            .iter()
            .map(|&k| rs_implied_vol(mkt, &OptionSpec::call(k, t)?, params))
            .collect(),
        PricingMethod::Fourier => {
            let prices = fourier_prices(mkt, strikes, t, params, fourier)?;
            strikes
                .iter()
                .zip(prices)
                .map(|(&k, p)| implied_vol(mkt, &OptionSpec::call(k, t)?, p))
                .collect()
        }
    }
}

fn theta_from(x: &[f64]) -> Result<RsParams> {
    if x[1] < x[0] {
        return Err(Error::domain("sigma_high below sigma_low"));
    }
    RsParams::from_slice(x)
}

/// Deterministic starting points, scaled by the quoted smile.
fn starts(vols: &[f64; 5], seed: Option<&RsParams>) -> Vec<[f64; 5]> {
    let lo_vol = vols.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_vol = vols.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    if let Some(s) = seed {
        out.push(s.as_array());
    }
    out.extend([
        [0.9 * lo_vol, 0.10, 0.2, -0.01, 0.0],
        [0.7 * lo_vol, (4.0 * hi_vol).max(0.05), 0.5, 0.0, 0.0],
        [lo_vol, 0.2, 0.05, 0.01, 0.0],
        [0.5 * lo_vol, 0.15, 1.0, -0.02, 0.0],
    ]);
    for s in &mut out {
        for i in 0..5 {
            s[i] = s[i].clamp(LOWER[i], UPPER[i]);
        }
        s[1] = s[1].max(s[0]);
    }
    out
}

/// Least-squares fit of the five pillar vols at one maturity.
///
/// Minimises the sum of squared absolute vol differences from several
/// deterministic starts and keeps the best. ME and RMSE are reported on
/// relative errors.
pub fn calibrate_single(
    pillars: &SmilePillars,
    mkt: &MarketContext,
    opts: &CalibrationOptions,
    seed_theta: Option<&RsParams>,
) -> Result<CalibrationResult> {
    pillars.validate()?;
    mkt.validate()?;
    let t = pillars.maturity;
    let quotes = pillars.vols();
    let strikes = pillars.strikes();
    if let Some(v) = quotes.iter().find(|&&v| v < LOWER[0]) {
        return Err(Error::Calibration {
            what: format!("pillar vol {v} lies below the sigma_low bound {}", LOWER[0]),
            best: Vec::new(),
            residual: f64::INFINITY,
        });
    }
    let mut hi = UPPER;
    if !opts.free_delta {
        hi[4] = 0.0;
    }
    let resid = |x: &[f64]| -> Result<Vec<f64>> {
        let theta = theta_from(x)?;
        let v = model_vols(&strikes, mkt, t, &theta, opts.pricer, &opts.fourier)?;
        Ok(v.iter().zip(&quotes).map(|(m, q)| m - q).collect())
    };

    let mut best: Option<LsqResult> = None;
    let mut iterations = 0;
    for x0 in starts(&quotes, seed_theta) {
        let Ok(r) = levenberg_marquardt(resid, &x0, &LOWER, &hi, opts.lsq) else {
            continue;
        };
        iterations += r.iterations;
        if best.as_ref().is_none_or(|b| r.cost < b.cost) {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::Calibration {
        what: format!("no start produced finite model vols at maturity {t}"),
        best: Vec::new(),
        residual: f64::INFINITY,
    })?;
    let theta_star = theta_from(&best.x)?;
    let mut residuals = [0.0; 5];
    let mut model = [0.0; 5];
    for i in 0..5 {
        residuals[i] = best.residuals[i];
        model[i] = quotes[i] + best.residuals[i];
    }
    let (me, rmse) = error_metrics(&model, &quotes);
    Ok(CalibrationResult {
        theta_star,
        me,
        rmse,
        residuals,
        model_vols: model,
        iterations,
        converged: best.converged,
        pricer_used: opts.pricer,
    })
}

/// Vol at maturity `t` with total variance linear in `t` between
/// `(t_near, q_near)` and `(t_far, q_far)`.
pub fn interpolate_quotes(q_near: f64, t_near: f64, q_far: f64, t_far: f64, t: f64) -> Result<f64> {
    if !(q_near > 0.0) || !(q_far > 0.0) {
        return Err(Error::domain("interpolated vols must be positive"));
    }
    if !(t_near > 0.0) || !(t_far >= t_near) {
        return Err(Error::domain(format!(
            "bad tenor bracket [{t_near}, {t_far}]"
        )));
    }
    if t < t_near || t > t_far {
        return Err(Error::domain(format!(
            "maturity {t} outside [{t_near}, {t_far}]"
        )));
    }
    if t_far == t_near {
        return Ok(q_near);
    }
    let num = t_far * (t - t_near) * q_far * q_far + t_near * (t_far - t) * q_near * q_near;
    Ok((num / (t * (t_far - t_near))).sqrt())
}

/// Grid step of the parameter surface, one business day.
pub const SURFACE_DT: f64 = 1.0 / 260.0;
/// Default number of grid maturities.
pub const SURFACE_POINTS: usize = 131;

/// Quotes of all tenors for one valuation date.
#[derive(Debug, Clone)]
pub struct QuoteDay {
    pub date: NaiveDate,
    /// Sorted by tenor.
    pub rows: Vec<QuoteRow>,
}

impl QuoteDay {
    pub fn new(date: NaiveDate, mut rows: Vec<QuoteRow>) -> Result<Self> {
        rows.sort_by_key(|r| r.tenor);
        for w in rows.windows(2) {
            if w[0].tenor == w[1].tenor {
                return Err(Error::data(format!(
                    "{date}: duplicate {} quote",
                    w[0].tenor
                )));
            }
        }
        for r in &rows {
            if r.date != date {
                return Err(Error::data(format!(
                    "quote for {} filed under {date}",
                    r.date
                )));
            }
            r.validate()?;
        }
        for tenor in [Tenor::D1, Tenor::W1, Tenor::M1, Tenor::M3, Tenor::M6] {
            if !rows.iter().any(|r| r.tenor == tenor) {
                return Err(Error::data(format!("{date}: missing {tenor} quote")));
            }
        }
        Ok(Self { date, rows })
    }

    fn row(&self, tenor: Tenor) -> Option<&QuoteRow> {
        self.rows.iter().find(|r| r.tenor == tenor)
    }

    /// Market data of the day; rates are taken from the shortest tenor.
    pub fn market(&self) -> Result<MarketContext> {
        self.rows[0].market()
    }

    /// Pillar vols at maturity `t`, interpolated in total variance between
    /// the bracketing tenors. Below 1D the 1D vols are used; beyond the
    /// last quoted tenor its vols are held flat.
    pub fn vols_at(&self, t: f64) -> Result<[f64; 5]> {
        let quoted: Vec<(f64, [f64; 5])> = self
            .rows
            .iter()
            .map(|r| Ok((r.maturity(), pillar_vols(r)?)))
            .collect::<Result<_>>()?;
        let (first, last) = (quoted[0], quoted[quoted.len() - 1]);
        if t <= first.0 {
            return Ok(first.1);
        }
        if t >= last.0 {
            return Ok(last.1);
        }
        let j = quoted.iter().position(|q| q.0 >= t).expect("bracketed");
        let (tn, vn) = quoted[j - 1];
        let (tf, vf) = quoted[j];
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = interpolate_quotes(vn[i], tn, vf[i], tf, t)?;
        }
        Ok(out)
    }

    /// Interpolated pillars with strikes under the maturity's convention.
    pub fn pillars_at(&self, t: f64) -> Result<SmilePillars> {
        let vols = self.vols_at(t)?;
        pillars_from_vols(&vols, &self.market()?, t, DeltaConvention::for_maturity(t))
    }

    pub fn has(&self, tenor: Tenor) -> bool {
        self.row(tenor).is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub t: f64,
    pub result: CalibrationResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceFailure {
    pub t: f64,
    pub error: String,
}

/// Calibrated parameters `θ*(t0, t)` on the maturity grid of one date.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSurface {
    pub date: NaiveDate,
    pub pricer: PricingMethod,
    pub dt: f64,
    pub points: Vec<SurfacePoint>,
    pub failures: Vec<SurfaceFailure>,
}

impl ParamSurface {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        !self.is_partial() && self.points.iter().all(|p| p.result.converged)
    }

    pub fn maturities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// Surface carrying the same `theta` at every grid maturity `k dt`,
    /// `k = 1..=n`, as if each calibration had fitted exactly.
    pub fn flat(
        date: NaiveDate,
        dt: f64,
        n: usize,
        theta: RsParams,
        pricer: PricingMethod,
    ) -> Self {
        let points = surface_grid(n, dt)
            .into_iter()
            .map(|t| SurfacePoint {
                t,
                result: CalibrationResult {
                    theta_star: theta,
                    me: 0.0,
                    rmse: 0.0,
                    residuals: [0.0; 5],
                    model_vols: [0.0; 5],
                    iterations: 0,
                    converged: true,
                    pricer_used: pricer,
                },
            })
            .collect();
        Self {
            date,
            pricer,
            dt,
            points,
            failures: Vec::new(),
        }
    }

    /// Parameters at maturity `t`: the grid point when `t` is on the grid
    /// (to within a millionth of a step), linear interpolation otherwise,
    /// and the nearest end beyond the grid.
    pub fn theta_at(&self, t: f64) -> Result<RsParams> {
        let pts = &self.points;
        if pts.is_empty() {
            return Err(Error::Gap(format!("{}: empty surface", self.date)));
        }
        if let Some(p) = pts.iter().find(|p| (p.t - t).abs() < 1e-6 * self.dt) {
            return Ok(p.result.theta_star);
        }
        if t <= pts[0].t {
            return Ok(pts[0].result.theta_star);
        }
        if t >= pts[pts.len() - 1].t {
            return Ok(pts[pts.len() - 1].result.theta_star);
        }
        let j = pts.iter().position(|p| p.t >= t).expect("bracketed");
        let (a, b) = (&pts[j - 1], &pts[j]);
        let w = (t - a.t) / (b.t - a.t);
        let xa = a.result.theta_star.as_array();
        let xb = b.result.theta_star.as_array();
        let mut x = [0.0; 5];
        for i in 0..5 {
            x[i] = (1.0 - w) * xa[i] + w * xb[i];
        }
        x[1] = x[1].max(x[0]);
        RsParams::from_slice(&x)
    }

    pub fn csv_path(dir: &Path, date: NaiveDate) -> PathBuf {
        dir.join(format!("surface_{date}.csv"))
    }

    pub fn json_path(dir: &Path, date: NaiveDate) -> PathBuf {
        dir.join(format!("surface_{date}.json"))
    }

    /// Writes `surface_<date>.csv` and its JSON sidecar into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(Self::csv_path(dir, self.date))?;
        w.write_record([
            "t",
            "theta_sigma_low",
            "theta_sigma_high",
            "lambda",
            "u",
            "delta",
            "me",
            "rmse",
        ])?;
        for p in &self.points {
            let th = p.result.theta_star;
            w.write_record(
                [
                    p.t,
                    th.sigma_low,
                    th.sigma_high,
                    th.lambda,
                    th.u,
                    th.delta,
                    p.result.me,
                    p.result.rmse,
                ]
                .map(|v| format!("{v:e}")),
            )?;
        }
        w.flush()?;
        let f = std::fs::File::create(Self::json_path(dir, self.date))?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    /// Reads the JSON sidecar written by [`ParamSurface::save`].
    pub fn load(dir: &Path, date: NaiveDate) -> Result<Self> {
        let path = Self::json_path(dir, date);
        let f = std::fs::File::open(&path)
            .map_err(|e| Error::Gap(format!("{date}: no surface at {} ({e})", path.display())))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

/// Grid maturities `k dt`, `k = 1..=n`.
pub fn surface_grid(n: usize, dt: f64) -> Vec<f64> {
    (1..=n).map(|k| k as f64 * dt).collect()
}

/// Calibrates every grid maturity of one quote day. Maturities are
/// independent and run on the worker pool; results are kept in grid order.
/// Each calibration is seeded with the parameters fitted to the nearest
/// quoted tenor, so the outcome does not depend on scheduling.
pub fn build_surface(
    day: &QuoteDay,
    grid: &[f64],
    opts: &CalibrationOptions,
    exec: Exec,
) -> Result<ParamSurface> {
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::domain("surface grid must be strictly increasing"));
        }
    }
    let mkt = day.market()?;
    let outcomes = map_indexed(exec, grid.len(), |i| {
        let t = grid[i];
        day.pillars_at(t)
            .and_then(|p| calibrate_single(&p, &mkt, opts, None))
    });
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (t, o) in grid.iter().zip(outcomes) {
        match o {
            Ok(result) => points.push(SurfacePoint { t: *t, result }),
            Err(e) => failures.push(SurfaceFailure {
                t: *t,
                error: e.to_string(),
            }),
        }
    }
    Ok(ParamSurface {
        date: day.date,
        pricer: opts.pricer,
        dt: grid.first().copied().unwrap_or(SURFACE_DT),
        points,
        failures,
    })
}

/// Regime-switching implied vol at the strike whose convention delta,
/// evaluated at that same vol, hits the pillar target.
fn self_consistent_pillar(
    pillar: Pillar,
    mkt: &MarketContext,
    t: f64,
    theta: &RsParams,
    convention: DeltaConvention,
) -> Result<(f64, f64)> {
    let mut vol = rs_implied_vol(mkt, &OptionSpec::call(mkt.forward(t), t)?, theta)?;
    for _ in 0..200 {
        let strike = match pillar.delta_target() {
            None => atm_strike(mkt, vol, t),
            Some((target, side)) => strike_from_delta(target, side, vol, mkt, t, convention)?,
        };
        let next = rs_implied_vol(mkt, &OptionSpec::call(strike, t)?, theta)?;
        if (next - vol).abs() <= 1e-15 + 1e-13 * vol {
            return Ok((strike, next));
        }
        vol = next;
    }
    Err(Error::Convergence {
        what: format!("self-consistent {} strike", pillar.label()),
        iterations: 200,
    })
}

/// Pillar vols generated by `theta` at maturity `t`: each is the model
/// implied vol at the strike its own delta convention assigns to it.
pub fn synthetic_pillar_vols(mkt: &MarketContext, t: f64, theta: &RsParams) -> Result<[f64; 5]> {
    theta.validate()?;
    let no_switch = theta.lambda == 0.0
        || (theta.sigma_high == theta.sigma_low && theta.u == 0.0 && theta.delta == 0.0);
    if no_switch {
        // Plain Garman–Kohlhagen: the smile is flat at sigma_low.
        return Ok([theta.sigma_low; 5]);
    }
    let conv = DeltaConvention::for_maturity(t);
    let mut vols = [0.0; 5];
    for (i, p) in Pillar::ALL.iter().enumerate() {
        vols[i] = self_consistent_pillar(*p, mkt, t, theta, conv)?.1;
    }
    Ok(vols)
}

/// One quote row per tenor whose pillars are model implied vols under
/// `theta`, re-expressed as ATM / RR / BF quotes.
pub fn synthetic_quote_day(
    date: NaiveDate,
    mkt: &MarketContext,
    theta: &RsParams,
    tenors: &[Tenor],
) -> Result<Vec<QuoteRow>> {
    tenors
        .iter()
        .map(|&tenor| {
            let vols = synthetic_pillar_vols(mkt, tenor.year_fraction(), theta)?;
            let (atm, rr25, bf25, rr10, bf10) = quotes_from_vols(&vols);
            let zero = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
            Ok(QuoteRow {
                date,
                spot: mkt.spot,
                rd: mkt.rd,
                rf: mkt.rf,
                atm,
                rr25: zero(rr25),
                bf25: zero(bf25),
                rr10: zero(rr10),
                bf10: zero(bf10),
                tenor,
            })
        })
        .collect()
}

/// RS and SABR fits of one smile, side by side.
#[derive(Debug, Clone, Serialize)]
pub struct SmileComparison {
    pub rs: CalibrationResult,
    pub sabr_me: f64,
    pub sabr_rmse: f64,
    pub sabr: crate::sabr::SabrFit,
}

/// Calibrates both models to the same pillars and scores them with the
/// same relative-error metrics.
pub fn compare_with_sabr(
    pillars: &SmilePillars,
    mkt: &MarketContext,
    opts: &CalibrationOptions,
) -> Result<SmileComparison> {
    let rs = calibrate_single(pillars, mkt, opts, None)?;
    let t = pillars.maturity;
    let fwd = mkt.forward(t);
    let sabr = sabr_calibrate(&pillars.pairs(), fwd, t)?;
    let quotes = pillars.vols();
    let model: Vec<f64> = quotes
        .iter()
        .zip(&sabr.residuals)
        .map(|(q, r)| q + r)
        .collect();
    let (sabr_me, sabr_rmse) = error_metrics(&model, &quotes);
    Ok(SmileComparison {
        rs,
        sabr_me,
        sabr_rmse,
        sabr,
    })
}

/// Model price used by the calibration pricers, exposed for benchmarking.
pub fn price_with(
    method: PricingMethod,
    mkt: &MarketContext,
    strike: f64,
    t: f64,
    params: &RsParams,
) -> Result<f64> {
    match method {
        PricingMethod::Martingale => rs_price(mkt, &OptionSpec::call(strike, t)?, params),
        PricingMethod::Fourier => {
            Ok(fourier_prices(mkt, &[strike], t, params, &FourierOptions::default())?[0])
        }
    }
}
