use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::{Datelike, NaiveDate, Weekday};
use serde_json::json;

use pegfx::black_scholes::bs_price;
use pegfx::calibration::{
    build_surface, calibrate_single, compare_with_sabr, surface_grid, synthetic_quote_day,
    CalibrationOptions, PricingMethod, QuoteDay, SURFACE_DT,
};
use pegfx::conventions::{
    build_pillars, quote_file_name, read_quotes, write_quotes, QuoteRow, Tenor,
};
use pegfx::fourier::fourier_price;
use pegfx::mv_hedge::{mv_ratio, DeltaEngine, Regime, RegimeState};
use pegfx::par::Exec;
use pegfx::rs_model::{
    approx_delta, approx_error_bound, approx_error_grid, approx_price, rs_delta, rs_implied_vol,
    rs_price,
};
use pegfx::simulation::{
    backtest_real, experiment_stats, run_experiment, simulate_path, write_histograms_csv,
    write_reports_csv, write_summary_json, ExperimentConfig, HedgeReport, RealConfig, StatsRow,
    SurfaceStore,
};
use pegfx::{MarketContext, OptionSpec, RsParams};

use crate::{
    BenchArgs, CalibrateArgs, CliError, CliResult, GenArgs, HedgeArgs, MarketArgs, PriceArgs,
    SimulateArgs, SurfaceArgs,
};

fn market(a: &MarketArgs) -> CliResult<MarketContext> {
    Ok(MarketContext::new(a.spot, a.rd, a.rf)?)
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(pegfx::Error::from)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn price(a: PriceArgs) -> CliResult<()> {
    let mkt = market(&a.market)?;
    let opt = OptionSpec::call(a.strike, a.maturity)?;
    let p = a.theta.theta;
    let exact = rs_price(&mkt, &opt, &p)?;
    let fourier = fourier_price(&mkt, &opt, &p)?;
    let approx = approx_price(&mkt, &opt, &p)?;
    let delta = rs_delta(&mkt, &opt, &p)?;
    let delta_approx = approx_delta(&mkt, &opt, &p)?;
    let bound = approx_error_bound(&mkt, &opt, &p)?;
    let iv = rs_implied_vol(&mkt, &opt, &p)?;
    let bs_low = bs_price(&mkt, &opt, p.sigma_low)?;
    let diag = approx_error_grid(&mkt, &opt, &p, &[mkt.spot])?[0];

    println!(
        "call K={} T={} S0={} rd={} rf={}",
        a.strike, a.maturity, mkt.spot, mkt.rd, mkt.rf
    );
    println!(
        "theta: sigma_low={} sigma_high={} lambda={} u={} delta={}",
        p.sigma_low, p.sigma_high, p.lambda, p.u, p.delta
    );
    println!("{:<24}{:>18}", "exact price", format!("{exact:.10}"));
    println!("{:<24}{:>18}", "fourier price", format!("{fourier:.10}"));
    println!("{:<24}{:>18}", "approx price", format!("{approx:.10}"));
    println!(
        "{:<24}{:>18}",
        "GK price at sigma_low",
        format!("{bs_low:.10}")
    );
    println!("{:<24}{:>18}", "implied vol", format!("{iv:.8}"));
    println!("{:<24}{:>18}", "exact delta", format!("{delta:.10}"));
    println!(
        "{:<24}{:>18}",
        "approx delta",
        format!("{delta_approx:.10}")
    );
    println!(
        "{:<24}{:>18}",
        "|exact-approx|/S0",
        format!("{:.3e}", diag.spot_adjusted_error)
    );
    println!("{:<24}{:>18}", "error bound", format!("{bound:.3e}"));
    println!(
        "{:<24}{:>18}",
        "price rel err %",
        format!("{:.3e}", diag.price_rel_err_pct)
    );
    println!(
        "{:<24}{:>18}",
        "delta rel err %",
        format!("{:.3e}", diag.delta_rel_err_pct)
    );

    if let Some(dir) = a.out {
        fs::create_dir_all(&dir)?;
        write_json(
            &dir.join("price.json"),
            &json!({
                "spot": mkt.spot, "rd": mkt.rd, "rf": mkt.rf,
                "strike": a.strike, "maturity": a.maturity, "theta": p,
                "exact_price": exact, "fourier_price": fourier, "approx_price": approx,
                "gk_price_sigma_low": bs_low, "implied_vol": iv,
                "exact_delta": delta, "approx_delta": delta_approx,
                "spot_adjusted_error": diag.spot_adjusted_error, "error_bound": bound,
                "weak_error_bound": diag.weak_bound,
                "price_rel_err_pct": diag.price_rel_err_pct,
                "delta_rel_err_pct": diag.delta_rel_err_pct,
            }),
        )?;
    }
    Ok(())
}

/// Every tenor file present in `dir`, rows grouped by date.
fn load_quotes(dir: &Path) -> CliResult<BTreeMap<NaiveDate, Vec<QuoteRow>>> {
    let mut by_date: BTreeMap<NaiveDate, Vec<QuoteRow>> = BTreeMap::new();
    let mut found = false;
    for tenor in Tenor::ALL {
        let path = dir.join(quote_file_name(tenor));
        if !path.exists() {
            continue;
        }
        found = true;
        for row in read_quotes(&path, tenor)? {
            by_date.entry(row.date).or_default().push(row);
        }
    }
    if !found {
        return Err(pegfx::Error::Data(format!("{}: no quote files", dir.display())).into());
    }
    Ok(by_date)
}

fn options(pricer: PricingMethod, max_iter: Option<usize>) -> CalibrationOptions {
    let mut o = CalibrationOptions::with_pricer(pricer);
    if let Some(n) = max_iter {
        o.lsq.max_iter = n;
    }
    o
}

pub fn calibrate(a: CalibrateArgs) -> CliResult<()> {
    let quotes = load_quotes(&a.quotes)?;
    let date = match a.date {
        Some(d) => d,
        None => *quotes.keys().next().expect("non-empty"),
    };
    let rows = quotes
        .get(&date)
        .ok_or_else(|| pegfx::Error::Gap(format!("{date}: no quotes")))?;
    let mut opts = options(a.pricer, a.max_iter);
    opts.free_delta = a.free_delta;

    let mut header = vec![
        "date",
        "tenor",
        "t",
        "sigma_low",
        "sigma_high",
        "lambda",
        "u",
        "delta",
        "me_pct",
        "rmse_pct",
        "converged",
    ];
    if a.sabr {
        header.extend(["sabr_me_pct", "sabr_rmse_pct"]);
    }
    let mut table = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    println!("{date} pricer={}", a.pricer);
    println!(
        "{:<6}{:>12}{:>12}{:>10}{:>10}{:>10}{:>12}{:>12}{}",
        "tenor",
        "sigma_low",
        "sigma_high",
        "lambda",
        "u",
        "delta",
        "ME %",
        "RMSE %",
        if a.sabr {
            format!("{:>14}{:>14}", "SABR ME %", "SABR RMSE %")
        } else {
            String::new()
        }
    );
    for row in rows {
        let pillars = build_pillars(row)?;
        let mkt = row.market()?;
        let (rs, sabr) = if a.sabr {
            let cmp = compare_with_sabr(&pillars, &mkt, &opts)?;
            (cmp.rs, Some((cmp.sabr_me, cmp.sabr_rmse)))
        } else {
            (calibrate_single(&pillars, &mkt, &opts, None)?, None)
        };
        let th = rs.theta_star;
        println!(
            "{:<6}{:>12.6}{:>12.6}{:>10.4}{:>10.5}{:>10.5}{:>12.3e}{:>12.3e}{}",
            row.tenor.label(),
            th.sigma_low,
            th.sigma_high,
            th.lambda,
            th.u,
            th.delta,
            rs.me,
            rs.rmse,
            sabr.map_or(String::new(), |(m, r)| format!("{m:>14.3e}{r:>14.3e}"))
        );
        let mut rec = vec![
            date.to_string(),
            row.tenor.label().to_string(),
            row.maturity().to_string(),
            th.sigma_low.to_string(),
            th.sigma_high.to_string(),
            th.lambda.to_string(),
            th.u.to_string(),
            th.delta.to_string(),
            rs.me.to_string(),
            rs.rmse.to_string(),
            rs.converged.to_string(),
        ];
        if let Some((m, r)) = sabr {
            rec.extend([m.to_string(), r.to_string()]);
        }
        table.push(rec);
    }
    if let Some(dir) = a.out {
        fs::create_dir_all(&dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("calibration_{date}.csv")))
            .map_err(pegfx::Error::from)?;
        for rec in table {
            w.write_record(rec).map_err(pegfx::Error::from)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn surface(a: SurfaceArgs) -> CliResult<()> {
    if a.points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    let quotes = load_quotes(&a.quotes)?;
    let dates: Vec<NaiveDate> = if a.date.is_empty() {
        quotes.keys().copied().collect()
    } else {
        a.date.clone()
    };
    let opts = options(a.pricer, a.max_iter);
    let grid = surface_grid(a.points, SURFACE_DT);
    fs::create_dir_all(&a.out)?;
    let mut partial = 0;
    for date in dates {
        let rows = quotes
            .get(&date)
            .ok_or_else(|| pegfx::Error::Gap(format!("{date}: no quotes")))?;
        let day = QuoteDay::new(date, rows.clone())?;
        let start = Instant::now();
        let s = build_surface(&day, &grid, &opts, Exec::available())?;
        let worst = s.points.iter().map(|p| p.result.rmse).fold(0.0, f64::max);
        let unconverged = s.points.iter().filter(|p| !p.result.converged).count();
        println!(
            "{date}: {} points, {} failed, {unconverged} unconverged, worst RMSE {worst:.3e}%, {:.2?}",
            s.points.len(),
            s.failures.len(),
            start.elapsed()
        );
        for f in &s.failures {
            eprintln!("  t={:.6}: {}", f.t, f.error);
        }
        if s.is_partial() {
            partial += 1;
        }
        s.save(&a.out)?;
    }
    if partial > 0 {
        return Err(pegfx::Error::Calibration {
            what: format!("{partial} surface(s) have failed grid points"),
            best: Vec::new(),
            residual: f64::NAN,
        }
        .into());
    }
    Ok(())
}

fn print_stats(rows: &[StatsRow]) {
    println!(
        "{:<16}{:<15}{:>8}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}",
        "strategy", "metric", "count", "mean %", "std", "min", "25%", "50%", "75%", "max"
    );
    for r in rows {
        println!(
            "{:<16}{:<15}{:>8}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>10.4}{:>10.4}",
            r.strategy.label(),
            r.metric.label(),
            r.count,
            r.mean,
            r.std,
            r.min,
            r.q25,
            r.median,
            r.q75,
            r.max
        );
    }
}

fn write_outputs(dir: &Path, reports: &[HedgeReport], bins: usize) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let stats = experiment_stats(reports)?;
    print_stats(&stats);
    write_reports_csv(&dir.join("reports.csv"), reports)?;
    write_summary_json(&dir.join("summary.json"), &stats)?;
    if bins > 0 {
        write_histograms_csv(&dir.join("histograms.csv"), reports, bins)?;
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let cfg = ExperimentConfig {
        mkt: market(&a.market)?,
        strike: a.strike,
        maturity: a.maturity,
        params: a.theta.theta,
        n_steps: a.steps,
        scenario: a.scenario,
        strategies: a.strategies.0.clone(),
        paths: a.paths,
        seed: a.seed,
    };
    let start = Instant::now();
    let reports = run_experiment(&cfg, Exec::available())?;
    println!(
        "{} paths, scenario {}, seed {}, {:.2?}",
        a.paths,
        a.scenario,
        a.seed,
        start.elapsed()
    );
    write_outputs(&a.out, &reports, a.bins)
}

pub fn hedge(a: HedgeArgs) -> CliResult<()> {
    if a.horizon == 0 {
        return Err(CliError::Usage("--horizon must be positive".into()));
    }
    let history = read_quotes(&a.quotes.join(quote_file_name(Tenor::M6)), Tenor::M6)?;
    let starts: Vec<NaiveDate> = if a.start.is_empty() {
        history
            .iter()
            .take(history.len().saturating_sub(a.horizon))
            .map(|r| r.date)
            .collect()
    } else {
        a.start.clone()
    };
    if starts.is_empty() {
        return Err(pegfx::Error::Gap(format!(
            "the history has {} rows, too few for a {}-step hedge",
            history.len(),
            a.horizon
        ))
        .into());
    }
    // Only the surfaces of rebalance dates are needed.
    let mut needed = BTreeSet::new();
    for d in &starts {
        if let Some(i) = history.iter().position(|r| r.date == *d) {
            for r in history.iter().skip(i).take(a.horizon) {
                needed.insert(r.date);
            }
        }
    }
    let store = SurfaceStore::load_dir(&a.surfaces, needed)?;
    let cfg = RealConfig {
        horizon_steps: a.horizon,
        dt: SURFACE_DT,
        strategies: a.strategies.0.clone(),
    };
    let start = Instant::now();
    let bt = backtest_real(&history, &store, &starts, &cfg, Exec::available())?;
    println!("{} written calls, {:.2?}", starts.len(), start.elapsed());
    write_outputs(&a.out, &bt.reports, a.bins)
}

/// `n` business days from `start`, skipping weekends.
fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

pub fn gen_synthetic(a: GenArgs) -> CliResult<()> {
    if a.days == 0 {
        return Err(CliError::Usage("--days must be positive".into()));
    }
    let mkt = market(&a.market)?;
    let p = a.theta.theta;
    let tenors = if a.tenors.is_empty() {
        Tenor::ALL.to_vec()
    } else {
        a.tenors.clone()
    };
    let dates = business_days(a.start, a.days);
    let spots = if a.days == 1 {
        vec![mkt.spot]
    } else {
        let horizon = (a.days - 1) as f64 * SURFACE_DT;
        simulate_path(&mkt, &p, horizon, a.days - 1, a.scenario, a.seed)?.spots
    };
    // Pillar vols are invariant under a common scaling of spot and strikes,
    // so one day's quotes serve the whole history.
    let template = synthetic_quote_day(dates[0], &mkt, &p, &tenors)?;
    fs::create_dir_all(&a.out)?;
    for row in &template {
        let rows: Vec<QuoteRow> = dates
            .iter()
            .zip(&spots)
            .map(|(&date, &spot)| QuoteRow { date, spot, ..*row })
            .collect();
        write_quotes(&a.out.join(quote_file_name(row.tenor)), &rows)?;
    }
    println!(
        "{} tenors x {} days written to {}",
        template.len(),
        dates.len(),
        a.out.display()
    );
    Ok(())
}

fn timed<T>(f: impl FnOnce() -> CliResult<T>) -> CliResult<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

pub fn bench(a: BenchArgs) -> CliResult<()> {
    if a.points == 0 || a.evals == 0 {
        return Err(CliError::Usage(
            "--points and --evals must be positive".into(),
        ));
    }
    let mkt = MarketContext::new(7.8, 0.01, 0.015)?;
    let opt = OptionSpec::call(7.8, 0.5)?;
    let theta = RsParams::new(0.005, 0.10, 0.2, -0.01, 0.0)?;
    let date = NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date");
    let day = QuoteDay::new(date, synthetic_quote_day(date, &mkt, &theta, &Tenor::ALL)?)?;
    let grid = surface_grid(a.points, SURFACE_DT);
    let build = |pricer| {
        timed(|| {
            let s = build_surface(&day, &grid, &options(pricer, None), Exec::available())?;
            Ok(s.all_converged())
        })
    };
    let (conv_m, t_mart) = build(PricingMethod::Martingale)?;
    let (conv_f, t_four) = build(PricingMethod::Fourier)?;

    let path = simulate_path(
        &mkt,
        &theta,
        opt.maturity,
        a.evals,
        pegfx::simulation::Scenario::NoJump,
        1,
    )?;
    let states: Vec<RegimeState> = path.times[..a.evals]
        .iter()
        .zip(&path.spots)
        .map(|(&t, &s)| RegimeState::new(Regime::Pegged, t, s))
        .collect::<pegfx::Result<_>>()?;
    let remaining = |st: &RegimeState| {
        (
            mkt.with_spot(st.spot),
            opt.with_maturity(opt.maturity - st.t),
        )
    };
    let sum = |f: &dyn Fn(&RegimeState) -> pegfx::Result<f64>| -> CliResult<f64> {
        let mut acc = 0.0;
        for st in &states {
            acc += f(st)?;
        }
        Ok(acc)
    };
    let (_, t_delta) = timed(|| {
        sum(&|st| {
            let (m, o) = remaining(st);
            rs_delta(&m, &o, &theta)
        })
    })?;
    let (_, t_approx) = timed(|| {
        sum(&|st| {
            let (m, o) = remaining(st);
            approx_delta(&m, &o, &theta)
        })
    })?;
    let (_, t_mv) =
        timed(|| sum(&|st| Ok(mv_ratio(st, &mkt, &opt, &theta, DeltaEngine::Exact)?.pi)))?;
    let (_, t_mv_approx) =
        timed(|| sum(&|st| Ok(mv_ratio(st, &mkt, &opt, &theta, DeltaEngine::Approximate)?.pi)))?;

    #[cfg(feature = "parallel")]
    let threads = rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    let threads = 1;
    let report = json!({
        "parallel": Exec::available() == Exec::Parallel,
        "threads": threads,
        "surface": {
            "points": a.points,
            "martingale_s": t_mart,
            "fourier_s": t_four,
            "fourier_speedup": t_mart / t_four,
            "all_converged": conv_m && conv_f,
        },
        "delta": {
            "evaluations": a.evals,
            "rs_delta_s": t_delta,
            "approx_delta_s": t_approx,
            "speedup": t_delta / t_approx,
        },
        "mv": {
            "evaluations": a.evals,
            "mv_s": t_mv,
            "approx_mv_s": t_mv_approx,
            "speedup": t_mv / t_mv_approx,
        },
    });
    let text = serde_json::to_string_pretty(&report).map_err(pegfx::Error::from)?;
    println!("{text}");
    if let Some(dir) = a.out {
        fs::create_dir_all(&dir)?;
        write_json(&dir.join("bench.json"), &report)?;
    }
    Ok(())
}
