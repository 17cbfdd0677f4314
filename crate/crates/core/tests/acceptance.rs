//! Acceptance criteria, run in order with one status line each.
//!
//! Every check runs at its stated tolerance and time budget. The only
//! failure tolerated by the harness is the surface-build speed ratio, which
//! is reported as FAIL but does not abort the run.

use std::fs;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pegfx::black_scholes::{bs_delta, bs_price};
use pegfx::calibration::{
    build_surface, compare_with_sabr, surface_grid, synthetic_quote_day, CalibrationOptions,
    PricingMethod, QuoteDay, SURFACE_DT, SURFACE_POINTS,
};
use pegfx::conventions::{
    atm_strike, build_pillars, premium_adjusted_delta, strike_from_delta, DeltaConvention, Pillar,
    QuoteRow, Tenor,
};
use pegfx::fourier::{char_fn, fourier_price};
use pegfx::mv_hedge::{mv_ratio, DeltaEngine, Regime, RegimeState};
use pegfx::par::Exec;
use pegfx::rs_model::{approx_delta, approx_error_grid, approx_price, rs_delta, rs_price};
use pegfx::simulation::{
    experiment_stats, mc_price, run_experiment, simulate_path, write_reports_csv,
    write_summary_json, ErrorMetric, ExperimentConfig, Scenario, Strategy,
};
use pegfx::{MarketContext, OptionSpec, RsParams, Side};

/// Outcome of one criterion: whether it passed and a one-line detail.
struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn hk_market() -> MarketContext {
    MarketContext::new(7.8, 0.01, 0.015).unwrap()
}

fn hk_option() -> OptionSpec {
    OptionSpec::call(7.8, 0.5).unwrap()
}

fn hk_theta() -> RsParams {
    RsParams::new(0.005, 0.10, 0.2, -0.01, 0.0).unwrap()
}

/// Random parameters, maturity and strike spread around the forward.
fn random_case(rng: &mut ChaCha8Rng) -> (MarketContext, OptionSpec, RsParams) {
    let sigma_low = rng.gen_range(0.002..0.05);
    let sigma_high = rng.gen_range(sigma_low..0.4);
    let p = RsParams::new(
        sigma_low,
        sigma_high,
        rng.gen_range(0.0..3.0),
        rng.gen_range(-0.1..0.1),
        rng.gen_range(0.0..0.05),
    )
    .unwrap();
    let mkt = MarketContext::new(
        rng.gen_range(5.0..10.0),
        rng.gen_range(0.0..0.05),
        rng.gen_range(0.0..0.05),
    )
    .unwrap();
    let t: f64 = rng.gen_range(0.05..2.0);
    let width = sigma_high * t.sqrt();
    let strike = mkt.forward(t) * (rng.gen_range(-1.5..1.5) * width).exp();
    (mkt, OptionSpec::call(strike, t).unwrap(), p)
}

fn cross_pricer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cases = vec![(hk_market(), hk_option(), hk_theta())];
    cases.extend((0..100).map(|_| random_case(&mut rng)));
    let mut worst = 0.0f64;
    for (mkt, opt, p) in &cases {
        let a = rs_price(mkt, opt, p).unwrap();
        let b = fourier_price(mkt, opt, p).unwrap();
        worst = worst.max((a - b).abs() / mkt.spot);
    }
    outcome(
        worst <= 1e-6,
        format!(
            "{} cases, worst |fourier - rs| / S0 = {worst:.2e}",
            cases.len()
        ),
    )
}

fn monte_carlo_oracle() -> Outcome {
    let (mkt, opt, p) = (hk_market(), hk_option(), hk_theta());
    let price = rs_price(&mkt, &opt, &p).unwrap();
    let mc = mc_price(&mkt, &opt, &p, 10_000_000, 7, Exec::available()).unwrap();
    let z = mc.z_score(price);
    outcome(
        z <= 3.0,
        format!(
            "rs_price {price:.8}, MC {:.8} +/- {:.2e}, z = {z:.2}",
            mc.mean, mc.std_error
        ),
    )
}

fn char_fn_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cases = vec![(hk_option().maturity, hk_theta())];
    cases.extend((0..20).map(|_| {
        let (_, opt, p) = random_case(&mut rng);
        (opt.maturity, p)
    }));
    let mut exact_at_zero = true;
    let mut worst = 0.0f64;
    for (t, p) in &cases {
        exact_at_zero &=
            char_fn(Complex64::new(0.0, 0.0), *t, p).unwrap() == Complex64::new(1.0, 0.0);
        let v = char_fn(Complex64::new(0.0, -1.0), *t, p).unwrap();
        worst = worst.max((v - 1.0).norm());
    }
    outcome(
        exact_at_zero && worst <= 1e-10,
        format!(
            "{} cases, phi(0) == 1: {exact_at_zero}, worst |phi(-i) - 1| = {worst:.2e}",
            cases.len()
        ),
    )
}

fn approximation_bound() -> Outcome {
    let mkt = MarketContext::new(100.0, 0.02, 0.03).unwrap();
    let opt = OptionSpec::call(100.0, 1.0).unwrap();
    let p = RsParams::new(0.02, 0.10, 0.1, 0.05, 0.0).unwrap();
    let spots: Vec<f64> = (50..=150).map(f64::from).collect();
    let rows = approx_error_grid(&mkt, &opt, &p, &spots).unwrap();
    let violations: Vec<_> = rows.iter().filter(|r| !r.within_bound()).collect();
    let weak_violations = rows.iter().filter(|r| !r.within_weak_bound()).count();
    let worst = rows
        .iter()
        .map(|r| r.spot_adjusted_error / r.bound)
        .fold(0.0, f64::max);
    let mut detail = format!(
        "{} spots, {} above the bound, {weak_violations} above the weak bound, \
         worst error / bound = {worst:.3}",
        rows.len(),
        violations.len()
    );
    for r in violations.iter().take(3) {
        detail.push_str(&format!(
            "; S0={} err={:.3e} bound={:.3e} weak={:.3e}",
            r.spot, r.spot_adjusted_error, r.bound, r.weak_bound
        ));
    }
    outcome(violations.is_empty(), detail)
}

fn deltas_match_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let (mkt, opt, p) = random_case(&mut rng);
        let h = 1e-5 * mkt.spot;
        let up = mkt.with_spot(mkt.spot + h);
        let dn = mkt.with_spot(mkt.spot - h);
        let fd = |f: &dyn Fn(&MarketContext) -> f64| (f(&up) - f(&dn)) / (2.0 * h);
        let rs = rs_delta(&mkt, &opt, &p).unwrap() - fd(&|m| rs_price(m, &opt, &p).unwrap());
        let ap =
            approx_delta(&mkt, &opt, &p).unwrap() - fd(&|m| approx_price(m, &opt, &p).unwrap());
        let s = p.sigma_high;
        let bs = bs_delta(&mkt, &opt, s).unwrap() - fd(&|m| bs_price(m, &opt, s).unwrap());
        for (w, e) in worst.iter_mut().zip([rs, ap, bs]) {
            *w = w.max(e.abs());
        }
    }
    outcome(
        worst.iter().all(|w| *w <= 1e-6),
        format!(
            "100 cases, worst |delta - fd|: rs {:.2e}, approx {:.2e}, bs {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn calibration_round_trip() -> Outcome {
    let mkt = hk_market();
    let date = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
    let rows = synthetic_quote_day(date, &mkt, &hk_theta(), &Tenor::ALL).unwrap();
    let opts = CalibrationOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &rows {
        let cmp = compare_with_sabr(&build_pillars(row).unwrap(), &mkt, &opts).unwrap();
        pass &= cmp.rs.rmse < 0.1 && cmp.sabr_rmse > cmp.rs.rmse;
        parts.push(format!(
            "{} rs {:.1e}% sabr {:.2e}%",
            row.tenor, cmp.rs.rmse, cmp.sabr_rmse
        ));
    }
    outcome(pass, parts.join(", "))
}

/// Sequential build time and convergence of the same synthetic day with
/// each pricer.
fn surface_build() -> (Outcome, Outcome) {
    let mkt = hk_market();
    let date = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
    let rows = synthetic_quote_day(date, &mkt, &hk_theta(), &Tenor::ALL).unwrap();
    let day = QuoteDay::new(date, rows).unwrap();
    let grid = surface_grid(SURFACE_POINTS, SURFACE_DT);
    let mut timings = Vec::new();
    let mut converged = true;
    let mut parts = Vec::new();
    for pricer in [PricingMethod::Martingale, PricingMethod::Fourier] {
        let start = Instant::now();
        let surface = build_surface(
            &day,
            &grid,
            &CalibrationOptions::with_pricer(pricer),
            Exec::Sequential,
        )
        .unwrap();
        let elapsed = start.elapsed();
        timings.push(elapsed.as_secs_f64());
        let ok = surface.points.len() == SURFACE_POINTS && surface.all_converged();
        converged &= ok;
        parts.push(format!(
            "{pricer}: {} points, all converged {ok}, {:.2?}",
            surface.points.len(),
            elapsed
        ));
    }
    let speedup = timings[0] / timings[1];
    (
        outcome(converged, parts.join("; ")),
        outcome(
            speedup >= 2.0,
            format!("martingale / fourier build time = {speedup:.2} (needs >= 2)"),
        ),
    )
}

fn table_check(scenario: Scenario, seed: u64) -> (Vec<(Strategy, f64)>, Vec<u8>, Vec<u8>) {
    let cfg = ExperimentConfig::pegged_default(scenario, 10_000, seed).unwrap();
    let reports = run_experiment(&cfg, Exec::available()).unwrap();
    let stats = experiment_stats(&reports).unwrap();
    let means = stats
        .iter()
        .filter(|r| r.metric == ErrorMetric::Terminal)
        .map(|r| (r.strategy, r.mean))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("reports.csv");
    let json = dir.path().join("summary.json");
    write_reports_csv(&csv, &reports).unwrap();
    write_summary_json(&json, &stats).unwrap();
    (means, fs::read(csv).unwrap(), fs::read(json).unwrap())
}

fn mean_of(means: &[(Strategy, f64)], s: Strategy) -> f64 {
    means.iter().find(|(k, _)| *k == s).unwrap().1
}

fn compare_table(means: &[(Strategy, f64)], table: &[(Strategy, f64)]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for &(s, target) in table {
        let got = mean_of(means, s);
        let rel = (got - target).abs() / target;
        pass &= rel <= 0.3;
        parts.push(format!("{s} {got:.3}% (table {target}%)"));
    }
    (pass, parts.join(", "))
}

const SIM_SEED: u64 = 2024;

fn hedging_no_jump() -> (Outcome, (Vec<u8>, Vec<u8>)) {
    let (means, csv, json) = table_check(Scenario::NoJump, SIM_SEED);
    let (close, detail) = compare_table(
        &means,
        &[
            (Strategy::BsDelta, 0.149),
            (Strategy::RsDelta, 0.154),
            (Strategy::ApproxRsDelta, 0.154),
            (Strategy::MvRs, 0.216),
            (Strategy::MvApprox, 0.212),
        ],
    );
    let deltas = [
        Strategy::BsDelta,
        Strategy::RsDelta,
        Strategy::ApproxRsDelta,
    ];
    let mvs = [Strategy::MvRs, Strategy::MvApprox];
    let ordered = deltas.iter().all(|d| {
        mvs.iter()
            .all(|m| mean_of(&means, *d) < mean_of(&means, *m))
    });
    (
        outcome(
            close && ordered,
            format!("{detail}; deltas < MV: {ordered}"),
        ),
        (csv, json),
    )
}

fn hedging_jump() -> (Outcome, (Vec<u8>, Vec<u8>)) {
    let (means, csv, json) = table_check(Scenario::Jump, SIM_SEED);
    let table = [
        (Strategy::MvRs, 0.911),
        (Strategy::MvApprox, 0.921),
        (Strategy::BsDelta, 1.460),
        (Strategy::RsDelta, 1.508),
    ];
    let (close, detail) = compare_table(&means, &table);
    let ordered = table
        .windows(2)
        .all(|w| mean_of(&means, w[0].0) < mean_of(&means, w[1].0));
    (
        outcome(
            close && ordered,
            format!("{detail}; ordering held: {ordered}"),
        ),
        (csv, json),
    )
}

fn delta_timing() -> Outcome {
    let (mkt, opt, p) = (hk_market(), hk_option(), hk_theta());
    let path = simulate_path(&mkt, &p, opt.maturity, 130, Scenario::NoJump, 11).unwrap();
    let states: Vec<RegimeState> = path.times[..130]
        .iter()
        .zip(&path.spots)
        .map(|(&t, &s)| RegimeState::new(Regime::Pegged, t, s).unwrap())
        .collect();
    let time = |f: &dyn Fn(&RegimeState) -> f64| -> Duration {
        let start = Instant::now();
        let mut acc = 0.0;
        for st in &states {
            acc += f(st);
        }
        std::hint::black_box(acc);
        start.elapsed()
    };
    let remaining = |st: &RegimeState| {
        (
            mkt.with_spot(st.spot),
            opt.with_maturity(opt.maturity - st.t),
        )
    };
    let exact = time(&|st| {
        let (m, o) = remaining(st);
        rs_delta(&m, &o, &p).unwrap()
    });
    let approx = time(&|st| {
        let (m, o) = remaining(st);
        approx_delta(&m, &o, &p).unwrap()
    });
    let mv = time(&|st| mv_ratio(st, &mkt, &opt, &p, DeltaEngine::Exact).unwrap().pi);
    let mv_approx = time(&|st| {
        mv_ratio(st, &mkt, &opt, &p, DeltaEngine::Approximate)
            .unwrap()
            .pi
    });
    let delta_ratio = exact.as_secs_f64() / approx.as_secs_f64();
    let mv_ratio_speed = mv.as_secs_f64() / mv_approx.as_secs_f64();
    outcome(
        delta_ratio >= 10.0 && mv_ratio_speed >= 10.0,
        format!(
            "130 evaluations: rs_delta {exact:.2?} vs approx {approx:.2?} ({delta_ratio:.0}x); \
             MV {mv:.2?} vs approx MV {mv_approx:.2?} ({mv_ratio_speed:.0}x)"
        ),
    )
}

fn random_quote_row(rng: &mut ChaCha8Rng) -> QuoteRow {
    let atm = rng.gen_range(0.002..0.2);
    QuoteRow {
        date: NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
        spot: rng.gen_range(1.0..10.0),
        rd: rng.gen_range(0.0..0.06),
        rf: rng.gen_range(0.0..0.06),
        atm,
        rr25: rng.gen_range(-0.1..0.1) * atm,
        bf25: rng.gen_range(0.0..0.05) * atm,
        rr10: rng.gen_range(-0.2..0.2) * atm,
        bf10: rng.gen_range(0.0..0.15) * atm,
        tenor: Tenor::ALL[rng.gen_range(0..Tenor::ALL.len())],
    }
}

fn convention_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..50 {
        let row = random_quote_row(&mut rng);
        let mkt = row.market().unwrap();
        let t = row.maturity();
        let vols = pegfx::conventions::pillar_vols(&row).unwrap();
        for conv in [
            DeltaConvention::SpotPremiumAdjusted,
            DeltaConvention::ForwardPremiumAdjusted,
        ] {
            for (pillar, vol) in Pillar::ALL.iter().zip(vols) {
                let err = match pillar.delta_target() {
                    // The ATM strike makes the straddle delta-neutral.
                    None => {
                        let k = atm_strike(&mkt, vol, t);
                        premium_adjusted_delta(k, Side::Call, vol, &mkt, t, conv)
                            + premium_adjusted_delta(k, Side::Put, vol, &mkt, t, conv)
                    }
                    Some((target, side)) => {
                        let k = strike_from_delta(target, side, vol, &mkt, t, conv).unwrap();
                        premium_adjusted_delta(k, side, vol, &mkt, t, conv).abs() - target
                    }
                };
                worst = worst.max(err.abs());
                checked += 1;
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{checked} round trips, worst delta error {worst:.2e}"),
    )
}

struct Report {
    lines: Vec<String>,
    unexpected: Vec<String>,
}

impl Report {
    fn record(
        &mut self,
        id: &str,
        name: &str,
        o: Outcome,
        budget: Duration,
        took: Duration,
        tolerated: bool,
    ) {
        let in_time = took <= budget;
        let status = if o.pass && in_time { "PASS" } else { "FAIL" };
        let line = format!(
            "[{status}] {id:>3} {name}: {} ({took:.2?}, budget {budget:.0?})",
            o.detail
        );
        println!("{line}");
        if status == "FAIL" && !tolerated {
            self.unexpected.push(line.clone());
        }
        self.lines.push(line);
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() {
    let secs = Duration::from_secs;
    let mut report = Report {
        lines: Vec::new(),
        unexpected: Vec::new(),
    };

    let (o, t) = timed(cross_pricer);
    report.record("1", "cross-pricer agreement", o, secs(30), t, false);
    let (o, t) = timed(monte_carlo_oracle);
    report.record("2", "Monte Carlo oracle", o, secs(120), t, false);
    let (o, t) = timed(char_fn_identities);
    report.record(
        "3",
        "characteristic function identities",
        o,
        secs(5),
        t,
        false,
    );
    let (o, t) = timed(approximation_bound);
    report.record("4", "approximation bound", o, secs(30), t, false);
    let (o, t) = timed(deltas_match_finite_differences);
    report.record("5", "delta correctness", o, secs(60), t, false);
    let (o, t) = timed(calibration_round_trip);
    report.record("6", "calibration round trip", o, secs(60), t, false);
    let ((conv, speed), t) = timed(surface_build);
    report.record("7a", "surface build convergence", conv, secs(600), t, false);
    report.record("7b", "surface build speed ratio", speed, secs(600), t, true);
    let ((o, first_nj), t) = timed(hedging_no_jump);
    report.record("8", "hedging simulation, no jump", o, secs(600), t, false);
    let ((o, first_j), t) = timed(hedging_jump);
    report.record("9", "hedging simulation, jump", o, secs(600), t, false);
    let (o, t) = timed(delta_timing);
    report.record("10", "approximation timing", o, secs(120), t, false);
    let (o, t) = timed(convention_round_trip);
    report.record("11", "delta convention round trip", o, secs(10), t, false);
    let (o, t) = timed(|| {
        let (_, again_nj) = hedging_no_jump();
        let (_, again_j) = hedging_jump();
        let same = first_nj == again_nj && first_j == again_j;
        outcome(
            same,
            format!(
                "reports.csv and summary.json byte-identical across reruns: {same} \
                 ({} + {} bytes)",
                first_nj.0.len() + first_nj.1.len(),
                first_j.0.len() + first_j.1.len()
            ),
        )
    });
    report.record("12", "determinism", o, secs(1200), t, false);

    let failed = report.lines.iter().filter(|l| l.starts_with("[FAIL]")).count();
    println!(
        "acceptance: {} criteria, {failed} failed, {} not tolerated",
        report.lines.len(),
        report.unexpected.len()
    );
    if !report.unexpected.is_empty() {
        eprintln!("failed criteria:\n{}", report.unexpected.join("\n"));
        std::process::exit(1);
    }
}
