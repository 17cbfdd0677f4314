use chrono::{Datelike, NaiveDate};

use pegfx::calibration::{ParamSurface, PricingMethod, SURFACE_DT, SURFACE_POINTS};
use pegfx::conventions::{QuoteRow, Tenor};
use pegfx::par::Exec;
use pegfx::simulation::{
    backtest_real, mc_terminal_mean, simulate_path, RealConfig, Scenario, Strategy, SurfaceStore,
};
use pegfx::{MarketContext, RsParams};

fn mkt() -> MarketContext {
    MarketContext::new(7.8, 0.01, 0.015).unwrap()
}

fn theta() -> RsParams {
    RsParams::new(0.005, 0.10, 0.8, -0.02, 0.01).unwrap()
}

const N: usize = 200_000;

#[test]
fn discounted_spot_is_a_martingale() {
    let (m, p, t) = (mkt(), theta(), 0.75);
    let est =
        mc_terminal_mean(&m, &p, t, Scenario::Unconditional, N, 3, Exec::Parallel, |s| s).unwrap();
    let z = est.z_score(m.forward(t));
    assert!(z < 4.0, "mean {} vs forward {}, z = {z}", est.mean, m.forward(t));
}

#[test]
fn conditional_scenarios_recombine() {
    let (m, p, t) = (mkt(), theta(), 0.75);
    let run = |sc| mc_terminal_mean(&m, &p, t, sc, N, 5, Exec::Parallel, |s| s).unwrap();
    let (no, yes) = (run(Scenario::NoJump), run(Scenario::Jump));
    let stay = (-p.lambda * t).exp();
    let mixed = stay * no.mean + (1.0 - stay) * yes.mean;
    let se = (stay * stay * no.std_error.powi(2) + (1.0 - stay).powi(2) * yes.std_error.powi(2))
        .sqrt();
    let z = (mixed - m.forward(t)).abs() / se;
    assert!(z < 4.0, "mixture {mixed} vs forward {}, z = {z}", m.forward(t));
    // Without a switch the spot drifts at rd - rf - lambda kappa.
    let no_jump_fwd = m.forward(t) * (-p.lambda * p.kappa() * t).exp();
    assert!(no.z_score(no_jump_fwd) < 4.0);
}

#[test]
fn zero_intensity_log_returns_are_gaussian() {
    let (m, t) = (mkt(), 0.5);
    let p = RsParams::new(0.04, 0.2, 0.0, 0.1, 0.05).unwrap();
    let s0 = m.spot;
    let first = mc_terminal_mean(&m, &p, t, Scenario::Unconditional, N, 7, Exec::Parallel, |s| {
        (s / s0).ln()
    })
    .unwrap();
    let mean = (m.rd - m.rf - 0.5 * p.sigma_low.powi(2)) * t;
    assert!(first.z_score(mean) < 4.0, "{} vs {mean}", first.mean);
    let var = p.sigma_low.powi(2) * t;
    let second = mc_terminal_mean(&m, &p, t, Scenario::Unconditional, N, 7, Exec::Parallel, |s| {
        ((s / s0).ln() - mean).powi(2)
    })
    .unwrap();
    assert!(second.z_score(var) < 4.0, "{} vs {var}", second.mean);
}

#[test]
fn simulation_does_not_depend_on_the_executor() {
    let (m, p) = (mkt(), theta());
    let run = |e| mc_terminal_mean(&m, &p, 0.5, Scenario::Jump, 150_000, 11, e, |s| s).unwrap();
    let (a, b) = (run(Exec::Parallel), run(Exec::Sequential));
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
}

fn history_from(spots: &[f64]) -> Vec<QuoteRow> {
    let mut d = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
    spots
        .iter()
        .map(|&spot| {
            let row = QuoteRow {
                date: d,
                spot,
                rd: 0.01,
                rf: 0.015,
                atm: 0.01,
                rr25: 0.0,
                bf25: 0.0,
                rr10: 0.0,
                bf10: 0.0,
                tenor: Tenor::M6,
            };
            d = d.succ_opt().unwrap();
            while d.weekday().num_days_from_monday() > 4 {
                d = d.succ_opt().unwrap();
            }
            row
        })
        .collect()
}

#[test]
fn real_backtest_collapses_without_switching() {
    let p = RsParams::new(0.01, 0.3, 0.0, 0.0, 0.0).unwrap();
    let path = simulate_path(&mkt(), &p, 40.0 * SURFACE_DT, 40, Scenario::Unconditional, 21).unwrap();
    let rows = history_from(&path.spots);
    let store: SurfaceStore = rows
        .iter()
        .map(|r| ParamSurface::flat(r.date, SURFACE_DT, SURFACE_POINTS, p, PricingMethod::Fourier))
        .collect();
    let starts: Vec<NaiveDate> = rows[..10].iter().map(|r| r.date).collect();
    let cfg = RealConfig {
        horizon_steps: 30,
        strategies: vec![Strategy::BsDelta, Strategy::RsDelta, Strategy::ApproxRsDelta],
        ..RealConfig::default()
    };
    let out = backtest_real(&rows, &store, &starts, &cfg, Exec::Parallel).unwrap();
    assert_eq!(out.reports.len(), 30);
    for id in 0..10u64 {
        let errs: Vec<f64> = out
            .reports
            .iter()
            .filter(|r| r.id == id)
            .map(|r| r.terminal_error)
            .collect();
        assert_eq!(errs.len(), 3);
        for e in &errs[1..] {
            assert!((e - errs[0]).abs() < 1e-9, "{errs:?}");
        }
    }
}
