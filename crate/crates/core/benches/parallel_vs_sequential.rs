use std::time::Duration;

use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pegfx::calibration::{
    build_surface, surface_grid, synthetic_quote_day, CalibrationOptions, PricingMethod, QuoteDay,
    SURFACE_DT,
};
use pegfx::conventions::Tenor;
use pegfx::par::Exec;
use pegfx::simulation::{mc_price, run_experiment, ExperimentConfig, Scenario};
use pegfx::{MarketContext, OptionSpec, RsParams};

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn market() -> (MarketContext, RsParams) {
    (
        MarketContext::new(7.8, 0.01, 0.015).unwrap(),
        RsParams::new(0.005, 0.10, 0.2, -0.01, 0.0).unwrap(),
    )
}

fn hedging_experiment(c: &mut Criterion) {
    let cfg = ExperimentConfig::pegged_default(Scenario::Jump, 64, 1).unwrap();
    let mut g = c.benchmark_group("hedging_experiment_64_paths");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiment(&cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn monte_carlo_price(c: &mut Criterion) {
    let (mkt, p) = market();
    let opt = OptionSpec::call(7.8, 0.5).unwrap();
    let mut g = c.benchmark_group("mc_price_1m");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_price(&mkt, &opt, &p, 1 << 20, 7, exec).unwrap())
        });
    }
    g.finish();
}

fn surface_build(c: &mut Criterion) {
    let (mkt, p) = market();
    let date = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
    let day = QuoteDay::new(date, synthetic_quote_day(date, &mkt, &p, &Tenor::ALL).unwrap()).unwrap();
    let grid = surface_grid(16, SURFACE_DT);
    let opts = CalibrationOptions::with_pricer(PricingMethod::Fourier);
    let mut g = c.benchmark_group("surface_16_points");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_surface(&day, &grid, &opts, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, hedging_experiment, monte_carlo_price, surface_build);
criterion_main!(benches);
