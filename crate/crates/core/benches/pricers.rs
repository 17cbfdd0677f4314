use criterion::{black_box, criterion_group, criterion_main, Criterion};

use pegfx::fourier::fourier_price;
use pegfx::mv_hedge::{mv_ratio, DeltaEngine, Regime, RegimeState};
use pegfx::rs_model::{approx_delta, approx_price, rs_delta, rs_price};
use pegfx::{MarketContext, OptionSpec, RsParams};

fn pricers(c: &mut Criterion) {
    let mkt = MarketContext::new(7.8, 0.01, 0.015).unwrap();
    let opt = OptionSpec::call(7.8, 0.5).unwrap();
    let p = RsParams::new(0.005, 0.10, 0.2, -0.01, 0.0).unwrap();

    let mut g = c.benchmark_group("price");
    g.bench_function("quadrature", |b| b.iter(|| rs_price(black_box(&mkt), &opt, &p)));
    g.bench_function("fourier", |b| b.iter(|| fourier_price(black_box(&mkt), &opt, &p)));
    g.bench_function("approx", |b| b.iter(|| approx_price(black_box(&mkt), &opt, &p)));
    g.finish();

    let mut g = c.benchmark_group("delta");
    g.bench_function("quadrature", |b| b.iter(|| rs_delta(black_box(&mkt), &opt, &p)));
    g.bench_function("approx", |b| b.iter(|| approx_delta(black_box(&mkt), &opt, &p)));
    g.finish();

    let state = RegimeState::new(Regime::Pegged, 0.1, 7.79).unwrap();
    let mut g = c.benchmark_group("mv_ratio");
    g.bench_function("exact", |b| {
        b.iter(|| mv_ratio(black_box(&state), &mkt, &opt, &p, DeltaEngine::Exact))
    });
    g.bench_function("approx", |b| {
        b.iter(|| mv_ratio(black_box(&state), &mkt, &opt, &p, DeltaEngine::Approximate))
    });
    g.finish();
}

criterion_group!(benches, pricers);
criterion_main!(benches);
