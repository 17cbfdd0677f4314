//! Exact-in-law path generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{MarketContext, OptionSpec};
use crate::error::{ensure_finite, Error, Result};
use crate::mv_hedge::Regime;
use crate::par::{chunked_sum, map_indexed, Exec};
use crate::rs_model::RsParams;

use super::Scenario;

/// Generator for path `index` of a run seeded with `master`. Each index gets
/// its own ChaCha stream, so paths do not depend on scheduling.
pub fn path_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// One simulated spot path on the grid `t_i = i dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsPath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub spots: Vec<f64>,
    /// Switch time, infinite when there is no switch on `[0, T]`.
    pub tau: f64,
    pub regimes: Vec<Regime>,
    /// `e^Y` applied at `τ`; one when there is no switch.
    pub jump_multiplier: f64,
}

impl RsPath {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn switched(&self) -> bool {
        self.tau.is_finite()
    }
}

/// Drift and volatility of `ln S` in each regime.
#[derive(Debug, Clone, Copy)]
struct LogDynamics {
    pre_drift: f64,
    pre_vol: f64,
    post_drift: f64,
    post_vol: f64,
}

impl LogDynamics {
    fn new(mkt: &MarketContext, params: &RsParams) -> Self {
        let carry = mkt.rd - mkt.rf;
        Self {
            pre_drift: carry
                - 0.5 * params.sigma_low * params.sigma_low
                - params.lambda * params.kappa(),
            pre_vol: params.sigma_low,
            post_drift: carry - 0.5 * params.sigma_high * params.sigma_high,
            post_vol: params.sigma_high,
        }
    }

    /// Log increment over `[a, b]` given the switch time; the jump is
    /// included when `a < τ <= b`.
    fn increment<R: Rng>(&self, a: f64, b: f64, tau: f64, jump: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        if tau > b {
            self.pre_drift * (b - a) + self.pre_vol * (b - a).sqrt() * z
        } else if tau <= a {
            self.post_drift * (b - a) + self.post_vol * (b - a).sqrt() * z
        } else {
            let z2: f64 = rng.sample(StandardNormal);
            let before = tau - a;
            let after = b - tau;
            self.pre_drift * before
                + self.pre_vol * before.sqrt() * z
                + jump
                + self.post_drift * after
                + self.post_vol * after.sqrt() * z2
        }
    }
}

/// Switch time under `scenario`: exponential, conditioned beyond `T`, or
/// truncated to `(0, T]`. Infinite when no switch happens on `[0, T]`.
fn draw_tau<R: Rng>(lambda: f64, t: f64, scenario: Scenario, rng: &mut R) -> Result<f64> {
    if lambda == 0.0 {
        return match scenario {
            Scenario::Jump => Err(Error::domain(
                "the jump scenario needs a positive switching intensity",
            )),
            _ => Ok(f64::INFINITY),
        };
    }
    // 1 - U lies in (0, 1], keeping logarithms finite.
    let v = 1.0 - rng.gen::<f64>();
    let tau = match scenario {
        Scenario::Unconditional => -v.ln() / lambda,
        Scenario::NoJump => f64::INFINITY,
        // Inverse of the truncated CDF (1 - e^{-λs}) / (1 - e^{-λT}).
        Scenario::Jump => -((1.0 - v) * (-lambda * t).exp_m1()).ln_1p() / lambda,
    };
    Ok(if tau > t { f64::INFINITY } else { tau.min(t) })
}

fn check_inputs(mkt: &MarketContext, params: &RsParams, t: f64, n_steps: usize) -> Result<()> {
    mkt.validate()?;
    params.validate()?;
    ensure_finite("maturity", t)?;
    if t <= 0.0 {
        return Err(Error::domain(format!("horizon must be positive, got {t}")));
    }
    if n_steps == 0 {
        return Err(Error::domain("a path needs at least one step"));
    }
    Ok(())
}

fn simulate_with<R: Rng>(
    mkt: &MarketContext,
    params: &RsParams,
    t: f64,
    n_steps: usize,
    scenario: Scenario,
    rng: &mut R,
) -> Result<RsPath> {
    let dyns = LogDynamics::new(mkt, params);
    let tau = draw_tau(params.lambda, t, scenario, rng)?;
    let y = if tau.is_finite() {
        params.u + params.delta * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    let dt = t / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut spots = Vec::with_capacity(n_steps + 1);
    let mut regimes = Vec::with_capacity(n_steps + 1);
    let mut log_ret = 0.0;
    for i in 0..=n_steps {
        let ti = if i == n_steps { t } else { i as f64 * dt };
        if i > 0 {
            log_ret += dyns.increment(times[i - 1], ti, tau, y, rng);
        }
        times.push(ti);
        spots.push(mkt.spot * log_ret.exp());
        regimes.push(if ti >= tau {
            Regime::Floating
        } else {
            Regime::Pegged
        });
    }
    Ok(RsPath {
        dt,
        times,
        spots,
        tau,
        regimes,
        jump_multiplier: y.exp(),
    })
}

/// Simulates one path with generator stream 0 of `seed`.
pub fn simulate_path(
    mkt: &MarketContext,
    params: &RsParams,
    maturity: f64,
    n_steps: usize,
    scenario: Scenario,
    seed: u64,
) -> Result<RsPath> {
    check_inputs(mkt, params, maturity, n_steps)?;
    simulate_with(
        mkt,
        params,
        maturity,
        n_steps,
        scenario,
        &mut path_rng(seed, 0),
    )
}

/// Path `index` of the run seeded with `seed`.
pub fn simulate_indexed(
    mkt: &MarketContext,
    params: &RsParams,
    maturity: f64,
    n_steps: usize,
    scenario: Scenario,
    seed: u64,
    index: u64,
) -> Result<RsPath> {
    check_inputs(mkt, params, maturity, n_steps)?;
    simulate_with(
        mkt,
        params,
        maturity,
        n_steps,
        scenario,
        &mut path_rng(seed, index),
    )
}

/// `n_paths` paths, path `i` drawn from stream `i` of `seed`.
pub fn simulate_paths(
    mkt: &MarketContext,
    params: &RsParams,
    maturity: f64,
    n_steps: usize,
    scenario: Scenario,
    seed: u64,
    n_paths: usize,
    exec: Exec,
) -> Result<Vec<RsPath>> {
    check_inputs(mkt, params, maturity, n_steps)?;
    map_indexed(exec, n_paths, |i| {
        simulate_with(
            mkt,
            params,
            maturity,
            n_steps,
            scenario,
            &mut path_rng(seed, i as u64),
        )
    })
    .into_iter()
    .collect()
}

/// Terminal spot drawn in a single exact step.
pub fn sample_terminal<R: Rng>(
    mkt: &MarketContext,
    params: &RsParams,
    maturity: f64,
    scenario: Scenario,
    rng: &mut R,
) -> Result<f64> {
    let dyns = LogDynamics::new(mkt, params);
    let tau = draw_tau(params.lambda, maturity, scenario, rng)?;
    let y = if tau.is_finite() {
        params.u + params.delta * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    Ok(mkt.spot * dyns.increment(0.0, maturity, tau, y, rng).exp())
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Self {
            mean,
            std_error: (var / nf).sqrt(),
            n,
        }
    }

    /// `|mean - x|` in standard errors.
    pub fn z_score(&self, x: f64) -> f64 {
        (self.mean - x).abs() / self.std_error
    }
}

const MC_CHUNK: usize = 1 << 16;

/// Mean of `g(S(T))` over `n` terminal draws. Chunk `c` uses stream `c` of
/// `seed`, so the estimate is independent of the thread count.
pub fn mc_terminal_mean<G>(
    mkt: &MarketContext,
    params: &RsParams,
    maturity: f64,
    scenario: Scenario,
    n: usize,
    seed: u64,
    exec: Exec,
    g: G,
) -> Result<McEstimate>
where
    G: Fn(f64) -> f64 + Sync + Send,
{
    check_inputs(mkt, params, maturity, 1)?;
    if n < 2 {
        return Err(Error::domain("Monte Carlo needs at least two draws"));
    }
    // Surface the impossible conditioning before spawning workers.
    draw_tau(params.lambda, maturity, scenario, &mut path_rng(seed, 0))?;
    let [sum, sum_sq] = chunked_sum(exec, n, MC_CHUNK, |range| {
        let mut rng = path_rng(seed, (range.start / MC_CHUNK) as u64);
        let mut acc = [0.0; 2];
        for _ in range {
            let s = sample_terminal(mkt, params, maturity, scenario, &mut rng)
                .expect("inputs validated above");
            let v = g(s);
            acc[0] += v;
            acc[1] += v * v;
        }
        acc
    });
    Ok(McEstimate::from_sums(sum, sum_sq, n))
}

/// Discounted Monte Carlo price of a vanilla option.
pub fn mc_price(
    mkt: &MarketContext,
    opt: &OptionSpec,
    params: &RsParams,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<McEstimate> {
    opt.validate()?;
    let disc = (-mkt.rd * opt.maturity).exp();
    let omega = opt.side.omega();
    let k = opt.strike;
    let est = mc_terminal_mean(
        mkt,
        params,
        opt.maturity,
        Scenario::Unconditional,
        n,
        seed,
        exec,
        |s| (omega * (s - k)).max(0.0),
    )?;
    Ok(McEstimate {
        mean: disc * est.mean,
        std_error: disc * est.std_error,
        n,
    })
}
