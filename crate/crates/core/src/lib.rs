//! Pricing, calibration and hedging of FX options on currencies held in a
//! tight band, with the exchange rate modelled as a diffusion that switches
//! once, at a random time, from a low-volatility pegged regime to a
//! high-volatility floating regime with a jump.

pub mod black_scholes;
pub mod calibration;
pub mod conventions;
pub mod error;
pub mod fourier;
pub mod mv_hedge;
pub mod numerics;
pub mod par;
pub mod rs_model;
pub mod sabr;
pub mod simulation;

pub use black_scholes::{MarketContext, OptionSpec, Side};
pub use error::{Error, ErrorKind, Result};
pub use rs_model::RsParams;
