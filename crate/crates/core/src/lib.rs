//! Valuation of vulnerable bilateral forwards under funding, credit and
//! wrong-way risk.
//!
//! The analytic layers ([`special`], [`quadrature`], [`market`], [`analytic`])
//! are generic over [`Scalar`] (`f32` or `f64`). The verification oracles
//! ([`mc`], [`pde`]) and the sweep engine ([`sensitivity`]) work in `f64`.
//! Crate-root aliases fix the scalar to `f64` for everyday use.
//!
//! ```
//! use vulnfwd::{price_general, tatm_strike, ForwardContract, FundingPolicy, MarketParams, QuadConfig};
//!
//! let market = MarketParams::baseline();
//! let policy = FundingPolicy::linearizing(0.5, market.kappa())?;
//! let strike = tatm_strike(&market, &policy, 5.0, 0.0);
//! let contract = ForwardContract::spot_start(strike, 5.0)?;
//! let v = price_general(&contract, &market, &policy, &QuadConfig::default())?;
//! assert!((v.bps_per_year - 3.55).abs() < 0.01);
//! # Ok::<(), vulnfwd::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod error;
pub mod market;
pub mod mc;
pub mod pde;
pub mod quadrature;
pub mod scalar;
pub mod sensitivity;
pub mod special;

pub use analytic::{
    atmrf_strike, bs_call_qhat, bs_put_qhat, hedge_units, mtm_risk_free, no_arbitrage_band, price_approx, price_atmrf,
    price_client, price_general, risky_stock_forward, tatm_strike, BondMaturities, Components, Method,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use market::{derive_rates, stock_default_correlation, validate_no_arbitrage, PolicySpec, Violation};
pub use mc::{mc_correlation, mc_price_qhat, simulate_p_measure, McConfig, McEstimate};
pub use pde::{solve_linear_pde, PdeGrid, Scheme};
pub use quadrature::QuadConfig;
pub use scalar::Scalar;
pub use sensitivity::{run_grid, run_sweep, GridSpec, Mode, SweepBase, SweepSpec};
pub use special::{norm_cdf, norm_pdf, upsilon0, upsilon_tilde};

pub type MarketParams = market::MarketParams<f64>;
pub type MarketInput = market::MarketInput<f64>;
pub type FundingPolicy = market::FundingPolicy<f64>;
pub type DerivedRates = market::DerivedRates<f64>;
pub type ForwardContract = analytic::ForwardContract<f64>;
pub type ValuationResult = analytic::ValuationResult<f64>;
pub type HedgeSnapshot = analytic::HedgeSnapshot<f64>;
pub type PriceBand = analytic::PriceBand<f64>;
