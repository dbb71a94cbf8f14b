//! JSON run configuration.
//!
//! Every section is optional and defaults to the baseline study setup, so an
//! empty object `{}` prices the baseline TATM forward.

use serde::{Deserialize, Serialize};

use crate::analytic::{atmrf_strike, tatm_strike, BondMaturities, ForwardContract};
use crate::error::{Error, Result};
use crate::market::{FundingPolicy, MarketParams, PolicySpec, MARKET_KEYS};
use crate::mc::McConfig;
use crate::pde::{PdeGrid, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedStrike {
    Tatm,
    Atmrf,
}

/// A literal strike, a named strike, or a multiple of K★.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrikeSpec {
    Value(f64),
    Named(NamedStrike),
    Moneyness { moneyness: f64 },
}

impl std::str::FromStr for StrikeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tatm" => Ok(StrikeSpec::Named(NamedStrike::Tatm)),
            "atmrf" => Ok(StrikeSpec::Named(NamedStrike::Atmrf)),
            other => {
                if let Some(m) = other.strip_prefix("m=") {
                    let moneyness = m.parse().map_err(|_| Error::invalid("strike", format!("bad moneyness `{m}`")))?;
                    return Ok(StrikeSpec::Moneyness { moneyness });
                }
                other.parse().map(StrikeSpec::Value).map_err(|_| Error::invalid("strike", format!("`{other}`")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSpec {
    pub strike: StrikeSpec,
    pub expiry: f64,
    #[serde(default)]
    pub valuation_time: f64,
}

impl Default for ContractSpec {
    fn default() -> Self {
        Self { strike: StrikeSpec::Named(NamedStrike::Tatm), expiry: 5.0, valuation_time: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub n_paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { n_paths: 200_000, steps_per_year: 50, seed: 20240601, antithetic: true }
    }
}

impl McSettings {
    pub fn config(&self, horizon: f64) -> McConfig {
        McConfig {
            n_paths: self.n_paths,
            n_steps: McConfig::steps_for(horizon, self.steps_per_year),
            seed: self.seed,
            antithetic: self.antithetic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSettings {
    pub n_space: usize,
    pub n_time: usize,
    pub scheme: Scheme,
    /// Richardson tolerance in value units.
    pub tol: f64,
}

impl Default for PdeSettings {
    fn default() -> Self {
        Self { n_space: 401, n_time: 400, scheme: Scheme::CrankNicolson, tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "MarketParams::baseline")]
    pub market: MarketParams<f64>,
    #[serde(default = "PolicySpec::baseline")]
    pub policy: PolicySpec<f64>,
    #[serde(default)]
    pub contract: ContractSpec,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub pde: PdeSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond_maturities: Option<BondMaturities<f64>>,
}

fn default_quad_tol() -> f64 {
    1e-10
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            market: MarketParams::baseline(),
            policy: PolicySpec::baseline(),
            contract: ContractSpec::default(),
            quad_tol: default_quad_tol(),
            mc: McSettings::default(),
            pde: PdeSettings::default(),
            bond_maturities: None,
        }
    }
}

impl RunConfig {
    pub fn policy(&self) -> Result<FundingPolicy<f64>> {
        self.policy.resolve(self.market.kappa())
    }

    pub fn strike(&self) -> Result<f64> {
        let tau = self.contract.expiry - self.contract.valuation_time;
        let k = match self.contract.strike {
            StrikeSpec::Value(k) => k,
            StrikeSpec::Named(NamedStrike::Tatm) => {
                tatm_strike(&self.market, &self.policy()?, self.contract.expiry, self.contract.valuation_time)
            }
            StrikeSpec::Named(NamedStrike::Atmrf) => atmrf_strike(&self.market, tau),
            StrikeSpec::Moneyness { moneyness } => moneyness * atmrf_strike(&self.market, tau),
        };
        Ok(k)
    }

    pub fn contract(&self) -> Result<ForwardContract<f64>> {
        ForwardContract::new(self.strike()?, self.contract.expiry, self.contract.valuation_time)
    }

    pub fn pde_grid(&self) -> Result<PdeGrid> {
        let c = self.contract()?;
        Ok(PdeGrid::around(&self.market, &c, self.pde.n_space, self.pde.n_time).with_scheme(self.pde.scheme))
    }

    /// Applies a `key=value` override. Keys: the market keys, `alpha`,
    /// `alpha_s`/`alpha1`/`alpha2`, `strike`, `expiry` (or `T`), `valuation_time`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || value.trim().parse::<f64>().map_err(|_| Error::invalid(key, format!("`{value}` is not a number")));
        match key {
            k if MARKET_KEYS.contains(&k) => self.market = self.market.set(k, num()?)?,
            "alpha" => self.policy = PolicySpec::Linearizing { alpha: num()? },
            "alpha_s" | "alpha1" | "alpha2" => {
                let (mut a_s, mut a1, mut a2) = match self.policy {
                    PolicySpec::Explicit { alpha_s, alpha1, alpha2 } => (alpha_s, alpha1, alpha2),
                    PolicySpec::Linearizing { alpha } => (-self.market.kappa(), alpha, 1.0 - alpha),
                };
                let v = num()?;
                match key {
                    "alpha_s" => a_s = v,
                    "alpha1" => a1 = v,
                    _ => a2 = v,
                }
                self.policy = PolicySpec::Explicit { alpha_s: a_s, alpha1: a1, alpha2: a2 };
            }
            "strike" => self.contract.strike = value.parse()?,
            "expiry" | "T" => self.contract.expiry = num()?,
            "valuation_time" => self.contract.valuation_time = num()?,
            other => return Err(Error::invalid(other, "unknown override key")),
        }
        Ok(())
    }
}
