//! Closed-form and quadrature valuation of the vulnerable forward.
//!
//! Every pricer returns the value split into a terminal part and the put/call
//! recovery integrals
//!
//! ```text
//! IP = ∫₀^𝒯 e^{−r̂_V w} BŜ_P(s, k̃(w), w) dw,   IC = same with BŜ_C,
//! k̃(w) = K e^{−r(𝒯−w)} / (1+κ),
//! v = e^{−r̂_V 𝒯}(s e^{μ̂𝒯} − K) − b̂_V(1+κ)·IP + (b̂_V − b)(1+κ)·IC.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{derive_rates, DerivedRates, FundingPolicy, MarketParams};
use crate::quadrature::{integrate, QuadConfig};
use crate::scalar::Scalar;
use crate::special::{norm_cdf, upsilon0, upsilon_tilde};

/// Relative distance from K★ above which [`price_atmrf`] refuses a strike.
pub const ATMRF_REL_TOL: f64 = 1e-12;

/// Moneyness range in which [`price_approx`] is considered reliable.
pub const APPROX_RANGE: (f64, f64) = (0.85, 1.15);

/// A forward struck at `strike`, expiring at `expiry`, valued at `valuation_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardContract<T> {
    strike: T,
    expiry: T,
    valuation_time: T,
}

impl<T: Scalar> ForwardContract<T> {
    pub fn new(strike: T, expiry: T, valuation_time: T) -> Result<Self> {
        if !(strike > T::zero() && strike.is_finite()) {
            return Err(Error::invalid("strike", format!("{strike} must be positive")));
        }
        if !(valuation_time >= T::zero() && expiry > valuation_time && expiry.is_finite()) {
            return Err(Error::invalid("expiry", format!("need 0 <= t < T, got t={valuation_time}, T={expiry}")));
        }
        Ok(Self { strike, expiry, valuation_time })
    }

    /// Contract valued today (t = 0).
    pub fn spot_start(strike: T, expiry: T) -> Result<Self> {
        Self::new(strike, expiry, T::zero())
    }

    pub fn strike(&self) -> T {
        self.strike
    }

    pub fn expiry(&self) -> T {
        self.expiry
    }

    pub fn valuation_time(&self) -> T {
        self.valuation_time
    }

    /// Time to expiry 𝒯 = T − t.
    pub fn tau(&self) -> T {
        self.expiry - self.valuation_time
    }

    pub fn with_strike(&self, strike: T) -> Result<Self> {
        Self::new(strike, self.expiry, self.valuation_time)
    }

    pub fn with_valuation_time(&self, t: T) -> Result<Self> {
        Self::new(self.strike, self.expiry, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    AtmClosedForm,
    Approx,
    Mc,
    Pde,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Quadrature => "quadrature",
            Method::AtmClosedForm => "atm_closed_form",
            Method::Approx => "approx",
            Method::Mc => "mc",
            Method::Pde => "pde",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Components<T> {
    pub terminal: T,
    pub put_recovery: T,
    pub call_recovery: T,
}

impl<T: Scalar> Components<T> {
    pub fn total(&self) -> T {
        self.terminal + self.put_recovery + self.call_recovery
    }
}

/// Value, its decomposition and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationResult<T> {
    pub value: T,
    pub components: Components<T>,
    pub method: Method,
    /// value / (s 𝒯) in basis points.
    pub bps_per_year: T,
    /// value / s in basis points.
    pub bps_total: T,
    /// Quadrature error estimate in value units, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_estimate: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl<T: Scalar> ValuationResult<T> {
    pub(crate) fn from_components(components: Components<T>, method: Method, s: T, tau: T) -> Self {
        let value = components.total();
        let (bps_per_year, bps_total) = bps(value, s, tau);
        Self {
            value,
            components,
            method,
            bps_per_year,
            bps_total,
            error_estimate: None,
            evaluations: None,
            warnings: Vec::new(),
        }
    }
}

/// (bps per year, bps over the life of the deal) for a value.
pub fn bps<T: Scalar>(value: T, s: T, tau: T) -> (T, T) {
    let total = value / s * T::c(1e4);
    (total / tau, total)
}

fn d1_d2<T: Scalar>(s: T, k: T, tau: T, mu_hat: T, sigma: T) -> (T, T) {
    let vol = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (mu_hat + T::c(0.5) * sigma * sigma) * tau) / vol;
    (d1, d1 - vol)
}

/// Undiscounted call under the pricing measure: s e^{μ̂τ}Φ(d₁) − kΦ(d₂).
pub fn bs_call_qhat<T: Scalar>(s: T, k: T, tau: T, rates: &DerivedRates<T>, sigma: T) -> T {
    if tau <= T::zero() {
        return (s - k).max(T::zero());
    }
    if k <= T::zero() {
        return s * (rates.mu_hat * tau).exp();
    }
    let (d1, d2) = d1_d2(s, k, tau, rates.mu_hat, sigma);
    s * (rates.mu_hat * tau).exp() * norm_cdf(d1) - k * norm_cdf(d2)
}

/// Undiscounted put under the pricing measure: kΦ(−d₂) − s e^{μ̂τ}Φ(−d₁).
pub fn bs_put_qhat<T: Scalar>(s: T, k: T, tau: T, rates: &DerivedRates<T>, sigma: T) -> T {
    if tau <= T::zero() {
        return (k - s).max(T::zero());
    }
    if k <= T::zero() {
        return T::zero();
    }
    let (d1, d2) = d1_d2(s, k, tau, rates.mu_hat, sigma);
    k * norm_cdf(-d2) - s * (rates.mu_hat * tau).exp() * norm_cdf(-d1)
}

/// Default-free forward value s − e^{−r(T−t)}K, used as the close-out amount.
pub fn mtm_risk_free<T: Scalar>(contract: &ForwardContract<T>, s: T, r: T) -> T {
    s - (-r * contract.tau()).exp() * contract.strike
}

/// K★ = (1+κ) s e^{r𝒯}.
pub fn atmrf_strike<T: Scalar>(params: &MarketParams<T>, tau: T) -> T {
    (T::one() + params.kappa()) * params.s() * (params.r() * tau).exp()
}

/// ŝ = s e^{μ̂ τ}.
pub fn risky_stock_forward<T: Scalar>(params: &MarketParams<T>, policy: &FundingPolicy<T>, s: T, tau: T) -> T {
    s * (derive_rates(params, policy).mu_hat * tau).exp()
}

/// K̂ = s e^{μ̂ 𝒯}, the strike that zeroes the terminal component.
pub fn tatm_strike<T: Scalar>(params: &MarketParams<T>, policy: &FundingPolicy<T>, expiry: T, t: T) -> T {
    risky_stock_forward(params, policy, params.s(), expiry - t)
}

fn terminal<T: Scalar>(s: T, k: T, tau: T, d: &DerivedRates<T>) -> T {
    (-d.r_hat_v * tau).exp() * (s * (d.mu_hat * tau).exp() - k)
}

/// Put and call recovery integrals (IP, IC) with their error estimates.
struct RecoveryIntegrals<T> {
    put: T,
    call: T,
    put_err: T,
    call_err: T,
    evals: usize,
}

fn recovery_integrals<T: Scalar>(
    contract: &ForwardContract<T>,
    params: &MarketParams<T>,
    d: &DerivedRates<T>,
    s: T,
    cfg: &QuadConfig,
) -> Result<RecoveryIntegrals<T>> {
    let tau = contract.tau();
    let one_k = T::one() + params.kappa();
    let k = contract.strike;
    let r = params.r();
    let sigma = params.sigma();
    let two = T::c(2.0);
    // w = v² removes the √w behaviour of the option prices at the origin.
    let kernel = |v: T| {
        let w = v * v;
        let strike = k * (-r * (tau - w)).exp() / one_k;
        (two * v * (-d.r_hat_v * w).exp(), strike, w)
    };
    let upper = tau.sqrt();
    let put = integrate(
        |v| {
            let (weight, strike, w) = kernel(v);
            weight * bs_put_qhat(s, strike, w, d, sigma)
        },
        T::zero(),
        upper,
        cfg,
    )?;
    let call = integrate(
        |v| {
            let (weight, strike, w) = kernel(v);
            weight * bs_call_qhat(s, strike, w, d, sigma)
        },
        T::zero(),
        upper,
        cfg,
    )?;
    Ok(RecoveryIntegrals {
        put: put.value,
        call: call.value,
        put_err: put.error,
        call_err: call.error,
        evals: put.evals + call.evals,
    })
}

fn check_policy<T: Scalar>(params: &MarketParams<T>, policy: &FundingPolicy<T>) -> Result<()> {
    policy.require_linearizing(params.kappa())
}

/// Value by numerical integration of the recovery integrals.
pub fn price_general<T: Scalar>(
    contract: &ForwardContract<T>,
    params: &MarketParams<T>,
    policy: &FundingPolicy<T>,
    cfg: &QuadConfig,
) -> Result<ValuationResult<T>> {
    check_policy(params, policy)?;
    let d = derive_rates(params, policy);
    let s = params.s();
    let tau = contract.tau();
    let one_k = T::one() + params.kappa();
    let ints = recovery_integrals(contract, params, &d, s, cfg)?;
    let put_coef = -d.b_hat_v * one_k;
    let call_coef = (d.b_hat_v - d.b) * one_k;
    let comps = Components {
        terminal: terminal(s, contract.strike, tau, &d),
        put_recovery: put_coef * ints.put,
        call_recovery: call_coef * ints.call,
    };
    let mut out = ValuationResult::from_components(comps, Method::Quadrature, s, tau);
    out.error_estimate = Some(put_coef.abs() * ints.put_err + call_coef.abs() * ints.call_err);
    out.evaluations = Some(ints.evals);
    Ok(out)
}

/// Closed form at the ATMRF strike K★ through Υ₀.
pub fn price_atmrf<T: Scalar>(
    contract: &ForwardContract<T>,
    params: &MarketParams<T>,
    policy: &FundingPolicy<T>,
) -> Result<ValuationResult<T>> {
    check_policy(params, policy)?;
    let tau = contract.tau();
    let k_star = atmrf_strike(params, tau);
    let gap = (contract.strike / k_star - T::one()).abs();
    if !(gap <= T::c(ATMRF_REL_TOL)) {
        return Err(Error::NotAtmrf {
            strike: contract.strike.to_f64().unwrap_or(f64::NAN),
            k_star: k_star.to_f64().unwrap_or(f64::NAN),
            gap: gap.to_f64().unwrap_or(f64::NAN),
        });
    }
    let d = derive_rates(params, policy);
    let s = params.s();
    let one_k = T::one() + params.kappa();
    let x_mu = d.r_hat_v - d.mu_hat;
    let ip = upsilon0(tau, d.b_hat_v, -d.nu2) - upsilon0(tau, x_mu, -d.nu1);
    let ic = upsilon0(tau, x_mu, d.nu1) - upsilon0(tau, d.b_hat_v, d.nu2);
    let comps = Components {
        terminal: terminal(s, contract.strike, tau, &d),
        put_recovery: -s * d.b_hat_v * one_k * ip,
        call_recovery: s * (d.b_hat_v - d.b) * one_k * ic,
    };
    Ok(ValuationResult::from_components(comps, Method::AtmClosedForm, s, tau))
}

/// Second-order expansion in the normalized log-moneyness m̄ = ln(K/K★)/σ.
///
/// The terminal part is exact; only the recovery integrals are expanded. A
/// warning is attached when m = K/K★ leaves [`APPROX_RANGE`].
pub fn price_approx<T: Scalar>(
    contract: &ForwardContract<T>,
    params: &MarketParams<T>,
    policy: &FundingPolicy<T>,
) -> Result<ValuationResult<T>> {
    check_policy(params, policy)?;
    let tau = contract.tau();
    let d = derive_rates(params, policy);
    let s = params.s();
    let one_k = T::one() + params.kappa();
    let m = contract.strike / atmrf_strike(params, tau);
    let mbar = m.ln() / params.sigma();
    let x_mu = d.r_hat_v - d.mu_hat;
    let ip = m * upsilon_tilde(tau, d.b_hat_v, -d.nu2, mbar) - upsilon_tilde(tau, x_mu, -d.nu1, mbar);
    let ic = upsilon_tilde(tau, x_mu, d.nu1, -mbar) - m * upsilon_tilde(tau, d.b_hat_v, d.nu2, -mbar);
    let comps = Components {
        terminal: terminal(s, contract.strike, tau, &d),
        put_recovery: -s * d.b_hat_v * one_k * ip,
        call_recovery: s * (d.b_hat_v - d.b) * one_k * ic,
    };
    let mut out = ValuationResult::from_components(comps, Method::Approx, s, tau);
    let (lo, hi) = APPROX_RANGE;
    if m < T::c(lo) || m > T::c(hi) {
        out.warnings.push(format!("moneyness {m:.4} outside validated range [{lo}, {hi}]"));
    }
    Ok(out)
}

/// Pre-default value to the counterparty holding the opposite side.
///
/// Components: terminal is the negated dealer terminal value, `put_recovery`
/// is (b̂_V − b)(1+κ)·IP and `call_recovery` is −b̂_V(1+κ)·IC.
pub fn price_client<T: Scalar>(
    contract: &ForwardContract<T>,
    params: &MarketParams<T>,
    policy: &FundingPolicy<T>,
    cfg: &QuadConfig,
) -> Result<ValuationResult<T>> {
    check_policy(params, policy)?;
    let d = derive_rates(params, policy);
    let s = params.s();
    let tau = contract.tau();
    let one_k = T::one() + params.kappa();
    let ints = recovery_integrals(contract, params, &d, s, cfg)?;
    let put_coef = (d.b_hat_v - d.b) * one_k;
    let call_coef = -d.b_hat_v * one_k;
    let comps = Components {
        terminal: -terminal(s, contract.strike, tau, &d),
        put_recovery: put_coef * ints.put,
        call_recovery: call_coef * ints.call,
    };
    let mut out = ValuationResult::from_components(comps, Method::Quadrature, s, tau);
    out.error_estimate = Some(put_coef.abs() * ints.put_err + call_coef.abs() * ints.call_err);
    out.evaluations = Some(ints.evals);
    Ok(out)
}

/// Interval [v, −ν] of prices admitting no riskless profit for either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceBand<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> PriceBand<T> {
    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

pub fn no_arbitrage_band<T: Scalar>(
    contract: &ForwardContract<T>,
    params: &MarketParams<T>,
    policy: &FundingPolicy<T>,
    cfg: &QuadConfig,
) -> Result<PriceBand<T>> {
    let v = price_general(contract, params, policy, cfg)?;
    let nu = price_client(contract, params, policy, cfg)?;
    Ok(PriceBand { lower: v.value, upper: -nu.value })
}

/// Asset positions replicating the short claim before default.
///
/// `*_total` is θ + ϑ for each asset; the outright part is α·total and the
/// rest is financed by repo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgeSnapshot<T> {
    pub v: T,
    pub v_s: T,
    pub stock_total: T,
    pub stock_outright: T,
    pub stock_repo: T,
    pub bond1_total: T,
    pub bond1_outright: T,
    pub bond1_repo: T,
    pub bond2_total: T,
    pub bond2_outright: T,
    pub bond2_repo: T,
    pub bond1_price: T,
    pub bond2_price: T,
    pub cash_balance: T,
    pub deposit_units: T,
    pub funding_units: T,
    /// v + Π, which the hedging condition sets to zero.
    pub residual: T,
}

/// Bond maturities; both default to the contract expiry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondMaturities<T> {
    pub t1: T,
    pub t2: T,
}

/// Hedge units at spot `s_now` and time `t_now` (pre-default).
///
/// v_s is a central difference of [`price_general`] with a bump of 1e−5·s.
pub fn hedge_units<T: Scalar>(
    contract: &ForwardContract<T>,
    params: &MarketParams<T>,
    policy: &FundingPolicy<T>,
    s_now: T,
    t_now: T,
    bonds: Option<BondMaturities<T>>,
    cfg: &QuadConfig,
) -> Result<HedgeSnapshot<T>> {
    let c = contract.with_valuation_time(t_now)?;
    let at = |s: T| -> Result<T> { Ok(price_general(&c, &params.set("s", s)?, policy, cfg)?.value) };
    let v = at(s_now)?;
    let h = s_now * T::c(1e-5);
    let v_s = (at(s_now + h)? - at(s_now - h)?) / (T::c(2.0) * h);

    let kappa = params.kappa();
    let bonds = bonds.unwrap_or(BondMaturities { t1: contract.expiry(), t2: contract.expiry() });
    let bond_price = |ri: T, ti: T| (-ri * ti).exp() * (ri * t_now).exp();
    let p1 = bond_price(params.r1(), bonds.t1);
    let p2 = bond_price(params.r2(), bonds.t2);

    let z_jump = mtm_risk_free(&c, (T::one() + kappa) * s_now, params.r());
    let gap = z_jump - v - v_s * kappa * s_now;
    let stock_total = -v_s;
    let bond1_total = gap / p1;
    let bond2_total = gap / p2;
    let stock_outright = policy.alpha_s() * stock_total;
    let bond1_outright = policy.alpha1() * bond1_total;
    let bond2_outright = policy.alpha2() * bond2_total;

    let cash = -v - stock_outright * s_now - bond1_outright * p1 - bond2_outright * p2;
    let b_t = (params.r() * t_now).exp();
    let f_t = (params.f() * t_now).exp();
    let deposit_units = cash.max(T::zero()) / b_t;
    let funding_units = cash.min(T::zero()) / f_t;
    let portfolio =
        stock_outright * s_now + bond1_outright * p1 + bond2_outright * p2 + deposit_units * b_t + funding_units * f_t;

    Ok(HedgeSnapshot {
        v,
        v_s,
        stock_total,
        stock_outright,
        stock_repo: stock_total - stock_outright,
        bond1_total,
        bond1_outright,
        bond1_repo: bond1_total - bond1_outright,
        bond2_total,
        bond2_outright,
        bond2_repo: bond2_total - bond2_outright,
        bond1_price: p1,
        bond2_price: p2,
        cash_balance: cash,
        deposit_units,
        funding_units,
        residual: v + portfolio,
    })
}
