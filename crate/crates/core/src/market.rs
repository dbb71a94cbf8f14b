//! Exogenous market inputs, funding policies and the rates derived from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Names accepted by [`MarketParams::set`] and the JSON `market` object.
pub const MARKET_KEYS: [&str; 14] =
    ["s", "r", "f", "q", "sigma", "h_s", "h1", "h2", "r1", "r2", "lambda1", "lambda2", "kappa", "mu"];

/// Raw, unvalidated market inputs as they appear in configuration files.
///
/// `mu` is optional and defaults to `r`; it only drives the physical-measure
/// simulator and the stock–default correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketInput<T> {
    pub s: T,
    pub r: T,
    pub f: T,
    pub q: T,
    pub sigma: T,
    pub h_s: T,
    pub h1: T,
    pub h2: T,
    pub r1: T,
    pub r2: T,
    pub lambda1: T,
    pub lambda2: T,
    pub kappa: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<T>,
}

/// Validated market parameters.
///
/// Construction rejects non-positive `s`/`sigma`, negative intensities and
/// `kappa` outside `(-1, 0]`. Arbitrage constraints are *not* enforced here;
/// see [`MarketParams::no_arbitrage_violations`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketInput<T>", into = "MarketInput<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct MarketParams<T: Scalar> {
    s: T,
    r: T,
    f: T,
    q: T,
    sigma: T,
    h_s: T,
    h1: T,
    h2: T,
    r1: T,
    r2: T,
    lambda1: T,
    lambda2: T,
    kappa: T,
    mu: T,
    recovery1: T,
    recovery2: T,
}

macro_rules! getters {
    ($($name:ident),*) => {
        $(
            #[inline]
            pub fn $name(&self) -> T {
                self.$name
            }
        )*
    };
}

impl<T: Scalar> MarketParams<T> {
    getters!(s, r, f, q, sigma, h_s, h1, h2, r1, r2, lambda1, lambda2, kappa, mu, recovery1, recovery2);

    /// The baseline used throughout the numerical study: s = 1, q = 5.5%,
    /// σ = 30%, r = 4%, f = 6%, h_S = 5%, hᵢ = 5.5%, rᵢ = 7%, κ = 0.
    ///
    /// No intensities are tabulated for the baseline; 1% each is used.
    pub fn baseline() -> Self {
        let c = T::c;
        Self::try_from(MarketInput {
            s: c(1.0),
            r: c(0.04),
            f: c(0.06),
            q: c(0.055),
            sigma: c(0.30),
            h_s: c(0.05),
            h1: c(0.055),
            h2: c(0.055),
            r1: c(0.07),
            r2: c(0.07),
            lambda1: c(0.01),
            lambda2: c(0.01),
            kappa: c(0.0),
            mu: None,
        })
        .expect("baseline parameters are valid")
    }

    pub fn to_input(&self) -> MarketInput<T> {
        MarketInput {
            s: self.s,
            r: self.r,
            f: self.f,
            q: self.q,
            sigma: self.sigma,
            h_s: self.h_s,
            h1: self.h1,
            h2: self.h2,
            r1: self.r1,
            r2: self.r2,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            kappa: self.kappa,
            mu: Some(self.mu),
        }
    }

    /// Reads a parameter by its configuration key.
    pub fn get(&self, name: &str) -> Option<T> {
        let v = match name {
            "s" => self.s,
            "r" => self.r,
            "f" => self.f,
            "q" => self.q,
            "sigma" => self.sigma,
            "h_s" => self.h_s,
            "h1" => self.h1,
            "h2" => self.h2,
            "r1" => self.r1,
            "r2" => self.r2,
            "lambda1" => self.lambda1,
            "lambda2" => self.lambda2,
            "kappa" => self.kappa,
            "mu" => self.mu,
            _ => return None,
        };
        Some(v)
    }

    /// Returns a copy with one parameter replaced, re-validated.
    pub fn set(&self, name: &str, value: T) -> Result<Self> {
        let mut input = self.to_input();
        let slot = match name {
            "s" => &mut input.s,
            "r" => &mut input.r,
            "f" => &mut input.f,
            "q" => &mut input.q,
            "sigma" => &mut input.sigma,
            "h_s" => &mut input.h_s,
            "h1" => &mut input.h1,
            "h2" => &mut input.h2,
            "r1" => &mut input.r1,
            "r2" => &mut input.r2,
            "lambda1" => &mut input.lambda1,
            "lambda2" => &mut input.lambda2,
            "kappa" => &mut input.kappa,
            "mu" => {
                input.mu = Some(value);
                return Self::try_from(input);
            }
            other => return Err(Error::invalid(other, "unknown market parameter")),
        };
        *slot = value;
        Self::try_from(input)
    }

    /// Every breached inequality among r ≤ h ≤ f (h ∈ {h_S, h₁, h₂}) and hᵢ < rᵢ.
    ///
    /// NaN inputs fail every comparison and are therefore reported.
    pub fn no_arbitrage_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, lhs: &'static str, op: &'static str, rhs: &'static str, a: T, b: T| {
            if !ok {
                out.push(Violation {
                    lhs,
                    op,
                    rhs,
                    lhs_value: a.to_f64().unwrap_or(f64::NAN),
                    rhs_value: b.to_f64().unwrap_or(f64::NAN),
                });
            }
        };
        for (name, h) in [("h_s", self.h_s), ("h1", self.h1), ("h2", self.h2)] {
            check(self.r <= h, "r", "<=", name, self.r, h);
            check(h <= self.f, name, "<=", "f", h, self.f);
        }
        check(self.h1 < self.r1, "h1", "<", "r1", self.h1, self.r1);
        check(self.h2 < self.r2, "h2", "<", "r2", self.h2, self.r2);
        out
    }
}

impl<T: Scalar> TryFrom<MarketInput<T>> for MarketParams<T> {
    type Error = Error;

    fn try_from(m: MarketInput<T>) -> Result<Self> {
        let all = [
            ("s", m.s),
            ("r", m.r),
            ("f", m.f),
            ("q", m.q),
            ("sigma", m.sigma),
            ("h_s", m.h_s),
            ("h1", m.h1),
            ("h2", m.h2),
            ("r1", m.r1),
            ("r2", m.r2),
            ("lambda1", m.lambda1),
            ("lambda2", m.lambda2),
            ("kappa", m.kappa),
        ];
        if let Some((name, _)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(name, "must be finite"));
        }
        if m.s <= T::zero() {
            return Err(Error::invalid("s", "must be positive"));
        }
        if m.sigma <= T::zero() {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        if m.lambda1 < T::zero() {
            return Err(Error::invalid("lambda1", "must be nonnegative"));
        }
        if m.lambda2 < T::zero() {
            return Err(Error::invalid("lambda2", "must be nonnegative"));
        }
        if !(m.kappa > -T::one() && m.kappa <= T::zero()) {
            return Err(Error::invalid("kappa", format!("{} outside (-1, 0]", m.kappa)));
        }
        let mu = m.mu.unwrap_or(m.r);
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        Ok(Self {
            s: m.s,
            r: m.r,
            f: m.f,
            q: m.q,
            sigma: m.sigma,
            h_s: m.h_s,
            h1: m.h1,
            h2: m.h2,
            r1: m.r1,
            r2: m.r2,
            lambda1: m.lambda1,
            lambda2: m.lambda2,
            kappa: m.kappa,
            mu,
            recovery1: T::one(),
            recovery2: T::one(),
        })
    }
}

impl<T: Scalar> From<MarketParams<T>> for MarketInput<T> {
    fn from(p: MarketParams<T>) -> Self {
        p.to_input()
    }
}

/// One breached no-arbitrage inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub lhs: &'static str,
    pub op: &'static str,
    pub rhs: &'static str,
    pub lhs_value: f64,
    pub rhs_value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} ({}={}, {}={})",
            self.lhs, self.op, self.rhs, self.lhs, self.lhs_value, self.rhs, self.rhs_value
        )
    }
}

impl Violation {
    /// Short form such as `h1 < r1`.
    pub fn constraint(&self) -> String {
        format!("{} {} {}", self.lhs, self.op, self.rhs)
    }
}

/// Free-function form of [`MarketParams::no_arbitrage_violations`].
pub fn validate_no_arbitrage<T: Scalar>(params: &MarketParams<T>) -> Vec<Violation> {
    params.no_arbitrage_violations()
}

/// Fractions of stock and bond positions financed through the bank accounts
/// rather than repo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundingPolicy<T> {
    alpha_s: T,
    alpha1: T,
    alpha2: T,
}

impl<T: Scalar> FundingPolicy<T> {
    /// Explicit triple, each component in `[0, 1]`.
    pub fn new(alpha_s: T, alpha1: T, alpha2: T) -> Result<Self> {
        for (name, v) in [("alpha_s", alpha_s), ("alpha1", alpha1), ("alpha2", alpha2)] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::invalid(name, format!("{v} outside [0, 1]")));
            }
        }
        Ok(Self { alpha_s, alpha1, alpha2 })
    }

    /// α₁ = α, α₂ = 1 − α, α_S = −κ.
    pub fn linearizing(alpha: T, kappa: T) -> Result<Self> {
        Self::new(-kappa, alpha, T::one() - alpha)
    }

    pub fn alpha_s(&self) -> T {
        self.alpha_s
    }

    pub fn alpha1(&self) -> T {
        self.alpha1
    }

    pub fn alpha2(&self) -> T {
        self.alpha2
    }

    /// Whether this policy linearizes the pricing equation for jump size `kappa`.
    pub fn is_linearizing(&self, kappa: T) -> bool {
        let tol = T::c(1e-12).max(T::epsilon() * T::c(4.0));
        (self.alpha_s + kappa).abs() <= tol && (self.alpha1 + self.alpha2 - T::one()).abs() <= tol
    }

    pub(crate) fn require_linearizing(&self, kappa: T) -> Result<()> {
        if self.is_linearizing(kappa) {
            Ok(())
        } else {
            Err(Error::NonLinearizingPolicy { expected_alpha_s: (-kappa).to_f64().unwrap_or(f64::NAN) })
        }
    }
}

/// How a funding policy is specified in configuration: a single `alpha`
/// (linearizing, tracks κ) or an explicit triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PolicySpec<T> {
    Linearizing { alpha: T },
    Explicit { alpha_s: T, alpha1: T, alpha2: T },
}

impl<T: Scalar> PolicySpec<T> {
    pub fn baseline() -> Self {
        PolicySpec::Linearizing { alpha: T::c(0.5) }
    }

    pub fn resolve(&self, kappa: T) -> Result<FundingPolicy<T>> {
        match *self {
            PolicySpec::Linearizing { alpha } => FundingPolicy::linearizing(alpha, kappa),
            PolicySpec::Explicit { alpha_s, alpha1, alpha2 } => FundingPolicy::new(alpha_s, alpha1, alpha2),
        }
    }
}

/// Rates derived from market inputs under a funding policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedRates<T> {
    pub r_hat_s: T,
    pub b_hat_1: T,
    pub b_hat_2: T,
    pub r_hat_v: T,
    pub b_hat_v: T,
    pub b: T,
    pub mu_hat: T,
    pub nu1: T,
    pub nu2: T,
    pub c1: T,
    pub c2: T,
}

/// Computes r̂_S, b̂ᵢ, r̂_V, b̂_V, b, μ̂ = r̂_S − κ b̂_V and ν₁, ν₂.
pub fn derive_rates<T: Scalar>(p: &MarketParams<T>, policy: &FundingPolicy<T>) -> DerivedRates<T> {
    let one = T::one();
    let r = p.r;
    let r_hat_s = policy.alpha_s * r + (one - policy.alpha_s) * p.h_s - p.q;
    let b_hat_1 = policy.alpha1 * r + (one - policy.alpha1) * p.h1 - p.r1;
    let b_hat_2 = policy.alpha2 * r + (one - policy.alpha2) * p.h2 - p.r2;
    let b_hat_v = -(b_hat_1 + b_hat_2);
    let r_hat_v = r + b_hat_v;
    let mu_hat = r_hat_s - p.kappa * b_hat_v;
    let sigma = p.sigma;
    let nu1 = (mu_hat - r + sigma * sigma * T::c(0.5)) / sigma;
    let nu2 = nu1 - sigma;
    let two = T::c(2.0);
    DerivedRates {
        r_hat_s,
        b_hat_1,
        b_hat_2,
        r_hat_v,
        b_hat_v,
        b: p.f - r,
        mu_hat,
        nu1,
        nu2,
        c1: two * (r_hat_v - mu_hat) + nu1 * nu1,
        c2: two * b_hat_v + nu2 * nu2,
    }
}

/// Closed-form correlation between S_t and the first-default indicator J_t
/// under the physical measure.
///
/// Returns 0 when J_t is degenerate (t = 0 or no default intensity).
pub fn stock_default_correlation<T: Scalar>(p: &MarketParams<T>, t: T) -> T {
    let lambda = p.lambda1 + p.lambda2;
    if t <= T::zero() || lambda <= T::zero() || p.kappa == T::zero() {
        return T::zero();
    }
    let one = T::one();
    let two = T::c(2.0);
    let pj = -(-lambda * t).exp_m1();
    let k = p.kappa;
    let d = (p.sigma * p.sigma * t).exp() * (one + k * pj * (two + k)) - (one + k * pj * (two + k * pj));
    k * (pj * (one - pj) / d).sqrt()
}
