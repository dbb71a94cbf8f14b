//! Comparative statics: single-parameter sweeps and two-parameter grids of
//! the forward value in yearly basis points of notional.
//!
//! Under constant terminal moneyness (CTM) the TATM strike K̂ = s e^{μ̂𝒯} is
//! recomputed at every point; under constant terminal strike (CTS) it is
//! frozen at the base parameters.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{price_general, ForwardContract, ValuationResult};
pub use crate::analytic::{risky_stock_forward, tatm_strike};
use crate::error::{Error, Result};
use crate::market::{MarketParams, PolicySpec, MARKET_KEYS};
use crate::quadrature::QuadConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ctm,
    Cts,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ctm" => Ok(Mode::Ctm),
            "cts" => Ok(Mode::Cts),
            other => Err(Error::invalid("mode", format!("`{other}` is neither ctm nor cts"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    BpsPerYear,
    Raw,
}

/// Names that can be swept besides the market keys: `alpha`, `T` (expiry),
/// and `h_i` / `r_i` which move both bond repo or bond return rates together.
pub const EXTRA_KEYS: [&str; 4] = ["alpha", "T", "h_i", "r_i"];

pub fn is_sweepable(name: &str) -> bool {
    MARKET_KEYS.contains(&name) || EXTRA_KEYS.contains(&name)
}

/// Base point of a sweep: market, policy and expiry (valuation at t = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBase {
    pub params: MarketParams<f64>,
    pub policy: PolicySpec<f64>,
    pub expiry: f64,
}

impl SweepBase {
    /// Baseline market, α = 0.5, five-year expiry.
    pub fn baseline() -> Self {
        Self { params: MarketParams::baseline(), policy: PolicySpec::baseline(), expiry: 5.0 }
    }

    /// Returns a copy with `name` set to `value`.
    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = *self;
        match name {
            "alpha" => {
                out.policy = match self.policy {
                    PolicySpec::Linearizing { .. } => PolicySpec::Linearizing { alpha: value },
                    PolicySpec::Explicit { alpha_s, .. } => {
                        PolicySpec::Explicit { alpha_s, alpha1: value, alpha2: 1.0 - value }
                    }
                }
            }
            "T" => {
                if !(value > 0.0) {
                    return Err(Error::invalid("T", "expiry must be positive"));
                }
                out.expiry = value;
            }
            "h_i" => out.params = self.params.set("h1", value)?.set("h2", value)?,
            "r_i" => out.params = self.params.set("r1", value)?.set("r2", value)?,
            _ => out.params = self.params.set(name, value)?,
        }
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "alpha" => match self.policy {
                PolicySpec::Linearizing { alpha } => Some(alpha),
                PolicySpec::Explicit { alpha1, .. } => Some(alpha1),
            },
            "T" => Some(self.expiry),
            "h_i" => Some(self.params.h1()),
            "r_i" => Some(self.params.r1()),
            other => self.params.get(other),
        }
    }

    /// K̂ at this base point.
    pub fn tatm(&self) -> Result<f64> {
        let policy = self.policy.resolve(self.params.kappa())?;
        Ok(tatm_strike(&self.params, &policy, self.expiry, 0.0))
    }
}

/// One swept axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: String,
    pub grid: Vec<f64>,
    pub mode: Mode,
    #[serde(default)]
    pub metric: Metric,
}

impl SweepSpec {
    pub fn new(param: &str, grid: Vec<f64>, mode: Mode) -> Result<Self> {
        let spec = Self { param: param.to_owned(), grid, mode, metric: Metric::BpsPerYear };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !is_sweepable(&self.param) {
            return Err(Error::invalid(&self.param, "not a sweepable parameter"));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidGrid(format!("empty grid for `{}`", self.param)));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("grid values must be finite".into()));
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::InvalidGrid(format!("grid for `{}` is not strictly monotone", self.param)));
        }
        Ok(())
    }
}

/// Joint CTM grid over two distinct parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: SweepSpec,
    pub y: SweepSpec,
}

impl GridSpec {
    pub fn new(x: SweepSpec, y: SweepSpec) -> Result<Self> {
        let g = Self { x, y };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        if self.x.param == self.y.param {
            return Err(Error::InvalidGrid(format!("both axes sweep `{}`", self.x.param)));
        }
        if self.x.mode != Mode::Ctm || self.y.mode != Mode::Ctm {
            return Err(Error::InvalidGrid("joint grids use constant terminal moneyness only".into()));
        }
        Ok(())
    }
}

/// `lo:hi:n` → n evenly spaced points including both ends.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::InvalidGrid(format!("`{text}` is not lo:hi:n"));
    let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    linspace(lo, hi, n)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::InvalidGrid("grid needs at least one point".into())),
        1 => Ok(vec![lo]),
        _ => Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()),
    }
}

/// Sensitivity range of each parameter in the numerical study.
pub fn default_range(param: &str) -> Option<(f64, f64)> {
    let r = match param {
        "T" => (1.0, 30.0),
        "q" => (0.0, 0.15),
        "sigma" => (0.05, 0.80),
        "r" => (-0.03, 0.15),
        "f" | "h_s" | "h1" | "h2" | "h_i" | "r1" | "r2" | "r_i" => (0.0, 0.15),
        "kappa" => (-0.30, 0.0),
        "alpha" => (0.0, 1.0),
        _ => return None,
    };
    Some(r)
}

pub const DEFAULT_POINTS: usize = 61;

/// 61 points over the default range; the base value is snapped onto the grid
/// when within 1e−12 of a point and inserted otherwise.
pub fn default_grid(param: &str, base: &SweepBase) -> Result<Vec<f64>> {
    let (lo, hi) = default_range(param).ok_or_else(|| Error::invalid(param, "no default sweep range"))?;
    let mut grid = linspace(lo, hi, DEFAULT_POINTS)?;
    if let Some(b) = base.get(param) {
        if let Some(p) = grid.iter_mut().find(|p| (**p - b).abs() <= 1e-12) {
            *p = b;
        } else if (lo..=hi).contains(&b) {
            let at = grid.partition_point(|&p| p < b);
            grid.insert(at, b);
        }
    }
    Ok(grid)
}

/// One priced point of a sweep or grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub strike: f64,
    /// 1e4 / (s 𝒯): converts value units to bps per year.
    pub bps_scale: f64,
    pub result: Option<ValuationResult<f64>>,
    pub violations: Vec<String>,
    /// `ok` or the failure message.
    pub status: String,
}

impl SweepRow {
    pub fn bps_per_year(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.bps_per_year)
    }
}

fn price_point(point: &SweepBase, strike: f64, x: f64, y: Option<f64>) -> SweepRow {
    let violations: Vec<String> = point.params.no_arbitrage_violations().iter().map(|v| v.constraint()).collect();
    let priced = (|| {
        let policy = point.policy.resolve(point.params.kappa())?;
        let contract = ForwardContract::spot_start(strike, point.expiry)?;
        price_general(&contract, &point.params, &policy, &QuadConfig::default())
    })();
    let bps_scale = 1e4 / (point.params.s() * point.expiry);
    let (result, status) = match priced {
        Ok(r) => (Some(r), "ok".to_owned()),
        Err(e) => (None, format!("failed: {e}")),
    };
    SweepRow { x, y, strike, bps_scale, result, violations, status }
}

fn evaluate(base: &SweepBase, frozen: Option<f64>, sets: &[(&str, f64)], x: f64, y: Option<f64>) -> SweepRow {
    let point = sets.iter().try_fold(*base, |b, (name, v)| b.with(name, *v));
    match point {
        Ok(point) => {
            let strike = match frozen {
                Some(k) => Ok(k),
                None => point.tatm(),
            };
            match strike {
                Ok(k) => price_point(&point, k, x, y),
                Err(e) => failed_row(x, y, &e),
            }
        }
        Err(e) => failed_row(x, y, &e),
    }
}

fn failed_row(x: f64, y: Option<f64>, e: &Error) -> SweepRow {
    SweepRow {
        x,
        y,
        strike: f64::NAN,
        bps_scale: f64::NAN,
        result: None,
        violations: Vec::new(),
        status: format!("failed: {e}"),
    }
}

/// Prices every grid point; failures are recorded per row.
pub fn run_sweep(spec: &SweepSpec, base: &SweepBase) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let frozen = match spec.mode {
        Mode::Ctm => None,
        Mode::Cts => Some(base.tatm()?),
    };
    Ok(spec.grid.par_iter().map(|&x| evaluate(base, frozen, &[(&spec.param, x)], x, None)).collect())
}

/// Row-major result of [`run_grid`]: `rows[i * ny + j]` is (x[i], y[j]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl GridResult {
    /// bps per year as a matrix indexed `[x][y]`, NaN for failed cells.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows
            .chunks(self.y.len())
            .map(|row| row.iter().map(|r| r.bps_per_year().unwrap_or(f64::NAN)).collect())
            .collect()
    }
}

pub fn run_grid(spec: &GridSpec, base: &SweepBase) -> Result<GridResult> {
    spec.validate()?;
    let cells: Vec<(f64, f64)> = spec.x.grid.iter().flat_map(|&x| spec.y.grid.iter().map(move |&y| (x, y))).collect();
    let rows = cells
        .par_iter()
        .map(|&(x, y)| evaluate(base, None, &[(&spec.x.param, x), (&spec.y.param, y)], x, Some(y)))
        .collect();
    Ok(GridResult { x: spec.x.grid.clone(), y: spec.y.grid.clone(), rows })
}

/// C-style `%.12g`.
pub fn format_g12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    const P: i32 = 12;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes sweep or grid rows as CSV. Component columns use the same unit as
/// the value column (bps per year, or raw value units).
pub fn write_csv<W: Write>(rows: &[SweepRow], param: &str, param2: Option<&str>, metric: Metric, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![param.to_owned()];
    if let Some(p2) = param2 {
        header.push(p2.to_owned());
    }
    let names = match metric {
        Metric::BpsPerYear => ["value_bps_per_year", "terminal_bps", "put_recovery_bps", "call_recovery_bps"],
        Metric::Raw => ["value", "terminal", "put_recovery", "call_recovery"],
    };
    header.extend(names.iter().map(|s| s.to_string()));
    header.push("no_arb_violations".into());
    header.push("status".into());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![format_g12(row.x)];
        if param2.is_some() {
            rec.push(row.y.map(format_g12).unwrap_or_default());
        }
        match &row.result {
            Some(r) => {
                let scale = match metric {
                    Metric::BpsPerYear => row.bps_scale,
                    Metric::Raw => 1.0,
                };
                let c = &r.components;
                for v in [r.value, c.terminal, c.put_recovery, c.call_recovery] {
                    rec.push(format_g12(v * scale));
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        rec.push(row.violations.join(";"));
        rec.push(row.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
