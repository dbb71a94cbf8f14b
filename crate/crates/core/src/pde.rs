//! Finite-difference oracle for the linearized pre-default pricing equation.
//!
//! In x = ln s and time-to-expiry τ the equation reads
//!
//! ```text
//! u_τ = ½σ² u_xx + (μ̂ − ½σ²) u_x − r̂_V u + b̂_V z − b·max(z, 0),
//! z(τ, x) = (1+κ)eˣ − e^{−rτ}K,   u(0, x) = eˣ − K.
//! ```
//!
//! Far from the close-out kink the source is linear in s and the equation has
//! an exact solution A(τ)s + C(τ), which supplies the Dirichlet data.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::{atmrf_strike, ForwardContract};
use crate::error::{Error, Result};
use crate::market::{derive_rates, FundingPolicy, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Crank–Nicolson after two implicit half-steps.
    CrankNicolson,
    Implicit,
}

/// Log-price grid and time stepping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of space nodes, boundaries included.
    pub n_space: usize,
    pub n_time: usize,
    pub scheme: Scheme,
}

/// Half-width of the default domain in standard deviations.
pub const DOMAIN_STDS: f64 = 6.0;

impl PdeGrid {
    /// ±6σ√𝒯 around ln K★ with Crank–Nicolson.
    pub fn around(params: &MarketParams<f64>, contract: &ForwardContract<f64>, n_space: usize, n_time: usize) -> Self {
        let tau = contract.tau();
        let centre = atmrf_strike(params, tau).ln();
        let half = DOMAIN_STDS * params.sigma() * tau.sqrt();
        Self { x_min: centre - half, x_max: centre + half, n_space, n_time, scheme: Scheme::CrankNicolson }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    /// Same domain with both resolutions halved.
    pub fn coarsened(&self) -> Self {
        Self { n_space: (self.n_space - 1) / 2 + 1, n_time: (self.n_time / 2).max(1), ..*self }
    }

    fn validate(&self, x0: f64) -> Result<()> {
        if self.n_space < 3 {
            return Err(Error::InvalidGrid(format!("n_space = {} < 3", self.n_space)));
        }
        if self.n_time < 1 {
            return Err(Error::InvalidGrid("n_time must be positive".into()));
        }
        if !(self.x_min < x0 && x0 < self.x_max) {
            return Err(Error::InvalidGrid(format!("ln s = {x0} outside [{}, {}]", self.x_min, self.x_max)));
        }
        Ok(())
    }
}

/// u_τ = ½σ²u_xx + drift·u_x − rate·u + source(τ, x) on [x_min, x_max] with
/// Dirichlet data and initial condition `initial(x)`.
pub struct LinearCauchyProblem<'a> {
    pub sigma: f64,
    pub drift: f64,
    pub rate: f64,
    pub horizon: f64,
    pub initial: Box<dyn Fn(f64) -> f64 + 'a>,
    pub source: Box<dyn Fn(f64, f64) -> f64 + 'a>,
    pub lower: Box<dyn Fn(f64) -> f64 + 'a>,
    pub upper: Box<dyn Fn(f64) -> f64 + 'a>,
}

/// Values on every (τ, x) node.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub x: Vec<f64>,
    pub tau: Vec<f64>,
    /// `values[n][j]` at `tau[n]`, `x[j]`.
    pub values: Vec<Vec<f64>>,
}

impl Surface {
    /// Cubic Lagrange interpolation at the final time level.
    pub fn interpolate(&self, x: f64) -> f64 {
        let last = self.values.last().expect("at least the initial level");
        cubic(&self.x, last, x)
    }

    /// Writes `t, s, v` rows with t = expiry − τ and s = eˣ.
    pub fn write_csv<W: Write>(&self, expiry: f64, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "s", "v"])?;
        for (tau, row) in self.tau.iter().zip(&self.values) {
            for (x, v) in self.x.iter().zip(row) {
                w.write_record([fmt12(expiry - tau), fmt12(x.exp()), fmt12(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Twelve significant digits, as used by all CSV output.
pub fn fmt12(v: f64) -> String {
    crate::sensitivity::format_g12(v)
}

fn cubic(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let h = xs[1] - xs[0];
    let j = (((x - xs[0]) / h).floor() as isize).clamp(1, n as isize - 3) as usize;
    let idx = [j - 1, j, j + 1, j + 2];
    idx.iter()
        .map(|&i| {
            let basis: f64 = idx.iter().filter(|&&m| m != i).map(|&m| (x - xs[m]) / (xs[i] - xs[m])).product();
            basis * ys[i]
        })
        .sum()
}

/// Solves a·u_{j−1} + b·u_j + c·u_{j+1} = d in place (Thomas algorithm).
fn thomas(a: f64, b: f64, c: f64, d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    scratch[0] = c / b;
    d[0] /= b;
    for i in 1..n {
        let m = b - a * scratch[i - 1];
        scratch[i] = c / m;
        d[i] = (d[i] - a * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

/// Time-steps a [`LinearCauchyProblem`] on a uniform grid.
pub fn solve_cauchy(problem: &LinearCauchyProblem<'_>, grid: &PdeGrid) -> Result<Surface> {
    if grid.n_space < 3 || grid.n_time < 1 || !(grid.x_min < grid.x_max) {
        return Err(Error::InvalidGrid(format!("{grid:?}")));
    }
    let n = grid.n_space;
    let h = (grid.x_max - grid.x_min) / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|j| grid.x_min + j as f64 * h).collect();
    let half_var = 0.5 * problem.sigma * problem.sigma;
    // L u_j = lo·u_{j−1} + mid·u_j + up·u_{j+1}
    let lo = half_var / (h * h) - problem.drift / (2.0 * h);
    let up = half_var / (h * h) + problem.drift / (2.0 * h);
    let mid = -2.0 * half_var / (h * h) - problem.rate;

    // (sub-step length, implicitness θ)
    let dt = problem.horizon / grid.n_time as f64;
    let mut steps: Vec<(f64, f64)> = Vec::with_capacity(grid.n_time + 2);
    match grid.scheme {
        Scheme::Implicit => steps.extend(std::iter::repeat_n((dt, 1.0), grid.n_time)),
        Scheme::CrankNicolson => {
            steps.push((0.5 * dt, 1.0));
            steps.push((0.5 * dt, 1.0));
            steps.extend(std::iter::repeat_n((dt, 0.5), grid.n_time - 1));
        }
    }

    let mut tau = vec![0.0];
    let mut values = vec![x.iter().map(|&xi| (problem.initial)(xi)).collect::<Vec<f64>>()];
    let mut u = values[0].clone();
    let mut rhs = vec![0.0; n - 2];
    let mut scratch = vec![0.0; n - 2];
    let mut t_now = 0.0;
    for (k, &(step, theta)) in steps.iter().enumerate() {
        let t_next = t_now + step;
        let ex = 1.0 - theta;
        for j in 1..n - 1 {
            let lu = lo * u[j - 1] + mid * u[j] + up * u[j + 1];
            let g = theta * (problem.source)(t_next, x[j]) + ex * (problem.source)(t_now, x[j]);
            rhs[j - 1] = u[j] + step * (ex * lu + g);
        }
        let left = (problem.lower)(t_next);
        let right = (problem.upper)(t_next);
        rhs[0] += step * theta * lo * left;
        rhs[n - 3] += step * theta * up * right;
        thomas(-step * theta * lo, 1.0 - step * theta * mid, -step * theta * up, &mut rhs, &mut scratch);
        u[0] = left;
        u[1..n - 1].copy_from_slice(&rhs);
        u[n - 1] = right;
        t_now = t_next;
        // The first Rannacher half-step is not a reported level.
        if !(grid.scheme == Scheme::CrankNicolson && k == 0) {
            tau.push(t_now);
            values.push(u.clone());
        }
    }
    Ok(Surface { x, tau, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    /// v(t, s) interpolated at the spot.
    pub value: f64,
    pub surface: Surface,
    /// |v_h − v_2h| / 3 when a tolerance was requested.
    pub richardson_error: Option<f64>,
}

/// (1 − e^{−aτ})/a, continuous at a = 0.
fn decay_integral(a: f64, tau: f64) -> f64 {
    if (a * tau).abs() < 1e-12 {
        tau
    } else {
        -(-a * tau).exp_m1() / a
    }
}

fn solve_once(
    contract: &ForwardContract<f64>,
    params: &MarketParams<f64>,
    policy: &FundingPolicy<f64>,
    grid: &PdeGrid,
) -> Result<(f64, Surface)> {
    policy.require_linearizing(params.kappa())?;
    let x0 = params.s().ln();
    grid.validate(x0)?;
    let d = derive_rates(params, policy);
    let sigma = params.sigma();
    let k = contract.strike();
    let r = params.r();
    let one_k = 1.0 + params.kappa();
    let tau = contract.tau();

    // Shift the grid so a node sits on the kink of max(z, 0) at expiry.
    let h = (grid.x_max - grid.x_min) / (grid.n_space - 1) as f64;
    let kink = (k / one_k).ln();
    let shift = kink - grid.x_min - ((kink - grid.x_min) / h).round() * h;
    let mut snapped = *grid;
    if (grid.x_min..=grid.x_max).contains(&kink) {
        snapped.x_min += shift;
        snapped.x_max += shift;
    }
    snapped.validate(x0)?;

    let linear = move |coef: f64| {
        move |t: f64, s: f64| {
            (-d.r_hat_v * t).exp() * (s * (d.mu_hat * t).exp() - k)
                + coef
                    * (one_k * s * decay_integral(d.r_hat_v - d.mu_hat, t)
                        - k * (-r * t).exp() * decay_integral(d.b_hat_v, t))
        }
    };
    let low = linear(d.b_hat_v);
    let high = linear(d.b_hat_v - d.b);
    let (s_lo, s_hi) = (snapped.x_min.exp(), snapped.x_max.exp());
    let problem = LinearCauchyProblem {
        sigma,
        drift: d.mu_hat - 0.5 * sigma * sigma,
        rate: d.r_hat_v,
        horizon: tau,
        initial: Box::new(move |x| x.exp() - k),
        source: Box::new(move |t, x| {
            let z = one_k * x.exp() - (-r * t).exp() * k;
            d.b_hat_v * z - d.b * z.max(0.0)
        }),
        lower: Box::new(move |t| low(t, s_lo)),
        upper: Box::new(move |t| high(t, s_hi)),
    };
    let surface = solve_cauchy(&problem, &snapped)?;
    Ok((surface.interpolate(x0), surface))
}

/// Solves the linearized pricing equation and interpolates at the spot.
///
/// With `tol`, the problem is also solved on the half-resolution grid and
/// [`Error::GridTooCoarse`] is returned when the Richardson estimate exceeds it.
pub fn solve_linear_pde(
    contract: &ForwardContract<f64>,
    params: &MarketParams<f64>,
    policy: &FundingPolicy<f64>,
    grid: &PdeGrid,
    tol: Option<f64>,
) -> Result<PdeSolution> {
    let (value, surface) = solve_once(contract, params, policy, grid)?;
    let richardson_error = match tol {
        None => None,
        Some(tol) => {
            let (coarse, _) = solve_once(contract, params, policy, &grid.coarsened())?;
            let estimate = (value - coarse).abs() / 3.0;
            if !(estimate <= tol) {
                return Err(Error::GridTooCoarse { estimate, tol });
            }
            Some(estimate)
        }
    };
    Ok(PdeSolution { value, surface, richardson_error })
}
