//! Monte Carlo oracles.
//!
//! [`mc_price_qhat`] evaluates the conditional-expectation representation of
//! the pre-default value under the pricing measure, where S is a geometric
//! Brownian motion with drift μ̂. [`simulate_p_measure`] and
//! [`mc_correlation`] simulate the physical jump-diffusion to check the
//! first-to-default structure and the stock–default correlation.
//!
//! Every path owns a ChaCha8 stream (`seed`, stream = path index), and paths
//! are reduced in fixed-size chunks combined in index order, so results are
//! bit-identical whatever the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::ForwardContract;
use crate::error::{Error, Result};
use crate::market::{derive_rates, FundingPolicy, MarketParams};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Time steps over the whole horizon.
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_paths: 1_000_000, n_steps: 250, seed: 20240601, antithetic: true }
    }
}

impl McConfig {
    /// Step count for `per_year` steps over `years`, at least one.
    pub fn steps_for(years: f64, per_year: usize) -> usize {
        ((years * per_year as f64).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::invalid("n_paths", "need at least 2 paths"));
        }
        if self.n_steps < 1 {
            return Err(Error::invalid("n_steps", "need at least 1 step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Running mean and sum of squared deviations (Welford/Chan).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `n` into an odd base count and a number of dyadic levels.
fn dyadic_split(n: usize) -> (usize, u32) {
    let levels = n.trailing_zeros();
    (n >> levels, levels)
}

/// Fills `w[0..=n]` with a Brownian path on a uniform grid of step `dt`.
///
/// Draw order: the odd base increments first, then bridge midpoints level by
/// level, so a 2n-step path refines the n-step path built from the same
/// normals.
fn brownian_path(z: &[f64], w: &mut [f64], n: usize, dt: f64) {
    let (base, levels) = dyadic_split(n);
    let stride0 = 1usize << levels;
    let sd0 = (dt * stride0 as f64).sqrt();
    let mut k = 0;
    w[0] = 0.0;
    for j in 1..=base {
        w[j * stride0] = w[(j - 1) * stride0] + sd0 * z[k];
        k += 1;
    }
    let mut stride = stride0;
    while stride > 1 {
        let half = stride / 2;
        let sd = (dt * stride as f64 / 4.0).sqrt();
        for a in (0..n).step_by(stride) {
            w[a + half] = 0.5 * (w[a] + w[a + stride]) + sd * z[k];
            k += 1;
        }
        stride = half;
    }
}

/// Estimates the pre-default value v(t, s) by path simulation under the
/// pricing measure.
///
/// The terminal marginal is exact; the recovery time integral is a trapezoid
/// rule on the `n_steps` grid. With `antithetic`, each stream produces a
/// (Z, −Z) pair and the pair average is one sample.
pub fn mc_price_qhat(
    contract: &ForwardContract<f64>,
    params: &MarketParams<f64>,
    policy: &FundingPolicy<f64>,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    policy.require_linearizing(params.kappa())?;
    let d = derive_rates(params, policy);
    let tau = contract.tau();
    let n = cfg.n_steps;
    let dt = tau / n as f64;
    let s0 = params.s();
    let sigma = params.sigma();
    let one_k = 1.0 + params.kappa();
    let k = contract.strike();
    let drift = d.mu_hat - 0.5 * sigma * sigma;

    // Per-node constants: trapezoid weight × discount, discounted strike.
    let times: Vec<f64> = (0..=n).map(|j| j as f64 * dt).collect();
    let weight: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(j, &u)| {
            let trap = if j == 0 || j == n { 0.5 * dt } else { dt };
            trap * (-d.r_hat_v * u).exp()
        })
        .collect();
    let k_fwd: Vec<f64> = times.iter().map(|&u| k * (-params.r() * (tau - u)).exp()).collect();
    let drift_t: Vec<f64> = times.iter().map(|&u| drift * u).collect();
    let disc_t = (-d.r_hat_v * tau).exp();

    let evaluate = |w: &[f64]| -> f64 {
        let mut integral = 0.0;
        for j in 0..=n {
            let s = s0 * (drift_t[j] + sigma * w[j]).exp();
            let z = one_k * s - k_fwd[j];
            integral += weight[j] * (d.b_hat_v * z - d.b * z.max(0.0));
        }
        let s_t = s0 * (drift_t[n] + sigma * w[n]).exp();
        disc_t * (s_t - k) + integral
    };

    let samples = if cfg.antithetic { cfg.n_paths.div_ceil(2) } else { cfg.n_paths };
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut z = vec![0.0; n];
            let mut w = vec![0.0; n + 1];
            let mut acc = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut rng = path_rng(cfg.seed, i as u64);
                z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                brownian_path(&z, &mut w, n, dt);
                let mut x = evaluate(&w);
                if cfg.antithetic {
                    w.iter_mut().for_each(|v| *v = -*v);
                    x = 0.5 * (x + evaluate(&w));
                }
                acc.push(x);
            }
            acc
        })
        .collect();
    let m = partial.into_iter().fold(Moments::default(), Moments::merge);
    let n_paths = if cfg.antithetic { 2 * samples } else { samples };
    Ok(McEstimate { mean: m.mean, std_error: m.std_error(), n_paths })
}

/// One physical-measure draw at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PSample {
    pub s_t: f64,
    /// Whether the first default happened by the horizon.
    pub jumped: bool,
    /// First default time (infinite when both intensities vanish).
    pub tau: f64,
    /// Counterparty defaulting first: 1 or 2, 0 if none ever does.
    pub first_defaulter: u8,
}

struct PSampler {
    s: f64,
    drift_t: f64,
    vol_t: f64,
    jump: f64,
    lambda1: f64,
    lambda2: f64,
    horizon: f64,
}

impl PSampler {
    fn new(params: &MarketParams<f64>, horizon: f64) -> Self {
        let sigma = params.sigma();
        Self {
            s: params.s(),
            drift_t: (params.mu() - params.q() - 0.5 * sigma * sigma) * horizon,
            vol_t: sigma * horizon.sqrt(),
            jump: 1.0 + params.kappa(),
            lambda1: params.lambda1(),
            lambda2: params.lambda2(),
            horizon,
        }
    }

    fn exp_time(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return f64::INFINITY;
        }
        // 1 − U lies in (0, 1], so the log is finite.
        let u: f64 = rng.random();
        -(1.0 - u).ln() / lambda
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> PSample {
        let z: f64 = rng.sample(StandardNormal);
        let t1 = Self::exp_time(rng, self.lambda1);
        let t2 = Self::exp_time(rng, self.lambda2);
        let (tau, first_defaulter) = match (t1.is_finite(), t2.is_finite()) {
            (false, false) => (f64::INFINITY, 0),
            _ if t1 <= t2 => (t1, 1),
            _ => (t2, 2),
        };
        let jumped = tau <= self.horizon;
        let mut s_t = self.s * (self.drift_t + self.vol_t * z).exp();
        if jumped {
            s_t *= self.jump;
        }
        PSample { s_t, jumped, tau, first_defaulter }
    }
}

/// Exact simulation of the physical jump-diffusion at `horizon`: independent
/// exponential default times, a (1+κ) jump at the first one, and the
/// closed-form lognormal continuous part. Antithetics are not used here.
pub fn simulate_p_measure(params: &MarketParams<f64>, horizon: f64, cfg: &McConfig) -> Result<Vec<PSample>> {
    fold_p_measure(
        params,
        horizon,
        cfg,
        Vec::new,
        |mut v, _, x| {
            v.push(*x);
            v
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
}

/// Streaming form of [`simulate_p_measure`] for path counts too large to
/// materialise. `fold` also receives the path index. Chunks are folded in
/// parallel and merged in index order.
pub fn fold_p_measure<A, I, F, M>(
    params: &MarketParams<f64>,
    horizon: f64,
    cfg: &McConfig,
    init: I,
    fold: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(A, usize, &PSample) -> A + Sync,
    M: Fn(A, A) -> A,
{
    cfg.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let sampler = PSampler::new(params, horizon);
    let chunks = cfg.n_paths.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(cfg.n_paths) {
                let mut rng = path_rng(cfg.seed, i as u64);
                acc = fold(acc, i, &sampler.draw(&mut rng));
            }
            acc
        })
        .collect();
    Ok(parts.into_iter().fold(init(), merge))
}

/// Co-moment sums for a block of (S, J) pairs; S is centred by a constant.
#[derive(Debug, Clone, Copy, Default)]
struct CoSums {
    n: f64,
    sx: f64,
    sxx: f64,
    sy: f64,
    sxy: f64,
}

impl CoSums {
    fn add(mut self, o: &CoSums) -> Self {
        self.n += o.n;
        self.sx += o.sx;
        self.sxx += o.sxx;
        self.sy += o.sy;
        self.sxy += o.sxy;
        self
    }

    fn sub(mut self, o: &CoSums) -> Self {
        self.n -= o.n;
        self.sx -= o.sx;
        self.sxx -= o.sxx;
        self.sy -= o.sy;
        self.sxy -= o.sxy;
        self
    }

    /// Pearson correlation; J is 0/1 so Σy² = Σy.
    fn corr(&self) -> Option<f64> {
        let vx = self.sxx - self.sx * self.sx / self.n;
        let vy = self.sy - self.sy * self.sy / self.n;
        let cxy = self.sxy - self.sx * self.sy / self.n;
        (vx > 0.0 && vy > 0.0).then(|| cxy / (vx * vy).sqrt())
    }
}

const JACKKNIFE_BLOCKS: usize = 200;

/// Sample correlation of (S_t, J_t) with a delete-one-block jackknife error.
pub fn mc_correlation(params: &MarketParams<f64>, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    if params.lambda1() + params.lambda2() <= 0.0 {
        return Err(Error::DegenerateVariance("no default intensity, J is identically 0".into()));
    }
    let blocks = JACKKNIFE_BLOCKS.min(cfg.n_paths);
    let per_block = cfg.n_paths.div_ceil(blocks);
    let centre = params.s() * ((params.mu() - params.q()) * t).exp();
    let block = fold_p_measure(
        params,
        t,
        cfg,
        || vec![CoSums::default(); blocks],
        |mut acc, i, x| {
            let y = if x.jumped { 1.0 } else { 0.0 };
            let s = x.s_t - centre;
            let b = &mut acc[i / per_block];
            b.n += 1.0;
            b.sx += s;
            b.sxx += s * s;
            b.sy += y;
            b.sxy += s * y;
            acc
        },
        |a, b| a.iter().zip(&b).map(|(x, y)| x.add(y)).collect(),
    )?;
    let total = block.iter().fold(CoSums::default(), |a, b| a.add(b));
    let rho =
        total.corr().ok_or_else(|| Error::DegenerateVariance("all paths share the same default indicator".into()))?;
    let loo: Vec<f64> = block.iter().filter(|b| b.n > 0.0).filter_map(|b| total.sub(b).corr()).collect();
    let g = loo.len() as f64;
    let mean_loo = loo.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * loo.iter().map(|r| (r - mean_loo).powi(2)).sum::<f64>();
    Ok(McEstimate { mean: rho, std_error: var.sqrt(), n_paths: cfg.n_paths })
}
