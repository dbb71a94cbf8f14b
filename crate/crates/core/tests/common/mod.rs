//! Test-only oracles, written independently of the library's numerics.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vulnfwd::{FundingPolicy, MarketInput, MarketParams};

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// ∫₀ᵗ e^{−xu} Φ(y√u + z/√u) du by Simpson in w = √u, splitting at |z|.
pub fn upsilon_oracle(t: f64, x: f64, y: f64, z: f64, tol: f64) -> f64 {
    let f = |w: f64| {
        if w == 0.0 {
            return 0.0;
        }
        2.0 * w * (-x * w * w).exp() * vulnfwd::norm_cdf(y * w + z / w)
    };
    let top = t.sqrt();
    let cut = if z != 0.0 { (4.0 * z.abs()).min(0.5 * top) } else { 0.0 };
    if cut > 0.0 {
        simpson(&f, 0.0, cut, tol / 2.0) + simpson(&f, cut, top, tol / 2.0)
    } else {
        simpson(&f, 0.0, top, tol)
    }
}

/// E|a e^{σ√w G + m w} − c| for standard normal G, by integrating the density.
pub fn abs_lognormal_oracle(a: f64, sigma: f64, m: f64, w: f64, c: f64) -> f64 {
    if w == 0.0 {
        return (a - c).abs();
    }
    let sd = sigma * w.sqrt();
    let f =
        |g: f64| (a * (sd * g + m * w).exp() - c).abs() * (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt();
    // kink where the argument changes sign
    let g0 = ((c / a).ln() - m * w) / sd;
    let g0 = g0.clamp(-12.0, 12.0);
    simpson(&f, -12.0, g0, 1e-13) + simpson(&f, g0, 12.0, 1e-13)
}

/// A random arbitrage-free parameter set with a linearizing policy and expiry.
pub struct Draw {
    pub params: MarketParams,
    pub policy: FundingPolicy,
    pub expiry: f64,
}

pub fn arbitrage_free(rng: &mut ChaCha8Rng) -> Draw {
    let r = rng.random_range(-0.01..0.08);
    let f = r + rng.random_range(0.0..0.05);
    let between = |rng: &mut ChaCha8Rng| rng.random_range(r..=f);
    let h_s = between(rng);
    let h1 = between(rng);
    let h2 = between(rng);
    let input = MarketInput {
        s: rng.random_range(0.5..2.0),
        r,
        f,
        q: rng.random_range(0.0..0.1),
        sigma: rng.random_range(0.05..0.8),
        h_s,
        h1,
        h2,
        r1: h1 + rng.random_range(0.001..0.1),
        r2: h2 + rng.random_range(0.001..0.1),
        lambda1: rng.random_range(0.0..0.05),
        lambda2: rng.random_range(0.0..0.05),
        kappa: -rng.random_range(0.0..0.9),
        mu: None,
    };
    let params = MarketParams::try_from(input).unwrap();
    assert!(params.no_arbitrage_violations().is_empty());
    let policy = FundingPolicy::linearizing(rng.random_range(0.0..=1.0), params.kappa()).unwrap();
    Draw { params, policy, expiry: rng.random_range(0.25..30.0) }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
