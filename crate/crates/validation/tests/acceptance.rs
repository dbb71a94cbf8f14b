//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::hint::black_box;
use std::time::Instant;

use common::{abs_lognormal_oracle, arbitrage_free, rng, simpson, upsilon_oracle};
use rand::Rng;
use vulnfwd::sensitivity::{default_grid, Metric};
use vulnfwd::special::upsilon_integral;
use vulnfwd::{
    atmrf_strike, bs_call_qhat, bs_put_qhat, derive_rates, hedge_units, mc_correlation, mc_price_qhat, price_approx,
    price_atmrf, price_client, price_general, run_grid, run_sweep, simulate_p_measure, solve_linear_pde,
    stock_default_correlation, tatm_strike, upsilon0, upsilon_tilde, ForwardContract, FundingPolicy, GridSpec,
    MarketParams, McConfig, Mode, PdeGrid, QuadConfig, SweepBase, SweepSpec,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn baseline_tatm(kappa: f64) -> (MarketParams, FundingPolicy, ForwardContract) {
    let params = MarketParams::baseline().set("kappa", kappa).unwrap();
    let policy = FundingPolicy::linearizing(0.5, kappa).unwrap();
    let k = tatm_strike(&params, &policy, 5.0, 0.0);
    (params, policy, ForwardContract::spot_start(k, 5.0).unwrap())
}

fn c1_atmrf_vs_quadrature() -> Outcome {
    let start = Instant::now();
    let mut g = rng(1);
    let cfg = QuadConfig::with_tol(1e-12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = arbitrage_free(&mut g);
        let k = atmrf_strike(&d.params, d.expiry);
        let c = ForwardContract::spot_start(k, d.expiry).unwrap();
        let a = price_atmrf(&c, &d.params, &d.policy).map_err(|e| e.to_string())?.value;
        let q = price_general(&c, &d.params, &d.policy, &cfg).map_err(|e| e.to_string())?.value;
        worst = worst.max((a - q).abs() / d.params.s());
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-9 && secs < 10.0, format!("max |atm - quad|/notional = {worst:.2e}, {secs:.2} s"))
}

fn c2_baseline_tatm() -> Outcome {
    let (p, pol, c) = baseline_tatm(0.0);
    let v = price_general(&c, &p, &pol, &QuadConfig::default()).map_err(|e| e.to_string())?;
    check(
        (v.bps_per_year - 3.55).abs() <= 0.05 && (v.bps_total - 17.74).abs() <= 0.25,
        format!("{:.4} bps/yr, {:.3} bps total", v.bps_per_year, v.bps_total),
    )
}

fn c3_cts_wwr_baseline() -> Outcome {
    let base = SweepBase::baseline().with("kappa", -0.1).map_err(|e| e.to_string())?;
    let grid = default_grid("kappa", &base).map_err(|e| e.to_string())?;
    let rows = run_sweep(&SweepSpec::new("kappa", grid, Mode::Cts).map_err(|e| e.to_string())?, &base)
        .map_err(|e| e.to_string())?;
    let row = rows.iter().find(|r| (r.x + 0.1).abs() < 1e-12).ok_or("baseline kappa missing from grid")?;
    let v = row.result.as_ref().ok_or_else(|| row.status.clone())?;
    check(
        (v.bps_per_year + 24.25).abs() <= 0.25 && (v.bps_total + 121.27).abs() <= 1.25,
        format!("{:.4} bps/yr, {:.3} bps total", v.bps_per_year, v.bps_total),
    )
}

fn approx_errors_bps(sigma: f64) -> Result<Vec<(f64, f64)>, String> {
    let params = MarketParams::baseline().set("sigma", sigma).map_err(|e| e.to_string())?;
    let policy = FundingPolicy::linearizing(0.5, 0.0).unwrap();
    let k_star = atmrf_strike(&params, 5.0);
    let cfg = QuadConfig::with_tol(1e-12);
    (0..61)
        .map(|i| {
            let m = 0.85 + 0.3 * i as f64 / 60.0;
            let c = ForwardContract::spot_start(m * k_star, 5.0).map_err(|e| e.to_string())?;
            let a = price_approx(&c, &params, &policy).map_err(|e| e.to_string())?.value;
            let q = price_general(&c, &params, &policy, &cfg).map_err(|e| e.to_string())?.value;
            Ok((m, (a - q).abs() / params.s() * 1e4))
        })
        .collect()
}

fn c4_approximation() -> Outcome {
    let lo = approx_errors_bps(0.3)?;
    let hi = approx_errors_bps(0.5)?;
    let inner = lo.iter().chain(&hi).filter(|(m, _)| (0.9 - 1e-12..=1.1 + 1e-12).contains(m));
    let inner_max = inner.map(|e| e.1).fold(0.0, f64::max);
    let outer_max = lo.iter().chain(&hi).map(|e| e.1).fold(0.0, f64::max);
    let ordered = lo.iter().zip(&hi).filter(|(a, _)| (a.0 - 1.0).abs() > 1e-9).all(|(a, b)| b.1 < a.1);
    check(
        inner_max <= 50.0 && outer_max <= 100.0 && ordered,
        format!(
            "max error {inner_max:.3} bps on [0.90,1.10], {outer_max:.3} bps on [0.85,1.15]; σ=0.5 below σ=0.3 at every m≠1: {ordered}"
        ),
    )
}

fn c5_monte_carlo() -> Outcome {
    let start = Instant::now();
    let (p, pol, c) = baseline_tatm(0.0);
    let exact = price_general(&c, &p, &pol, &QuadConfig::default()).map_err(|e| e.to_string())?.value;
    let cfg = McConfig { n_paths: 1_000_000, n_steps: McConfig::steps_for(5.0, 50), seed: 7, antithetic: true };
    let base = mc_price_qhat(&c, &p, &pol, &cfg).map_err(|e| e.to_string())?;
    let fine = mc_price_qhat(&c, &p, &pol, &McConfig { n_steps: 2 * cfg.n_steps, ..cfg }).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let z = (exact - base.mean) / base.std_error;
    let drift = (fine.mean - base.mean).abs() / base.std_error;
    check(
        z.abs() <= 3.0 && drift < 1.0 && secs < 60.0,
        format!("z = {z:.3}, step doubling moved the mean by {drift:.2e} std errors, {secs:.1} s"),
    )
}

fn c6_pde() -> Outcome {
    let (p, pol, c) = baseline_tatm(0.0);
    let exact = price_general(&c, &p, &pol, &QuadConfig::with_tol(1e-13)).map_err(|e| e.to_string())?.value;
    let err = |n: usize| -> Result<f64, String> {
        let grid = PdeGrid::around(&p, &c, n + 1, n);
        Ok((solve_linear_pde(&c, &p, &pol, &grid, None).map_err(|e| e.to_string())?.value - exact).abs())
    };
    let (e200, e400) = (err(200)?, err(400)?);
    let ratio = e200 / e400;
    check(
        e400 / p.s() <= 1e-3 && ratio >= 3.5,
        format!("|PDE - analytic| = {e400:.2e} at 400x400, refinement ratio {ratio:.2}"),
    )
}

fn c7a_put_call_parity() -> Outcome {
    let mut g = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = arbitrage_free(&mut g);
        let r = derive_rates(&d.params, &d.policy);
        let s = d.params.s();
        let k = s * g.random_range(0.3..3.0);
        let tau = g.random_range(0.01..30.0);
        let lhs = bs_call_qhat(s, k, tau, &r, d.params.sigma()) - bs_put_qhat(s, k, tau, &r, d.params.sigma());
        let fwd = s * (r.mu_hat * tau).exp();
        worst = worst.max((lhs - (fwd - k)).abs() / fwd.max(k));
    }
    check(worst <= 1e-12, format!("max relative parity gap {worst:.2e} over 1000 draws"))
}

fn c7b_upsilon0() -> Outcome {
    let mut g = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let t = g.random_range(1e-3..=30.0);
        let x = g.random_range(-0.2..=0.5);
        let y = g.random_range(-2.0..=2.0);
        let closed = upsilon0(t, x, y);
        let oracle = upsilon_oracle(t, x, y, 0.0, 1e-13 * t.max(1.0));
        worst = worst.max((closed - oracle).abs() / closed.abs().max(1.0));
    }
    check(worst <= 1e-10, format!("max scaled gap {worst:.2e} over 200 (t, x, y) draws"))
}

fn c7c_upsilon_tilde_cubic() -> Outcome {
    let (t, x, y) = (5.0, 0.085, -0.3);
    let cfg = QuadConfig { abs_tol: 1e-15, max_depth: 40 };
    let err = |z: f64| (upsilon_tilde(t, x, y, z) - upsilon_integral(t, x, y, z, &cfg)).abs();
    let zs = [0.1, 0.05, 0.025, 0.0125];
    let ratios: Vec<f64> = zs.windows(2).map(|w| err(w[0]) / err(w[1])).collect();
    let last = *ratios.last().unwrap();
    check(last >= 8.0, format!("error reduction per halving of z: {ratios:.2?}"))
}

fn c7d_component_sum() -> Outcome {
    let mut g = rng(4);
    let cfg = QuadConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = arbitrage_free(&mut g);
        let k_star = atmrf_strike(&d.params, d.expiry);
        let atm = ForwardContract::spot_start(k_star, d.expiry).unwrap();
        let off = atm.with_strike(k_star * g.random_range(0.85..1.15)).unwrap();
        let results = [
            price_general(&off, &d.params, &d.policy, &cfg),
            price_client(&off, &d.params, &d.policy, &cfg),
            price_approx(&off, &d.params, &d.policy),
            price_atmrf(&atm, &d.params, &d.policy),
        ];
        for r in results {
            let r = r.map_err(|e| e.to_string())?;
            let c = r.components;
            let scale = c.terminal.abs() + c.put_recovery.abs() + c.call_recovery.abs();
            worst = worst.max((r.value - (c.terminal + c.put_recovery + c.call_recovery)).abs() / scale.max(1e-300));
        }
    }
    check(worst <= 1e-12, format!("max relative gap {worst:.2e}"))
}

fn c7e_band_sign() -> Outcome {
    let mut g = rng(5);
    let cfg = QuadConfig::with_tol(1e-12);
    let (mut worst_zero, mut max_pos) = (0.0f64, f64::NEG_INFINITY);
    for i in 0..60 {
        let mut d = arbitrage_free(&mut g);
        if i % 2 == 0 {
            let r = d.params.r();
            d.params = ["f", "h_s", "h1", "h2"].iter().fold(d.params, |p, k| p.set(k, r).unwrap());
        }
        let k = d.params.s() * g.random_range(0.7..1.4);
        let c = ForwardContract::spot_start(k, d.expiry).unwrap();
        let v = price_general(&c, &d.params, &d.policy, &cfg).map_err(|e| e.to_string())?.value;
        let nu = price_client(&c, &d.params, &d.policy, &cfg).map_err(|e| e.to_string())?.value;
        let sum = (v + nu) / d.params.s();
        if derive_rates(&d.params, &d.policy).b == 0.0 {
            worst_zero = worst_zero.max(sum.abs());
        } else {
            max_pos = max_pos.max(sum);
        }
    }
    // v + ν = −b(1+κ)∫ e^{−r̂_V w} E|S_w − K_w| dw, with the expectation by direct integration.
    let (p, pol, c) = baseline_tatm(-0.2);
    let d = derive_rates(&p, &pol);
    let tau = c.tau();
    let integrand = |w: f64| {
        let k_w = c.strike() * (-p.r() * (tau - w)).exp() / (1.0 + p.kappa());
        let m = d.mu_hat - 0.5 * p.sigma() * p.sigma();
        (-d.r_hat_v * w).exp() * abs_lognormal_oracle(p.s(), p.sigma(), m, w, k_w)
    };
    let oracle = -d.b * (1.0 + p.kappa()) * simpson(&integrand, 0.0, tau, 1e-11);
    let band = price_general(&c, &p, &pol, &cfg).map_err(|e| e.to_string())?.value
        + price_client(&c, &p, &pol, &cfg).map_err(|e| e.to_string())?.value;
    let identity_gap = (band - oracle).abs();
    check(
        worst_zero <= 1e-12 && max_pos < 0.0 && identity_gap <= 1e-9,
        format!("b=0: max |v+ν| = {worst_zero:.1e}; b>0: max v+ν = {max_pos:.3e}; |z|-identity gap {identity_gap:.1e}"),
    )
}

fn c7f_hedge() -> Outcome {
    let mut g = rng(6);
    let cfg = QuadConfig::default();
    let (mut worst_residual, mut worst_product) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let d = arbitrage_free(&mut g);
        let k = tatm_strike(&d.params, &d.policy, d.expiry, 0.0) * g.random_range(0.8..1.25);
        let c = ForwardContract::spot_start(k, d.expiry).unwrap();
        let t_now = d.expiry * g.random_range(0.0..0.9);
        let s_now = d.params.s() * g.random_range(0.6..1.6);
        let h = hedge_units(&c, &d.params, &d.policy, s_now, t_now, None, &cfg).map_err(|e| e.to_string())?;
        worst_residual = worst_residual.max(h.residual.abs());
        worst_product = worst_product.max((h.deposit_units * h.funding_units).abs());
    }
    check(
        worst_product == 0.0 && worst_residual <= 1e-8,
        format!("max |θ^B θ^F| = {worst_product:.1e}, max residual {worst_residual:.1e} over 50 states"),
    )
}

fn c7g_first_default() -> Outcome {
    let params = MarketParams::baseline().set("lambda1", 0.3).unwrap().set("lambda2", 0.2).unwrap();
    let cfg = McConfig { n_paths: 1_000_000, n_steps: 1, seed: 11, antithetic: false };
    let samples = simulate_p_measure(&params, 1.0, &cfg).map_err(|e| e.to_string())?;
    let n = samples.len() as f64;
    // Exponential first-default time: the MLE of the rate is 1 / mean(τ).
    let mean_tau = samples.iter().map(|x| x.tau).sum::<f64>() / n;
    let rate = 1.0 / mean_tau;
    let se = rate / n.sqrt();
    let z = (rate - 0.5) / se;
    let p_hat = samples.iter().filter(|x| x.jumped).count() as f64 / n;
    let p = 1.0 - (-0.5f64).exp();
    let z_count = (p_hat - p) / (p * (1.0 - p) / n).sqrt();
    check(
        z.abs() <= 3.0 && z_count.abs() <= 3.0,
        format!("rate {rate:.5} vs 0.5 (z = {z:.2}); P(τ ≤ 1) z = {z_count:.2}"),
    )
}

fn c7h_correlation() -> Outcome {
    let params = MarketParams::baseline()
        .set("kappa", -0.3)
        .unwrap()
        .set("lambda1", 0.05)
        .unwrap()
        .set("lambda2", 0.05)
        .unwrap();
    let t = 2.0;
    let cfg = McConfig { n_paths: 10_000_000, n_steps: 1, seed: 12, antithetic: false };
    let est = mc_correlation(&params, t, &cfg).map_err(|e| e.to_string())?;
    let exact = stock_default_correlation(&params, t);
    let z = (est.mean - exact) / est.std_error;
    check(z.abs() <= 3.0, format!("closed form {exact:.5}, MC {:.5} ± {:.5} (z = {z:.2})", est.mean, est.std_error))
}

fn c7i_no_jump_no_correlation() -> Outcome {
    let params = MarketParams::baseline().set("lambda1", 0.05).unwrap().set("lambda2", 0.05).unwrap();
    let exact = stock_default_correlation(&params, 2.0);
    let cfg = McConfig { n_paths: 1_000_000, n_steps: 1, seed: 13, antithetic: false };
    let est = mc_correlation(&params, 2.0, &cfg).map_err(|e| e.to_string())?;
    let z = est.mean / est.std_error;
    check(exact == 0.0 && z.abs() <= 3.0, format!("closed form {exact}, MC {:.2e} (z = {z:.2})", est.mean))
}

/// Median per-call time over 1000 samples; each sample times a burst of
/// calls so the clock overhead does not dominate sub-microsecond calls.
fn median_nanos(mut f: impl FnMut()) -> f64 {
    const BURST: u32 = 16;
    let mut times: Vec<f64> = (0..1000)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..BURST {
                f();
            }
            t.elapsed().as_nanos() as f64 / f64::from(BURST)
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

fn c8_performance() -> Outcome {
    let p = MarketParams::baseline();
    let pol = FundingPolicy::linearizing(0.5, 0.0).unwrap();
    let c = ForwardContract::spot_start(atmrf_strike(&p, 5.0), 5.0).unwrap();
    let cfg = QuadConfig::with_tol(1e-10);
    let closed = median_nanos(|| {
        black_box(price_atmrf(black_box(&c), black_box(&p), &pol).unwrap());
    });
    let quad = median_nanos(|| {
        black_box(price_general(black_box(&c), black_box(&p), &pol, &cfg).unwrap());
    });
    let ratio = quad / closed;
    check(ratio >= 10.0, format!("median {closed:.0} ns vs {quad:.0} ns, closed form {ratio:.1}x faster"))
}

fn range_of(param: &str) -> Result<f64, String> {
    let base = SweepBase::baseline();
    let grid = default_grid(param, &base).map_err(|e| e.to_string())?;
    let rows = run_sweep(&SweepSpec::new(param, grid, Mode::Ctm).map_err(|e| e.to_string())?, &base)
        .map_err(|e| e.to_string())?;
    let values: Vec<f64> = rows.iter().filter_map(|r| r.bps_per_year()).collect();
    if values.len() != rows.len() {
        return Err(format!("{param} sweep has failed rows"));
    }
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

fn c9_sweeps() -> Outcome {
    let f_range = range_of("f")?;
    let r1_range = range_of("r1")?;
    let base = SweepBase::baseline();
    let r = base.params.r();
    let sigmas = default_grid("sigma", &base).map_err(|e| e.to_string())?;
    let fs = vec![r, 0.08, 0.12];
    let spec = GridSpec::new(
        SweepSpec::new("f", fs, Mode::Ctm).map_err(|e| e.to_string())?,
        SweepSpec {
            metric: Metric::BpsPerYear,
            ..SweepSpec::new("sigma", sigmas, Mode::Ctm).map_err(|e| e.to_string())?
        },
    )
    .map_err(|e| e.to_string())?;
    let grid = run_grid(&spec, &base).map_err(|e| e.to_string())?;
    let row = &grid.matrix()[0];
    let flat =
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - row.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = f_range / r1_range;
    check(
        ratio >= 1.5 && flat <= 1.0,
        format!("f range {f_range:.2} vs r1 range {r1_range:.2} bps/yr (ratio {ratio:.2}); f=r row spread {flat:.2e} bps/yr"),
    )
}

fn main() {
    let criteria: [Criterion; 17] = [
        ("1  closed form vs quadrature at K★", c1_atmrf_vs_quadrature),
        ("2  baseline TATM value", c2_baseline_tatm),
        ("3  CTS baseline with κ = −10%", c3_cts_wwr_baseline),
        ("4  approximation accuracy", c4_approximation),
        ("5  Monte Carlo oracle", c5_monte_carlo),
        ("6  PDE oracle", c6_pde),
        ("7a put-call parity", c7a_put_call_parity),
        ("7b Υ₀ closed form vs quadrature", c7b_upsilon0),
        ("7c Υ̃ cubic convergence in z", c7c_upsilon_tilde_cubic),
        ("7d component-sum identity", c7d_component_sum),
        ("7e v + ν ≤ 0, zero iff b = 0", c7e_band_sign),
        ("7f hedge units", c7f_hedge),
        ("7g first-default intensity", c7g_first_default),
        ("7h stock/default correlation vs MC", c7h_correlation),
        ("7i κ = 0 gives zero correlation", c7i_no_jump_no_correlation),
        ("8  closed form speed-up", c8_performance),
        ("9  sweep orderings", c9_sweeps),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
