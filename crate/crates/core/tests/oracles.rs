mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vulnfwd::sensitivity::default_grid;
use vulnfwd::{
    bs_call_qhat, derive_rates, mc_price_qhat, price_general, run_grid, run_sweep, solve_linear_pde, tatm_strike,
    Error, ForwardContract, FundingPolicy, GridSpec, MarketParams, McConfig, Mode, PdeGrid, QuadConfig, SweepBase,
    SweepSpec,
};

#[test]
fn black_scholes_call_matches_lognormal_sampling() {
    let p = MarketParams::baseline().set("kappa", -0.2).unwrap();
    let policy = FundingPolicy::linearizing(0.5, -0.2).unwrap();
    let d = derive_rates(&p, &policy);
    let (s, k, tau, sigma) = (1.0, 1.05, 2.0, p.sigma());
    let mut g = ChaCha8Rng::seed_from_u64(99);
    let n = 1_000_000;
    let payoffs: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut g);
            let st = s * ((d.mu_hat - 0.5 * sigma * sigma) * tau + sigma * tau.sqrt() * z).exp();
            (st - k).max(0.0)
        })
        .collect();
    let mean = payoffs.iter().sum::<f64>() / n as f64;
    let var = payoffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let exact = bs_call_qhat(s, k, tau, &d, sigma);
    assert!((exact - mean).abs() <= 3.0 * se, "{exact} vs {mean} ± {se}");
}

#[test]
fn monte_carlo_agrees_off_the_money_with_wrong_way_risk() {
    let p = MarketParams::baseline().set("kappa", -0.25).unwrap();
    let policy = FundingPolicy::linearizing(0.3, -0.25).unwrap();
    let c = ForwardContract::spot_start(0.9, 3.0).unwrap();
    let exact = price_general(&c, &p, &policy, &QuadConfig::default()).unwrap().value;
    let cfg = McConfig { n_paths: 200_000, n_steps: 150, seed: 5, antithetic: true };
    let est = mc_price_qhat(&c, &p, &policy, &cfg).unwrap();
    assert!((exact - est.mean).abs() <= 3.0 * est.std_error, "{exact} vs {est:?}");
}

#[test]
fn monte_carlo_is_reproducible_for_a_seed() {
    let p = MarketParams::baseline();
    let policy = FundingPolicy::linearizing(0.5, 0.0).unwrap();
    let c = ForwardContract::spot_start(1.0, 1.0).unwrap();
    let cfg = McConfig { n_paths: 20_000, n_steps: 20, seed: 3, antithetic: true };
    let a = mc_price_qhat(&c, &p, &policy, &cfg).unwrap();
    let b = mc_price_qhat(&c, &p, &policy, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pde_agrees_with_quadrature_under_jumps() {
    let p = MarketParams::baseline().set("kappa", -0.3).unwrap().set("sigma", 0.45).unwrap();
    let policy = FundingPolicy::linearizing(0.7, -0.3).unwrap();
    let c = ForwardContract::new(1.1, 4.0, 1.0).unwrap();
    let exact = price_general(&c, &p, &policy, &QuadConfig::with_tol(1e-12)).unwrap().value;
    let grid = PdeGrid::around(&p, &c, 401, 400);
    let sol = solve_linear_pde(&c, &p, &policy, &grid, Some(1e-4)).unwrap();
    assert!((sol.value - exact).abs() <= 1e-4, "{} vs {exact}", sol.value);
    assert!(sol.richardson_error.unwrap() <= 1e-4);
}

#[test]
fn coarse_pde_grid_is_reported() {
    let p = MarketParams::baseline();
    let policy = FundingPolicy::linearizing(0.5, 0.0).unwrap();
    let c = ForwardContract::spot_start(1.0, 5.0).unwrap();
    let grid = PdeGrid::around(&p, &c, 9, 4);
    let err = solve_linear_pde(&c, &p, &policy, &grid, Some(1e-9)).unwrap_err();
    assert!(matches!(err, Error::GridTooCoarse { .. }));
}

#[test]
fn funding_sweep_decreases_strictly() {
    let base = SweepBase::baseline();
    let grid = default_grid("f", &base).unwrap();
    let rows = run_sweep(&SweepSpec::new("f", grid, Mode::Ctm).unwrap(), &base).unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r.bps_per_year().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn ctm_sweep_keeps_terminal_at_zero() {
    let base = SweepBase::baseline();
    let grid = default_grid("sigma", &base).unwrap();
    let rows = run_sweep(&SweepSpec::new("sigma", grid, Mode::Ctm).unwrap(), &base).unwrap();
    for row in rows {
        assert!(row.result.unwrap().components.terminal.abs() < 1e-12);
    }
}

#[test]
fn cts_and_ctm_agree_at_the_base_point() {
    let base = SweepBase::baseline().with("kappa", -0.1).unwrap();
    let grid = vec![0.045, 0.055, 0.065];
    let ctm = run_sweep(&SweepSpec::new("q", grid.clone(), Mode::Ctm).unwrap(), &base).unwrap();
    let cts = run_sweep(&SweepSpec::new("q", grid, Mode::Cts).unwrap(), &base).unwrap();
    assert_eq!(ctm[1].bps_per_year(), cts[1].bps_per_year());
    assert_ne!(ctm[0].bps_per_year(), cts[0].bps_per_year());
}

#[test]
fn grid_cell_matches_single_point() {
    let base = SweepBase::baseline();
    let spec = GridSpec::new(
        SweepSpec::new("r1", vec![0.06, 0.1], Mode::Ctm).unwrap(),
        SweepSpec::new("kappa", vec![-0.5, -0.1], Mode::Ctm).unwrap(),
    )
    .unwrap();
    let grid = run_grid(&spec, &base).unwrap();
    let point = base.with("r1", 0.1).unwrap().with("kappa", -0.5).unwrap();
    let policy = point.policy.resolve(point.params.kappa()).unwrap();
    let k = tatm_strike(&point.params, &policy, point.expiry, 0.0);
    let c = ForwardContract::spot_start(k, point.expiry).unwrap();
    let v = price_general(&c, &point.params, &policy, &QuadConfig::default()).unwrap();
    assert_eq!(grid.matrix()[1][0], v.bps_per_year);
}

#[test]
fn wrong_way_corner_costs_hundreds_of_bps() {
    let base = SweepBase::baseline();
    let spec = GridSpec::new(
        SweepSpec::new("r1", vec![0.0, 0.15], Mode::Ctm).unwrap(),
        SweepSpec::new("kappa", vec![-0.9, 0.0], Mode::Ctm).unwrap(),
    )
    .unwrap();
    let m = run_grid(&spec, &base).unwrap().matrix();
    assert!(m[1][0] < m[0][1] - 100.0, "{m:?}");
}
