use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use vulnfwd::analytic::bps;
use vulnfwd::sensitivity::{default_grid, parse_grid, write_csv, Metric};
use vulnfwd::{
    atmrf_strike, hedge_units, mc_correlation, mc_price_qhat, no_arbitrage_band, price_approx, price_atmrf,
    price_client, price_general, run_grid, run_sweep, solve_linear_pde, stock_default_correlation, Error,
    ForwardContract, GridSpec, McConfig, Mode, QuadConfig, RunConfig, Scheme, SweepBase, SweepSpec,
};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Largest relative gap accepted between closed form and quadrature at K★.
const CROSS_CHECK_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "vulnfwd", version, about = "Vulnerable forward valuation with funding and wrong-way risk")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; omitted sections take baseline values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set sigma=0.5 --set strike=tatm`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Quadrature tolerance (price) or PDE Richardson tolerance (verify).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Value one forward.
    Price {
        #[arg(long, value_enum, default_value_t = PriceMethod::Quadrature)]
        method: PriceMethod,
        /// Also compare quadrature and closed form at K★.
        #[arg(long)]
        verify: bool,
    },
    /// Compare the analytic value with the Monte Carlo and PDE oracles.
    Verify {
        #[arg(long)]
        n_space: Option<usize>,
        #[arg(long)]
        n_time: Option<usize>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Also write the PDE surface as `t,s,v` CSV.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Sensitivity sweep or two-parameter grid as CSV.
    Sweep {
        #[arg(long)]
        param: String,
        /// `lo:hi:n`; defaults to the study range for the parameter.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        param2: Option<String>,
        #[arg(long)]
        grid2: Option<String>,
        #[arg(long, default_value = "ctm")]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = MetricArg::BpsPerYear)]
        metric: MetricArg,
    },
    /// Stock/first-default correlation, optionally against simulation.
    Correlation {
        /// Horizon in years.
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Run the physical-measure simulation with `--paths` paths.
        #[arg(long)]
        simulate: bool,
    },
    /// No-arbitrage price band [v, −ν].
    Bounds,
    /// Hedge units at a given state.
    Hedge {
        /// Spot at the hedge date; defaults to the configured spot.
        #[arg(long)]
        spot: Option<f64>,
        /// Hedge date; defaults to the valuation time.
        #[arg(long)]
        time: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PriceMethod {
    Quadrature,
    Atm,
    Approx,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    CrankNicolson,
    Implicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    BpsPerYear,
    Raw,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<Error>() {
            Some(e) if e.is_input_error() => EXIT_INPUT,
            Some(Error::Io(_)) => EXIT_INPUT,
            Some(_) => EXIT_NUMERICAL,
            None => EXIT_INPUT,
        };
        Failure { code, error }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = configure_threads().and_then(|()| run(cli)).unwrap_or_else(|f| {
        eprintln!("error: {:#}", f.error);
        f.code
    });
    ExitCode::from(code)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("VULNFWD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| anyhow!("VULNFWD_THREADS=`{raw}` is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let config = load_config(&cli.common)?;
    let common = &cli.common;
    match cli.command {
        Command::Price { method, verify } => cmd_price(&config, common, method, verify),
        Command::Verify { n_space, n_time, scheme, surface } => {
            cmd_verify(config, common, n_space, n_time, scheme, surface)
        }
        Command::Sweep { param, grid, param2, grid2, mode, metric } => {
            cmd_sweep(&config, common, &param, grid.as_deref(), param2.as_deref(), grid2.as_deref(), mode, metric)
        }
        Command::Correlation { horizon, simulate } => cmd_correlation(&config, common, horizon, simulate),
        Command::Bounds => cmd_bounds(&config, common),
        Command::Hedge { spot, time } => cmd_hedge(&config, common, spot, time),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut config: RunConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    for item in &common.overrides {
        let (key, value) =
            item.split_once('=').ok_or_else(|| anyhow!("override `{item}` is not of the form key=value"))?;
        config.set(key.trim(), value)?;
    }
    if let Some(seed) = common.seed {
        config.mc.seed = seed;
    }
    if let Some(paths) = common.paths {
        config.mc.n_paths = paths;
    }
    Ok(config)
}

fn output(common: &Common) -> io::Result<Box<dyn Write>> {
    Ok(match &common.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(common: &Common, value: &impl Serialize) -> Result<(), Failure> {
    let mut out = output(common)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn violations(config: &RunConfig) -> Vec<String> {
    config.market.no_arbitrage_violations().iter().map(|v| v.constraint()).collect()
}

fn cmd_price(config: &RunConfig, common: &Common, method: PriceMethod, verify: bool) -> Outcome {
    let policy = config.policy()?;
    let tol = common.tol.unwrap_or(config.quad_tol);
    let quad = QuadConfig::with_tol(tol);
    let mut notes = Vec::new();
    let contract = match method {
        PriceMethod::Atm => {
            let c = config.contract()?;
            let k_star = atmrf_strike(&config.market, c.tau());
            if (c.strike() / k_star - 1.0).abs() > 1e-12 {
                notes.push(format!("closed form applies at K* only; strike {} replaced by {k_star}", c.strike()));
            }
            c.with_strike(k_star)?
        }
        _ => config.contract()?,
    };
    let result = match method {
        PriceMethod::Quadrature => price_general(&contract, &config.market, &policy, &quad)?,
        PriceMethod::Atm => price_atmrf(&contract, &config.market, &policy)?,
        PriceMethod::Approx => price_approx(&contract, &config.market, &policy)?,
    };
    let mut report = json!({
        "config": config,
        "method": result.method,
        "strike": contract.strike(),
        "value": result.value,
        "bps_per_year": result.bps_per_year,
        "bps_total": result.bps_total,
        "components": result.components,
        "no_arb_violations": violations(config),
    });
    if method == PriceMethod::Quadrature {
        report["requested_tolerance"] = json!(tol);
        report["achieved_tolerance"] = json!(result.error_estimate);
        report["evaluations"] = json!(result.evaluations);
    }
    notes.extend(result.warnings);
    if !notes.is_empty() {
        report["notes"] = json!(notes);
    }
    let mut code = 0;
    if verify {
        let at_star = contract.with_strike(atmrf_strike(&config.market, contract.tau()))?;
        let q = price_general(&at_star, &config.market, &policy, &quad)?.value;
        let a = price_atmrf(&at_star, &config.market, &policy)?.value;
        let rel = (q - a).abs() / config.market.s();
        let pass = rel <= CROSS_CHECK_TOL;
        report["cross_check"] = json!({
            "strike": at_star.strike(),
            "quadrature": q,
            "closed_form": a,
            "relative_diff": rel,
            "tolerance": CROSS_CHECK_TOL,
            "pass": pass,
        });
        if !pass {
            code = EXIT_VERIFY;
        }
    }
    emit_json(common, &report)?;
    Ok(code)
}

fn cmd_verify(
    mut config: RunConfig,
    common: &Common,
    n_space: Option<usize>,
    n_time: Option<usize>,
    scheme: Option<SchemeArg>,
    surface: Option<PathBuf>,
) -> Outcome {
    if let Some(n) = n_space {
        config.pde.n_space = n;
    }
    if let Some(n) = n_time {
        config.pde.n_time = n;
    }
    if let Some(s) = scheme {
        config.pde.scheme = match s {
            SchemeArg::CrankNicolson => Scheme::CrankNicolson,
            SchemeArg::Implicit => Scheme::Implicit,
        };
    }
    if let Some(tol) = common.tol {
        config.pde.tol = tol;
    }
    let policy = config.policy()?;
    let contract = config.contract()?;
    let analytic = price_general(&contract, &config.market, &policy, &QuadConfig::with_tol(config.quad_tol))?;
    let exact = analytic.value;

    let mc_cfg = config.mc.config(contract.tau());
    let mc = mc_price_qhat(&contract, &config.market, &policy, &mc_cfg)?;
    let z = (mc.mean - exact) / mc.std_error;
    let mc_pass = z.abs() <= 3.0 || (mc.std_error == 0.0 && mc.mean == exact);
    let mc_report = json!({
        "mean": mc.mean,
        "std_error": mc.std_error,
        "n_paths": mc.n_paths,
        "n_steps": mc_cfg.n_steps,
        "z_score": if z.is_finite() { json!(z) } else { Value::Null },
        "pass": mc_pass,
    });

    let tol = config.pde.tol;
    let pde_report = match solve_linear_pde(&contract, &config.market, &policy, &config.pde_grid()?, Some(tol)) {
        Ok(sol) => {
            if let Some(path) = &surface {
                sol.surface.write_csv(contract.expiry(), BufWriter::new(File::create(path)?))?;
            }
            let diff = (sol.value - exact).abs();
            json!({
                "value": sol.value,
                "abs_diff": diff,
                "richardson_error": sol.richardson_error,
                "tolerance": tol,
                "pass": diff <= tol,
            })
        }
        Err(e @ Error::GridTooCoarse { .. }) => json!({ "error": e.to_string(), "tolerance": tol, "pass": false }),
        Err(e) => return Err(e.into()),
    };
    let pass = mc_pass && pde_report["pass"] == json!(true);
    let report = json!({
        "config": config,
        "strike": contract.strike(),
        "analytic": { "value": exact, "bps_per_year": analytic.bps_per_year, "error_estimate": analytic.error_estimate },
        "mc": mc_report,
        "pde": pde_report,
        "pass": pass,
    });
    emit_json(common, &report)?;
    Ok(if pass { 0 } else { EXIT_VERIFY })
}

fn sweep_spec(
    param: &str,
    grid: Option<&str>,
    mode: Mode,
    metric: Metric,
    base: &SweepBase,
) -> Result<SweepSpec, Failure> {
    let values = match grid {
        Some(text) => parse_grid(text)?,
        None => default_grid(param, base)?,
    };
    let mut spec = SweepSpec::new(param, values, mode)?;
    spec.metric = metric;
    Ok(spec)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config: &RunConfig,
    common: &Common,
    param: &str,
    grid: Option<&str>,
    param2: Option<&str>,
    grid2: Option<&str>,
    mode: Mode,
    metric: MetricArg,
) -> Outcome {
    let base = SweepBase { params: config.market, policy: config.policy, expiry: config.contract.expiry };
    let metric = match metric {
        MetricArg::BpsPerYear => Metric::BpsPerYear,
        MetricArg::Raw => Metric::Raw,
    };
    let x = sweep_spec(param, grid, mode, metric, &base)?;
    let rows = match param2 {
        Some(p2) => {
            let y = sweep_spec(p2, grid2, mode, metric, &base)?;
            run_grid(&GridSpec::new(x, y)?, &base)?.rows
        }
        None => {
            if grid2.is_some() {
                return Err(anyhow!("--grid2 needs --param2").into());
            }
            run_sweep(&x, &base)?
        }
    };
    let out = output(common)?;
    write_csv(&rows, param, param2, metric, out)?;
    Ok(0)
}

fn cmd_correlation(config: &RunConfig, common: &Common, horizon: f64, simulate: bool) -> Outcome {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter { name: "horizon".into(), reason: "must be positive".into() }.into());
    }
    let closed = stock_default_correlation(&config.market, horizon);
    let mut report = json!({ "config": config, "horizon": horizon, "closed_form": closed });
    if simulate {
        let cfg = McConfig { n_paths: config.mc.n_paths, n_steps: 1, seed: config.mc.seed, antithetic: false };
        let est = mc_correlation(&config.market, horizon, &cfg)?;
        let z = (est.mean - closed) / est.std_error;
        report["mc"] = json!({
            "mean": est.mean,
            "std_error": est.std_error,
            "n_paths": est.n_paths,
            "z_score": if z.is_finite() { json!(z) } else { Value::Null },
        });
    }
    emit_json(common, &report)?;
    Ok(0)
}

fn cmd_bounds(config: &RunConfig, common: &Common) -> Outcome {
    let policy = config.policy()?;
    let contract = config.contract()?;
    let quad = QuadConfig::with_tol(common.tol.unwrap_or(config.quad_tol));
    let band = no_arbitrage_band(&contract, &config.market, &policy, &quad)?;
    let client = price_client(&contract, &config.market, &policy, &quad)?;
    let (s, tau) = (config.market.s(), contract.tau());
    let in_bps = |v: f64| bps(v, s, tau).0;
    let report = json!({
        "config": config,
        "strike": contract.strike(),
        "lower": band.lower,
        "upper": band.upper,
        "width": band.width(),
        "lower_bps_per_year": in_bps(band.lower),
        "upper_bps_per_year": in_bps(band.upper),
        "width_bps_per_year": in_bps(band.width()),
        "client_components": client.components,
        "no_arb_violations": violations(config),
    });
    emit_json(common, &report)?;
    Ok(0)
}

fn cmd_hedge(config: &RunConfig, common: &Common, spot: Option<f64>, time: Option<f64>) -> Outcome {
    let policy = config.policy()?;
    let contract: ForwardContract = config.contract()?;
    let quad = QuadConfig::with_tol(common.tol.unwrap_or(config.quad_tol));
    let s_now = spot.unwrap_or(config.market.s());
    let t_now = time.unwrap_or(contract.valuation_time());
    let snap = hedge_units(&contract, &config.market, &policy, s_now, t_now, config.bond_maturities, &quad)?;
    let report = json!({
        "config": config,
        "strike": contract.strike(),
        "spot": s_now,
        "time": t_now,
        "hedge": snap,
    });
    emit_json(common, &report)?;
    Ok(0)
}
