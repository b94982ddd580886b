//! `fnlw`: pseudo-spectral simulation and verification tools for the
//! Wick-renormalized fractional nonlinear wave equation on the 2-torus.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigOverlay, RunConfig};

#[derive(Parser)]
#[command(
    name = "fnlw",
    version,
    about = "Simulation and Monte Carlo verification of the truncated Wick fractional NLW"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Fractional dispersion exponent in (0, 1)
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Nonlinearity index m (power u^{2m+1})
    #[arg(long, global = true)]
    m: Option<u32>,
    /// Frequency truncation radius
    #[arg(long = "N", global = true)]
    cutoff: Option<u32>,
    /// Physical grid points per dimension (defaults to (2m+2)N+1)
    #[arg(long = "grid", global = true)]
    grid_size: Option<u32>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo sample / ensemble count
    #[arg(long = "samples", global = true)]
    samples: Option<usize>,
    /// Evolution horizon
    #[arg(long = "T", global = true)]
    t_final: Option<f64>,
    /// Integrator step
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Duhamel quadrature step
    #[arg(long = "dt-quad", global = true)]
    dt_quad: Option<f64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Flat key = value config file (flags override file values)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: FNLW_WORKERS or all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// pCN mixing parameter
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// pCN burn-in sweeps
    #[arg(long, global = true)]
    burnin: Option<usize>,
    /// pCN thinning (0 = autocorrelation-based)
    #[arg(long, global = true)]
    thin: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit free-measure phase-space snapshots
    Sample,
    /// Exact and paired-Monte-Carlo decay of the potential gaps
    CauchyRate {
        /// Truncations for the gap table
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        cutoffs: Vec<u32>,
        /// Reference truncation
        #[arg(long, default_value_t = 64)]
        reference: u32,
    },
    /// Survival table of the negated potential
    Tail {
        /// Lambda grid (comma separated)
        #[arg(long = "lambda-grid", value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
    },
    /// Evolve the truncated flow from a snapshot (or a fresh draw)
    Evolve {
        /// Input phase-state snapshot
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Store every this many steps
        #[arg(long = "store-every", default_value_t = 100)]
        store_every: usize,
        /// Also compute the mixed space-time norms
        #[arg(long)]
        strichartz: bool,
        /// Time-Lebesgue exponent p
        #[arg(long)]
        p: Option<f64>,
        /// Space-Lebesgue exponent q
        #[arg(long)]
        q: Option<f64>,
        /// Sobolev index s
        #[arg(long)]
        s: Option<f64>,
    },
    /// Gibbs-invariance test of the truncated flow
    Invariance {
        /// Run the Gaussian/linear control experiment instead
        #[arg(long)]
        control: bool,
    },
    /// Decay-exponent report for the stochastic objects
    Regularity {
        /// Keep only Wick-power rows of degree up to this (default: all)
        #[arg(long)]
        l: Option<u32>,
        /// Product object selection
        #[arg(long)]
        k1: Option<u32>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        k2: Option<u32>,
        /// Lower edge of the fit window
        #[arg(long = "window-lo")]
        window_lo: Option<u32>,
    },
    /// First/second-order fixed-point study
    Picard,
    /// Run the full invariant/property suite
    Verify {
        /// Smaller Monte Carlo budgets (smoke mode)
        #[arg(long)]
        quick: bool,
    },
}

fn overlay_from(global: &GlobalOpts, command: &Command) -> Result<ConfigOverlay, config::ConfigError> {
    let mut overlay = ConfigOverlay::default();
    if let Some(path) = &global.config {
        overlay.merge(&ConfigOverlay::from_file(path)?);
    }
    let mut flags = ConfigOverlay::default();
    macro_rules! set_opt {
        ($key:expr, $val:expr) => {
            if let Some(v) = $val {
                flags.set($key, v.to_string());
            }
        };
    }
    set_opt!("alpha", global.alpha);
    set_opt!("m", global.m);
    set_opt!("n", global.cutoff);
    set_opt!("grid", global.grid_size);
    set_opt!("seed", global.seed);
    set_opt!("samples", global.samples);
    set_opt!("t", global.t_final);
    set_opt!("dt", global.dt);
    set_opt!("dt_quad", global.dt_quad);
    set_opt!("beta", global.beta);
    set_opt!("burnin", global.burnin);
    set_opt!("thin", global.thin);
    if let Some(w) = global.workers {
        flags.set("workers", w.to_string());
    } else if let Ok(env) = std::env::var("FNLW_WORKERS") {
        flags.set("workers", env);
    }
    match command {
        Command::Tail { lambda_grid: Some(grid) } => {
            let rendered: Vec<String> = grid.iter().map(|v| v.to_string()).collect();
            flags.set("lambda_grid", rendered.join(","));
        }
        Command::Evolve { p, q, s, .. } => {
            set_opt!("p", *p);
            set_opt!("q", *q);
            set_opt!("s", *s);
        }
        Command::Regularity { l, k1, k, k2, window_lo } => {
            set_opt!("l", *l);
            set_opt!("k1", *k1);
            set_opt!("k", *k);
            set_opt!("k2", *k2);
            set_opt!("window_lo", *window_lo);
        }
        Command::Verify { quick } => {
            if *quick {
                flags.set("quick", "true".into());
            }
        }
        _ => {}
    }
    overlay.merge(&flags);
    Ok(overlay)
}

fn run(cli: &Cli, config: &RunConfig) -> anyhow::Result<commands::CommandResult> {
    let out = &cli.global.out;
    match &cli.command {
        Command::Sample => commands::sample(config, out),
        Command::CauchyRate { cutoffs, reference } => {
            commands::cauchy_rate(config, out, cutoffs, *reference)
        }
        Command::Tail { .. } => commands::tail(config, out),
        Command::Evolve { input, store_every, strichartz, .. } => {
            commands::evolve_command(config, out, input.as_ref(), *store_every, *strichartz)
        }
        Command::Invariance { control } => commands::invariance(config, out, *control),
        Command::Regularity { .. } => commands::regularity(config, out),
        Command::Picard => commands::picard(config, out),
        Command::Verify { .. } => commands::verify(config, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overlay = match overlay_from(&cli.global, &cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let config = match config::resolve(&overlay) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if config.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
        {
            eprintln!("worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli, &config) {
        Ok(result) => {
            println!(
                "[{}] {}",
                if result.pass { "PASS" } else { "FAIL" },
                result.summary
            );
            if result.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
