//! Command-line front end for the cell-free rotatable-antenna simulator.
//!
//! Subcommands mirror the standard experiment shapes: a fixed-size Monte
//! Carlo run, sweeps over the AP or user count, per-iteration convergence
//! traces, and per-user rate CDFs. Exit codes: 0 on success, 1 for
//! configuration problems, 2 for runtime failures (partial output is kept).

use cellfree_ra::config::parse_config_file;
use cellfree_ra::experiment::{csv_string, trace_csv_string};
use cellfree_ra::optimizer::InitMode;
use cellfree_ra::{
    empirical_cdf, run_monte_carlo, trace_path, DenomMode, ExperimentConfig, McOutcome, Scheme,
    Sweep,
};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse()
}

fn parse_denom(s: &str) -> Result<DenomMode, String> {
    s.parse()
}

fn parse_init(s: &str) -> Result<InitMode, String> {
    match s {
        "aligned" => Ok(InitMode::Aligned),
        "fixed" => Ok(InitMode::Fixed),
        // The placeholder seed is replaced per trial from the master seed.
        "random" => Ok(InitMode::Random { seed: 0 }),
        other => Err(format!("unknown init mode '{other}', expected aligned, fixed, or random")),
    }
}

#[derive(Parser)]
#[command(
    name = "cellfree-ra",
    version,
    about = "Simulate and optimize rotatable-antenna cell-free downlink networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo run at a fixed number of APs and users.
    Simulate(FixedArgs),
    /// Sweep the AP count at a fixed number of users.
    SweepAps(SweepApsArgs),
    /// Sweep the user count at a fixed number of APs.
    SweepUsers(SweepUsersArgs),
    /// Fixed-size run that also writes per-iteration sum-rate traces.
    Convergence(FixedArgs),
    /// Fixed-size run that writes the empirical CDF of per-user rates.
    Cdf(FixedArgs),
}

#[derive(Args)]
struct FixedArgs {
    /// Number of access points.
    #[arg(long)]
    aps: Option<usize>,
    /// Number of users.
    #[arg(long)]
    users: Option<usize>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SweepApsArgs {
    /// Comma-separated AP counts to sweep.
    #[arg(long, value_delimiter = ',')]
    aps: Option<Vec<usize>>,
    /// Number of users at every sweep point.
    #[arg(long)]
    users: Option<usize>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SweepUsersArgs {
    /// Number of APs at every sweep point.
    #[arg(long)]
    aps: Option<usize>,
    /// Comma-separated user counts to sweep.
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<usize>>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct CommonOpts {
    /// Paired Monte Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; every layout, fading draw, and random initialization
    /// derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of fixed, isotropic, aligned, optimized.
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Option<Vec<Scheme>>,
    /// Per-AP transmit power in dBm.
    #[arg(long)]
    power_dbm: Option<f64>,
    /// Noise power in dBm.
    #[arg(long)]
    noise_dbm: Option<f64>,
    /// Path loss exponent.
    #[arg(long)]
    pathloss_exp: Option<f64>,
    /// Rician K-factor (linear).
    #[arg(long)]
    rician_k: Option<f64>,
    /// Antenna pattern rolloff exponent p; peak gain is 2(2p+1).
    #[arg(long)]
    directivity: Option<u32>,
    /// Softplus sharpness of the smoothed pattern.
    #[arg(long)]
    smoothness: Option<f64>,
    /// Side length of the square service area in meters.
    #[arg(long)]
    area: Option<f64>,
    /// Outer-loop relative improvement threshold.
    #[arg(long)]
    xi: Option<f64>,
    /// Outer iteration cap for the optimizer.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Interference aggregation: as_printed or per_interferer.
    #[arg(long, value_parser = parse_denom)]
    denom_mode: Option<DenomMode>,
    /// Optimizer start: aligned, fixed, or random.
    #[arg(long, value_parser = parse_init)]
    init: Option<InitMode>,
    /// Config file with key = value lines; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score the isotropic scheme as a forward-hemisphere radiator instead
    /// of a true all-directions unit gain.
    #[arg(long)]
    isotropic_hemisphere: bool,
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn report(&self) -> ExitCode {
        match self {
            CliError::Config(msg) => {
                eprintln!("configuration error: {msg}");
                ExitCode::from(1)
            }
            CliError::Runtime(msg) => {
                eprintln!("runtime error: {msg}");
                ExitCode::from(2)
            }
        }
    }
}

fn apply_common(common: &CommonOpts, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
    if let Some(path) = &common.config {
        let fc = parse_config_file(path).map_err(|e| CliError::Config(e.to_string()))?;
        fc.apply(cfg);
    }
    if let Some(v) = common.trials {
        cfg.trials = v;
    }
    if let Some(v) = common.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = &common.schemes {
        cfg.schemes = v.clone();
    }
    if let Some(v) = common.power_dbm {
        cfg.params.tx_power_dbm = v;
    }
    if let Some(v) = common.noise_dbm {
        cfg.params.noise_dbm = v;
    }
    if let Some(v) = common.pathloss_exp {
        cfg.params.pathloss_exp = v;
    }
    if let Some(v) = common.rician_k {
        cfg.params.rician_k = v;
    }
    if let Some(v) = common.directivity {
        cfg.params.directivity = v;
    }
    if let Some(v) = common.smoothness {
        cfg.params.smoothness = v;
    }
    if let Some(v) = common.area {
        cfg.params.area_side = v;
    }
    if let Some(v) = common.xi {
        cfg.opt.xi = v;
    }
    if let Some(v) = common.max_outer {
        cfg.opt.max_outer = v;
    }
    if let Some(v) = common.denom_mode {
        cfg.denom_mode = v;
    }
    if let Some(v) = common.init {
        cfg.opt.init_mode = v;
    }
    if let Some(v) = &common.out {
        cfg.output_path = v.clone();
    }
    if common.isotropic_hemisphere {
        cfg.isotropic_hemisphere = true;
    }
    Ok(())
}

/// Deterministic per-cell summary written to stdout.
fn summary(out: &McOutcome, cfg: &ExperimentConfig) -> String {
    let mut text = String::new();
    for (l, k) in cfg.cells() {
        let _ = writeln!(text, "L={l} K={k} trials={}", cfg.trials);
        for scheme in &cfg.schemes {
            let rows: Vec<_> = out
                .records
                .iter()
                .filter(|r| r.scheme == *scheme && r.num_aps == l && r.num_users == k)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let mean_sum = rows.iter().map(|r| r.sum_rate).sum::<f64>() / rows.len() as f64;
            let users: usize = rows.iter().map(|r| r.per_user_rate.len()).sum();
            let mean_user =
                rows.iter().map(|r| r.per_user_rate.iter().sum::<f64>()).sum::<f64>() / users as f64;
            let _ = writeln!(
                text,
                "  {:<10} mean sum rate {:>9.3} bps/Hz   mean per-user {:>8.3} bps/Hz",
                scheme.label(),
                mean_sum,
                mean_user
            );
        }
    }
    text
}

fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// CDF of per-user rates on a shared grid, one block per scheme.
fn cdf_csv(out: &McOutcome, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let max_rate = out
        .records
        .iter()
        .flat_map(|r| r.per_user_rate.iter().copied())
        .fold(0.0f64, f64::max);
    let points = 200usize;
    let grid: Vec<f64> = (0..=points).map(|i| max_rate * i as f64 / points as f64).collect();
    let mut text = String::from("scheme,rate_bpshz,cdf\n");
    for scheme in &cfg.schemes {
        let samples: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.scheme == *scheme)
            .flat_map(|r| r.per_user_rate.iter().copied())
            .collect();
        let cdf = empirical_cdf(&samples, &grid)
            .map_err(|e| CliError::Runtime(format!("cdf of {}: {e}", scheme.label())))?;
        for (value, fraction) in cdf {
            let _ = writeln!(text, "{},{},{}", scheme.label(), value, fraction);
        }
    }
    Ok(text)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let mut cfg = ExperimentConfig::default();

    // Subcommand baselines come first so both the config file and explicit
    // flags can override them.
    if let Cmd::Cdf(_) = &cli.cmd {
        cfg.params.num_users = 10;
        cfg.output_path = PathBuf::from("cdf.csv");
    }

    let wants_trace;
    let wants_cdf;
    match &cli.cmd {
        Cmd::Simulate(args) | Cmd::Convergence(args) | Cmd::Cdf(args) => {
            wants_trace = !matches!(cli.cmd, Cmd::Cdf(_));
            wants_cdf = matches!(cli.cmd, Cmd::Cdf(_));
            apply_common(&args.common, &mut cfg)?;
            if let Some(l) = args.aps {
                cfg.params.num_aps = l;
            }
            if let Some(k) = args.users {
                cfg.params.num_users = k;
            }
            cfg.sweep = Sweep::None;
        }
        Cmd::SweepAps(args) => {
            wants_trace = false;
            wants_cdf = false;
            apply_common(&args.common, &mut cfg)?;
            if let Some(k) = args.users {
                cfg.params.num_users = k;
            }
            cfg.sweep = Sweep::Aps(args.aps.clone().unwrap_or_else(|| vec![10, 20, 30, 40]));
        }
        Cmd::SweepUsers(args) => {
            wants_trace = false;
            wants_cdf = false;
            apply_common(&args.common, &mut cfg)?;
            if let Some(l) = args.aps {
                cfg.params.num_aps = l;
            }
            cfg.sweep = Sweep::Users(args.users.clone().unwrap_or_else(|| vec![5, 10, 15]));
        }
    }

    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let out = run_monte_carlo(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;

    if wants_cdf {
        write_file(&cfg.output_path, &cdf_csv(&out, &cfg)?)?;
        println!("wrote {}", cfg.output_path.display());
    } else {
        write_file(&cfg.output_path, &csv_string(&out.records))?;
        println!("wrote {} ({} records)", cfg.output_path.display(), out.records.len());
        // Per-iteration traces only make sense when trial ids are unique,
        // i.e. for single-cell runs with the optimized scheme present.
        if wants_trace && out.records.iter().any(|r| r.convergence_trace.is_some()) {
            let tp = trace_path(&cfg.output_path);
            write_file(&tp, &trace_csv_string(&out.records))?;
            println!("wrote {}", tp.display());
        }
    }
    print!("{}", summary(&out, &cfg));

    if !out.failures.is_empty() {
        for f in &out.failures {
            eprintln!(
                "trial {} (L={}, K={}) failed: {}",
                f.trial_id, f.num_aps, f.num_users, f.message
            );
        }
        eprintln!("{} of {} trials failed; partial results written", out.failures.len(), {
            cfg.cells().len() * cfg.trials
        });
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => err.report(),
    }
}
