//! Monte Carlo experiment orchestration.
//!
//! A trial draws one layout, one fading realization, and one association,
//! then evaluates every requested pointing scheme on that shared instance,
//! so scheme comparisons are paired. Trials are independent and may run on
//! any number of worker threads; all randomness is derived from the master
//! seed and the trial id, and output rows are sorted before writing, so
//! results are identical regardless of scheduling.

use crate::association::{two_stage_association, AssociationMatrix};
use crate::channel::{draw_fading, FadingRealization, GainKind};
use crate::error::{Error, Result};
use crate::geometry::{make_layout, ScenarioLayout};
use crate::optimizer::{optimize_pointing, InitMode, OptimizerConfig, PointingConfiguration};
use crate::params::SystemParams;
use crate::rate::{rate_report_with_gain, DenomMode};
use crate::seeding::{derive_seed, PURPOSE_FADING, PURPOSE_INIT, PURPOSE_LAYOUT};
use crate::vec3::Vec3;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Benchmark pointing schemes. Declaration order is alphabetical by label;
/// records sort by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    /// Boresight on the served user.
    Aligned,
    /// All boresights at (1, 0, 0).
    Fixed,
    /// No directionality; the antenna pattern is flat.
    Isotropic,
    /// Boresights from the iterative optimizer, aligned start by default.
    Optimized,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Aligned, Scheme::Fixed, Scheme::Isotropic, Scheme::Optimized];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Aligned => "aligned",
            Scheme::Fixed => "fixed",
            Scheme::Isotropic => "isotropic",
            Scheme::Optimized => "optimized",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "aligned" => Ok(Scheme::Aligned),
            "fixed" => Ok(Scheme::Fixed),
            "isotropic" => Ok(Scheme::Isotropic),
            "optimized" => Ok(Scheme::Optimized),
            other => Err(format!(
                "unknown scheme '{other}', expected one of: aligned, fixed, isotropic, optimized"
            )),
        }
    }
}

/// Which problem dimension a run sweeps, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sweep {
    None,
    Aps(Vec<usize>),
    Users(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub opt: OptimizerConfig,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub master_seed: u64,
    pub sweep: Sweep,
    pub output_path: PathBuf,
    /// Interference aggregation used for every reported rate, including the
    /// optimizer's trace. The optimizer's internal surrogate always uses the
    /// coherent form regardless.
    pub denom_mode: DenomMode,
    /// Evaluate the isotropic scheme as a forward-hemisphere radiator
    /// (gain 1 ahead of the boresight, 0 behind) instead of a true
    /// all-directions unit gain.
    pub isotropic_hemisphere: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: SystemParams::default(),
            opt: OptimizerConfig::default(),
            schemes: Scheme::ALL.to_vec(),
            trials: 100,
            master_seed: 1,
            sweep: Sweep::None,
            output_path: PathBuf::from("results.csv"),
            denom_mode: DenomMode::Coherent,
            isotropic_hemisphere: false,
        }
    }
}

impl ExperimentConfig {
    /// The (L, K) grid this run covers.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        match &self.sweep {
            Sweep::None => vec![(self.params.num_aps, self.params.num_users)],
            Sweep::Aps(ls) => ls.iter().map(|&l| (l, self.params.num_users)).collect(),
            Sweep::Users(ks) => ks.iter().map(|&k| (self.params.num_aps, k)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.opt.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter { name: "trials", reason: "must be at least 1".into() });
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParameter { name: "schemes", reason: "must name at least one scheme".into() });
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::InvalidParameter {
                    name: "schemes",
                    reason: format!("scheme '{}' listed twice", s.label()),
                });
            }
        }
        match &self.sweep {
            Sweep::Aps(v) | Sweep::Users(v) if v.is_empty() => {
                return Err(Error::InvalidParameter { name: "sweep", reason: "sweep list is empty".into() });
            }
            _ => {}
        }
        for (l, k) in self.cells() {
            if l == 0 || k == 0 || k > l {
                return Err(Error::InvalidParameter {
                    name: "sweep",
                    reason: format!("cell L={l}, K={k} violates L >= K >= 1"),
                });
            }
        }
        Ok(())
    }
}

/// One scheme's result on one trial instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub scheme: Scheme,
    pub num_aps: usize,
    pub num_users: usize,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    /// Outer iterations spent; 0 for the non-iterative schemes.
    pub iterations_used: usize,
    /// Per-outer-iteration sum-rate trace, optimized scheme only.
    pub convergence_trace: Option<Vec<f64>>,
}

/// A trial that could not be completed; the run carries on without it.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub trial_id: u64,
    pub num_aps: usize,
    pub num_users: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct McOutcome {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

/// Boresights pointing at each AP's served user.
pub fn aligned_vectors(layout: &ScenarioLayout, assoc: &AssociationMatrix) -> Vec<Vec3> {
    (0..layout.num_aps())
        .map(|l| layout.directions[[l, assoc.served_user(l)]])
        .collect()
}

/// Pointing produced by a scheme, or the marker that the scheme has no
/// boresights and the rate engine should use unit gain everywhere.
#[derive(Debug, Clone)]
pub enum SchemePointing {
    Directed(PointingConfiguration),
    Isotropic,
}

/// The boresights a scheme would use on the given instance.
pub fn scheme_pointing(
    scheme: Scheme,
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    params: &SystemParams,
    opt: &OptimizerConfig,
) -> Result<SchemePointing> {
    evaluate_scheme(scheme, layout, fading, assoc, params, opt).map(|(p, _, _)| p)
}

fn evaluate_scheme(
    scheme: Scheme,
    layout: &ScenarioLayout,
    fading: &FadingRealization,
    assoc: &AssociationMatrix,
    params: &SystemParams,
    opt: &OptimizerConfig,
) -> Result<(SchemePointing, usize, Option<Vec<f64>>)> {
    match scheme {
        Scheme::Fixed => {
            let vectors = vec![Vec3::new(1.0, 0.0, 0.0); layout.num_aps()];
            Ok((SchemePointing::Directed(PointingConfiguration { vectors }), 0, None))
        }
        Scheme::Aligned => {
            let vectors = aligned_vectors(layout, assoc);
            Ok((SchemePointing::Directed(PointingConfiguration { vectors }), 0, None))
        }
        Scheme::Isotropic => Ok((SchemePointing::Isotropic, 0, None)),
        Scheme::Optimized => {
            let res = optimize_pointing(layout, fading, assoc, params, opt)?;
            Ok((SchemePointing::Directed(res.pointing), res.iterations_used, Some(res.trace)))
        }
    }
}

/// Runs every requested scheme on the trial instance derived from
/// (master_seed, trial_id) at the given problem size.
pub fn run_trial(
    trial_id: u64,
    config: &ExperimentConfig,
    num_aps: usize,
    num_users: usize,
) -> Result<Vec<TrialRecord>> {
    let mut params = config.params.clone();
    params.num_aps = num_aps;
    params.num_users = num_users;
    params.validate()?;

    let layout = make_layout(&params, derive_seed(config.master_seed, PURPOSE_LAYOUT, trial_id))?;
    let fading = draw_fading(&layout, &params, derive_seed(config.master_seed, PURPOSE_FADING, trial_id));
    let assoc = two_stage_association(&layout)?;

    let mut opt = config.opt.clone();
    opt.denom_mode = config.denom_mode;
    if matches!(opt.init_mode, InitMode::Random { .. }) {
        opt.init_mode = InitMode::Random { seed: derive_seed(config.master_seed, PURPOSE_INIT, trial_id) };
    }

    let mut records = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        let (pointing, iterations_used, convergence_trace) =
            evaluate_scheme(scheme, &layout, &fading, &assoc, &params, &opt)?;
        let report = match &pointing {
            SchemePointing::Directed(pc) => rate_report_with_gain(
                &layout,
                &fading,
                &assoc,
                &pc.vectors,
                &params,
                GainKind::Exact,
                config.denom_mode,
            )?,
            SchemePointing::Isotropic => {
                let kind = if config.isotropic_hemisphere {
                    GainKind::IsotropicHemisphere
                } else {
                    GainKind::Isotropic
                };
                // The hemisphere variant needs an orientation; it faces the
                // served user like the aligned scheme. The all-directions
                // variant ignores the boresights entirely.
                let vectors = aligned_vectors(&layout, &assoc);
                rate_report_with_gain(&layout, &fading, &assoc, &vectors, &params, kind, config.denom_mode)?
            }
        };
        let total: f64 = report.per_user_rate.iter().sum();
        debug_assert!((total - report.sum_rate).abs() < 1e-9);
        records.push(TrialRecord {
            trial_id,
            scheme,
            num_aps,
            num_users,
            per_user_rate: report.per_user_rate,
            sum_rate: report.sum_rate,
            iterations_used,
            convergence_trace,
        });
    }
    Ok(records)
}

/// Runs all trials over all sweep cells, in parallel. Records come back
/// sorted by (L, K, trial, scheme); failures are collected, not fatal.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<McOutcome> {
    config.validate()?;
    let mut jobs = Vec::new();
    for (l, k) in config.cells() {
        for t in 0..config.trials as u64 {
            jobs.push((l, k, t));
        }
    }
    let results: Vec<std::result::Result<Vec<TrialRecord>, TrialFailure>> = jobs
        .par_iter()
        .map(|&(l, k, t)| {
            run_trial(t, config, l, k).map_err(|e| TrialFailure {
                trial_id: t,
                num_aps: l,
                num_users: k,
                message: e.to_string(),
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(mut v) => records.append(&mut v),
            Err(f) => failures.push(f),
        }
    }
    records.sort_by(|a, b| {
        (a.num_aps, a.num_users, a.trial_id, a.scheme).cmp(&(b.num_aps, b.num_users, b.trial_id, b.scheme))
    });
    Ok(McOutcome { records, failures })
}

/// Fraction of samples at or below each grid value.
pub fn empirical_cdf(samples: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    debug_assert!(grid.windows(2).all(|w| w[0] <= w[1]), "grid must be sorted");
    let n = samples.len() as f64;
    Ok(grid
        .iter()
        .map(|&g| (g, samples.iter().filter(|&&s| s <= g).count() as f64 / n))
        .collect())
}

pub const CSV_HEADER: &str = "trial_id,scheme,L,K,user_index,rate_bpshz,sum_rate_bpshz,iterations_used";

/// Renders records as CSV text, one row per (trial, scheme, user).
pub fn csv_string(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * records.len() + 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        for (u, rate) in r.per_user_rate.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.trial_id,
                r.scheme.label(),
                r.num_aps,
                r.num_users,
                u,
                rate,
                r.sum_rate,
                r.iterations_used
            )
            .expect("string write cannot fail");
        }
    }
    out
}

pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(records))?;
    Ok(())
}

/// Renders the per-iteration traces of optimized-scheme records.
pub fn trace_csv_string(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial_id,iteration,sum_rate_bpshz\n");
    for r in records {
        if let Some(trace) = &r.convergence_trace {
            for (i, v) in trace.iter().enumerate() {
                writeln!(out, "{},{},{}", r.trial_id, i, v).expect("string write cannot fail");
            }
        }
    }
    out
}

pub fn write_trace_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    std::fs::write(path, trace_csv_string(records))?;
    Ok(())
}

/// Companion trace file path: `results.csv` becomes `results_trace.csv`.
pub fn trace_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let mut name = String::from(stem);
    name.push_str("_trace");
    if let Some(ext) = path.extension().and_then(|s| s.to_str()) {
        name.push('.');
        name.push_str(ext);
    }
    path.with_file_name(name)
}
