//! Simulator and pointing optimizer for cell-free downlink networks in which
//! every access point carries a single mechanically rotatable directional
//! antenna.
//!
//! The crate models a square service area with `L` access points jointly
//! serving `K` single-antenna users over Rician channels with distance power
//! -law path loss and a cosine-power antenna pattern. On top of the channel
//! model it provides:
//!
//! - a two-stage greedy user association plus an exhaustive reference solver
//!   for small instances ([`association`]);
//! - conjugate-precoding SINR and sum-rate evaluation with two interference
//!   aggregation conventions ([`rate`]);
//! - a boresight optimizer that alternates closed-form multiplier updates
//!   with projected gradient ascent on a smoothed, linearized surrogate of
//!   the sum rate ([`optimizer`]);
//! - paired Monte Carlo experiments over layouts and fading draws, with
//!   deterministic seeding and CSV output ([`experiment`]), and a small
//!   `key = value` config-file reader ([`config`]).
//!
//! Determinism is a design requirement throughout: every random quantity is
//! derived from a master seed, a purpose tag, and a trial index, so runs
//! reproduce bit-for-bit across thread counts and across machines with the
//! same floating-point semantics.

pub mod association;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod gain;
pub mod geometry;
pub mod optimizer;
pub mod params;
pub mod rate;
pub mod seeding;
pub mod vec3;

pub use association::{
    association_distance, brute_force_association, two_stage_association, AssociationMatrix,
};
pub use channel::{channel_matrix, draw_fading, path_gain, FadingRealization, GainKind};
pub use config::{parse_config_file, parse_config_str, ConfigError, FileConfig};
pub use error::{Error, Result};
pub use experiment::{
    aligned_vectors, empirical_cdf, run_monte_carlo, run_trial, scheme_pointing, trace_path,
    write_csv, write_trace_csv, ExperimentConfig, McOutcome, Scheme, SchemePointing, Sweep,
    TrialFailure, TrialRecord,
};
pub use gain::{directional_gain, smoothed_gain};
pub use geometry::{make_layout, ScenarioLayout};
pub use optimizer::{
    optimize_pointing, InitMode, MultiplierSet, OptimizeResult, OptimizerConfig,
    PointingConfiguration, StopReason,
};
pub use params::{dbm_to_watts, SystemParams};
pub use rate::{compute_sinr, rate_report, DenomMode, RateReport};
pub use seeding::derive_seed;
pub use vec3::Vec3;
