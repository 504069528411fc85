//! Interference-alignment precoder/decoder design for the K-user MIMO
//! interference channel by direct minimization of the interference leakage
//! with particle swarm optimization (PSO) and cooperative PSO (CPSO).
//!
//! - [`mimo`]: scenarios, random channels, vector packing.
//! - [`objective`]: residuals, leakage, rank condition, closed-form 3-user
//!   alignment.
//! - [`swarm`]: the PSO engine.
//! - [`cpso`]: cooperative PSO over one-dimensional subswarms.
//! - [`harness`]: seeded campaigns, CSV traces and summaries.
//!
//! The `parallel` feature (on by default) evaluates particles and campaign
//! runs with rayon; results are identical with it off.

pub mod cpso;
pub mod error;
pub mod harness;
pub mod mimo;
pub mod objective;
pub mod par;
pub mod rng;
pub mod swarm;

pub use cpso::{run_cpso, run_cpso_fn, ContextCost, DenseCost};
pub use error::{Error, Result};
pub use mimo::{
    generate_channels, make_problem, pack, unpack, ChannelSet, MatrixBundle, PerUser,
    ProblemSpec, Properness, SolutionVector,
};
pub use objective::{
    closed_form_3user, leakage, rank_check, residuals, LeakageObjective, RankReport,
    ResidualVector, DEFAULT_RANK_TOL,
};
pub use par::Execution;
pub use swarm::{run_pso, OmegaMode, PsoConfig, RunOutcome};
