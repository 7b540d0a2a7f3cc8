//! Egoists and block-voting groups deciding on random capital increments by
//! α-majority.
//!
//! Each step the environment proposes an i.i.d. N(μ, σ²) increment for every
//! participant. Egoists back a proposal iff it raises their own capital; a
//! group casts all of its votes together according to its criterion. The
//! crate computes the expected one-step increment of each role three ways:
//! exactly ([`analytic::exact_increments`]), by the single-group normal
//! approximation ([`analytic::approx_single_group`]), and by Monte Carlo
//! ([`mc::estimate_increments`]).

pub mod analytic;
pub mod error;
pub mod mc;
pub mod model;
pub mod scenario;
pub mod stats;

pub use analytic::{
    acceptance_probability, approx_single_group, exact_increments, exact_single_group,
    exact_two_groups, group_free_baseline, ApproximationTerms, ExpectedIncrements,
};
pub use error::{Error, Result};
pub use mc::{estimate_increments, simulate_trajectory, McConfig, TrajectoryRecord};
pub use model::{
    decide, egoist_vote, generate_proposal, group_vote, run_step, tally, Environment,
    GroupCriterion, GroupSpec, Proposal, Role, RoleValues, SocietyComposition, StepOutcome,
    VotingRule,
};
pub use scenario::{
    build_scenario, detect_landmarks, run_sweep, CrossTarget, Landmark, LandmarkKind,
    LandmarkQuery, Method, Scenario, ScenarioKind, ScenarioOverrides, SweepResult,
};
pub use stats::{
    binomial_tail, negative_part_mean, normal_cdf, normal_pdf, positive_part_mean, BinomialTail,
    RandomSource,
};
