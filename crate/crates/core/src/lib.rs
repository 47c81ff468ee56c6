//! Partitioning a behavior-labeled social network into capacity-bounded
//! intervention groups so that the expected number of non-users after one
//! round of competitive threshold influence is as large as possible.
//!
//! The pipeline is [`model`] (inputs) → [`dynamics`] (rewiring inside and
//! across groups) → [`influence`] (closed-form expectation and Monte Carlo
//! check). [`solvers`] searches over partitions, [`instance`] generates
//! synthetic networks and [`milp`] exports the problem for external
//! optimizers.

pub mod dynamics;
pub mod influence;
pub mod instance;
pub mod milp;
pub mod model;
mod seed;
pub mod solvers;

pub use dynamics::{apply_intervention, tie_transition, PostTie, PreTie, WeightedNetwork};
pub use influence::{expected_nonusers, flip_profile, simulate, success, Evaluation, SimulationSummary};
pub use model::{
    feasible_group_counts, validate_network, validate_partition, Behavior, CapacityBounds, ModelError, ModelParams, Node,
    NodeId, Partition, SocialNetwork, Tie, TieStrength,
};
pub use seed::derive_seed;
pub use solvers::{
    evaluate_partition, solve_exact, solve_lns, solve_local_search, Algorithm, CancelToken, LnsConfig, SolveConstraints,
    SolveError, SolveResult,
};
