//! Counterfactual adaptation of demonstrated symbolic procedures.
//!
//! A demonstration enters as a sequence of symbolic frames. [`world_model`]
//! abduces one verified operator per transition, [`adaptation`] replays the
//! resulting procedure from a deployment state and repairs precondition
//! violations with SEARCH/REPLACE patches offered by a [`proposers::Proposer`],
//! and [`metrics`] scores the outcome.

pub mod adaptation;
pub mod executor;
pub mod metrics;
pub mod pddl_io;
pub mod proposers;
pub mod scenario;
pub mod symbolic;
pub mod world_model;

pub use adaptation::{adapt, apply_patch, derive_goal, goal_satisfied, AdaptationReport, Goal, Patch};
pub use executor::{rollout, symbolic_execute, symbolic_verify, verify_trajectory};
pub use symbolic::{
    entails, ground_condition, state_diff, ActionOperator, Atom, Condition, EffectSpec, Literal,
    ObjectName, ObjectUniverse, OpRef, State, Vocabulary,
};
pub use world_model::{build_world_model, WorldModel};
