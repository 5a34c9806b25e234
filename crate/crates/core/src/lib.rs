//! Envelope-based anytime planning for factored POMDPs whose variables only
//! ever flip from false to true and whose preconditions form a DAG.
//!
//! The pipeline mirrors how the planner is used:
//!
//! 1. [`model`] describes the process and its one-step semantics.
//! 2. [`trajectory`] turns a start state into a goal trajectory with exact
//!    fully observable values in time linear in the number of variables.
//! 3. [`envelope`] restricts the POMDP to a set of states plus an out state
//!    and grows that set over time.
//! 4. [`solver`] computes lower/upper value bounds on the restricted POMDP.
//! 5. [`agents`] and [`sim`] execute and score policies in the true process.
//! 6. [`experiment`] ties everything into the anytime loop and baselines.

pub mod agents;
pub mod envelope;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    ActionId, ActionSpec, Domain, DomainSpec, InitialBelief, ObservationId, SkillState,
    VariableId, Violation,
};
