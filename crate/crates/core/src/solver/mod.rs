//! Bounded point-based solver for flat POMDPs.

mod bounds;
mod pomdp;
mod search;

pub use bounds::{backup, best_action, blind_lower, upper_value, AlphaVector, BackupReport, ValueBounds};
pub use pomdp::{belief_update, Belief, FlatPomdp};
pub use search::{progress_csv, solve, ProgressRow, SolveResult, Solver, SolverConfig};
