use thiserror::Error;

use crate::model::{SkillState, VariableId, Violation};

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid domain: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("state {0} is terminal and has no dynamics")]
    TerminalState(SkillState),

    #[error("action {0} can never make its target true (pstayfalse = 1)")]
    Unachievable(usize),

    #[error("variable {0} has no action that can make it true")]
    NoActionForVariable(VariableId),

    #[error("precondition graph contains a cycle")]
    Cycle,

    #[error("goal is unreachable from {0}")]
    GoalUnreachable(SkillState),

    #[error("state {0} violates precondition closure")]
    NotClosed(SkillState),

    #[error("initial state {0} has no value")]
    MissingValue(SkillState),

    #[error("envelope does not contain the goal state")]
    EnvelopeLacksGoal,

    #[error("reachable state space exceeds the enumeration budget of {0} states")]
    EnumerationBudget(usize),

    #[error("observation {obs} has zero probability after action {action}")]
    ImpossibleObservation { action: usize, obs: usize },

    #[error("malformed pomdp: {0}")]
    Pomdp(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
