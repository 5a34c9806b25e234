use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::{ActionId, Domain, SkillState, VariableId};

const OBS_TOL: f64 = 1e-12;
const B0_TOL: f64 = 1e-9;

/// A structural problem with a domain. Violations are data: a domain can
/// be constructed and inspected even when it has some.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Cycle { vars: Vec<VariableId> },
    ProbabilityOutOfRange { action: ActionId, value: f64 },
    ObservationNotNormalized { action: ActionId, given_true: bool, sum: f64 },
    NonNegativeCost { action: ActionId, cost: f64 },
    NoActionForGoalVariable { var: VariableId },
    UnachievableVariable { var: VariableId },
    NegativeGoalReward { value: f64 },
    GoalNotClosed { var: VariableId, parent: VariableId },
    EmptyInitialBelief,
    InitialBeliefNotNormalized { sum: f64 },
    InitialProbabilityOutOfRange { state: SkillState, prob: f64 },
    DuplicateInitialState { state: SkillState },
    InitialStateNotClosed { state: SkillState, var: VariableId },
    GoalUnreachable { state: SkillState },
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            Cycle { vars } => write!(f, "cycle in precondition graph among variables {vars:?}"),
            ProbabilityOutOfRange { action, value } => {
                write!(f, "action {action} has probability {value} outside [0, 1]")
            }
            ObservationNotNormalized {
                action,
                given_true,
                sum,
            } => write!(
                f,
                "action {action} obs_{} sums to {}",
                if *given_true { "true" } else { "false" },
                round9(*sum)
            ),
            NonNegativeCost { action, cost } => {
                write!(f, "action {action} has non-negative cost {cost}")
            }
            NoActionForGoalVariable { var } => write!(f, "goal variable {var} has no action"),
            UnachievableVariable { var } => {
                write!(f, "every action for variable {var} has pstayfalse = 1")
            }
            NegativeGoalReward { value } => write!(f, "rgoal {value} is negative"),
            GoalNotClosed { var, parent } => {
                write!(f, "goal variable {var} requires non-goal variable {parent}")
            }
            EmptyInitialBelief => write!(f, "b0 is empty"),
            InitialBeliefNotNormalized { sum } => write!(f, "b0 sums to {}", round9(*sum)),
            InitialProbabilityOutOfRange { state, prob } => {
                write!(f, "b0 probability {prob} for {state} outside [0, 1]")
            }
            DuplicateInitialState { state } => write!(f, "b0 lists {state} more than once"),
            InitialStateNotClosed { state, var } => write!(
                f,
                "b0 state {state} has variable {var} true without its preconditions"
            ),
            GoalUnreachable { state } => write!(f, "goal is unreachable from b0 state {state}"),
        }
    }
}

/// All structural violations of `d`; empty means valid.
pub fn validate_domain(d: &Domain) -> Vec<Violation> {
    let mut out = Vec::new();
    let cyclic = cyclic_vars(d);
    if !cyclic.is_empty() {
        out.push(Violation::Cycle { vars: cyclic });
    }

    for a in d.actions() {
        let p = a.p_stay_false;
        if !(0.0..=1.0).contains(&p) {
            out.push(Violation::ProbabilityOutOfRange {
                action: a.id,
                value: p,
            });
        }
        for (given_true, dist) in [(true, &a.obs_given_true), (false, &a.obs_given_false)] {
            if let Some(&bad) = dist.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                out.push(Violation::ProbabilityOutOfRange {
                    action: a.id,
                    value: bad,
                });
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > OBS_TOL {
                out.push(Violation::ObservationNotNormalized {
                    action: a.id,
                    given_true,
                    sum,
                });
            }
        }
        if a.cost.is_nan() || a.cost >= 0.0 {
            out.push(Violation::NonNegativeCost {
                action: a.id,
                cost: a.cost,
            });
        }
    }

    let goal = d.goal_state();
    for &g in d.goal_vars() {
        let acts = d.actions_for(g);
        if acts.is_empty() {
            out.push(Violation::NoActionForGoalVariable { var: g });
        } else if acts.iter().all(|&a| d.action(a).p_stay_false >= 1.0) {
            out.push(Violation::UnachievableVariable { var: g });
        }
        for &p in d.parents(g) {
            if !goal.contains(p) {
                out.push(Violation::GoalNotClosed { var: g, parent: p });
            }
        }
    }
    if d.r_goal().is_nan() || d.r_goal() < 0.0 {
        out.push(Violation::NegativeGoalReward { value: d.r_goal() });
    }

    let b0 = d.b0();
    if b0.entries.is_empty() {
        out.push(Violation::EmptyInitialBelief);
    } else {
        let sum = b0.total();
        if (sum - 1.0).abs() > B0_TOL {
            out.push(Violation::InitialBeliefNotNormalized { sum });
        }
    }
    let mut seen = HashSet::new();
    for (s, p) in &b0.entries {
        if !(0.0..=1.0).contains(p) {
            out.push(Violation::InitialProbabilityOutOfRange {
                state: s.clone(),
                prob: *p,
            });
        }
        if !seen.insert(s) {
            out.push(Violation::DuplicateInitialState { state: s.clone() });
        }
        if let Some(var) = d.closure_violation(s) {
            out.push(Violation::InitialStateNotClosed {
                state: s.clone(),
                var,
            });
        }
        if !s.is_subset(goal) {
            out.push(Violation::GoalUnreachable { state: s.clone() });
        }
    }
    out
}

/// Variables left over by Kahn's algorithm, i.e. on or downstream of a cycle.
fn cyclic_vars(d: &Domain) -> Vec<VariableId> {
    let n = d.num_vars();
    let mut indeg: Vec<usize> = (0..n).map(|v| d.parents(v).len()).collect();
    let mut stack: Vec<_> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut done = vec![false; n];
    while let Some(v) = stack.pop() {
        done[v] = true;
        for &c in d.children(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                stack.push(c);
            }
        }
    }
    (0..n).filter(|&v| !done[v]).collect()
}
