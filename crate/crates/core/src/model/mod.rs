//! The factored process: variables, precondition DAG, actions, goal and
//! initial belief, plus one-step dynamics and the domain text format.

mod dynamics;
mod format;
mod state;
mod validate;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

pub use dynamics::{step_distribution, transition, Outcome, Transition};
pub use format::{load_domain, parse_domain, serialize_domain};
pub use state::SkillState;
pub use validate::{validate_domain, Violation};

pub type VariableId = usize;
pub type ActionId = usize;
pub type ObservationId = usize;

/// An action that can only ever make its target variable true.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSpec {
    pub id: ActionId,
    pub target: VariableId,
    /// Probability the target stays false although its preconditions hold.
    pub p_stay_false: f64,
    /// Observation distribution when the target is true after the action.
    pub obs_given_true: Vec<f64>,
    /// Observation distribution when the target is false after the action.
    pub obs_given_false: Vec<f64>,
    /// Per-step reward in non-goal states; negative.
    pub cost: f64,
}

impl ActionSpec {
    pub fn success_prob(&self) -> f64 {
        1.0 - self.p_stay_false
    }

    pub fn obs_dist(&self, target_true: bool) -> &[f64] {
        if target_true {
            &self.obs_given_true
        } else {
            &self.obs_given_false
        }
    }
}

/// Sparse distribution over possible start states.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InitialBelief {
    pub entries: Vec<(SkillState, f64)>,
}

impl InitialBelief {
    pub fn point(s: SkillState) -> Self {
        InitialBelief {
            entries: vec![(s, 1.0)],
        }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// States with nonzero probability, in file order.
    pub fn support(&self) -> impl Iterator<Item = &SkillState> {
        self.entries.iter().filter(|(_, p)| *p > 0.0).map(|(s, _)| s)
    }
}

/// Raw domain description. Turned into a [`Domain`] by [`Domain::new`],
/// which only checks that indices are in range; structural checks are
/// reported by [`validate_domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub name: String,
    pub num_vars: usize,
    pub parents: Vec<Vec<VariableId>>,
    pub actions: Vec<ActionSpec>,
    pub goal_vars: Vec<VariableId>,
    pub r_goal: f64,
    pub b0: InitialBelief,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    name: String,
    num_vars: usize,
    num_obs: usize,
    parents: Vec<Vec<VariableId>>,
    children: Vec<Vec<VariableId>>,
    actions: Vec<ActionSpec>,
    actions_by_target: Vec<Vec<ActionId>>,
    goal_vars: Vec<VariableId>,
    goal_state: SkillState,
    r_goal: f64,
    b0: InitialBelief,
    horizon: usize,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Domain> {
        let DomainSpec {
            name,
            num_vars,
            mut parents,
            actions,
            goal_vars,
            r_goal,
            b0,
            horizon,
        } = spec;
        let bad = |m: String| Err(Error::Param(m));
        if num_vars == 0 {
            return bad("a domain needs at least one variable".into());
        }
        if parents.len() != num_vars {
            return bad(format!(
                "expected parent lists for {num_vars} variables, got {}",
                parents.len()
            ));
        }
        let mut children = vec![Vec::new(); num_vars];
        for (v, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            ps.dedup();
            for &p in ps.iter() {
                if p >= num_vars {
                    return bad(format!("parent {p} of variable {v} out of range"));
                }
                children[p].push(v);
            }
        }
        let num_obs = actions.first().map_or(2, |a| a.obs_given_true.len());
        if num_obs == 0 {
            return bad("observation alphabet is empty".into());
        }
        let mut actions_by_target = vec![Vec::new(); num_vars];
        for (i, a) in actions.iter().enumerate() {
            if a.id != i {
                return bad(format!("action ids must be 0..n in order; found {} at {i}", a.id));
            }
            if a.target >= num_vars {
                return bad(format!("action {i} targets unknown variable {}", a.target));
            }
            if a.obs_given_true.len() != num_obs || a.obs_given_false.len() != num_obs {
                return bad(format!(
                    "action {i} does not use the shared {num_obs}-symbol observation alphabet"
                ));
            }
            actions_by_target[a.target].push(i);
        }
        let goal_set: BTreeSet<_> = goal_vars.iter().copied().collect();
        if let Some(&g) = goal_set.iter().find(|&&g| g >= num_vars) {
            return bad(format!("goal variable {g} out of range"));
        }
        let goal_vars: Vec<_> = goal_set.into_iter().collect();
        let goal_state = SkillState::from_vars(num_vars, goal_vars.iter().copied());
        for (s, _) in &b0.entries {
            if !s.fits(num_vars) {
                return bad(format!("initial state {s} out of range"));
            }
        }
        Ok(Domain {
            name,
            num_vars,
            num_obs,
            parents,
            children,
            actions,
            actions_by_target,
            goal_vars,
            goal_state,
            r_goal,
            b0,
            horizon,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn parents(&self, v: VariableId) -> &[VariableId] {
        &self.parents[v]
    }

    pub fn children(&self, v: VariableId) -> &[VariableId] {
        &self.children[v]
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn action(&self, a: ActionId) -> &ActionSpec {
        &self.actions[a]
    }

    /// Action ids targeting `v`, in increasing id order.
    pub fn actions_for(&self, v: VariableId) -> &[ActionId] {
        &self.actions_by_target[v]
    }

    pub fn goal_vars(&self) -> &[VariableId] {
        &self.goal_vars
    }

    pub fn goal_state(&self) -> &SkillState {
        &self.goal_state
    }

    pub fn r_goal(&self) -> f64 {
        self.r_goal
    }

    pub fn b0(&self) -> &InitialBelief {
        &self.b0
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn empty_state(&self) -> SkillState {
        SkillState::empty(self.num_vars)
    }

    /// Most negative per-step action reward.
    pub fn min_cost(&self) -> f64 {
        self.actions.iter().map(|a| a.cost).fold(0.0, f64::min)
    }

    pub fn to_spec(&self) -> DomainSpec {
        DomainSpec {
            name: self.name.clone(),
            num_vars: self.num_vars,
            parents: self.parents.clone(),
            actions: self.actions.clone(),
            goal_vars: self.goal_vars.clone(),
            r_goal: self.r_goal,
            b0: self.b0.clone(),
            horizon: self.horizon,
        }
    }

    /// Same domain with a different initial belief.
    pub fn with_b0(&self, b0: InitialBelief) -> Domain {
        Domain {
            b0,
            ..self.clone()
        }
    }

    /// First variable of `s` whose parents are not all true, if any.
    pub fn closure_violation(&self, s: &SkillState) -> Option<VariableId> {
        s.iter()
            .find(|&v| v >= self.num_vars || !self.preconditions_met(s, v))
    }

    pub fn is_closed(&self, s: &SkillState) -> bool {
        self.closure_violation(s).is_none()
    }

    pub fn preconditions_met(&self, s: &SkillState, v: VariableId) -> bool {
        preconditions_met(self, s, v)
    }

    pub fn is_goal(&self, s: &SkillState) -> bool {
        is_goal(self, s)
    }
}

/// True iff every parent of `v` is true in `s`.
pub fn preconditions_met(d: &Domain, s: &SkillState, v: VariableId) -> bool {
    d.parents[v].iter().all(|&p| s.contains(p))
}

/// True iff exactly the goal variables are true.
pub fn is_goal(d: &Domain, s: &SkillState) -> bool {
    s == &d.goal_state
}
