//! The state envelope, the restricted POMDP defined over it, and envelope
//! growth.

mod expand;
mod restricted;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Domain, SkillState};
use crate::trajectory::{evaluated_trajectory, Trajectory};

pub use expand::{expand_envelope, ExpandConfig, Expansion, ExpansionMethod};
pub use restricted::{build_envelope_pomdp, EnvelopeConfig, EnvelopePomdp, PState};

/// Ordered set of distinct, precondition-closed states, each carrying its
/// optimal fully observable value.
#[derive(Debug, Clone, Default)]
pub struct Envelope {
    states: Vec<SkillState>,
    index: HashMap<SkillState, usize>,
    values: Vec<f64>,
    goal_index: Option<usize>,
}

impl Envelope {
    pub fn new() -> Self {
        Self::default()
    }

    /// Envelope holding exactly the states of an evaluated trajectory.
    pub fn from_trajectory(d: &Domain, t: &Trajectory) -> Self {
        let mut env = Envelope::new();
        env.add_trajectory(d, t);
        env
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[SkillState] {
        &self.states
    }

    /// Fully observable value per state, aligned with [`Self::states`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, s: &SkillState) -> bool {
        self.index.contains_key(s)
    }

    pub fn index_of(&self, s: &SkillState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains_goal(&self) -> bool {
        self.goal_index.is_some()
    }

    pub fn goal_index(&self) -> Option<usize> {
        self.goal_index
    }

    /// Inserts `s` with `value` unless already present.
    pub fn insert(&mut self, d: &Domain, s: SkillState, value: f64) -> bool {
        if self.index.contains_key(&s) {
            return false;
        }
        let i = self.states.len();
        if d.is_goal(&s) {
            self.goal_index = Some(i);
        }
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.values.push(value);
        true
    }

    /// Adds every state of an evaluated trajectory; returns how many were new.
    pub fn add_trajectory(&mut self, d: &Domain, t: &Trajectory) -> usize {
        assert!(t.is_evaluated(), "trajectory must be evaluated before use");
        t.states()
            .zip(t.values())
            .filter(|(s, &v)| self.insert(d, s.clone(), v))
            .count()
    }

    /// Values keyed by state, for the initial-belief upper bound.
    pub fn value_map(&self) -> HashMap<SkillState, f64> {
        self.states.iter().cloned().zip(self.values.iter().copied()).collect()
    }
}

/// Trajectory envelope from a single start state.
pub fn initial_envelope(d: &Domain, s0: &SkillState) -> Result<Envelope> {
    let t = evaluated_trajectory(d, s0)?;
    Ok(Envelope::from_trajectory(d, &t))
}

/// Adds `s_new` and its whole trajectory to the goal. Returns the number of
/// states actually added (at most `L + 1`).
pub fn add_state_with_trajectory(d: &Domain, env: &mut Envelope, s_new: &SkillState) -> Result<usize> {
    if !d.is_closed(s_new) {
        return Err(Error::NotClosed(s_new.clone()));
    }
    let t = evaluated_trajectory(d, s_new)?;
    Ok(env.add_trajectory(d, &t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::chain;
    use crate::model::DomainSpec;

    fn two_roots() -> Domain {
        // 0 and 1 are roots, 2 needs both.
        let spec = DomainSpec {
            parents: vec![vec![], vec![], vec![0, 1]],
            ..chain(3).to_spec()
        };
        Domain::new(spec).unwrap()
    }

    #[test]
    fn trajectory_envelope_contains_goal() {
        let d = chain(3);
        let env = initial_envelope(&d, &d.empty_state()).unwrap();
        assert_eq!(env.len(), 4);
        assert!(env.contains_goal());
        assert_eq!(env.values()[3], 10000.0);
    }

    #[test]
    fn off_trajectory_state_adds_its_path() {
        let d = two_roots();
        let mut env = initial_envelope(&d, &d.empty_state()).unwrap();
        // trajectory is {} {0} {0,1} {0,1,2}
        let before = env.len();
        let s = SkillState::from_vars(3, [1]);
        let added = add_state_with_trajectory(&d, &mut env, &s).unwrap();
        // {1} is new, then {0,1} and the goal already exist
        assert_eq!(added, 1);
        assert_eq!(env.len(), before + 1);
        assert!(env.len() <= before + d.num_vars() + 1);
    }

    #[test]
    fn earlier_start_adds_missing_prefix() {
        let d = chain(5);
        let late = SkillState::from_vars(5, [0, 1, 2]);
        let mut env = initial_envelope(&d, &late).unwrap();
        assert_eq!(env.len(), 3);
        let added = add_state_with_trajectory(&d, &mut env, &d.empty_state()).unwrap();
        assert_eq!(added, 3);
        assert_eq!(env.len(), 6);
    }

    #[test]
    fn unclosed_state_is_rejected() {
        let d = chain(3);
        let mut env = initial_envelope(&d, &d.empty_state()).unwrap();
        let bad = SkillState::from_vars(3, [2]);
        assert!(matches!(add_state_with_trajectory(&d, &mut env, &bad), Err(Error::NotClosed(_))));
    }
}
