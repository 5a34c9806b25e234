//! Start-to-goal trajectories built from a topological order of the missing
//! variables, with their exact fully observable values.
//!
//! Because effects are positive-only and each variable has a unique
//! conjunctive precondition, every precondition-respecting order of the
//! missing variables reaches the goal at the same cost. The optimal
//! fully observable value of a state is then the goal reward plus, for each
//! missing variable, the best expected cost of acquiring it with a single
//! repeated action: `cost / (1 - p_stay_false)`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{ActionId, ActionSpec, Domain, SkillState, VariableId};
use crate::stats::CompensatedSum;

/// States from a start to the goal, adding one variable at a time.
///
/// Stored as the start state plus the variable order; the states themselves
/// are materialized on demand so construction stays linear in `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start: SkillState,
    var_order: Vec<VariableId>,
    /// `values[i]` is the value of state `i`; empty until evaluated.
    values: Vec<f64>,
    /// `chosen_actions[i]` moves state `i` to state `i + 1`.
    chosen_actions: Vec<ActionId>,
}

impl Trajectory {
    pub fn start(&self) -> &SkillState {
        &self.start
    }

    pub fn var_order(&self) -> &[VariableId] {
        &self.var_order
    }

    /// Number of states, i.e. `var_order().len() + 1`.
    pub fn len(&self) -> usize {
        self.var_order.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn chosen_actions(&self) -> &[ActionId] {
        &self.chosen_actions
    }

    pub fn is_evaluated(&self) -> bool {
        self.values.len() == self.len()
    }

    /// Value of the start state, if evaluated.
    pub fn start_value(&self) -> Option<f64> {
        self.values.first().copied()
    }

    pub fn states(&self) -> impl Iterator<Item = SkillState> + '_ {
        let mut cur = Some(self.start.clone());
        let mut order = self.var_order.iter();
        std::iter::from_fn(move || {
            let out = cur.take()?;
            if let Some(&v) = order.next() {
                cur = Some(out.with(v));
            }
            Some(out)
        })
    }

    pub fn state(&self, i: usize) -> SkillState {
        assert!(i < self.len());
        let mut s = self.start.clone();
        for &v in &self.var_order[..i] {
            s.insert(v);
        }
        s
    }

    pub fn goal(&self) -> SkillState {
        self.state(self.var_order.len())
    }

    /// One state per line: index, state, value and chosen action when known.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states().enumerate() {
            let _ = write!(out, "{i}\t{s}");
            if let Some(v) = self.values.get(i) {
                let _ = write!(out, "\tV={v}");
            }
            if let Some(a) = self.chosen_actions.get(i) {
                let _ = write!(out, "\ta*={a}");
            }
            out.push('\n');
        }
        out
    }
}

/// Variables false in `s0` and true in the goal, ordered so that each comes
/// after its ancestors. Kahn's algorithm with smallest-index-first ties.
pub fn topological_order(d: &Domain, s0: &SkillState) -> Result<Vec<VariableId>> {
    let n = d.num_vars();
    let mut missing = vec![false; n];
    let mut count = 0;
    for &g in d.goal_vars() {
        if !s0.contains(g) {
            missing[g] = true;
            count += 1;
        }
    }
    let mut indeg = vec![0usize; n];
    let mut ready = BinaryHeap::new();
    for &g in d.goal_vars() {
        if !missing[g] {
            continue;
        }
        for &p in d.parents(g) {
            if missing[p] {
                indeg[g] += 1;
            } else if !s0.contains(p) {
                return Err(Error::GoalUnreachable(s0.clone()));
            }
        }
        if indeg[g] == 0 {
            ready.push(Reverse(g));
        }
    }
    let mut order = Vec::with_capacity(count);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in d.children(v) {
            if missing[c] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
    }
    if order.len() != count {
        return Err(Error::Cycle);
    }
    Ok(order)
}

/// Unevaluated trajectory that adds `order` to `s0` one variable at a time.
pub fn build_trajectory(s0: &SkillState, order: Vec<VariableId>) -> Trajectory {
    Trajectory {
        start: s0.clone(),
        var_order: order,
        values: Vec::new(),
        chosen_actions: Vec::new(),
    }
}

/// Expected reward of making the target true by repeating `a`.
pub fn effective_reward(a: &ActionSpec) -> Result<f64> {
    if a.p_stay_false >= 1.0 {
        return Err(Error::Unachievable(a.id));
    }
    Ok(a.cost / (1.0 - a.p_stay_false))
}

/// Best action for acquiring `v` and its effective reward. Ties go to the
/// lowest action id.
pub fn best_action_for(d: &Domain, v: VariableId) -> Result<(ActionId, f64)> {
    let mut best: Option<(ActionId, f64)> = None;
    for &a in d.actions_for(v) {
        let Ok(r) = effective_reward(d.action(a)) else {
            continue;
        };
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((a, r));
        }
    }
    best.ok_or(Error::NoActionForVariable(v))
}

/// Fills values and chosen actions by walking back from the goal.
pub fn trajectory_values(d: &Domain, mut t: Trajectory) -> Result<Trajectory> {
    let k = t.var_order.len();
    let mut values = vec![0.0; k + 1];
    let mut chosen = vec![0; k];
    let mut acc = CompensatedSum::default();
    acc.add(d.r_goal());
    values[k] = acc.value();
    for i in (0..k).rev() {
        let (a, r) = best_action_for(d, t.var_order[i])?;
        chosen[i] = a;
        acc.add(r);
        values[i] = acc.value();
    }
    t.values = values;
    t.chosen_actions = chosen;
    Ok(t)
}

/// Order, build and evaluate in one call.
pub fn evaluated_trajectory(d: &Domain, s0: &SkillState) -> Result<Trajectory> {
    let order = topological_order(d, s0)?;
    trajectory_values(d, build_trajectory(s0, order))
}

/// Optimal fully observable value of `s`, i.e. the start value of its
/// trajectory, without materializing anything.
pub fn state_value(d: &Domain, s: &SkillState) -> Result<f64> {
    let mut v = CompensatedSum::default();
    v.add(d.r_goal());
    for &g in d.goal_vars() {
        if !s.contains(g) {
            v.add(best_action_for(d, g)?.1);
        }
    }
    Ok(v.value())
}

/// Upper bound on the value of the initial belief: the b0-weighted sum of
/// the start states' values.
pub fn belief_upper_bound(d: &Domain, values_by_start: &HashMap<SkillState, f64>) -> Result<f64> {
    let mut total = 0.0;
    for (s, p) in &d.b0().entries {
        let v = values_by_start
            .get(s)
            .ok_or_else(|| Error::MissingValue(s.clone()))?;
        total += p * v;
    }
    Ok(total)
}

/// Upper bound computed directly from the domain.
pub fn b0_upper_bound(d: &Domain) -> Result<f64> {
    let mut values = HashMap::new();
    for s in d.b0().support() {
        values.insert(s.clone(), evaluated_trajectory(d, s)?.start_value().unwrap());
    }
    for (s, p) in &d.b0().entries {
        if *p == 0.0 {
            values.insert(s.clone(), 0.0);
        }
    }
    belief_upper_bound(d, &values)
}
