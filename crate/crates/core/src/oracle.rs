//! Brute-force references: reachable-state enumeration and flat value
//! iteration over the fully observable process. These share no code with
//! the trajectory machinery they are used to check.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::{transition, Domain, SkillState, Transition};
use crate::trajectory::Trajectory;

/// Default enumeration budget for brute-force checks.
pub const ENUMERATION_BUDGET: usize = 1 << 16;

/// All states reachable from `starts`, in breadth-first discovery order.
/// Fails once more than `cap` states have been found.
pub fn reachable_states(d: &Domain, starts: &[SkillState], cap: usize) -> Result<Vec<SkillState>> {
    let mut seen: HashSet<SkillState> = HashSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    for s in starts {
        if seen.insert(s.clone()) {
            order.push(s.clone());
            queue.push_back(s.clone());
        }
    }
    while let Some(s) = queue.pop_front() {
        if order.len() > cap {
            return Err(Error::EnumerationBudget(cap));
        }
        if d.is_goal(&s) {
            continue;
        }
        for a in 0..d.num_actions() {
            if let Transition::Flip { var, p_flip } = transition(d, &s, a) {
                if p_flip > 0.0 {
                    let next = s.with(var);
                    if seen.insert(next.clone()) {
                        order.push(next.clone());
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    if order.len() > cap {
        return Err(Error::EnumerationBudget(cap));
    }
    Ok(order)
}

/// States reachable from the support of b0.
pub fn reachable_from_b0(d: &Domain, cap: usize) -> Result<Vec<SkillState>> {
    let starts: Vec<_> = d.b0().support().cloned().collect();
    reachable_states(d, &starts, cap)
}

/// Undiscounted value iteration on the flat fully observable process over
/// `states` (which must be closed under successors). The goal is absorbing
/// with value `r_goal`; every other step pays the action's cost. Actions
/// targeting non-goal variables are excluded since their successors can
/// never reach the goal. Sweeps run until the largest change is below `tol`.
pub fn value_iteration(d: &Domain, states: &[SkillState], tol: f64) -> HashMap<SkillState, f64> {
    let index: HashMap<&SkillState, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let goal = d.goal_state();
    // Sparse model: per state, per useful action, (cost, [(succ, p)]).
    let mut model: Vec<Vec<(f64, Vec<(usize, f64)>)>> = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let mut acts = Vec::new();
        if !d.is_goal(s) {
            for (a, spec) in d.actions().iter().enumerate() {
                if !goal.contains(spec.target) {
                    continue;
                }
                let succ = match transition(d, s, a) {
                    Transition::Stay { .. } => vec![(i, 1.0)],
                    Transition::Flip { var, p_flip } => {
                        let j = index[&s.with(var)];
                        vec![(j, p_flip), (i, 1.0 - p_flip)]
                    }
                };
                acts.push((spec.cost, succ));
            }
        }
        model.push(acts);
    }

    let mut v: Vec<f64> = states
        .iter()
        .map(|s| if d.is_goal(s) { d.r_goal() } else { 0.0 })
        .collect();
    // Gauss-Seidel sweeps, most advanced states first.
    let mut sweep: Vec<usize> = (0..states.len()).collect();
    sweep.sort_by_key(|&i| std::cmp::Reverse(states[i].count()));
    loop {
        let mut delta: f64 = 0.0;
        for &i in &sweep {
            if model[i].is_empty() {
                continue;
            }
            let best = model[i]
                .iter()
                .map(|(c, succ)| c + succ.iter().map(|&(j, p)| p * v[j]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[i]).abs());
            v[i] = best;
        }
        if delta < tol {
            break;
        }
    }
    states.iter().cloned().zip(v).collect()
}

/// Largest absolute difference between the trajectory's values and flat
/// value iteration over everything reachable from its start.
pub fn verify_theorem1(d: &Domain, t: &Trajectory) -> Result<f64> {
    let states = reachable_states(d, std::slice::from_ref(t.start()), ENUMERATION_BUDGET)?;
    let vi = value_iteration(d, &states, 1e-10);
    let mut worst: f64 = 0.0;
    for (s, v) in t.states().zip(t.values()) {
        worst = worst.max((vi[&s] - v).abs());
    }
    Ok(worst)
}
