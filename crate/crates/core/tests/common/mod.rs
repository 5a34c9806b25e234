//! Reference implementations shared by the integration and acceptance
//! tests. They only read model data through accessors and do their own
//! search, so they do not share code paths with the planner.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use rapid::generate::{random, RandomParams};
use rapid::model::step_distribution;
use rapid::rng::rng_from;
use rapid::solver::{Belief, FlatPomdp};
use rapid::{Domain, SkillState, VariableId};

/// Random POFUPP domain `i` of a reproducible family with 2 to `max_vars`
/// variables, varying fan-in and action counts.
pub fn random_domain(i: u64, max_vars: usize) -> Domain {
    let span = max_vars - 1;
    let params = RandomParams {
        num_vars: 2 + (i as usize % span),
        max_parents: 1 + (i as usize % 3),
        actions_per_var: 1 + (i as usize / 3 % 3),
        ..RandomParams::default()
    };
    random(&params, i).expect("random domain")
}

/// Breadth-first enumeration of every state reachable from `starts`.
/// Goal states are included but not expanded.
pub fn reachable(d: &Domain, starts: &[SkillState]) -> Vec<SkillState> {
    let mut seen: HashSet<SkillState> = starts.iter().cloned().collect();
    let mut queue: VecDeque<SkillState> = starts.iter().cloned().collect();
    let mut out = Vec::new();
    while let Some(s) = queue.pop_front() {
        if !d.is_goal(&s) {
            for a in 0..d.num_actions() {
                for o in step_distribution(d, &s, a).unwrap() {
                    if seen.insert(o.next.clone()) {
                        queue.push_back(o.next);
                    }
                }
            }
        }
        out.push(s);
    }
    out
}

pub fn b0_support(d: &Domain) -> Vec<SkillState> {
    d.b0().support().cloned().collect()
}

/// Undiscounted Gauss-Seidel value iteration on the fully observable MDP
/// over `states`, with the goal reward credited on arrival.
pub fn value_iteration(d: &Domain, states: &[SkillState]) -> HashMap<SkillState, f64> {
    let mut order: Vec<&SkillState> = states.iter().collect();
    order.sort_by_key(|s| Reverse(s.count()));
    let index: HashMap<&SkillState, usize> = order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let n = order.len();
    let goal: Vec<bool> = order.iter().map(|s| d.is_goal(s)).collect();
    // per state, per action: (next, prob, reward)
    let mut model: Vec<Vec<Vec<(usize, f64, f64)>>> = Vec::with_capacity(n);
    for (i, s) in order.iter().enumerate() {
        if goal[i] {
            model.push(Vec::new());
            continue;
        }
        let rows = (0..d.num_actions())
            .map(|a| {
                let mut row: Vec<(usize, f64, f64)> = Vec::new();
                for o in step_distribution(d, s, a).unwrap() {
                    let j = index[&o.next];
                    match row.iter_mut().find(|(t, _, _)| *t == j) {
                        Some(e) => e.1 += o.prob,
                        None => row.push((j, o.prob, o.reward)),
                    }
                }
                row
            })
            .collect();
        model.push(rows);
    }
    let mut v: Vec<f64> = goal.iter().map(|&g| if g { d.r_goal() } else { 0.0 }).collect();
    for _ in 0..1_000_000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if goal[i] {
                continue;
            }
            let best = model[i]
                .iter()
                .map(|row| row.iter().map(|&(j, p, r)| p * (r + v[j])).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[i]).abs());
            v[i] = best;
        }
        if delta < 1e-13 {
            break;
        }
    }
    order.into_iter().cloned().zip(v).collect()
}

/// Kahn's algorithm over the variables missing from `s0`, always taking the
/// highest ready index.
pub fn max_index_order(d: &Domain, s0: &SkillState) -> Vec<VariableId> {
    let mut order = Vec::new();
    let mut have = s0.clone();
    loop {
        let ready = (0..d.num_vars())
            .rev()
            .find(|&v| !have.contains(v) && d.parents(v).iter().all(|&p| have.contains(p)));
        match ready {
            Some(v) => {
                have.insert(v);
                order.push(v);
            }
            None => return order,
        }
    }
}

/// Uniformly random ready variable at each step.
pub fn random_order(d: &Domain, s0: &SkillState, seed: u64) -> Vec<VariableId> {
    let mut rng = rng_from(seed);
    let mut order = Vec::new();
    let mut have = s0.clone();
    loop {
        let ready: Vec<VariableId> = (0..d.num_vars())
            .filter(|&v| !have.contains(v) && d.parents(v).iter().all(|&p| have.contains(p)))
            .collect();
        match ready.choose(&mut rng) {
            Some(&v) => {
                have.insert(v);
                order.push(v);
            }
            None => return order,
        }
    }
}

pub fn is_topological(d: &Domain, s0: &SkillState, order: &[VariableId]) -> bool {
    let mut have = s0.clone();
    for &v in order {
        if have.contains(v) || !d.parents(v).iter().all(|&p| have.contains(p)) {
            return false;
        }
        have.insert(v);
    }
    have.count() == d.num_vars()
}

/// Random POMDP whose transitions only move to higher state indices; the
/// last state is a zero-reward sink, so every run ends within
/// `num_states - 1` steps.
pub fn random_acyclic_pomdp(seed: u64) -> FlatPomdp {
    let mut rng = rng_from(seed);
    let n = rng.gen_range(3..=6);
    let na = rng.gen_range(2..=3);
    let nz = rng.gen_range(2..=3);
    let mut transitions = Vec::with_capacity(na * n);
    let mut rewards = vec![0.0; n * na];
    for a in 0..na {
        for s in 0..n {
            if s == n - 1 {
                transitions.push(vec![(s, 1.0)]);
                continue;
            }
            let later: Vec<usize> = (s + 1..n).collect();
            let k = rng.gen_range(1..=later.len().min(3));
            let mut succ: Vec<usize> = later.choose_multiple(&mut rng, k).copied().collect();
            succ.sort_unstable();
            let w: Vec<f64> = succ.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            transitions.push(succ.into_iter().zip(w.into_iter().map(|x| x / total)).collect());
            rewards[s * na + a] = rng.gen_range(-10.0..10.0);
        }
    }
    let mut observations = Vec::with_capacity(na * n * nz);
    for _ in 0..na * n {
        let mut w: Vec<f64> = (0..nz).map(|_| rng.gen_range(0.0..1.0)).collect();
        if rng.gen_bool(0.3) {
            let j = rng.gen_range(0..nz);
            w = (0..nz).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        }
        let total: f64 = w.iter().sum();
        observations.extend(w.into_iter().map(|x| x / total));
    }
    let k = rng.gen_range(1..=3.min(n - 1));
    let starts: Vec<usize> = (0..n - 1).collect::<Vec<_>>().choose_multiple(&mut rng, k).copied().collect();
    let initial = Belief::from_weights(starts.into_iter().map(|s| (s, rng.gen_range(0.1..1.0))).collect()).unwrap();
    FlatPomdp::new(n, na, nz, transitions, observations, rewards, initial).unwrap()
}

pub fn dense(b: &Belief, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &(s, p) in b.entries() {
        out[s] = p;
    }
    out
}

/// Exact finite-horizon value of a dense belief by enumerating every
/// action/observation branch, undiscounted.
pub fn expectimax(p: &FlatPomdp, b: &[f64], depth: usize) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    let n = p.num_states();
    let mut best = f64::NEG_INFINITY;
    for a in 0..p.num_actions() {
        let mut q: f64 = (0..n).map(|s| b[s] * p.reward(s, a)).sum();
        let mut pred = vec![0.0; n];
        for (s, &bs) in b.iter().enumerate() {
            if bs > 0.0 {
                for &(t, pt) in p.transition(a, s) {
                    pred[t] += bs * pt;
                }
            }
        }
        for z in 0..p.num_obs() {
            let joint: Vec<f64> = (0..n).map(|t| pred[t] * p.obs_prob(a, t, z)).collect();
            let pz: f64 = joint.iter().sum();
            if pz > 1e-15 {
                let post: Vec<f64> = joint.iter().map(|x| x / pz).collect();
                q += pz * expectimax(p, &post, depth - 1);
            }
        }
        best = best.max(q);
    }
    best
}

/// Flat POMDP over every state reachable from b0. Goal states become
/// zero-reward sinks and the goal reward is paid on the step that enters
/// one. Returns the model and the state for each index.
pub fn flat_reachable_pomdp(d: &Domain) -> (FlatPomdp, Vec<SkillState>) {
    let states = reachable(d, &b0_support(d));
    let index: HashMap<&SkillState, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let (n, na, nz) = (states.len(), d.num_actions(), d.num_obs());
    let mut transitions = Vec::with_capacity(na * n);
    let mut rewards = vec![0.0; n * na];
    let mut observations = Vec::with_capacity(na * n * nz);
    for a in 0..na {
        let spec = d.action(a);
        for (i, s) in states.iter().enumerate() {
            observations.extend_from_slice(spec.obs_dist(s.contains(spec.target)));
            if d.is_goal(s) {
                transitions.push(vec![(i, 1.0)]);
                continue;
            }
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut r = spec.cost;
            for o in step_distribution(d, s, a).unwrap() {
                let j = index[&o.next];
                if d.is_goal(&o.next) {
                    r += o.prob * d.r_goal();
                }
                match row.iter_mut().find(|(t, _)| *t == j) {
                    Some(e) => e.1 += o.prob,
                    None => row.push((j, o.prob)),
                }
            }
            transitions.push(row);
            rewards[i * na + a] = r;
        }
    }
    let initial = Belief::from_weights(d.b0().entries.iter().map(|(s, p)| (index[s], *p)).collect()).unwrap();
    let p = FlatPomdp::new(n, na, nz, transitions, observations, rewards, initial).unwrap();
    (p, states)
}

/// Difference of two means with the unpaired standard error of that
/// difference.
pub fn diff_with_se(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, (a.1 * a.1 + b.1 * b.1).sqrt())
}
