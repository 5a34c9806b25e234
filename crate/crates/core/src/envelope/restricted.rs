//! The restricted POMDP over an envelope.
//!
//! State layout: envelope states `0..n` in envelope order, then `OUT` (one
//! shot exit penalty), `TOUT` (zero-reward sink reached from `OUT`) and
//! `GOALSINK` (zero-reward sink reached from the goal state). Transitions
//! that leave the envelope are redirected to `OUT` with the same mass.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Envelope;
use crate::error::{Error, Result};
use crate::model::{transition, ActionId, Domain, SkillState, Transition};
use crate::rng::{rng_from, sample_index};
use crate::solver::{blind_lower, AlphaVector, Belief, FlatPomdp, ValueBounds};
use crate::trajectory::evaluated_trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub out_reward: f64,
    /// Outside states averaged into the out-state observation model.
    pub out_obs_samples: usize,
    pub seed: u64,
    /// Seed the lower bound with open-loop plans along the b0 trajectories.
    pub open_loop_seeding: bool,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            out_reward: -1000.0,
            out_obs_samples: 100,
            seed: 0,
            open_loop_seeding: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PState {
    Envelope(usize),
    Out,
    TerminalOut,
    GoalSink,
}

#[derive(Debug, Clone)]
pub struct EnvelopePomdp {
    pomdp: FlatPomdp,
    states: Vec<SkillState>,
    values: Vec<f64>,
    goal_index: usize,
    out_reward: f64,
    out_obs: Vec<Vec<f64>>,
    out_samples: usize,
    blind_value: f64,
    open_loop: Vec<Vec<ActionId>>,
}

impl EnvelopePomdp {
    pub fn pomdp(&self) -> &FlatPomdp {
        &self.pomdp
    }

    pub fn envelope_states(&self) -> &[SkillState] {
        &self.states
    }

    pub fn out(&self) -> usize {
        self.states.len()
    }

    pub fn terminal_out(&self) -> usize {
        self.states.len() + 1
    }

    pub fn goal_sink(&self) -> usize {
        self.states.len() + 2
    }

    pub fn goal_index(&self) -> usize {
        self.goal_index
    }

    pub fn out_reward(&self) -> f64 {
        self.out_reward
    }

    pub fn kind(&self, i: usize) -> PState {
        let n = self.states.len();
        match i {
            i if i < n => PState::Envelope(i),
            i if i == n => PState::Out,
            i if i == n + 1 => PState::TerminalOut,
            _ => PState::GoalSink,
        }
    }

    /// Per-action observation distribution shared by `OUT` and `TOUT`.
    pub fn out_observation_model(&self) -> &[Vec<f64>] {
        &self.out_obs
    }

    /// Number of distinct outside states averaged into the out model; zero
    /// means the uniform fallback was used.
    pub fn out_sample_count(&self) -> usize {
        self.out_samples
    }

    /// Corners are the fully observable values of this POMDP (see
    /// [`Self::mdp_corners`]). The lower bound is the blind value
    /// `horizon * min_cost + out_reward`, plus, when enabled, the values of
    /// the open-loop plans from [`Self::open_loop_plans`] and all their
    /// suffixes under discount `gamma`.
    pub fn initial_bounds(&self, gamma: f64) -> ValueBounds {
        let corners = self.mdp_corners(gamma);
        let blind = blind_lower(&self.pomdp, self.blind_value);
        let mut bounds = ValueBounds::new(corners, blind.clone());
        let p = &self.pomdp;
        for plan in &self.open_loop {
            let mut next = blind.values.clone();
            for &a in plan.iter().rev() {
                let values: Vec<f64> = (0..p.num_states())
                    .map(|s| {
                        let future: f64 = p.transition(a, s).iter().map(|&(t, q)| q * next[t]).sum();
                        p.reward(s, a) + gamma * future
                    })
                    .collect();
                bounds.push_alpha(AlphaVector { values: values.clone(), action: a });
                next = values;
            }
        }
        bounds.prune();
        bounds
    }

    /// Exact fully observable values under discount `gamma`, one backward
    /// pass over the envelope: states only gain variables, so apart from
    /// self-loops every transition leads to a larger state, `OUT` or a sink,
    /// and an action with self-loop mass `p` is worth
    /// `(r + gamma * w) / (1 - gamma * p)`. With `gamma = 1` this equals the
    /// trajectory values of the envelope states.
    pub fn mdp_corners(&self, gamma: f64) -> Vec<f64> {
        let n = self.states.len();
        let p = &self.pomdp;
        let mut v = vec![0.0; n + 3];
        v[n] = self.out_reward;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.states[i].count()));
        for i in order {
            if i == self.goal_index {
                v[i] = p.reward(i, 0);
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..p.num_actions() {
                let (mut stay, mut w) = (0.0, 0.0);
                for &(t, q) in p.transition(a, i) {
                    if t == i {
                        stay += q;
                    } else {
                        w += q * v[t];
                    }
                }
                let denom = 1.0 - gamma * stay;
                if denom > 1e-12 {
                    best = best.max((p.reward(i, a) + gamma * w) / denom);
                }
            }
            v[i] = if best.is_finite() { best } else { self.values[i] };
        }
        v
    }

    /// Action sequences that walk each b0 trajectory, repeating every step's
    /// action until its target is true with a given confidence.
    pub fn open_loop_plans(&self) -> &[Vec<ActionId>] {
        &self.open_loop
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.states.iter().map(|s| format!("env{s}")).collect();
        labels.extend(["OUT".into(), "TOUT".into(), "GOALSINK".into()]);
        labels
    }

    pub fn to_text(&self) -> String {
        self.pomdp.to_text(&self.labels())
    }
}

/// Builds the restricted POMDP for `env`.
pub fn build_envelope_pomdp(d: &Domain, env: &Envelope, cfg: &EnvelopeConfig) -> Result<EnvelopePomdp> {
    let goal_index = env.goal_index().ok_or(Error::EnvelopeLacksGoal)?;
    let n = env.len();
    let (out, tout, sink) = (n, n + 1, n + 2);
    let total = n + 3;
    let na = d.num_actions();
    let nz = d.num_obs();

    let mut transitions = vec![Vec::new(); na * total];
    let mut observations = vec![0.0; na * total * nz];
    let mut rewards = vec![0.0; total * na];

    for (i, s) in env.states().iter().enumerate() {
        let is_goal = i == goal_index;
        for (a, spec) in d.actions().iter().enumerate() {
            let row = &mut transitions[a * total + i];
            if is_goal {
                row.push((sink, 1.0));
                rewards[i * na + a] = d.r_goal();
            } else {
                match transition(d, s, a) {
                    Transition::Stay { .. } => row.push((i, 1.0)),
                    Transition::Flip { var, p_flip } => {
                        let next = env.index_of(&s.with(var)).unwrap_or(out);
                        if p_flip > 0.0 {
                            row.push((next, p_flip));
                        }
                        if p_flip < 1.0 {
                            row.push((i, 1.0 - p_flip));
                        }
                    }
                }
                rewards[i * na + a] = spec.cost;
            }
            let o = (a * total + i) * nz;
            observations[o..o + nz].copy_from_slice(spec.obs_dist(s.contains(spec.target)));
        }
    }

    let (out_obs, out_samples) = out_observation_model(d, env, cfg);
    let goal = &env.states()[goal_index];
    for (a, spec) in d.actions().iter().enumerate() {
        transitions[a * total + out].push((tout, 1.0));
        transitions[a * total + tout].push((tout, 1.0));
        transitions[a * total + sink].push((sink, 1.0));
        rewards[out * na + a] = cfg.out_reward;
        for (state, dist) in [
            (out, out_obs[a].as_slice()),
            (tout, out_obs[a].as_slice()),
            (sink, spec.obs_dist(goal.contains(spec.target))),
        ] {
            let o = (a * total + state) * nz;
            observations[o..o + nz].copy_from_slice(dist);
        }
    }

    let mut initial = Vec::new();
    for (s, p) in &d.b0().entries {
        initial.push((env.index_of(s).unwrap_or(out), *p));
    }
    let initial = Belief::from_weights(initial).ok_or_else(|| Error::Pomdp("initial belief has no mass".into()))?;

    let pomdp = FlatPomdp::new(total, na, nz, transitions, observations, rewards, initial)?;
    Ok(EnvelopePomdp {
        pomdp,
        states: env.states().to_vec(),
        values: env.values().to_vec(),
        goal_index,
        out_reward: cfg.out_reward,
        out_obs,
        out_samples,
        blind_value: d.horizon() as f64 * d.min_cost() + cfg.out_reward.min(0.0),
        open_loop: if cfg.open_loop_seeding {
            open_loop_plans(d, env)?
        } else {
            Vec::new()
        },
    })
}

const PLAN_CONFIDENCES: [f64; 3] = [0.9, 0.99, 0.999];

fn open_loop_plans(d: &Domain, env: &Envelope) -> Result<Vec<Vec<ActionId>>> {
    let mut starts: Vec<&SkillState> = d.b0().support().filter(|s| env.contains(s)).collect();
    if starts.is_empty() {
        starts.push(&env.states()[0]);
    }
    let mut trajectories = Vec::new();
    for s in starts {
        trajectories.push(evaluated_trajectory(d, s)?);
    }
    let mut plans: Vec<Vec<ActionId>> = Vec::new();
    for conf in PLAN_CONFIDENCES {
        let mut family: Vec<Vec<ActionId>> = Vec::new();
        for t in &trajectories {
            let mut plan = Vec::new();
            for &a in t.chosen_actions() {
                let stay = d.action(a).p_stay_false;
                let reps = if stay <= 0.0 {
                    1
                } else {
                    ((1.0 - conf).ln() / stay.ln()).ceil().max(1.0) as usize
                };
                plan.extend(std::iter::repeat_n(a, reps));
            }
            plan.truncate(d.horizon());
            // suffix plans add no new vectors
            if !family.iter().any(|q| q.ends_with(&plan)) {
                family.retain(|q| !plan.ends_with(q));
                family.push(plan);
            }
        }
        for plan in family {
            if !plans.contains(&plan) {
                plans.push(plan);
            }
        }
    }
    Ok(plans)
}

/// Averages the per-action observation models of up to
/// `cfg.out_obs_samples` distinct outside states, found by uniformly random
/// walks from b0 states. Gives up after ten attempts per wanted sample and
/// falls back to a uniform model when nothing was found.
fn out_observation_model(d: &Domain, env: &Envelope, cfg: &EnvelopeConfig) -> (Vec<Vec<f64>>, usize) {
    let nz = d.num_obs();
    let mut rng = rng_from(cfg.seed);
    let mut found: Vec<SkillState> = Vec::new();
    let mut seen = HashSet::new();
    let starts = &d.b0().entries;
    let budget = cfg.out_obs_samples.saturating_mul(10);
    let mut attempts = 0;
    while found.len() < cfg.out_obs_samples && attempts < budget && !starts.is_empty() {
        attempts += 1;
        let mut s = starts[sample_index(&mut rng, starts.iter().map(|(_, p)| *p))].0.clone();
        for _ in 0..=d.horizon() {
            if !env.contains(&s) {
                if seen.insert(s.clone()) {
                    found.push(s);
                }
                break;
            }
            if d.is_goal(&s) {
                break;
            }
            let a = rng.gen_range(0..d.num_actions());
            if let Transition::Flip { var, p_flip } = transition(d, &s, a) {
                if rng.gen::<f64>() < p_flip {
                    s.insert(var);
                }
            }
        }
    }

    if found.is_empty() {
        let uniform = vec![1.0 / nz as f64; nz];
        return (vec![uniform; d.num_actions()], 0);
    }
    let k = found.len() as f64;
    let model = d
        .actions()
        .iter()
        .map(|spec| {
            let mut acc = vec![0.0; nz];
            for s in &found {
                for (x, p) in acc.iter_mut().zip(spec.obs_dist(s.contains(spec.target))) {
                    *x += p;
                }
            }
            acc.iter().map(|x| x / k).collect()
        })
        .collect();
    (model, found.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::initial_envelope;
    use crate::model::fixtures::chain;
    use crate::model::{DomainSpec, InitialBelief};
    use crate::oracle::reachable_from_b0;

    fn row_sums_ok(p: &FlatPomdp) {
        for a in 0..p.num_actions() {
            for s in 0..p.num_states() {
                let sum: f64 = p.transition(a, s).iter().map(|(_, q)| q).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chain_trajectory_pomdp_layout() {
        let d = chain(3);
        let env = initial_envelope(&d, &d.empty_state()).unwrap();
        let ep = build_envelope_pomdp(&d, &env, &EnvelopeConfig::default()).unwrap();
        let p = ep.pomdp();
        assert_eq!(p.num_states(), 4 + 3);
        row_sums_ok(p);
        for a in 0..p.num_actions() {
            assert_eq!(p.transition(a, ep.out()), &[(ep.terminal_out(), 1.0)]);
            assert_eq!(p.transition(a, ep.goal_index()), &[(ep.goal_sink(), 1.0)]);
            assert_eq!(p.reward(ep.out(), a), -1000.0);
            assert_eq!(p.reward(ep.terminal_out(), a), 0.0);
            assert_eq!(p.reward(ep.goal_sink(), a), 0.0);
            assert_eq!(p.reward(ep.goal_index(), a), 10000.0);
        }
        assert!(p.is_zero_sink(ep.terminal_out()));
        assert!(p.is_zero_sink(ep.goal_sink()));
        assert_eq!(ep.kind(ep.out()), PState::Out);
        // chain: nothing outside is reachable, so the out model is uniform
        assert_eq!(ep.out_sample_count(), 0);
        assert_eq!(p.initial(), &Belief::point(0));
    }

    #[test]
    fn leaving_mass_goes_to_out() {
        // two independent roots: the trajectory {} {0} {0,1} misses {1}
        let spec = DomainSpec {
            parents: vec![vec![], vec![]],
            ..chain(2).to_spec()
        };
        let d = Domain::new(spec).unwrap();
        let env = initial_envelope(&d, &d.empty_state()).unwrap();
        let ep = build_envelope_pomdp(&d, &env, &EnvelopeConfig::default()).unwrap();
        let p = ep.pomdp();
        row_sums_ok(p);
        // teach variable 1 from {}: 0.8 to OUT, 0.2 stay
        let row = p.transition(2, 0);
        assert!(row.contains(&(ep.out(), 0.8)));
        assert!(row.iter().any(|&(s, q)| s == 0 && (q - 0.2).abs() < 1e-15));
        // the only outside state is {1}; its model is the average
        assert_eq!(ep.out_sample_count(), 1);
        let drill_var1 = &ep.out_observation_model()[3];
        assert!((drill_var1[0] - 0.1).abs() < 1e-12 && drill_var1[1] == 0.9);
        let drill_var0 = &ep.out_observation_model()[1];
        assert_eq!(drill_var0, &vec![0.8, 0.2]);
    }

    #[test]
    fn full_envelope_never_reaches_out() {
        let spec = DomainSpec {
            parents: vec![vec![], vec![], vec![0]],
            ..chain(3).to_spec()
        };
        let d = Domain::new(spec).unwrap();
        let mut env = Envelope::new();
        for s in reachable_from_b0(&d, 100).unwrap() {
            let v = crate::trajectory::state_value(&d, &s).unwrap();
            env.insert(&d, s, v);
        }
        let ep = build_envelope_pomdp(&d, &env, &EnvelopeConfig::default()).unwrap();
        let p = ep.pomdp();
        for a in 0..p.num_actions() {
            for s in 0..env.len() {
                assert!(p.transition(a, s).iter().all(|&(t, _)| t != ep.out()));
            }
        }
    }

    #[test]
    fn outside_b0_mass_goes_to_out() {
        let d = chain(3);
        let b0 = InitialBelief {
            entries: vec![(d.empty_state(), 0.25), (SkillState::from_vars(3, [0]), 0.75)],
        };
        let d = d.with_b0(b0);
        let env = initial_envelope(&d, &SkillState::from_vars(3, [0])).unwrap();
        let ep = build_envelope_pomdp(&d, &env, &EnvelopeConfig::default()).unwrap();
        let init = ep.pomdp().initial();
        assert_eq!(init.prob(ep.out()), 0.25);
        assert_eq!(init.prob(0), 0.75);
    }

    #[test]
    fn missing_goal_is_an_error() {
        let d = chain(2);
        let mut env = Envelope::new();
        env.insert(&d, d.empty_state(), 0.0);
        assert!(matches!(
            build_envelope_pomdp(&d, &env, &EnvelopeConfig::default()),
            Err(Error::EnvelopeLacksGoal)
        ));
    }

    #[test]
    fn undiscounted_corners_are_trajectory_values() {
        let d = chain(4);
        let env = initial_envelope(&d, &d.empty_state()).unwrap();
        let ep = build_envelope_pomdp(&d, &env, &EnvelopeConfig::default()).unwrap();
        let corners = ep.mdp_corners(1.0);
        for (c, v) in corners.iter().zip(env.values()) {
            assert!((c - v).abs() < 1e-9, "{c} vs {v}");
        }
        assert_eq!(&corners[env.len()..], &[-1000.0, 0.0, 0.0]);
        // discounting only lowers them here
        let discounted = ep.mdp_corners(0.99);
        assert!(discounted.iter().zip(&corners).all(|(d, c)| d <= c));
    }

    #[test]
    fn open_loop_seeding_tightens_lower_bound() {
        let d = chain(4);
        let env = initial_envelope(&d, &d.empty_state()).unwrap();
        let plain = EnvelopeConfig {
            open_loop_seeding: false,
            ..EnvelopeConfig::default()
        };
        let b0 = Belief::point(0);
        let blind = build_envelope_pomdp(&d, &env, &plain).unwrap().initial_bounds(0.999);
        let ep = build_envelope_pomdp(&d, &env, &EnvelopeConfig::default()).unwrap();
        let seeded = ep.initial_bounds(0.999);
        assert_eq!(blind.lower().len(), 1);
        assert_eq!(ep.open_loop_plans().len(), 3);
        assert!(seeded.lower_value(&b0) > blind.lower_value(&b0) + 1000.0);
        assert!(seeded.lower_value(&b0) <= seeded.upper_value(&b0));
    }
}
