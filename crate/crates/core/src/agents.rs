//! Policies that act in the true process: the envelope-POMDP policy, the
//! fixed-threshold no-forgetting heuristic and a uniform random baseline.

use rand::Rng;

use crate::model::{ActionId, Domain, ObservationId, VariableId};
use crate::rng::{rng_from, SimRng};
use crate::solver::{belief_update, Belief, FlatPomdp, ValueBounds};

pub trait Agent {
    /// Starts a new episode from the domain's initial belief.
    fn reset(&mut self, seed: u64);
    fn act(&mut self) -> ActionId;
    /// Feeds back the action actually executed and the observation seen.
    fn observe(&mut self, action: ActionId, obs: ObservationId);
    /// Agent's own estimate of the value of its current belief.
    fn value_estimate(&self) -> Option<f64> {
        None
    }
}

/// Executes the lower-bound policy of a solved envelope POMDP, tracking a
/// belief over the envelope states.
pub struct RapidAgent<'a> {
    pomdp: &'a FlatPomdp,
    bounds: &'a ValueBounds,
    out: usize,
    belief: Belief,
}

impl<'a> RapidAgent<'a> {
    /// `out` is the index of the out state, used when an observation is
    /// impossible under the current belief.
    pub fn new(pomdp: &'a FlatPomdp, bounds: &'a ValueBounds, out: usize) -> Self {
        RapidAgent {
            pomdp,
            bounds,
            out,
            belief: pomdp.initial().clone(),
        }
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }
}

impl Agent for RapidAgent<'_> {
    fn reset(&mut self, _seed: u64) {
        self.belief = self.pomdp.initial().clone();
    }

    fn act(&mut self) -> ActionId {
        self.bounds.best_action(&self.belief)
    }

    fn observe(&mut self, action: ActionId, obs: ObservationId) {
        self.belief = match belief_update(self.pomdp, &self.belief, action, obs) {
            Ok((b, _)) => b,
            Err(_) => Belief::point(self.out),
        };
    }

    fn value_estimate(&self) -> Option<f64> {
        Some(self.bounds.lower_value(&self.belief))
    }
}

/// Per-variable marginals for the fixed-threshold heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct FtnfState {
    pub marginals: Vec<f64>,
    pub threshold: f64,
    pub clamped: Vec<bool>,
}

impl FtnfState {
    /// Marginals from b0; anything already at or above the threshold is
    /// clamped to 1.
    pub fn from_domain(d: &Domain, threshold: f64) -> Self {
        let mut marginals = vec![0.0; d.num_vars()];
        for (s, p) in &d.b0().entries {
            for v in s.iter() {
                marginals[v] += p;
            }
        }
        let mut f = FtnfState {
            marginals,
            threshold,
            clamped: vec![false; d.num_vars()],
        };
        for v in 0..d.num_vars() {
            f.clamp_if_known(v);
        }
        f
    }

    fn clamp_if_known(&mut self, v: VariableId) {
        if self.marginals[v] >= self.threshold {
            self.marginals[v] = 1.0;
            self.clamped[v] = true;
        }
    }

    fn parents_known(&self, d: &Domain, v: VariableId) -> bool {
        d.parents(v).iter().all(|&p| self.marginals[p] >= self.threshold)
    }

    /// Highest-marginal variable below threshold whose parents are all at
    /// or above it (lowest index on ties).
    pub fn focus_variable(&self, d: &Domain) -> Option<VariableId> {
        let mut best: Option<VariableId> = None;
        for v in 0..d.num_vars() {
            let m = self.marginals[v];
            if m >= self.threshold || d.actions_for(v).is_empty() || !self.parents_known(d, v) {
                continue;
            }
            if best.is_none_or(|b| m > self.marginals[b]) {
                best = Some(v);
            }
        }
        best
    }

    /// Action for the focus variable with the highest success probability.
    /// When nothing qualifies, falls back to the lowest-index unclamped goal
    /// variable, or the lowest-index goal variable once all are clamped.
    pub fn step(&self, d: &Domain) -> ActionId {
        let v = self.focus_variable(d).unwrap_or_else(|| {
            let goals = d.goal_vars();
            goals
                .iter()
                .copied()
                .find(|&g| !self.clamped[g])
                .unwrap_or(goals[0])
        });
        most_reliable_action(d, v)
    }

    /// Transition mixing (only when the parents are believed known), then a
    /// Bayes update of the target from the action's observation model.
    pub fn update(&mut self, d: &Domain, a: ActionId, z: ObservationId) {
        let spec = d.action(a);
        let v = spec.target;
        if self.clamped[v] {
            return;
        }
        let mut m = self.marginals[v];
        if self.parents_known(d, v) {
            m += (1.0 - m) * spec.success_prob();
        }
        let lt = spec.obs_given_true[z];
        let lf = spec.obs_given_false[z];
        let denom = m * lt + (1.0 - m) * lf;
        if denom > 0.0 {
            m = m * lt / denom;
        }
        self.marginals[v] = m.clamp(0.0, 1.0);
        self.clamp_if_known(v);
    }
}

fn most_reliable_action(d: &Domain, v: VariableId) -> ActionId {
    let mut best = d.actions_for(v)[0];
    for &a in &d.actions_for(v)[1..] {
        if d.action(a).success_prob() > d.action(best).success_prob() {
            best = a;
        }
    }
    best
}

pub fn ftnf_step(f: &FtnfState, d: &Domain) -> ActionId {
    f.step(d)
}

pub fn ftnf_update(f: &FtnfState, d: &Domain, a: ActionId, z: ObservationId) -> FtnfState {
    let mut next = f.clone();
    next.update(d, a, z);
    next
}

pub struct FtnfAgent<'a> {
    domain: &'a Domain,
    threshold: f64,
    state: FtnfState,
}

impl<'a> FtnfAgent<'a> {
    pub fn new(domain: &'a Domain, threshold: f64) -> Self {
        FtnfAgent {
            domain,
            threshold,
            state: FtnfState::from_domain(domain, threshold),
        }
    }

    pub fn state(&self) -> &FtnfState {
        &self.state
    }
}

impl Agent for FtnfAgent<'_> {
    fn reset(&mut self, _seed: u64) {
        self.state = FtnfState::from_domain(self.domain, self.threshold);
    }

    fn act(&mut self) -> ActionId {
        self.state.step(self.domain)
    }

    fn observe(&mut self, action: ActionId, obs: ObservationId) {
        self.state.update(self.domain, action, obs);
    }
}

pub struct RandomAgent {
    num_actions: usize,
    rng: SimRng,
}

impl RandomAgent {
    pub fn new(num_actions: usize) -> Self {
        RandomAgent {
            num_actions,
            rng: rng_from(0),
        }
    }
}

impl Agent for RandomAgent {
    fn reset(&mut self, seed: u64) {
        self.rng = rng_from(seed ^ 0x5eed_a9e7);
    }

    fn act(&mut self) -> ActionId {
        self.rng.gen_range(0..self.num_actions)
    }

    fn observe(&mut self, _action: ActionId, _obs: ObservationId) {}
}
