use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{ActionId, ObservationId};

/// Sparse probability distribution over flat POMDP states, sorted by state.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    entries: Vec<(usize, f64)>,
}

impl Belief {
    pub fn point(s: usize) -> Self {
        Belief {
            entries: vec![(s, 1.0)],
        }
    }

    /// Merges duplicate states, drops non-positive weights and normalizes.
    /// Returns `None` when no positive mass remains.
    pub fn from_weights(mut w: Vec<(usize, f64)>) -> Option<Self> {
        w.sort_unstable_by_key(|&(s, _)| s);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(w.len());
        for (s, p) in w {
            match entries.last_mut() {
                Some((last, q)) if *last == s => *q += p,
                _ => entries.push((s, p)),
            }
        }
        entries.retain(|&(_, p)| p > 0.0);
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if total <= 0.0 {
            return None;
        }
        for (_, p) in &mut entries {
            *p /= total;
        }
        Some(Belief { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.entries
            .binary_search_by_key(&s, |&(t, _)| t)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        dot(&self.entries, v)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// The state if this is a point mass.
    pub fn as_point(&self) -> Option<usize> {
        match self.entries[..] {
            [(s, _)] => Some(s),
            _ => None,
        }
    }

    /// Sum of absolute differences, over the union of supports.
    pub fn l1_distance(&self, other: &Belief) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut d) = (0, 0, 0.0);
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(&(s, p)), Some(&(t, q))) if s == t => {
                    d += (p - q).abs();
                    i += 1;
                    j += 1;
                }
                (Some(&(s, p)), Some(&(t, _))) if s < t => {
                    d += p;
                    i += 1;
                }
                (Some(&(_, p)), None) => {
                    d += p;
                    i += 1;
                }
                (_, Some(&(_, q))) => {
                    d += q;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        d
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

#[inline]
pub(crate) fn dot(entries: &[(usize, f64)], v: &[f64]) -> f64 {
    entries.iter().map(|&(s, p)| p * v[s]).sum()
}

/// Finite POMDP with sparse transitions and dense observation and reward
/// tables. Observations depend on the action and the successor state.
#[derive(Debug, Clone)]
pub struct FlatPomdp {
    num_states: usize,
    num_actions: usize,
    num_obs: usize,
    /// Indexed by `a * num_states + s`.
    transitions: Vec<Vec<(usize, f64)>>,
    /// Indexed by `(a * num_states + s') * num_obs + z`.
    observations: Vec<f64>,
    /// Indexed by `s * num_actions + a`.
    rewards: Vec<f64>,
    initial: Belief,
    /// `transitions[i]` is a certain self-loop.
    self_loops: Vec<bool>,
}

const ROW_TOL: f64 = 1e-9;

impl FlatPomdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        num_obs: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        observations: Vec<f64>,
        rewards: Vec<f64>,
        initial: Belief,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::Pomdp(m));
        if num_states == 0 || num_actions == 0 || num_obs == 0 {
            return bad("empty state, action or observation set".into());
        }
        if transitions.len() != num_actions * num_states {
            return bad("transition table has the wrong shape".into());
        }
        if observations.len() != num_actions * num_states * num_obs {
            return bad("observation table has the wrong shape".into());
        }
        if rewards.len() != num_states * num_actions {
            return bad("reward table has the wrong shape".into());
        }
        for (i, row) in transitions.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_TOL || row.iter().any(|&(t, p)| t >= num_states || p < 0.0) {
                return bad(format!(
                    "transition row for action {} state {} is not a distribution",
                    i / num_states,
                    i % num_states
                ));
            }
        }
        for (i, row) in observations.chunks(num_obs).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL || row.iter().any(|&p| p < 0.0) {
                return bad(format!(
                    "observation row for action {} state {} is not a distribution",
                    i / num_states,
                    i % num_states
                ));
            }
        }
        if initial.entries().iter().any(|&(s, _)| s >= num_states) || (initial.total() - 1.0).abs() > ROW_TOL {
            return bad("initial belief is not a distribution over states".into());
        }
        let self_loops = transitions
            .iter()
            .enumerate()
            .map(|(i, row)| matches!(row.as_slice(), [(t, p)] if *t == i % num_states && *p == 1.0))
            .collect();
        Ok(FlatPomdp {
            num_states,
            num_actions,
            num_obs,
            transitions,
            observations,
            rewards,
            initial,
            self_loops,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn initial(&self) -> &Belief {
        &self.initial
    }

    #[inline]
    pub fn transition(&self, a: ActionId, s: usize) -> &[(usize, f64)] {
        &self.transitions[a * self.num_states + s]
    }

    #[inline]
    pub fn obs_row(&self, a: ActionId, next: usize) -> &[f64] {
        let i = (a * self.num_states + next) * self.num_obs;
        &self.observations[i..i + self.num_obs]
    }

    #[inline]
    pub fn obs_prob(&self, a: ActionId, next: usize, z: ObservationId) -> f64 {
        self.observations[(a * self.num_states + next) * self.num_obs + z]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: ActionId) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    pub fn expected_reward(&self, b: &Belief, a: ActionId) -> f64 {
        b.entries().iter().map(|&(s, p)| p * self.reward(s, a)).sum()
    }

    /// `a` leaves `b` unchanged: every support state loops to itself and
    /// all of them share one observation row, so nothing is learned.
    pub fn is_noop(&self, b: &Belief, a: ActionId) -> bool {
        let e = b.entries();
        let base = a * self.num_states;
        if !e.iter().all(|&(s, _)| self.self_loops[base + s]) {
            return false;
        }
        let first = self.obs_row(a, e[0].0);
        e[1..].iter().all(|&(s, _)| self.obs_row(a, s) == first)
    }

    /// Zero-reward state that loops to itself under every action.
    pub fn is_zero_sink(&self, s: usize) -> bool {
        (0..self.num_actions).all(|a| {
            self.reward(s, a) == 0.0 && matches!(self.transition(a, s), [(t, p)] if *t == s && *p == 1.0)
        })
    }

    pub fn min_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Predicted successor distribution (unnormalized only by rounding),
    /// sorted by state.
    pub fn predict(&self, b: &Belief, a: ActionId) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(b.support_len() * 2);
        for &(s, p) in b.entries() {
            for &(t, q) in self.transition(a, s) {
                out.push((t, p * q));
            }
        }
        out.sort_unstable_by_key(|&(t, _)| t);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
        for (t, q) in out {
            match merged.last_mut() {
                Some((last, acc)) if *last == t => *acc += q,
                _ => merged.push((t, q)),
            }
        }
        merged
    }

    /// For each observation with positive probability: the observation, its
    /// probability under `(b, a)` and the posterior.
    pub fn successors(&self, b: &Belief, a: ActionId) -> Vec<(ObservationId, f64, Belief)> {
        let pred = self.predict(b, a);
        self.split_by_observation(&pred, a)
    }

    pub(crate) fn split_by_observation(&self, pred: &[(usize, f64)], a: ActionId) -> Vec<(ObservationId, f64, Belief)> {
        let mut out = Vec::with_capacity(self.num_obs);
        for z in 0..self.num_obs {
            let mut entries = Vec::with_capacity(pred.len());
            let mut pz = 0.0;
            for &(t, q) in pred {
                let w = q * self.obs_prob(a, t, z);
                if w > 0.0 {
                    entries.push((t, w));
                    pz += w;
                }
            }
            if pz > 0.0 {
                for (_, w) in &mut entries {
                    *w /= pz;
                }
                out.push((z, pz, Belief { entries }));
            }
        }
        out
    }

    /// Fully observable values by value iteration, stopping when the
    /// largest change drops below `tol` or after `max_sweeps`.
    pub fn mdp_values(&self, gamma: f64, tol: f64, max_sweeps: usize) -> Vec<f64> {
        let n = self.num_states;
        let mut v = vec![0.0; n];
        for _ in 0..max_sweeps {
            let mut delta: f64 = 0.0;
            for s in 0..n {
                let best = (0..self.num_actions)
                    .map(|a| self.reward(s, a) + gamma * dot(self.transition(a, s), &v))
                    .fold(f64::NEG_INFINITY, f64::max);
                delta = delta.max((best - v[s]).abs());
                v[s] = best;
            }
            if delta < tol {
                break;
            }
        }
        v
    }

    /// Plain-text dump of the model; see `docs/flat-pomdp-format.md`.
    pub fn to_text(&self, labels: &[String]) -> String {
        let mut out = String::from("flatpomdp 1\n");
        let _ = writeln!(out, "states {}", self.num_states);
        let _ = writeln!(out, "actions {}", self.num_actions);
        let _ = writeln!(out, "observations {}", self.num_obs);
        for (s, label) in labels.iter().enumerate().take(self.num_states) {
            let _ = writeln!(out, "label {s} {label}");
        }
        for &(s, p) in self.initial.entries() {
            let _ = writeln!(out, "start {s} {p}");
        }
        for a in 0..self.num_actions {
            for s in 0..self.num_states {
                for &(t, p) in self.transition(a, s) {
                    let _ = writeln!(out, "T {a} {s} {t} {p}");
                }
            }
        }
        for a in 0..self.num_actions {
            for s in 0..self.num_states {
                let row: Vec<_> = self.obs_row(a, s).iter().map(|p| p.to_string()).collect();
                let _ = writeln!(out, "O {a} {s} {}", row.join(","));
            }
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let _ = writeln!(out, "R {s} {a} {}", self.reward(s, a));
            }
        }
        out
    }
}

/// Bayes filter step: posterior after taking `a` and seeing `z`, with the
/// probability of `z`.
pub fn belief_update(p: &FlatPomdp, b: &Belief, a: ActionId, z: ObservationId) -> Result<(Belief, f64)> {
    let pred = p.predict(b, a);
    let mut entries = Vec::with_capacity(pred.len());
    let mut pz = 0.0;
    for (t, q) in pred {
        let w = q * p.obs_prob(a, t, z);
        if w > 0.0 {
            entries.push((t, w));
            pz += w;
        }
    }
    if pz <= 0.0 {
        return Err(Error::ImpossibleObservation { action: a, obs: z });
    }
    for (_, w) in &mut entries {
        *w /= pz;
    }
    Ok((Belief { entries }, pz))
}
