//! Value-function bounds: a lower bound as the pointwise max of alpha
//! vectors and an upper bound as corner values refined by belief/value
//! points with sawtooth interpolation.

use super::pomdp::{dot, Belief, FlatPomdp};
use crate::model::ActionId;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    pub action: ActionId,
}

impl AlphaVector {
    pub fn value(&self, b: &Belief) -> f64 {
        b.dot(&self.values)
    }

    fn dominates(&self, other: &AlphaVector) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a >= b)
    }
}

/// Blind lower bound: `value` everywhere except zero-reward sinks, whose
/// value is exactly 0.
pub fn blind_lower(p: &FlatPomdp, value: f64) -> AlphaVector {
    let values = (0..p.num_states())
        .map(|s| if p.is_zero_sink(s) { 0.0 } else { value })
        .collect();
    AlphaVector { values, action: 0 }
}

#[derive(Debug, Clone)]
pub struct ValueBounds {
    lower: Vec<AlphaVector>,
    corners: Vec<f64>,
    points: Vec<(Belief, f64)>,
}

impl ValueBounds {
    pub fn new(corners: Vec<f64>, initial_lower: AlphaVector) -> Self {
        assert_eq!(corners.len(), initial_lower.values.len());
        ValueBounds {
            lower: vec![initial_lower],
            corners,
            points: Vec::new(),
        }
    }

    pub fn lower(&self) -> &[AlphaVector] {
        &self.lower
    }

    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn points(&self) -> &[(Belief, f64)] {
        &self.points
    }

    /// Index and value of the best alpha vector at `entries` (which need
    /// not be normalized). Ties go to the lowest action id.
    pub(crate) fn best_alpha_at(&self, entries: &[(usize, f64)]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, alpha) in self.lower.iter().enumerate() {
            let v = dot(entries, &alpha.values);
            if v > best.1 || (v == best.1 && alpha.action < self.lower[best.0].action) {
                best = (i, v);
            }
        }
        best
    }

    pub fn lower_value(&self, b: &Belief) -> f64 {
        self.best_alpha_at(b.entries()).1
    }

    pub fn upper_value(&self, b: &Belief) -> f64 {
        let base = b.dot(&self.corners);
        let mut best = base;
        for (point, value) in &self.points {
            if let Some(phi) = ratio_min(b, point) {
                let v = base + phi * (value - point.dot(&self.corners));
                best = best.min(v);
            }
        }
        best
    }

    pub fn gap(&self, b: &Belief) -> f64 {
        self.upper_value(b) - self.lower_value(b)
    }

    pub fn best_action(&self, b: &Belief) -> ActionId {
        let (i, _) = self.best_alpha_at(b.entries());
        self.lower[i].action
    }

    /// Adds a vector known to lower-bound the value everywhere.
    pub fn push_alpha(&mut self, alpha: AlphaVector) {
        assert_eq!(alpha.values.len(), self.corners.len());
        self.lower.push(alpha);
    }

    /// Adds `alpha` if it improves the lower bound at `b`.
    pub(crate) fn add_alpha(&mut self, alpha: AlphaVector, b: &Belief) -> bool {
        if alpha.value(b) > self.lower_value(b) {
            self.lower.push(alpha);
            true
        } else {
            false
        }
    }

    /// Records `value` as an upper bound at `b` if it is tighter.
    pub(crate) fn add_upper(&mut self, b: &Belief, value: f64) -> bool {
        if value >= self.upper_value(b) {
            return false;
        }
        match b.as_point() {
            Some(s) => self.corners[s] = value,
            None => self.points.push((b.clone(), value)),
        }
        true
    }

    /// Drops upper-bound points that the corners and the remaining points
    /// already bound at least as tightly. Returns how many were removed.
    pub fn prune_points(&mut self) -> usize {
        let before = self.points.len();
        let mut i = 0;
        while i < self.points.len() {
            let (b, v) = self.points.swap_remove(i);
            if self.upper_value(&b) <= v {
                continue;
            }
            self.points.push((b, v));
            let last = self.points.len() - 1;
            self.points.swap(i, last);
            i += 1;
        }
        before - self.points.len()
    }

    /// Removes alpha vectors that are pointwise dominated by another one.
    pub fn prune(&mut self) -> usize {
        let n = self.lower.len();
        let mut keep = vec![true; n];
        for i in 0..n {
            if !keep[i] {
                continue;
            }
            for j in 0..n {
                if i != j && keep[j] && self.lower[j].dominates(&self.lower[i]) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let before = n;
        let mut it = keep.iter();
        self.lower.retain(|_| *it.next().unwrap());
        before - self.lower.len()
    }
}

/// `min over s in supp(point) of b(s) / point(s)`, or `None` when the point
/// has support outside `b` (the interpolation then adds nothing).
fn ratio_min(b: &Belief, point: &Belief) -> Option<f64> {
    let be = b.entries();
    let mut i = 0;
    let mut phi = f64::INFINITY;
    for &(s, q) in point.entries() {
        while i < be.len() && be[i].0 < s {
            i += 1;
        }
        if i == be.len() || be[i].0 != s {
            return None;
        }
        phi = phi.min(be[i].1 / q);
    }
    Some(phi)
}

pub fn upper_value(bounds: &ValueBounds, b: &Belief) -> f64 {
    bounds.upper_value(b)
}

pub fn best_action(bounds: &ValueBounds, b: &Belief) -> ActionId {
    bounds.best_action(b)
}

/// Lower and upper value at the backed-up belief afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackupReport {
    pub action: ActionId,
    pub lower: f64,
    pub upper: f64,
}

/// Point-based Bellman backup of both bounds at `b`.
pub fn backup(p: &FlatPomdp, b: &Belief, bounds: &mut ValueBounds, gamma: f64) -> BackupReport {
    let nz = p.num_obs();
    let (here, here_lower) = bounds.best_alpha_at(b.entries());
    let here_upper = bounds.upper_value(b);
    let mut best_lower = (0, f64::NEG_INFINITY, vec![0usize; nz]);
    let mut best_upper = f64::NEG_INFINITY;
    for a in 0..p.num_actions() {
        let r = p.expected_reward(b, a);
        let (q_lower, q_upper, choice) = if p.is_noop(b, a) {
            (r + gamma * here_lower, r + gamma * here_upper, vec![here; nz])
        } else {
            let pred = p.predict(b, a);
            let mut q_lower = r;
            let mut q_upper = r;
            let mut choice = vec![usize::MAX; nz];
            for (z, pz, post) in p.split_by_observation(&pred, a) {
                let (i, v) = bounds.best_alpha_at(post.entries());
                choice[z] = i;
                q_lower += gamma * pz * v;
                q_upper += gamma * pz * bounds.upper_value(&post);
            }
            if choice.contains(&usize::MAX) {
                let fallback = bounds.best_alpha_at(&pred).0;
                for c in &mut choice {
                    if *c == usize::MAX {
                        *c = fallback;
                    }
                }
            }
            (q_lower, q_upper, choice)
        };
        if q_lower > best_lower.1 {
            best_lower = (a, q_lower, choice);
        }
        best_upper = best_upper.max(q_upper);
    }

    let (a, _, choice) = best_lower;
    let n = p.num_states();
    // g(s') = sum_z O(a, s', z) * alpha_z(s')
    let g: Vec<f64> = (0..n)
        .map(|t| {
            p.obs_row(a, t)
                .iter()
                .zip(&choice)
                .map(|(o, &i)| o * bounds.lower[i].values[t])
                .sum()
        })
        .collect();
    let values = (0..n)
        .map(|s| p.reward(s, a) + gamma * dot(p.transition(a, s), &g))
        .collect();
    bounds.add_alpha(AlphaVector { values, action: a }, b);
    bounds.add_upper(b, best_upper);

    BackupReport {
        action: bounds.best_action(b),
        lower: bounds.lower_value(b),
        upper: bounds.upper_value(b),
    }
}
