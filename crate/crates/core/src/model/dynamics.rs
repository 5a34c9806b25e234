use super::{ActionId, Domain, ObservationId, SkillState, VariableId};
use crate::error::{Error, Result};

/// State-level effect of one action, before observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    /// State unchanged with probability 1; `target_true` is the post-action
    /// value of the action's target.
    Stay { target_true: bool },
    /// Target flips to true with probability `p_flip`, else stays false.
    Flip { var: VariableId, p_flip: f64 },
}

/// One-step effect of `a` in `s`. Caller guarantees `s` is not terminal.
pub fn transition(d: &Domain, s: &SkillState, a: ActionId) -> Transition {
    let spec = d.action(a);
    let v = spec.target;
    if s.contains(v) {
        Transition::Stay { target_true: true }
    } else if !d.preconditions_met(s, v) || spec.p_stay_false >= 1.0 {
        Transition::Stay { target_true: false }
    } else {
        Transition::Flip {
            var: v,
            p_flip: spec.success_prob(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub next: SkillState,
    pub obs: ObservationId,
    pub prob: f64,
    pub reward: f64,
}

/// Joint distribution over (next state, observation) for taking `a` in `s`,
/// with the per-step reward. Zero-probability outcomes are omitted.
pub fn step_distribution(d: &Domain, s: &SkillState, a: ActionId) -> Result<Vec<Outcome>> {
    if d.is_goal(s) {
        return Err(Error::TerminalState(s.clone()));
    }
    let spec = d.action(a);
    let mut out = Vec::with_capacity(2 * d.num_obs());
    let mut push = |next: &SkillState, target_true: bool, mass: f64| {
        for (z, &pz) in spec.obs_dist(target_true).iter().enumerate() {
            let prob = mass * pz;
            if prob > 0.0 {
                out.push(Outcome {
                    next: next.clone(),
                    obs: z,
                    prob,
                    reward: spec.cost,
                });
            }
        }
    };
    match transition(d, s, a) {
        Transition::Stay { target_true } => push(s, target_true, 1.0),
        Transition::Flip { var, p_flip } => {
            push(&s.with(var), true, p_flip);
            push(s, false, 1.0 - p_flip);
        }
    }
    Ok(out)
}
