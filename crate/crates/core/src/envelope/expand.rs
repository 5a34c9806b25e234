use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Envelope;
use crate::agents::Agent;
use crate::model::{step_distribution, transition, Domain, SkillState, Transition};
use crate::rng::{derive_seed, rng_from, sample_index};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandConfig {
    /// Probability of a uniformly random action during rollouts.
    pub eps_r: f64,
    pub max_rollouts: usize,
    /// Defaults to the domain horizon when `None`.
    pub rollout_horizon: Option<usize>,
    pub seed: u64,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        ExpandConfig {
            eps_r: 0.1,
            max_rollouts: 20,
            rollout_horizon: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMethod {
    InitialState,
    Rollout,
    Exhaustive,
}

impl ExpansionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExpansionMethod::InitialState => "initial_state",
            ExpansionMethod::Rollout => "rollout",
            ExpansionMethod::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub state: SkillState,
    pub method: ExpansionMethod,
}

/// Finds one reachable state outside `env`, or `None` once the envelope
/// covers everything reachable from b0.
///
/// Tries a missing b0 state first, then ε-greedy rollouts of `agent`
/// (restarted from a freshly sampled b0 state each time), then every
/// envelope state under every action.
pub fn expand_envelope(d: &Domain, env: &Envelope, agent: &mut dyn Agent, cfg: &ExpandConfig) -> Option<Expansion> {
    let found = |state, method| Some(Expansion { state, method });

    for (s, p) in &d.b0().entries {
        if *p > 0.0 && !env.contains(s) {
            return found(s.clone(), ExpansionMethod::InitialState);
        }
    }

    let horizon = cfg.rollout_horizon.unwrap_or(d.horizon());
    let starts = &d.b0().entries;
    for r in 0..cfg.max_rollouts {
        let seed = derive_seed(cfg.seed, 0xe4, r as u64);
        let mut rng = rng_from(seed);
        agent.reset(seed);
        let mut s = starts[sample_index(&mut rng, starts.iter().map(|(_, p)| *p))].0.clone();
        for _ in 0..horizon {
            if d.is_goal(&s) {
                break;
            }
            let a = if rng.gen::<f64>() < cfg.eps_r {
                rng.gen_range(0..d.num_actions())
            } else {
                agent.act()
            };
            let outcomes = step_distribution(d, &s, a).expect("non-goal state has dynamics");
            let o = &outcomes[sample_index(&mut rng, outcomes.iter().map(|o| o.prob))];
            if !env.contains(&o.next) {
                return found(o.next.clone(), ExpansionMethod::Rollout);
            }
            agent.observe(a, o.obs);
            s = o.next.clone();
        }
    }

    for s in env.states() {
        if d.is_goal(s) {
            continue;
        }
        for a in 0..d.num_actions() {
            if let Transition::Flip { var, p_flip } = transition(d, s, a) {
                let next = s.with(var);
                if p_flip > 0.0 && !env.contains(&next) {
                    return found(next, ExpansionMethod::Exhaustive);
                }
            }
        }
    }
    None
}
