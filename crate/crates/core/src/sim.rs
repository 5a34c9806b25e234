//! Episode simulation in the true process and the evaluation statistics.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::model::{step_distribution, ActionId, Domain, ObservationId, SkillState};
use crate::rng::{derive_seed, rng_from, sample_index};
use crate::stats::{mean_stderr, CompensatedSum};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub action: ActionId,
    pub obs: ObservationId,
    /// State after the action.
    pub state: SkillState,
    pub value_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub total_reward: f64,
    pub steps: usize,
    pub reached_goal: bool,
    pub start: SkillState,
    pub trace: Option<Vec<TraceStep>>,
}

/// Runs one episode of at most `d.horizon()` actions. The goal reward is
/// credited once on arrival and the episode stops there; a start state that
/// is already the goal earns it without acting.
pub fn run_episode(d: &Domain, agent: &mut dyn Agent, seed: u64, keep_trace: bool) -> EpisodeResult {
    let mut rng = rng_from(derive_seed(seed, 0x51, 0));
    agent.reset(seed);
    let starts = &d.b0().entries;
    let start = starts[sample_index(&mut rng, starts.iter().map(|(_, p)| *p))].0.clone();
    let mut s = start.clone();
    let mut reward = CompensatedSum::default();
    let mut trace = keep_trace.then(Vec::new);
    let mut steps = 0;
    let mut reached_goal = d.is_goal(&s);
    while !reached_goal && steps < d.horizon() {
        let a = agent.act();
        let outcomes = step_distribution(d, &s, a).expect("non-goal state has dynamics");
        let o = &outcomes[sample_index(&mut rng, outcomes.iter().map(|o| o.prob))];
        reward.add(o.reward);
        steps += 1;
        s = o.next.clone();
        agent.observe(a, o.obs);
        if let Some(t) = trace.as_mut() {
            t.push(TraceStep {
                action: a,
                obs: o.obs,
                state: s.clone(),
                value_estimate: agent.value_estimate(),
            });
        }
        reached_goal = d.is_goal(&s);
    }
    if reached_goal {
        reward.add(d.r_goal());
    }
    EpisodeResult {
        seed,
        total_reward: reward.value(),
        steps,
        reached_goal,
        start,
        trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean_reward: f64,
    pub std_err: f64,
    pub mean_steps: f64,
    pub goal_rate: f64,
    pub episodes: usize,
}

impl EvalStats {
    pub fn from_episodes(eps: &[EpisodeResult]) -> Self {
        let rewards: Vec<f64> = eps.iter().map(|e| e.total_reward).collect();
        let (mean_reward, std_err) = mean_stderr(&rewards);
        let n = eps.len().max(1) as f64;
        let mut steps = CompensatedSum::default();
        eps.iter().for_each(|e| steps.add(e.steps as f64));
        let goals = eps.iter().filter(|e| e.reached_goal).count();
        EvalStats {
            mean_reward,
            std_err,
            mean_steps: steps.value() / n,
            goal_rate: goals as f64 / n,
            episodes: eps.len(),
        }
    }
}

/// Runs `episodes` episodes with seeds `seed_base..seed_base + episodes`,
/// each with a fresh agent from `factory`, in parallel. Results come back in
/// seed order.
pub fn evaluate_episodes<A, F>(d: &Domain, factory: F, episodes: usize, seed_base: u64) -> Vec<EpisodeResult>
where
    A: Agent,
    F: Fn() -> A + Sync,
{
    (0..episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut agent = factory();
            run_episode(d, &mut agent, seed_base.wrapping_add(i), false)
        })
        .collect()
}

pub fn evaluate<A, F>(d: &Domain, factory: F, episodes: usize, seed_base: u64) -> EvalStats
where
    A: Agent,
    F: Fn() -> A + Sync,
{
    EvalStats::from_episodes(&evaluate_episodes(d, factory, episodes, seed_base))
}

/// Per-episode CSV: `seed,reward,steps,reachedGoal`.
pub fn episodes_csv(eps: &[EpisodeResult]) -> String {
    let mut out = String::from("seed,reward,steps,reachedGoal\n");
    for e in eps {
        writeln!(out, "{},{},{},{}", e.seed, e.total_reward, e.steps, e.reached_goal).unwrap();
    }
    out
}

/// Trace CSV: `step,action,observation,value`.
pub fn trace_csv(trace: &[TraceStep]) -> String {
    let mut out = String::from("step,action,observation,value\n");
    for (i, t) in trace.iter().enumerate() {
        let v = t.value_estimate.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", i + 1, t.action, t.obs, v).unwrap();
    }
    out
}
