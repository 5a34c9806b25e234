//! Heuristic depth-first exploration driven by the bound gap.
//!
//! Each trial descends from the initial belief, choosing the action with
//! the best upper-bound lookahead and the observation whose successor has
//! the largest probability-weighted excess gap, until the local gap falls
//! under `epsilon * gamma^-depth` or the depth limit is hit. Visited
//! beliefs are then backed up in reverse order.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::bounds::{backup, ValueBounds};
use super::pomdp::{Belief, FlatPomdp};

/// Successor beliefs this close to the current one end a trial.
const STALL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target gap at the initial belief.
    pub epsilon: f64,
    #[serde(with = "secs")]
    pub time_limit: Duration,
    pub max_depth: usize,
    pub gamma: f64,
    /// Optional cap on exploration trials, for budget-deterministic runs.
    pub max_trials: Option<usize>,
    /// Dominance pruning cadence, in backups.
    pub prune_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 200.0,
            time_limit: Duration::from_secs(30),
            max_depth: 450,
            gamma: 0.999,
            max_trials: None,
            prune_every: 50,
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// One line of the anytime log, written after every trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressRow {
    pub elapsed_secs: f64,
    pub backups: usize,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub bounds: ValueBounds,
    pub lower_b0: f64,
    pub upper_b0: f64,
    pub gap_at_b0: f64,
    pub wall_time: Duration,
    pub backup_count: usize,
    pub trials: usize,
    pub log: Vec<ProgressRow>,
}

pub struct Solver<'a> {
    pomdp: &'a FlatPomdp,
    bounds: ValueBounds,
    config: SolverConfig,
    backups: usize,
    trials: usize,
    points_after_prune: usize,
    deadline: Option<Instant>,
}

impl<'a> Solver<'a> {
    pub fn new(pomdp: &'a FlatPomdp, bounds: ValueBounds, config: SolverConfig) -> Self {
        Solver {
            pomdp,
            bounds,
            config,
            backups: 0,
            trials: 0,
            points_after_prune: 0,
            deadline: None,
        }
    }

    pub fn bounds(&self) -> &ValueBounds {
        &self.bounds
    }

    pub fn backups(&self) -> usize {
        self.backups
    }

    pub fn gap_at_initial(&self) -> f64 {
        self.bounds.gap(self.pomdp.initial())
    }

    fn out_of_time(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Runs one exploration trial and returns the beliefs it backed up,
    /// deepest last.
    pub fn trial(&mut self) -> Vec<Belief> {
        let p = self.pomdp;
        let gamma = self.config.gamma;
        let mut path = Vec::new();
        let mut b = p.initial().clone();
        let mut threshold = self.config.epsilon;
        for _depth in 0..self.config.max_depth {
            if self.bounds.gap(&b) <= threshold || self.out_of_time() {
                break;
            }
            let next_threshold = threshold / gamma;
            let mut best_q = f64::NEG_INFINITY;
            let mut best_succ = Vec::new();
            let here_upper = self.bounds.upper_value(&b);
            let mut best_a = 0;
            for a in 0..p.num_actions() {
                let r = p.expected_reward(&b, a);
                let q = if p.is_noop(&b, a) {
                    r + gamma * here_upper
                } else {
                    let succ = p.successors(&b, a);
                    let q = r + gamma * succ.iter().map(|(_, pz, post)| pz * self.bounds.upper_value(post)).sum::<f64>();
                    if q > best_q {
                        best_succ = succ;
                    }
                    q
                };
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            if p.is_noop(&b, best_a) {
                // the successor is b itself; backing it up is what changes
                // the choice next time
                path.push(b);
                break;
            }
            let mut best_excess = f64::NEG_INFINITY;
            let mut next = None;
            for (_, pz, post) in best_succ {
                let excess = pz * (self.bounds.gap(&post) - next_threshold);
                if excess > best_excess {
                    best_excess = excess;
                    next = Some(post);
                }
            }
            let Some(next) = next else { break };
            if next.l1_distance(&b) < STALL_TOL {
                path.push(b);
                break;
            }
            path.push(std::mem::replace(&mut b, next));
            threshold = next_threshold;
        }
        for belief in path.iter().rev() {
            backup(p, belief, &mut self.bounds, gamma);
            self.backups += 1;
            if self.config.prune_every > 0 && self.backups.is_multiple_of(self.config.prune_every) {
                self.bounds.prune();
                if self.bounds.points().len() >= 2 * self.points_after_prune.max(self.config.prune_every) {
                    self.bounds.prune_points();
                    self.points_after_prune = self.bounds.points().len();
                }
            }
        }
        self.trials += 1;
        path
    }

    /// Explores until the gap at the initial belief is at most epsilon, the
    /// time limit passes or the trial cap is reached.
    pub fn run(mut self) -> SolveResult {
        let start = Instant::now();
        self.deadline = Some(start + self.config.time_limit);
        let b0 = self.pomdp.initial().clone();
        let row = |s: &Self| {
            let lower = s.bounds.lower_value(&b0);
            let upper = s.bounds.upper_value(&b0);
            ProgressRow {
                elapsed_secs: start.elapsed().as_secs_f64(),
                backups: s.backups,
                lower,
                upper,
                gap: upper - lower,
            }
        };
        let mut log = vec![row(&self)];
        loop {
            let last = log.last().unwrap();
            if last.gap <= self.config.epsilon
                || self.out_of_time()
                || self.config.max_trials.is_some_and(|m| self.trials >= m)
            {
                break;
            }
            let path = self.trial();
            log.push(row(&self));
            if path.is_empty() {
                // Depth limit of zero or nothing left to refine.
                break;
            }
        }
        let last = *log.last().unwrap();
        SolveResult {
            bounds: self.bounds,
            lower_b0: last.lower,
            upper_b0: last.upper,
            gap_at_b0: last.gap,
            wall_time: start.elapsed(),
            backup_count: self.backups,
            trials: self.trials,
            log,
        }
    }
}

pub fn solve(p: &FlatPomdp, bounds: ValueBounds, config: SolverConfig) -> SolveResult {
    Solver::new(p, bounds, config).run()
}

/// CSV rendering of a progress log.
pub fn progress_csv(log: &[ProgressRow]) -> String {
    let mut out = String::from("elapsed_secs,backups,lower,upper,gap\n");
    for r in log {
        let _ = writeln!(out, "{:.6},{},{},{},{}", r.elapsed_secs, r.backups, r.lower, r.upper, r.gap);
    }
    out
}
