//! The anytime planning loop and the baseline comparison.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::agents::{FtnfAgent, RandomAgent, RapidAgent};
use crate::envelope::{
    add_state_with_trajectory, build_envelope_pomdp, expand_envelope, initial_envelope, Envelope, EnvelopeConfig,
    EnvelopePomdp, ExpandConfig, ExpansionMethod,
};
use crate::error::{Error, Result};
use crate::model::Domain;
use crate::oracle::reachable_from_b0;
use crate::rng::{derive_seed, rng_from, sample_index};
use crate::sim::{evaluate_episodes, EpisodeResult, EvalStats};
use crate::solver::{solve, ProgressRow, SolveResult, SolverConfig, ValueBounds};
use crate::trajectory::b0_upper_bound;

const STREAM_START: u64 = 0x50;
const STREAM_OUT_OBS: u64 = 0x0b;
const STREAM_EXPAND: u64 = 0xe4;
const STREAM_EVAL: u64 = 0xe7;
const STREAM_BASELINE: u64 = 0xba;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub out_reward: f64,
    pub solver: SolverConfig,
    pub max_expansions: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub out_obs_samples: usize,
    pub eps_r: f64,
    pub max_rollouts: usize,
    /// Defaults to the domain horizon.
    pub rollout_horizon: Option<usize>,
    pub open_loop_seeding: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_reward: -1000.0,
            solver: SolverConfig::default(),
            max_expansions: 10,
            eval_episodes: 20,
            seed: 0,
            out_obs_samples: 100,
            eps_r: 0.1,
            max_rollouts: 20,
            rollout_horizon: None,
            open_loop_seeding: true,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(m.into()));
        if self.out_reward > 0.0 {
            return bad("out reward must not be positive");
        }
        if !(self.solver.epsilon > 0.0) {
            return bad("solver epsilon must be positive");
        }
        if !(self.solver.gamma > 0.0 && self.solver.gamma <= 1.0) {
            return bad("solver gamma must lie in (0, 1]");
        }
        if self.eval_episodes == 0 {
            return bad("eval episodes must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps_r) {
            return bad("eps_r must lie in [0, 1]");
        }
        Ok(())
    }

    fn solver_for(&self, d: &Domain) -> SolverConfig {
        SolverConfig {
            max_depth: self.solver.max_depth.max(d.horizon()),
            ..self.solver.clone()
        }
    }
}

/// One point of the anytime curve. Wall times are kept out of the CSV so
/// the CSV is reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub expansion: usize,
    pub envelope_size: usize,
    /// How the state that triggered this row was found; `None` for the
    /// initial trajectory.
    pub method: Option<ExpansionMethod>,
    pub stats: EvalStats,
    pub lower_b0: f64,
    pub upper_b0: f64,
    pub gap: f64,
    pub backups: usize,
    pub trials: usize,
    /// Every b0 start state is in the envelope.
    pub covers_b0: bool,
    pub solve_secs: f64,
    pub cumulative_secs: f64,
}

pub struct RunReport {
    pub rows: Vec<CurveRow>,
    /// Fully observable upper bound on the value of b0.
    pub v_bar_b0: f64,
    pub envelope: Envelope,
    pub pomdp: EnvelopePomdp,
    pub bounds: ValueBounds,
    pub episodes: Vec<EpisodeResult>,
    pub solver_log: Vec<ProgressRow>,
    /// No reachable state remained outside the envelope.
    pub exhausted: bool,
    pub wall_time: Duration,
}

/// Envelope solved and ready to act.
pub struct SolvedEnvelope {
    pub pomdp: EnvelopePomdp,
    pub result: SolveResult,
}

impl SolvedEnvelope {
    pub fn agent(&self) -> RapidAgent<'_> {
        RapidAgent::new(self.pomdp.pomdp(), &self.result.bounds, self.pomdp.out())
    }
}

pub fn solve_envelope(d: &Domain, env: &Envelope, cfg: &RunConfig, tag: u64) -> Result<SolvedEnvelope> {
    let ecfg = EnvelopeConfig {
        out_reward: cfg.out_reward,
        out_obs_samples: cfg.out_obs_samples,
        seed: derive_seed(cfg.seed, STREAM_OUT_OBS, tag),
        open_loop_seeding: cfg.open_loop_seeding,
    };
    let pomdp = build_envelope_pomdp(d, env, &ecfg)?;
    let result = solve(pomdp.pomdp(), pomdp.initial_bounds(cfg.solver.gamma), cfg.solver_for(d));
    Ok(SolvedEnvelope { pomdp, result })
}

fn covers_b0(d: &Domain, env: &Envelope) -> bool {
    d.b0().support().all(|s| env.contains(s))
}

/// Runs the anytime loop: a trajectory envelope from a sampled start state,
/// then solve, evaluate and expand until `max_expansions` or until nothing
/// reachable is left outside. `on_row` sees each row as it is produced.
pub fn rapid_run_with(d: &Domain, cfg: &RunConfig, on_row: &mut dyn FnMut(&CurveRow)) -> Result<RunReport> {
    cfg.check()?;
    let started = Instant::now();
    let v_bar_b0 = b0_upper_bound(d)?;
    let mut rng = rng_from(derive_seed(cfg.seed, STREAM_START, 0));
    let starts = &d.b0().entries;
    let s0 = starts[sample_index(&mut rng, starts.iter().map(|(_, p)| *p))].0.clone();
    let mut env = initial_envelope(d, &s0)?;
    let mut method = None;
    let mut rows = Vec::new();
    let mut expansion = 0;
    loop {
        let solved = solve_envelope(d, &env, cfg, expansion as u64)?;
        let seed_base = derive_seed(cfg.seed, STREAM_EVAL, expansion as u64);
        let episodes = evaluate_episodes(d, || solved.agent(), cfg.eval_episodes, seed_base);
        let r = &solved.result;
        let row = CurveRow {
            expansion,
            envelope_size: env.len(),
            method,
            stats: EvalStats::from_episodes(&episodes),
            lower_b0: r.lower_b0,
            upper_b0: r.upper_b0,
            gap: r.gap_at_b0,
            backups: r.backup_count,
            trials: r.trials,
            covers_b0: covers_b0(d, &env),
            solve_secs: r.wall_time.as_secs_f64(),
            cumulative_secs: started.elapsed().as_secs_f64(),
        };
        on_row(&row);
        rows.push(row);

        let next = if expansion < cfg.max_expansions {
            let ecfg = ExpandConfig {
                eps_r: cfg.eps_r,
                max_rollouts: cfg.max_rollouts,
                rollout_horizon: cfg.rollout_horizon,
                seed: derive_seed(cfg.seed, STREAM_EXPAND, expansion as u64),
            };
            Some(expand_envelope(d, &env, &mut solved.agent(), &ecfg))
        } else {
            None
        };
        match next {
            Some(Some(e)) => {
                add_state_with_trajectory(d, &mut env, &e.state)?;
                method = Some(e.method);
                expansion += 1;
            }
            found => {
                let SolvedEnvelope { pomdp, result } = solved;
                return Ok(RunReport {
                    rows,
                    v_bar_b0,
                    envelope: env,
                    pomdp,
                    bounds: result.bounds,
                    episodes,
                    solver_log: result.log,
                    exhausted: matches!(found, Some(None)),
                    wall_time: started.elapsed(),
                });
            }
        }
    }
}

pub fn rapid_run(d: &Domain, cfg: &RunConfig) -> Result<RunReport> {
    rapid_run_with(d, cfg, &mut |_| {})
}

pub const CURVE_HEADER: &str =
    "expansion,envelope_size,mean_reward,std_err,mean_steps,goal_rate,lower_b0,upper_b0,gap,backups,expansion_method,upper_bound_b0";

/// Curve CSV. `upper_bound_b0` is filled once the envelope covers b0.
pub fn curve_csv(rows: &[CurveRow], v_bar_b0: f64) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for r in rows {
        let s = &r.stats;
        let bound = if r.covers_b0 { v_bar_b0.to_string() } else { String::new() };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.expansion,
            r.envelope_size,
            s.mean_reward,
            s.std_err,
            s.mean_steps,
            s.goal_rate,
            r.lower_b0,
            r.upper_b0,
            r.gap,
            r.backups,
            r.method.map_or("initial", ExpansionMethod::as_str),
            bound,
        )
        .unwrap();
    }
    out
}

/// Whitespace-separated data for gnuplot: expansion, envelope size,
/// cumulative seconds, mean reward, standard error, gap.
pub fn curve_dat(rows: &[CurveRow]) -> String {
    let mut out = String::from("# expansion envelope_size cumulative_secs mean_reward std_err gap\n");
    for r in rows {
        writeln!(
            out,
            "{} {} {:.3} {} {} {}",
            r.expansion, r.envelope_size, r.cumulative_secs, r.stats.mean_reward, r.stats.std_err, r.gap
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineRow {
    pub method: String,
    pub stats: Option<EvalStats>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub run: RunConfig,
    pub ftnf_thresholds: Vec<f64>,
    /// Reachable-space enumeration is skipped above this many states.
    pub reachable_cap: usize,
    pub episodes: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            run: RunConfig::default(),
            ftnf_thresholds: vec![0.8, 0.9, 0.925, 0.95, 0.99, 0.9999],
            reachable_cap: 100_000,
            episodes: 200,
        }
    }
}

/// RAPID at its first b0-covering envelope ("early") and at the end of the
/// run, FTNF over the threshold sweep, uniform random, and the solve over
/// the whole reachable space when it is small enough. All methods are
/// scored on the same episode seeds.
pub fn run_baselines(d: &Domain, cfg: &BaselineConfig) -> Result<Vec<BaselineRow>> {
    let n = cfg.episodes;
    let seed_base = derive_seed(cfg.run.seed, STREAM_BASELINE, 0);
    let row = |method: String, stats, note: &str| BaselineRow {
        method,
        stats,
        note: note.into(),
    };
    let mut rows = Vec::new();

    let mut early: Option<(EvalStats, usize)> = None;
    let mut last_solved: Option<SolvedEnvelope> = None;
    {
        let run = RunConfig {
            eval_episodes: 1,
            ..cfg.run.clone()
        };
        run.check()?;
        let mut rng = rng_from(derive_seed(run.seed, STREAM_START, 0));
        let starts = &d.b0().entries;
        let s0 = starts[sample_index(&mut rng, starts.iter().map(|(_, p)| *p))].0.clone();
        let mut env = initial_envelope(d, &s0)?;
        for expansion in 0..=run.max_expansions {
            let solved = solve_envelope(d, &env, &run, expansion as u64)?;
            if early.is_none() && covers_b0(d, &env) {
                let eps = evaluate_episodes(d, || solved.agent(), n, seed_base);
                early = Some((EvalStats::from_episodes(&eps), env.len()));
            }
            let next = if expansion < run.max_expansions {
                let ecfg = ExpandConfig {
                    eps_r: run.eps_r,
                    max_rollouts: run.max_rollouts,
                    rollout_horizon: run.rollout_horizon,
                    seed: derive_seed(run.seed, STREAM_EXPAND, expansion as u64),
                };
                expand_envelope(d, &env, &mut solved.agent(), &ecfg)
            } else {
                None
            };
            last_solved = Some(solved);
            match next {
                Some(e) => {
                    add_state_with_trajectory(d, &mut env, &e.state)?;
                }
                None => break,
            }
        }
        let solved = last_solved.as_ref().expect("at least one envelope solved");
        match early {
            Some((s, size)) => rows.push(row("rapid-early".into(), Some(s), &format!("envelope {size}"))),
            None => rows.push(row("rapid-early".into(), None, "b0 never covered")),
        }
        let eps = evaluate_episodes(d, || solved.agent(), n, seed_base);
        let size = solved.pomdp.envelope_states().len();
        rows.push(row("rapid-final".into(), Some(EvalStats::from_episodes(&eps)), &format!("envelope {size}")));
    }

    for &t in &cfg.ftnf_thresholds {
        let eps = evaluate_episodes(d, || FtnfAgent::new(d, t), n, seed_base);
        rows.push(row(format!("ftnf-{t}"), Some(EvalStats::from_episodes(&eps)), ""));
    }

    let eps = evaluate_episodes(d, || RandomAgent::new(d.num_actions()), n, seed_base);
    rows.push(row("random".into(), Some(EvalStats::from_episodes(&eps)), ""));

    match reachable_solve(d, &cfg.run, cfg.reachable_cap) {
        Ok(solved) => {
            let eps = evaluate_episodes(d, || solved.agent(), n, seed_base);
            let size = solved.pomdp.envelope_states().len();
            rows.push(row("reachable".into(), Some(EvalStats::from_episodes(&eps)), &format!("{size} states")));
        }
        Err(Error::EnumerationBudget(cap)) => {
            rows.push(row("reachable".into(), None, &format!("skipped: more than {cap} reachable states")));
        }
        Err(e) => return Err(e),
    }
    Ok(rows)
}

/// Envelope made of every state reachable from b0, solved.
pub fn reachable_solve(d: &Domain, cfg: &RunConfig, cap: usize) -> Result<SolvedEnvelope> {
    let states = reachable_from_b0(d, cap)?;
    let mut env = Envelope::new();
    for s in &states {
        if !env.contains(s) {
            add_state_with_trajectory(d, &mut env, s)?;
        }
    }
    solve_envelope(d, &env, cfg, u64::MAX)
}

pub fn baselines_csv(rows: &[BaselineRow]) -> String {
    let mut out = String::from("method,mean_reward,std_err,mean_steps,goal_rate,episodes,note\n");
    for r in rows {
        match &r.stats {
            Some(s) => writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method, s.mean_reward, s.std_err, s.mean_steps, s.goal_rate, s.episodes, r.note
            ),
            None => writeln!(out, "{},,,,,0,{}", r.method, r.note),
        }
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::chain;
    use crate::model::{InitialBelief, SkillState};

    fn quick(max_expansions: usize) -> RunConfig {
        RunConfig {
            max_expansions,
            eval_episodes: 10,
            solver: SolverConfig {
                epsilon: 20.0,
                max_trials: Some(30),
                ..SolverConfig::default()
            },
            ..RunConfig::default()
        }
    }

    fn deterministic_chain(n: usize) -> Domain {
        let mut spec = chain(n, 50).unwrap().to_spec();
        for a in spec.actions.iter_mut() {
            a.p_stay_false = 0.0;
        }
        Domain::new(spec).unwrap()
    }

    #[test]
    fn deterministic_chain_matches_upper_bound() {
        let d = deterministic_chain(3);
        let report = rapid_run(&d, &quick(0)).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.v_bar_b0, 10000.0 - 3.0);
        assert_eq!(report.rows[0].stats.mean_reward, report.v_bar_b0);
    }

    #[test]
    fn missing_starts_are_added_first() {
        let d = chain(4, 60).unwrap();
        let b0 = InitialBelief {
            entries: vec![
                (SkillState::empty(4), 0.4),
                (SkillState::from_vars(4, [0]), 0.3),
                (SkillState::from_vars(4, [0, 1]), 0.3),
            ],
        };
        let d = d.with_b0(b0);
        let report = rapid_run(&d, &quick(2)).unwrap();
        let methods: Vec<_> = report.rows.iter().map(|r| r.method).collect();
        // The chain start states all lie on the trajectory from the empty
        // state, so coverage may already hold at row 0.
        assert!(methods.iter().skip(1).all(|m| m.is_some()));
        assert!(report.rows.last().unwrap().covers_b0);
    }

    #[test]
    fn curve_csv_is_deterministic() {
        let d = chain(4, 60).unwrap();
        let a = rapid_run(&d, &quick(3)).unwrap();
        let b = rapid_run(&d, &quick(3)).unwrap();
        let (ca, cb) = (curve_csv(&a.rows, a.v_bar_b0), curve_csv(&b.rows, b.v_bar_b0));
        assert_eq!(ca, cb);
        assert!(ca.starts_with(CURVE_HEADER));
    }

    #[test]
    fn rejects_bad_config() {
        let d = chain(2, 10).unwrap();
        let cfg = RunConfig {
            eval_episodes: 0,
            ..RunConfig::default()
        };
        assert!(matches!(rapid_run(&d, &cfg), Err(Error::Param(_))));
    }
}
