//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 3 8`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::HashSet;
use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rapid::agents::{FtnfAgent, RandomAgent, RapidAgent};
use rapid::envelope::{add_state_with_trajectory, expand_envelope, initial_envelope, ExpandConfig};
use rapid::experiment::{rapid_run, rapid_run_with, run_baselines, solve_envelope, BaselineConfig, RunConfig};
use rapid::generate::{bigmath, smallmath, GeneratorKind};
use rapid::sim::{evaluate, EvalStats};
use rapid::solver::{blind_lower, Solver, SolverConfig, ValueBounds};
use rapid::trajectory::{b0_upper_bound, build_trajectory, evaluated_trajectory, topological_order, trajectory_values};
use rapid::{Domain, SkillState};

use common::*;

type Check = Result<(bool, String), String>;

// Tolerances and budgets, as the criteria state them.
const THEOREM1_TOL: f64 = 1e-8;
const THEOREM1_BUDGET: Duration = Duration::from_secs(60);
const ORDER_TOL: f64 = 1e-12;
const SOLVER_TOL: f64 = 1e-4;
const SANDWICH_TOL: f64 = 1e-6;
const DOMINANCE_SE: f64 = 3.0;
const MATCH_SE: f64 = 2.0;
const LINEAR_SLACK: f64 = 3.0;
const BIGMATH_SCALE_BUDGET: Duration = Duration::from_millis(10);
const ANYTIME_BUDGET: Duration = Duration::from_secs(15 * 60);
const EPISODES: usize = 200;

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Check); 10] = [
        (1, "trajectory values equal value iteration", theorem1),
        (2, "start value independent of topological order", order_invariance),
        (3, "solver matches exhaustive policy-tree search", solver_soundness),
        (4, "envelope expansion closes on the reachable set", envelope_closure),
        (5, "no agent beats the b0 upper bound", dominance),
        (6, "full-coverage RAPID matches the flat reachable solve", full_envelope),
        (7, "baseline ordering", baseline_ordering),
        (8, "linear-time trajectory construction", linear_time),
        (9, "anytime planning on a 122-variable domain", anytime),
        (10, "plan output is deterministic", determinism),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {n:>2}: {verdict}  {name}: {detail} [{:.1}s]", t.elapsed().as_secs_f64());
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn theorem1() -> Check {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..50 {
        let d = random_domain(i, 10);
        let states = reachable(&d, &[d.empty_state()]);
        let vi = value_iteration(&d, &states);
        for s in &states {
            let traj = evaluated_trajectory(&d, s).map_err(err)?;
            for (k, st) in traj.states().enumerate() {
                worst = worst.max((traj.values()[k] - vi[&st]).abs());
                checked += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    Ok((
        worst <= THEOREM1_TOL && elapsed < THEOREM1_BUDGET,
        format!("50 domains, {checked} trajectory states, max error {worst:.2e}"),
    ))
}

fn order_invariance() -> Check {
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    let mut domains = 0;
    for i in 0..50 {
        let d = random_domain(i, 10);
        let mut starts = b0_support(&d);
        starts.push(d.empty_state());
        let mut compared = false;
        for s0 in &starts {
            let a = topological_order(&d, s0).map_err(err)?;
            let mut b = max_index_order(&d, s0);
            for k in 0..50 {
                if b != a {
                    break;
                }
                b = random_order(&d, s0, i * 1000 + k);
            }
            if a == b {
                continue;
            }
            if !is_topological(&d, s0, &a) || !is_topological(&d, s0, &b) {
                return Ok((false, format!("domain {i}: invalid order")));
            }
            let va = trajectory_values(&d, build_trajectory(s0, a)).map_err(err)?.start_value().unwrap();
            let vb = trajectory_values(&d, build_trajectory(s0, b)).map_err(err)?.start_value().unwrap();
            worst = worst.max((va - vb).abs());
            pairs += 1;
            compared = true;
        }
        domains += compared as usize;
    }
    Ok((
        worst < ORDER_TOL && pairs > 0,
        format!("{pairs} order pairs over {domains} domains, max difference {worst:.2e}"),
    ))
}

fn solver_soundness() -> Check {
    let mut worst: f64 = 0.0;
    let mut worst_sandwich = f64::NEG_INFINITY;
    let mut beliefs = 0;
    for seed in 0..50 {
        let p = random_acyclic_pomdp(seed);
        let n = p.num_states();
        let depth = n - 1;
        let exact = expectimax(&p, &dense(p.initial(), n), depth);
        let corners = p.mdp_values(1.0, 1e-12, 1000);
        let floor = depth as f64 * p.min_reward().min(0.0);
        let bounds = ValueBounds::new(corners, blind_lower(&p, floor));
        let cfg = SolverConfig {
            epsilon: 1e-7,
            gamma: 1.0,
            max_depth: 2 * n,
            time_limit: Duration::from_secs(10),
            max_trials: None,
            prune_every: 50,
        };
        let mut solver = Solver::new(&p, bounds, cfg);
        let mut trials = 0;
        while solver.gap_at_initial() > 1e-7 && trials < 10_000 {
            for b in solver.trial() {
                let lo = solver.bounds().lower_value(&b);
                let hi = solver.bounds().upper_value(&b);
                let v = expectimax(&p, &dense(&b, n), depth);
                worst_sandwich = worst_sandwich.max(lo - hi).max(lo - v).max(v - hi);
                beliefs += 1;
            }
            trials += 1;
        }
        let lower = solver.bounds().lower_value(p.initial());
        worst = worst.max((lower - exact).abs());
    }
    Ok((
        worst <= SOLVER_TOL && worst_sandwich <= SANDWICH_TOL,
        format!(
            "50 POMDPs, max |lower(b0) - exact| {worst:.2e}, {beliefs} backed-up beliefs, worst bound violation {:.2e}",
            worst_sandwich.max(0.0)
        ),
    ))
}

fn quick_run() -> RunConfig {
    RunConfig {
        solver: SolverConfig {
            max_trials: Some(3),
            time_limit: Duration::from_secs(10),
            ..SolverConfig::default()
        },
        eval_episodes: 1,
        ..RunConfig::default()
    }
}

fn envelope_closure() -> Check {
    let cfg = quick_run();
    let mut sizes = Vec::new();
    for i in 0..20 {
        let d = random_domain(100 + i, 8);
        let support = b0_support(&d);
        let mut env = initial_envelope(&d, &support[0]).map_err(err)?;
        let mut step = 0;
        loop {
            let solved = solve_envelope(&d, &env, &cfg, step).map_err(err)?;
            let ecfg = ExpandConfig {
                seed: step,
                ..ExpandConfig::default()
            };
            match expand_envelope(&d, &env, &mut solved.agent(), &ecfg) {
                Some(e) => {
                    add_state_with_trajectory(&d, &mut env, &e.state).map_err(err)?;
                }
                None => break,
            }
            step += 1;
        }
        let got: HashSet<&SkillState> = env.states().iter().collect();
        let want = reachable(&d, &support);
        if got.len() != want.len() || !want.iter().all(|s| got.contains(s)) {
            return Ok((false, format!("domain {i}: envelope {} states, reachable {}", got.len(), want.len())));
        }
        sizes.push(want.len());
    }
    Ok((
        true,
        format!("20 domains, reachable sets of {} to {} states", sizes.iter().min().unwrap(), sizes.iter().max().unwrap()),
    ))
}

fn dominance() -> Check {
    let domains: Vec<(String, Domain)> = vec![
        ("smallmath".into(), smallmath(0).map_err(err)?),
        ("chain:10".into(), GeneratorKind::Chain(10).generate(0).map_err(err)?),
        ("random-200".into(), random_domain(200, 8)),
        ("random-201".into(), random_domain(201, 8)),
        ("random-202".into(), random_domain(202, 8)),
        ("bigmath".into(), bigmath(0).map_err(err)?),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for (name, d) in &domains {
        let bound = b0_upper_bound(d).map_err(err)?;
        let mut scores: Vec<(String, EvalStats)> = vec![
            ("ftnf-0.925".into(), evaluate(d, || FtnfAgent::new(d, 0.925), EPISODES, 1)),
            ("ftnf-0.9999".into(), evaluate(d, || FtnfAgent::new(d, 0.9999), EPISODES, 1)),
            ("random".into(), evaluate(d, || RandomAgent::new(d.num_actions()), EPISODES, 1)),
        ];
        if name != "bigmath" {
            let cfg = RunConfig {
                max_expansions: 3,
                solver: SolverConfig {
                    max_trials: Some(100),
                    ..quick_run().solver
                },
                ..quick_run()
            };
            let report = rapid_run(d, &cfg).map_err(err)?;
            let s = evaluate(
                d,
                || RapidAgent::new(report.pomdp.pomdp(), &report.bounds, report.pomdp.out()),
                EPISODES,
                1,
            );
            scores.push(("rapid".into(), s));
        }
        for (agent, s) in &scores {
            let excess = (s.mean_reward - bound) / s.std_err.max(1e-12);
            worst = worst.max(excess);
            runs += 1;
            if s.mean_reward > bound + DOMINANCE_SE * s.std_err + 1e-9 {
                return Ok((
                    false,
                    format!("{name}/{agent}: mean {:.2} ± {:.2} above bound {bound:.2}", s.mean_reward, s.std_err),
                ));
            }
        }
    }
    Ok((true, format!("{runs} agent/domain pairs, {EPISODES} episodes each, worst (mean - bound)/SE {worst:.2}")))
}

fn full_envelope() -> Check {
    let d = smallmath(0).map_err(err)?;
    let grow = RunConfig {
        max_expansions: 100_000,
        ..quick_run()
    };
    let report = rapid_run(&d, &grow).map_err(err)?;
    let (flat, states) = flat_reachable_pomdp(&d);
    if !report.exhausted || report.envelope.len() != states.len() {
        return Ok((
            false,
            format!("expansion stopped at {} of {} reachable states", report.envelope.len(), states.len()),
        ));
    }
    let solver = SolverConfig {
        max_trials: Some(100),
        time_limit: Duration::from_secs(60),
        max_depth: d.horizon(),
        ..SolverConfig::default()
    };
    let full = RunConfig {
        solver: solver.clone(),
        ..RunConfig::default()
    };
    let solved = solve_envelope(&d, &report.envelope, &full, 0).map_err(err)?;
    let rapid = evaluate(&d, || solved.agent(), EPISODES, 7);

    let corners = flat.mdp_values(solver.gamma, 1e-9, 100_000);
    let lower = blind_lower(&flat, flat.min_reward() / (1.0 - solver.gamma));
    let result = rapid::solver::solve(&flat, ValueBounds::new(corners, lower), solver);
    let reference = evaluate(&d, || RapidAgent::new(&flat, &result.bounds, 0), EPISODES, 7);

    let (diff, se) = diff_with_se(
        (rapid.mean_reward, rapid.std_err),
        (reference.mean_reward, reference.std_err),
    );
    Ok((
        diff.abs() <= MATCH_SE * se,
        format!(
            "{} states after {} expansions; RAPID {:.2} ± {:.2}, flat {:.2} ± {:.2}, difference {:.2} SE",
            states.len(),
            report.rows.len() - 1,
            rapid.mean_reward,
            rapid.std_err,
            reference.mean_reward,
            reference.std_err,
            diff.abs() / se.max(1e-12)
        ),
    ))
}

fn baseline_ordering() -> Check {
    let d = smallmath(0).map_err(err)?;
    let cfg = BaselineConfig {
        run: RunConfig {
            max_expansions: 10,
            solver: SolverConfig {
                max_trials: Some(50),
                time_limit: Duration::from_secs(60),
                ..SolverConfig::default()
            },
            ..RunConfig::default()
        },
        episodes: EPISODES,
        ..BaselineConfig::default()
    };
    let rows = run_baselines(&d, &cfg).map_err(err)?;
    let get = |m: &str| {
        rows.iter()
            .find(|r| r.method == m)
            .and_then(|r| r.stats)
            .map(|s| (s.mean_reward, s.std_err))
            .ok_or(format!("no result for {m}"))
    };
    let reach = get("reachable")?;
    let early = get("rapid-early")?;
    let random = get("random")?;
    let ftnf925 = get("ftnf-0.925")?;
    let (best_name, best_ftnf) = rows
        .iter()
        .filter(|r| r.method.starts_with("ftnf-"))
        .filter_map(|r| r.stats.as_ref().map(|s| (r.method.clone(), (s.mean_reward, s.std_err))))
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .ok_or("no FTNF rows")?;
    let holds = |hi: (f64, f64), lo: (f64, f64)| {
        let (diff, se) = diff_with_se(hi, lo);
        diff >= 0.0 || diff.abs() <= MATCH_SE * se
    };
    let chain = holds(reach, early) && holds(early, best_ftnf) && holds(best_ftnf, random);
    let (gap, se) = diff_with_se(reach, ftnf925);
    let strict = gap > MATCH_SE * se;
    Ok((
        chain && strict,
        format!(
            "reachable {:.1}, rapid-early {:.1}, best FTNF ({best_name}) {:.1}, random {:.1}; reachable - ftnf-0.925 = {:.1} ({:.1} SE)",
            reach.0,
            early.0,
            best_ftnf.0,
            random.0,
            gap,
            gap / se.max(1e-12)
        ),
    ))
}

/// Seconds per call of the trajectory pipeline from the empty state,
/// best of five batches.
fn time_trajectory(d: &Domain) -> f64 {
    let s0 = d.empty_state();
    let mut reps = 1;
    loop {
        let t = Instant::now();
        for _ in 0..reps {
            let order = topological_order(d, &s0).unwrap();
            std::hint::black_box(trajectory_values(d, build_trajectory(&s0, order)).unwrap());
        }
        if t.elapsed() > Duration::from_millis(20) {
            break;
        }
        reps *= 2;
    }
    (0..5)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..reps {
                let order = topological_order(d, &s0).unwrap();
                std::hint::black_box(trajectory_values(d, build_trajectory(&s0, order)).unwrap());
            }
            t.elapsed().as_secs_f64() / reps as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn linear_time() -> Check {
    let mut times = Vec::new();
    for l in [100, 1000, 10_000] {
        let d = GeneratorKind::Chain(l).generate(0).map_err(err)?;
        times.push(time_trajectory(&d));
    }
    let ratios = [times[1] / times[0], times[2] / times[1]];
    let linear = ratios.iter().all(|r| *r <= 10.0 * LINEAR_SLACK && *r >= 10.0 / LINEAR_SLACK);

    let d = bigmath(0).map_err(err)?;
    let s0 = d.empty_state();
    let t = Instant::now();
    let traj = evaluated_trajectory(&d, &s0).map_err(err)?;
    let env = initial_envelope(&d, &s0).map_err(err)?;
    let big = t.elapsed();
    std::hint::black_box((traj, env));
    Ok((
        linear && big < BIGMATH_SCALE_BUDGET,
        format!(
            "chain times {:.1}/{:.1}/{:.1} µs, ratios {:.1} and {:.1}; L = 122 trajectory and envelope in {:.3} ms",
            times[0] * 1e6,
            times[1] * 1e6,
            times[2] * 1e6,
            ratios[0],
            ratios[1],
            big.as_secs_f64() * 1e3
        ),
    ))
}

fn anytime() -> Check {
    let d = bigmath(0).map_err(err)?;
    let cfg = RunConfig {
        out_reward: -100.0,
        solver: SolverConfig {
            epsilon: 1000.0,
            time_limit: Duration::from_secs(30),
            ..SolverConfig::default()
        },
        max_expansions: 5,
        eval_episodes: 5,
        ..RunConfig::default()
    };
    let t = Instant::now();
    let report = rapid_run_with(&d, &cfg, &mut |r| {
        eprintln!(
            "  bigmath expansion {}: envelope {}, reward {:.1} ± {:.1}",
            r.expansion, r.envelope_size, r.stats.mean_reward, r.stats.std_err
        )
    })
    .map_err(err)?;
    let elapsed = t.elapsed();
    let first = report.rows.iter().find(|r| r.stats.mean_reward > 0.0);
    let detail = match first {
        Some(r) => format!(
            "{} start states, positive mean {:.1} at expansion {}",
            d.b0().entries.len(),
            r.stats.mean_reward,
            r.expansion
        ),
        None => "no positive mean within 5 expansions".into(),
    };
    Ok((
        first.is_some() && d.b0().entries.len() == 4 && elapsed < ANYTIME_BUDGET,
        format!("{detail}, total {:.0} s", elapsed.as_secs_f64()),
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let outs: Vec<_> = ["a", "b"].iter().map(|k| dir.path().join(k)).collect();
    for out in &outs {
        let status = Command::new(env!("CARGO_BIN_EXE_rapid"))
            .args(["plan", "gen:smallmath", "--expansions", "3", "--solver-trials", "20"])
            .args(["--solver-time", "600", "--episodes", "10", "--seed", "7", "--trace"])
            .arg("--outdir")
            .arg(out)
            .output()
            .map_err(err)?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
    }
    let files = ["curve.csv", "episodes.csv", "trace.csv"];
    for f in files {
        let a = fs::read(outs[0].join(f)).map_err(err)?;
        let b = fs::read(outs[1].join(f)).map_err(err)?;
        if a != b {
            return Ok((false, format!("{f} differs between runs")));
        }
    }
    Ok((true, format!("{} identical across two runs", files.join(", "))))
}
