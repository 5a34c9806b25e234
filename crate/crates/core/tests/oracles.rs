//! Planner components checked against the brute-force references in
//! `common`.

mod common;

use std::collections::HashSet;
use std::time::Duration;

use rapid::agents::RandomAgent;
use rapid::envelope::{add_state_with_trajectory, expand_envelope, initial_envelope, ExpandConfig};
use rapid::solver::{belief_update, blind_lower, solve, SolverConfig, ValueBounds};
use rapid::trajectory::{b0_upper_bound, evaluated_trajectory, state_value};
use rapid::SkillState;

use common::*;

#[test]
fn trajectory_values_match_value_iteration() {
    for i in 0..10 {
        let d = random_domain(i, 7);
        let states = reachable(&d, &[d.empty_state()]);
        let vi = value_iteration(&d, &states);
        for s in &states {
            let t = evaluated_trajectory(&d, s).unwrap();
            for (k, st) in t.states().enumerate() {
                assert!((t.values()[k] - vi[&st]).abs() < 1e-8, "domain {i} state {st}");
            }
            assert!((state_value(&d, s).unwrap() - vi[s]).abs() < 1e-8);
        }
    }
}

#[test]
fn b0_bound_is_weighted_start_values() {
    let d = random_domain(4, 7);
    let vi = value_iteration(&d, &reachable(&d, &[d.empty_state()]));
    let want: f64 = d.b0().entries.iter().map(|(s, p)| p * vi[s]).sum();
    assert!((b0_upper_bound(&d).unwrap() - want).abs() < 1e-8);
}

#[test]
fn belief_update_matches_dense_bayes_rule() {
    for seed in 0..20 {
        let p = random_acyclic_pomdp(seed);
        let n = p.num_states();
        let b = p.initial().clone();
        for a in 0..p.num_actions() {
            for z in 0..p.num_obs() {
                let prior = dense(&b, n);
                let mut joint = vec![0.0; n];
                for s in 0..n {
                    for &(t, q) in p.transition(a, s) {
                        joint[t] += prior[s] * q * p.obs_prob(a, t, z);
                    }
                }
                let pz: f64 = joint.iter().sum();
                match belief_update(&p, &b, a, z) {
                    Ok((post, got_pz)) => {
                        assert!((got_pz - pz).abs() < 1e-12);
                        for (t, w) in dense(&post, n).into_iter().enumerate() {
                            assert!((w - joint[t] / pz).abs() < 1e-12);
                        }
                    }
                    Err(_) => assert_eq!(pz, 0.0),
                }
            }
        }
    }
}

#[test]
fn solver_converges_to_expectimax() {
    for seed in 100..110 {
        let p = random_acyclic_pomdp(seed);
        let n = p.num_states();
        let exact = expectimax(&p, &dense(p.initial(), n), n - 1);
        let floor = (n - 1) as f64 * p.min_reward().min(0.0);
        let bounds = ValueBounds::new(p.mdp_values(1.0, 1e-12, 1000), blind_lower(&p, floor));
        let cfg = SolverConfig {
            epsilon: 1e-7,
            gamma: 1.0,
            max_depth: 2 * n,
            time_limit: Duration::from_secs(10),
            ..SolverConfig::default()
        };
        let r = solve(&p, bounds, cfg);
        assert!(r.lower_b0 <= exact + 1e-9 && exact <= r.upper_b0 + 1e-9);
        assert!((r.lower_b0 - exact).abs() < 1e-4, "seed {seed}: {} vs {exact}", r.lower_b0);
    }
}

#[test]
fn expansion_reaches_every_reachable_state() {
    for i in 0..3 {
        let d = random_domain(300 + i, 7);
        let support = b0_support(&d);
        let mut env = initial_envelope(&d, &support[0]).unwrap();
        let mut agent = RandomAgent::new(d.num_actions());
        let mut step = 0;
        while let Some(e) = expand_envelope(&d, &env, &mut agent, &ExpandConfig { seed: step, ..ExpandConfig::default() }) {
            add_state_with_trajectory(&d, &mut env, &e.state).unwrap();
            step += 1;
        }
        let got: HashSet<&SkillState> = env.states().iter().collect();
        let want = reachable(&d, &support);
        assert_eq!(got.len(), want.len());
        assert!(want.iter().all(|s| got.contains(s)));
    }
}
