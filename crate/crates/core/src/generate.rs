//! Domain generators: reconstructions of the two tutoring domains, random
//! instances and plain chains.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_domain, ActionSpec, Domain, DomainSpec, InitialBelief, SkillState, VariableId};
use crate::rng::{derive_seed, rng_from, SimRng};
use crate::trajectory::topological_order;

pub const TEACH_P_STAY: f64 = 0.2;
pub const DRILL_P_STAY: f64 = 0.5;
pub const DRILL_TRUE_IF_TRUE: f64 = 0.9;
pub const DRILL_TRUE_IF_FALSE: f64 = 0.2;

/// Teach (uninformative) and drill (informative) actions for every variable.
/// Observation 0 means "false", 1 means "true".
pub fn tutoring_actions(num_vars: usize) -> Vec<ActionSpec> {
    let mut actions = Vec::with_capacity(2 * num_vars);
    for v in 0..num_vars {
        actions.push(ActionSpec {
            id: 2 * v,
            target: v,
            p_stay_false: TEACH_P_STAY,
            obs_given_true: vec![0.5, 0.5],
            obs_given_false: vec![0.5, 0.5],
            cost: -1.0,
        });
        actions.push(ActionSpec {
            id: 2 * v + 1,
            target: v,
            p_stay_false: DRILL_P_STAY,
            obs_given_true: vec![1.0 - DRILL_TRUE_IF_TRUE, DRILL_TRUE_IF_TRUE],
            obs_given_false: vec![1.0 - DRILL_TRUE_IF_FALSE, DRILL_TRUE_IF_FALSE],
            cost: -1.0,
        });
    }
    actions
}

fn tutoring_domain(name: &str, parents: Vec<Vec<VariableId>>, r_goal: f64, horizon: usize) -> Result<Domain> {
    let n = parents.len();
    Domain::new(DomainSpec {
        name: name.into(),
        num_vars: n,
        parents,
        actions: tutoring_actions(n),
        goal_vars: (0..n).collect(),
        r_goal,
        b0: InitialBelief::point(SkillState::empty(n)),
        horizon,
    })
}

/// Start states that are prefixes of the canonical topological order, one
/// per coverage interval, with weights drawn uniformly from [1, 2].
fn prefix_starts(d: &Domain, ranges: &[(f64, f64)], rng: &mut SimRng) -> Result<InitialBelief> {
    let order = topological_order(d, &d.empty_state())?;
    let n = d.num_vars();
    let mut ks = BTreeSet::new();
    for &(lo, hi) in ranges {
        let f = rng.gen_range(lo..=hi);
        let mut k = ((f * n as f64).round() as usize).min(n - 1);
        while !ks.insert(k) {
            k = (k + 1) % n;
        }
    }
    let weights: Vec<f64> = ks.iter().map(|_| rng.gen_range(1.0..=2.0)).collect();
    let total: f64 = weights.iter().sum();
    let entries = ks
        .iter()
        .zip(&weights)
        .map(|(&k, w)| (SkillState::from_vars(n, order[..k].iter().copied()), w / total))
        .collect();
    Ok(InitialBelief { entries })
}

/// Best-effort 19-skill elementary math hierarchy: counting and place value
/// at the root, addition/subtraction branches, then multiplication and
/// division building on both.
pub fn smallmath_parents() -> Vec<Vec<VariableId>> {
    vec![
        vec![],
        vec![0],
        vec![1],
        vec![1],
        vec![1],
        vec![2, 4],
        vec![3, 4],
        vec![5],
        vec![6],
        vec![7],
        vec![8],
        vec![2],
        vec![11, 3],
        vec![11, 9],
        vec![12, 13, 10],
        vec![12],
        vec![15, 11],
        vec![15, 2],
        vec![16, 17],
    ]
}

pub const SMALLMATH_STARTS: [(f64, f64); 3] = [(0.25, 0.35), (0.35, 0.45), (0.45, 0.55)];

pub fn smallmath(seed: u64) -> Result<Domain> {
    let d = tutoring_domain("smallmath", smallmath_parents(), 10000.0, 450)?;
    let b0 = prefix_starts(&d, &SMALLMATH_STARTS, &mut rng_from(derive_seed(seed, 0x5a, 0)))?;
    Ok(d.with_b0(b0))
}

/// Strand sizes of the 122-skill domain: addition, subtraction,
/// multiplication/division, fractions.
pub const BIGMATH_STRANDS: [usize; 4] = [22, 25, 35, 40];
const BIGMATH_GRAPH_SEED: u64 = 1974;

/// Layered DAG over four strands. Inside a strand every skill depends on one
/// to three skills from the previous two layers; later strands also depend on
/// a few skills of earlier strands. Fixed: does not depend on the run seed.
pub fn bigmath_parents() -> Vec<Vec<VariableId>> {
    let mut rng = rng_from(BIGMATH_GRAPH_SEED);
    let mut parents: Vec<Vec<VariableId>> = Vec::new();
    let mut strand_vars: Vec<Vec<VariableId>> = Vec::new();
    for (si, &size) in BIGMATH_STRANDS.iter().enumerate() {
        let first = parents.len();
        let mut layers: Vec<Vec<VariableId>> = Vec::new();
        let mut v = first;
        while v < first + size {
            let width = rng.gen_range(2..=4).min(first + size - v);
            layers.push((v..v + width).collect());
            v += width;
        }
        for (li, layer) in layers.iter().enumerate() {
            for _ in layer {
                let mut ps = BTreeSet::new();
                if li > 0 {
                    let mut pool = layers[li - 1].clone();
                    if li > 1 {
                        pool.extend(&layers[li - 2]);
                    }
                    // at least one parent from the previous layer keeps depth
                    ps.insert(*layers[li - 1].choose(&mut rng).unwrap());
                    let extra = rng.gen_range(0..=2);
                    for &p in pool.choose_multiple(&mut rng, extra) {
                        ps.insert(p);
                    }
                } else if si > 0 {
                    // strand roots build on earlier strands
                    let earlier: Vec<VariableId> = strand_vars.concat();
                    let k = rng.gen_range(1..=2);
                    for &p in earlier[earlier.len() / 2..].choose_multiple(&mut rng, k) {
                        ps.insert(p);
                    }
                }
                if li > 0 && si > 0 && rng.gen_bool(0.1) {
                    let earlier: Vec<VariableId> = strand_vars.concat();
                    ps.insert(*earlier.choose(&mut rng).unwrap());
                }
                parents.push(ps.into_iter().collect());
            }
        }
        strand_vars.push((first..first + size).collect());
    }
    parents
}

pub const BIGMATH_STARTS: [(f64, f64); 4] = [(0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4)];

pub fn bigmath(seed: u64) -> Result<Domain> {
    let d = tutoring_domain("bigmath", bigmath_parents(), 100000.0, 1000)?;
    let b0 = prefix_starts(&d, &BIGMATH_STARTS, &mut rng_from(derive_seed(seed, 0xb1, 0)))?;
    Ok(d.with_b0(b0))
}

/// Chain `0 -> 1 -> ... -> n-1` with the tutoring actions, starting empty.
pub fn chain(num_vars: usize, horizon: usize) -> Result<Domain> {
    let parents = (0..num_vars).map(|v| if v == 0 { vec![] } else { vec![v - 1] }).collect();
    tutoring_domain("chain", parents, 10000.0, horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub num_vars: usize,
    pub max_parents: usize,
    pub actions_per_var: usize,
    /// pStayFalse is drawn uniformly from [0, max_p_stay].
    pub max_p_stay: f64,
    /// Costs are drawn uniformly from [min_cost, max_cost]; both negative.
    pub min_cost: f64,
    pub max_cost: f64,
    pub r_goal: f64,
    pub horizon: usize,
    pub num_starts: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            num_vars: 6,
            max_parents: 2,
            actions_per_var: 2,
            max_p_stay: 0.9,
            min_cost: -2.0,
            max_cost: -0.5,
            r_goal: 1000.0,
            horizon: 100,
            num_starts: 3,
        }
    }
}

impl RandomParams {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(m.into()));
        if self.num_vars == 0 {
            return bad("num_vars must be positive");
        }
        if self.actions_per_var == 0 {
            return bad("actions_per_var must be positive");
        }
        if !(0.0..1.0).contains(&self.max_p_stay) {
            return bad("max_p_stay must lie in [0, 1)");
        }
        if !(self.min_cost <= self.max_cost && self.max_cost < 0.0) {
            return bad("costs must satisfy min_cost <= max_cost < 0");
        }
        if self.r_goal < 0.0 {
            return bad("r_goal must be non-negative");
        }
        if self.num_starts == 0 {
            return bad("num_starts must be positive");
        }
        Ok(())
    }
}

/// Random instance: a DAG consistent with a random variable permutation,
/// noisy actions and closure-valid start states taken as prefixes of random
/// topological orders.
pub fn random(params: &RandomParams, seed: u64) -> Result<Domain> {
    params.check()?;
    let n = params.num_vars;
    let mut rng = rng_from(derive_seed(seed, 0x7a, 0));
    let mut perm: Vec<VariableId> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut parents = vec![Vec::new(); n];
    for i in 1..n {
        let k = rng.gen_range(0..=params.max_parents.min(i));
        let mut ps: Vec<VariableId> = perm[..i].choose_multiple(&mut rng, k).copied().collect();
        ps.sort_unstable();
        parents[perm[i]] = ps;
    }

    let mut actions = Vec::with_capacity(n * params.actions_per_var);
    for v in 0..n {
        for _ in 0..params.actions_per_var {
            let t = rng.gen_range(0.5..=1.0);
            let f = rng.gen_range(0.0..=0.5);
            actions.push(ActionSpec {
                id: actions.len(),
                target: v,
                p_stay_false: rng.gen_range(0.0..=params.max_p_stay),
                obs_given_true: vec![1.0 - t, t],
                obs_given_false: vec![1.0 - f, f],
                cost: rng.gen_range(params.min_cost..=params.max_cost),
            });
        }
    }

    let mut starts = BTreeSet::new();
    for _ in 0..params.num_starts {
        let order = random_linear_extension(&parents, &mut rng);
        let k = rng.gen_range(0..n);
        starts.insert(SkillState::from_vars(n, order[..k].iter().copied()));
    }
    let weights: Vec<f64> = starts.iter().map(|_| rng.gen_range(0.5..=1.5)).collect();
    let total: f64 = weights.iter().sum();
    let b0 = InitialBelief {
        entries: starts.into_iter().zip(weights).map(|(s, w)| (s, w / total)).collect(),
    };

    let d = Domain::new(DomainSpec {
        name: format!("random-{n}-{seed}"),
        num_vars: n,
        parents,
        actions,
        goal_vars: (0..n).collect(),
        r_goal: params.r_goal,
        b0,
        horizon: params.horizon,
    })?;
    let violations = validate_domain(&d);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    Ok(d)
}

fn random_linear_extension(parents: &[Vec<VariableId>], rng: &mut SimRng) -> Vec<VariableId> {
    let n = parents.len();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let ready: Vec<VariableId> = (0..n)
            .filter(|&v| !done[v] && parents[v].iter().all(|&p| done[p]))
            .collect();
        let v = *ready.choose(rng).expect("parents form a DAG");
        done[v] = true;
        order.push(v);
    }
    order
}

/// Generator selector as written on the command line:
/// `smallmath`, `bigmath`, `chain:L` or `random:L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    SmallMath,
    BigMath,
    Chain(usize),
    Random(RandomParams),
}

impl GeneratorKind {
    pub fn generate(&self, seed: u64) -> Result<Domain> {
        match self {
            GeneratorKind::SmallMath => smallmath(seed),
            GeneratorKind::BigMath => bigmath(seed),
            GeneratorKind::Chain(l) => chain(*l, 4 * l + 10),
            GeneratorKind::Random(p) => random(p, seed),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::SmallMath => write!(f, "smallmath"),
            GeneratorKind::BigMath => write!(f, "bigmath"),
            GeneratorKind::Chain(l) => write!(f, "chain:{l}"),
            GeneratorKind::Random(p) => write!(f, "random:{}", p.num_vars),
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let size = |default: usize| -> Result<usize> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .parse()
                    .ok()
                    .filter(|&l: &usize| l > 0)
                    .ok_or_else(|| Error::Param(format!("bad variable count `{a}`"))),
            }
        };
        match kind {
            "smallmath" if arg.is_none() => Ok(GeneratorKind::SmallMath),
            "bigmath" if arg.is_none() => Ok(GeneratorKind::BigMath),
            "chain" => Ok(GeneratorKind::Chain(size(10)?)),
            "random" => Ok(GeneratorKind::Random(RandomParams {
                num_vars: size(6)?,
                ..RandomParams::default()
            })),
            _ => Err(Error::Param(format!("unknown generator `{s}`"))),
        }
    }
}
