//! Line-oriented domain file format.
//!
//! ```text
//! domain <name>
//! vars <L>
//! prereq <var> <parent> [<parent> ...]
//! action <id> target=<var> pstayfalse=<p> obs_true=<p,..> obs_false=<p,..> cost=<r>
//! goal <var> [<var> ...] | goal all
//! rgoal <value>
//! horizon <H>
//! b0 <prob> <var,var,...|empty>
//! ```
//!
//! `#` starts a comment. Serialization emits keys in the order above and
//! prints floats in shortest round-trip form.

use std::fmt::Write as _;

use super::{validate_domain, ActionSpec, Domain, DomainSpec, InitialBelief, SkillState, VariableId};
use crate::error::{Error, Result};

fn err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        message: message.into(),
    })
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, tok: &str) -> Result<T> {
    tok.parse()
        .or_else(|_| err(line, format!("invalid {what} `{tok}`")))
}

fn parse_dist(line: usize, what: &str, tok: &str) -> Result<Vec<f64>> {
    tok.split(',')
        .map(|t| parse_num(line, what, t.trim()))
        .collect()
}

enum Goal {
    All,
    Vars(Vec<(usize, VariableId)>),
}

/// Parses a domain without running structural validation. Use
/// [`load_domain`] to parse and validate in one step.
pub fn parse_domain(text: &str) -> Result<Domain> {
    let mut name: Option<String> = None;
    let mut num_vars: Option<(usize, usize)> = None;
    let mut prereqs: Vec<(usize, VariableId, Vec<VariableId>)> = Vec::new();
    let mut actions: Vec<(usize, ActionSpec)> = Vec::new();
    let mut goal: Option<Goal> = None;
    let mut r_goal: Option<f64> = None;
    let mut horizon: Option<usize> = None;
    let mut b0: Vec<(usize, f64, Vec<VariableId>)> = Vec::new();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let rest: Vec<&str> = toks.collect();
        let once = |present: bool| {
            if present {
                err(line, format!("duplicate key `{key}`"))
            } else {
                Ok(())
            }
        };
        match key {
            "domain" => {
                once(name.is_some())?;
                if rest.is_empty() {
                    return err(line, "missing domain name");
                }
                name = Some(rest.join(" "));
            }
            "vars" => {
                once(num_vars.is_some())?;
                let [n] = rest[..] else {
                    return err(line, "expected `vars <L>`");
                };
                num_vars = Some((line, parse_num(line, "variable count", n)?));
            }
            "prereq" => {
                if rest.len() < 2 {
                    return err(line, "expected `prereq <var> <parent> [...]`");
                }
                let var = parse_num(line, "variable", rest[0])?;
                let parents = rest[1..]
                    .iter()
                    .map(|t| parse_num(line, "variable", t))
                    .collect::<Result<_>>()?;
                prereqs.push((line, var, parents));
            }
            "action" => {
                let Some((id, attrs)) = rest.split_first() else {
                    return err(line, "expected `action <id> ...`");
                };
                let id: usize = parse_num(line, "action id", id)?;
                if id != actions.len() {
                    return err(line, format!("action ids must be consecutive from 0; expected {}", actions.len()));
                }
                actions.push((line, parse_action(line, id, attrs)?));
            }
            "goal" => {
                once(goal.is_some())?;
                goal = Some(match rest[..] {
                    ["all"] => Goal::All,
                    [] => return err(line, "expected `goal all` or a variable list"),
                    _ => Goal::Vars(
                        rest.iter()
                            .map(|t| Ok((line, parse_num(line, "variable", t)?)))
                            .collect::<Result<_>>()?,
                    ),
                });
            }
            "rgoal" => {
                once(r_goal.is_some())?;
                let [v] = rest[..] else {
                    return err(line, "expected `rgoal <value>`");
                };
                r_goal = Some(parse_num(line, "goal reward", v)?);
            }
            "horizon" => {
                once(horizon.is_some())?;
                let [v] = rest[..] else {
                    return err(line, "expected `horizon <H>`");
                };
                horizon = Some(parse_num(line, "horizon", v)?);
            }
            "b0" => {
                let [p, vars] = rest[..] else {
                    return err(line, "expected `b0 <prob> <var,var,...|empty>`");
                };
                let prob = parse_num(line, "probability", p)?;
                let vars = if vars == "empty" {
                    Vec::new()
                } else {
                    vars.split(',')
                        .map(|t| parse_num(line, "variable", t))
                        .collect::<Result<_>>()?
                };
                b0.push((line, prob, vars));
            }
            other => return err(line, format!("unknown key `{other}`")),
        }
    }

    let end = last_line.max(1);
    let name = name.map_or_else(|| err(end, "missing `domain`"), Ok)?;
    let (_, n) = num_vars.map_or_else(|| err(end, "missing `vars`"), Ok)?;
    if n == 0 {
        return err(num_vars.unwrap().0, "a domain needs at least one variable");
    }
    let check = |line: usize, v: VariableId| {
        if v < n {
            Ok(v)
        } else {
            err(line, format!("variable {v} out of range for {n} variables"))
        }
    };

    let mut parents = vec![Vec::new(); n];
    let mut has_line = vec![false; n];
    for (line, var, ps) in prereqs {
        check(line, var)?;
        if std::mem::replace(&mut has_line[var], true) {
            return err(line, format!("duplicate prereq line for variable {var}"));
        }
        for &p in &ps {
            check(line, p)?;
        }
        parents[var] = ps;
    }
    let num_obs = actions.first().map(|(_, a)| a.obs_given_true.len());
    for (line, a) in &actions {
        check(*line, a.target)?;
        if a.obs_given_true.len() != a.obs_given_false.len()
            || Some(a.obs_given_true.len()) != num_obs
        {
            return err(*line, "observation distributions must share one alphabet size");
        }
    }
    let goal_vars = match goal.map_or_else(|| err(end, "missing `goal`"), Ok)? {
        Goal::All => (0..n).collect(),
        Goal::Vars(vs) => vs
            .into_iter()
            .map(|(line, v)| check(line, v))
            .collect::<Result<_>>()?,
    };
    let mut entries = Vec::with_capacity(b0.len());
    for (line, p, vars) in b0 {
        for &v in &vars {
            check(line, v)?;
        }
        entries.push((SkillState::from_vars(n, vars), p));
    }

    Domain::new(DomainSpec {
        name,
        num_vars: n,
        parents,
        actions: actions.into_iter().map(|(_, a)| a).collect(),
        goal_vars,
        r_goal: r_goal.map_or_else(|| err(end, "missing `rgoal`"), Ok)?,
        b0: InitialBelief { entries },
        horizon: horizon.map_or_else(|| err(end, "missing `horizon`"), Ok)?,
    })
}

fn parse_action(line: usize, id: usize, attrs: &[&str]) -> Result<ActionSpec> {
    let mut target = None;
    let mut p_stay_false = None;
    let mut obs_true = None;
    let mut obs_false = None;
    let mut cost = None;
    for attr in attrs {
        let Some((k, v)) = attr.split_once('=') else {
            return err(line, format!("expected key=value, got `{attr}`"));
        };
        let slot_set = match k {
            "target" => target.replace(parse_num(line, "target", v)?).is_some(),
            "pstayfalse" => p_stay_false.replace(parse_num(line, "pstayfalse", v)?).is_some(),
            "obs_true" => obs_true.replace(parse_dist(line, "obs_true", v)?).is_some(),
            "obs_false" => obs_false.replace(parse_dist(line, "obs_false", v)?).is_some(),
            "cost" => cost.replace(parse_num(line, "cost", v)?).is_some(),
            other => return err(line, format!("unknown key `{other}`")),
        };
        if slot_set {
            return err(line, format!("duplicate key `{k}`"));
        }
    }
    let missing = |k: &str| Error::Parse {
        line,
        message: format!("action {id} is missing `{k}`"),
    };
    Ok(ActionSpec {
        id,
        target: target.ok_or_else(|| missing("target"))?,
        p_stay_false: p_stay_false.ok_or_else(|| missing("pstayfalse"))?,
        obs_given_true: obs_true.ok_or_else(|| missing("obs_true"))?,
        obs_given_false: obs_false.ok_or_else(|| missing("obs_false"))?,
        cost: cost.ok_or_else(|| missing("cost"))?,
    })
}

/// Parses and validates; structural violations become [`Error::Invalid`].
pub fn load_domain(text: &str) -> Result<Domain> {
    let d = parse_domain(text)?;
    let violations = validate_domain(&d);
    if violations.is_empty() {
        Ok(d)
    } else {
        Err(Error::Invalid(violations))
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn serialize_domain(d: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "domain {}", d.name());
    let _ = writeln!(out, "vars {}", d.num_vars());
    for v in 0..d.num_vars() {
        let ps = d.parents(v);
        if !ps.is_empty() {
            let ps: Vec<_> = ps.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "prereq {v} {}", ps.join(" "));
        }
    }
    for a in d.actions() {
        let _ = writeln!(
            out,
            "action {} target={} pstayfalse={} obs_true={} obs_false={} cost={}",
            a.id,
            a.target,
            a.p_stay_false,
            join_f64(&a.obs_given_true),
            join_f64(&a.obs_given_false),
            a.cost
        );
    }
    if d.goal_vars().len() == d.num_vars() {
        out.push_str("goal all\n");
    } else {
        let gs: Vec<_> = d.goal_vars().iter().map(|g| g.to_string()).collect();
        let _ = writeln!(out, "goal {}", gs.join(" "));
    }
    let _ = writeln!(out, "rgoal {}", d.r_goal());
    let _ = writeln!(out, "horizon {}", d.horizon());
    for (s, p) in &d.b0().entries {
        let vars = if s.is_empty() {
            "empty".to_string()
        } else {
            s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(out, "b0 {p} {vars}");
    }
    out
}
