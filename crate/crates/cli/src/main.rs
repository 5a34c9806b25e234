//! `rapid`: validate domains, run the anytime planner and the baselines,
//! generate domains and run the brute-force checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rapid::experiment::{
    baselines_csv, curve_csv, curve_dat, rapid_run_with, run_baselines, BaselineConfig, RunConfig,
};
use rapid::generate::{GeneratorKind, RandomParams};
use rapid::model::{load_domain, serialize_domain};
use rapid::oracle::{reachable_from_b0, verify_theorem1};
use rapid::sim::{episodes_csv, run_episode, trace_csv};
use rapid::solver::{progress_csv, SolverConfig};
use rapid::trajectory::{b0_upper_bound, evaluated_trajectory};
use rapid::{Domain, Error};

#[derive(Parser, Debug)]
#[command(name = "rapid", version, about = "Envelope-based anytime planning for positive-only factored POMDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a domain file.
    Validate {
        domain: String,
    },
    /// Run the anytime planner and write the curve.
    Plan {
        domain: String,
        #[command(flatten)]
        run: RunFlags,
        /// Also write the solver progress log of the last envelope.
        #[arg(long)]
        solver_log: bool,
        /// Write a step trace of one episode of the final policy.
        #[arg(long)]
        trace: bool,
        /// Write the final envelope POMDP in the flat text format.
        #[arg(long)]
        export_pomdp: bool,
    },
    /// Compare RAPID with FTNF, random and the reachable-space solve.
    Baselines {
        domain: String,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, value_delimiter = ',', default_value = "0.8,0.9,0.925,0.95,0.99,0.9999")]
        ftnf_thresholds: Vec<f64>,
        /// Skip the reachable-space solve above this many states.
        #[arg(long, default_value_t = 100_000)]
        reachable_cap: usize,
    },
    /// Write a generated domain: smallmath, bigmath, chain or random.
    Generate {
        kind: String,
        #[arg(long)]
        vars: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check trajectory values against flat value iteration.
    Oracle {
        domain: String,
        #[arg(long, default_value_t = 1 << 16)]
        cap: usize,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct RunFlags {
    #[arg(long, default_value_t = 10)]
    expansions: usize,
    /// Solver time limit per envelope, in seconds.
    #[arg(long, default_value_t = 30.0)]
    solver_time: f64,
    /// Cap on solver trials per envelope; makes runs independent of timing.
    #[arg(long)]
    solver_trials: Option<usize>,
    /// Target bound gap at b0.
    #[arg(long, default_value_t = 200.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.999)]
    gamma: f64,
    #[arg(long, default_value_t = -1000.0, allow_hyphen_values = true)]
    out_reward: f64,
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for generated domains given as `gen:KIND`; defaults to --seed.
    #[arg(long)]
    domain_seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    out_obs_samples: usize,
    #[arg(long, default_value_t = 0.1)]
    eps_r: f64,
    #[arg(long, default_value_t = 20)]
    max_rollouts: usize,
    /// Keep only the blind lower bound when starting each solve.
    #[arg(long)]
    no_open_loop: bool,
    #[arg(long, default_value = "out")]
    outdir: PathBuf,
}

impl RunFlags {
    fn config(&self) -> RunConfig {
        RunConfig {
            out_reward: self.out_reward,
            solver: SolverConfig {
                epsilon: self.eps,
                time_limit: Duration::from_secs_f64(self.solver_time.max(0.0)),
                gamma: self.gamma,
                max_trials: self.solver_trials,
                ..SolverConfig::default()
            },
            max_expansions: self.expansions,
            eval_episodes: self.episodes,
            seed: self.seed,
            out_obs_samples: self.out_obs_samples,
            eps_r: self.eps_r,
            max_rollouts: self.max_rollouts,
            rollout_horizon: None,
            open_loop_seeding: !self.no_open_loop,
        }
    }
}

/// Errors that map to exit code 1 rather than 2.
fn is_validation(e: &anyhow::Error) -> bool {
    !matches!(e.downcast_ref::<Error>(), Some(Error::Param(_)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_validation(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load(spec: &str, seed: u64) -> anyhow::Result<Domain> {
    if let Some(kind) = spec.strip_prefix("gen:") {
        let kind: GeneratorKind = kind.parse()?;
        return Ok(kind.generate(seed)?);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    Ok(load_domain(&text)?)
}

fn domain_summary(d: &Domain) -> Value {
    json!({
        "name": d.name(),
        "vars": d.num_vars(),
        "actions": d.num_actions(),
        "horizon": d.horizon(),
        "r_goal": d.r_goal(),
        "b0": d.b0().entries.iter().map(|(s, p)| json!({"state": s, "prob": p})).collect::<Vec<_>>(),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Validate { domain } => {
            let text = fs::read_to_string(&domain).with_context(|| format!("reading {domain}"))?;
            match load_domain(&text) {
                Ok(d) => {
                    println!(
                        "ok: {} ({} variables, {} actions, {} start states)",
                        d.name(),
                        d.num_vars(),
                        d.num_actions(),
                        d.b0().entries.len()
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(Error::Invalid(violations)) => {
                    for v in &violations {
                        println!("invalid: {v}");
                    }
                    Ok(ExitCode::from(1))
                }
                Err(e) => {
                    println!("invalid: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Plan {
            domain,
            run,
            solver_log,
            trace,
            export_pomdp,
        } => {
            let d = load(&domain, run.domain_seed.unwrap_or(run.seed))?;
            let cfg = run.config();
            fs::create_dir_all(&run.outdir)?;
            let report = rapid_run_with(&d, &cfg, &mut |r| {
                eprintln!(
                    "expansion {:>3}  envelope {:>5}  reward {:>10.2} ± {:<8.2}  gap {:.2}  ({:.1}s)",
                    r.expansion, r.envelope_size, r.stats.mean_reward, r.stats.std_err, r.gap, r.cumulative_secs
                );
            })?;
            write(&run.outdir, "curve.csv", &curve_csv(&report.rows, report.v_bar_b0))?;
            write(&run.outdir, "curve.dat", &curve_dat(&report.rows))?;
            write(&run.outdir, "episodes.csv", &episodes_csv(&report.episodes))?;
            if solver_log {
                write(&run.outdir, "solver_log.csv", &progress_csv(&report.solver_log))?;
            }
            if export_pomdp {
                write(&run.outdir, "envelope.pomdp", &report.pomdp.to_text())?;
            }
            if trace {
                let mut agent =
                    rapid::agents::RapidAgent::new(report.pomdp.pomdp(), &report.bounds, report.pomdp.out());
                let ep = run_episode(&d, &mut agent, cfg.seed, true);
                write(&run.outdir, "trace.csv", &trace_csv(ep.trace.as_deref().unwrap_or(&[])))?;
            }
            println!("V̄(b0) = {}", report.v_bar_b0);
            let run_json = json!({
                "command": "plan",
                "argv": argv,
                "domain": domain_summary(&d),
                "config": cfg,
                "flags": {
                    "solver_log": solver_log,
                    "trace": trace,
                    "export_pomdp": export_pomdp,
                    "domain_seed": run.domain_seed,
                },
                "v_bar_b0": report.v_bar_b0,
                "exhausted": report.exhausted,
                "wall_time_secs": report.wall_time.as_secs_f64(),
                "rows": report.rows,
            });
            write(&run.outdir, "run.json", &serde_json::to_string_pretty(&run_json)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Baselines {
            domain,
            run,
            ftnf_thresholds,
            reachable_cap,
        } => {
            let d = load(&domain, run.domain_seed.unwrap_or(run.seed))?;
            if ftnf_thresholds.iter().any(|t| !(0.0..1.0).contains(t) || *t <= 0.0) {
                return Err(Error::Param("FTNF thresholds must lie in (0, 1)".into()).into());
            }
            let cfg = BaselineConfig {
                run: run.config(),
                ftnf_thresholds,
                reachable_cap,
                episodes: run.episodes,
            };
            fs::create_dir_all(&run.outdir)?;
            let rows = run_baselines(&d, &cfg)?;
            let table = baselines_csv(&rows);
            print!("{table}");
            let bound = b0_upper_bound(&d)?;
            println!("V̄(b0) = {bound}");
            write(&run.outdir, "baselines.csv", &table)?;
            let run_json = json!({
                "command": "baselines",
                "argv": argv,
                "domain": domain_summary(&d),
                "config": cfg,
                "v_bar_b0": bound,
                "rows": rows,
            });
            write(&run.outdir, "run.json", &serde_json::to_string_pretty(&run_json)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { kind, vars, seed, out } => {
            let mut kind: GeneratorKind = kind.parse()?;
            match (&mut kind, vars) {
                (GeneratorKind::Chain(l), Some(v)) => *l = v,
                (GeneratorKind::Random(p), Some(v)) => {
                    *p = RandomParams {
                        num_vars: v,
                        ..p.clone()
                    }
                }
                (_, Some(_)) => return Err(Error::Param(format!("--vars does not apply to {kind}")).into()),
                _ => {}
            }
            let text = serialize_domain(&kind.generate(seed)?);
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            domain,
            cap,
            tolerance,
        } => {
            let d = load(&domain, 0)?;
            let reach = reachable_from_b0(&d, cap)?;
            println!("reachable states from b0: {}", reach.len());
            let mut worst: f64 = 0.0;
            for s in d.b0().support() {
                let t = evaluated_trajectory(&d, s)?;
                let err = verify_theorem1(&d, &t)?;
                println!("start {s}: trajectory of {} steps, max |V - VI| = {err:.3e}", t.len());
                worst = worst.max(err);
            }
            if worst <= tolerance {
                println!("pass: trajectory values match value iteration within {tolerance:e}");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("fail: worst difference {worst:e} exceeds {tolerance:e}");
                Ok(ExitCode::from(1))
            }
        }
    }
}
