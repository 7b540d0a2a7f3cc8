//! `groupvote`: sweeps, point estimates and capital trajectories for
//! egoist/group voting societies.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use groupvote::scenario::evaluate_point;
use groupvote::{
    detect_landmarks, run_sweep, simulate_trajectory, ExpectedIncrements, Method, Role,
};
use serde_json::json;

use config::{real_arg, RunConfig};
use output::{write_atomic, Cell, Table};

#[derive(Parser)]
#[command(
    name = "groupvote",
    version,
    about = "Voting societies of egoists and block-voting groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected one-step increments across a named scenario's sweep.
    Sweep(Flags),
    /// Expected one-step increments for a single society.
    Estimate(Flags),
    /// Per-step mean capital of each role over repeated votes.
    Trajectory(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML or JSON file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named scenario: fig1 .. fig5.
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario society size.
    #[arg(long)]
    participants: Option<usize>,
    /// Scenario fixed size (see README).
    #[arg(long)]
    fixed: Option<usize>,
    /// Sweep point of the scenario (estimate, trajectory).
    #[arg(long)]
    x: Option<usize>,
    #[arg(long)]
    egoists: Option<usize>,
    /// Group as SIZE[:CRITERION]; CRITERION is total, majority=F or average=T.
    #[arg(long = "group")]
    groups: Vec<String>,
    #[arg(long, value_parser = real_arg, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, value_parser = real_arg)]
    sigma: Option<f64>,
    /// Acceptance fraction; `2/3` is accepted.
    #[arg(long, value_parser = real_arg)]
    alpha: Option<f64>,
    /// approx, exact or mc; estimate takes a comma list.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
    /// Comma list of ROLE:argmax|argmin|zero|cross=ROLE|cross=LEVEL.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    landmarks: Vec<String>,
    #[arg(long)]
    steps: Option<u64>,
    /// Starting capital of every participant.
    #[arg(long, value_parser = real_arg, allow_hyphen_values = true)]
    initial_capital: Option<f64>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let vec_opt = |v: &Vec<String>| (!v.is_empty()).then(|| v.clone());
        Ok(file.overlay(RunConfig {
            scenario: self.scenario.clone(),
            participants: self.participants,
            fixed: self.fixed,
            x: self.x,
            egoists: self.egoists,
            groups: vec_opt(&self.groups),
            mu: self.mu,
            sigma: self.sigma,
            alpha: self.alpha,
            methods: vec_opt(&self.method),
            trials: self.trials,
            seed: self.seed,
            workers: self.workers,
            landmarks: vec_opt(&self.landmarks),
            steps: self.steps,
            initial_capital: self.initial_capital,
            format: self.format.clone(),
        }))
    }
}

const COLUMNS: [&str; 11] = [
    "x",
    "group1",
    "group1_se",
    "group2",
    "group2_se",
    "egoist",
    "egoist_se",
    "random",
    "random_se",
    "accept_rate",
    "method",
];

fn increment_row(x: Cell, inc: &ExpectedIncrements, method: Method) -> Vec<Cell> {
    let mut row = vec![x];
    for role in Role::ALL {
        row.push(inc.get(role).into());
        row.push(inc.std_error(role).into());
    }
    row.push(inc.accept_rate.into());
    row.push(Cell::Text(method.name().into()));
    row
}

fn metadata(
    command: &str,
    cfg: &RunConfig,
    stochastic: bool,
) -> Vec<(&'static str, serde_json::Value)> {
    let mut m = vec![
        ("groupvote", json!(env!("CARGO_PKG_VERSION"))),
        ("command", json!(command)),
        (
            "config",
            serde_json::from_str(&cfg.echo()).expect("echo is json"),
        ),
    ];
    if stochastic {
        m.push(("seed", json!(cfg.seed.unwrap_or(0))));
    }
    m
}

/// Records the values actually used so the echoed config reproduces the run.
fn pin_environment(cfg: &mut RunConfig, env: &groupvote::Environment, alpha: f64) {
    cfg.mu = Some(env.mu);
    cfg.sigma = Some(env.sigma);
    cfg.alpha = Some(alpha);
}

fn pin_sampling(cfg: &mut RunConfig) -> Result<()> {
    let mc = cfg.mc()?;
    cfg.trials = Some(mc.trials);
    cfg.seed = Some(mc.seed);
    Ok(())
}

fn sweep(mut cfg: RunConfig) -> Result<Table> {
    let Some(scenario) = cfg.scenario()? else {
        bail!("invalid scenario: sweep needs --scenario (fig1 .. fig5)");
    };
    if cfg.x.is_some() {
        bail!("invalid x: sweep covers the whole range; drop --x");
    }
    let methods = cfg.methods()?;
    let [method] = methods[..] else {
        bail!("invalid method: sweep takes exactly one method");
    };
    let queries = cfg.landmark_queries()?;
    let mc = cfg.mc()?;
    let rows = run_sweep(
        &scenario,
        method,
        (method == Method::MonteCarlo).then_some(&mc),
    )?;
    // One report entry per query; `x` is null when the curve never crosses.
    let mut landmarks = Vec::new();
    for (q, text) in queries.iter().zip(cfg.landmarks.iter().flatten()) {
        let hit = detect_landmarks(&rows, std::slice::from_ref(q))?
            .into_iter()
            .next();
        landmarks.push(match hit {
            Some(l) => json!({"query": text.trim(), "x": l.x, "value": l.value}),
            None => json!({"query": text.trim(), "x": null, "value": null}),
        });
    }

    cfg.participants = Some(scenario.participants);
    cfg.fixed = Some(scenario.fixed);
    pin_environment(&mut cfg, &scenario.env, scenario.rule.alpha);
    cfg.methods = Some(vec![method.name().into()]);
    let stochastic = method == Method::MonteCarlo;
    if stochastic {
        pin_sampling(&mut cfg)?;
    }

    let mut meta = metadata("sweep", &cfg, stochastic);
    meta.push(("x", json!(scenario.sweep_variable())));
    Ok(Table {
        metadata: meta,
        columns: COLUMNS.to_vec(),
        rows: rows
            .iter()
            .map(|r| increment_row(Cell::Int(r.x as u64), &r.increments, r.method))
            .collect(),
        landmarks,
    })
}

fn no_landmarks(cfg: &RunConfig, command: &str) -> Result<()> {
    if cfg.landmarks.as_ref().is_some_and(|l| !l.is_empty()) {
        bail!("invalid landmarks: only sweep reports landmarks, not {command}");
    }
    Ok(())
}

fn estimate(mut cfg: RunConfig) -> Result<Table> {
    no_landmarks(&cfg, "estimate")?;
    let (comp, env, rule) = cfg.society()?;
    let methods = cfg.methods()?;
    let mc = cfg.mc()?;
    let x = cfg.x.map_or(Cell::Empty, |x| Cell::Int(x as u64));
    let mut rows = Vec::new();
    for &m in &methods {
        let (inc, used) = evaluate_point(&comp, &env, rule, m, Some(&mc))?;
        rows.push(increment_row(x.clone(), &inc, used));
    }

    pin_environment(&mut cfg, &env, rule.alpha);
    cfg.methods = Some(methods.iter().map(|m| m.name().to_string()).collect());
    let stochastic = methods.contains(&Method::MonteCarlo);
    if stochastic {
        pin_sampling(&mut cfg)?;
    }
    Ok(Table {
        metadata: metadata("estimate", &cfg, stochastic),
        columns: COLUMNS.to_vec(),
        rows,
        landmarks: vec![],
    })
}

fn trajectory(mut cfg: RunConfig) -> Result<Table> {
    no_landmarks(&cfg, "trajectory")?;
    if cfg.methods.is_some() {
        bail!("invalid method: trajectories are always simulated; drop --method");
    }
    let (comp, env, rule) = cfg.society()?;
    let steps = cfg.steps.unwrap_or(100);
    let initial = cfg.initial_capital.unwrap_or(0.0);
    if !initial.is_finite() {
        bail!("invalid initial_capital: {initial} is not finite");
    }
    let mut mc = cfg.mc()?;
    mc.trials = 1;
    let records = simulate_trajectory(
        &comp,
        &env,
        rule,
        steps,
        &vec![initial; comp.participants()],
        &mc,
    )?;

    pin_environment(&mut cfg, &env, rule.alpha);
    cfg.steps = Some(steps);
    cfg.initial_capital = Some(initial);
    cfg.seed = Some(mc.seed);
    let columns = vec![
        "step",
        "accepted",
        "votes_for",
        "group1",
        "group2",
        "egoist",
        "random",
    ];
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![
                Cell::Int(r.step_index),
                Cell::Int(u64::from(r.accepted)),
                Cell::Int(r.votes_for as u64),
            ];
            row.extend(Role::ALL.map(|role| Cell::from(r.capital.get(role))));
            row
        })
        .collect();
    Ok(Table {
        metadata: metadata("trajectory", &cfg, true),
        columns,
        rows,
        landmarks: vec![],
    })
}

fn run(cli: Cli) -> Result<()> {
    let (name, flags) = match &cli.command {
        Command::Sweep(f) => ("sweep", f),
        Command::Estimate(f) => ("estimate", f),
        Command::Trajectory(f) => ("trajectory", f),
    };
    let cfg = flags.resolve()?;
    let format = cfg.format()?;
    let table = match name {
        "sweep" => sweep(cfg)?,
        "estimate" => estimate(cfg)?,
        _ => trajectory(cfg)?,
    };
    let text = table.render(format);
    match &flags.out {
        Some(path) => write_atomic(path, &text),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("groupvote: {e:#}");
            ExitCode::FAILURE
        }
    }
}
