//! `decoc`: scenario runs, prediction-mode comparisons and root exploration dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use decoc_core::output::{metrics_record, metrics_table, write_dump_csv, write_trace_csv};
use decoc_core::scenario::{PredictionMode, Scenario, ScenarioError};
use decoc_core::search::{Enhancements, SearchConfig, SearchResult};
use decoc_core::sim::{plan_agent, run, run_observed, SimulationTrace};

#[derive(Parser)]
#[command(name = "decoc", version, about = "Decentralized cooperative trajectory planning with continuous-action MCTS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace.
    Run(CommonArgs),
    /// Run one search at a given step and dump the explored root actions.
    Explore(CommonArgs),
    /// Run both prediction modes over several seeds and summarize.
    Compare(CommonArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Prediction {
    ConstantVelocity,
    Cooperative,
}

impl From<Prediction> for PredictionMode {
    fn from(p: Prediction) -> Self {
        match p {
            Prediction::ConstantVelocity => PredictionMode::ConstantVelocity,
            Prediction::Cooperative => PredictionMode::Cooperative,
        }
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Built-in scenario name (bottleneck, merge-in) or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Prediction mode of every agent; defaults to the scenario's own setting.
    #[arg(long, value_enum)]
    prediction: Option<Prediction>,
    /// Search iterations per planning step.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seeds for `compare`, starting at `--seed`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Simulation horizon; for `explore`, the step at which to search.
    #[arg(long)]
    steps: Option<usize>,
    /// basic | guided | groups | groups+guided | groups+guided+similarity
    #[arg(long)]
    enhancements: Option<String>,
    /// Trace file (`run`) or summary file (`compare`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exploration dump file (`explore`); standard output if absent.
    #[arg(long)]
    dump: Option<PathBuf>,
}

struct Prepared {
    scenario: Scenario,
    cfg: SearchConfig,
}

enum Failure {
    Scenario(ScenarioError),
    Usage(String),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

fn prepare(args: &CommonArgs) -> Result<Prepared, Failure> {
    let mut scenario = Scenario::resolve(&args.scenario).map_err(Failure::Scenario)?;
    if let Some(p) = args.prediction {
        scenario = scenario.with_prediction(p.into());
    }
    let mut cfg = scenario.search.clone();
    if let Some(n) = args.iterations {
        cfg.iterations = n;
    }
    if let Some(e) = &args.enhancements {
        cfg.enhancements = Enhancements::parse(e).ok_or_else(|| {
            Failure::Usage(format!(
                "unknown enhancements '{e}' (valid: basic, guided, groups, groups+guided, groups+guided+similarity)"
            ))
        })?;
    }
    cfg.check().map_err(Failure::Usage)?;
    Ok(Prepared { scenario, cfg })
}

fn ids(s: &Scenario) -> Vec<String> {
    s.agents.iter().map(|a| a.id.clone()).collect()
}

fn open(path: &PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn cmd_run(args: &CommonArgs) -> Result<(), Failure> {
    let p = prepare(args)?;
    let steps = args.steps.unwrap_or(p.scenario.steps);
    let trace = run(&p.scenario, steps, &p.cfg, args.seed);
    if let Some(path) = &args.out {
        let mut w = open(path)?;
        write_trace_csv(&trace, &mut w).context("writing trace")?;
        w.flush().context("writing trace")?;
    }
    let names = ids(&p.scenario);
    print!("{}", metrics_table(&names, &trace.metrics));
    println!("{}", metrics_record(&p.scenario.name, &names, &trace.metrics));
    Ok(())
}

fn cmd_explore(args: &CommonArgs) -> Result<(), Failure> {
    let p = prepare(args)?;
    let at = args.steps.unwrap_or(0);
    let mut prefix_cfg = p.scenario.search.clone();
    if let Some(n) = args.iterations {
        prefix_cfg.iterations = n;
    }
    let states = if at == 0 {
        p.scenario.initial_states()
    } else {
        let trace = run(&p.scenario, at, &prefix_cfg, args.seed);
        if trace.steps.len() < at {
            return Err(Failure::Usage(format!(
                "the run ends after {} steps, before step {at}",
                trace.steps.len()
            )));
        }
        trace.final_states
    };
    let results: Vec<SearchResult> = (0..p.scenario.agents.len())
        .filter_map(|i| plan_agent(&p.scenario, i, &states, &p.cfg, args.seed, at))
        .collect();
    let rows: Vec<_> = results
        .iter()
        .enumerate()
        .flat_map(|(k, r)| {
            let agent = planning_agents(&p.scenario)[k];
            r.agents[agent].root.clone()
        })
        .collect();
    let names = ids(&p.scenario);
    let hash = p.scenario.hash();
    match &args.dump {
        Some(path) => {
            let mut w = open(path)?;
            write_dump_csv(&hash, at, &names, &rows, &mut w).context("writing dump")?;
            w.flush().context("writing dump")?;
        }
        None => write_dump_csv(&hash, at, &names, &rows, std::io::stdout().lock()).context("writing dump")?,
    }
    info!("explored {} root actions at step {at}", rows.len());
    Ok(())
}

fn planning_agents(s: &Scenario) -> Vec<usize> {
    (0..s.agents.len()).filter(|&i| !s.agents[i].scripted).collect()
}

fn cmd_compare(args: &CommonArgs) -> Result<(), Failure> {
    if args.seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }
    let p = prepare(args)?;
    let steps = args.steps.unwrap_or(p.scenario.steps);
    let names = ids(&p.scenario);
    let modes = [PredictionMode::ConstantVelocity, PredictionMode::Cooperative];
    let mut table = String::new();
    table.push_str("mode,seed,velocity_deviation,collision_count,steps_completed");
    for id in &names {
        table.push_str(&format!(",min_speed_{id}"));
    }
    table.push('\n');
    let mut summary = String::from("mode,seeds,mean_velocity_deviation,collision_count,collision_free_runs\n");
    for mode in modes {
        let scenario = p.scenario.clone().with_prediction(mode);
        let traces: Vec<SimulationTrace> = (0..args.seeds)
            .map(|k| {
                let seed = args.seed + k;
                info!("{} seed {seed}", mode.label());
                run_observed(&scenario, steps, &p.cfg, seed, |_, _| {})
            })
            .collect();
        for (k, t) in traces.iter().enumerate() {
            let m = &t.metrics;
            table.push_str(&format!(
                "{},{},{:.6},{},{}",
                mode.label(),
                args.seed + k as u64,
                m.velocity_deviation,
                m.collision_count,
                m.steps_completed
            ));
            for v in &m.min_speed {
                table.push_str(&format!(",{v:.6}"));
            }
            table.push('\n');
        }
        let mean = traces.iter().map(|t| t.metrics.velocity_deviation).sum::<f64>() / traces.len() as f64;
        let collisions: usize = traces.iter().map(|t| t.metrics.collision_count).sum();
        let free = traces.iter().filter(|t| !t.collided()).count();
        summary.push_str(&format!("{},{},{mean:.6},{collisions},{free}\n", mode.label(), traces.len()));
    }
    print!("{table}\n{summary}");
    if let Some(path) = &args.out {
        let mut w = open(path)?;
        w.write_all(summary.as_bytes()).context("writing summary")?;
        w.flush().context("writing summary")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DECOC_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Explore(a) => cmd_explore(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
