//! Closed-loop decentralized simulation and its evaluation metrics.

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Direction, RoadModel};
use crate::planner::{simulate_step, DrivingModel};
use crate::reward::RewardBreakdown;
use crate::scenario::{PredictionMode, Scenario};
use crate::search::{search, ActionGroup, SearchConfig, SearchResult};
use crate::trajectory::{Action, VehicleState};
use crate::validation::ValidationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: String,
    pub v_des: f64,
    pub direction: Direction,
}

/// Longitudinal speed at an absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub t: f64,
    pub vx: f64,
}

/// One executed planning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Time at the start of the step.
    pub time: f64,
    /// Agent states at the start of the step, in each agent's frame.
    pub states: Vec<VehicleState>,
    pub actions: Vec<Action>,
    pub groups: Vec<ActionGroup>,
    pub rewards: Vec<RewardBreakdown>,
    pub validation: Vec<ValidationResult>,
    /// Densely sampled speed along each executed trajectory.
    pub speeds: Vec<Vec<SpeedSample>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Σ over agents of ∫|vx − v_des| dt (m).
    pub velocity_deviation: f64,
    pub per_agent_deviation: Vec<f64>,
    pub min_speed: Vec<f64>,
    /// Number of agents flagged with a collision, summed over steps.
    pub collision_count: usize,
    pub steps_completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub scenario: String,
    pub road: RoadModel,
    pub agents: Vec<AgentInfo>,
    pub steps: Vec<TraceStep>,
    pub final_time: f64,
    pub final_states: Vec<VehicleState>,
    pub metrics: Metrics,
}

impl SimulationTrace {
    pub fn collided(&self) -> bool {
        self.metrics.collision_count > 0
    }
}

/// Random stream of one agent's search at one step.
pub fn agent_rng(seed: u64, agent: usize, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(agent as u64));
    rng.set_stream(step as u64);
    rng
}

/// The decision of one agent for the given joint state.
///
/// Scripted agents keep speed and lane without searching.
pub fn plan_agent(
    scenario: &Scenario,
    agent: usize,
    states: &[VehicleState],
    cfg: &SearchConfig,
    seed: u64,
    step: usize,
) -> Option<SearchResult> {
    let spec = &scenario.agents[agent];
    if spec.scripted {
        return None;
    }
    let model = DrivingModel::new(scenario, agent, spec.prediction_mode, cfg);
    let mut rng = agent_rng(seed, agent, step);
    Some(search(&model, states.to_vec(), cfg, &mut rng))
}

/// Simulates `steps` planning steps. Every planning agent runs its own search
/// on the shared joint state and only the own first action is executed.
pub fn run(scenario: &Scenario, steps: usize, cfg: &SearchConfig, seed: u64) -> SimulationTrace {
    run_observed(scenario, steps, cfg, seed, |_, _| {})
}

/// Like [`run`], calling `observe` with each step and the search results that produced it.
pub fn run_observed(
    scenario: &Scenario,
    steps: usize,
    cfg: &SearchConfig,
    seed: u64,
    mut observe: impl FnMut(&TraceStep, &[Option<SearchResult>]),
) -> SimulationTrace {
    let scene = scenario.scene();
    let dt = cfg.action_duration;
    let mut states = scenario.initial_states();
    let mut trace_steps = Vec::with_capacity(steps);
    for k in 0..steps {
        let results: Vec<Option<SearchResult>> = (0..scenario.agents.len())
            .map(|i| plan_agent(scenario, i, &states, cfg, seed, k))
            .collect();
        let actions: Vec<Action> = results
            .iter()
            .enumerate()
            .map(|(i, r)| r.as_ref().map_or(Action::ZERO, |r| r.agents[i].action))
            .collect();
        let js = simulate_step(scenario, &scene, cfg, &states, &actions);
        let groups = states
            .iter()
            .zip(&js.trajectories)
            .map(|(s, t)| crate::search::assign_action_group(s, &t.source_action, &scenario.road, cfg.eps_dv))
            .collect();
        let time = k as f64 * dt;
        let speeds = js
            .trajectories
            .iter()
            .map(|t| {
                t.points
                    .iter()
                    .map(|p| SpeedSample {
                        t: time + p.t,
                        vx: p.state.vx,
                    })
                    .collect()
            })
            .collect();
        let entry = TraceStep {
            step: k,
            time,
            states: states.clone(),
            actions: js.trajectories.iter().map(|t| t.source_action).collect(),
            groups,
            rewards: js.rewards,
            validation: js.validation,
            speeds,
        };
        debug!(
            "step {k}: actions {:?}",
            entry.actions.iter().map(|a| (a.dv, a.dy)).collect::<Vec<_>>()
        );
        observe(&entry, &results);
        let collided = entry.validation.iter().any(|v| v.collision);
        trace_steps.push(entry);
        states = js.next;
        if collided {
            info!("collision at step {k}, stopping");
            break;
        }
    }
    let mut trace = SimulationTrace {
        scenario: scenario.name.clone(),
        road: scenario.road,
        agents: scenario
            .agents
            .iter()
            .map(|a| AgentInfo {
                id: a.id.clone(),
                v_des: a.desired.v_des,
                direction: a.direction,
            })
            .collect(),
        final_time: trace_steps.len() as f64 * dt,
        steps: trace_steps,
        final_states: states,
        metrics: Metrics {
            velocity_deviation: 0.0,
            per_agent_deviation: Vec::new(),
            min_speed: Vec::new(),
            collision_count: 0,
            steps_completed: 0,
        },
    };
    trace.metrics = compute_metrics(&trace);
    trace
}

/// Runs a scenario with every agent's prediction mode overridden.
pub fn run_with_prediction(
    scenario: &Scenario,
    mode: PredictionMode,
    steps: usize,
    cfg: &SearchConfig,
    seed: u64,
) -> SimulationTrace {
    run(&scenario.clone().with_prediction(mode), steps, cfg, seed)
}

fn trapezoid_abs_deviation(samples: &[SpeedSample], target: f64) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * ((w[0].vx - target).abs() + (w[1].vx - target).abs()))
        .sum()
}

/// Trapezoidal velocity deviation over the logged speeds, plus summary counts.
pub fn compute_metrics(trace: &SimulationTrace) -> Metrics {
    let n = trace.agents.len();
    let mut per_agent = vec![0.0; n];
    let mut min_speed = vec![f64::INFINITY; n];
    for (i, info) in trace.agents.iter().enumerate() {
        for st in &trace.steps {
            let samples = &st.speeds[i];
            per_agent[i] += trapezoid_abs_deviation(samples, info.v_des);
            for s in samples {
                min_speed[i] = min_speed[i].min(s.vx);
            }
        }
        if let Some(s) = trace.final_states.get(i) {
            min_speed[i] = min_speed[i].min(s.vx);
        }
        if !min_speed[i].is_finite() {
            min_speed[i] = 0.0;
        }
    }
    Metrics {
        velocity_deviation: per_agent.iter().sum(),
        per_agent_deviation: per_agent,
        min_speed,
        collision_count: trace
            .steps
            .iter()
            .map(|s| s.validation.iter().filter(|v| v.collision).count())
            .sum(),
        steps_completed: trace.steps.len(),
    }
}
