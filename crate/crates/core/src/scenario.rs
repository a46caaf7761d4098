//! Scenario description, file loading, and the built-in scenes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::environment::{AgentBody, Direction, Obstacle, RoadModel, Scene};
use crate::reward::{DesiredState, RewardWeights};
use crate::search::{BlindValueMode, SearchConfig};
use crate::trajectory::VehicleState;
use crate::validation::{rectangles_overlap, Pose, VehicleParams};

/// Names accepted by [`Scenario::builtin`].
pub const BUILTIN_SCENARIOS: [&str; 2] = ["bottleneck", "merge-in"];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown scenario '{name}' (valid: {})", BUILTIN_SCENARIOS.join(", "))]
    Unknown { name: String },
}

/// How a planning agent predicts the other agents inside its own search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    /// Others are assumed to keep their speed and lane.
    ConstantVelocity,
    /// Others' actions are searched jointly with the own action.
    Cooperative,
}

impl PredictionMode {
    pub fn label(self) -> &'static str {
        match self {
            PredictionMode::ConstantVelocity => "constant-velocity",
            PredictionMode::Cooperative => "cooperative",
        }
    }

    pub fn parse(s: &str) -> Option<PredictionMode> {
        match s {
            "constant-velocity" => Some(PredictionMode::ConstantVelocity),
            "cooperative" => Some(PredictionMode::Cooperative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    /// Initial state in the agent's own frame.
    pub initial: VehicleState,
    #[serde(default)]
    pub params: VehicleParams,
    pub desired: DesiredState,
    /// Cooperation factor λ.
    pub lambda: f64,
    pub prediction_mode: PredictionMode,
    #[serde(default)]
    pub direction: Direction,
    /// A scripted agent never plans and always keeps its speed and lane.
    #[serde(default)]
    pub scripted: bool,
}

fn default_name() -> String {
    "custom".into()
}

fn default_steps() -> usize {
    15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub road: RoadModel,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default)]
    pub search: SearchConfig,
    /// Default simulation horizon in planning steps.
    #[serde(default = "default_steps")]
    pub steps: usize,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// A built-in scenario, or a file path if `name_or_path` is not a known name.
    pub fn resolve(name_or_path: &str) -> Result<Scenario, ScenarioError> {
        match Scenario::builtin(name_or_path) {
            Ok(s) => Ok(s),
            Err(ScenarioError::Unknown { .. }) if Path::new(name_or_path).is_file() => load_scenario(name_or_path),
            Err(e) => Err(e),
        }
    }

    pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
        match name {
            "bottleneck" => Ok(bottleneck()),
            "merge-in" => Ok(merge_in()),
            _ => Err(ScenarioError::Unknown { name: name.into() }),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            write!(out, "{b:02x}").expect("writing to a string");
        }
        out
    }

    pub fn initial_states(&self) -> Vec<VehicleState> {
        self.agents.iter().map(|a| a.initial).collect()
    }

    pub fn scene(&self) -> Scene {
        Scene {
            road: self.road,
            obstacles: self.obstacles.clone(),
            bodies: self
                .agents
                .iter()
                .map(|a| AgentBody {
                    params: a.params,
                    direction: a.direction,
                })
                .collect(),
        }
    }

    /// Overrides every agent's prediction mode.
    pub fn with_prediction(mut self, mode: PredictionMode) -> Scenario {
        for a in &mut self.agents {
            a.prediction_mode = mode;
        }
        self
    }

    pub fn world_pose(&self, agent: usize, s: &VehicleState) -> Pose {
        self.agents[agent].direction.to_world(&self.road, s.x, s.y, s.heading)
    }

    /// Checks every scenario invariant and names the first violated one.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = ScenarioError::Invalid;
        self.road.check().map_err(invalid)?;
        self.weights.check().map_err(|e| invalid(format!("weights: {e}")))?;
        self.search.check().map_err(|e| invalid(format!("search: {e}")))?;
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1".into()));
        }
        if self.agents.is_empty() {
            return Err(invalid("at least one agent is required".into()));
        }
        let width = self.road.width();
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.length > 0.0 && o.width > 0.0) {
                return Err(invalid(format!("obstacle {k}: dimensions must be positive")));
            }
            let inside = o.footprint().corners(&o.pose()).iter().all(|&(x, y)| {
                (-1e-9..=width + 1e-9).contains(&y) && (-1e-9..=self.road.length + 1e-9).contains(&x)
            });
            if !inside {
                return Err(invalid(format!("obstacle {k}: footprint leaves the road")));
            }
        }
        for (i, a) in self.agents.iter().enumerate() {
            let tag = format!("agent '{}'", a.id);
            if self.agents[..i].iter().any(|b| b.id == a.id) {
                return Err(invalid(format!("{tag}: duplicate id")));
            }
            a.params.check().map_err(|e| invalid(format!("{tag}: params: {e}")))?;
            if !(0.0..=1.0).contains(&a.lambda) {
                return Err(invalid(format!("{tag}: lambda must lie in [0, 1] (got {})", a.lambda)));
            }
            if !(a.desired.v_des >= 0.0) {
                return Err(invalid(format!("{tag}: desired.v_des must be non-negative")));
            }
            if a.desired.k_des >= self.road.lane_count {
                return Err(invalid(format!("{tag}: desired.k_des {} is not a lane", a.desired.k_des)));
            }
            let s = &a.initial;
            let finite = [s.x, s.y, s.vx, s.vy, s.ax, s.ay, s.heading].iter().all(|v| v.is_finite());
            if !finite {
                return Err(invalid(format!("{tag}: initial state must be finite")));
            }
            if s.vx < 0.0 {
                return Err(invalid(format!("{tag}: initial vx must be non-negative")));
            }
            let pose = self.world_pose(i, s);
            let on_road = a
                .params
                .footprint()
                .corners(&pose)
                .iter()
                .all(|&(_, y)| (-1e-9..=width + 1e-9).contains(&y));
            if !on_road || !(0.0..=self.road.length).contains(&s.x) {
                return Err(invalid(format!("{tag}: initial position is not on the road")));
            }
            for (k, o) in self.obstacles.iter().enumerate() {
                if rectangles_overlap(&pose, &a.params.footprint(), &o.pose(), &o.footprint()) {
                    return Err(invalid(format!("{tag}: initially collides with obstacle {k}")));
                }
            }
            for (j, b) in self.agents[..i].iter().enumerate() {
                let other = self.world_pose(j, &b.initial);
                if rectangles_overlap(&pose, &a.params.footprint(), &other, &b.params.footprint()) {
                    return Err(invalid(format!("{tag}: initially collides with agent '{}'", b.id)));
                }
            }
        }
        Ok(())
    }
}

fn parked(x: f64, y: f64) -> Obstacle {
    Obstacle {
        x,
        y,
        length: 4.5,
        width: 2.0,
        heading: 0.0,
    }
}

/// Search settings shared by the built-in scenes.
fn scene_search(initial_actions_per_agent: usize) -> SearchConfig {
    SearchConfig {
        pw_alpha: 0.3,
        kernel_gamma: 4.0,
        bv_mode: BlindValueMode::Distance,
        initial_actions_per_agent,
        reward_scale: 100.0,
        n_min_final: 1000.0,
        ..SearchConfig::default()
    }
}

fn agent(id: &str, initial: VehicleState, desired: DesiredState, lambda: f64, direction: Direction) -> AgentSpec {
    AgentSpec {
        id: id.into(),
        initial,
        params: VehicleParams::default(),
        desired,
        lambda,
        prediction_mode: PredictionMode::Cooperative,
        direction,
        scripted: false,
    }
}

/// Two opposing vehicles and a row of cars parked in the green vehicle's
/// lane. Both can pass at the same time only if the red vehicle moves right.
fn bottleneck() -> Scenario {
    let road = RoadModel {
        lane_count: 2,
        lane_width: 3.5,
        length: 150.0,
    };
    let desired = DesiredState { v_des: 8.0, k_des: 0 };
    Scenario {
        name: "bottleneck".into(),
        road,
        obstacles: [64.0, 71.0, 78.0, 85.0].map(|x| parked(x, 1.6)).to_vec(),
        agents: vec![
            agent("green", VehicleState::cruising(10.0, 1.75, 8.0), desired, 0.5, Direction::Forward),
            agent("red", VehicleState::cruising(10.0, 1.75, 8.0), desired, 0.5, Direction::Reverse),
        ],
        weights: RewardWeights::default(),
        search: scene_search(5),
        steps: 15,
    }
}

/// The green vehicle's lane is blocked ahead; red and blue drive in the
/// adjacent lane with a gap that is too short to merge into unless they
/// make room.
fn merge_in() -> Scenario {
    let road = RoadModel {
        lane_count: 2,
        lane_width: 3.5,
        length: 250.0,
    };
    let lane1 = road.lane_center(1);
    Scenario {
        name: "merge-in".into(),
        road,
        obstacles: vec![parked(60.0, 1.8)],
        agents: vec![
            agent(
                "green",
                VehicleState::cruising(20.0, 1.75, 10.0),
                DesiredState { v_des: 10.0, k_des: 1 },
                0.5,
                Direction::Forward,
            ),
            agent(
                "red",
                VehicleState::cruising(12.0, lane1, 10.0),
                DesiredState { v_des: 10.0, k_des: 1 },
                0.5,
                Direction::Forward,
            ),
            agent(
                "blue",
                VehicleState::cruising(21.0, lane1, 10.0),
                DesiredState { v_des: 10.0, k_des: 1 },
                0.5,
                Direction::Forward,
            ),
        ],
        weights: RewardWeights::default(),
        search: scene_search(3),
        steps: 15,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_SCENARIOS {
            let s = Scenario::builtin(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn bottleneck_has_two_opposing_planners() {
        let s = Scenario::builtin("bottleneck").unwrap();
        assert_eq!(s.agents.len(), 2);
        assert_eq!(s.agents[0].direction, Direction::Forward);
        assert_eq!(s.agents[1].direction, Direction::Reverse);
        assert!(s.agents.iter().all(|a| !a.scripted));
        let red = s.world_pose(1, &s.agents[1].initial);
        assert_eq!(s.road.lane_index(red.y).unwrap(), 1);
    }

    #[test]
    fn merge_in_blocks_the_green_lane() {
        let s = Scenario::builtin("merge-in").unwrap();
        let green = &s.agents[0].initial;
        let o = &s.obstacles[0];
        assert_eq!(s.road.lane_index(o.y).unwrap(), s.road.lane_index(green.y).unwrap());
        assert!((o.x - green.x - 40.0).abs() < 1e-12);
        for other in &s.agents[1..] {
            assert_eq!(s.road.lane_index(other.initial.y).unwrap(), 1);
        }
    }

    #[test]
    fn unknown_name_lists_choices() {
        let e = Scenario::builtin("roundabout").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bottleneck") && msg.contains("merge-in"));
    }

    #[test]
    fn json_round_trip_is_identity() {
        for name in BUILTIN_SCENARIOS {
            let s = Scenario::builtin(name).unwrap();
            let back = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.hash(), s.hash());
        }
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"road": {"lane_count": 2, "length": 100.0}, "agents": []}"#;
        match Scenario::from_json(text) {
            Err(ScenarioError::Parse { message, line, .. }) => {
                assert!(message.contains("lane_width"), "{message}");
                assert_eq!(line, 1);
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn lambda_out_of_range_is_rejected() {
        let mut s = Scenario::builtin("bottleneck").unwrap();
        s.agents[0].lambda = 1.5;
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("lambda"), "{msg}");
    }

    #[test]
    fn initial_collision_is_rejected() {
        let mut s = Scenario::builtin("merge-in").unwrap();
        s.agents[0].initial.x = 59.0;
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("collides"), "{msg}");
    }

    #[test]
    fn hash_ignores_nothing_but_changes_with_content() {
        let a = Scenario::builtin("bottleneck").unwrap();
        let mut b = a.clone();
        b.agents[0].lambda = 0.25;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
