//! Decentralized cooperative trajectory planning with continuous-action MCTS.
//!
//! Vehicles choose continuous `(dv, dy)` actions that are turned into
//! jerk-minimal quintic trajectories. Each vehicle plans with its own
//! Decoupled-UCT search over the joint action space and executes only the
//! first step of its plan.

pub mod environment;
pub mod output;
pub mod planner;
pub mod reward;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod trajectory;
pub mod validation;

pub use environment::{Direction, Obstacle, RoadModel};
pub use planner::DrivingModel;
pub use scenario::{load_scenario, AgentSpec, PredictionMode, Scenario, ScenarioError};
pub use search::{search, SearchConfig, SearchModel};
pub use sim::{compute_metrics, run, Metrics, SimulationTrace};
pub use trajectory::{Action, VehicleState};
