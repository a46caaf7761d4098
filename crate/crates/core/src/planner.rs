//! The driving problem as seen by one planning agent's search.

use rand::Rng;

use crate::environment::{step, validate_static_poses, Scene};
use crate::reward::{action_cost, cooperative_reward, state_reward_clamped, validation_reward, RewardBreakdown};
use crate::scenario::{PredictionMode, Scenario};
use crate::search::{assign_action_group, ActionGroup, LateralClass, SearchConfig, SearchModel, Transition};
use crate::trajectory::{action_to_trajectory, Action, ActionBox, Trajectory, VehicleState};
use crate::validation::{first_overlap, Pose, ValidationResult};

/// Peak over mean acceleration of a jerk-minimal speed change between rest-acceleration states.
const PEAK_ACCELERATION_FACTOR: f64 = 1.875;

/// Everything that happened to the agents during one joint step.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStep {
    pub trajectories: Vec<Trajectory>,
    pub next: Vec<VehicleState>,
    pub validation: Vec<ValidationResult>,
    pub rewards: Vec<RewardBreakdown>,
}

/// Builds each agent's trajectory, steps the scene, and scores every agent.
///
/// Actions are clamped to the speed-dependent action box first, so the
/// terminal speed is never negative.
pub fn simulate_step(
    scenario: &Scenario,
    scene: &Scene,
    cfg: &SearchConfig,
    states: &[VehicleState],
    actions: &[Action],
) -> JointStep {
    let trajectories: Vec<Trajectory> = states
        .iter()
        .zip(actions)
        .map(|(s, a)| {
            let a = cfg.action_box.for_speed(s.vx).clamp(*a);
            action_to_trajectory(s, a, cfg.action_duration, cfg.sample_dt).expect("clamped action is feasible")
        })
        .collect();
    let outcome = step(scene, &trajectories).expect("trajectories share one time grid");
    let road = &scenario.road;
    let w = &scenario.weights;
    let rewards = scenario
        .agents
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let lane_changed = road.lane_index_clamped(states[i].y) != road.lane_index_clamped(outcome.next[i].y);
            RewardBreakdown {
                state: state_reward_clamped(&outcome.next[i], &spec.desired, road, w),
                action: action_cost(&trajectories[i], lane_changed, w),
                validation: validation_reward(&outcome.validation[i], w),
            }
        })
        .collect();
    JointStep {
        trajectories,
        next: outcome.next,
        validation: outcome.validation,
        rewards,
    }
}

/// Search model of one ego agent.
///
/// In constant-velocity mode every other agent is scripted to keep its speed
/// and lane; their rewards do not enter the ego's objective and a collision
/// that does not involve a planning agent does not end the episode.
pub struct DrivingModel<'a> {
    scenario: &'a Scenario,
    scene: Scene,
    cfg: SearchConfig,
    scripted: Vec<bool>,
}

impl<'a> DrivingModel<'a> {
    pub fn new(scenario: &'a Scenario, ego: usize, prediction: PredictionMode, cfg: &SearchConfig) -> Self {
        let scripted = scenario
            .agents
            .iter()
            .enumerate()
            .map(|(j, spec)| spec.scripted || (prediction == PredictionMode::ConstantVelocity && j != ego))
            .collect();
        Self {
            scenario,
            scene: scenario.scene(),
            cfg: cfg.clone(),
            scripted,
        }
    }

    fn constant_velocity_poses(&self, state: &[VehicleState], except: usize) -> Vec<(usize, Vec<Pose>)> {
        (0..state.len())
            .filter(|&j| j != except)
            .map(|j| {
                let t = action_to_trajectory(&state[j], Action::ZERO, self.cfg.action_duration, self.cfg.sample_dt)
                    .expect("keeping speed is feasible");
                (j, self.scene.world_poses(j, &t))
            })
            .collect()
    }

    /// The configured action box narrowed to what the agent can reach from
    /// `s`: a non-negative terminal speed, a peak acceleration within the
    /// vehicle limits, and a lateral target that keeps the body on the road.
    /// The speed limits assume zero initial acceleration.
    pub fn feasible_box(&self, s: &VehicleState, agent: usize) -> ActionBox {
        let b = self.cfg.action_box.for_speed(s.vx);
        let p = &self.scenario.agents[agent].params;
        let reach = self.cfg.action_duration / PEAK_ACCELERATION_FACTOR;
        let half_width = 0.5 * p.width;
        let dy_lo = (half_width - s.y).min(0.0);
        let dy_hi = (self.scenario.road.width() - half_width - s.y).max(0.0);
        let dv_min = b.dv_min.max(p.ax_min * reach).min(0.0);
        let dv_max = b.dv_max.min(p.ax_max * reach).max(dv_min);
        ActionBox {
            dv_min,
            dv_max,
            dy_min: b.dy_min.max(dy_lo).min(0.0),
            dy_max: b.dy_max.min(dy_hi).max(0.0),
        }
    }

    fn representative(&self, s: &VehicleState, agent: usize, group: ActionGroup) -> Option<Action> {
        let road = &self.scenario.road;
        let lane = road.lane_index_clamped(s.y);
        let target = match group.lateral() {
            LateralClass::Stay => lane,
            LateralClass::Left if lane + 1 < road.lane_count => lane + 1,
            LateralClass::Right if lane > 0 => lane - 1,
            _ => return None,
        };
        let dv = match group {
            ActionGroup::Accelerate | ActionGroup::LeftAccelerate | ActionGroup::RightAccelerate => self.cfg.dv_step,
            ActionGroup::Decelerate | ActionGroup::LeftDecelerate | ActionGroup::RightDecelerate => -self.cfg.dv_step,
            _ => 0.0,
        };
        let b = self.feasible_box(s, agent);
        Some(b.clamp(Action::new(dv, road.lane_center(target) - s.y)))
    }
}

impl SearchModel for DrivingModel<'_> {
    type State = Vec<VehicleState>;

    fn agent_count(&self) -> usize {
        self.scenario.agents.len()
    }

    fn is_scripted(&self, agent: usize) -> bool {
        self.scripted[agent]
    }

    fn action_box(&self, state: &Self::State, agent: usize) -> ActionBox {
        self.feasible_box(&state[agent], agent)
    }

    /// The documented seed order, clamped to the feasible box and to the
    /// outermost lane centres; duplicates are dropped.
    fn initial_actions(&self, state: &Self::State, agent: usize) -> Vec<Action> {
        let b = self.action_box(state, agent);
        let step = self.cfg.dv_step;
        let lw = self.scenario.road.lane_width;
        let seeds = [
            Action::ZERO,
            Action::new(step, 0.0),
            Action::new(-step, 0.0),
            Action::new(0.0, lw),
            Action::new(0.0, -lw),
            Action::new(step, lw),
            Action::new(-step, lw),
            Action::new(step, -lw),
            Action::new(-step, -lw),
        ];
        let road = &self.scenario.road;
        let y = state[agent].y;
        let (lo, hi) = (road.lane_center(0) - y, road.lane_center(road.lane_count - 1) - y);
        let mut out: Vec<Action> = Vec::new();
        for a in seeds {
            let a = b.clamp(Action::new(a.dv, a.dy.clamp(lo.min(0.0), hi.max(0.0))));
            if !out.contains(&a) {
                out.push(a);
            }
            if out.len() >= self.cfg.initial_actions_per_agent {
                break;
            }
        }
        out
    }

    fn group(&self, state: &Self::State, agent: usize, action: &Action) -> ActionGroup {
        assign_action_group(&state[agent], action, &self.scenario.road, self.cfg.eps_dv)
    }

    fn step(&self, state: &Self::State, actions: &[Action]) -> Transition<Self::State> {
        let js = simulate_step(self.scenario, &self.scene, &self.cfg, state, actions);
        let individual: Vec<f64> = js
            .rewards
            .iter()
            .zip(&self.scripted)
            .map(|(r, &scripted)| if scripted { 0.0 } else { r.total() })
            .collect();
        let rewards = self
            .scenario
            .agents
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                if self.scripted[i] {
                    0.0
                } else {
                    cooperative_reward(&individual, i, spec.lambda).expect("agent index in range")
                }
            })
            .collect();
        let terminal = js
            .validation
            .iter()
            .zip(&self.scripted)
            .any(|(v, &scripted)| v.collision && !scripted);
        Transition {
            next: js.next,
            rewards,
            terminal,
        }
    }

    /// A group representative, redrawn up to three times while it does not
    /// exist, fails the static checks, or runs into another agent that keeps
    /// its current speed and lane. Redraws skip groups already rejected.
    fn rollout_action<R: Rng + ?Sized>(&self, state: &Self::State, agent: usize, rng: &mut R) -> Action {
        let s = &state[agent];
        let mut others: Option<Vec<(usize, Vec<Pose>)>> = None;
        let mut rejected = [false; 9];
        for _ in 0..=3 {
            let group = if !rejected[0] && rng.gen_bool(0.5) {
                ActionGroup::Keep
            } else {
                let open: Vec<ActionGroup> = ActionGroup::ALL[1..]
                    .iter()
                    .copied()
                    .filter(|g| !rejected[g.index()])
                    .collect();
                if open.is_empty() {
                    break;
                }
                open[rng.gen_range(0..open.len())]
            };
            rejected[group.index()] = true;
            let Some(a) = self.representative(s, agent, group) else {
                continue;
            };
            let Ok(traj) = action_to_trajectory(s, a, self.cfg.action_duration, self.cfg.sample_dt) else {
                continue;
            };
            let poses = self.scene.world_poses(agent, &traj);
            if !validate_static_poses(&self.scene, agent, &traj, &poses).is_valid() {
                continue;
            }
            let others = others.get_or_insert_with(|| self.constant_velocity_poses(state, agent));
            let fp = self.scene.bodies[agent].params.footprint();
            let clear = others
                .iter()
                .all(|(j, p)| first_overlap(&poses, &fp, p, &self.scene.bodies[*j].params.footprint()).is_none());
            if clear {
                return a;
            }
        }
        Action::ZERO
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{Direction, RoadModel};
    use crate::reward::{DesiredState, RewardWeights};
    use crate::scenario::AgentSpec;
    use crate::search::rollout;
    use crate::validation::VehicleParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(x: f64, y: f64, v: f64) -> Scenario {
        Scenario {
            name: "single".into(),
            road: RoadModel {
                lane_count: 2,
                lane_width: 3.5,
                length: 1000.0,
            },
            obstacles: vec![],
            agents: vec![AgentSpec {
                id: "a".into(),
                initial: VehicleState::cruising(x, y, v),
                params: VehicleParams::default(),
                desired: DesiredState { v_des: 10.0, k_des: 0 },
                lambda: 0.0,
                prediction_mode: PredictionMode::Cooperative,
                direction: Direction::Forward,
                scripted: false,
            }],
            weights: RewardWeights::default(),
            search: SearchConfig::default(),
            steps: 3,
        }
    }

    #[test]
    fn seeds_follow_the_documented_order() {
        let sc = single(0.0, 1.75, 10.0);
        let cfg = SearchConfig {
            initial_actions_per_agent: 5,
            ..sc.search.clone()
        };
        let m = DrivingModel::new(&sc, 0, PredictionMode::Cooperative, &cfg);
        let seeds = m.initial_actions(&sc.initial_states(), 0);
        // the right lane change leaves the road and is dropped
        assert_eq!(
            seeds,
            vec![
                Action::ZERO,
                Action::new(2.0, 0.0),
                Action::new(-2.0, 0.0),
                Action::new(0.0, 3.5),
                Action::new(2.0, 3.5)
            ]
        );
    }

    #[test]
    fn seeds_are_clamped_at_standstill() {
        let sc = single(0.0, 1.75, 0.0);
        let cfg = SearchConfig {
            initial_actions_per_agent: 5,
            ..sc.search.clone()
        };
        let m = DrivingModel::new(&sc, 0, PredictionMode::Cooperative, &cfg);
        let seeds = m.initial_actions(&sc.initial_states(), 0);
        assert_eq!(
            seeds,
            vec![Action::ZERO, Action::new(2.0, 0.0), Action::new(0.0, 3.5), Action::new(2.0, 3.5)]
        );
    }

    #[test]
    fn standing_still_on_target_is_free() {
        let sc = single(0.0, 1.75, 10.0);
        let m = DrivingModel::new(&sc, 0, PredictionMode::Cooperative, &sc.search);
        let tr = m.step(&sc.initial_states(), &[Action::ZERO]);
        assert!(tr.rewards[0].abs() < 1e-12);
        assert!(!tr.terminal);
        assert!((tr.next[0].x - 20.0).abs() < 1e-9);
    }

    #[test]
    fn rollout_actions_stay_on_existing_lanes() {
        let sc = single(0.0, 1.75, 10.0);
        let m = DrivingModel::new(&sc, 0, PredictionMode::Cooperative, &sc.search);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let states = sc.initial_states();
        let mut keep = 0;
        for _ in 0..2000 {
            let a = m.rollout_action(&states, 0, &mut rng);
            let y = states[0].y + a.dy;
            assert!(y >= 0.0 && y <= sc.road.width());
            if a.dy == 0.0 && a.dv == 0.0 {
                keep += 1;
            }
        }
        assert!(keep > 900 && keep < 1400, "{keep}");
    }

    #[test]
    fn rollout_on_target_state_returns_zero() {
        struct Hold<'a>(DrivingModel<'a>);
        impl SearchModel for Hold<'_> {
            type State = Vec<VehicleState>;
            fn agent_count(&self) -> usize {
                1
            }
            fn is_scripted(&self, _: usize) -> bool {
                false
            }
            fn action_box(&self, s: &Self::State, a: usize) -> ActionBox {
                self.0.action_box(s, a)
            }
            fn initial_actions(&self, s: &Self::State, a: usize) -> Vec<Action> {
                self.0.initial_actions(s, a)
            }
            fn group(&self, s: &Self::State, a: usize, act: &Action) -> ActionGroup {
                self.0.group(s, a, act)
            }
            fn step(&self, s: &Self::State, act: &[Action]) -> Transition<Self::State> {
                self.0.step(s, act)
            }
            fn rollout_action<R: Rng + ?Sized>(&self, _: &Self::State, _: usize, _: &mut R) -> Action {
                Action::ZERO
            }
        }
        let sc = single(0.0, 1.75, 10.0);
        let m = Hold(DrivingModel::new(&sc, 0, PredictionMode::Cooperative, &sc.search));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for depth in 0..5 {
            let g = rollout(&m, &sc.initial_states(), depth, &sc.search, &mut rng);
            assert!(g[0].abs() < 1e-9);
        }
    }
}
