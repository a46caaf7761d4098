#![allow(dead_code)]

use decoc_core::search::{ActionGroup, SearchModel, Transition};
use decoc_core::trajectory::{Action, ActionBox};
use rand::Rng;

/// Two-player simultaneous game with three actions each, repeated once per
/// depth level. The state is the depth.
pub struct MatrixGame {
    /// `payoff[depth][agent][a][b]` with `a` the first and `b` the second agent's action.
    pub payoff: Vec<[[[f64; 3]; 3]; 2]>,
}

pub const GAME_ACTIONS: [f64; 3] = [-1.0, 0.0, 1.0];

/// The deterministic rollout plays the middle action.
pub const ROLLOUT_ACTION: usize = 1;

pub fn action_index(a: &Action) -> usize {
    GAME_ACTIONS.iter().position(|&v| v == a.dv).expect("game action")
}

impl MatrixGame {
    pub fn new(payoff: Vec<[[[f64; 3]; 3]; 2]>) -> Self {
        Self { payoff }
    }

    pub fn reward(&self, depth: usize, agent: usize, a: usize, b: usize) -> f64 {
        self.payoff[depth.min(self.payoff.len() - 1)][agent][a][b]
    }

    /// Payoffs drawn uniformly from [0, 1].
    pub fn random<R: Rng>(levels: usize, rng: &mut R) -> Self {
        let payoff = (0..levels)
            .map(|_| {
                let mut m = [[[0.0; 3]; 3]; 2];
                for agent in &mut m {
                    for row in agent.iter_mut() {
                        for v in row.iter_mut() {
                            *v = rng.gen::<f64>();
                        }
                    }
                }
                m
            })
            .collect();
        Self { payoff }
    }
}

impl SearchModel for MatrixGame {
    type State = usize;

    fn agent_count(&self) -> usize {
        2
    }

    fn is_scripted(&self, _agent: usize) -> bool {
        false
    }

    fn action_box(&self, _state: &usize, _agent: usize) -> ActionBox {
        ActionBox {
            dv_min: -1.0,
            dv_max: 1.0,
            dy_min: 0.0,
            dy_max: 0.0,
        }
    }

    fn initial_actions(&self, _state: &usize, _agent: usize) -> Vec<Action> {
        GAME_ACTIONS.iter().map(|&v| Action::new(v, 0.0)).collect()
    }

    fn group(&self, _state: &usize, _agent: usize, action: &Action) -> ActionGroup {
        if action.dv > 0.5 {
            ActionGroup::Accelerate
        } else if action.dv < -0.5 {
            ActionGroup::Decelerate
        } else {
            ActionGroup::Keep
        }
    }

    fn step(&self, state: &usize, actions: &[Action]) -> Transition<usize> {
        let a = actions.first().map_or(ROLLOUT_ACTION, action_index_lenient);
        let b = actions.get(1).map_or(ROLLOUT_ACTION, action_index_lenient);
        Transition {
            next: state + 1,
            rewards: vec![self.reward(*state, 0, a, b), self.reward(*state, 1, a, b)],
            terminal: false,
        }
    }

    fn rollout_action<R: Rng + ?Sized>(&self, _state: &usize, _agent: usize, _rng: &mut R) -> Action {
        Action::new(GAME_ACTIONS[ROLLOUT_ACTION], 0.0)
    }
}

/// Widened actions in the continuous box map onto the nearest game action.
fn action_index_lenient(a: &Action) -> usize {
    let mut best = 0;
    for (i, v) in GAME_ACTIONS.iter().enumerate() {
        if (a.dv - v).abs() < (a.dv - GAME_ACTIONS[best]).abs() {
            best = i;
        }
    }
    best
}
