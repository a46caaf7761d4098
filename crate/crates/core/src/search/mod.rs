//! Decoupled-UCT Monte Carlo Tree Search over continuous joint actions.
//!
//! Every agent keeps its own statistics at every node and selects its action
//! without looking at the other agents' current choice; the joint action of
//! all agents then indexes the child node. Continuous action spaces are
//! handled by progressive widening, optionally combined with semantic action
//! groups, kernel-weighted (similarity) backpropagation and blind-value
//! guided proposals.

mod blind;
mod config;
mod stats;
mod tree;

use rand::Rng;
use thiserror::Error;

use crate::trajectory::{Action, ActionBox};

pub use blind::{blind_value_propose, blind_values};
pub use config::{BlindValueMode, Enhancements, SearchConfig};
pub use stats::{
    action_kernel, assign_action_group, progressive_widening_due, uct_value, ActionGroup, ActionStats, AgentStats,
    GroupStats, LateralClass, SpeedClass,
};
pub use tree::{rollout, search, AgentDecision, Edge, Node, RootActionRow, SearchResult, SearchTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("UCT is undefined for an unvisited action")]
    UnvisitedAction,
    #[error("action index {0} is not explored at this node")]
    UnknownAction(usize),
}

/// Result of applying one joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next: S,
    /// Return signal of each agent for this step (its cooperative reward).
    pub rewards: Vec<f64>,
    /// No further steps are simulated after a terminal transition.
    pub terminal: bool,
}

/// The decision problem seen by the search.
pub trait SearchModel {
    type State: Clone;

    fn agent_count(&self) -> usize;

    /// Scripted agents are not searched over; they always play
    /// [`SearchModel::scripted_action`].
    fn is_scripted(&self, agent: usize) -> bool;

    fn scripted_action(&self, _state: &Self::State, _agent: usize) -> Action {
        Action::ZERO
    }

    fn action_box(&self, state: &Self::State, agent: usize) -> ActionBox;

    /// Seeded action set of a fresh node.
    fn initial_actions(&self, state: &Self::State, agent: usize) -> Vec<Action>;

    fn group(&self, state: &Self::State, agent: usize, action: &Action) -> ActionGroup;

    fn step(&self, state: &Self::State, actions: &[Action]) -> Transition<Self::State>;

    /// Default policy used beyond the tree.
    fn rollout_action<R: Rng + ?Sized>(&self, state: &Self::State, agent: usize, rng: &mut R) -> Action;
}

pub(crate) fn pick_uniform<R: Rng + ?Sized>(len: usize, rng: &mut R) -> usize {
    if len <= 1 {
        0
    } else {
        rng.gen_range(0..len)
    }
}
