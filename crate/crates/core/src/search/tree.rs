//! Tree storage and the select / expand / simulate / backpropagate loop.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::blind::{argmax_uniform, blind_value_propose};
use super::config::SearchConfig;
use super::stats::{progressive_widening_due, uct_unchecked, ActionGroup, AgentStats};
use super::{pick_uniform, SearchModel};
use crate::trajectory::Action;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub child: usize,
    /// Per-agent step reward of the joint action leading to `child`.
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<S> {
    pub state: S,
    pub depth: usize,
    /// Number of iterations that passed through this node.
    pub n: f64,
    pub terminal: bool,
    /// Decoupled statistics, one entry per agent; empty until first selection.
    pub agents: Vec<AgentStats>,
    /// Children keyed by the per-agent indices of the joint action.
    pub children: BTreeMap<Vec<u32>, Edge>,
}

impl<S> Node<S> {
    fn new(state: S, depth: usize, terminal: bool) -> Self {
        Self {
            state,
            depth,
            n: 0.0,
            terminal,
            agents: Vec::new(),
            children: BTreeMap::new(),
        }
    }

    pub fn is_expanded(&self) -> bool {
        !self.agents.is_empty()
    }
}

/// One explored root action, as written to exploration dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootActionRow {
    pub agent: usize,
    pub action: Action,
    pub n: f64,
    pub q: f64,
    pub group: ActionGroup,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentDecision {
    pub agent: usize,
    pub action: Action,
    pub group: ActionGroup,
    pub q: f64,
    pub n: f64,
    /// All explored root actions of this agent; empty for scripted agents.
    pub root: Vec<RootActionRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub agents: Vec<AgentDecision>,
    pub root_n: f64,
    pub node_count: usize,
}

/// Picks among `(q, n)` entries: unvisited first, then maximal UCT; ties uniform.
fn pick_ucb<R: Rng + ?Sized>(entries: &[(f64, f64)], parent_n: f64, cfg: &SearchConfig, rng: &mut R) -> usize {
    let unvisited: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].1 <= 0.0).collect();
    if !unvisited.is_empty() {
        return unvisited[pick_uniform(unvisited.len(), rng)];
    }
    let values: Vec<f64> = entries
        .iter()
        .map(|&(q, n)| uct_unchecked(q / cfg.reward_scale, n, parent_n, cfg.uct_c))
        .collect();
    argmax_uniform(&values, rng)
}

/// Exploitation-only choice of one agent's action among its explored actions.
fn select_existing<R: Rng + ?Sized>(stats: &AgentStats, cfg: &SearchConfig, rng: &mut R) -> usize {
    let total = stats.total_n();
    if cfg.enhancements.groups {
        let nonempty: Vec<usize> = (0..stats.groups.len())
            .filter(|&g| !stats.groups[g].members.is_empty())
            .collect();
        let entries: Vec<(f64, f64)> = nonempty.iter().map(|&g| (stats.groups[g].q, stats.groups[g].n)).collect();
        let group = &stats.groups[nonempty[pick_ucb(&entries, total, cfg, rng)]];
        let entries: Vec<(f64, f64)> = group
            .members
            .iter()
            .map(|&m| (stats.actions[m].q, stats.actions[m].n))
            .collect();
        group.members[pick_ucb(&entries, group.n, cfg, rng)]
    } else {
        let entries: Vec<(f64, f64)> = stats.actions.iter().map(|a| (a.q, a.n)).collect();
        pick_ucb(&entries, total, cfg, rng)
    }
}

/// Owns one search tree over a model.
pub struct SearchTree<'m, M: SearchModel> {
    model: &'m M,
    cfg: SearchConfig,
    nodes: Vec<Node<M::State>>,
}

impl<'m, M: SearchModel> SearchTree<'m, M> {
    pub fn new(model: &'m M, root: M::State, cfg: SearchConfig) -> Self {
        Self {
            model,
            cfg,
            nodes: vec![Node::new(root, 0, false)],
        }
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &[Node<M::State>] {
        &self.nodes
    }

    pub fn root(&self) -> &Node<M::State> {
        &self.nodes[0]
    }

    fn ensure_stats(&mut self, idx: usize) {
        if self.nodes[idx].is_expanded() {
            return;
        }
        let model = self.model;
        let node = &mut self.nodes[idx];
        let state = &node.state;
        node.agents = (0..model.agent_count())
            .map(|agent| {
                let scripted = model.is_scripted(agent);
                let mut stats = AgentStats::new(model.action_box(state, agent), scripted);
                if scripted {
                    let a = model.scripted_action(state, agent);
                    stats.push(a, model.group(state, agent, &a));
                } else {
                    for a in model.initial_actions(state, agent) {
                        stats.push(a, model.group(state, agent, &a));
                    }
                }
                stats
            })
            .collect();
    }

    /// Chooses one agent's action at a node, widening its action set when due.
    pub fn select_agent_action<R: Rng + ?Sized>(&mut self, idx: usize, agent: usize, rng: &mut R) -> usize {
        self.ensure_stats(idx);
        let model = self.model;
        let cfg = &self.cfg;
        let node = &mut self.nodes[idx];
        let node_n = node.n;
        let state = &node.state;
        let stats = &mut node.agents[agent];
        if stats.scripted {
            return 0;
        }
        let widen = stats.actions.is_empty()
            || (cfg.progressive_widening && progressive_widening_due(stats.actions.len(), node_n, cfg.pw_c, cfg.pw_alpha));
        if widen {
            let action = if cfg.enhancements.guided {
                blind_value_propose(&stats.actions, stats.total_n(), &stats.bounds, cfg, rng)
            } else {
                stats.bounds.sample(rng)
            };
            let group = model.group(state, agent, &action);
            return stats.push(action, group);
        }
        select_existing(stats, cfg, rng)
    }

    /// Each agent selects independently from its own statistics.
    pub fn select_joint_action<R: Rng + ?Sized>(&mut self, idx: usize, rng: &mut R) -> Vec<u32> {
        (0..self.model.agent_count())
            .map(|agent| self.select_agent_action(idx, agent, rng) as u32)
            .collect()
    }

    /// One select / expand / rollout / backpropagate pass.
    pub fn iterate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let agents = self.model.agent_count();
        let mut path: Vec<(usize, Vec<u32>)> = Vec::with_capacity(self.cfg.max_depth);
        let mut leaf_value = vec![0.0; agents];
        let mut cur = 0;
        loop {
            let node = &self.nodes[cur];
            if node.terminal || node.depth >= self.cfg.max_depth {
                break;
            }
            let joint = self.select_joint_action(cur, rng);
            if let Some(edge) = self.nodes[cur].children.get(&joint) {
                let child = edge.child;
                path.push((cur, joint));
                cur = child;
                continue;
            }

            let node = &self.nodes[cur];
            let actions: Vec<Action> = joint
                .iter()
                .enumerate()
                .map(|(i, &a)| node.agents[i].actions[a as usize].action)
                .collect();
            let depth = node.depth + 1;
            let tr = self.model.step(&node.state, &actions);
            if !tr.terminal {
                leaf_value = rollout(self.model, &tr.next, self.cfg.max_depth - depth, &self.cfg, rng);
            }
            let child = self.nodes.len();
            self.nodes.push(Node::new(tr.next, depth, tr.terminal));
            self.nodes[cur].children.insert(
                joint.clone(),
                Edge {
                    child,
                    rewards: tr.rewards,
                },
            );
            path.push((cur, joint));
            cur = child;
            break;
        }
        self.nodes[cur].n += 1.0;

        let mut g = leaf_value;
        for (idx, joint) in path.iter().rev() {
            let node = &mut self.nodes[*idx];
            let rewards = &node.children[joint].rewards;
            for (gi, r) in g.iter_mut().zip(rewards) {
                *gi = r + self.cfg.discount * *gi;
            }
            for (agent, stats) in node.agents.iter_mut().enumerate() {
                if !stats.scripted {
                    stats
                        .similarity_update(joint[agent] as usize, g[agent], &self.cfg)
                        .expect("selected action is explored");
                }
            }
            node.n += 1.0;
        }
    }

    pub fn run<R: Rng + ?Sized>(&mut self, iterations: usize, rng: &mut R) {
        for _ in 0..iterations {
            self.iterate(rng);
        }
    }

    /// Per agent, the root action with the highest value among those visited
    /// at least `n_min_final` times; ties go to the more visited action.
    pub fn decide<R: Rng + ?Sized>(&mut self, rng: &mut R) -> SearchResult {
        self.ensure_stats(0);
        let root = &self.nodes[0];
        let agents = root
            .agents
            .iter()
            .enumerate()
            .map(|(agent, stats)| {
                if stats.scripted {
                    let s = &stats.actions[0];
                    return AgentDecision {
                        agent,
                        action: s.action,
                        group: s.group,
                        q: s.q,
                        n: s.n,
                        root: Vec::new(),
                    };
                }
                let mut eligible: Vec<usize> = (0..stats.actions.len())
                    .filter(|&i| stats.actions[i].n >= self.cfg.n_min_final)
                    .collect();
                if eligible.is_empty() {
                    let most = stats.actions.iter().map(|a| a.n).fold(f64::NEG_INFINITY, f64::max);
                    eligible = (0..stats.actions.len()).filter(|&i| stats.actions[i].n == most).collect();
                }
                let best_q = eligible.iter().map(|&i| stats.actions[i].q).fold(f64::NEG_INFINITY, f64::max);
                eligible.retain(|&i| stats.actions[i].q == best_q);
                let best_n = eligible.iter().map(|&i| stats.actions[i].n).fold(f64::NEG_INFINITY, f64::max);
                eligible.retain(|&i| stats.actions[i].n == best_n);
                let chosen = eligible[pick_uniform(eligible.len(), rng)];
                let s = &stats.actions[chosen];
                AgentDecision {
                    agent,
                    action: s.action,
                    group: s.group,
                    q: s.q,
                    n: s.n,
                    root: stats
                        .actions
                        .iter()
                        .enumerate()
                        .map(|(i, a)| RootActionRow {
                            agent,
                            action: a.action,
                            n: a.n,
                            q: a.q,
                            group: a.group,
                            selected: i == chosen,
                        })
                        .collect(),
                }
            })
            .collect();
        SearchResult {
            agents,
            root_n: self.nodes[0].n,
            node_count: self.nodes.len(),
        }
    }
}

/// Simulates the default policy for `depth_remaining` steps and returns each
/// agent's discounted return. A terminal step (collision) ends the rollout
/// after its reward has been counted.
pub fn rollout<M: SearchModel, R: Rng + ?Sized>(
    model: &M,
    state: &M::State,
    depth_remaining: usize,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Vec<f64> {
    let agents = model.agent_count();
    let mut returns = vec![0.0; agents];
    if depth_remaining == 0 {
        return returns;
    }
    let mut state = state.clone();
    let mut discount = 1.0;
    for _ in 0..depth_remaining {
        let actions: Vec<Action> = (0..agents)
            .map(|i| {
                if model.is_scripted(i) {
                    model.scripted_action(&state, i)
                } else {
                    model.rollout_action(&state, i, rng)
                }
            })
            .collect();
        let tr = model.step(&state, &actions);
        for (g, r) in returns.iter_mut().zip(&tr.rewards) {
            *g += discount * r;
        }
        if tr.terminal {
            break;
        }
        discount *= cfg.discount;
        state = tr.next;
    }
    returns
}

/// Runs `cfg.iterations` iterations from `root` and extracts each agent's decision.
pub fn search<M: SearchModel, R: Rng + ?Sized>(
    model: &M,
    root: M::State,
    cfg: &SearchConfig,
    rng: &mut R,
) -> SearchResult {
    let mut tree = SearchTree::new(model, root, cfg.clone());
    tree.run(cfg.iterations, rng);
    tree.decide(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::config::Enhancements;
    use crate::trajectory::ActionBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_stats(rng: &mut ChaCha8Rng, visited: bool) -> AgentStats {
        let mut s = AgentStats::new(ActionBox::default(), false);
        let count = rng.gen_range(1..12);
        for _ in 0..count {
            let group = ActionGroup::ALL[rng.gen_range(0..9)];
            let i = s.push(Action::new(rng.gen_range(-5.0..5.0), rng.gen_range(-4.0..4.0)), group);
            s.actions[i].n = if visited { rng.gen_range(1..50) as f64 } else { 0.0 };
            s.actions[i].q = rng.gen_range(-20.0..20.0);
        }
        s.refresh_groups();
        s
    }

    fn uct(q: f64, n: f64, parent: f64, cfg: &SearchConfig) -> f64 {
        q / cfg.reward_scale + cfg.uct_c * ((parent + 1.0).ln() / n).sqrt()
    }

    fn argmax(values: impl Iterator<Item = (usize, f64)>) -> usize {
        values.fold((usize::MAX, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b }).0
    }

    #[test]
    fn two_stage_selection_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SearchConfig::default();
        for _ in 0..500 {
            let s = random_stats(&mut rng, true);
            let total = s.total_n();
            let g = argmax((0..9).filter(|&g| !s.groups[g].members.is_empty()).map(|g| (g, uct(s.groups[g].q, s.groups[g].n, total, &cfg))));
            let group = &s.groups[g];
            let expected = argmax(group.members.iter().map(|&m| (m, uct(s.actions[m].q, s.actions[m].n, group.n, &cfg))));
            assert_eq!(select_existing(&s, &cfg, &mut rng), expected);
        }
    }

    #[test]
    fn flat_selection_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = SearchConfig {
            enhancements: Enhancements::BASIC,
            ..SearchConfig::default()
        };
        for _ in 0..500 {
            let s = random_stats(&mut rng, true);
            let total = s.total_n();
            let expected = argmax(s.actions.iter().enumerate().map(|(i, a)| (i, uct(a.q, a.n, total, &cfg))));
            assert_eq!(select_existing(&s, &cfg, &mut rng), expected);
        }
    }

    #[test]
    fn unvisited_actions_come_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SearchConfig::default();
        let mut s = AgentStats::new(ActionBox::default(), false);
        s.push(Action::new(1.0, 0.0), ActionGroup::Accelerate);
        s.push(Action::new(2.0, 0.0), ActionGroup::Accelerate);
        s.push(Action::ZERO, ActionGroup::Keep);
        s.actions[0].n = 100.0;
        s.actions[0].q = 50.0;
        s.actions[2].n = 100.0;
        s.actions[2].q = -50.0;
        s.refresh_groups();
        for _ in 0..20 {
            assert_eq!(select_existing(&s, &cfg, &mut rng), 1);
        }
        s.push(Action::new(-2.0, 0.0), ActionGroup::Decelerate);
        s.actions[1].n = 1.0;
        s.refresh_groups();
        for _ in 0..20 {
            assert_eq!(select_existing(&s, &cfg, &mut rng), 3);
        }
    }

    #[test]
    fn ties_are_broken_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = SearchConfig {
            enhancements: Enhancements::BASIC,
            ..SearchConfig::default()
        };
        let mut s = AgentStats::new(ActionBox::default(), false);
        for k in 0..3 {
            let i = s.push(Action::new(k as f64, 0.0), ActionGroup::Keep);
            s.actions[i].n = 10.0;
        }
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[select_existing(&s, &cfg, &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| (800..1200).contains(&c)), "{counts:?}");
    }
}
