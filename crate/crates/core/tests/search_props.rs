mod common;

use common::{MatrixGame, ROLLOUT_ACTION};
use decoc_core::search::{
    blind_values, rollout, uct_value, ActionGroup, AgentStats, BlindValueMode, Enhancements, SearchConfig, SearchTree,
};
use decoc_core::trajectory::{Action, ActionBox};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn game_cfg(iterations: usize) -> SearchConfig {
    SearchConfig {
        iterations,
        max_depth: 2,
        discount: 0.9,
        reward_scale: 1.0,
        enhancements: Enhancements::BASIC,
        progressive_widening: false,
        ..SearchConfig::default()
    }
}

fn stats_over(actions: &[Action]) -> AgentStats {
    let mut s = AgentStats::new(ActionBox::default(), false);
    for a in actions {
        s.push(*a, ActionGroup::Keep);
    }
    s
}

fn actions() -> impl Strategy<Value = Vec<Action>> {
    prop::collection::vec((-5.0..5.0f64, -4.0..4.0f64).prop_map(|(v, y)| Action::new(v, y)), 1..6)
}

proptest! {
    #[test]
    fn infinite_kernel_width_gives_running_means(
        acts in actions(),
        seq in prop::collection::vec((0usize..6, -100.0..100.0f64), 1..60),
    ) {
        let cfg = SearchConfig { kernel_gamma: f64::INFINITY, ..SearchConfig::default() };
        let mut s = stats_over(&acts);
        let mut sums = vec![0.0; acts.len()];
        let mut counts = vec![0usize; acts.len()];
        for (k, g) in seq {
            let k = k % acts.len();
            s.similarity_update(k, g, &cfg).unwrap();
            sums[k] += g;
            counts[k] += 1;
        }
        for i in 0..acts.len() {
            prop_assert_eq!(s.actions[i].n, counts[i] as f64);
            if counts[i] > 0 {
                prop_assert!((s.actions[i].q - sums[i] / counts[i] as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn similarity_update_is_a_kernel_weighted_mean(
        acts in actions(),
        seq in prop::collection::vec((0usize..6, -100.0..100.0f64), 1..60),
        gamma in 0.05..5.0f64,
    ) {
        let cfg = SearchConfig { kernel_gamma: gamma, ..SearchConfig::default() };
        let mut s = stats_over(&acts);
        let mut wsum = vec![0.0; acts.len()];
        let mut wg = vec![0.0; acts.len()];
        for (k, g) in seq {
            let k = k % acts.len();
            s.similarity_update(k, g, &cfg).unwrap();
            for i in 0..acts.len() {
                let w = if i == k {
                    1.0
                } else {
                    let d2 = (acts[i].dv - acts[k].dv).powi(2) + (acts[i].dy - acts[k].dy).powi(2);
                    (-gamma * d2).exp()
                };
                wsum[i] += w;
                wg[i] += w * g;
            }
        }
        for i in 0..acts.len() {
            prop_assert!((s.actions[i].n - wsum[i]).abs() < 1e-9 * wsum[i].max(1.0));
            if wsum[i] > 1e-12 {
                let mean = wg[i] / wsum[i];
                prop_assert!((s.actions[i].q - mean).abs() < 1e-6 * (1.0 + mean.abs()), "{} vs {}", s.actions[i].q, mean);
            }
        }
    }

    #[test]
    fn group_values_are_visit_weighted_means(
        acts in actions(),
        seq in prop::collection::vec((0usize..6, -10.0..10.0f64), 1..30),
    ) {
        let cfg = SearchConfig::default();
        let mut s = AgentStats::new(ActionBox::default(), false);
        for (i, a) in acts.iter().enumerate() {
            s.push(*a, ActionGroup::ALL[i % 3]);
        }
        for (k, g) in seq {
            s.similarity_update(k % acts.len(), g, &cfg).unwrap();
        }
        for g in &s.groups {
            let n: f64 = g.members.iter().map(|&m| s.actions[m].n).sum();
            prop_assert!((g.n - n).abs() < 1e-9);
            if n > 0.0 {
                let q = g.members.iter().map(|&m| s.actions[m].n * s.actions[m].q).sum::<f64>() / n;
                prop_assert!((g.q - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn blind_value_is_the_lower_envelope(
        explored in prop::collection::vec(((-5.0..5.0f64, -4.0..4.0f64), -3.0..3.0f64), 1..6),
        cands in actions(),
    ) {
        let cfg = SearchConfig { bv_mode: BlindValueMode::Distance, ..SearchConfig::default() };
        let bounds = ActionBox::default();
        let explored: Vec<(Action, f64)> = explored.into_iter().map(|((v, y), u)| (Action::new(v, y), u)).collect();
        let bv = blind_values(&explored, &cands, &bounds, &cfg);
        let std = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
        };
        let dist = |a: &Action, b: &Action| ((a.dv - b.dv).powi(2) + (a.dy - b.dy).powi(2)).sqrt();
        let centre = Action::new(0.0, 0.0);
        let spread = std(&cands.iter().map(|c| dist(c, &centre)).collect::<Vec<_>>());
        let rho = if spread > 0.0 { std(&explored.iter().map(|e| e.1).collect::<Vec<_>>()) / spread } else { 0.0 };
        for (c, v) in cands.iter().zip(&bv) {
            let terms: Vec<f64> = explored.iter().map(|(a, u)| u + rho * dist(a, c)).collect();
            prop_assert!(terms.iter().all(|t| *v <= t + 1e-9));
            prop_assert!(terms.iter().any(|t| (v - t).abs() < 1e-9));
        }
    }

    #[test]
    fn uct_grows_with_parent_visits_and_shrinks_with_own(q in -5.0..5.0f64, n in 1.0..100.0f64, parent in 1.0..1000.0f64) {
        let u = uct_value(q, n, parent, 1.0).unwrap();
        prop_assert!(uct_value(q, n, parent * 2.0, 1.0).unwrap() >= u);
        prop_assert!(uct_value(q, n * 2.0, parent, 1.0).unwrap() <= u);
        prop_assert!((uct_value(q, n, parent, 0.0).unwrap() - q).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn widening_never_outgrows_its_bound(seed in 0u64..1000, alpha in 0.1..0.9f64, c in 0.5..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = MatrixGame::random(3, &mut rng);
        let cfg = SearchConfig {
            max_depth: 3,
            pw_c: c,
            pw_alpha: alpha,
            progressive_widening: true,
            enhancements: Enhancements::ALL,
            ..game_cfg(1500)
        };
        let mut tree = SearchTree::new(&game, 0usize, cfg.clone());
        for _ in 0..cfg.iterations {
            tree.iterate(&mut rng);
            for node in tree.nodes() {
                for s in &node.agents {
                    let bound = 3.0 + (c * node.n.powf(alpha)).ceil() + 1.0;
                    prop_assert!(s.actions.len() as f64 <= bound);
                }
            }
        }
    }
}

#[test]
fn scripted_rollout_is_the_discounted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let game = MatrixGame::random(2, &mut rng);
    let cfg = SearchConfig { discount: 0.5, ..game_cfg(1) };
    let g = rollout(&game, &0usize, 2, &cfg, &mut rng);
    let m = ROLLOUT_ACTION;
    for agent in 0..2 {
        let expected = game.reward(0, agent, m, m) + 0.5 * game.reward(1, agent, m, m);
        assert!((g[agent] - expected).abs() < 1e-12);
    }
    assert_eq!(rollout(&game, &0usize, 0, &cfg, &mut rng), vec![0.0, 0.0]);
}

#[test]
fn visit_counts_are_consistent_through_the_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let game = MatrixGame::random(3, &mut rng);
    let cfg = SearchConfig { max_depth: 3, ..game_cfg(3000) };
    let mut tree = SearchTree::new(&game, 0usize, cfg.clone());
    tree.run(cfg.iterations, &mut rng);
    let nodes = tree.nodes();
    assert_eq!(nodes[0].n, cfg.iterations as f64);
    for (i, node) in nodes.iter().enumerate() {
        let below: f64 = node.children.values().map(|e| nodes[e.child].n).sum();
        let own = if i == 0 { 0.0 } else { 1.0 };
        if node.depth < cfg.max_depth {
            assert_eq!(node.n, own + below, "node {i}");
        }
        for s in &node.agents {
            assert_eq!(s.total_n(), node.n - own, "node {i}");
        }
        for (key, e) in &node.children {
            assert_eq!(nodes[e.child].depth, node.depth + 1);
            assert_eq!(key.len(), 2);
        }
    }
}

#[test]
fn identical_seeds_give_identical_searches() {
    let game = MatrixGame::random(2, &mut ChaCha8Rng::seed_from_u64(2));
    let cfg = SearchConfig {
        progressive_widening: true,
        enhancements: Enhancements::ALL,
        ..game_cfg(2000)
    };
    let run = |seed| decoc_core::search::search(&game, 0usize, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    let a = run(9);
    let b = run(9);
    assert_eq!(a, b);
    assert_ne!(a.agents[0].root, run(10).agents[0].root);
}

#[test]
fn dominant_action_is_found() {
    // The first agent is paid for its action 2 and the second for its action 0, whatever the other does.
    let mut level = [[[0.0; 3]; 3]; 2];
    level[0][2] = [1.0; 3];
    for row in &mut level[1] {
        row[0] = 0.5;
    }
    let game = MatrixGame::new(vec![level; 2]);
    let res = decoc_core::search::search(&game, 0usize, &game_cfg(3000), &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(res.agents[0].action, Action::new(1.0, 0.0));
    assert_eq!(res.agents[1].action, Action::new(-1.0, 0.0));
}
