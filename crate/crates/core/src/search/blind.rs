//! Blind-value proposals for progressive widening.
//!
//! A batch of uniformly drawn candidates is scored against the UCT values of
//! the already explored actions; the best candidate becomes the new action.

use rand::Rng;

use super::config::{BlindValueMode, SearchConfig};
use super::stats::{action_kernel, scaled_sq_distance, uct_unchecked, ActionStats};
use crate::trajectory::{Action, ActionBox};

fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn proximity(mode: BlindValueMode, a: &Action, b: &Action, cfg: &SearchConfig) -> f64 {
    match mode {
        BlindValueMode::Similarity => action_kernel(a, b, cfg.kernel_gamma, cfg.kernel_dims_scale),
        BlindValueMode::Distance => scaled_sq_distance(a, b, cfg.kernel_dims_scale).sqrt(),
    }
}

/// Blind value of every candidate given the UCT values of the explored actions.
pub fn blind_values(
    explored: &[(Action, f64)],
    candidates: &[Action],
    bounds: &ActionBox,
    cfg: &SearchConfig,
) -> Vec<f64> {
    let mode = cfg.bv_mode;
    let center = Action::new(
        0.5 * (bounds.dv_min + bounds.dv_max),
        0.5 * (bounds.dy_min + bounds.dy_max),
    );
    let ucts: Vec<f64> = explored.iter().map(|(_, u)| *u).collect();
    let to_center: Vec<f64> = candidates
        .iter()
        .map(|c| proximity(mode, &center, c, cfg))
        .collect();
    let spread = population_std(&to_center);
    let rho = if spread > 0.0 {
        population_std(&ucts) / spread
    } else {
        0.0
    };
    candidates
        .iter()
        .map(|c| {
            explored
                .iter()
                .map(|(a, u)| u + rho * proximity(mode, a, c, cfg))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Proposes the next action to add to an agent's explored set.
///
/// `parent_n` is the visit total used for the UCT exploration term.
pub fn blind_value_propose<R: Rng + ?Sized>(
    explored: &[ActionStats],
    parent_n: f64,
    bounds: &ActionBox,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Action {
    let scored: Vec<(Action, f64)> = explored
        .iter()
        .filter(|s| s.n > 0.0)
        .map(|s| (s.action, uct_unchecked(s.q / cfg.reward_scale, s.n, parent_n, cfg.uct_c)))
        .collect();
    if scored.is_empty() {
        return bounds.sample(rng);
    }
    let candidates: Vec<Action> = (0..cfg.bv_candidates).map(|_| bounds.sample(rng)).collect();
    let values = blind_values(&scored, &candidates, bounds, cfg);
    candidates[argmax_uniform(&values, rng)]
}

/// Index of the maximum, ties broken uniformly at random.
pub(crate) fn argmax_uniform<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match ties.len() {
        0 => 0,
        1 => ties[0],
        k => ties[rng.gen_range(0..k)],
    }
}
