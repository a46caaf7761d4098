//! Search configuration.

use serde::{Deserialize, Serialize};

use crate::trajectory::ActionBox;

/// Which continuous-action enhancements are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enhancements {
    /// Two-stage selection through semantic action groups.
    pub groups: bool,
    /// Blind-value guided widening instead of uniform proposals.
    pub guided: bool,
    /// Kernel-weighted backpropagation to neighbouring actions.
    pub similarity: bool,
}

impl Enhancements {
    pub const BASIC: Enhancements = Enhancements {
        groups: false,
        guided: false,
        similarity: false,
    };
    pub const ALL: Enhancements = Enhancements {
        groups: true,
        guided: true,
        similarity: true,
    };

    /// Parses `basic`, `guided`, `groups`, `groups+guided`, `groups+guided+similarity`
    /// and any other `+`-joined combination of the three toggles.
    pub fn parse(s: &str) -> Option<Enhancements> {
        let mut e = Enhancements::BASIC;
        if s == "basic" {
            return Some(e);
        }
        for part in s.split('+') {
            match part {
                "groups" => e.groups = true,
                "guided" => e.guided = true,
                "similarity" => e.similarity = true,
                _ => return None,
            }
        }
        Some(e)
    }

    pub fn label(&self) -> String {
        let parts: Vec<&str> = [
            (self.groups, "groups"),
            (self.guided, "guided"),
            (self.similarity, "similarity"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, name)| *name)
        .collect();
        if parts.is_empty() {
            "basic".into()
        } else {
            parts.join("+")
        }
    }
}

impl Default for Enhancements {
    fn default() -> Self {
        Enhancements::ALL
    }
}

/// How the blind value combines UCT statistics with action proximity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlindValueMode {
    /// `min_a UCT(a) + ρ·K(a, a')` with the similarity kernel `K`.
    #[default]
    Similarity,
    /// `min_a UCT(a) + ρ·‖a − a'‖` with the scaled Euclidean distance.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Iterations per search.
    pub iterations: usize,
    /// Planning horizon in actions.
    pub max_depth: usize,
    pub discount: f64,
    pub uct_c: f64,
    pub pw_c: f64,
    pub pw_alpha: f64,
    /// Set to false to keep the seeded action set fixed.
    pub progressive_widening: bool,
    pub kernel_gamma: f64,
    /// Per-dimension weights of the squared action distance, `(dv, dy)`.
    pub kernel_dims_scale: [f64; 2],
    pub bv_candidates: usize,
    pub bv_mode: BlindValueMode,
    pub initial_actions_per_agent: usize,
    pub enhancements: Enhancements,
    /// Returns are divided by this before entering UCT.
    pub reward_scale: f64,
    /// Speed change of the seeded and rollout actions (m/s).
    pub dv_step: f64,
    /// Half width of the "no/slight change" speed band (m/s).
    pub eps_dv: f64,
    /// Minimum visit count of a root action to be returned.
    pub n_min_final: f64,
    /// Action duration ΔT (s).
    pub action_duration: f64,
    /// Trajectory sample step (s).
    pub sample_dt: f64,
    pub action_box: ActionBox,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            max_depth: 4,
            discount: 0.9,
            uct_c: 1.0,
            pw_c: 1.0,
            pw_alpha: 0.5,
            progressive_widening: true,
            kernel_gamma: 1.0,
            kernel_dims_scale: [1.0, 1.0],
            bv_candidates: 16,
            bv_mode: BlindValueMode::default(),
            initial_actions_per_agent: 5,
            enhancements: Enhancements::ALL,
            reward_scale: 10.0,
            dv_step: 2.0,
            eps_dv: 0.5,
            n_min_final: 1.0,
            action_duration: 2.0,
            sample_dt: 0.1,
            action_box: ActionBox::default(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.iterations < 1 {
            return Err("search.iterations must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(format!("search.discount must lie in [0, 1] (got {})", self.discount));
        }
        if !(self.uct_c >= 0.0) {
            return Err(format!("search.uct_c must be non-negative (got {})", self.uct_c));
        }
        if !(self.pw_c > 0.0) {
            return Err(format!("search.pw_c must be positive (got {})", self.pw_c));
        }
        if !(0.0..=1.0).contains(&self.pw_alpha) {
            return Err(format!("search.pw_alpha must lie in [0, 1] (got {})", self.pw_alpha));
        }
        if !(self.kernel_gamma > 0.0) {
            return Err(format!("search.kernel_gamma must be positive (got {})", self.kernel_gamma));
        }
        if self.kernel_dims_scale.iter().any(|s| !(*s >= 0.0)) {
            return Err("search.kernel_dims_scale entries must be non-negative".into());
        }
        if self.bv_candidates < 1 {
            return Err("search.bv_candidates must be at least 1".into());
        }
        if self.initial_actions_per_agent < 1 {
            return Err("search.initial_actions_per_agent must be at least 1".into());
        }
        if !(self.reward_scale > 0.0) {
            return Err(format!("search.reward_scale must be positive (got {})", self.reward_scale));
        }
        if !(self.action_duration > 0.0) {
            return Err(format!("search.action_duration must be positive (got {})", self.action_duration));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt <= self.action_duration) {
            return Err(format!(
                "search.sample_dt must lie in (0, action_duration] (got {})",
                self.sample_dt
            ));
        }
        let b = &self.action_box;
        if !(b.dv_min <= 0.0 && b.dv_max >= 0.0 && b.dy_min <= 0.0 && b.dy_max >= 0.0) {
            return Err("search.action_box must contain the zero action".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enhancement_labels_round_trip() {
        for s in ["basic", "guided", "groups", "groups+guided", "groups+guided+similarity"] {
            let e = Enhancements::parse(s).unwrap();
            assert_eq!(Enhancements::parse(&e.label()), Some(e));
        }
        assert_eq!(Enhancements::parse("groups+guided+similarity"), Some(Enhancements::ALL));
        assert_eq!(Enhancements::parse("turbo"), None);
    }

    #[test]
    fn default_config_is_valid() {
        assert!(SearchConfig::default().check().is_ok());
        let bad = SearchConfig {
            pw_alpha: 1.5,
            ..SearchConfig::default()
        };
        assert!(bad.check().unwrap_err().contains("pw_alpha"));
    }
}
