//! Decoupled per-agent statistics: explored actions, semantic groups,
//! real-valued visit counts, and the kernel-weighted update.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::SearchConfig;
use super::SearchError;
use crate::environment::RoadModel;
use crate::trajectory::{Action, ActionBox, VehicleState};

/// One of the nine semantic regions of the action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionGroup {
    #[serde(rename = "0")]
    Keep,
    #[serde(rename = "+")]
    Accelerate,
    #[serde(rename = "-")]
    Decelerate,
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "L+")]
    LeftAccelerate,
    #[serde(rename = "L-")]
    LeftDecelerate,
    #[serde(rename = "R")]
    Right,
    #[serde(rename = "R+")]
    RightAccelerate,
    #[serde(rename = "R-")]
    RightDecelerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateralClass {
    Stay,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedClass {
    Slight,
    Faster,
    Slower,
}

impl ActionGroup {
    pub const ALL: [ActionGroup; 9] = [
        ActionGroup::Keep,
        ActionGroup::Accelerate,
        ActionGroup::Decelerate,
        ActionGroup::Left,
        ActionGroup::LeftAccelerate,
        ActionGroup::LeftDecelerate,
        ActionGroup::Right,
        ActionGroup::RightAccelerate,
        ActionGroup::RightDecelerate,
    ];

    pub fn from_classes(lateral: LateralClass, speed: SpeedClass) -> ActionGroup {
        use ActionGroup::*;
        match (lateral, speed) {
            (LateralClass::Stay, SpeedClass::Slight) => Keep,
            (LateralClass::Stay, SpeedClass::Faster) => Accelerate,
            (LateralClass::Stay, SpeedClass::Slower) => Decelerate,
            (LateralClass::Left, SpeedClass::Slight) => Left,
            (LateralClass::Left, SpeedClass::Faster) => LeftAccelerate,
            (LateralClass::Left, SpeedClass::Slower) => LeftDecelerate,
            (LateralClass::Right, SpeedClass::Slight) => Right,
            (LateralClass::Right, SpeedClass::Faster) => RightAccelerate,
            (LateralClass::Right, SpeedClass::Slower) => RightDecelerate,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        use ActionGroup::*;
        match self {
            Keep => "0",
            Accelerate => "+",
            Decelerate => "-",
            Left => "L",
            LeftAccelerate => "L+",
            LeftDecelerate => "L-",
            Right => "R",
            RightAccelerate => "R+",
            RightDecelerate => "R-",
        }
    }

    pub fn from_label(s: &str) -> Option<ActionGroup> {
        ActionGroup::ALL.into_iter().find(|g| g.label() == s)
    }

    pub fn lateral(self) -> LateralClass {
        use ActionGroup::*;
        match self {
            Keep | Accelerate | Decelerate => LateralClass::Stay,
            Left | LeftAccelerate | LeftDecelerate => LateralClass::Left,
            Right | RightAccelerate | RightDecelerate => LateralClass::Right,
        }
    }

    pub fn is_lane_change_left(self) -> bool {
        self.lateral() == LateralClass::Left
    }
}

impl fmt::Display for ActionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Group of `a` from the lane of the successor position and the speed change.
/// Lanes are numbered from the right, so a higher lane index is to the left.
pub fn assign_action_group(s: &VehicleState, a: &Action, road: &RoadModel, eps_dv: f64) -> ActionGroup {
    let from = road.lane_index_clamped(s.y);
    let to = road.lane_index_clamped(s.y + a.dy);
    let lateral = match to.cmp(&from) {
        std::cmp::Ordering::Equal => LateralClass::Stay,
        std::cmp::Ordering::Greater => LateralClass::Left,
        std::cmp::Ordering::Less => LateralClass::Right,
    };
    let speed = if a.dv > eps_dv {
        SpeedClass::Faster
    } else if a.dv < -eps_dv {
        SpeedClass::Slower
    } else {
        SpeedClass::Slight
    };
    ActionGroup::from_classes(lateral, speed)
}

/// `q + c·sqrt(ln(parent_n + 1) / n)`.
pub fn uct_value(q: f64, n: f64, parent_n: f64, c: f64) -> Result<f64, SearchError> {
    if !(n > 0.0) {
        return Err(SearchError::UnvisitedAction);
    }
    Ok(uct_unchecked(q, n, parent_n, c))
}

#[inline]
pub(crate) fn uct_unchecked(q: f64, n: f64, parent_n: f64, c: f64) -> f64 {
    q + c * ((parent_n + 1.0).ln() / n).sqrt()
}

/// True when the agent's action set has to grow: `N(A) < C_PW · n^α`.
pub fn progressive_widening_due(action_count: usize, node_n: f64, pw_c: f64, pw_alpha: f64) -> bool {
    (action_count as f64) < pw_c * node_n.powf(pw_alpha)
}

#[inline]
pub(crate) fn scaled_sq_distance(a: &Action, b: &Action, dims_scale: [f64; 2]) -> f64 {
    let dv = a.dv - b.dv;
    let dy = a.dy - b.dy;
    dims_scale[0] * dv * dv + dims_scale[1] * dy * dy
}

/// Radial basis similarity `exp(−γ‖a − a'‖²)` over the scaled action distance.
pub fn action_kernel(a: &Action, b: &Action, gamma: f64, dims_scale: [f64; 2]) -> f64 {
    let d2 = scaled_sq_distance(a, b, dims_scale);
    if d2 == 0.0 {
        1.0
    } else {
        (-gamma * d2).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    pub action: Action,
    pub group: ActionGroup,
    pub q: f64,
    /// Real-valued visit count.
    pub n: f64,
}

impl ActionStats {
    pub fn new(action: Action, group: ActionGroup) -> Self {
        Self {
            action,
            group,
            q: 0.0,
            n: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupStats {
    pub q: f64,
    pub n: f64,
    /// Indices into the agent's explored actions.
    pub members: Vec<usize>,
}

/// Statistics of one agent at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStats {
    pub actions: Vec<ActionStats>,
    pub groups: [GroupStats; 9],
    /// Action box at this node's state.
    pub bounds: ActionBox,
    /// Scripted agents keep a single fixed action and no statistics.
    pub scripted: bool,
}

impl AgentStats {
    pub fn new(bounds: ActionBox, scripted: bool) -> Self {
        Self {
            actions: Vec::new(),
            groups: Default::default(),
            bounds,
            scripted,
        }
    }

    pub fn push(&mut self, action: Action, group: ActionGroup) -> usize {
        let idx = self.actions.len();
        self.actions.push(ActionStats::new(action, group));
        self.groups[group.index()].members.push(idx);
        idx
    }

    pub fn group_of(&self, idx: usize) -> ActionGroup {
        self.actions[idx].group
    }

    pub fn total_n(&self) -> f64 {
        self.actions.iter().map(|a| a.n).sum()
    }

    /// Recomputes the group values as visit-weighted means of their members.
    pub fn refresh_groups(&mut self) {
        for g in &mut self.groups {
            let mut n = 0.0;
            let mut weighted = 0.0;
            for &m in &g.members {
                let s = &self.actions[m];
                n += s.n;
                weighted += s.n * s.q;
            }
            g.n = n;
            g.q = if n > 0.0 { weighted / n } else { 0.0 };
        }
    }

    /// Kernel-weighted incremental mean update of every explored action
    /// after the return `g` was observed through action `taken`.
    pub fn similarity_update(&mut self, taken: usize, g: f64, cfg: &SearchConfig) -> Result<(), SearchError> {
        let center = self.actions.get(taken).ok_or(SearchError::UnknownAction(taken))?.action;
        let spread = cfg.enhancements.similarity;
        for (i, s) in self.actions.iter_mut().enumerate() {
            let w = if i == taken {
                1.0
            } else if spread {
                action_kernel(&s.action, &center, cfg.kernel_gamma, cfg.kernel_dims_scale)
            } else {
                0.0
            };
            if w == 0.0 {
                continue;
            }
            s.n += w;
            s.q += w * (g - s.q) / s.n;
        }
        self.refresh_groups();
        Ok(())
    }
}
