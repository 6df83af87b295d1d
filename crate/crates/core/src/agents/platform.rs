use serde::{Deserialize, Serialize};

use crate::config::Governance;

/// The platform's pricing and volume levers plus its outer-loop tuning state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformPolicy {
    pub base_fee: f64,
    pub per_cell_rate: f64,
    pub volume_multiplier: f64,
    pub governance: Governance,
    /// +1 or -1: sign of the next hill-climb perturbation.
    pub direction: f64,
    /// Change applied at the previous epoch boundary.
    pub last_delta: f64,
}

impl PlatformPolicy {
    pub fn new(base_fee: f64, per_cell_rate: f64, volume_multiplier: f64, governance: Governance) -> Self {
        Self { base_fee, per_cell_rate, volume_multiplier, governance, direction: 1.0, last_delta: 0.0 }
    }
}

/// Coordinate hill-climb on `per_cell_rate`, called once per epoch with the
/// welfare of every completed epoch (latest last). A drop in welfare after a
/// perturbation reverts it and flips the search direction.
pub fn govern(policy: &PlatformPolicy, swf_history: &[f64]) -> PlatformPolicy {
    let Governance::HillClimb { step, .. } = policy.governance else {
        return *policy;
    };
    let mut next = *policy;
    if let [.., prev, last] = swf_history {
        if last < prev && next.last_delta != 0.0 {
            next.per_cell_rate = (next.per_cell_rate - next.last_delta).max(0.0);
            next.direction = -next.direction;
        }
    }
    let target = (next.per_cell_rate + next.direction * step).max(0.0);
    next.last_delta = target - next.per_cell_rate;
    next.per_cell_rate = target;
    next
}
