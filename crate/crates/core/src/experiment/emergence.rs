use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Branch probabilities of the four sequential conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmergenceTree {
    /// Initial event occurs.
    pub p_e: f64,
    /// Agents decide to adapt.
    pub p_d: f64,
    /// Agents act on the decision.
    pub p_a: f64,
    /// The feedback loop takes hold.
    pub p_w: f64,
}

impl Default for EmergenceTree {
    fn default() -> Self {
        Self { p_e: 1.0, p_d: 1.0, p_a: 1.0, p_w: 1.0 }
    }
}

/// Leaf probabilities; they sum to `p_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmergenceOutcome {
    /// All four conditions hold: the complex outcome emerges.
    pub p_c: f64,
    /// No decision to adapt.
    pub p_e_fail: f64,
    /// Decision taken but no action.
    pub p_e_star: f64,
    /// Action taken but the feedback fails.
    pub p_e_star2: f64,
}

pub fn emergence_probability(tree: EmergenceTree) -> Result<EmergenceOutcome> {
    let EmergenceTree { p_e, p_d, p_a, p_w } = tree;
    for (name, p) in [("p_e", p_e), ("p_d", p_d), ("p_a", p_a), ("p_w", p_w)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    Ok(EmergenceOutcome {
        p_c: p_e * p_d * p_a * p_w,
        p_e_fail: p_e * (1.0 - p_d),
        p_e_star: p_e * p_d * (1.0 - p_a),
        p_e_star2: p_e * p_d * p_a * (1.0 - p_w),
    })
}
