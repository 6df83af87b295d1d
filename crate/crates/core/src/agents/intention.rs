use serde::{Deserialize, Serialize};

use super::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntentionLabel {
    RuleFollowing,
    Anxious,
    RiskAvoidant,
}

impl IntentionLabel {
    /// Also the tie-break order for dominant-label selection.
    pub const ALL: [IntentionLabel; 3] =
        [IntentionLabel::RuleFollowing, IntentionLabel::Anxious, IntentionLabel::RiskAvoidant];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            IntentionLabel::RuleFollowing => "F",
            IntentionLabel::Anxious => "A",
            IntentionLabel::RiskAvoidant => "R",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.code() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            IntentionLabel::RuleFollowing => "rule_following",
            IntentionLabel::Anxious => "anxious",
            IntentionLabel::RiskAvoidant => "risk_avoidant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentionState {
    pub label: IntentionLabel,
    /// Updates spent in the current label.
    pub streak: u32,
    /// Consecutive updates on which the label's recovery condition held.
    pub calm: u32,
}

impl Default for IntentionState {
    fn default() -> Self {
        Self { label: IntentionLabel::RuleFollowing, streak: 0, calm: 0 }
    }
}

impl IntentionState {
    pub fn new(label: IntentionLabel, streak: u32) -> Self {
        Self { label, streak, calm: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionParams {
    /// Income-rate ratio to the peer median below which a rider turns anxious.
    pub alpha: f64,
    /// Orders-per-rider scarcity threshold.
    pub sigma0: f64,
    /// Anxious updates before turning risk-avoidant.
    pub k: u32,
    /// Hysteresis length for recovery transitions.
    pub h: u32,
}

impl Default for IntentionParams {
    fn default() -> Self {
        Self { alpha: 0.8, sigma0: 0.5, k: 60, h: 30 }
    }
}

/// Advances the intention machine by one observation.
///
/// Edges: rule-following -> anxious on a trigger (income below `alpha` x peer
/// median, or zone scarcity); anxious -> risk-avoidant after `k` updates;
/// risk-avoidant -> anxious after `h` trigger-free updates; anxious ->
/// rule-following after `h` updates at or above the peer median without scarcity.
pub fn update_intention(state: IntentionState, obs: &Observation, params: &IntentionParams) -> IntentionState {
    use IntentionLabel::*;
    let below_peer = obs.peer_median.is_some_and(|m| obs.own_rate < params.alpha * m);
    let scarce = obs.orders_per_rider < params.sigma0;
    let triggered = below_peer || scarce;
    let enter = |label| IntentionState { label, streak: 0, calm: 0 };
    let stay = |calm| IntentionState { label: state.label, streak: state.streak.saturating_add(1), calm };
    match state.label {
        RuleFollowing if triggered => enter(Anxious),
        RuleFollowing => stay(0),
        Anxious => {
            let recovered = obs.peer_median.is_none_or(|m| obs.own_rate >= m) && !scarce;
            let calm = if recovered { state.calm + 1 } else { 0 };
            if calm >= params.h {
                enter(RuleFollowing)
            } else if state.streak >= params.k {
                enter(RiskAvoidant)
            } else {
                stay(calm)
            }
        }
        RiskAvoidant => {
            let calm = if triggered { 0 } else { state.calm + 1 };
            if calm >= params.h {
                enter(Anxious)
            } else {
                stay(calm)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(own: f64, peer: Option<f64>, opr: f64) -> Observation {
        Observation { own_rate: own, orders_per_rider: opr, peer_median: peer }
    }

    #[test]
    fn low_income_triggers_anxiety() {
        let s = update_intention(IntentionState::default(), &obs(1.0, Some(4.0), 5.0), &IntentionParams::default());
        assert_eq!(s.label, IntentionLabel::Anxious);
    }

    #[test]
    fn scarcity_triggers_anxiety_without_peers() {
        let s = update_intention(IntentionState::default(), &obs(1.0, None, 0.1), &IntentionParams::default());
        assert_eq!(s.label, IntentionLabel::Anxious);
    }

    #[test]
    fn long_anxiety_turns_risk_avoidant() {
        let p = IntentionParams { k: 60, ..Default::default() };
        let s = update_intention(IntentionState::new(IntentionLabel::Anxious, 60), &obs(1.0, Some(4.0), 0.1), &p);
        assert_eq!(s.label, IntentionLabel::RiskAvoidant);
        let s = update_intention(IntentionState::new(IntentionLabel::Anxious, 59), &obs(1.0, Some(4.0), 0.1), &p);
        assert_eq!((s.label, s.streak), (IntentionLabel::Anxious, 60));
    }

    #[test]
    fn comfortable_rider_stays_rule_following() {
        let s = update_intention(IntentionState::default(), &obs(5.0, Some(4.0), 3.0), &IntentionParams::default());
        assert_eq!(s.label, IntentionLabel::RuleFollowing);
        assert_eq!(s.streak, 1);
    }

    #[test]
    fn recovery_needs_h_calm_updates() {
        let p = IntentionParams { h: 3, k: 1000, ..Default::default() };
        let good = obs(5.0, Some(4.0), 3.0);
        let mut s = IntentionState::new(IntentionLabel::Anxious, 0);
        s = update_intention(s, &good, &p);
        s = update_intention(s, &good, &p);
        assert_eq!(s.label, IntentionLabel::Anxious);
        s = update_intention(s, &good, &p);
        assert_eq!(s.label, IntentionLabel::RuleFollowing);

        let mut s = IntentionState::new(IntentionLabel::RiskAvoidant, 0);
        for _ in 0..2 {
            s = update_intention(s, &good, &p);
        }
        // a single trigger resets the hysteresis counter
        s = update_intention(s, &obs(0.0, Some(4.0), 3.0), &p);
        for _ in 0..2 {
            s = update_intention(s, &good, &p);
        }
        assert_eq!(s.label, IntentionLabel::RiskAvoidant);
        s = update_intention(s, &good, &p);
        assert_eq!(s.label, IntentionLabel::Anxious);
    }

    fn allowed(from: IntentionLabel, to: IntentionLabel) -> bool {
        use IntentionLabel::*;
        from == to
            || matches!(
                (from, to),
                (RuleFollowing, Anxious) | (Anxious, RiskAvoidant) | (RiskAvoidant, Anxious) | (Anxious, RuleFollowing)
            )
    }

    proptest! {
        #[test]
        fn only_defined_edges(seq in prop::collection::vec((0.0..5.0f64, prop::option::of(0.0..5.0f64), 0.0..2.0f64), 1..400)) {
            let p = IntentionParams { k: 5, h: 3, ..Default::default() };
            let mut s = IntentionState::default();
            for (own, peer, opr) in seq {
                let next = update_intention(s, &obs(own, peer, opr), &p);
                prop_assert!(allowed(s.label, next.label), "{:?} -> {:?}", s.label, next.label);
                s = next;
            }
        }
    }
}
