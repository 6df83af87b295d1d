//! Rider cognition (observation, intention, decision), platform dispatch and governance.

mod dispatch;
mod intention;
mod platform;
mod policy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dispatch::{dispatch, IdleRider};
pub use intention::{update_intention, IntentionLabel, IntentionParams, IntentionState};
pub use platform::{govern, PlatformPolicy};
pub use policy::{decide, observe, Action, DecisionContext, FeasibleOrder, Observation, RiderPolicy, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intelligence {
    Low,
    Medium,
    High,
}

impl Intelligence {
    pub fn as_str(self) -> &'static str {
        match self {
            Intelligence::Low => "low",
            Intelligence::Medium => "medium",
            Intelligence::High => "high",
        }
    }

    pub fn code(self) -> f64 {
        self as u8 as f64
    }

    pub fn from_code(x: f64) -> Result<Self> {
        match x {
            x if x == 0.0 => Ok(Intelligence::Low),
            x if x == 1.0 => Ok(Intelligence::Medium),
            x if x == 2.0 => Ok(Intelligence::High),
            _ => Err(Error::Config(format!("intelligence level code must be 0, 1 or 2, got {x}"))),
        }
    }
}

/// Interaction intensity as configured; `InteractionMode` carries the local radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    None,
    Local,
    Global,
}

impl InteractionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::None => "none",
            InteractionKind::Local => "local",
            InteractionKind::Global => "global",
        }
    }

    pub fn code(self) -> f64 {
        self as u8 as f64
    }

    pub fn from_code(x: f64) -> Result<Self> {
        match x {
            x if x == 0.0 => Ok(InteractionKind::None),
            x if x == 1.0 => Ok(InteractionKind::Local),
            x if x == 2.0 => Ok(InteractionKind::Global),
            _ => Err(Error::Config(format!("interaction level code must be 0, 1 or 2, got {x}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionMode {
    None,
    Local { radius: u32 },
    Global,
}

/// Ordinal code for a known categorical level label (`low`/`medium`/`high`,
/// `none`/`local`/`global`).
pub fn level_code(label: &str) -> Option<f64> {
    let kind: Option<InteractionKind> = serde_json::from_value(serde_json::Value::String(label.into())).ok();
    if let Some(k) = kind {
        return Some(k.code());
    }
    let intel: Option<Intelligence> = serde_json::from_value(serde_json::Value::String(label.into())).ok();
    intel.map(Intelligence::code)
}
