//! Run configuration: TOML schema, defaults, strict validation and factor overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{Intelligence, InteractionKind, InteractionMode};
use crate::error::{Error, Result};
use crate::experiment::FactorSpec;
use crate::grid::{lattice_zones, CityGrid, Zone};
use crate::orders::IntensityProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub world: WorldConfig,
    #[serde(default)]
    pub orders: OrdersConfig,
    #[serde(default)]
    pub agents: AgentsConfig,
    #[serde(default)]
    pub platform: PlatformConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub width: u32,
    pub height: u32,
    pub n_riders: usize,
    pub steps_per_day: u32,
    pub horizon: u32,
    /// Cells moved per step.
    pub speed: u32,
    /// Zone count for the generated lattice; ignored when `zones` is given.
    pub n_zones: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zones: Option<Vec<Zone>>,
    /// Daily shift length bounds, in steps.
    pub shift_min: u32,
    pub shift_max: u32,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            n_riders: 100,
            steps_per_day: 120,
            horizon: 3600,
            speed: 1,
            n_zones: 10,
            zones: None,
            shift_min: 40,
            shift_max: 72,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrdersConfig {
    pub a: [f64; 5],
    pub b: [f64; 5],
    pub c: [f64; 5],
    pub volume_multiplier: f64,
    /// Steps an order may stay unassigned before it expires.
    pub expiry: u32,
    /// Largest pickup-to-dropoff distance, in cells.
    pub max_trip: u32,
}

impl Default for OrdersConfig {
    fn default() -> Self {
        Self {
            a: [6.0, 10.0, 4.0, 8.0, 3.0],
            b: [0.08, 0.33, 0.5, 0.66, 0.9],
            c: [0.04, 0.05, 0.08, 0.05, 0.06],
            volume_multiplier: 1.0,
            expiry: 30,
            max_trip: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsConfig {
    pub intelligence: Intelligence,
    pub interaction_mode: InteractionKind,
    pub local_radius: u32,
    pub alpha: f64,
    pub sigma0: f64,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "H")]
    pub h: u32,
    /// Manhattan radius within which a rider can see and grab open orders.
    pub reach: u32,
    pub extend_steps: u32,
    /// Look-back, in steps, of the per-zone order-arrival signal.
    pub demand_window: u32,
    pub time_cost: f64,
    pub distance_cost: f64,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        Self {
            intelligence: Intelligence::Medium,
            interaction_mode: InteractionKind::Local,
            local_radius: 5,
            alpha: 0.8,
            sigma0: 0.5,
            k: 60,
            h: 30,
            reach: 20,
            extend_steps: 12,
            demand_window: 30,
            time_cost: 0.01,
            distance_cost: 0.02,
        }
    }
}

impl AgentsConfig {
    pub fn interaction(&self) -> InteractionMode {
        match self.interaction_mode {
            InteractionKind::None => InteractionMode::None,
            InteractionKind::Local => InteractionMode::Local { radius: self.local_radius },
            InteractionKind::Global => InteractionMode::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Governance {
    Off,
    HillClimb { step: f64, epoch: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatformConfig {
    pub base_fee: f64,
    pub per_cell_rate: f64,
    pub governance: Governance,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self { base_fee: 2.0, per_cell_rate: 0.1, governance: Governance::Off }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub eta: f64,
    pub epsilon: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { eta: 0.1, epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub factors: Vec<FactorSpec>,
    pub replicates: u32,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { factors: Vec::new(), replicates: 10, base_seed: 0 }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let has_riders = table.get("world").and_then(|w| w.as_table()).is_some_and(|w| w.contains_key("n_riders"));
        if !has_riders {
            return Err(Error::Config("missing required key world.n_riders".into()));
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        check(w.width >= 1, || "world.width must be >= 1".into())?;
        check(w.height >= 1, || "world.height must be >= 1".into())?;
        check(w.n_riders >= 1, || "world.n_riders must be >= 1".into())?;
        check(w.steps_per_day >= 1, || "world.steps_per_day must be >= 1".into())?;
        check(w.horizon.is_multiple_of(w.steps_per_day), || {
            format!("world.horizon must be divisible by world.steps_per_day ({} % {} != 0)", w.horizon, w.steps_per_day)
        })?;
        check(w.speed >= 1, || "world.speed must be >= 1".into())?;
        check(w.zones.is_some() || w.n_zones >= 1, || "world.n_zones must be >= 1".into())?;
        check(w.shift_min >= 1 && w.shift_min <= w.shift_max, || {
            "world.shift_min must be in [1, world.shift_max]".into()
        })?;
        check(w.shift_max <= w.steps_per_day, || "world.shift_max must be <= world.steps_per_day".into())?;
        self.grid()?;

        let o = &self.orders;
        for i in 0..5 {
            check(o.a[i] >= 0.0 && o.a[i].is_finite(), || format!("orders.a[{i}] must be >= 0"))?;
            check(o.c[i] > 0.0 && o.c[i].is_finite(), || format!("orders.c[{i}] must be > 0"))?;
            check(o.b[i].is_finite(), || format!("orders.b[{i}] must be finite"))?;
        }
        check(o.volume_multiplier >= 0.0 && o.volume_multiplier.is_finite(), || {
            "orders.volume_multiplier must be >= 0".into()
        })?;
        check(o.expiry >= 1, || "orders.expiry must be >= 1".into())?;
        check(o.max_trip >= 1, || "orders.max_trip must be >= 1".into())?;

        let a = &self.agents;
        check(a.local_radius >= 1, || "agents.local_radius must be >= 1".into())?;
        check(a.alpha > 0.0 && a.alpha.is_finite(), || "agents.alpha must be > 0".into())?;
        check(a.sigma0 >= 0.0 && a.sigma0.is_finite(), || "agents.sigma0 must be >= 0".into())?;
        check(a.k >= 1, || "agents.K must be >= 1".into())?;
        check(a.h >= 1, || "agents.H must be >= 1".into())?;
        check(a.demand_window >= 1, || "agents.demand_window must be >= 1".into())?;
        check(a.time_cost >= 0.0 && a.time_cost.is_finite(), || "agents.time_cost must be >= 0".into())?;
        check(a.distance_cost >= 0.0 && a.distance_cost.is_finite(), || "agents.distance_cost must be >= 0".into())?;

        let p = &self.platform;
        check(p.base_fee >= 0.0 && p.base_fee.is_finite(), || "platform.base_fee must be >= 0".into())?;
        check(p.per_cell_rate >= 0.0 && p.per_cell_rate.is_finite(), || "platform.per_cell_rate must be >= 0".into())?;
        if let Governance::HillClimb { step, epoch } = p.governance {
            check(step > 0.0 && step.is_finite(), || "platform.governance.hill_climb.step must be > 0".into())?;
            check(epoch >= 1, || "platform.governance.hill_climb.epoch must be >= 1".into())?;
        }

        let m = &self.metrics;
        check(m.eta > 0.0 && m.eta.is_finite(), || "metrics.eta must be > 0".into())?;
        check(m.epsilon > 0.0 && m.epsilon.is_finite(), || "metrics.epsilon must be > 0".into())?;

        let e = &self.experiment;
        check(e.replicates >= 1, || "experiment.replicates must be >= 1".into())?;
        let mut names: Vec<&str> = e.factors.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        check(names.windows(2).all(|p| p[0] != p[1]), || "experiment.factors names must be unique".into())?;
        for f in &e.factors {
            check(!f.levels.is_empty(), || format!("experiment.factors.{} needs at least one level", f.name))?;
            for level in &f.levels {
                let mut probe = self.clone();
                probe.experiment = ExperimentConfig::default();
                probe.apply_factor(&f.name, level)?;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<CityGrid> {
        let w = &self.world;
        let zones = match &w.zones {
            Some(z) => z.clone(),
            None => lattice_zones(w.width, w.height, w.n_zones),
        };
        CityGrid::new(w.width, w.height, zones)
    }

    pub fn profile(&self) -> IntensityProfile {
        let o = &self.orders;
        IntensityProfile {
            components: std::array::from_fn(|i| (o.a[i], o.b[i], o.c[i])),
            volume_multiplier: o.volume_multiplier,
        }
    }

    /// SHA-256 over the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Sets one factor level. Short names (`intelligence`/`A`, `interaction`/`B`,
    /// `order_volume`/`C`) map onto their config fields; any other name is
    /// treated as a dotted `section.key` path.
    pub fn apply_factor(&mut self, name: &str, level: &crate::experiment::Level) -> Result<()> {
        use crate::experiment::Level;
        let path = match name {
            "intelligence" | "A" => "agents.intelligence",
            "interaction" | "interaction_mode" | "B" => "agents.interaction_mode",
            "order_volume" | "volume_multiplier" | "C" => "orders.volume_multiplier",
            other => other,
        };
        let value = match (path, level) {
            ("agents.intelligence", Level::Number(x)) => {
                toml::Value::String(Intelligence::from_code(*x)?.as_str().to_string())
            }
            ("agents.interaction_mode", Level::Number(x)) => {
                toml::Value::String(InteractionKind::from_code(*x)?.as_str().to_string())
            }
            (_, Level::Label(s)) => toml::Value::String(s.clone()),
            (_, Level::Number(x)) => toml::Value::Float(*x),
        };
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let (section, key) = path.split_once('.').ok_or_else(|| Error::Config(format!("unknown factor '{name}'")))?;
        let slot = root
            .get_mut(section)
            .and_then(|s| s.as_table_mut())
            .ok_or_else(|| Error::Config(format!("unknown factor '{name}'")))?;
        let current = slot.get(key).ok_or_else(|| Error::Config(format!("unknown factor '{name}'")))?;
        // Integer fields must stay integers for serde.
        let value = match (current, value) {
            (toml::Value::Integer(_), toml::Value::Float(x)) if x.fract() == 0.0 => toml::Value::Integer(x as i64),
            (_, v) => v,
        };
        slot.insert(key.to_string(), value);
        let updated: RunConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("factor '{name}': {}", e.message().trim())))?;
        *self = updated;
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml_str(&text)
}
