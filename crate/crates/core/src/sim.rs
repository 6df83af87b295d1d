//! World state and the deterministic step/run loop.
//!
//! Each step runs fixed phases: expire -> generate -> dispatch -> act -> settle.
//! The act phase reads one frozen [`Snapshot`], each rider draws only from its own
//! RNG substream, and order-grab conflicts are settled by (distance, rider id), so
//! the order in which riders are visited never changes the outcome.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::IteratorRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    self, decide, dispatch, observe, update_intention, Action, DecisionContext, FeasibleOrder, IdleRider,
    IntentionLabel, IntentionParams, IntentionState, InteractionMode, PlatformPolicy, RiderPolicy, Snapshot,
};
use crate::config::{Governance, RunConfig};
use crate::error::{Error, Result};
use crate::grid::{Cell, CityGrid};
use crate::metrics::{self, UtilityParams, WelfareSnapshot};
use crate::orders::{self, IntensityProfile, Order, OrderId, OrderStatus, Pricing};
use crate::rng::{substream, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    pub step: u32,
    pub steps_per_day: u32,
    pub horizon: u32,
}

impl SimClock {
    pub fn day(&self) -> u32 {
        self.step / self.steps_per_day
    }

    pub fn step_in_day(&self) -> u32 {
        self.step % self.steps_per_day
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Deliver { order: OrderId, picked_up: bool },
    Relocate { zone: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftPlan {
    /// Step within the day at which the shift starts.
    pub start: u32,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiderState {
    pub id: usize,
    pub position: Cell,
    pub zone_choice: usize,
    pub intention: IntentionState,
    pub working: bool,
    pub hours_today: u32,
    pub cumulative_reward: f64,
    pub cumulative_cost: f64,
    pub behavior_log: Vec<(u32, Action)>,
    pub shift: ShiftPlan,
    /// Extra steps appended to the planned shift. Carried across days: an
    /// uneasy rider adds to it, a calm one sheds it.
    pub extension: u32,
    /// Made today's end-of-shift choice.
    pub settled: bool,
    pub task: Option<Task>,
    pub steps_worked: u64,
    pub busy_steps_today: u32,
}

impl RiderState {
    fn shift_end(&self) -> u32 {
        self.shift.start + self.shift.length + self.extension
    }

    pub fn income_rate(&self) -> f64 {
        self.cumulative_reward / self.steps_worked.max(1) as f64
    }

    fn is_delivering(&self) -> bool {
        matches!(self.task, Some(Task::Deliver { .. }))
    }
}

/// What a rider did during one step, as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Behavior {
    Off,
    Delivering,
    Relocating,
    Accept,
    Switch,
    Walk,
    Rest,
    Extend,
}

impl Behavior {
    pub const ALL: [Behavior; 8] = [
        Behavior::Off,
        Behavior::Delivering,
        Behavior::Relocating,
        Behavior::Accept,
        Behavior::Switch,
        Behavior::Walk,
        Behavior::Rest,
        Behavior::Extend,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Behavior::Off => "O",
            Behavior::Delivering => "D",
            Behavior::Relocating => "M",
            Behavior::Accept => "a",
            Behavior::Switch => "s",
            Behavior::Walk => "w",
            Behavior::Rest => "r",
            Behavior::Extend => "e",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.code() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Behavior::Off => "off",
            Behavior::Delivering => "delivering",
            Behavior::Relocating => "relocating",
            Behavior::Accept => "accept_order",
            Behavior::Switch => "switch_zone",
            Behavior::Walk => "random_walk",
            Behavior::Rest => "rest",
            Behavior::Extend => "extend_shift",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<Action> for Behavior {
    fn from(a: Action) -> Self {
        match a {
            Action::AcceptOrder(_) => Behavior::Accept,
            Action::SwitchZone(_) => Behavior::Switch,
            Action::RandomWalk => Behavior::Walk,
            Action::Rest => Behavior::Rest,
            Action::ExtendShift => Behavior::Extend,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiderStep {
    pub behavior: Behavior,
    pub intention: IntentionLabel,
    pub position: Cell,
    pub income: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub created: Vec<OrderId>,
    /// `(order, rider)` pairs from dispatch and from riders grabbing orders.
    pub assigned: Vec<(OrderId, usize)>,
    pub delivered: Vec<OrderId>,
    pub expired: Vec<OrderId>,
    pub riders: Vec<RiderStep>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub n_riders: usize,
    pub horizon: u32,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
    pub utilities: Vec<f64>,
    /// Absent for single-rider worlds.
    pub welfare: Option<WelfareSnapshot>,
    pub mean_utility: f64,
    pub involution_index: Option<f64>,
    /// Why the index is absent, when it is.
    pub involution_note: Option<String>,
    pub frac_risk_avoidant: f64,
    pub orders_created: usize,
    pub orders_delivered: usize,
    pub orders_expired: usize,
    pub fees_delivered: f64,
    /// Mean hours per rider per day spent carrying an order.
    pub daily_effective_hours: Vec<f64>,
    /// Involution index at each day end, on cumulative incomes and costs.
    pub daily_index: Vec<Option<f64>>,
    pub final_per_cell_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    /// Per-rider (reward, cost) totals rebuilt from the step records alone.
    pub fn replay_totals(&self) -> Vec<(f64, f64)> {
        let n = self.steps.first().map_or(0, |s| s.riders.len());
        let mut totals = vec![(0.0, 0.0); n];
        for rec in &self.steps {
            for (t, r) in totals.iter_mut().zip(&rec.riders) {
                t.0 += r.income;
                t.1 += r.cost;
            }
        }
        totals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ScriptedOrder {
    step: u32,
    pickup: Cell,
    dropoff: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: RunConfig,
    pub seed: u64,
    pub grid: CityGrid,
    pub clock: SimClock,
    pub riders: Vec<RiderState>,
    pub orders: Vec<Order>,
    pub platform: PlatformPolicy,
    pub profile: IntensityProfile,
    open: Vec<OrderId>,
    policy: RiderPolicy,
    mode: InteractionMode,
    utility: UtilityParams,
    order_rng: SimRng,
    rider_rngs: Vec<SimRng>,
    /// `(step, zone)` of orders created inside the demand window.
    recent: VecDeque<(u32, usize)>,
    zone_recent: Vec<u32>,
    scripted: Vec<ScriptedOrder>,
    epoch_start_income: Vec<f64>,
    swf_history: Vec<f64>,
    daily_effective_hours: Vec<f64>,
    daily_index: Vec<Option<f64>>,
}

fn nearest_zone(grid: &CityGrid, c: Cell) -> usize {
    grid.zones.iter().min_by_key(|z| (z.center.manhattan(c), z.id)).map_or(0, |z| z.id)
}

/// Builds the initial world for a validated config.
pub fn init_world(config: &RunConfig, seed: u64) -> Result<World> {
    World::new(config, seed)
}

impl World {
    pub fn new(config: &RunConfig, seed: u64) -> Result<Self> {
        let w = &config.world;
        if w.n_riders == 0 {
            return Err(Error::NoRiders);
        }
        let grid = config.grid()?;
        let mut placement = substream(seed, Stream::Placement);
        let riders = (0..w.n_riders)
            .map(|id| {
                let position = grid.uniform_cell(&mut placement);
                let length = placement.random_range(w.shift_min..=w.shift_max);
                let start = placement.random_range(0..=w.steps_per_day - length);
                RiderState {
                    id,
                    position,
                    zone_choice: nearest_zone(&grid, position),
                    intention: IntentionState::default(),
                    working: false,
                    hours_today: 0,
                    cumulative_reward: 0.0,
                    cumulative_cost: 0.0,
                    behavior_log: Vec::new(),
                    shift: ShiftPlan { start, length },
                    extension: 0,
                    settled: false,
                    task: None,
                    steps_worked: 0,
                    busy_steps_today: 0,
                }
            })
            .collect();
        let a = &config.agents;
        let p = &config.platform;
        Ok(Self {
            seed,
            clock: SimClock { step: 0, steps_per_day: w.steps_per_day, horizon: w.horizon },
            riders,
            orders: Vec::new(),
            platform: PlatformPolicy::new(p.base_fee, p.per_cell_rate, config.orders.volume_multiplier, p.governance),
            profile: config.profile(),
            open: Vec::new(),
            policy: RiderPolicy {
                intelligence: a.intelligence,
                params: IntentionParams { alpha: a.alpha, sigma0: a.sigma0, k: a.k, h: a.h },
            },
            mode: a.interaction(),
            utility: UtilityParams { eta: config.metrics.eta, epsilon: config.metrics.epsilon },
            order_rng: substream(seed, Stream::Orders),
            rider_rngs: (0..w.n_riders).map(|i| substream(seed, Stream::Rider(i))).collect(),
            recent: VecDeque::new(),
            zone_recent: vec![0; grid.zones.len()],
            scripted: Vec::new(),
            epoch_start_income: vec![0.0; w.n_riders],
            swf_history: Vec::new(),
            daily_effective_hours: Vec::new(),
            daily_index: Vec::new(),
            grid,
            config: config.clone(),
        })
    }

    /// Queues a deterministic order, created at `step` alongside any sampled ones.
    pub fn schedule_order(&mut self, step: u32, pickup: Cell, dropoff: Cell) -> Result<()> {
        if !self.grid.contains(pickup) || !self.grid.contains(dropoff) {
            return Err(Error::domain("scripted order outside the grid"));
        }
        let at = self.scripted.partition_point(|s| s.step <= step);
        self.scripted.insert(at, ScriptedOrder { step, pickup, dropoff });
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.clock.step >= self.clock.horizon
    }

    pub fn open_orders(&self) -> impl Iterator<Item = &Order> {
        self.open.iter().map(|&id| &self.orders[id])
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let order: Vec<usize> = (0..self.riders.len()).collect();
        self.step_with_rider_order(&order)
    }

    /// Same as [`World::step`], visiting riders in the given order during the act phase.
    pub fn step_with_rider_order(&mut self, visit: &[usize]) -> Result<StepRecord> {
        if self.is_finished() {
            return Err(Error::PastHorizon { horizon: self.clock.horizon });
        }
        let t = self.clock.step;
        let spd = self.clock.steps_per_day;
        let day_step = self.clock.step_in_day();
        let n = self.riders.len();

        if day_step == 0 {
            for r in &mut self.riders {
                r.hours_today = 0;
                r.busy_steps_today = 0;
                r.settled = false;
            }
        }
        let on_shift: Vec<bool> =
            self.riders.iter().map(|r| day_step >= r.shift.start && day_step < r.shift_end()).collect();
        for (r, &on) in self.riders.iter_mut().zip(&on_shift) {
            r.working = on || r.is_delivering();
        }

        let expired = self.expire(t);
        let created = self.generate(t)?;

        // Platform dispatch.
        let idle: Vec<IdleRider> = self
            .riders
            .iter()
            .filter(|r| r.working && !r.is_delivering())
            .map(|r| IdleRider { id: r.id, position: r.position, zone: r.zone_choice })
            .collect();
        let mut assigned = dispatch(self.open_orders(), &idle);
        for &(o, r) in &assigned {
            self.assign(o, r);
        }

        // Act phase: everybody decides against the same snapshot.
        let snapshot = self.snapshot();
        let mut decisions: Vec<Option<Action>> = vec![None; n];
        let mut intentions: Vec<IntentionState> = self.riders.iter().map(|r| r.intention).collect();
        let reach = self.config.agents.reach;
        for &i in visit {
            let r = &self.riders[i];
            let just_ended = !r.working && !r.settled && day_step >= r.shift_end();
            if !(r.working || just_ended) {
                continue;
            }
            let obs = observe(&snapshot, i, self.mode);
            let intention = update_intention(r.intention, &obs, &self.policy.params);
            intentions[i] = intention;
            if r.task.is_some() {
                continue;
            }
            let feasible = if r.working { snapshot.feasible_for(i, reach) } else { Vec::new() };
            let ctx = DecisionContext {
                position: r.position,
                zone: r.zone_choice,
                on_shift: r.working,
                can_extend: just_ended && day_step < spd,
                feasible: &feasible,
                orders_per_rider: &snapshot.orders_per_rider,
                zone_value: &snapshot.zone_value,
            };
            let action = decide(&self.policy, &intention, &obs, &ctx, &mut self.rider_rngs[i]);
            if just_ended {
                let r = &mut self.riders[i];
                r.settled = true;
                if action == Action::Rest && intention.label == IntentionLabel::RuleFollowing {
                    r.extension = r.extension.saturating_sub(self.config.agents.extend_steps);
                }
            }
            decisions[i] = Some(action);
        }

        let mut behaviors: Vec<Behavior> = self
            .riders
            .iter()
            .map(|r| match r.task {
                Some(Task::Deliver { .. }) => Behavior::Delivering,
                Some(Task::Relocate { .. }) => Behavior::Relocating,
                None if r.working => Behavior::Rest,
                None => Behavior::Off,
            })
            .collect();
        assigned.extend(self.apply_decisions(&decisions, &mut behaviors));

        // Movement and settlement.
        let a = &self.config.agents;
        let (time_cost, distance_cost) = (a.time_cost, a.distance_cost);
        let mut delivered = Vec::new();
        let mut riders_out = Vec::with_capacity(n);
        for i in 0..n {
            let was_delivering = self.riders[i].is_delivering();
            let moved = if decisions[i] == Some(Action::RandomWalk) {
                let (pos, moved) =
                    random_walk(&self.grid, self.riders[i].position, self.config.world.speed, &mut self.rider_rngs[i]);
                self.riders[i].position = pos;
                moved
            } else {
                self.move_rider(i)
            };
            let mut income = 0.0;
            if let Some(o) = self.try_deliver(i, t) {
                income = self.orders[o].fee;
                delivered.push(o);
            }
            let r = &mut self.riders[i];
            let worked = match decisions[i] {
                Some(Action::Rest) => false,
                Some(Action::ExtendShift) => true,
                _ => r.working,
            };
            let cost = if worked { time_cost } else { 0.0 } + distance_cost * moved as f64;
            r.cumulative_reward += income;
            r.cumulative_cost += cost;
            if worked {
                r.hours_today += 1;
                r.steps_worked += 1;
            }
            if was_delivering || r.is_delivering() {
                r.busy_steps_today += 1;
            }
            r.intention = intentions[i];
            if let Some(action) = decisions[i] {
                r.behavior_log.push((t, action));
            }
            riders_out.push(RiderStep {
                behavior: behaviors[i],
                intention: r.intention.label,
                position: r.position,
                income,
                cost,
            });
        }
        delivered.sort_unstable();

        self.end_of_step(t);
        self.clock.step += 1;
        Ok(StepRecord { step: t, created, assigned, delivered, expired, riders: riders_out })
    }

    fn expire(&mut self, t: u32) -> Vec<OrderId> {
        let expiry = self.config.orders.expiry;
        let mut expired = Vec::new();
        let orders = &mut self.orders;
        self.open.retain(|&id| {
            let o = &mut orders[id];
            if t - o.created_step >= expiry {
                o.status = OrderStatus::Expired(t);
                expired.push(id);
                false
            } else {
                true
            }
        });
        expired
    }

    fn generate(&mut self, t: u32) -> Result<Vec<OrderId>> {
        let pricing = Pricing { base_fee: self.platform.base_fee, per_cell_rate: self.platform.per_cell_rate };
        self.profile.volume_multiplier = self.platform.volume_multiplier;
        let mut fresh = orders::generate_orders(
            t,
            self.clock.steps_per_day,
            &self.profile,
            &self.grid,
            self.config.orders.max_trip,
            pricing,
            self.orders.len(),
            &mut self.order_rng,
        )?;
        let due = self.scripted.partition_point(|s| s.step <= t);
        for s in self.scripted.drain(..due).filter(|s| s.step == t) {
            fresh.push(Order {
                id: self.orders.len() + fresh.len(),
                created_step: t,
                zone: nearest_zone(&self.grid, s.pickup),
                pickup: s.pickup,
                dropoff: s.dropoff,
                fee: pricing.fee(s.pickup, s.dropoff),
                status: OrderStatus::Open,
                rider: None,
            });
        }
        let window = self.config.agents.demand_window;
        while let Some(&(step, zone)) = self.recent.front() {
            if step + window > t {
                break;
            }
            self.zone_recent[zone] -= 1;
            self.recent.pop_front();
        }
        let ids = fresh.iter().map(|o| o.id).collect();
        for o in fresh {
            self.recent.push_back((t, o.zone));
            self.zone_recent[o.zone] += 1;
            self.open.push(o.id);
            self.orders.push(o);
        }
        Ok(ids)
    }

    fn assign(&mut self, order: OrderId, rider: usize) {
        let o = &mut self.orders[order];
        debug_assert!(o.is_open());
        o.status = OrderStatus::Assigned(rider);
        o.rider = Some(rider);
        self.open.retain(|&id| id != order);
        self.riders[rider].task = Some(Task::Deliver { order, picked_up: false });
    }

    fn snapshot(&self) -> Snapshot {
        let zones = self.grid.zones.len();
        let mut working_in = vec![0u32; zones];
        for r in self.riders.iter().filter(|r| r.working) {
            working_in[r.zone_choice] += 1;
        }
        let mut fees = vec![0.0; zones];
        let open: Vec<FeasibleOrder> = self
            .open_orders()
            .map(|o| {
                fees[o.zone] += o.fee;
                FeasibleOrder { id: o.id, zone: o.zone, pickup: o.pickup, fee: o.fee }
            })
            .collect();
        let orders_per_rider = (0..zones).map(|z| self.zone_recent[z] as f64 / working_in[z].max(1) as f64).collect();
        let zone_value = (0..zones).map(|z| fees[z] / working_in[z].max(1) as f64).collect();
        Snapshot::new(
            self.riders.iter().map(|r| r.position).collect(),
            self.riders.iter().map(RiderState::income_rate).collect(),
            self.riders.iter().map(|r| r.zone_choice).collect(),
            orders_per_rider,
            zone_value,
            open,
        )
    }

    /// Applies decisions; returns order grabs that won their conflicts.
    fn apply_decisions(&mut self, decisions: &[Option<Action>], behaviors: &mut [Behavior]) -> Vec<(OrderId, usize)> {
        let spd = self.clock.steps_per_day;
        let extend = self.config.agents.extend_steps;
        let mut claims: BTreeMap<OrderId, Vec<usize>> = BTreeMap::new();
        for (i, d) in decisions.iter().enumerate() {
            let Some(action) = *d else { continue };
            behaviors[i] = action.into();
            match action {
                Action::AcceptOrder(o) => claims.entry(o).or_default().push(i),
                Action::SwitchZone(z) => {
                    let r = &mut self.riders[i];
                    r.zone_choice = z;
                    if !self.grid.zones[z].contains(r.position) {
                        r.task = Some(Task::Relocate { zone: z });
                    }
                }
                Action::ExtendShift => {
                    let r = &mut self.riders[i];
                    r.extension += extend.min(spd.saturating_sub(r.shift_end()));
                    r.working = true;
                }
                Action::RandomWalk | Action::Rest => {}
            }
        }
        let mut won = Vec::new();
        for (o, riders) in claims {
            let pickup = self.orders[o].pickup;
            let winner = riders
                .into_iter()
                .min_by_key(|&i| (self.riders[i].position.manhattan(pickup), i))
                .expect("claims are never empty");
            self.assign(o, winner);
            won.push((o, winner));
        }
        won
    }

    /// Moves one rider by up to `speed` cells; returns cells moved.
    fn move_rider(&mut self, i: usize) -> u32 {
        let mut budget = self.config.world.speed;
        let r = &mut self.riders[i];
        let mut moved = 0;
        match r.task {
            Some(Task::Deliver { order, mut picked_up }) => {
                let o = &self.orders[order];
                loop {
                    let target = if picked_up { o.dropoff } else { o.pickup };
                    if r.position == target {
                        if picked_up {
                            break;
                        }
                        picked_up = true;
                        continue;
                    }
                    if budget == 0 {
                        break;
                    }
                    r.position = r.position.step_toward(target);
                    budget -= 1;
                    moved += 1;
                }
                r.task = Some(Task::Deliver { order, picked_up });
            }
            Some(Task::Relocate { zone }) => {
                let z = &self.grid.zones[zone];
                while budget > 0 && !z.contains(r.position) {
                    r.position = r.position.step_toward(z.center);
                    budget -= 1;
                    moved += 1;
                }
                if z.contains(r.position) {
                    r.task = None;
                }
            }
            None => {}
        }
        moved
    }

    fn try_deliver(&mut self, i: usize, t: u32) -> Option<OrderId> {
        let r = &mut self.riders[i];
        let Some(Task::Deliver { order, picked_up: true }) = r.task else { return None };
        if r.position != self.orders[order].dropoff {
            return None;
        }
        r.task = None;
        self.orders[order].status = OrderStatus::Delivered(t);
        Some(order)
    }

    fn end_of_step(&mut self, t: u32) {
        if let Governance::HillClimb { epoch, .. } = self.platform.governance {
            if (t + 1).is_multiple_of(epoch) && self.riders.len() >= 2 {
                let earned: Vec<f64> =
                    self.riders.iter().zip(&self.epoch_start_income).map(|(r, s)| r.cumulative_reward - s).collect();
                if let Ok(w) = metrics::welfare(&earned) {
                    self.swf_history.push(w.swf);
                    self.platform = agents::govern(&self.platform, &self.swf_history);
                }
                self.epoch_start_income = self.riders.iter().map(|r| r.cumulative_reward).collect();
            }
        }
        let spd = self.clock.steps_per_day;
        if (t + 1).is_multiple_of(spd) {
            let hours_per_step = 24.0 / spd as f64;
            let busy: f64 = self.riders.iter().map(|r| r.busy_steps_today as f64).sum();
            self.daily_effective_hours.push(busy * hours_per_step / self.riders.len() as f64);
            self.daily_index.push(self.current_index().ok());
        }
    }

    pub fn utilities(&self) -> Result<Vec<f64>> {
        self.riders
            .iter()
            .map(|r| metrics::rider_utility(r.cumulative_reward, r.cumulative_cost, self.utility))
            .collect()
    }

    fn incomes(&self) -> Vec<f64> {
        self.riders.iter().map(|r| r.cumulative_reward).collect()
    }

    /// Involution index on the current cumulative incomes and costs.
    pub fn current_index(&self) -> Result<f64> {
        let w = metrics::welfare(&self.incomes())?;
        metrics::involution_index(w.swf, &self.utilities()?)
    }

    pub fn summary(&self) -> Result<RunSummary> {
        let utilities = self.utilities()?;
        let welfare = metrics::welfare(&self.incomes()).ok();
        let (involution_index, involution_note) = match welfare {
            None => (None, Some(Error::EqualityUndefined.to_string())),
            Some(w) => match metrics::involution_index(w.swf, &utilities) {
                Ok(x) => (Some(x), None),
                Err(e) => (None, Some(e.to_string())),
            },
        };
        let mut delivered = 0;
        let mut expired = 0;
        let mut fees = 0.0;
        for o in &self.orders {
            match o.status {
                OrderStatus::Delivered(_) => {
                    delivered += 1;
                    fees += o.fee;
                }
                OrderStatus::Expired(_) => expired += 1,
                _ => {}
            }
        }
        let n = self.riders.len();
        Ok(RunSummary {
            seed: self.seed,
            n_riders: n,
            horizon: self.clock.horizon,
            rewards: self.incomes(),
            costs: self.riders.iter().map(|r| r.cumulative_cost).collect(),
            mean_utility: metrics::mean(&utilities),
            utilities,
            welfare,
            involution_index,
            involution_note,
            frac_risk_avoidant: self.riders.iter().filter(|r| r.intention.label == IntentionLabel::RiskAvoidant).count()
                as f64
                / n as f64,
            orders_created: self.orders.len(),
            orders_delivered: delivered,
            orders_expired: expired,
            fees_delivered: fees,
            daily_effective_hours: self.daily_effective_hours.clone(),
            daily_index: self.daily_index.clone(),
            final_per_cell_rate: self.platform.per_cell_rate,
        })
    }
}

fn check_runnable(config: &RunConfig) -> Result<()> {
    if config.world.horizon == 0 {
        return Err(Error::EmptyRun);
    }
    Ok(())
}

/// Runs a prepared world to its horizon, keeping every step record.
pub fn run_world(mut world: World) -> Result<RunTrace> {
    check_runnable(&world.config)?;
    let mut steps = Vec::with_capacity(world.clock.horizon as usize);
    while !world.is_finished() {
        steps.push(world.step()?);
    }
    Ok(RunTrace { steps, summary: world.summary()? })
}

pub fn run(config: &RunConfig, seed: u64) -> Result<RunTrace> {
    check_runnable(config)?;
    run_world(World::new(config, seed)?)
}

/// Runs to the horizon keeping only terminal metrics.
pub fn run_summary(config: &RunConfig, seed: u64) -> Result<RunSummary> {
    check_runnable(config)?;
    let mut world = World::new(config, seed)?;
    while !world.is_finished() {
        world.step()?;
    }
    world.summary()
}

/// Random 4-neighbour walk of `steps` moves.
fn random_walk<R: Rng>(grid: &CityGrid, from: Cell, steps: u32, rng: &mut R) -> (Cell, u32) {
    let mut pos = from;
    let mut moved = 0;
    for _ in 0..steps {
        if let Some(next) = grid.neighbours(pos).choose(rng) {
            pos = next;
            moved += 1;
        }
    }
    (pos, moved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Zone;

    /// 5x5 grid, one zone covering it, no sampled orders, riders on shift all day.
    fn tiny(n_riders: usize, horizon: u32) -> RunConfig {
        let mut c = RunConfig::default();
        let w = &mut c.world;
        w.width = 5;
        w.height = 5;
        w.n_riders = n_riders;
        w.steps_per_day = 10;
        w.horizon = horizon;
        w.shift_min = 10;
        w.shift_max = 10;
        w.zones = Some(vec![Zone { id: 0, center: Cell::new(2, 2), radius: 4, weight: 1.0 }]);
        c.orders.volume_multiplier = 0.0;
        c.validate().unwrap();
        c
    }

    #[test]
    fn hand_traced_delivery() {
        let mut w = World::new(&tiny(1, 10), 7).unwrap();
        w.riders[0].position = Cell::new(1, 2);
        w.schedule_order(0, Cell::new(2, 2), Cell::new(4, 2)).unwrap();

        let s0 = w.step().unwrap();
        assert_eq!(s0.created, [0]);
        assert_eq!(s0.assigned, [(0, 0)]);
        assert_eq!(s0.riders[0].position, Cell::new(2, 2));
        let s1 = w.step().unwrap();
        assert_eq!(s1.riders[0].position, Cell::new(3, 2));
        assert!(s1.delivered.is_empty());
        let s2 = w.step().unwrap();
        assert_eq!(s2.delivered, [0]);
        assert_eq!(w.orders[0].status, OrderStatus::Delivered(2));
        // fee 2 + 0.1 * 2 cells
        assert!((s2.riders[0].income - 2.2).abs() < 1e-12);
        // three worked steps at 0.01 plus three cells at 0.02
        assert!((w.riders[0].cumulative_cost - 0.09).abs() < 1e-12);
        assert_eq!(w.riders[0].task, None);
    }

    #[test]
    fn quiet_world_only_advances_the_clock() {
        let mut w = World::new(&tiny(2, 10), 1).unwrap();
        let rec = w.step().unwrap();
        assert_eq!(w.clock.step, 1);
        assert!(rec.created.is_empty() && rec.assigned.is_empty() && rec.delivered.is_empty());
        assert!(w.orders.is_empty());
        assert!(w.riders.iter().all(|r| r.cumulative_reward == 0.0));
    }

    #[test]
    fn stepping_past_the_horizon_fails() {
        let mut w = World::new(&tiny(1, 10), 1).unwrap();
        for _ in 0..10 {
            w.step().unwrap();
        }
        assert!(w.is_finished());
        assert!(matches!(w.step(), Err(Error::PastHorizon { horizon: 10 })));
    }

    #[test]
    fn empty_run_and_no_riders() {
        let mut c = tiny(1, 10);
        c.world.horizon = 0;
        assert!(matches!(run(&c, 0), Err(Error::EmptyRun)));
        assert!(matches!(run_summary(&c, 0), Err(Error::EmptyRun)));
        let mut c = tiny(1, 10);
        c.world.n_riders = 0;
        assert!(matches!(World::new(&c, 0), Err(Error::NoRiders)));
    }

    #[test]
    fn scripted_orders_pay_their_fees() {
        let mut w = World::new(&tiny(1, 40), 3).unwrap();
        w.riders[0].position = Cell::new(0, 0);
        let trips = [
            (Cell::new(0, 1), Cell::new(3, 1)),
            (Cell::new(4, 4), Cell::new(0, 4)),
            (Cell::new(2, 2), Cell::new(2, 0)),
        ];
        for (k, &(p, d)) in trips.iter().enumerate() {
            w.schedule_order(k as u32 * 12, p, d).unwrap();
        }
        let trace = run_world(w).unwrap();
        let fees: f64 = trips.iter().map(|(p, d)| 2.0 + 0.1 * p.manhattan(*d) as f64).sum();
        assert_eq!(trace.summary.orders_delivered, 3);
        assert!((trace.summary.rewards[0] - fees).abs() < 1e-9);
        assert!((trace.summary.fees_delivered - fees).abs() < 1e-9);
    }

    #[test]
    fn scripted_order_outside_grid_is_rejected() {
        let mut w = World::new(&tiny(1, 10), 0).unwrap();
        assert!(w.schedule_order(0, Cell::new(5, 0), Cell::new(0, 0)).is_err());
    }

    #[test]
    fn visit_order_does_not_change_the_outcome() {
        let mut c = RunConfig::default();
        c.world.n_riders = 30;
        c.world.horizon = 240;
        c.agents.intelligence = agents::Intelligence::Low;
        c.agents.interaction_mode = agents::InteractionKind::Global;
        let mut a = World::new(&c, 11).unwrap();
        let mut b = a.clone();
        let forward: Vec<usize> = (0..30).collect();
        let backward: Vec<usize> = (0..30).rev().collect();
        while !a.is_finished() {
            assert_eq!(a.step_with_rider_order(&forward).unwrap(), b.step_with_rider_order(&backward).unwrap());
        }
        assert_eq!(a.riders, b.riders);
    }

    #[test]
    fn extension_is_bounded_by_the_day() {
        let mut c = RunConfig::default();
        c.world.n_riders = 40;
        c.world.horizon = 1200;
        c.orders.volume_multiplier = 0.3;
        let mut w = World::new(&c, 5).unwrap();
        let spd = c.world.steps_per_day;
        while !w.is_finished() {
            w.step().unwrap();
            for r in &w.riders {
                assert!(r.shift_end() <= spd);
                assert!(r.hours_today <= spd);
            }
        }
        assert!(w.riders.iter().any(|r| r.extension > 0));
    }
}
