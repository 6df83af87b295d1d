use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Intelligence, IntentionLabel, IntentionParams, IntentionState, InteractionMode};
use crate::grid::Cell;
use crate::orders::OrderId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    AcceptOrder(OrderId),
    SwitchZone(usize),
    RandomWalk,
    Rest,
    ExtendShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiderPolicy {
    pub intelligence: Intelligence,
    pub params: IntentionParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleOrder {
    pub id: OrderId,
    pub zone: usize,
    pub pickup: Cell,
    pub fee: f64,
}

/// What a rider can perceive at the start of the act phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Cumulative income per worked step.
    pub own_rate: f64,
    /// Recent order arrivals per working rider in the rider's zone.
    pub orders_per_rider: f64,
    /// Median income rate of visible peers; absent without interaction or without peers.
    pub peer_median: Option<f64>,
}

/// Frozen start-of-act-phase view shared by every rider's decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub positions: Vec<Cell>,
    pub income_rates: Vec<f64>,
    pub zone_choice: Vec<usize>,
    /// Per zone.
    pub orders_per_rider: Vec<f64>,
    /// Per zone: open-order fees over riders choosing the zone.
    pub zone_value: Vec<f64>,
    pub open_orders: Vec<FeasibleOrder>,
    sorted_rates: Vec<f64>,
}

impl Snapshot {
    pub fn new(
        positions: Vec<Cell>,
        income_rates: Vec<f64>,
        zone_choice: Vec<usize>,
        orders_per_rider: Vec<f64>,
        zone_value: Vec<f64>,
        open_orders: Vec<FeasibleOrder>,
    ) -> Self {
        let mut sorted_rates = income_rates.clone();
        sorted_rates.sort_by(f64::total_cmp);
        Self { positions, income_rates, zone_choice, orders_per_rider, zone_value, open_orders, sorted_rates }
    }

    pub fn feasible_for(&self, rider: usize, reach: u32) -> Vec<FeasibleOrder> {
        let pos = self.positions[rider];
        self.open_orders.iter().filter(|o| o.pickup.manhattan(pos) <= reach).copied().collect()
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) })
}

/// Median of `sorted` with one copy of `own` removed.
fn median_excluding(sorted: &[f64], own: f64) -> Option<f64> {
    let n = sorted.len();
    if n < 2 {
        return None;
    }
    let p = sorted.partition_point(|x| *x < own).min(n - 1);
    let at = |k: usize| if k < p { sorted[k] } else { sorted[k + 1] };
    let m = n - 1;
    Some(if m % 2 == 1 { at(m / 2) } else { 0.5 * (at(m / 2 - 1) + at(m / 2)) })
}

pub fn observe(snapshot: &Snapshot, rider: usize, mode: InteractionMode) -> Observation {
    let own_rate = snapshot.income_rates[rider];
    let peer_median = match mode {
        InteractionMode::None => None,
        InteractionMode::Global => median_excluding(&snapshot.sorted_rates, own_rate),
        InteractionMode::Local { radius } => {
            let here = snapshot.positions[rider];
            let peers = snapshot
                .positions
                .iter()
                .zip(&snapshot.income_rates)
                .enumerate()
                .filter(|&(j, (p, _))| j != rider && p.manhattan(here) <= radius)
                .map(|(_, (_, r))| *r)
                .collect();
            median(peers)
        }
    };
    Observation { own_rate, orders_per_rider: snapshot.orders_per_rider[snapshot.zone_choice[rider]], peer_median }
}

#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub position: Cell,
    pub zone: usize,
    pub on_shift: bool,
    /// Off-shift with steps left in the day.
    pub can_extend: bool,
    pub feasible: &'a [FeasibleOrder],
    pub orders_per_rider: &'a [f64],
    pub zone_value: &'a [f64],
}

fn nearest<'a>(from: Cell, orders: impl Iterator<Item = &'a FeasibleOrder>) -> Option<&'a FeasibleOrder> {
    orders.min_by_key(|o| (o.pickup.manhattan(from), o.id))
}

/// Lowest-id zone attaining the maximum score.
fn argmax(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}

/// Picks one action for a rider not currently carrying an order.
pub fn decide<R: Rng>(
    policy: &RiderPolicy,
    intention: &IntentionState,
    obs: &Observation,
    ctx: &DecisionContext<'_>,
    rng: &mut R,
) -> Action {
    let uneasy = matches!(intention.label, IntentionLabel::Anxious | IntentionLabel::RiskAvoidant);
    if !ctx.on_shift {
        return if uneasy && ctx.can_extend { Action::ExtendShift } else { Action::Rest };
    }

    if intention.label == IntentionLabel::RiskAvoidant {
        if let Some(best) = argmax(ctx.orders_per_rider) {
            if best != ctx.zone && ctx.orders_per_rider[best] > obs.orders_per_rider {
                return Action::SwitchZone(best);
            }
        }
    }

    match policy.intelligence {
        Intelligence::Low => {
            let n = ctx.feasible.len() + 2;
            match rng.random_range(0..n) {
                i if i < ctx.feasible.len() => Action::AcceptOrder(ctx.feasible[i].id),
                i if i == ctx.feasible.len() => Action::RandomWalk,
                _ => Action::Rest,
            }
        }
        Intelligence::Medium => match nearest(ctx.position, ctx.feasible.iter()) {
            Some(o) => Action::AcceptOrder(o.id),
            None => Action::RandomWalk,
        },
        Intelligence::High => {
            let best = argmax(ctx.zone_value).unwrap_or(ctx.zone);
            if let Some(o) = nearest(ctx.position, ctx.feasible.iter().filter(|o| o.zone == best)) {
                return Action::AcceptOrder(o.id);
            }
            if best != ctx.zone && ctx.zone_value[best] > ctx.zone_value[ctx.zone] {
                return Action::SwitchZone(best);
            }
            match nearest(ctx.position, ctx.feasible.iter()) {
                Some(o) => Action::AcceptOrder(o.id),
                None => Action::RandomWalk,
            }
        }
    }
}
