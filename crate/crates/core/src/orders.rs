//! Time-of-day order intensity (a five-peak Gaussian mixture) and Poisson order creation.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, CityGrid};

pub type OrderId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OrderStatus {
    Open,
    Assigned(usize),
    Delivered(u32),
    Expired(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub created_step: u32,
    pub zone: usize,
    pub pickup: Cell,
    pub dropoff: Cell,
    pub fee: f64,
    pub status: OrderStatus,
    /// Rider that held the order before delivery; kept once delivered.
    pub rider: Option<usize>,
}

impl Order {
    pub fn is_open(&self) -> bool {
        matches!(self.status, OrderStatus::Open)
    }

    pub fn trip_length(&self) -> u32 {
        self.pickup.manhattan(self.dropoff)
    }
}

/// Five `(amplitude, center, width)` triples over the day fraction, plus a global multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityProfile {
    pub components: [(f64, f64, f64); 5],
    pub volume_multiplier: f64,
}

impl IntensityProfile {
    pub fn validate(&self) -> Result<()> {
        for (i, &(a, _, c)) in self.components.iter().enumerate() {
            if !(a >= 0.0) {
                return Err(Error::domain(format!("intensity component {i}: amplitude must be >= 0")));
            }
            if !(c > 0.0) {
                return Err(Error::domain(format!("intensity component {i}: width must be > 0")));
            }
        }
        if !(self.volume_multiplier >= 0.0) {
            return Err(Error::domain("volume multiplier must be >= 0"));
        }
        Ok(())
    }
}

/// Expected orders per step at day fraction `x`.
pub fn intensity(x: f64, profile: &IntensityProfile) -> f64 {
    let sum: f64 = profile
        .components
        .iter()
        .map(|&(a, b, c)| {
            let u = (x - b) / c;
            a * (-u * u).exp()
        })
        .sum();
    profile.volume_multiplier * sum
}

pub fn day_fraction(step: u32, steps_per_day: u32) -> f64 {
    (step % steps_per_day) as f64 / steps_per_day as f64
}

/// Fee schedule applied at order creation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pricing {
    pub base_fee: f64,
    pub per_cell_rate: f64,
}

impl Pricing {
    pub fn fee(&self, pickup: Cell, dropoff: Cell) -> f64 {
        self.base_fee + self.per_cell_rate * pickup.manhattan(dropoff) as f64
    }
}

/// Draws this step's new orders. Ids are assigned from `next_id` upward.
#[allow(clippy::too_many_arguments)]
pub fn generate_orders<R: Rng>(
    step: u32,
    steps_per_day: u32,
    profile: &IntensityProfile,
    grid: &CityGrid,
    max_trip: u32,
    pricing: Pricing,
    next_id: OrderId,
    rng: &mut R,
) -> Result<Vec<Order>> {
    if grid.zones.is_empty() {
        return Err(Error::NoZones);
    }
    let lambda = intensity(day_fraction(step, steps_per_day), profile);
    let count = if lambda > 0.0 {
        Poisson::new(lambda).map_err(|e| Error::domain(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let zone = pick_zone(grid, rng);
        let pickup = grid.cell_in_zone(&grid.zones[zone], rng);
        let dropoff = grid.cell_in_ring(pickup, max_trip, rng);
        out.push(Order {
            id: next_id + k,
            created_step: step,
            zone,
            pickup,
            dropoff,
            fee: pricing.fee(pickup, dropoff),
            status: OrderStatus::Open,
            rider: None,
        });
    }
    Ok(out)
}

fn pick_zone<R: Rng>(grid: &CityGrid, rng: &mut R) -> usize {
    let mut u: f64 = rng.random();
    for z in &grid.zones {
        if u < z.weight {
            return z.id;
        }
        u -= z.weight;
    }
    // Rounding residue: fall back to the last zone with positive weight.
    grid.zones.iter().rev().find(|z| z.weight > 0.0).map_or(0, |z| z.id)
}
