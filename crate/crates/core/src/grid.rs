//! Discrete city map: cells, commercial zones and the Manhattan metric.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// One 4-neighbour move toward `target`, x axis first.
    pub fn step_toward(self, target: Cell) -> Cell {
        use std::cmp::Ordering::*;
        match (self.x.cmp(&target.x), self.y.cmp(&target.y)) {
            (Less, _) => Cell::new(self.x + 1, self.y),
            (Greater, _) => Cell::new(self.x - 1, self.y),
            (Equal, Less) => Cell::new(self.x, self.y + 1),
            (Equal, Greater) => Cell::new(self.x, self.y - 1),
            (Equal, Equal) => self,
        }
    }
}

impl From<[u32; 2]> for Cell {
    fn from([x, y]: [u32; 2]) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for [u32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    #[serde(default)]
    pub id: usize,
    pub center: Cell,
    pub radius: u32,
    pub weight: f64,
}

impl Zone {
    pub fn contains(&self, c: Cell) -> bool {
        self.center.manhattan(c) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityGrid {
    pub width: u32,
    pub height: u32,
    pub zones: Vec<Zone>,
}

impl CityGrid {
    /// Builds a grid, re-numbering zones and normalizing their weights to sum to 1.
    pub fn new(width: u32, height: u32, mut zones: Vec<Zone>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("world.width and world.height must be >= 1".into()));
        }
        if zones.is_empty() {
            return Err(Error::NoZones);
        }
        let total: f64 = zones.iter().map(|z| z.weight).sum();
        for (i, z) in zones.iter_mut().enumerate() {
            if z.radius < 1 {
                return Err(Error::Config(format!("zone {i}: radius must be >= 1")));
            }
            if !(z.weight >= 0.0 && z.weight.is_finite()) {
                return Err(Error::Config(format!("zone {i}: weight must be >= 0")));
            }
            if z.center.x >= width || z.center.y >= height {
                return Err(Error::Config(format!("zone {i}: center outside the grid")));
            }
            z.id = i;
        }
        if total <= 0.0 {
            return Err(Error::Config("zone weights must not all be zero".into()));
        }
        for z in &mut zones {
            z.weight /= total;
        }
        Ok(Self { width, height, zones })
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn clamp(&self, x: i64, y: i64) -> Cell {
        Cell::new(x.clamp(0, self.width as i64 - 1) as u32, y.clamp(0, self.height as i64 - 1) as u32)
    }

    pub fn uniform_cell<R: Rng>(&self, rng: &mut R) -> Cell {
        Cell::new(rng.random_range(0..self.width), rng.random_range(0..self.height))
    }

    /// Uniform over the in-grid cells of the zone's Manhattan ball.
    pub fn cell_in_zone<R: Rng>(&self, zone: &Zone, rng: &mut R) -> Cell {
        let r = zone.radius as i64;
        loop {
            let dx = rng.random_range(-r..=r);
            let dy = rng.random_range(-r..=r);
            if dx.abs() + dy.abs() > r {
                continue;
            }
            let (x, y) = (zone.center.x as i64 + dx, zone.center.y as i64 + dy);
            if x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 {
                return Cell::new(x as u32, y as u32);
            }
        }
    }

    /// A cell at Manhattan distance in `[1, max_dist]` from `from`, rejection-sampled
    /// inside the grid and clamped as a last resort on degenerate grids.
    pub fn cell_in_ring<R: Rng>(&self, from: Cell, max_dist: u32, rng: &mut R) -> Cell {
        let max_dist = max_dist.max(1) as i64;
        let mut last = (from.x as i64, from.y as i64);
        for _ in 0..64 {
            let d = rng.random_range(1..=max_dist);
            let dx = rng.random_range(-d..=d);
            let rest = d - dx.abs();
            let dy = if rng.random_bool(0.5) { rest } else { -rest };
            let (x, y) = (from.x as i64 + dx, from.y as i64 + dy);
            last = (x, y);
            if x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 {
                return Cell::new(x as u32, y as u32);
            }
        }
        self.clamp(last.0, last.1)
    }

    pub fn neighbours(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (x, y) = (c.x as i64, c.y as i64);
        [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
            .into_iter()
            .filter(|&(x, y)| x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64)
            .map(|(x, y)| Cell::new(x as u32, y as u32))
    }
}

const LATTICE_SEED: u64 = 0x5eed_2024;

/// Zone centers on a jittered lattice (two rows once there are four or more zones).
///
/// The jitter comes from a fixed generator so the default city is identical for every seed.
pub fn lattice_zones(width: u32, height: u32, n: usize) -> Vec<Zone> {
    let rows = if n >= 4 { 2 } else { 1 };
    let cols = n.div_ceil(rows);
    let radius = (width.min(height) / 12).max(1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(LATTICE_SEED);
    let (cw, ch) = (width as f64 / cols as f64, height as f64 / rows as f64);
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let jx = rng.random_range(-0.15..=0.15) * cw;
            let jy = rng.random_range(-0.15..=0.15) * ch;
            let x = ((c as f64 + 0.5) * cw + jx).floor() as i64;
            let y = ((r as f64 + 0.5) * ch + jy).floor() as i64;
            Zone {
                id: i,
                center: Cell::new(x.clamp(0, width as i64 - 1) as u32, y.clamp(0, height as i64 - 1) as u32),
                radius,
                weight: 0.6 + (n - i) as f64 / n as f64,
            }
        })
        .collect()
}
