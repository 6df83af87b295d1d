use std::ops::RangeInclusive;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mechanism::{window_features, IntentionLog};
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng, Stream};

const RESTARTS: usize = 10;
const MAX_ITER: usize = 200;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            d2.iter()
                .position(|&d| {
                    u -= d;
                    u < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let k = centroids.len();
    let dims = points[0].len();
    let mut assignments = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (a, p) in assignments.iter_mut().zip(points) {
            let best =
                (0..k).min_by(|&i, &j| dist2(p, &centroids[i]).total_cmp(&dist2(p, &centroids[j]))).expect("k >= 1");
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dims]; k];
        let mut sizes = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            sizes[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // An emptied cluster keeps its previous centroid.
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
    }
    let inertia = assignments.iter().zip(points).map(|(&a, p)| dist2(p, &centroids[a])).sum();
    KMeans { assignments, centroids, inertia }
}

/// Best of several k-means++ restarts by inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(Error::domain(format!("k must lie in 1..={}, got {k}", points.len())));
    }
    let mut rng = substream(seed, Stream::Clustering);
    let mut best: Option<KMeans> = None;
    for _ in 0..RESTARTS {
        let run = lloyd(points, plus_plus_init(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Mean silhouette; points alone in their cluster score 0.
pub fn silhouette(points: &[Vec<f64>], assignments: &[usize]) -> Option<f64> {
    let k = assignments.iter().max()? + 1;
    if k < 2 {
        return None;
    }
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own = assignments[i];
        if sizes[own] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[assignments[j]] += dist2(p, q).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Undefined for the single-cluster result.
    pub silhouette: Option<f64>,
    pub note: Option<String>,
}

/// Chooses k by best mean silhouette. Points are clustered in a canonical order
/// and clusters numbered by first appearance in rider order, so relabeling
/// riders permutes the output the same way.
pub fn cluster_points(points: &[Vec<f64>], k_range: RangeInclusive<usize>, seed: u64) -> Result<Clustering> {
    if points.len() < 2 {
        return Err(Error::domain(format!("clustering needs at least 2 riders, got {}", points.len())));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a].iter().zip(&points[b]).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(a.cmp(&b))
    });
    let sorted: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if distinct == 1 {
        return Ok(Clustering {
            k: 1,
            assignments: vec![0; points.len()],
            centroids: vec![points[0].clone()],
            silhouette: None,
            note: Some("all riders have identical intention profiles".into()),
        });
    }
    let mut best: Option<(f64, usize, KMeans)> = None;
    for k in k_range.filter(|&k| k >= 2 && k <= distinct) {
        let km = kmeans(&sorted, k, seed)?;
        let s = silhouette(&sorted, &km.assignments).unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|b| s > b.0) {
            best = Some((s, k, km));
        }
    }
    let (s, k, km) = best.ok_or_else(|| Error::domain("k range admits no k >= 2"))?;
    let mut by_rider = vec![0; points.len()];
    for (pos, &rider) in order.iter().enumerate() {
        by_rider[rider] = km.assignments[pos];
    }
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    for &c in &by_rider {
        if relabel[c] == usize::MAX {
            relabel[c] = next;
            next += 1;
        }
    }
    let mut centroids = vec![Vec::new(); next];
    for (c, &r) in relabel.iter().enumerate() {
        if r != usize::MAX {
            centroids[r] = km.centroids[c].clone();
        }
    }
    Ok(Clustering {
        k: next,
        assignments: by_rider.iter().map(|&c| relabel[c]).collect(),
        centroids,
        silhouette: Some(s),
        note: None,
    })
}

/// Clusters riders by their per-window intention frequencies.
pub fn cluster_intentions(
    log: &IntentionLog,
    window: u32,
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<Clustering> {
    log.validate()?;
    cluster_points(&window_features(log, window)?, k_range, seed)
}
