//! Welfare and involution metrics over rider incomes and utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    /// Relative risk aversion, > 0.
    pub eta: f64,
    /// Floor applied to `z` when `eta >= 1`, where CRRA diverges at zero.
    pub epsilon: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        Self { eta: 0.1, epsilon: 1e-6 }
    }
}

/// Constant-relative-risk-aversion transform `(z^(1-eta) - 1) / (1 - eta)`, `ln z` at `eta = 1`.
pub fn crra(z: f64, params: UtilityParams) -> Result<f64> {
    let UtilityParams { eta, epsilon } = params;
    if !(eta > 0.0) {
        return Err(Error::domain(format!("eta must be > 0, got {eta}")));
    }
    if !(z >= 0.0) {
        return Err(Error::domain(format!("crra needs z >= 0, got {z}")));
    }
    let z = if eta >= 1.0 { z.max(epsilon) } else { z };
    if eta == 1.0 {
        Ok(z.ln())
    } else {
        let e = 1.0 - eta;
        Ok((z.powf(e) - 1.0) / e)
    }
}

/// `crra(sum of rewards) - sum of costs`.
pub fn rider_utility(reward_sum: f64, cost_sum: f64, params: UtilityParams) -> Result<f64> {
    Ok(crra(reward_sum, params)? - cost_sum)
}

/// Mean absolute pairwise difference over twice the mean, computed on sorted values.
pub fn gini(incomes: &[f64]) -> Result<f64> {
    if incomes.is_empty() {
        return Err(Error::Empty("incomes"));
    }
    if let Some(bad) = incomes.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::domain(format!("negative income {bad}")));
    }
    let total: f64 = incomes.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut sorted = incomes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let weighted: f64 = sorted.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x).sum();
    Ok((weighted / (n * total)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareSnapshot {
    pub eq: f64,
    pub prod: f64,
    pub swf: f64,
}

/// Equality-weighted productivity of cumulative incomes.
pub fn welfare(incomes: &[f64]) -> Result<WelfareSnapshot> {
    let n = incomes.len();
    if n < 2 {
        return Err(Error::EqualityUndefined);
    }
    let g = gini(incomes)?;
    let eq = (1.0 - g * n as f64 / (n as f64 - 1.0)).clamp(0.0, 1.0);
    let prod: f64 = incomes.iter().sum();
    Ok(WelfareSnapshot { eq, prod, swf: eq * prod })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Social welfare over mean individual utility.
pub fn involution_index(swf: f64, utilities: &[f64]) -> Result<f64> {
    if utilities.is_empty() {
        return Err(Error::Empty("utilities"));
    }
    let m = mean(utilities);
    if !(m > 0.0) {
        return Err(Error::InvolutionUndefined(m));
    }
    Ok(swf / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InvolutionLevel {
    Low,
    Moderate,
    High,
}

impl InvolutionLevel {
    pub const ALL: [InvolutionLevel; 3] = [InvolutionLevel::Low, InvolutionLevel::Moderate, InvolutionLevel::High];

    pub fn as_str(self) -> &'static str {
        match self {
            InvolutionLevel::Low => "low",
            InvolutionLevel::Moderate => "moderate",
            InvolutionLevel::High => "high",
        }
    }
}

pub const LOW_INVOLUTION_MAX: f64 = 30.0;
pub const MODERATE_INVOLUTION_MAX: f64 = 60.0;

pub fn classify_involution(index: f64) -> InvolutionLevel {
    if index <= LOW_INVOLUTION_MAX {
        InvolutionLevel::Low
    } else if index <= MODERATE_INVOLUTION_MAX {
        InvolutionLevel::Moderate
    } else {
        InvolutionLevel::High
    }
}

/// Pearson correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkComparison {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when a series is constant and correlation is undefined.
    pub pearson: Option<f64>,
}

/// MAE, RMSE and Pearson r between an observed series and its simulated counterpart.
pub fn benchmark_compare(real: &[f64], sim: &[f64]) -> Result<BenchmarkComparison> {
    if real.len() != sim.len() {
        return Err(Error::LengthMismatch(real.len(), sim.len()));
    }
    if real.len() < 2 {
        return Err(Error::domain("benchmark series need at least 2 points"));
    }
    let n = real.len() as f64;
    let mae = real.iter().zip(sim).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let rmse = (real.iter().zip(sim).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
    Ok(BenchmarkComparison { mae, rmse, pearson: pearson(real, sim) })
}
