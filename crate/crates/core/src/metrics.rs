//! Accuracy metrics: relative error of the output standard deviation, a
//! nearest-neighbour KL divergence estimate, and aggregation over runs.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// `|σ − σ̂| / σ`.
pub fn relative_error(reference_sd: f64, estimate_sd: f64) -> Result<f64> {
    if !(reference_sd > 0.0) {
        return param(format!("reference standard deviation must be positive, got {reference_sd}"));
    }
    Ok((reference_sd - estimate_sd).abs() / reference_sd)
}

/// Nearest-neighbour estimate of D(true ‖ model) for one-dimensional samples.
///
/// `D = (1/N) Σ ln(ν_k(i) / ρ_k(i)) + ln(M / (N − 1))`, where `ρ_k(i)` is the
/// distance from true sample `i` to its k-th nearest other true sample and
/// `ν_k(i)` the distance to its k-th nearest model sample. Returns +∞ when
/// the model sample has no spread, contains non-finite values, or some
/// `ν_k(i)` is zero while `ρ_k(i)` is not.
pub fn kl_divergence_knn(true_samples: &[f64], model_samples: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return param("k must be positive");
    }
    let (n, m) = (true_samples.len(), model_samples.len());
    if n < k + 1 || m < k + 1 {
        return param(format!("need at least {} samples on each side, got {n} and {m}", k + 1));
    }
    if true_samples.iter().any(|v| !v.is_finite()) {
        return param("true samples must be finite");
    }
    if model_samples.iter().any(|v| !v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    let mut truth = true_samples.to_vec();
    let mut model = model_samples.to_vec();
    truth.sort_by(f64::total_cmp);
    model.sort_by(f64::total_cmp);
    if model[0] == model[m - 1] {
        return Ok(f64::INFINITY);
    }

    let mut sum = 0.0;
    let mut skipped = 0usize;
    for (i, &x) in truth.iter().enumerate() {
        let rho = kth_distance_excluding(&truth, i, k);
        let pos = model.partition_point(|&v| v < x);
        let nu = kth_distance_around(&model, pos, x, k);
        if rho == 0.0 || nu == 0.0 {
            if rho == nu {
                // Coincident samples on both sides carry no information.
                skipped += 1;
                continue;
            }
            return Ok(f64::INFINITY);
        }
        sum += (nu / rho).ln();
    }
    let used = n - skipped;
    if used == 0 {
        return Ok(0.0);
    }
    Ok(sum / used as f64 + (m as f64 / (n as f64 - 1.0)).ln())
}

/// Distance from `sorted[i]` to its k-th nearest neighbour among the others.
fn kth_distance_excluding(sorted: &[f64], i: usize, k: usize) -> f64 {
    let x = sorted[i];
    let (mut lo, mut hi) = (i, i + 1); // candidates sorted[lo - 1] and sorted[hi]
    let mut d = 0.0;
    for _ in 0..k {
        let left = if lo > 0 { x - sorted[lo - 1] } else { f64::INFINITY };
        let right = if hi < sorted.len() { sorted[hi] - x } else { f64::INFINITY };
        if left <= right {
            d = left;
            lo -= 1;
        } else {
            d = right;
            hi += 1;
        }
    }
    d
}

/// Distance from `x` to its k-th nearest element of `sorted`, where `pos` is
/// the insertion point of `x`.
fn kth_distance_around(sorted: &[f64], pos: usize, x: f64, k: usize) -> f64 {
    let (mut lo, mut hi) = (pos, pos);
    let mut d = 0.0;
    for _ in 0..k {
        let left = if lo > 0 { x - sorted[lo - 1] } else { f64::INFINITY };
        let right = if hi < sorted.len() { sorted[hi] - x } else { f64::INFINITY };
        if left <= right {
            d = left;
            lo -= 1;
        } else {
            d = right;
            hi += 1;
        }
    }
    d
}

/// Mean and standard error of a list of run values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Aggregate {
    Finite { mean: f64, standard_error: f64 },
    /// At least one run was infinite.
    Infinite,
}

impl Aggregate {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Finite { mean, .. } => *mean,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn standard_error(&self) -> f64 {
        match self {
            Self::Finite { standard_error, .. } => *standard_error,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }
}

/// Mean and `sd / √count` (sd with the `count − 1` denominator; 0 for a
/// single value). Any infinite or NaN value makes the aggregate infinite.
pub fn summarize_runs(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return param("cannot summarize an empty list of runs");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Ok(Aggregate::Infinite);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let standard_error = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    Ok(Aggregate::Finite { mean, standard_error })
}

/// Outcome of one fitted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sd_estimate: f64,
    pub relative_error: f64,
    pub kl_divergence: f64,
    pub wall_time: f64,
    pub warnings: Vec<String>,
}
