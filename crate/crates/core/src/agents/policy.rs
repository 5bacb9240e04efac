//! Action grid, output-to-distribution mapping and the distance-smoothed
//! actor target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantized replenishment levels the discrete agents choose among.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    values: Vec<f64>,
}

impl ActionGrid {
    /// `n` evenly spaced levels from 0 to 1 inclusive.
    pub fn uniform(n: usize) -> Result<Self> {
        match n {
            0 => Err(Error::invalid("action grid", "needs at least one action")),
            1 => Self::new(vec![0.0]),
            _ => Self::new((0..n).map(|k| k as f64 / (n - 1) as f64).collect()),
        }
    }

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("action grid", "needs at least one action"));
        }
        if values[0] < 0.0 || values[values.len() - 1] > 1.0 {
            return Err(Error::invalid("action grid", "values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "action grid",
                "values must be strictly increasing",
            ));
        }
        Ok(ActionGrid { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Explore,
    Greedy,
}

/// Normalizes non-negative activations into a distribution, mixing in a
/// uniform share `floor`. Falls back to uniform when nothing is positive.
pub fn action_distribution(activations: &[f64], floor: f64) -> Vec<f64> {
    let n = activations.len() as f64;
    let total: f64 = activations.iter().map(|a| a.max(0.0)).sum();
    if !(total > 0.0 && total.is_finite()) {
        return vec![1.0 / n; activations.len()];
    }
    activations
        .iter()
        .map(|a| (1.0 - floor) * a.max(0.0) / total + floor / n)
        .collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Increment applied to action `k` when action `chosen` earned advantage `delta`.
pub fn smoothing_kernel(k: usize, chosen: usize, delta: f64, q: f64) -> f64 {
    delta / (q * (k.abs_diff(chosen) as f64 + 1.0))
}

/// Target distribution for the smoothed actor update.
///
/// The activations are first normalized to a distribution. Every action then
/// receives the advantage scaled by `1 / (q (|k - chosen| + 1))`, negative
/// entries are clamped to zero and the vector is renormalized to sum to one.
pub fn smoothed_target(activations: &[f64], chosen: usize, delta: f64, q: f64) -> Result<Vec<f64>> {
    if activations.is_empty() {
        return Err(Error::invalid("smoothed target", "no actions"));
    }
    if chosen >= activations.len() {
        return Err(Error::invalid(
            "smoothed target",
            format!("action {chosen} out of range"),
        ));
    }
    if !(q > 0.0 && q.is_finite()) || !delta.is_finite() {
        return Err(Error::invalid(
            "smoothed target",
            format!("q = {q}, delta = {delta}"),
        ));
    }
    let base = action_distribution(activations, 0.0);
    let raised: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(k, a)| (a + smoothing_kernel(k, chosen, delta, q)).max(0.0))
        .collect();
    let total: f64 = raised.iter().sum();
    if total <= 0.0 {
        return Ok(vec![1.0 / activations.len() as f64; activations.len()]);
    }
    Ok(raised.into_iter().map(|t| t / total).collect())
}
