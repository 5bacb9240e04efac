//! Trailing-average order forecaster and the frozen per-product statistics
//! derived from training data.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::ProductCatalog;
use crate::error::{check_finite, check_len, Error, Result};

pub const DEFAULT_WINDOW: usize = 28;

/// The most recent `window` periods of realized orders, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderHistory {
    products: usize,
    window: usize,
    periods: VecDeque<Vec<f64>>,
}

impl OrderHistory {
    pub fn new(products: usize, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("forecast window", "must be at least one period"));
        }
        Ok(OrderHistory {
            products,
            window,
            periods: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn clear(&mut self) {
        self.periods.clear();
    }

    pub fn retained(&self, product: usize) -> impl Iterator<Item = f64> + '_ {
        self.periods.iter().map(move |row| row[product])
    }

    pub fn push(&mut self, orders: &[f64]) -> Result<()> {
        check_len("orders", self.products, orders.len())?;
        check_finite("orders", orders)?;
        if let Some(i) = orders.iter().position(|&w| w < 0.0) {
            return Err(Error::invalid(
                "orders",
                format!("product {i}: negative quantity"),
            ));
        }
        if self.periods.len() == self.window {
            self.periods.pop_front();
        }
        self.periods.push_back(orders.to_vec());
        Ok(())
    }

    /// Mean of the retained periods, or zero before anything has been seen.
    pub fn mean(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.products];
        for row in &self.periods {
            for (s, w) in sums.iter_mut().zip(row) {
                *s += w;
            }
        }
        if !self.periods.is_empty() {
            let n = self.periods.len() as f64;
            sums.iter_mut().for_each(|s| *s /= n);
        }
        sums
    }

    pub fn forecast(&self, catalog: &ProductCatalog) -> ForecastSnapshot {
        ForecastSnapshot::new(self.mean(), catalog)
    }
}

/// Forecast orders for the coming period plus their catalog-weighted totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSnapshot {
    pub orders: Vec<f64>,
    pub total_volume: f64,
    pub total_weight: f64,
}

impl ForecastSnapshot {
    pub fn new(orders: Vec<f64>, catalog: &ProductCatalog) -> Self {
        let total_volume = catalog.volume_of(&orders);
        let total_weight = catalog.weight_of(&orders);
        ForecastSnapshot {
            orders,
            total_volume,
            total_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStd {
    pub value: f64,
    /// Set when fewer than two pairs were available.
    pub warm_up: bool,
}

/// Population standard deviation of `realized - forecast` over `(forecast, realized)` pairs.
pub fn forecast_error_std(pairs: &[(f64, f64)]) -> ErrorStd {
    if pairs.len() < 2 {
        return ErrorStd {
            value: 0.0,
            warm_up: true,
        };
    }
    let n = pairs.len() as f64;
    let errors = pairs.iter().map(|&(f, w)| w - f);
    let mean = errors.clone().sum::<f64>() / n;
    let var = errors.map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    ErrorStd {
        value: var.sqrt(),
        warm_up: false,
    }
}

/// Shelf-life statistic for every product in the catalog.
///
/// Each product's mean unexplained inventory loss per period is inverted and
/// min-max scaled across the catalog, so the slowest-decaying product maps to
/// 1 and the fastest to 0. A product that never lost stock gets 1, as does
/// every product when the inverses have zero range.
pub fn shelf_life_statistic(losses: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut inverses = Vec::with_capacity(losses.len());
    for (i, obs) in losses.iter().enumerate() {
        if obs.is_empty() {
            return Err(Error::invalid(
                "loss observations",
                format!("product {i} has none"),
            ));
        }
        check_finite("loss observations", obs)?;
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        inverses.push((mean > 0.0).then(|| 1.0 / mean));
    }
    let finite = inverses.iter().flatten();
    let lo = finite.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(inverses
        .into_iter()
        .map(|inv| match inv {
            None => 1.0,
            Some(_) if hi - lo <= 0.0 => 1.0,
            Some(v) => (v - lo) / (hi - lo),
        })
        .collect())
}
