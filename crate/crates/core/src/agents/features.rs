use serde::{Deserialize, Serialize};

use crate::dynamics::{CapacityConfig, InventoryState, ProductCatalog};
use crate::error::{check_finite, check_len, Result};
use crate::forecast::ForecastSnapshot;

pub const FEATURE_COUNT: usize = 8;

/// Per-product input to every agent, in this order: inventory level, forecast
/// orders, forecast-error std, unit volume, unit weight, shelf life, total
/// forecast volume, total forecast weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features(pub [f64; FEATURE_COUNT]);

impl Features {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }

    pub fn level(&self) -> f64 {
        self.0[0]
    }

    pub fn forecast(&self) -> f64 {
        self.0[1]
    }
}

/// Divisors that bring every feature to roughly unit scale.
///
/// Levels, forecasts and the error std are already shelf fractions; the unit
/// volume and weight are divided by their catalog maxima and the aggregate
/// forecast totals by the transport budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub volume: f64,
    pub weight: f64,
    pub v_max: f64,
    pub c_max: f64,
}

impl FeatureScale {
    pub fn new(catalog: &ProductCatalog, capacity: &CapacityConfig) -> Self {
        let max = |v: &[f64]| v.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        FeatureScale {
            volume: max(&catalog.volume),
            weight: max(&catalog.weight),
            v_max: capacity.v_max,
            c_max: capacity.c_max,
        }
    }

    pub fn apply(&self, raw: &Features) -> Features {
        let mut f = raw.0;
        f[3] /= self.volume;
        f[4] /= self.weight;
        f[6] /= self.v_max;
        f[7] /= self.c_max;
        Features(f)
    }
}

/// Unscaled feature vectors for every product.
pub fn raw_features(
    state: &InventoryState,
    forecast: &ForecastSnapshot,
    catalog: &ProductCatalog,
) -> Result<Vec<Features>> {
    let p = catalog.len();
    check_len("levels", p, state.levels.len())?;
    check_len("forecast", p, forecast.orders.len())?;
    check_finite("levels", &state.levels)?;
    check_finite("forecast", &forecast.orders)?;
    check_finite("forecast totals", &[forecast.total_volume, forecast.total_weight])?;
    Ok((0..p)
        .map(|i| {
            Features([
                state.levels[i],
                forecast.orders[i],
                catalog.forecast_std[i],
                catalog.volume[i],
                catalog.weight[i],
                catalog.shelf_life[i],
                forecast.total_volume,
                forecast.total_weight,
            ])
        })
        .collect())
}

pub fn build_features(
    state: &InventoryState,
    forecast: &ForecastSnapshot,
    catalog: &ProductCatalog,
    scale: &FeatureScale,
) -> Result<Vec<Features>> {
    Ok(raw_features(state, forecast, catalog)?
        .iter()
        .map(|f| scale.apply(f))
        .collect())
}
