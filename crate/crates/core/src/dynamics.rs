//! Inventory dynamics between replenishment instants.
//!
//! Each product decays at a proportional spoilage rate `a_i` and is drawn down
//! by a constant order rate `W_i` over one unit period:
//!
//! ```text
//! dx/dz = -a x - W
//! ```
//!
//! Inventory levels, replenishments and order quantities are all expressed as
//! fractions of the product's shelf capacity, so every level lives in `[0, 1]`.
//! When a product runs dry before the period ends, the remaining orders are
//! rejected and the level stays at zero.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

/// Upper-bound slack tolerated by [`apply_replenishment`].
pub const OVERFILL_TOLERANCE: f64 = 1e-9;

/// Relative slack used when auditing executed actions against the capacity limits.
pub const FEASIBILITY_RTOL: f64 = 1e-12;

/// Per-product metadata, stored column-wise so catalog dot products stay cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCatalog {
    pub ids: Vec<String>,
    /// Proportional spoilage rate `a_i` per unit period.
    pub spoilage: Vec<f64>,
    /// Volume of one full shelf of product `i` (the `v` multipliers).
    pub volume: Vec<f64>,
    /// Weight of one full shelf of product `i` (the `c` multipliers).
    pub weight: Vec<f64>,
    /// Out-of-stock threshold `tau_i` on the normalized level.
    pub threshold: Vec<f64>,
    /// Shelf-life statistic `l_i` in `[0, 1]`.
    pub shelf_life: Vec<f64>,
    /// Standard deviation of historical forecast errors, normalized units.
    pub forecast_std: Vec<f64>,
}

impl ProductCatalog {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.ids.len();
        if p == 0 {
            return Err(Error::invalid("catalog", "no products"));
        }
        check_len("catalog spoilage", p, self.spoilage.len())?;
        check_len("catalog volume", p, self.volume.len())?;
        check_len("catalog weight", p, self.weight.len())?;
        check_len("catalog threshold", p, self.threshold.len())?;
        check_len("catalog shelf life", p, self.shelf_life.len())?;
        check_len("catalog forecast std", p, self.forecast_std.len())?;
        for i in 0..p {
            let (a, v, c, tau) = (
                self.spoilage[i],
                self.volume[i],
                self.weight[i],
                self.threshold[i],
            );
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::invalid(
                    "catalog",
                    format!("product {i}: spoilage rate {a}"),
                ));
            }
            if !(v.is_finite() && v > 0.0) || !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(
                    "catalog",
                    format!("product {i}: volume {v} and weight {c} must be positive"),
                ));
            }
            if !(0.0..1.0).contains(&tau) {
                return Err(Error::invalid("catalog", format!("product {i}: threshold {tau}")));
            }
            let l = self.shelf_life[i];
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::invalid("catalog", format!("product {i}: shelf life {l}")));
            }
            let s = self.forecast_std[i];
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::invalid(
                    "catalog",
                    format!("product {i}: forecast std {s}"),
                ));
            }
        }
        Ok(())
    }

    pub fn volume_of(&self, quantities: &[f64]) -> f64 {
        dot(&self.volume, quantities)
    }

    pub fn weight_of(&self, quantities: &[f64]) -> f64 {
        dot(&self.weight, quantities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityConfig {
    pub v_max: f64,
    pub c_max: f64,
    /// Weight of the capacity-overshoot penalty in the per-product reward.
    pub alpha: f64,
    pub gamma: f64,
}

impl CapacityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::invalid("capacity", format!("v_max = {}", self.v_max)));
        }
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return Err(Error::invalid("capacity", format!("c_max = {}", self.c_max)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid("capacity", format!("alpha = {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("capacity", format!("gamma = {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryState {
    pub levels: Vec<f64>,
    pub period: usize,
}

impl InventoryState {
    pub fn uniform(p: usize, level: f64) -> Self {
        InventoryState {
            levels: vec![level; p],
            period: 0,
        }
    }
}

/// Result of propagating one product through one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductPeriod {
    pub end: f64,
    pub served: f64,
    pub waste: f64,
    pub rejected: f64,
    /// Time within the period at which the shelf ran empty, if it did.
    pub stockout_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodOutcome {
    pub end_levels: Vec<f64>,
    pub served: Vec<f64>,
    pub waste: Vec<f64>,
    pub rejected: Vec<f64>,
    pub empty: Vec<bool>,
    /// Capacity ratio of the requested (unprojected) actions for this period.
    pub rho: f64,
}

impl PeriodOutcome {
    pub fn len(&self) -> usize {
        self.end_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.end_levels.is_empty()
    }

    pub fn empty_fraction(&self) -> f64 {
        self.empty.iter().filter(|&&b| b).count() as f64 / self.len() as f64
    }

    pub fn mean_waste(&self) -> f64 {
        self.waste.iter().sum::<f64>() / self.len() as f64
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds the (already projected) replenishment to the pre-replenishment levels.
pub fn apply_replenishment(state: &InventoryState, u_con: &[f64]) -> Result<InventoryState> {
    check_len("replenishment", state.levels.len(), u_con.len())?;
    check_finite("replenishment", u_con)?;
    let mut levels = Vec::with_capacity(u_con.len());
    for (i, (&x, &u)) in state.levels.iter().zip(u_con).enumerate() {
        let next = x + u;
        if u < 0.0 || next > 1.0 + OVERFILL_TOLERANCE {
            return Err(Error::Overfill {
                product: i,
                level: next,
            });
        }
        levels.push(next.min(1.0));
    }
    Ok(InventoryState {
        levels,
        period: state.period,
    })
}

/// Closed-form evolution of one product over a unit period.
///
/// `x` is the post-replenishment level, `orders` the period's order quantity
/// (treated as a constant rate) and `spoilage` the decay rate. Spoiled stock
/// is recovered by mass balance, and nothing spoils after a stockout because
/// the shelf is empty.
pub fn propagate_product(spoilage: f64, x: f64, orders: f64) -> ProductPeriod {
    let a = spoilage;
    if orders == 0.0 {
        let end = x * (-a).exp();
        return ProductPeriod {
            end,
            served: 0.0,
            waste: (x - end).max(0.0),
            rejected: 0.0,
            stockout_at: None,
        };
    }
    if a == 0.0 {
        return if x >= orders {
            ProductPeriod {
                end: x - orders,
                served: orders,
                waste: 0.0,
                rejected: 0.0,
                stockout_at: None,
            }
        } else {
            ProductPeriod {
                end: 0.0,
                served: x,
                waste: 0.0,
                rejected: orders - x,
                stockout_at: Some(x / orders),
            }
        };
    }

    // 1 - e^{-a}, accurate for tiny rates.
    let decayed = -(-a).exp_m1();
    let end = x * (-a).exp() - orders / a * decayed;
    if end >= 0.0 {
        return ProductPeriod {
            end,
            served: orders,
            waste: (x - end - orders).max(0.0),
            rejected: 0.0,
            stockout_at: None,
        };
    }
    let z = ((a * x / orders).ln_1p() / a).min(1.0);
    let served = orders * z;
    ProductPeriod {
        end: 0.0,
        served,
        waste: (x - served).max(0.0),
        rejected: (orders - served).max(0.0),
        stockout_at: Some(z),
    }
}

/// Propagates every product from `t+` to the end of the period.
///
/// The returned outcome carries `rho = 0`; the caller fills it in from the
/// requested action vector.
pub fn propagate_period(
    state_plus: &InventoryState,
    orders: &[f64],
    catalog: &ProductCatalog,
) -> Result<PeriodOutcome> {
    let p = catalog.len();
    check_len("levels", p, state_plus.levels.len())?;
    check_len("orders", p, orders.len())?;
    check_finite("levels", &state_plus.levels)?;
    check_finite("orders", orders)?;
    if let Some(i) = orders.iter().position(|&w| w < 0.0) {
        return Err(Error::invalid(
            "orders",
            format!("product {i} has negative orders {}", orders[i]),
        ));
    }

    let mut out = PeriodOutcome {
        end_levels: Vec::with_capacity(p),
        served: Vec::with_capacity(p),
        waste: Vec::with_capacity(p),
        rejected: Vec::with_capacity(p),
        empty: Vec::with_capacity(p),
        rho: 0.0,
    };
    for i in 0..p {
        let r = propagate_product(catalog.spoilage[i], state_plus.levels[i], orders[i]);
        out.end_levels.push(r.end);
        out.served.push(r.served);
        out.waste.push(r.waste);
        out.rejected.push(r.rejected);
        // Levels only fall between replenishments, so checking the end of the
        // period catches any dip below the threshold.
        out.empty.push(r.end <= catalog.threshold[i]);
    }
    Ok(out)
}

/// Makes a desired action vector feasible.
///
/// Each request is first clipped to the free shelf space `1 - x_i`, then the
/// whole vector is scaled down uniformly until both the volume and the weight
/// budget hold.
pub fn project_actions(
    desired: &[f64],
    state: &InventoryState,
    catalog: &ProductCatalog,
    capacity: &CapacityConfig,
) -> Vec<f64> {
    let mut u: Vec<f64> = desired
        .iter()
        .zip(&state.levels)
        .map(|(&u, &x)| u.max(0.0).min((1.0 - x).max(0.0)))
        .collect();
    let volume = catalog.volume_of(&u);
    let weight = catalog.weight_of(&u);
    let mut scale = 1.0_f64;
    if volume > capacity.v_max {
        scale = scale.min(capacity.v_max / volume);
    }
    if weight > capacity.c_max {
        scale = scale.min(capacity.c_max / weight);
    }
    if scale < 1.0 {
        u.iter_mut().for_each(|q| *q *= scale);
    }
    u
}

/// Capacity ratio of a requested action vector: the larger of the requested
/// volume and weight, each relative to its budget.
pub fn compute_rho(desired: &[f64], catalog: &ProductCatalog, capacity: &CapacityConfig) -> f64 {
    let volume = catalog.volume_of(desired) / capacity.v_max;
    let weight = catalog.weight_of(desired) / capacity.c_max;
    volume.max(weight)
}

/// Describes the first constraint an executed action breaks, if any.
pub fn constraint_violation(
    u_con: &[f64],
    state: &InventoryState,
    catalog: &ProductCatalog,
    capacity: &CapacityConfig,
) -> Option<String> {
    for (i, (&u, &x)) in u_con.iter().zip(&state.levels).enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Some(format!("product {i}: action {u} outside [0, 1]"));
        }
        if x + u > 1.0 + FEASIBILITY_RTOL {
            return Some(format!("product {i}: level {x} + {u} exceeds the shelf"));
        }
    }
    let volume = catalog.volume_of(u_con);
    if volume > capacity.v_max * (1.0 + FEASIBILITY_RTOL) {
        return Some(format!("volume {volume} exceeds {}", capacity.v_max));
    }
    let weight = catalog.weight_of(u_con);
    if weight > capacity.c_max * (1.0 + FEASIBILITY_RTOL) {
        return Some(format!("weight {weight} exceeds {}", capacity.c_max));
    }
    None
}

/// Value at quantile `q` of an ascending slice, interpolating linearly
/// between the order statistics around rank `q (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Difference between the 95th and 5th percentile of the inventory levels.
pub fn percentile_spread(levels: &[f64]) -> Result<f64> {
    if levels.is_empty() {
        return Err(Error::invalid("levels", "percentile spread of an empty vector"));
    }
    check_finite("levels", levels)?;
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, 0.95) - quantile_sorted(&sorted, 0.05))
}

/// System-level reward of a period: one minus the out-of-stock fraction, the
/// mean wastage and the percentile spread of the end-of-period levels.
pub fn system_reward(outcome: &PeriodOutcome) -> f64 {
    let spread = percentile_spread(&outcome.end_levels).unwrap_or(0.0);
    1.0 - outcome.empty_fraction() - outcome.mean_waste() - spread
}

/// The same reward broken out per product, with the shared capacity-overshoot
/// penalty `alpha * max(rho - 1, 0)` subtracted from every entry.
pub fn per_product_rewards(outcome: &PeriodOutcome, rho: f64, alpha: f64) -> Vec<f64> {
    let spread = percentile_spread(&outcome.end_levels).unwrap_or(0.0);
    let common = spread + capacity_penalty(rho, alpha);
    outcome
        .empty
        .iter()
        .zip(&outcome.waste)
        .map(|(&empty, &waste)| 1.0 - f64::from(u8::from(empty)) - waste - common)
        .collect()
}

pub fn capacity_penalty(rho: f64, alpha: f64) -> f64 {
    alpha * (rho - 1.0).max(0.0)
}

/// Everything that happened in one closed-loop period.
#[derive(Debug, Clone)]
pub struct Transition {
    pub executed: Vec<f64>,
    pub outcome: PeriodOutcome,
    pub reward: f64,
    pub product_rewards: Vec<f64>,
    pub spread: f64,
}

/// Stateful wrapper that runs one period at a time: project, replenish,
/// propagate, score.
#[derive(Debug, Clone)]
pub struct InventoryEnv {
    catalog: ProductCatalog,
    capacity: CapacityConfig,
    state: InventoryState,
    /// Periods whose executed action broke a constraint; must stay zero.
    violations: usize,
}

impl InventoryEnv {
    pub fn new(catalog: ProductCatalog, capacity: CapacityConfig) -> Result<Self> {
        catalog.validate()?;
        capacity.validate()?;
        let p = catalog.len();
        Ok(InventoryEnv {
            catalog,
            capacity,
            state: InventoryState::uniform(p, 0.0),
            violations: 0,
        })
    }

    pub fn reset(&mut self, levels: Vec<f64>) -> Result<()> {
        check_len("initial levels", self.catalog.len(), levels.len())?;
        if levels.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("initial levels", "levels must lie in [0, 1]"));
        }
        self.state = InventoryState { levels, period: 0 };
        Ok(())
    }

    pub fn state(&self) -> &InventoryState {
        &self.state
    }

    pub fn catalog(&self) -> &ProductCatalog {
        &self.catalog
    }

    pub fn capacity(&self) -> &CapacityConfig {
        &self.capacity
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn step(&mut self, desired: &[f64], orders: &[f64]) -> Result<Transition> {
        check_len("desired actions", self.catalog.len(), desired.len())?;
        check_finite("desired actions", desired)?;
        let rho = compute_rho(desired, &self.catalog, &self.capacity);
        let executed = project_actions(desired, &self.state, &self.catalog, &self.capacity);
        if let Some(why) = constraint_violation(&executed, &self.state, &self.catalog, &self.capacity) {
            log::error!("period {}: infeasible executed action: {why}", self.state.period);
            self.violations += 1;
        }
        let plus = apply_replenishment(&self.state, &executed)?;
        let mut outcome = propagate_period(&plus, orders, &self.catalog)?;
        outcome.rho = rho;
        let spread = percentile_spread(&outcome.end_levels)?;
        let reward = system_reward(&outcome);
        let product_rewards = per_product_rewards(&outcome, rho, self.capacity.alpha);
        self.state = InventoryState {
            levels: outcome.end_levels.clone(),
            period: self.state.period + 1,
        };
        Ok(Transition {
            executed,
            outcome,
            reward,
            product_rewards,
            spread,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn catalog(spoilage: Vec<f64>, volume: Vec<f64>, weight: Vec<f64>) -> ProductCatalog {
        let p = spoilage.len();
        ProductCatalog {
            ids: (0..p).map(|i| format!("p{i}")).collect(),
            spoilage,
            volume,
            weight,
            threshold: vec![0.1; p],
            shelf_life: vec![0.5; p],
            forecast_std: vec![0.0; p],
        }
    }

    fn capacity(v_max: f64, c_max: f64) -> CapacityConfig {
        CapacityConfig {
            v_max,
            c_max,
            alpha: 1.0,
            gamma: 0.99,
        }
    }

    /// Forward Euler on dx/dz = -a x - W with the level pinned at zero.
    fn euler(a: f64, x: f64, w: f64, steps: usize) -> (f64, f64) {
        let h = 1.0 / steps as f64;
        let (mut level, mut served) = (x, 0.0);
        for _ in 0..steps {
            if level <= 0.0 {
                break;
            }
            let sold = (w * h).min(level);
            level -= a * level * h + sold;
            served += sold;
            level = level.max(0.0);
        }
        (level, served)
    }

    #[test]
    fn replenishment_adds_elementwise() {
        let s = InventoryState {
            levels: vec![0.2, 0.5],
            period: 3,
        };
        let next = apply_replenishment(&s, &[0.3, 0.0]).unwrap();
        assert_eq!(next.levels, vec![0.5, 0.5]);
        assert_eq!(next.period, 3);

        let zero = InventoryState::uniform(4, 0.0);
        assert_eq!(apply_replenishment(&zero, &[0.0; 4]).unwrap(), zero);
    }

    #[test]
    fn replenishment_rejects_overfill() {
        let s = InventoryState {
            levels: vec![0.9],
            period: 0,
        };
        assert!(matches!(
            apply_replenishment(&s, &[0.2]),
            Err(Error::Overfill { product: 0, .. })
        ));
    }

    #[test]
    fn decay_without_stockout_matches_closed_form_and_euler() {
        let r = propagate_product(0.1, 1.0, 0.2);
        let expected = (-0.1f64).exp() - 2.0 * (1.0 - (-0.1f64).exp());
        assert!((r.end - expected).abs() < 1e-15);
        assert!((r.end - 0.714_512_254_107_878_6).abs() < 1e-12);
        let (oracle, _) = euler(0.1, 1.0, 0.2, 1_000_000);
        assert!((r.end - oracle).abs() < 1e-4);
        assert_eq!(r.stockout_at, None);
        assert_eq!(r.served, 0.2);
    }

    #[test]
    fn no_dynamics_without_spoilage_or_orders() {
        let r = propagate_product(0.0, 0.5, 0.0);
        assert_eq!((r.end, r.waste, r.served), (0.5, 0.0, 0.0));
    }

    #[test]
    fn linear_stockout_rejects_remaining_orders() {
        let r = propagate_product(0.0, 0.1, 1.0);
        assert_eq!(r.stockout_at, Some(0.1));
        assert!((r.served - 0.1).abs() < 1e-15);
        assert_eq!(r.end, 0.0);
        assert!((r.rejected - 0.9).abs() < 1e-15);
        let (oracle_end, oracle_served) = euler(0.0, 0.1, 1.0, 1_000_000);
        assert!(oracle_end.abs() < 1e-4 && (oracle_served - 0.1).abs() < 1e-4);
    }

    #[test]
    fn perishable_stockout_time() {
        let (a, x, w) = (0.3, 0.2, 0.5);
        let r = propagate_product(a, x, w);
        let z = (1.0 / a) * (1.0 + a * x / w).ln();
        assert!((r.stockout_at.unwrap() - z).abs() < 1e-14);
        assert!((x - r.end - r.served - r.waste).abs() < 1e-12);
        let (oracle_end, oracle_served) = euler(a, x, w, 1_000_000);
        assert!(oracle_end.abs() < 1e-4);
        assert!((oracle_served - r.served).abs() < 1e-4);
    }

    #[test]
    fn tiny_spoilage_matches_linear_branch() {
        for &(x, w) in &[(0.5, 0.2), (0.1, 0.4), (1.0, 0.0), (0.3, 0.3)] {
            let lin = propagate_product(0.0, x, w);
            let tiny = propagate_product(1e-12, x, w);
            assert!((lin.end - tiny.end).abs() < 1e-6, "{x} {w}");
            assert!((lin.served - tiny.served).abs() < 1e-6);
            assert!((lin.waste - tiny.waste).abs() < 1e-6);
        }
    }

    #[test]
    fn propagate_period_rejects_bad_orders() {
        let cat = catalog(vec![0.1], vec![1.0], vec![1.0]);
        let s = InventoryState::uniform(1, 0.5);
        assert!(propagate_period(&s, &[-0.1], &cat).is_err());
        assert!(propagate_period(&s, &[f64::NAN], &cat).is_err());
        assert!(propagate_period(&s, &[0.1, 0.1], &cat).is_err());
    }

    #[test]
    fn empty_flags_use_threshold() {
        let cat = catalog(vec![0.0, 0.0], vec![1.0; 2], vec![1.0; 2]);
        let s = InventoryState {
            levels: vec![0.3, 0.3],
            period: 0,
        };
        let out = propagate_period(&s, &[0.25, 0.1], &cat).unwrap();
        assert_eq!(out.empty, vec![true, false]);
    }

    #[test]
    fn projection_scales_to_volume_budget() {
        let cat = catalog(vec![0.0; 2], vec![1.0, 1.0], vec![1.0, 1.0]);
        let cap = capacity(0.5, 100.0);
        let s = InventoryState::uniform(2, 0.0);
        let u = project_actions(&[0.5, 0.5], &s, &cat, &cap);
        assert_eq!(u, vec![0.25, 0.25]);
        assert!((cat.volume_of(&u) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn projection_identity_and_zero() {
        let cat = catalog(vec![0.0; 3], vec![1.0, 2.0, 0.5], vec![1.0, 1.0, 3.0]);
        let cap = capacity(10.0, 10.0);
        let s = InventoryState {
            levels: vec![0.1, 0.2, 0.3],
            period: 0,
        };
        assert_eq!(project_actions(&[0.0; 3], &s, &cat, &cap), vec![0.0; 3]);
        let u = vec![0.4, 0.5, 0.6];
        assert_eq!(project_actions(&u, &s, &cat, &cap), u);
    }

    #[test]
    fn projection_clips_to_free_shelf() {
        let cat = catalog(vec![0.0; 2], vec![1.0; 2], vec![1.0; 2]);
        let cap = capacity(10.0, 10.0);
        let s = InventoryState {
            levels: vec![0.7, 1.0],
            period: 0,
        };
        let u = project_actions(&[0.5, 0.5], &s, &cat, &cap);
        assert!((u[0] - 0.3).abs() < 1e-15);
        assert_eq!(u[1], 0.0);
    }

    #[test]
    fn rho_examples() {
        let cat = catalog(vec![0.0; 2], vec![2.0, 1.0], vec![1.0, 1.0]);
        let cap = capacity(1.0, 3.0);
        assert_eq!(compute_rho(&[0.0, 0.0], &cat, &cap), 0.0);
        assert_eq!(compute_rho(&[0.5, 1.0], &cat, &cap), 2.0);
        let cap = capacity(2.0, 3.0);
        assert_eq!(compute_rho(&[0.5, 1.0], &cat, &cap), 1.0);
    }

    #[test]
    fn spread_examples() {
        assert_eq!(percentile_spread(&[0.4; 7]).unwrap(), 0.0);
        let even: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        assert!((percentile_spread(&even).unwrap() - 0.90).abs() < 1e-12);
        // ranks 0.95 and 0.05 on two points: 0.1 + 0.9 * 0.8 = 0.72 apart.
        assert!((percentile_spread(&[0.9, 0.1]).unwrap() - 0.72).abs() < 1e-15);
        assert_eq!(percentile_spread(&[0.3]).unwrap(), 0.0);
        assert!(percentile_spread(&[]).is_err());
    }

    fn outcome(end: Vec<f64>, empty: Vec<bool>, waste: Vec<f64>) -> PeriodOutcome {
        let p = end.len();
        PeriodOutcome {
            end_levels: end,
            served: vec![0.0; p],
            waste,
            rejected: vec![0.0; p],
            empty,
            rho: 0.0,
        }
    }

    #[test]
    fn system_reward_examples() {
        let perfect = outcome(vec![0.5; 4], vec![false; 4], vec![0.0; 4]);
        assert_eq!(system_reward(&perfect), 1.0);

        let levels = vec![0.3, 0.3, 0.5, 0.5];
        let spread = percentile_spread(&levels).unwrap();
        let o = outcome(levels, vec![true, false, false, false], vec![0.1, 0.1, 0.1, 0.1]);
        let expected = 1.0 - 0.25 - 0.1 - spread;
        assert!((system_reward(&o) - expected).abs() < 1e-15);

        let all_empty = outcome(vec![0.0; 3], vec![true; 3], vec![0.05; 3]);
        assert!((system_reward(&all_empty) - (1.0 - 1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn system_reward_hand_arithmetic() {
        // Four products, one empty, total waste 0.4, spread 0.2.
        let levels = vec![0.4, 0.4, 0.6, 0.6];
        // linear interpolation: P05 at rank 0.15 -> 0.4, P95 at rank 2.85 -> 0.6
        assert!((percentile_spread(&levels).unwrap() - 0.2).abs() < 1e-15);
        let o = outcome(levels, vec![true, false, false, false], vec![0.1, 0.1, 0.1, 0.1]);
        assert!((system_reward(&o) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn product_reward_examples() {
        let levels = vec![0.4, 0.4, 0.6, 0.6];
        let o = outcome(levels, vec![true, false, false, false], vec![0.1, 0.0, 0.0, 0.0]);
        let r = per_product_rewards(&o, 1.5, 1.0);
        assert!((r[0] - (-0.8)).abs() < 1e-15);

        let r0 = per_product_rewards(&o, 7.0, 0.0);
        let r1 = per_product_rewards(&o, 0.5, 0.0);
        assert_eq!(r0, r1);

        let mean = r1.iter().sum::<f64>() / 4.0;
        assert!((mean - system_reward(&o)).abs() < 1e-12);
    }

    #[test]
    fn env_step_audits_feasibility() {
        let cat = catalog(vec![0.05; 3], vec![1.0, 2.0, 1.0], vec![1.0, 1.0, 2.0]);
        let mut env = InventoryEnv::new(cat, capacity(0.3, 0.3)).unwrap();
        env.reset(vec![0.5; 3]).unwrap();
        let t = env.step(&[1.0, 1.0, 1.0], &[0.1, 0.1, 0.1]).unwrap();
        assert_eq!(env.violations(), 0);
        assert!(t.outcome.rho > 1.0);
        assert_eq!(env.state().period, 1);
        assert_eq!(env.state().levels, t.outcome.end_levels);
    }
}
