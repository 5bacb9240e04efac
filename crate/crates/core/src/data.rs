//! Order streams, product metadata and the train/test split.
//!
//! Order logs are kept aggregated as per-period unit counts. Replenishment
//! happens four times a day, so a period is a six-hour slot.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dynamics::{CapacityConfig, ProductCatalog};
use crate::error::{Error, Result};

pub const PERIODS_PER_DAY: usize = 4;
pub const HOURS_PER_PERIOD: u32 = 6;
pub const DEFAULT_DAYS: usize = 349;
pub const DEFAULT_TIGHTNESS: f64 = 0.9;
pub const DEFAULT_THRESHOLD: f64 = 0.1;

pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 6).expect("valid date")
}

/// Per-period order counts for a fixed list of products.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderLog {
    pub products: Vec<String>,
    pub start: NaiveDate,
    /// `counts[period][product]`: units ordered in that six-hour slot.
    pub counts: Vec<Vec<u32>>,
}

impl OrderLog {
    pub fn empty(products: Vec<String>, start: NaiveDate, periods: usize) -> Self {
        let p = products.len();
        OrderLog {
            products,
            start,
            counts: vec![vec![0; p]; periods],
        }
    }

    pub fn periods(&self) -> usize {
        self.counts.len()
    }

    pub fn total_orders(&self) -> u64 {
        self.counts.iter().flatten().map(|&c| u64::from(c)).sum()
    }

    pub fn period_start(&self, period: usize) -> DateTime<Utc> {
        let day = self.start + Duration::days((period / PERIODS_PER_DAY) as i64);
        let hour = (period % PERIODS_PER_DAY) as u32 * HOURS_PER_PERIOD;
        day.and_time(NaiveTime::from_hms_opt(hour, 0, 0).expect("valid hour"))
            .and_utc()
    }

    /// Period index of a timestamp, if it falls inside the horizon.
    pub fn period_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let day = (ts.date_naive() - self.start).num_days();
        if day < 0 {
            return None;
        }
        let period = day as usize * PERIODS_PER_DAY + (ts.hour() / HOURS_PER_PERIOD) as usize;
        (period < self.periods()).then_some(period)
    }

    /// Orders as fractions of each product's shelf capacity.
    pub fn normalized(&self, shelf_units: &[f64]) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                row.iter()
                    .zip(shelf_units)
                    .map(|(&c, s)| f64::from(c) / s)
                    .collect()
            })
            .collect()
    }

    /// One `product_id,timestamp` row per ordered unit, stamped at the start
    /// of its period.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["product_id", "timestamp"])?;
        for (t, row) in self.counts.iter().enumerate() {
            let ts = self
                .period_start(t)
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
            for (i, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    w.write_record([self.products[i].as_str(), ts.as_str()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_periods: usize,
    pub test_periods: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_periods: 900,
            test_periods: 496,
        }
    }
}

/// Contiguous prefix/suffix split of a log.
pub fn split(log: &OrderLog, config: &SplitConfig) -> Result<(OrderLog, OrderLog)> {
    if config.train_periods == 0 {
        return Err(Error::invalid("split", "training split is empty"));
    }
    // Logs start at midnight, so the test log must too.
    if !config.train_periods.is_multiple_of(PERIODS_PER_DAY) {
        return Err(Error::invalid(
            "split",
            format!(
                "{} training periods is not a whole number of days",
                config.train_periods
            ),
        ));
    }
    if config.train_periods + config.test_periods != log.periods() {
        return Err(Error::invalid(
            "split",
            format!(
                "{} + {} periods does not cover the {}-period log",
                config.train_periods,
                config.test_periods,
                log.periods()
            ),
        ));
    }
    let (head, tail) = log.counts.split_at(config.train_periods);
    let train = OrderLog {
        products: log.products.clone(),
        start: log.start,
        counts: head.to_vec(),
    };
    let test = OrderLog {
        products: log.products.clone(),
        start: log.start + Duration::days((config.train_periods / PERIODS_PER_DAY) as i64),
        counts: tail.to_vec(),
    };
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub products: usize,
    /// Mean units per period before multipliers. A single value applies to every product.
    pub base_rates: Vec<f64>,
    /// Multipliers indexed by day of week, 0 = Sunday.
    pub day_of_week: [f64; 7],
    pub time_of_day: [f64; PERIODS_PER_DAY],
    pub outlier_prob: f64,
    pub outlier_scale: (f64, f64),
    pub days: usize,
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            products: 220,
            base_rates: vec![6.0],
            day_of_week: [1.15, 0.9, 0.85, 0.9, 0.95, 1.05, 1.2],
            time_of_day: [0.3, 1.2, 1.6, 0.9],
            outlier_prob: 0.01,
            outlier_scale: (3.0, 6.0),
            days: DEFAULT_DAYS,
            start: default_start(),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: String| Err(Error::invalid("generator config", r));
        if self.products == 0 {
            return bad("no products".into());
        }
        if self.base_rates.len() != 1 && self.base_rates.len() != self.products {
            return bad(format!(
                "{} base rates for {} products",
                self.base_rates.len(),
                self.products
            ));
        }
        let all = self
            .base_rates
            .iter()
            .chain(&self.day_of_week)
            .chain(&self.time_of_day);
        if all.clone().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("rates and multipliers must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return bad(format!("outlier probability {}", self.outlier_prob));
        }
        let (lo, hi) = self.outlier_scale;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("outlier scale ({lo}, {hi})"));
        }
        Ok(())
    }

    pub fn base_rate(&self, product: usize) -> f64 {
        if self.base_rates.len() == 1 {
            self.base_rates[0]
        } else {
            self.base_rates[product]
        }
    }

    pub fn product_ids(&self) -> Vec<String> {
        let width = self.products.to_string().len().max(3);
        (0..self.products).map(|i| format!("P{i:0width$}")).collect()
    }
}

/// Seeded Poisson order counts with weekly and daily seasonality and rare
/// multiplicative spikes.
pub fn generate_orders(config: &GeneratorConfig) -> Result<OrderLog> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = OrderLog::empty(config.product_ids(), config.start, config.days * PERIODS_PER_DAY);
    for t in 0..log.periods() {
        let date = config.start + Duration::days((t / PERIODS_PER_DAY) as i64);
        let seasonal = config.day_of_week[date.weekday().num_days_from_sunday() as usize]
            * config.time_of_day[t % PERIODS_PER_DAY];
        for i in 0..config.products {
            let mut rate = config.base_rate(i) * seasonal;
            // Always draw the outlier coin so the stream layout does not depend on the rates.
            let spike: f64 = rng.random();
            if spike < config.outlier_prob {
                rate *= rng.random_range(config.outlier_scale.0..=config.outlier_scale.1);
            }
            log.counts[t][i] = if rate > 0.0 {
                let draw: f64 = Poisson::new(rate)
                    .map_err(|e| Error::invalid("generator rate", e.to_string()))?
                    .sample(&mut rng);
                draw as u32
            } else {
                0
            };
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub start: NaiveDate,
    pub days: usize,
    /// Seed for the first-order dates and time-of-day slots of the source schema.
    pub seed: u64,
    /// Fixes the product list and its order; otherwise the sorted set of ids seen.
    pub products: Option<Vec<String>>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            start: default_start(),
            days: DEFAULT_DAYS,
            seed: 0,
            products: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub log: OrderLog,
    pub warnings: Vec<String>,
}

enum Schema {
    Timestamped,
    Source,
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, &path.display().to_string(), options)
}

/// Reads either `product_id,timestamp` rows or the customer-level source
/// schema `customer_id,product_id,day_of_week,days_since_prior`.
///
/// In the source schema a customer's rows are chronological, and consecutive
/// rows sharing `(day_of_week, days_since_prior)` form one order. Each
/// customer's first order is placed on a uniformly drawn date in the horizon
/// with the recorded weekday (0 = Sunday); later orders follow by
/// `days_since_prior`. The six-hour slot of every order is drawn uniformly.
pub fn ingest_reader<R: Read>(reader: R, name: &str, options: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let parse_err = |line: u64, reason: String| Error::Parse {
        path: name.to_string(),
        line,
        reason,
    };

    let mut warnings = Vec::new();
    let header = match records.next() {
        None => {
            warnings.push(format!("{name}: empty file"));
            let products = options.products.clone().unwrap_or_default();
            return Ok(Ingested {
                log: OrderLog::empty(products, options.start, options.days * PERIODS_PER_DAY),
                warnings,
            });
        }
        Some(h) => h?,
    };
    let fields: Vec<&str> = header.iter().collect();
    let schema = match fields.as_slice() {
        ["product_id", "timestamp"] => Schema::Timestamped,
        ["customer_id", "product_id", "day_of_week", "days_since_prior"] => Schema::Source,
        other => return Err(parse_err(1, format!("unrecognized header {other:?}"))),
    };

    // (product, period) events before the product index is known.
    let mut events: Vec<(String, Option<usize>)> = Vec::new();
    let horizon = OrderLog::empty(Vec::new(), options.start, options.days * PERIODS_PER_DAY);
    let mut dropped = 0usize;

    match schema {
        Schema::Timestamped => {
            for rec in records {
                let rec = rec?;
                let line = rec.position().map_or(0, |p| p.line());
                if rec.len() != 2 {
                    return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
                }
                let ts = DateTime::parse_from_rfc3339(&rec[1])
                    .map_err(|e| parse_err(line, format!("timestamp '{}': {e}", &rec[1])))?
                    .with_timezone(&Utc);
                let period = horizon.period_of(ts);
                dropped += usize::from(period.is_none());
                events.push((rec[0].to_string(), period));
            }
        }
        Schema::Source => {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            // customer -> (date of the current order, its key, its slot)
            let mut current: BTreeMap<String, (NaiveDate, (u32, Option<u32>), u32)> = BTreeMap::new();
            for rec in records {
                let rec = rec?;
                let line = rec.position().map_or(0, |p| p.line());
                if rec.len() != 4 {
                    return Err(parse_err(line, format!("expected 4 fields, found {}", rec.len())));
                }
                let customer = rec[0].to_string();
                let product = rec[1].to_string();
                let dow: u32 = rec[2]
                    .parse()
                    .ok()
                    .filter(|d| *d < 7)
                    .ok_or_else(|| parse_err(line, format!("day_of_week '{}'", &rec[2])))?;
                let gap: Option<u32> = if rec[3].is_empty() {
                    None
                } else {
                    Some(
                        rec[3]
                            .parse::<f64>()
                            .ok()
                            .filter(|g| g.is_finite() && *g >= 0.0)
                            .ok_or_else(|| parse_err(line, format!("days_since_prior '{}'", &rec[3])))?
                            as u32,
                    )
                };
                let key = (dow, gap);
                let (date, slot) = match current.get(&customer) {
                    Some((date, prev_key, slot)) if *prev_key == key => (*date, *slot),
                    Some((date, _, _)) => {
                        let next = *date + Duration::days(i64::from(gap.unwrap_or(0)));
                        (next, rng.random_range(0..PERIODS_PER_DAY as u32))
                    }
                    None => {
                        let date = random_date_on_weekday(options, dow, &mut rng).ok_or_else(|| {
                            parse_err(line, format!("no date with weekday {dow} in the horizon"))
                        })?;
                        (date, rng.random_range(0..PERIODS_PER_DAY as u32))
                    }
                };
                current.insert(customer, (date, key, slot));
                let ts = date
                    .and_time(NaiveTime::from_hms_opt(slot * HOURS_PER_PERIOD, 0, 0).expect("valid hour"))
                    .and_utc();
                let period = horizon.period_of(ts);
                dropped += usize::from(period.is_none());
                events.push((product, period));
            }
        }
    }

    if dropped > 0 {
        warnings.push(format!(
            "{name}: {dropped} orders fall outside the horizon and were dropped"
        ));
    }
    let products = match &options.products {
        Some(list) => list.clone(),
        None => events
            .iter()
            .map(|(p, _)| p.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let index: BTreeMap<&str, usize> = products
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let mut log = OrderLog::empty(products.clone(), options.start, options.days * PERIODS_PER_DAY);
    let mut unknown = 0usize;
    for (product, period) in &events {
        let (Some(&i), Some(t)) = (index.get(product.as_str()), period) else {
            unknown += usize::from(period.is_some());
            continue;
        };
        log.counts[*t][i] += 1;
    }
    if unknown > 0 {
        warnings.push(format!(
            "{name}: {unknown} orders for products outside the product list were dropped"
        ));
    }
    Ok(Ingested { log, warnings })
}

fn random_date_on_weekday<R: Rng + ?Sized>(
    options: &IngestOptions,
    dow: u32,
    rng: &mut R,
) -> Option<NaiveDate> {
    let candidates: Vec<NaiveDate> = (0..options.days)
        .map(|d| options.start + Duration::days(d as i64))
        .filter(|d| d.weekday().num_days_from_sunday() == dow)
        .collect();
    if candidates.is_empty() {
        return None;
    }
    Some(candidates[rng.random_range(0..candidates.len())])
}

/// One row of the metadata CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeta {
    pub product_id: String,
    pub label: String,
    pub unit_volume: f64,
    pub unit_weight: f64,
    pub shelf_capacity_units: f64,
    pub spoilage_rate: f64,
    pub threshold: f64,
}

pub fn read_metadata(path: &Path) -> Result<Vec<ProductMeta>> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: ProductMeta = rec.map_err(|e| Error::Parse {
            path: name.clone(),
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_metadata(path: &Path, rows: &[ProductMeta]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Catalog for `products` in that order, plus each product's shelf capacity
/// in units. Volumes and weights become per-shelf multipliers so they apply
/// directly to normalized quantities. The forecast-error std and shelf-life
/// statistic are left at zero and one until estimated from training data.
pub fn assign_metadata(products: &[String], meta: &[ProductMeta]) -> Result<(ProductCatalog, Vec<f64>)> {
    let mut by_id: BTreeMap<&str, &ProductMeta> = BTreeMap::new();
    for row in meta {
        if by_id.insert(row.product_id.as_str(), row).is_some() {
            return Err(Error::invalid(
                "metadata",
                format!("duplicate product id '{}'", row.product_id),
            ));
        }
    }
    let mut seen = HashSet::new();
    let p = products.len();
    let mut catalog = ProductCatalog {
        ids: Vec::with_capacity(p),
        spoilage: Vec::with_capacity(p),
        volume: Vec::with_capacity(p),
        weight: Vec::with_capacity(p),
        threshold: Vec::with_capacity(p),
        shelf_life: vec![1.0; p],
        forecast_std: vec![0.0; p],
    };
    let mut shelf_units = Vec::with_capacity(p);
    for id in products {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid("metadata", format!("duplicate product id '{id}'")));
        }
        let row = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::invalid("metadata", format!("no metadata for product '{id}'")))?;
        if !(row.unit_volume > 0.0 && row.unit_weight > 0.0 && row.shelf_capacity_units > 0.0) {
            return Err(Error::invalid(
                "metadata",
                format!("product '{id}': volume, weight and shelf capacity must be positive"),
            ));
        }
        catalog.ids.push(id.clone());
        catalog.spoilage.push(row.spoilage_rate);
        catalog.volume.push(row.unit_volume * row.shelf_capacity_units);
        catalog.weight.push(row.unit_weight * row.shelf_capacity_units);
        catalog.threshold.push(row.threshold);
        shelf_units.push(row.shelf_capacity_units);
    }
    catalog.validate()?;
    Ok((catalog, shelf_units))
}

/// Random but plausible metadata for generated products: spoilage rates
/// log-uniform in `[0.005, 0.1]`, thresholds at 0.1.
pub fn synthetic_metadata(products: &[String], seed: u64) -> Vec<ProductMeta> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (0.005f64.ln(), 0.1f64.ln());
    products
        .iter()
        .enumerate()
        .map(|(i, id)| ProductMeta {
            product_id: id.clone(),
            label: format!("synthetic-{i}"),
            unit_volume: rng.random_range(0.5..3.0),
            unit_weight: rng.random_range(0.2..2.0),
            shelf_capacity_units: f64::from(rng.random_range(40u32..=100)),
            spoilage_rate: rng.random_range(lo..hi).exp(),
            threshold: DEFAULT_THRESHOLD,
        })
        .collect()
}

/// Transport budgets set to `tightness` times the mean per-period volume and
/// weight of the (normalized) training orders.
pub fn calibrate_capacity(
    orders: &[Vec<f64>],
    catalog: &ProductCatalog,
    tightness: f64,
    alpha: f64,
    gamma: f64,
) -> Result<CapacityConfig> {
    if orders.is_empty() {
        return Err(Error::invalid("capacity calibration", "no training periods"));
    }
    if !(tightness > 0.0 && tightness.is_finite()) {
        return Err(Error::invalid(
            "capacity calibration",
            format!("tightness {tightness}"),
        ));
    }
    let n = orders.len() as f64;
    let volume = orders.iter().map(|w| catalog.volume_of(w)).sum::<f64>() / n;
    let weight = orders.iter().map(|w| catalog.weight_of(w)).sum::<f64>() / n;
    if volume <= 0.0 || weight <= 0.0 {
        return Err(Error::invalid(
            "capacity calibration",
            "training log has no orders",
        ));
    }
    let capacity = CapacityConfig {
        v_max: tightness * volume,
        c_max: tightness * weight,
        alpha,
        gamma,
    };
    capacity.validate()?;
    Ok(capacity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(products: usize, days: usize) -> GeneratorConfig {
        GeneratorConfig {
            products,
            days,
            seed: 17,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = small_config(5, 20);
        assert_eq!(generate_orders(&cfg).unwrap(), generate_orders(&cfg).unwrap());
        let other = GeneratorConfig {
            seed: 18,
            ..cfg.clone()
        };
        assert_ne!(generate_orders(&cfg).unwrap(), generate_orders(&other).unwrap());
    }

    #[test]
    fn zero_rate_gives_empty_log() {
        let cfg = GeneratorConfig {
            base_rates: vec![0.0],
            ..small_config(3, 10)
        };
        assert_eq!(generate_orders(&cfg).unwrap().total_orders(), 0);
    }

    #[test]
    fn flat_generator_mean_matches_rate() {
        let rate = 5.0;
        let cfg = GeneratorConfig {
            base_rates: vec![rate],
            day_of_week: [1.0; 7],
            time_of_day: [1.0; 4],
            outlier_prob: 0.0,
            ..small_config(1, DEFAULT_DAYS)
        };
        let log = generate_orders(&cfg).unwrap();
        assert_eq!(log.periods(), 1396);
        let n = log.periods() as f64;
        let mean = log.total_orders() as f64 / n;
        // Poisson: the sample mean has standard error sqrt(rate / n).
        let sigma = (rate / n).sqrt();
        assert!((mean - rate).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn split_boundaries() {
        let mut log = OrderLog::empty(vec!["a".into()], default_start(), 1396);
        log.counts[899][0] = 3;
        log.counts[900][0] = 5;
        let (train, test) = split(&log, &SplitConfig::default()).unwrap();
        assert_eq!((train.periods(), test.periods()), (900, 496));
        assert_eq!(train.counts[899][0], 3);
        assert_eq!(test.counts[0][0], 5);
        assert_eq!(test.period_start(0), log.period_start(900));

        let bad = SplitConfig {
            train_periods: 0,
            test_periods: 1396,
        };
        assert!(split(&log, &bad).is_err());
        let short = SplitConfig {
            train_periods: 900,
            test_periods: 400,
        };
        assert!(split(&log, &short).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let cfg = small_config(4, 6);
        let log = generate_orders(&cfg).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let opts = IngestOptions {
            days: 6,
            products: Some(log.products.clone()),
            ..IngestOptions::default()
        };
        let back = ingest_reader(buf.as_slice(), "mem", &opts).unwrap();
        assert_eq!(back.log, log);
        assert!(back.warnings.is_empty());
    }

    #[test]
    fn empty_file_gives_empty_log_with_warning() {
        let got = ingest_reader("".as_bytes(), "empty.csv", &IngestOptions::default()).unwrap();
        assert_eq!(got.log.total_orders(), 0);
        assert_eq!(got.warnings.len(), 1);
    }

    #[test]
    fn single_order_lands_in_period_zero() {
        let text = "product_id,timestamp\nA,2020-01-06T00:00:00Z\n";
        let got = ingest_reader(text.as_bytes(), "one.csv", &IngestOptions::default()).unwrap();
        assert_eq!(got.log.products, vec!["A".to_string()]);
        assert_eq!(got.log.counts[0][0], 1);
        assert_eq!(got.log.total_orders(), 1);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = "product_id,timestamp\nA,2020-01-06T00:00:00Z\nB,yesterday\n";
        match ingest_reader(text.as_bytes(), "bad.csv", &IngestOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(ingest_reader("foo,bar\n".as_bytes(), "x", &IngestOptions::default()).is_err());
    }

    #[test]
    fn source_schema_respects_weekday() {
        let text = "customer_id,product_id,day_of_week,days_since_prior\n\
                    c1,A,3,\n\
                    c1,B,3,\n\
                    c1,A,5,2\n";
        let opts = IngestOptions {
            seed: 4,
            ..IngestOptions::default()
        };
        let got = ingest_reader(text.as_bytes(), "src.csv", &opts).unwrap();
        assert_eq!(got.log.total_orders(), 3);
        let log = &got.log;
        let mut first_period = None;
        for t in 0..log.periods() {
            if log.counts[t][1] > 0 {
                first_period = Some(t);
            }
        }
        let t = first_period.expect("B ordered once");
        assert_eq!(log.period_start(t).weekday().num_days_from_sunday(), 3);
        // the same order carries A as well
        assert_eq!(log.counts[t][0], 1);
        let again = ingest_reader(text.as_bytes(), "src.csv", &opts).unwrap();
        assert_eq!(again.log, got.log);
    }

    fn meta(id: &str) -> ProductMeta {
        ProductMeta {
            product_id: id.into(),
            label: "milk".into(),
            unit_volume: 1.0,
            unit_weight: 1.2,
            shelf_capacity_units: 50.0,
            spoilage_rate: 0.02,
            threshold: 0.1,
        }
    }

    #[test]
    fn metadata_builds_catalog() {
        let ids: Vec<String> = (0..220).map(|i| format!("P{i:03}")).collect();
        let rows: Vec<ProductMeta> = ids.iter().map(|i| meta(i)).collect();
        let (cat, shelf) = assign_metadata(&ids, &rows).unwrap();
        assert_eq!(cat.len(), 220);
        assert_eq!(cat.volume[0], 50.0);
        assert_eq!(shelf[0], 50.0);
        let (cat, _) = assign_metadata(&ids[..100], &rows).unwrap();
        assert_eq!(cat.len(), 100);
    }

    #[test]
    fn metadata_errors() {
        let ids = vec!["A".to_string(), "B".to_string()];
        assert!(assign_metadata(&ids, &[meta("A"), meta("A"), meta("B")]).is_err());
        assert!(assign_metadata(&ids, &[meta("A")]).is_err());
        let mut bad = meta("B");
        bad.unit_volume = 0.0;
        assert!(assign_metadata(&ids, &[meta("A"), bad]).is_err());
    }

    #[test]
    fn metadata_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.csv");
        let ids: Vec<String> = (0..5).map(|i| format!("P{i:03}")).collect();
        let rows = synthetic_metadata(&ids, 3);
        write_metadata(&path, &rows).unwrap();
        assert_eq!(read_metadata(&path).unwrap(), rows);
        for r in &rows {
            assert!((0.005..=0.1).contains(&r.spoilage_rate));
        }
    }

    #[test]
    fn capacity_calibration() {
        let ids = vec!["A".to_string(), "B".to_string()];
        let (cat, _) = assign_metadata(&ids, &[meta("A"), meta("B")]).unwrap();
        let orders = vec![vec![0.1, 0.2]; 10];
        let cap = calibrate_capacity(&orders, &cat, 0.9, 0.5, 0.99).unwrap();
        let per_period = 50.0 * 0.3;
        assert!((cap.v_max - 0.9 * per_period).abs() < 1e-12);
        assert!((cap.c_max - 0.9 * 1.2 * per_period).abs() < 1e-12);
        let exact = calibrate_capacity(&orders, &cat, 1.0, 0.5, 0.99).unwrap();
        assert!((exact.v_max - per_period).abs() < 1e-12);
        assert!(calibrate_capacity(&[vec![0.0, 0.0]], &cat, 0.9, 0.5, 0.99).is_err());
        assert!(calibrate_capacity(&[], &cat, 0.9, 0.5, 0.99).is_err());
    }

    #[test]
    fn aggregation_conserves_orders() {
        let log = generate_orders(&small_config(7, 30)).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let rows = buf.iter().filter(|&&b| b == b'\n').count() - 1;
        assert_eq!(rows as u64, log.total_orders());
    }
}
