use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use crate::agents::{act_heuristic, build_features, FeatureScale, Features, FEATURE_COUNT};
use crate::data::{
    assign_metadata, calibrate_capacity, generate_orders, ingest_csv, read_metadata, split,
    synthetic_metadata, GeneratorConfig, IngestOptions, OrderLog,
};
use crate::dynamics::{CapacityConfig, InventoryEnv, ProductCatalog};
use crate::error::{Error, Result};
use crate::forecast::{forecast_error_std, shelf_life_statistic, OrderHistory};

/// A ready-to-run problem: catalog with frozen statistics, transport budgets
/// and the normalized order streams of both splits.
#[derive(Debug, Clone)]
pub struct Instance {
    pub catalog: ProductCatalog,
    pub capacity: CapacityConfig,
    pub shelf_units: Vec<f64>,
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub scale: FeatureScale,
    /// Mean scaled features over the statistics rollout on the training split.
    pub feature_means: Features,
    pub warnings: Vec<String>,
    generator: Option<GeneratorConfig>,
}

impl Instance {
    pub fn prepare(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let data = &config.data;
        let mut warnings = Vec::new();
        let (log, generator) = match &data.orders {
            Some(path) => {
                let opts = IngestOptions {
                    start: data.generator.start,
                    days: data.generator.days,
                    seed: data.ingest_seed,
                    products: None,
                };
                let ingested = ingest_csv(path, &opts)?;
                warnings.extend(ingested.warnings);
                (ingested.log, None)
            }
            None => (generate_orders(&data.generator)?, Some(data.generator.clone())),
        };
        let meta = match &data.metadata {
            Some(path) => read_metadata(path)?,
            None => synthetic_metadata(&log.products, data.metadata_seed),
        };
        let (mut catalog, shelf_units) = assign_metadata(&log.products, &meta)?;
        let (train_log, test_log) = split(&log, &data.split)?;
        let train = train_log.normalized(&shelf_units);
        let test = test_log.normalized(&shelf_units);
        let capacity = calibrate_capacity(
            &train,
            &catalog,
            config.capacity.tightness,
            config.capacity.alpha,
            config.hyperparams.gamma,
        )?;

        catalog.forecast_std = forecast_error_stds(&train, config.forecast.window)?;
        let scale = FeatureScale::new(&catalog, &capacity);
        let (losses, feature_means) = statistics_rollout(&catalog, &capacity, &scale, &train, config)?;
        catalog.shelf_life = shelf_life_statistic(&losses)?;
        // Shelf life feeds the features, so the means are refreshed for it.
        let mut means = feature_means.0;
        means[5] = catalog.shelf_life.iter().sum::<f64>() / catalog.len() as f64;

        Ok(Instance {
            catalog,
            capacity,
            shelf_units,
            train,
            test,
            scale,
            feature_means: Features(means),
            warnings,
            generator,
        })
    }

    pub fn products(&self) -> usize {
        self.catalog.len()
    }

    /// Fresh training orders for one episode, drawn from the generator with a
    /// seed derived from the run seed and episode.
    pub fn resampled_train(&self, run_seed: u64, episode: usize) -> Result<Vec<Vec<f64>>> {
        let generator = self
            .generator
            .as_ref()
            .ok_or_else(|| Error::Config("order resampling needs a generated instance".into()))?;
        let mut seeder = ChaCha8Rng::seed_from_u64(run_seed ^ generator.seed.rotate_left(32));
        seeder.set_stream(episode as u64 + 1);
        let cfg = GeneratorConfig {
            seed: rand::Rng::random(&mut seeder),
            ..generator.clone()
        };
        let log: OrderLog = generate_orders(&cfg)?;
        let mut orders = log.normalized(&self.shelf_units);
        orders.truncate(self.train.len());
        Ok(orders)
    }
}

/// Population std of the trailing-average forecast error per product over
/// the training split, skipping the first period where no forecast exists.
fn forecast_error_stds(train: &[Vec<f64>], window: usize) -> Result<Vec<f64>> {
    let p = train.first().map_or(0, Vec::len);
    let mut history = OrderHistory::new(p, window)?;
    let mut pairs = vec![Vec::with_capacity(train.len()); p];
    for w in train {
        if !history.is_empty() {
            for (i, f) in history.mean().into_iter().enumerate() {
                pairs[i].push((f, w[i]));
            }
        }
        history.push(w)?;
    }
    Ok(pairs.iter().map(|pr| forecast_error_std(pr).value).collect())
}

/// Runs the heuristic over the training split once, returning each product's
/// per-period spoilage losses and the mean scaled feature vector.
fn statistics_rollout(
    catalog: &ProductCatalog,
    capacity: &CapacityConfig,
    scale: &FeatureScale,
    train: &[Vec<f64>],
    config: &RunConfig,
) -> Result<(Vec<Vec<f64>>, Features)> {
    let p = catalog.len();
    let mut env = InventoryEnv::new(catalog.clone(), *capacity)?;
    env.reset(vec![config.initial_level; p])?;
    let mut history = OrderHistory::new(p, config.forecast.window)?;
    let targets: Vec<f64> = (0..p).map(|i| config.hyperparams.target_level(i)).collect();
    let mut losses = vec![Vec::with_capacity(train.len()); p];
    let mut sums = [0.0; FEATURE_COUNT];
    let mut count = 0usize;
    for w in train {
        let forecast = history.forecast(catalog);
        for f in build_features(env.state(), &forecast, catalog, scale)? {
            for (s, v) in sums.iter_mut().zip(f.0) {
                *s += v;
            }
            count += 1;
        }
        let desired = act_heuristic(&env.state().levels, &forecast.orders, &targets);
        let tr = env.step(&desired, w)?;
        for (l, waste) in losses.iter_mut().zip(&tr.outcome.waste) {
            l.push(*waste);
        }
        history.push(w)?;
    }
    let n = count.max(1) as f64;
    Ok((losses, Features(sums.map(|s| s / n))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentKind;

    #[test]
    fn desk_instance_shapes() {
        let cfg = RunConfig::desk(AgentKind::Heuristic, 1);
        let inst = Instance::prepare(&cfg).unwrap();
        assert_eq!(inst.products(), 20);
        assert_eq!(inst.train.len(), 400);
        assert_eq!(inst.test.len(), 100);
        assert!(inst.catalog.forecast_std.iter().all(|s| *s > 0.0));
        assert!(inst.catalog.shelf_life.iter().all(|l| (0.0..=1.0).contains(l)));
        assert!(inst.catalog.shelf_life.contains(&1.0));
        assert!(inst.catalog.shelf_life.contains(&0.0));
        assert!(inst.feature_means.0.iter().all(|v| v.is_finite()));
        // deterministic
        let again = Instance::prepare(&cfg).unwrap();
        assert_eq!(again.train, inst.train);
        assert_eq!(again.catalog, inst.catalog);
    }

    #[test]
    fn resampled_orders_differ_by_episode() {
        let mut cfg = RunConfig::desk(AgentKind::Heuristic, 1);
        cfg.resample_orders = true;
        let inst = Instance::prepare(&cfg).unwrap();
        let a = inst.resampled_train(1, 0).unwrap();
        let b = inst.resampled_train(1, 1).unwrap();
        assert_eq!(a.len(), 400);
        assert_ne!(a, b);
        assert_eq!(a, inst.resampled_train(1, 0).unwrap());
    }
}
