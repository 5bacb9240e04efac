use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::instance::Instance;
use crate::agents::{build_features, ActionGrid, Agent, AgentHyperparams, ExperienceBuffer, Mode, Sample};
use crate::dynamics::{capacity_penalty, InventoryEnv, Transition};
use crate::error::{Error, Result};
use crate::forecast::OrderHistory;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Per-episode means over periods.
///
/// `wastage` is the per-period spoilage averaged over products, so each row
/// satisfies `business = 1 - stockout - wastage - spread` and
/// `internal = business - capacity_penalty`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub business: f64,
    pub internal: f64,
    pub mean_rho: f64,
    pub stockout: f64,
    pub wastage: f64,
    pub spread: f64,
    pub mean_level: f64,
    pub capacity_penalty: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

#[derive(Default)]
struct Accumulator {
    periods: usize,
    m: EpisodeMetrics,
    sweeps: usize,
}

impl Accumulator {
    fn add(&mut self, tr: &Transition, alpha: f64) {
        let p = tr.outcome.len() as f64;
        let rho = tr.outcome.rho;
        self.periods += 1;
        self.m.business += tr.reward;
        self.m.internal += tr.product_rewards.iter().sum::<f64>() / p;
        self.m.mean_rho += rho;
        self.m.stockout += tr.outcome.empty_fraction();
        self.m.wastage += tr.outcome.mean_waste();
        self.m.spread += tr.spread;
        self.m.mean_level += tr.outcome.end_levels.iter().sum::<f64>() / p;
        self.m.capacity_penalty += capacity_penalty(rho, alpha);
    }

    fn finish(self, episode: usize) -> EpisodeMetrics {
        let n = self.periods.max(1) as f64;
        let s = self.sweeps.max(1) as f64;
        let m = self.m;
        EpisodeMetrics {
            episode,
            business: m.business / n,
            internal: m.internal / n,
            mean_rho: m.mean_rho / n,
            stockout: m.stockout / n,
            wastage: m.wastage / n,
            spread: m.spread / n,
            mean_level: m.mean_level / n,
            capacity_penalty: m.capacity_penalty / n,
            actor_loss: m.actor_loss / s,
            critic_loss: m.critic_loss / s,
        }
    }
}

struct Rollout<'a> {
    instance: &'a Instance,
    grid: &'a ActionGrid,
    hp: &'a AgentHyperparams,
    window: usize,
    initial_level: f64,
    episode: usize,
}

impl<'a> Rollout<'a> {
    fn new(instance: &'a Instance, grid: &'a ActionGrid, config: &'a RunConfig, episode: usize) -> Self {
        Rollout {
            instance,
            grid,
            hp: &config.hyperparams,
            window: config.forecast.window,
            initial_level: config.initial_level,
            episode,
        }
    }

    /// One pass over `orders`. With `learn`, samples are buffered and the
    /// agent trains every `sweep_periods` periods and once more on whatever
    /// remains at the end.
    fn run(
        &self,
        agent: &mut Agent,
        orders: &[Vec<f64>],
        warm: &[Vec<f64>],
        mode: Mode,
        learn: bool,
        violations: &mut usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<EpisodeMetrics> {
        let inst = self.instance;
        let catalog = &inst.catalog;
        let p = inst.products();
        let at = |period: usize| {
            let episode = self.episode;
            move |e: Error| Error::Rollout {
                episode,
                period,
                source: Box::new(e),
            }
        };
        let mut env = InventoryEnv::new(catalog.clone(), inst.capacity)?;
        env.reset(vec![self.initial_level; p])?;
        let mut history = OrderHistory::new(p, self.window)?;
        for w in warm {
            history.push(w)?;
        }
        let learn = learn && agent.learns();
        let mut buffer = ExperienceBuffer::new(p, self.hp.sweep_periods);
        let mut acc = Accumulator::default();
        let mut features = build_features(env.state(), &history.forecast(catalog), catalog, &inst.scale)?;

        for (t, w) in orders.iter().enumerate() {
            let decision = agent
                .decide(&features, self.grid, mode, self.hp, rng)
                .map_err(at(t))?;
            let tr = env.step(&decision.desired, w).map_err(at(t))?;
            history.push(w).map_err(at(t))?;
            let next = build_features(env.state(), &history.forecast(catalog), catalog, &inst.scale)
                .map_err(at(t))?;
            acc.add(&tr, inst.capacity.alpha);
            if learn {
                let samples = (0..p)
                    .map(|i| Sample {
                        product: i,
                        period: t,
                        state: features[i],
                        action: decision.actions[i],
                        reward: tr.product_rewards[i],
                        next: next[i],
                        terminal: false,
                    })
                    .collect();
                buffer.push_period(samples);
                if buffer.is_full() {
                    let loss = agent.train_sweep(buffer.drain(), self.hp, rng).map_err(at(t))?;
                    acc.m.actor_loss += loss.actor;
                    acc.m.critic_loss += loss.critic;
                    acc.sweeps += 1;
                }
            }
            features = next;
        }
        if learn && !buffer.is_empty() {
            let last = orders.len().saturating_sub(1);
            let loss = agent
                .train_sweep(buffer.drain(), self.hp, rng)
                .map_err(at(last))?;
            acc.m.actor_loss += loss.actor;
            acc.m.critic_loss += loss.critic;
            acc.sweeps += 1;
        }
        *violations += env.violations();
        Ok(acc.finish(self.episode))
    }
}

/// A training run held in memory: agent, instance and the random stream.
pub struct Session {
    pub config: RunConfig,
    pub instance: Instance,
    pub agent: Agent,
    pub grid: ActionGrid,
    rng: ChaCha8Rng,
    episode: usize,
    violations: usize,
}

impl Session {
    pub fn new(config: RunConfig, instance: Instance) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let agent = Agent::new(config.agent, &config.hyperparams, &mut rng)?;
        let grid = ActionGrid::uniform(config.hyperparams.actions)?;
        Ok(Session {
            config,
            instance,
            agent,
            grid,
            rng,
            episode: 0,
            violations: 0,
        })
    }

    /// Rebuilds a session around a checkpointed agent, for evaluation.
    pub fn from_checkpoint(
        config: RunConfig,
        mut instance: Instance,
        checkpoint: Checkpoint,
    ) -> Result<Self> {
        checkpoint.statistics.apply_to(&mut instance)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Session {
            grid: checkpoint.grid,
            agent: checkpoint.agent,
            config: RunConfig {
                hyperparams: checkpoint.hyperparams,
                ..config
            },
            instance,
            rng,
            episode: checkpoint.episode,
            violations: 0,
        })
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    /// Executed actions that broke a constraint, summed over every rollout so far.
    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn train_episode(&mut self) -> Result<EpisodeMetrics> {
        let episode = self.episode;
        self.agent.begin_episode(episode, &self.config.hyperparams);
        let resampled = if self.config.resample_orders {
            Some(self.instance.resampled_train(self.config.seed, episode)?)
        } else {
            None
        };
        let orders = resampled.as_deref().unwrap_or(&self.instance.train);
        let mut agent = std::mem::replace(&mut self.agent, Agent::Heuristic);
        let mut violations = 0;
        let result = Rollout::new(&self.instance, &self.grid, &self.config, episode).run(
            &mut agent,
            orders,
            &[],
            Mode::Explore,
            true,
            &mut violations,
            &mut self.rng,
        );
        self.agent = agent;
        self.violations += violations;
        self.episode += 1;
        result
    }

    /// Greedy pass over the test split without training. The forecaster starts
    /// from the tail of the training orders.
    pub fn evaluate(&mut self) -> Result<EpisodeMetrics> {
        let window = self.config.forecast.window;
        let train = &self.instance.train;
        let warm = &train[train.len().saturating_sub(window)..];
        let mut agent = self.agent.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut violations = 0;
        let metrics = Rollout::new(&self.instance, &self.grid, &self.config, self.episode).run(
            &mut agent,
            &self.instance.test,
            warm,
            Mode::Greedy,
            false,
            &mut violations,
            &mut rng,
        )?;
        self.violations += violations;
        Ok(metrics)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(self)
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub metrics: Vec<EpisodeMetrics>,
    pub violations: usize,
    pub final_checkpoint: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_sha256: String,
    code_version: &'a str,
    agent: String,
    seed: u64,
    episodes: usize,
    products: usize,
    train_periods: usize,
    test_periods: usize,
    parameters: usize,
    v_max: f64,
    c_max: f64,
}

/// Trains per `config` and writes the run directory: config, manifest,
/// per-episode metrics and checkpoints.
pub fn run_training(config: &RunConfig) -> Result<RunSummary> {
    let instance = Instance::prepare(config)?;
    for w in &instance.warnings {
        log::warn!("{w}");
    }
    let dir = config.output_dir.clone();
    fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
    config.save(&dir.join(CONFIG_FILE))?;

    let mut session = Session::new(config.clone(), instance)?;
    let manifest = Manifest {
        config_sha256: config.hash()?,
        code_version: env!("CARGO_PKG_VERSION"),
        agent: config.agent.to_string(),
        seed: config.seed,
        episodes: config.episodes,
        products: session.instance.products(),
        train_periods: session.instance.train.len(),
        test_periods: session.instance.test.len(),
        parameters: session.agent.param_count(),
        v_max: session.instance.capacity.v_max,
        c_max: session.instance.capacity.c_max,
    };
    let manifest = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), manifest)?;

    let mut writer = csv::Writer::from_path(dir.join(METRICS_FILE))?;
    let mut metrics = Vec::with_capacity(config.episodes);
    let mut final_checkpoint = checkpoint_path(&dir, 0);
    for episode in 0..config.episodes {
        let m = session.train_episode()?;
        log::info!(
            "episode {episode}: business {:.4} internal {:.4} rho {:.3}",
            m.business,
            m.internal,
            m.mean_rho
        );
        writer.serialize(m)?;
        writer.flush()?;
        metrics.push(m);
        let done = episode + 1;
        if done == config.episodes || (config.checkpoint_every > 0 && done % config.checkpoint_every == 0) {
            final_checkpoint = checkpoint_path(&dir, done);
            session.checkpoint().save(&final_checkpoint)?;
        }
    }
    if config.episodes == 0 {
        session.checkpoint().save(&final_checkpoint)?;
    }
    if session.violations() > 0 {
        log::error!("{} periods executed an infeasible action", session.violations());
    }
    Ok(RunSummary {
        run_dir: dir,
        metrics,
        violations: session.violations(),
        final_checkpoint,
    })
}

pub fn checkpoint_path(run_dir: &Path, episode: usize) -> PathBuf {
    run_dir.join(CHECKPOINT_DIR).join(format!("episode-{episode:05}"))
}

/// Latest checkpoint in a run directory.
pub fn latest_checkpoint(run_dir: &Path) -> Result<PathBuf> {
    let dir = run_dir.join(CHECKPOINT_DIR);
    let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    entries
        .pop()
        .ok_or_else(|| Error::Checkpoint(format!("no checkpoints under {}", dir.display())))
}

/// Greedy test-split evaluation of a checkpoint. The run configuration is
/// read from `run_dir` to rebuild the instance.
pub fn run_evaluation(run_dir: &Path, checkpoint: Option<&Path>) -> Result<EpisodeMetrics> {
    let config = RunConfig::load(&run_dir.join(CONFIG_FILE))?;
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => latest_checkpoint(run_dir)?,
    };
    let checkpoint = Checkpoint::load(&path)?;
    let instance = Instance::prepare(&config)?;
    let mut session = Session::from_checkpoint(config, instance, checkpoint)?;
    session.evaluate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentKind;

    fn tiny(agent: AgentKind) -> RunConfig {
        let mut cfg = RunConfig::desk(agent, 5);
        cfg.data.generator.products = 4;
        cfg.data.generator.days = 20;
        cfg.data.split.train_periods = 60;
        cfg.data.split.test_periods = 20;
        cfg.episodes = 2;
        cfg.hyperparams.actions = 5;
        cfg
    }

    #[test]
    fn metrics_rows_are_consistent() {
        for kind in AgentKind::ALL {
            let cfg = tiny(kind);
            let inst = Instance::prepare(&cfg).unwrap();
            let mut s = Session::new(cfg, inst).unwrap();
            let m = s.train_episode().unwrap();
            let lhs = 1.0 - m.stockout - m.wastage - m.spread;
            assert!((lhs - m.business).abs() < 1e-9, "{kind}: {m:?}");
            assert!((m.business - m.capacity_penalty - m.internal).abs() < 1e-9);
            assert!((-2.0..=1.0).contains(&m.business));
            assert_eq!(s.violations(), 0);
            let e = s.evaluate().unwrap();
            assert!(e.business.is_finite());
        }
    }

    #[test]
    fn heuristic_is_flat_and_deterministic() {
        let cfg = tiny(AgentKind::Heuristic);
        let inst = Instance::prepare(&cfg).unwrap();
        let mut s = Session::new(cfg, inst).unwrap();
        let a = s.train_episode().unwrap();
        let b = s.train_episode().unwrap();
        assert_eq!((a.business, a.internal), (b.business, b.internal));
        assert_eq!(s.evaluate().unwrap(), s.evaluate().unwrap());
    }
}
