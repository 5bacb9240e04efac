use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentHyperparams, AgentKind};
use crate::data::{GeneratorConfig, SplitConfig, DEFAULT_TIGHTNESS};
use crate::error::{Error, Result};
use crate::forecast::DEFAULT_WINDOW;

/// Where orders and product metadata come from. Without an orders file the
/// generator is used; without a metadata file synthetic metadata is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub orders: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    /// Seed of the date assignment when ingesting the customer-level schema.
    pub ingest_seed: u64,
    pub metadata_seed: u64,
    pub generator: GeneratorConfig,
    pub split: SplitConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            orders: None,
            metadata: None,
            ingest_seed: 0,
            metadata_seed: 1,
            generator: GeneratorConfig::default(),
            split: SplitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub window: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySettings {
    /// Budgets as a fraction of the mean per-period order volume and weight.
    pub tightness: f64,
    pub alpha: f64,
}

impl Default for CapacitySettings {
    fn default() -> Self {
        CapacitySettings {
            tightness: DEFAULT_TIGHTNESS,
            alpha: 0.5,
        }
    }
}

pub const DESK_BASE_RATE: f64 = 25.0;
pub const DESK_TIGHTNESS: f64 = 1.3;

fn default_episodes() -> usize {
    600
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}

fn default_initial_level() -> f64 {
    0.5
}

fn default_checkpoint_every() -> usize {
    50
}

/// Everything that determines a run. `agent` and `seed` have no defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Inventory level of every product at the start of each episode.
    #[serde(default = "default_initial_level")]
    pub initial_level: f64,
    /// Draw fresh training orders from the generator every episode instead of
    /// replaying the fixed training split.
    #[serde(default)]
    pub resample_orders: bool,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub capacity: CapacitySettings,
    #[serde(default)]
    pub hyperparams: AgentHyperparams,
}

impl RunConfig {
    pub fn new(agent: AgentKind, seed: u64) -> Self {
        RunConfig {
            agent,
            seed,
            episodes: default_episodes(),
            output_dir: default_output(),
            initial_level: default_initial_level(),
            resample_orders: false,
            checkpoint_every: default_checkpoint_every(),
            data: DataConfig::default(),
            forecast: ForecastConfig::default(),
            capacity: CapacitySettings::default(),
            hyperparams: AgentHyperparams::default(),
        }
    }

    /// The bundled small instance: 20 synthetic products, 125 days split into
    /// 400 training and 100 test periods, 150 episodes. Order rates are high
    /// relative to shelf capacity and the budgets leave 30% headroom over
    /// mean order volume, so capacity binds only at peaks.
    pub fn desk(agent: AgentKind, seed: u64) -> Self {
        let mut cfg = RunConfig::new(agent, seed);
        cfg.episodes = 150;
        cfg.data.generator.products = 20;
        cfg.data.generator.days = 125;
        cfg.data.generator.base_rates = vec![DESK_BASE_RATE];
        cfg.capacity.tightness = DESK_TIGHTNESS;
        cfg.data.split = SplitConfig {
            train_periods: 400,
            test_periods: 100,
        };
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Hex SHA-256 of the serialized configuration.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |r: String| Err(Error::Config(r));
        if !(0.0..=1.0).contains(&self.initial_level) {
            return bad(format!("initial level {} outside [0, 1]", self.initial_level));
        }
        if self.forecast.window == 0 {
            return bad("forecast window must be positive".into());
        }
        if !(self.capacity.alpha.is_finite() && self.capacity.alpha >= 0.0) {
            return bad(format!("alpha {}", self.capacity.alpha));
        }
        if self.resample_orders && self.data.orders.is_some() {
            return bad("resampling orders needs the generator, not an orders file".into());
        }
        if self.data.orders.is_none() {
            self.data.generator.validate()?;
        }
        self.hyperparams.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::desk(AgentKind::A2cMod, 9);
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg: RunConfig = toml::from_str("agent = \"dqn\"\nseed = 3\n").unwrap();
        assert_eq!(cfg.episodes, 600);
        assert_eq!(cfg.data.split.train_periods, 900);
        assert_eq!(cfg.hyperparams.actions, 21);
        cfg.validate().unwrap();
    }

    #[test]
    fn seed_is_required() {
        assert!(toml::from_str::<RunConfig>("agent = \"dqn\"\n").is_err());
        assert!(toml::from_str::<RunConfig>("agent = \"ddpg\"\nseed = 1\n").is_err());
    }

    #[test]
    fn partial_sections_override() {
        let text =
            "agent = \"heuristic\"\nseed = 1\n[hyperparams]\ngamma = 0.5\n[capacity]\ntightness = 1.2\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.hyperparams.gamma, 0.5);
        assert_eq!(cfg.hyperparams.q, 2.0);
        assert_eq!(cfg.capacity.tightness, 1.2);
        assert_eq!(cfg.capacity.alpha, 0.5);
    }
}
