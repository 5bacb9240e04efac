use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::instance::Instance;
use super::rollout::Session;
use crate::agents::a2c::{actor_layout, critic_layout};
use crate::agents::dqn::q_layout;
use crate::agents::{
    A2cAgent, ActionGrid, ActorLoss, Agent, AgentHyperparams, AgentKind, DqnAgent, FeatureScale, Features,
};
use crate::dynamics::CapacityConfig;
use crate::error::{Error, Result};
use crate::nn::DenseNet;

const AGENT_FILE: &str = "agent.toml";

/// Training-split statistics the agent was trained against. Evaluation uses
/// these instead of recomputing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenStatistics {
    pub ids: Vec<String>,
    pub forecast_std: Vec<f64>,
    pub shelf_life: Vec<f64>,
    pub feature_means: Features,
    pub capacity: CapacityConfig,
    pub scale: FeatureScale,
}

impl FrozenStatistics {
    pub fn of(instance: &Instance) -> Self {
        FrozenStatistics {
            ids: instance.catalog.ids.clone(),
            forecast_std: instance.catalog.forecast_std.clone(),
            shelf_life: instance.catalog.shelf_life.clone(),
            feature_means: instance.feature_means,
            capacity: instance.capacity,
            scale: instance.scale,
        }
    }

    pub fn apply_to(&self, instance: &mut Instance) -> Result<()> {
        if self.ids != instance.catalog.ids {
            return Err(Error::Checkpoint(format!(
                "checkpoint covers {} products that do not match the {}-product catalog",
                self.ids.len(),
                instance.products()
            )));
        }
        instance.catalog.forecast_std = self.forecast_std.clone();
        instance.catalog.shelf_life = self.shelf_life.clone();
        instance.catalog.validate()?;
        instance.feature_means = self.feature_means;
        instance.capacity = self.capacity;
        instance.scale = self.scale;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentFile {
    agent: AgentKind,
    episode: usize,
    epsilon: Option<f64>,
    grid: Vec<f64>,
    hyperparams: AgentHyperparams,
    statistics: FrozenStatistics,
}

/// Agent weights plus everything needed to act with them again.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub episode: usize,
    pub agent: Agent,
    pub grid: ActionGrid,
    pub hyperparams: AgentHyperparams,
    pub statistics: FrozenStatistics,
}

impl Checkpoint {
    pub fn capture(session: &Session) -> Self {
        Checkpoint {
            episode: session.episode(),
            agent: session.agent.clone(),
            grid: session.grid.clone(),
            hyperparams: session.config.hyperparams.clone(),
            statistics: FrozenStatistics::of(&session.instance),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, net) in self.agent.networks() {
            fs::write(dir.join(format!("{name}.bin")), net.to_bytes())?;
        }
        let file = AgentFile {
            agent: self.agent.kind(),
            episode: self.episode,
            epsilon: match &self.agent {
                Agent::Dqn(d) => Some(d.epsilon),
                _ => None,
            },
            grid: self.grid.values().to_vec(),
            hyperparams: self.hyperparams.clone(),
            statistics: self.statistics.clone(),
        };
        let text = toml::to_string(&file).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(dir.join(AGENT_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(AGENT_FILE);
        let text =
            fs::read_to_string(&path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        let file: AgentFile =
            toml::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        file.hyperparams.validate()?;
        let grid = ActionGrid::new(file.grid)?;
        let n = file.hyperparams.actions;
        if grid.len() != n {
            return Err(Error::Checkpoint(format!(
                "grid has {} values for {n} actions",
                grid.len()
            )));
        }
        let blob = |name: &str, sizes: Vec<usize>| -> Result<DenseNet> {
            let p = dir.join(format!("{name}.bin"));
            let bytes = fs::read(&p).map_err(|e| Error::Checkpoint(format!("{}: {e}", p.display())))?;
            DenseNet::from_bytes_expecting(&bytes, &sizes)
        };
        let agent = match file.agent {
            AgentKind::A2cMod | AgentKind::A2cCat => {
                let loss = if file.agent == AgentKind::A2cMod {
                    ActorLoss::Smoothed
                } else {
                    ActorLoss::CrossEntropy
                };
                Agent::A2c(A2cAgent {
                    loss,
                    actor: blob("actor", actor_layout(n, loss).0)?,
                    critic: blob("critic", critic_layout(file.hyperparams.critic_output).0)?,
                })
            }
            AgentKind::Dqn => Agent::Dqn(DqnAgent::from_networks(
                blob("online", q_layout(n).0)?,
                blob("target", q_layout(n).0)?,
                file.epsilon.unwrap_or(file.hyperparams.epsilon_end),
            )),
            AgentKind::Heuristic => Agent::Heuristic,
        };
        Ok(Checkpoint {
            episode: file.episode,
            agent,
            grid,
            hyperparams: file.hyperparams,
            statistics: file.statistics,
        })
    }
}
