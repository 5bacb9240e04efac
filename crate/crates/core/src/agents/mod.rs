//! Per-product replenishment policies.
//!
//! Every learning agent is a single set of network weights applied to each
//! product in turn, so model size depends only on the action count.

pub mod a2c;
pub mod buffer;
pub mod dqn;
pub mod features;
pub mod policy;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, SgdConfig};

pub use a2c::{td0_advantage, A2cAgent, ActorLoss};
pub use buffer::{ExperienceBuffer, Sample};
pub use dqn::DqnAgent;
pub use features::{build_features, raw_features, FeatureScale, Features, FEATURE_COUNT};
pub use policy::{action_distribution, greedy_index, smoothed_target, ActionGrid, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    A2cMod,
    A2cCat,
    Dqn,
    Heuristic,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::A2cMod,
        AgentKind::A2cCat,
        AgentKind::Dqn,
        AgentKind::Heuristic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::A2cMod => "a2c_mod",
            AgentKind::A2cCat => "a2c_cat",
            AgentKind::Dqn => "dqn",
            AgentKind::Heuristic => "heuristic",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("agent type", format!("unknown agent '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentHyperparams {
    /// Size of the quantized action grid.
    pub actions: usize,
    pub gamma: f64,
    /// Divisor of the distance-smoothing kernel.
    pub q: f64,
    /// Uniform share mixed into the A2C sampling distribution while exploring.
    pub explore_floor: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_episodes: usize,
    pub target_sync_sweeps: usize,
    /// Periods collected between training sweeps.
    pub sweep_periods: usize,
    /// Heuristic target level `x*`, one value per product or a single shared value.
    pub target_levels: Vec<f64>,
    /// Output activation of the A2C critic.
    pub critic_output: Activation,
    pub sgd: SgdConfig,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        AgentHyperparams {
            actions: 21,
            gamma: 0.99,
            q: 2.0,
            explore_floor: 0.02,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_episodes: 100,
            target_sync_sweeps: 4,
            sweep_periods: 32,
            target_levels: vec![0.5],
            critic_output: Activation::Tanh,
            sgd: SgdConfig::default(),
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("agent hyperparameters", reason));
        if self.actions == 0 {
            return bad("actions must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {}", self.gamma));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return bad(format!("q {}", self.q));
        }
        if !(0.0..=1.0).contains(&self.explore_floor) {
            return bad(format!("explore floor {}", self.explore_floor));
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("epsilon {e}"));
            }
        }
        if self.sweep_periods == 0 {
            return bad("sweep periods must be at least 1".into());
        }
        if self.target_levels.is_empty() || self.target_levels.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return bad("target levels must be non-empty and lie in [0, 1]".into());
        }
        self.sgd.validate()
    }

    pub fn target_level(&self, product: usize) -> f64 {
        if self.target_levels.len() == 1 {
            self.target_levels[0]
        } else {
            self.target_levels[product]
        }
    }
}

/// Mean losses over the minibatches of one sweep. DQN reports its single
/// loss under `critic`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepLoss {
    pub actor: f64,
    pub critic: f64,
    pub batches: usize,
}

impl SweepLoss {
    fn averaged(self) -> Self {
        if self.batches == 0 {
            return self;
        }
        let n = self.batches as f64;
        SweepLoss {
            actor: self.actor / n,
            critic: self.critic / n,
            batches: self.batches,
        }
    }
}

/// Proportional-control replenishment `max(0, x* + W_hat - x)`.
pub fn act_heuristic(levels: &[f64], forecast: &[f64], targets: &[f64]) -> Vec<f64> {
    levels
        .iter()
        .zip(forecast)
        .zip(targets)
        .map(|((x, w), t)| (t + w - x).max(0.0))
        .collect()
}

/// Chosen grid indices (empty for the heuristic) and desired quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub actions: Vec<usize>,
    pub desired: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Agent {
    A2c(A2cAgent),
    Dqn(DqnAgent),
    Heuristic,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(kind: AgentKind, hp: &AgentHyperparams, rng: &mut R) -> Result<Self> {
        hp.validate()?;
        Ok(match kind {
            AgentKind::A2cMod => Agent::A2c(A2cAgent::new(
                ActorLoss::Smoothed,
                hp.actions,
                hp.critic_output,
                rng,
            )?),
            AgentKind::A2cCat => Agent::A2c(A2cAgent::new(
                ActorLoss::CrossEntropy,
                hp.actions,
                hp.critic_output,
                rng,
            )?),
            AgentKind::Dqn => Agent::Dqn(DqnAgent::new(hp.actions, rng)?),
            AgentKind::Heuristic => Agent::Heuristic,
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::A2c(a) if a.loss == ActorLoss::Smoothed => AgentKind::A2cMod,
            Agent::A2c(_) => AgentKind::A2cCat,
            Agent::Dqn(_) => AgentKind::Dqn,
            Agent::Heuristic => AgentKind::Heuristic,
        }
    }

    pub fn learns(&self) -> bool {
        !matches!(self, Agent::Heuristic)
    }

    /// Named networks making up the agent, in checkpoint order.
    pub fn networks(&self) -> Vec<(&'static str, &DenseNet)> {
        match self {
            Agent::A2c(a) => vec![("actor", &a.actor), ("critic", &a.critic)],
            Agent::Dqn(d) => vec![("online", &d.online), ("target", &d.target)],
            Agent::Heuristic => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.networks().iter().map(|(_, n)| n.param_count()).sum()
    }

    pub fn begin_episode(&mut self, episode: usize, hp: &AgentHyperparams) {
        if let Agent::Dqn(d) = self {
            d.anneal(episode, hp);
        }
    }

    /// Decides every product's replenishment from one immutable weight
    /// snapshot. Features are the scaled per-product vectors; their first two
    /// entries are the raw level and forecast.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        features: &[Features],
        grid: &ActionGrid,
        mode: Mode,
        hp: &AgentHyperparams,
        rng: &mut R,
    ) -> Result<Decision> {
        let actions = match self {
            Agent::Heuristic => {
                let desired = features
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (hp.target_level(i) + f.forecast() - f.level()).max(0.0))
                    .collect();
                return Ok(Decision {
                    actions: Vec::new(),
                    desired,
                });
            }
            Agent::A2c(a) => features
                .iter()
                .map(|f| a.act(f, mode, hp.explore_floor, rng))
                .collect::<Result<Vec<_>>>()?,
            Agent::Dqn(d) => features
                .iter()
                .map(|f| d.act(f, mode, rng))
                .collect::<Result<Vec<_>>>()?,
        };
        let desired = actions.iter().map(|&j| grid.value(j)).collect();
        Ok(Decision { actions, desired })
    }

    /// Critic estimate: `V(s)` for actor-critic agents, `max_j Q(s, j)` for DQN.
    pub fn value(&self, features: &Features) -> Result<Option<f64>> {
        match self {
            Agent::A2c(a) => a.value(features).map(Some),
            Agent::Dqn(d) => Ok(d.q_values(features)?.into_iter().reduce(f64::max)),
            Agent::Heuristic => Ok(None),
        }
    }

    pub fn train_sweep<R: Rng + ?Sized>(
        &mut self,
        samples: Vec<Sample>,
        hp: &AgentHyperparams,
        rng: &mut R,
    ) -> Result<SweepLoss> {
        match self {
            Agent::A2c(a) => a.train_sweep(samples, hp, rng),
            Agent::Dqn(d) => d.train_sweep(samples, hp, rng),
            Agent::Heuristic => Ok(SweepLoss::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn heuristic_examples() {
        let u = act_heuristic(&[0.3, 0.9, 0.5], &[0.2, 0.1, 0.0], &[0.5, 0.5, 0.5]);
        assert!((u[0] - 0.4).abs() < 1e-15);
        assert_eq!(u[1], 0.0);
        assert_eq!(u[2], 0.0);
    }

    #[test]
    fn heuristic_decision_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hp = AgentHyperparams {
            target_levels: vec![0.5, 0.6],
            ..AgentHyperparams::default()
        };
        let agent = Agent::new(AgentKind::Heuristic, &hp, &mut rng).unwrap();
        let f = [
            Features([0.3, 0.2, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]),
            Features([0.1, 0.05, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]),
        ];
        let grid = ActionGrid::uniform(21).unwrap();
        let d = agent.decide(&f, &grid, Mode::Explore, &hp, &mut rng).unwrap();
        assert_eq!(d.desired, act_heuristic(&[0.3, 0.1], &[0.2, 0.05], &[0.5, 0.6]));
        assert!(d.actions.is_empty());
    }

    #[test]
    fn parameter_count_depends_only_on_grid() {
        let hp = AgentHyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Agent::new(AgentKind::A2cMod, &hp, &mut rng).unwrap();
        // 8-42-42-21 actor plus 8-4-1 critic.
        let actor = 8 * 42 + 42 + 42 * 42 + 42 + 42 * 21 + 21;
        let critic = 8 * 4 + 4 + 4 + 1;
        assert_eq!(a.param_count(), actor + critic);
    }

    #[test]
    fn agent_kind_round_trips_names() {
        for k in AgentKind::ALL {
            assert_eq!(k.as_str().parse::<AgentKind>().unwrap(), k);
        }
        assert!("ddpg".parse::<AgentKind>().is_err());
    }

    #[test]
    fn decisions_use_grid_values() {
        let hp = AgentHyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = ActionGrid::uniform(hp.actions).unwrap();
        for kind in [AgentKind::A2cMod, AgentKind::A2cCat, AgentKind::Dqn] {
            let agent = Agent::new(kind, &hp, &mut rng).unwrap();
            let f = vec![Features([0.4, 0.1, 0.01, 0.5, 0.7, 0.3, 0.5, 0.6]); 5];
            let d = agent.decide(&f, &grid, Mode::Greedy, &hp, &mut rng).unwrap();
            assert_eq!(d.actions.len(), 5);
            // one weight snapshot, identical inputs: identical greedy choices
            assert!(d.actions.windows(2).all(|w| w[0] == w[1]));
            for (j, u) in d.actions.iter().zip(&d.desired) {
                assert_eq!(grid.value(*j), *u);
            }
        }
    }
}
