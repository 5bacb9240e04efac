//! Shared-weight DQN over the quantized action grid, with an online and a
//! periodically synced target network.

use rand::seq::SliceRandom;
use rand::Rng;

use super::buffer::Sample;
use super::features::{Features, FEATURE_COUNT};
use super::policy::{greedy_index, smoothing_kernel, Mode};
use super::{AgentHyperparams, SweepLoss};
use crate::error::Result;
use crate::nn::{Activation, DenseNet, Target};

pub fn q_layout(actions: usize) -> (Vec<usize>, Vec<Activation>) {
    (
        vec![FEATURE_COUNT, 2 * actions, 2 * actions, actions],
        vec![Activation::Tanh, Activation::Tanh, Activation::Linear],
    )
}

/// Training target for one transition.
///
/// The chosen action moves all the way to the TD target; every other action
/// moves from its current online estimate by the distance-smoothed share of
/// the TD error.
pub fn smoothed_q_target(q_online: &[f64], chosen: usize, td_target: f64, q: f64) -> Vec<f64> {
    let delta = td_target - q_online[chosen];
    q_online
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            if k == chosen {
                td_target
            } else {
                value + smoothing_kernel(k, chosen, delta, q)
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: DenseNet,
    pub target: DenseNet,
    pub epsilon: f64,
    sweeps: usize,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(actions: usize, rng: &mut R) -> Result<Self> {
        let (sizes, acts) = q_layout(actions);
        let online = DenseNet::new(&sizes, &acts, rng)?;
        let target = online.clone();
        Ok(DqnAgent {
            online,
            target,
            epsilon: 1.0,
            sweeps: 0,
        })
    }

    /// Restores an agent from checkpointed networks.
    pub fn from_networks(online: DenseNet, target: DenseNet, epsilon: f64) -> Self {
        DqnAgent {
            online,
            target,
            epsilon,
            sweeps: 0,
        }
    }

    pub fn q_values(&self, features: &Features) -> Result<Vec<f64>> {
        self.online.forward(features.as_slice())
    }

    pub fn act<R: Rng + ?Sized>(&self, features: &Features, mode: Mode, rng: &mut R) -> Result<usize> {
        let n = self.online.outputs();
        if mode == Mode::Explore && rng.random::<f64>() < self.epsilon {
            return Ok(rng.random_range(0..n));
        }
        Ok(greedy_index(&self.q_values(features)?))
    }

    /// Linear annealing from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_episodes` episodes.
    pub fn anneal(&mut self, episode: usize, hp: &AgentHyperparams) {
        let frac = if hp.epsilon_episodes == 0 {
            1.0
        } else {
            (episode as f64 / hp.epsilon_episodes as f64).min(1.0)
        };
        self.epsilon = hp.epsilon_start + frac * (hp.epsilon_end - hp.epsilon_start);
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn train_sweep<R: Rng + ?Sized>(
        &mut self,
        mut samples: Vec<Sample>,
        hp: &AgentHyperparams,
        rng: &mut R,
    ) -> Result<SweepLoss> {
        samples.shuffle(rng);
        let mut loss = SweepLoss::default();
        for batch in samples.chunks(hp.sgd.batch_size) {
            let mut inputs = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for s in batch {
                let current = self.online.forward(s.state.as_slice())?;
                let bootstrap = if s.terminal {
                    0.0
                } else {
                    let next = self.target.forward(s.next.as_slice())?;
                    hp.gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                };
                let td_target = s.reward + bootstrap;
                targets.push(Target::Values(smoothed_q_target(
                    &current, s.action, td_target, hp.q,
                )));
                inputs.push(s.state.to_vec());
            }
            loss.critic += self.online.train_batch(&inputs, &targets, &hp.sgd)?;
            loss.batches += 1;
        }
        self.sweeps += 1;
        if hp.target_sync_sweeps > 0 && self.sweeps.is_multiple_of(hp.target_sync_sweeps) {
            self.sync_target();
        }
        Ok(loss.averaged())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chosen_entry_targets_td_value() {
        let t = smoothed_q_target(&[0.0, 0.0, 0.0], 1, 1.0, 2.0);
        assert_eq!(t[1], 1.0);
        assert_eq!(t[0], 0.25);
        assert_eq!(t[2], 0.25);
    }

    #[test]
    fn sync_copies_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = DqnAgent::new(4, &mut rng).unwrap();
        agent.online = DenseNet::new(&q_layout(4).0, &q_layout(4).1, &mut rng).unwrap();
        assert_ne!(agent.online.params(), agent.target.params());
        agent.sync_target();
        assert_eq!(agent.online.to_bytes(), agent.target.to_bytes());
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let agent = DqnAgent::new(4, &mut rng).unwrap();
        assert_eq!(agent.epsilon, 1.0);
        let f = Features([0.3, 0.1, 0.0, 0.5, 0.5, 0.5, 0.3, 0.3]);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[agent.act(&f, Mode::Explore, &mut rng).unwrap()] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 / 4.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn epsilon_anneals_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut agent = DqnAgent::new(3, &mut rng).unwrap();
        let hp = AgentHyperparams::default();
        agent.anneal(0, &hp);
        assert_eq!(agent.epsilon, 1.0);
        agent.anneal(50, &hp);
        assert!((agent.epsilon - 0.525).abs() < 1e-12);
        agent.anneal(500, &hp);
        assert!((agent.epsilon - 0.05).abs() < 1e-12);
    }

    #[test]
    fn target_syncs_every_k_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let hp = AgentHyperparams {
            actions: 3,
            target_sync_sweeps: 2,
            ..AgentHyperparams::default()
        };
        let mut agent = DqnAgent::new(3, &mut rng).unwrap();
        let f = Features([0.3, 0.1, 0.0, 0.5, 0.5, 0.5, 0.3, 0.3]);
        let batch = || {
            vec![Sample {
                product: 0,
                period: 0,
                state: f,
                action: 1,
                reward: 1.0,
                next: f,
                terminal: false,
            }]
        };
        let initial = agent.target.params();
        agent.train_sweep(batch(), &hp, &mut rng).unwrap();
        assert_eq!(agent.target.params(), initial);
        agent.train_sweep(batch(), &hp, &mut rng).unwrap();
        assert_eq!(agent.target.params(), agent.online.params());
    }
}
