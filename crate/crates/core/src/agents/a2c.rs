//! Advantage actor-critic with a shared actor and critic for all products.
//!
//! Two actor losses are supported: the distance-smoothed MSE target (the
//! default) and the usual advantage-weighted cross-entropy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::Sample;
use super::features::{Features, FEATURE_COUNT};
use super::policy::{action_distribution, greedy_index, sample_index, smoothed_target, Mode};
use super::{AgentHyperparams, SweepLoss};
use crate::error::Result;
use crate::nn::{softmax, Activation, DenseNet, Target};

pub const CRITIC_HIDDEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActorLoss {
    /// MSE toward the smoothed target distribution; relu outputs.
    Smoothed,
    /// Advantage-weighted cross-entropy on softmax outputs.
    CrossEntropy,
}

pub fn actor_layout(actions: usize, loss: ActorLoss) -> (Vec<usize>, Vec<Activation>) {
    let out = match loss {
        ActorLoss::Smoothed => Activation::Relu,
        ActorLoss::CrossEntropy => Activation::Linear,
    };
    (
        vec![FEATURE_COUNT, 2 * actions, 2 * actions, actions],
        vec![Activation::Tanh, Activation::Tanh, out],
    )
}

pub fn critic_layout(output: Activation) -> (Vec<usize>, Vec<Activation>) {
    (
        vec![FEATURE_COUNT, CRITIC_HIDDEN, 1],
        vec![Activation::Tanh, output],
    )
}

/// TD(0) advantage `r + gamma V(s') (1 - terminal) - V(s)`.
pub fn td0_advantage(
    critic: &DenseNet,
    state: &Features,
    reward: f64,
    next: &Features,
    gamma: f64,
    terminal: bool,
) -> Result<f64> {
    let v = critic.forward(state.as_slice())?[0];
    let bootstrap = if terminal {
        0.0
    } else {
        gamma * critic.forward(next.as_slice())?[0]
    };
    Ok(reward + bootstrap - v)
}

#[derive(Debug, Clone)]
pub struct A2cAgent {
    pub loss: ActorLoss,
    pub actor: DenseNet,
    pub critic: DenseNet,
}

impl A2cAgent {
    pub fn new<R: Rng + ?Sized>(
        loss: ActorLoss,
        actions: usize,
        critic_output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let (sizes, acts) = actor_layout(actions, loss);
        let actor = DenseNet::new(&sizes, &acts, rng)?;
        let (sizes, acts) = critic_layout(critic_output);
        let critic = DenseNet::new(&sizes, &acts, rng)?;
        Ok(A2cAgent { loss, actor, critic })
    }

    /// Action probabilities for one product, with `floor` spread uniformly.
    pub fn probabilities(&self, features: &Features, floor: f64) -> Result<Vec<f64>> {
        let out = self.actor.forward(features.as_slice())?;
        Ok(match self.loss {
            ActorLoss::Smoothed => action_distribution(&out, floor),
            ActorLoss::CrossEntropy => {
                let n = out.len() as f64;
                softmax(&out)
                    .into_iter()
                    .map(|p| (1.0 - floor) * p + floor / n)
                    .collect()
            }
        })
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        features: &Features,
        mode: Mode,
        floor: f64,
        rng: &mut R,
    ) -> Result<usize> {
        match mode {
            Mode::Greedy => Ok(greedy_index(&self.probabilities(features, 0.0)?)),
            Mode::Explore => Ok(sample_index(&self.probabilities(features, floor)?, rng)),
        }
    }

    pub fn value(&self, features: &Features) -> Result<f64> {
        Ok(self.critic.forward(features.as_slice())?[0])
    }

    /// One pass over the buffered samples in shuffled minibatches. Each batch
    /// takes a critic step toward the TD(0) target and an actor step with the
    /// advantages measured before that critic step.
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
            let mut critic_targets = Vec::with_capacity(batch.len());
            let mut actor_targets = Vec::with_capacity(batch.len());
            for s in batch {
                let v = self.value(&s.state)?;
                let bootstrap = if s.terminal {
                    0.0
                } else {
                    hp.gamma * self.value(&s.next)?
                };
                let td_target = s.reward + bootstrap;
                let delta = td_target - v;
                critic_targets.push(Target::Values(vec![td_target]));
                actor_targets.push(match self.loss {
                    ActorLoss::Smoothed => {
                        let out = self.actor.forward(s.state.as_slice())?;
                        Target::Values(smoothed_target(&out, s.action, delta, hp.q)?)
                    }
                    ActorLoss::CrossEntropy => Target::Advantage {
                        action: s.action,
                        advantage: delta,
                    },
                });
                inputs.push(s.state.to_vec());
            }
            loss.critic += self.critic.train_batch(&inputs, &critic_targets, &hp.sgd)?;
            loss.actor += self.actor.train_batch(&inputs, &actor_targets, &hp.sgd)?;
            loss.batches += 1;
        }
        Ok(loss.averaged())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::SgdConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn features(level: f64) -> Features {
        Features([level, 0.1, 0.02, 0.5, 0.5, 0.5, 0.4, 0.4])
    }

    fn sample(action: usize, reward: f64) -> Sample {
        Sample {
            product: 0,
            period: 0,
            state: features(0.3),
            action,
            reward,
            next: features(0.35),
            terminal: false,
        }
    }

    /// Linear critic reading V straight off the inventory-level feature.
    fn level_critic() -> DenseNet {
        let mut net = DenseNet::zeros(&[8, 1], &[Activation::Linear]).unwrap();
        let mut p = vec![0.0; 9];
        p[0] = 1.0;
        net.set_params(&p).unwrap();
        net
    }

    #[test]
    fn td0_examples() {
        let zero = DenseNet::zeros(&[8, 4, 1], &[Activation::Tanh, Activation::Tanh]).unwrap();
        let s = features(0.2);
        assert_eq!(td0_advantage(&zero, &s, 0.45, &s, 0.99, false).unwrap(), 0.45);

        let critic = level_critic();
        let (s, next) = (features(0.5), features(0.6));
        assert!((td0_advantage(&critic, &s, 0.7, &next, 0.0, false).unwrap() - 0.2).abs() < 1e-12);
        assert!((td0_advantage(&critic, &s, 0.7, &next, 0.99, false).unwrap() - 0.794).abs() < 1e-12);
        assert!((td0_advantage(&critic, &s, 0.7, &next, 0.99, true).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_advantage_keeps_actor_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = A2cAgent::new(ActorLoss::Smoothed, 5, Activation::Tanh, &mut rng).unwrap();
        // A critic that is identically zero with reward zero gives delta = 0.
        let (sizes, acts) = critic_layout(Activation::Tanh);
        agent.critic = DenseNet::zeros(&sizes, &acts).unwrap();
        // Make the actor output a proper distribution already so the MSE
        // target equals the output.
        let (sizes, acts) = actor_layout(5, ActorLoss::Smoothed);
        let mut actor = DenseNet::zeros(&sizes, &acts).unwrap();
        let mut p = actor.params();
        let n = p.len();
        for k in 0..5 {
            p[n - 5 + k] = 0.2;
        }
        actor.set_params(&p).unwrap();
        agent.actor = actor;
        let before = agent.actor.params();
        let hp = AgentHyperparams {
            actions: 5,
            ..AgentHyperparams::default()
        };
        let samples = (0..64).map(|_| sample(2, 0.0)).collect();
        agent.train_sweep(samples, &hp, &mut rng).unwrap();
        for (a, b) in agent.actor.params().iter().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn critic_moves_toward_td_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agent = A2cAgent::new(ActorLoss::Smoothed, 5, Activation::Tanh, &mut rng).unwrap();
        let s = sample(1, 0.4);
        let target = s.reward + 0.9 * agent.value(&s.next).unwrap();
        let before = (agent.value(&s.state).unwrap() - target).abs();
        let hp = AgentHyperparams {
            actions: 5,
            gamma: 0.9,
            sgd: SgdConfig {
                learning_rate: 1e-3,
                momentum: 0.0,
                batch_size: 32,
            },
            ..AgentHyperparams::default()
        };
        agent.train_sweep(vec![s.clone()], &hp, &mut rng).unwrap();
        let after = (agent.value(&s.state).unwrap() - target).abs();
        assert!(after < before, "{after} !< {before}");
    }

    fn prob_after_step(advantage_sign: f64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let agent = A2cAgent::new(ActorLoss::CrossEntropy, 5, Activation::Tanh, &mut rng).unwrap();
        let s = features(0.4);
        let before = agent.probabilities(&s, 0.0).unwrap()[3];
        let mut actor = agent.actor.clone();
        let cfg = SgdConfig {
            learning_rate: 1e-3,
            momentum: 0.0,
            batch_size: 1,
        };
        actor
            .train_batch(
                &[s.to_vec()],
                &[Target::Advantage {
                    action: 3,
                    advantage: advantage_sign * 0.5,
                }],
                &cfg,
            )
            .unwrap();
        let after = softmax(&actor.forward(s.as_slice()).unwrap())[3];
        (before, after)
    }

    #[test]
    fn cross_entropy_step_follows_advantage_sign() {
        let (before, after) = prob_after_step(1.0);
        assert!(after > before);
        let (before, after) = prob_after_step(-1.0);
        assert!(after < before);
    }

    #[test]
    fn greedy_action_uses_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (sizes, acts) = actor_layout(4, ActorLoss::Smoothed);
        let mut actor = DenseNet::zeros(&sizes, &acts).unwrap();
        let mut p = actor.params();
        let n = p.len();
        p[n - 2] = 1.0;
        actor.set_params(&p).unwrap();
        let mut agent = A2cAgent::new(ActorLoss::Smoothed, 4, Activation::Tanh, &mut rng).unwrap();
        agent.actor = actor;
        assert_eq!(
            agent.act(&features(0.1), Mode::Greedy, 0.05, &mut rng).unwrap(),
            2
        );
    }
}
