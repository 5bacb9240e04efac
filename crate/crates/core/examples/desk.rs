//! Trains one agent on the bundled desk-scale instance and prints the learning
//! curve and the test reward.
//!
//! `cargo run --release --example desk -- a2c_mod 7 [key=value...]`
//!
//! Keys: critic (tanh|linear), gamma, episodes, lr, q, tightness, rate.

use invrl::agents::AgentKind;
use invrl::harness::{Instance, RunConfig, Session};
use invrl::nn::Activation;

fn main() -> invrl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let kind: AgentKind = args.get(1).map_or("a2c_mod", String::as_str).parse()?;
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let mut config = RunConfig::desk(kind, seed);
    for kv in args.iter().skip(3) {
        let (k, v) = kv.split_once('=').expect("key=value");
        match k {
            "critic" => {
                config.hyperparams.critic_output = match v {
                    "linear" => Activation::Linear,
                    _ => Activation::Tanh,
                }
            }
            "gamma" => config.hyperparams.gamma = v.parse().unwrap(),
            "episodes" => config.episodes = v.parse().unwrap(),
            "lr" => config.hyperparams.sgd.learning_rate = v.parse().unwrap(),
            "q" => config.hyperparams.q = v.parse().unwrap(),
            "tightness" => config.capacity.tightness = v.parse().unwrap(),
            "rate" => config.data.generator.base_rates = vec![v.parse().unwrap()],
            _ => panic!("unknown key {k}"),
        }
    }
    let instance = Instance::prepare(&config)?;
    let mut session = Session::new(config.clone(), instance)?;
    let start = std::time::Instant::now();
    for _ in 0..config.episodes {
        let m = session.train_episode()?;
        if m.episode % 10 == 0 || m.episode + 1 == config.episodes {
            println!(
                "ep {:4} business {:.4} internal {:.4} rho {:.3} stockout {:.3} waste {:.4} spread {:.3} level {:.3} loss {:.4}/{:.4}",
                m.episode, m.business, m.internal, m.mean_rho, m.stockout, m.wastage, m.spread, m.mean_level,
                m.actor_loss, m.critic_loss
            );
        }
    }
    let test = session.evaluate()?;
    println!(
        "{kind} test business {:.4} internal {:.4} rho {:.3} stockout {:.3} waste {:.4} spread {:.3} ({:.1?}, violations {})",
        test.business, test.internal, test.mean_rho, test.stockout, test.wastage, test.spread,
        start.elapsed(), session.violations()
    );
    Ok(())
}
