use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::rollout::{EpisodeMetrics, METRICS_FILE};
use crate::agents::{Features, Mode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub level: f64,
    pub forecast: f64,
    /// Critic value, or the best Q-value for DQN; absent for the heuristic.
    pub value: Option<f64>,
    /// Greedy desired replenishment before projection.
    pub replenishment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub resolution: usize,
    pub cells: Vec<HeatmapCell>,
}

/// Sweeps inventory level and forecast over `[0, 1]^2` with every other
/// feature held at its training mean.
pub fn emit_heatmaps(checkpoint: &Checkpoint, resolution: usize) -> Result<HeatmapGrid> {
    if resolution < 2 {
        return Err(Error::invalid(
            "heatmap resolution",
            "needs at least 2 points per axis",
        ));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let base = checkpoint.statistics.feature_means;
    // Greedy acting draws nothing from the generator.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut cells = Vec::with_capacity(resolution * resolution);
    for a in 0..resolution {
        for b in 0..resolution {
            let (level, forecast) = (a as f64 * step, b as f64 * step);
            let mut f = base.0;
            f[0] = level;
            f[1] = forecast;
            let f = Features(f);
            let decision = checkpoint.agent.decide(
                &[f],
                &checkpoint.grid,
                Mode::Greedy,
                &checkpoint.hyperparams,
                &mut rng,
            )?;
            cells.push(HeatmapCell {
                level,
                forecast,
                value: checkpoint.agent.value(&f)?,
                replenishment: decision.desired[0],
            });
        }
    }
    Ok(HeatmapGrid { resolution, cells })
}

/// Writes `heatmap_policy.csv` and, for agents with a critic,
/// `heatmap_value.csv`. Returns the files written.
pub fn write_heatmaps(grid: &HeatmapGrid, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let policy = out_dir.join("heatmap_policy.csv");
    let mut w = csv::Writer::from_path(&policy)?;
    w.write_record(["level", "forecast", "replenishment"])?;
    for c in &grid.cells {
        w.serialize((c.level, c.forecast, c.replenishment))?;
    }
    w.flush()?;
    written.push(policy);
    if grid.cells.iter().all(|c| c.value.is_some()) && !grid.cells.is_empty() {
        let value = out_dir.join("heatmap_value.csv");
        let mut w = csv::Writer::from_path(&value)?;
        w.write_record(["level", "forecast", "value"])?;
        for c in &grid.cells {
            w.serialize((c.level, c.forecast, c.value))?;
        }
        w.flush()?;
        written.push(value);
    }
    Ok(written)
}

pub fn read_metrics(run_dir: &Path) -> Result<Vec<EpisodeMetrics>> {
    let path = run_dir.join(METRICS_FILE);
    if !path.exists() {
        return Err(Error::invalid(
            "run directory",
            format!("{} not found", path.display()),
        ));
    }
    let mut rdr = csv::Reader::from_path(&path)?;
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ComponentRow {
    episode: usize,
    business: f64,
    internal: f64,
    stockout: f64,
    wastage: f64,
    spread: f64,
    mean_rho: f64,
}

/// Per-episode reward components of a finished run, written to
/// `reward_components.csv` in the run directory.
pub fn emit_reward_components(run_dir: &Path) -> Result<PathBuf> {
    let metrics = read_metrics(run_dir)?;
    let path = run_dir.join("reward_components.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for m in metrics {
        w.serialize(ComponentRow {
            episode: m.episode,
            business: m.business,
            internal: m.internal,
            stockout: m.stockout,
            wastage: m.wastage,
            spread: m.spread,
            mean_rho: m.mean_rho,
        })?;
    }
    w.flush()?;
    Ok(path)
}
