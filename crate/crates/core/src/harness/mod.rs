//! Run configuration, instance preparation, training and evaluation loops,
//! checkpoints and plot data.

mod checkpoint;
mod config;
mod instance;
mod report;
mod rollout;

pub use checkpoint::{Checkpoint, FrozenStatistics};
pub use config::{CapacitySettings, DataConfig, ForecastConfig, RunConfig};
pub use instance::Instance;
pub use report::{
    emit_heatmaps, emit_reward_components, read_metrics, write_heatmaps, HeatmapCell, HeatmapGrid,
};
pub use rollout::{
    checkpoint_path, latest_checkpoint, run_evaluation, run_training, EpisodeMetrics, RunSummary, Session,
    CHECKPOINT_DIR, CONFIG_FILE, MANIFEST_FILE, METRICS_FILE,
};
