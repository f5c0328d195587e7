//! End-to-end runs: training with optional feedback rounds, generation,
//! repair, analysis and scoring, plus sweeps and latent-space tools.

mod config;
mod generate;
mod latent;
mod run;
mod sweep;

pub use config::{FeedbackMode, Segment, TrainConfig};
pub use generate::{generate, repair, GenFlags, GeneratedBatch};
pub use latent::{interpolate, latent_scatter, LatentScatter};
pub use run::{
    run, RoundSummary, RunFailure, RunOutcome, RunReport, ACCEPTED_DIR, CONFIG_FILE, FEATURES_FILE,
    LOSS_FILE, METRICS_FILE, REPORT_FILE, SAMPLES_FILE, SEEDS_DIR, STATS_FILE, WEIGHTS_FILE,
};
pub use sweep::{bottleneck_configs, sweep, SweepReport, SweepRow};
