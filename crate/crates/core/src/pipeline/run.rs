use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::TrainConfig;
use super::generate::{generate, GeneratedBatch};
use crate::analyzer::{analyze_batch, write_feature_csv, BatchAnalysis, FeatureVector, SeedStats};
use crate::dataset::{augment, inject_feedback, synth_seeds, NoduleSet};
use crate::error::{LungError, Result};
use crate::metrics::MetricsReport;
use crate::net::{mean_reconstruction_mse, write_loss_csv, LossPoint, Network, Trainer};
use crate::rng::derive_seed;
use crate::voxel::GrayImage;

pub const WEIGHTS_FILE: &str = "network.bin";
pub const LOSS_FILE: &str = "loss.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const STATS_FILE: &str = "seed_stats.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const REPORT_FILE: &str = "report.txt";
pub const SEEDS_DIR: &str = "seeds";
pub const ACCEPTED_DIR: &str = "accepted";
pub const SAMPLES_FILE: &str = "samples.pgm";

/// Rows in the sample montage.
const MONTAGE_ROWS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct RoundSummary {
    pub segment: usize,
    pub iterations: u64,
    /// Accepted generated nodules added for this segment.
    pub injected: usize,
    pub training_set: usize,
    pub first_loss: f64,
    pub last_loss: f64,
    pub mean_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config: TrainConfig,
    pub metrics: Option<MetricsReport>,
    pub rounds: Vec<RoundSummary>,
    /// Mean per-voxel reconstruction MSE over the seeds after training.
    pub seed_mse: Option<f64>,
    pub artifacts: Vec<PathBuf>,
    /// Set when the run aborted.
    pub failed: Option<String>,
}

impl RunReport {
    fn new(config: &TrainConfig) -> Self {
        Self {
            config: config.clone(),
            metrics: None,
            rounds: Vec::new(),
            seed_mse: None,
            artifacts: Vec::new(),
            failed: None,
        }
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "status = {}",
            self.failed
                .as_deref()
                .map_or("ok".to_string(), |e| format!("failed: {e}"))
        )?;
        writeln!(f, "[config]")?;
        write!(f, "{}", self.config)?;
        writeln!(f, "[rounds]")?;
        writeln!(
            f,
            "segment,iterations,injected,training_set,first_loss,last_loss,mean_loss"
        )?;
        for r in &self.rounds {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                r.segment,
                r.iterations,
                r.injected,
                r.training_set,
                r.first_loss,
                r.last_loss,
                r.mean_loss
            )?;
        }
        if let Some(m) = &self.metrics {
            writeln!(f, "[metrics]")?;
            writeln!(f, "{}", MetricsReport::CSV_HEADER)?;
            writeln!(f, "{}", m.to_csv_row())?;
        }
        Ok(())
    }
}

/// Everything a completed run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub network: Network,
    pub seeds: NoduleSet,
    pub base: NoduleSet,
    pub stats: SeedStats,
    pub seed_features: Vec<FeatureVector>,
    pub history: Vec<LossPoint>,
    pub generated: GeneratedBatch,
    pub analysis: BatchAnalysis,
}

impl RunOutcome {
    pub fn metrics(&self) -> &MetricsReport {
        self.report
            .metrics
            .as_ref()
            .expect("completed runs carry metrics")
    }
}

/// An aborted run and the report up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub report: RunReport,
    pub error: LungError,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed: {}", self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Artifacts<'a> {
    dir: Option<&'a Path>,
}

impl Artifacts<'_> {
    /// Runs `write` with the artifact path if there is an output directory.
    fn emit(
        &self,
        report: &mut RunReport,
        name: &str,
        write: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            write(&path)?;
            report.artifacts.push(path);
        }
        Ok(())
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Seeds, augmentation, segmented training with optional feedback,
/// generation, repair, analysis and scoring. Artifacts go to `out_dir` when
/// given.
pub fn run(
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> std::result::Result<RunOutcome, Box<RunFailure>> {
    let mut report = RunReport::new(config);
    match run_inner(config, out_dir, &mut report) {
        Ok(parts) => Ok(parts.finish(report)),
        Err(error) => {
            report.failed = Some(error.to_string());
            if let Some(dir) = out_dir {
                let path = dir.join(REPORT_FILE);
                if fs::write(&path, report.to_string()).is_ok() {
                    report.artifacts.push(path);
                }
            }
            Err(Box::new(RunFailure { report, error }))
        }
    }
}

struct Parts {
    network: Network,
    seeds: NoduleSet,
    base: NoduleSet,
    stats: SeedStats,
    seed_features: Vec<FeatureVector>,
    history: Vec<LossPoint>,
    generated: GeneratedBatch,
    analysis: BatchAnalysis,
}

impl Parts {
    fn finish(self, report: RunReport) -> RunOutcome {
        RunOutcome {
            report,
            network: self.network,
            seeds: self.seeds,
            base: self.base,
            stats: self.stats,
            seed_features: self.seed_features,
            history: self.history,
            generated: self.generated,
            analysis: self.analysis,
        }
    }
}

/// Seed offsets for the per-round streams, clear of seed indices.
const ROUND_SEED_BASE: u64 = 1 << 32;

fn run_inner(
    config: &TrainConfig,
    out_dir: Option<&Path>,
    report: &mut RunReport,
) -> Result<Parts> {
    config.validate()?;
    let out = Artifacts { dir: out_dir };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    out.emit(report, CONFIG_FILE, |p| {
        Ok(fs::write(p, config.to_string())?)
    })?;

    let seeds = match &config.seeds_dir {
        Some(dir) => NoduleSet::load_dir(dir)?,
        None => synth_seeds(
            config.seed_count,
            config.dims,
            config.spacing,
            config.rng_seed,
        )?,
    };
    if seeds.dims() != config.dims {
        return Err(LungError::InvalidConfig(format!(
            "seeds are {}, config says {}",
            seeds.dims(),
            config.dims
        )));
    }
    let (stats, seed_features) = SeedStats::from_set(&seeds, config.threshold)?;
    out.emit(report, SEEDS_DIR, |p| seeds.save_dir(p).map(drop))?;
    out.emit(report, STATS_FILE, |p| Ok(fs::write(p, stats.to_json())?))?;

    let base = augment(&seeds)?;
    let net = Network::new(config.dims.len(), &config.layers, config.rng_seed)?;
    let mut trainer = Trainer::new(net, config.train_options(), config.rng_seed)?;
    let mut history = Vec::with_capacity(config.total_iterations as usize);

    for (k, segment) in config.segments.iter().enumerate() {
        let round_seed = derive_seed(config.rng_seed, ROUND_SEED_BASE + k as u64);
        let training = if segment.inject {
            let batch = generate(
                trainer.network(),
                config.generation_batch,
                config.dims,
                config.spacing,
                round_seed,
                config.threshold,
            )?;
            let analysis = analyze_batch(&batch.set, &stats, round_seed, config.threshold);
            inject_feedback(&base, &analysis.accepted, round_seed)?
        } else {
            base.clone()
        };
        let start = history.len();
        trainer.run(&training, segment.iterations, &mut history)?;
        let losses: Vec<f64> = history[start..].iter().map(|p| p.mse).collect();
        report.rounds.push(RoundSummary {
            segment: k,
            iterations: segment.iterations,
            injected: training.len() - base.len(),
            training_set: training.len(),
            first_loss: losses[0],
            last_loss: *losses.last().expect("segments are non-empty"),
            mean_loss: losses.iter().sum::<f64>() / losses.len() as f64,
        });
    }

    let network = trainer.into_network();
    out.emit(report, WEIGHTS_FILE, |p| network.save(p))?;
    out.emit(report, LOSS_FILE, |p| {
        write_file(p, |w| write_loss_csv(w, &history))
    })?;
    let seed_mse = mean_reconstruction_mse(&network, &seeds)?;
    report.seed_mse = Some(seed_mse);

    let generated = generate(
        &network,
        config.generation_batch,
        config.dims,
        config.spacing,
        config.rng_seed,
        config.threshold,
    )?;
    let analysis = analyze_batch(&generated.set, &stats, config.rng_seed, config.threshold);
    out.emit(report, FEATURES_FILE, |p| {
        write_file(p, |w| write_feature_csv(w, &analysis.rows))
    })?;
    out.emit(report, ACCEPTED_DIR, |p| {
        analysis.accepted.save_dir(p).map(drop)
    })?;
    out.emit(report, SAMPLES_FILE, |p| {
        let rows: Vec<_> = generated.set.grids().take(MONTAGE_ROWS).cloned().collect();
        GrayImage::montage(&rows, 4)?.save_pgm(p)
    })?;

    let mut counts = generated.counts();
    counts.accepted = analysis.accepted.len();
    let metrics = MetricsReport::compute(
        &analysis.accepted_features(),
        &seed_features,
        &stats,
        seed_mse,
        counts,
    )?;
    out.emit(report, METRICS_FILE, |p| {
        Ok(fs::write(
            p,
            format!("{}\n{}\n", MetricsReport::CSV_HEADER, metrics.to_csv_row()),
        )?)
    })?;
    report.metrics = Some(metrics);
    if let Some(dir) = out_dir {
        let path = dir.join(REPORT_FILE);
        report.artifacts.push(path.clone());
        fs::write(&path, report.to_string())?;
    }

    Ok(Parts {
        network,
        seeds,
        base,
        stats,
        seed_features,
        history,
        generated,
        analysis,
    })
}
