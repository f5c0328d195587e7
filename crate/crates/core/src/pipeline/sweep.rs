use std::io::Write;

use super::config::TrainConfig;
use super::run::run;
use crate::error::{LungError, Result};
use crate::rng::derive_seed;

/// One configuration averaged over its repeats.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub runs: usize,
    pub failures: Vec<String>,
    pub ac: f64,
    pub mse: f64,
    /// Means over the runs that produced the value.
    pub ft_dist: Option<f64>,
    pub ft_mmse: Option<f64>,
    pub score: Option<f64>,
    /// Runs without a finite score.
    pub unscored: usize,
    pub clean: f64,
    pub inverted: f64,
    pub accepted: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub repeats: usize,
    /// Highest mean score first; unscored rows last.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str =
        "label,runs,failures,ac,mse_x1000,ft_dist,ft_mmse,score,unscored,clean,inverted,accepted";

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.label,
                r.runs,
                r.failures.len(),
                r.ac,
                r.mse * 1000.0,
                opt(r.ft_dist),
                opt(r.ft_mmse),
                opt(r.score),
                r.unscored,
                r.clean,
                r.inverted,
                r.accepted
            )?;
        }
        Ok(())
    }
}

/// Copies of `base` differing only in bottleneck width.
pub fn bottleneck_configs(base: &TrainConfig, widths: &[usize]) -> Vec<TrainConfig> {
    widths
        .iter()
        .map(|&w| TrainConfig {
            layers: base.layers.with_bottleneck_width(w),
            ..base.clone()
        })
        .collect()
}

/// Repeat `r` of a configuration runs with seed `derive_seed(rng_seed, r)`.
/// Failed runs are recorded and skipped.
pub fn sweep(configs: &[TrainConfig], repeats: usize) -> Result<SweepReport> {
    if repeats == 0 {
        return Err(LungError::InvalidArgument(
            "repeats must be at least 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let mut metrics = Vec::with_capacity(repeats);
        let mut failures = Vec::new();
        for r in 0..repeats {
            let cfg = TrainConfig {
                rng_seed: derive_seed(cfg.rng_seed, r as u64),
                ..cfg.clone()
            };
            match run(&cfg, None) {
                Ok(o) => metrics.push(o.metrics().clone()),
                Err(f) => failures.push(f.error.to_string()),
            }
        }
        let n = metrics.len();
        let mean = |f: &dyn Fn(&crate::metrics::MetricsReport) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                metrics.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let mean_opt = |f: &dyn Fn(&crate::metrics::MetricsReport) -> Option<f64>| {
            let vals: Vec<f64> = metrics.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        rows.push(SweepRow {
            label: cfg.layers.to_string(),
            runs: n,
            ac: mean(&|m| m.ac),
            mse: mean(&|m| m.mse),
            ft_dist: mean_opt(&|m| m.ft_dist),
            ft_mmse: mean_opt(&|m| m.ft_mmse),
            score: mean_opt(&|m| m.score),
            unscored: metrics.iter().filter(|m| m.score.is_none()).count(),
            clean: mean(&|m| m.counts.clean as f64),
            inverted: mean(&|m| m.counts.inverted as f64),
            accepted: mean(&|m| m.counts.accepted as f64),
            failures,
        });
    }
    rows.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(SweepReport { repeats, rows })
}
