//! Evaluation metrics for a trained generator.
//!
//! - `AC`: fraction of a generated batch the analyzer accepts.
//! - `MSE`: per-voxel reconstruction error on the seed set.
//! - `FtDist`: mean normalized distance from each accepted nodule to its
//!   nearest seed in feature space (novelty, higher is better).
//! - `FtMMSE`: mean squared normalized gap between accepted and seed feature
//!   means (drift, lower is better).
//! - `Score = (FtDist - 1) / ((FtMMSE + 0.1) (MSE + 0.1) (1 - AC))`.

use std::fmt;

use crate::analyzer::{FeatureVector, SeedStats, FEATURE_COUNT};
use crate::error::{LungError, Result};

pub fn ft_dist(
    accepted: &[FeatureVector],
    seeds: &[FeatureVector],
    stats: &SeedStats,
) -> Result<f64> {
    if accepted.is_empty() || seeds.is_empty() {
        return Err(LungError::EmptySet);
    }
    let total: f64 = accepted
        .iter()
        .map(|y| {
            seeds
                .iter()
                .map(|s| normalized_distance(y, s, stats))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / accepted.len() as f64)
}

fn normalized_distance(a: &FeatureVector, b: &FeatureVector, stats: &SeedStats) -> f64 {
    let (a, b) = (a.as_array(), b.as_array());
    (0..FEATURE_COUNT)
        .map(|i| ((a[i] - b[i]) / stats.sigma[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn ft_mmse(
    accepted: &[FeatureVector],
    seeds: &[FeatureVector],
    stats: &SeedStats,
) -> Result<f64> {
    if accepted.is_empty() || seeds.is_empty() {
        return Err(LungError::EmptySet);
    }
    let accepted_mean = feature_mean(accepted);
    let seed_mean = feature_mean(seeds);
    let sum: f64 = (0..FEATURE_COUNT)
        .map(|i| ((accepted_mean[i] - seed_mean[i]) / stats.sigma[i]).powi(2))
        .sum();
    Ok(sum / FEATURE_COUNT as f64)
}

fn feature_mean(set: &[FeatureVector]) -> [f64; FEATURE_COUNT] {
    let n = set.len() as f64;
    std::array::from_fn(|i| set.iter().map(|f| f.as_array()[i]).sum::<f64>() / n)
}

/// Composite network score. Unbounded when every generated nodule is accepted.
pub fn score(ft_dist: f64, ft_mmse: f64, mse: f64, ac: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ac) {
        return Err(LungError::InvalidArgument(format!(
            "acceptance fraction {ac} outside [0, 1]"
        )));
    }
    if ac == 1.0 {
        return Err(LungError::DegenerateAcceptance);
    }
    Ok((ft_dist - 1.0) / ((ft_mmse + 0.1) * (mse + 0.1) * (1.0 - ac)))
}

/// Why a report carries no finite score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreFlag {
    /// Everything generated was accepted (`AC = 1`).
    Unbounded,
    /// Nothing was accepted, so the feature metrics are undefined.
    NoneAccepted,
}

impl ScoreFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreFlag::Unbounded => "unbounded",
            ScoreFlag::NoneAccepted => "none_accepted",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchCounts {
    pub generated: usize,
    /// Single component before repair.
    pub clean: usize,
    /// Needed repair (several components or no on-voxels).
    pub reconnected: usize,
    pub inverted: usize,
    pub accepted: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub ac: f64,
    pub mse: f64,
    pub ft_dist: Option<f64>,
    pub ft_mmse: Option<f64>,
    pub score: Option<f64>,
    pub flag: Option<ScoreFlag>,
    pub counts: BatchCounts,
}

impl MetricsReport {
    pub fn compute(
        accepted: &[FeatureVector],
        seeds: &[FeatureVector],
        stats: &SeedStats,
        mse: f64,
        counts: BatchCounts,
    ) -> Result<Self> {
        if counts.generated == 0 {
            return Err(LungError::EmptySet);
        }
        let ac = counts.accepted as f64 / counts.generated as f64;
        if accepted.is_empty() {
            return Ok(Self {
                ac,
                mse,
                ft_dist: None,
                ft_mmse: None,
                score: None,
                flag: Some(ScoreFlag::NoneAccepted),
                counts,
            });
        }
        let dist = ft_dist(accepted, seeds, stats)?;
        let mmse = ft_mmse(accepted, seeds, stats)?;
        let (score, flag) = match score(dist, mmse, mse, ac) {
            Ok(s) => (Some(s), None),
            Err(LungError::DegenerateAcceptance) => (None, Some(ScoreFlag::Unbounded)),
            Err(e) => return Err(e),
        };
        Ok(Self {
            ac,
            mse,
            ft_dist: Some(dist),
            ft_mmse: Some(mmse),
            score,
            flag,
            counts,
        })
    }

    pub const CSV_HEADER: &'static str =
        "ac,mse,mse_x1000,ft_dist,ft_mmse,score,flag,generated,clean,reconnected,inverted,accepted";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let c = &self.counts;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.ac,
            self.mse,
            self.mse * 1000.0,
            opt(self.ft_dist),
            opt(self.ft_mmse),
            opt(self.score),
            self.flag.map(ScoreFlag::as_str).unwrap_or(""),
            c.generated,
            c.clean,
            c.reconnected,
            c.inverted,
            c.accepted
        )
    }

    /// Parses a header line plus one row as written by [`to_csv_row`](Self::to_csv_row).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| LungError::Format("empty metrics file".into()))?;
        if header.trim() != Self::CSV_HEADER {
            return Err(LungError::Format("unexpected metrics header".into()));
        }
        let row = lines
            .next()
            .ok_or_else(|| LungError::Format("metrics file has no row".into()))?;
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 12 {
            return Err(LungError::Format(format!(
                "metrics row has {} fields, expected 12",
                f.len()
            )));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| LungError::Format(format!("bad number `{s}`")))
        };
        let opt = |s: &str| {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| LungError::Format(format!("bad count `{s}`")))
        };
        let flag = match f[6].trim() {
            "" => None,
            "unbounded" => Some(ScoreFlag::Unbounded),
            "none_accepted" => Some(ScoreFlag::NoneAccepted),
            other => return Err(LungError::Format(format!("unknown flag `{other}`"))),
        };
        Ok(Self {
            ac: num(f[0])?,
            mse: num(f[1])?,
            ft_dist: opt(f[3])?,
            ft_mmse: opt(f[4])?,
            score: opt(f[5])?,
            flag,
            counts: BatchCounts {
                generated: int(f[7])?,
                clean: int(f[8])?,
                reconnected: int(f[9])?,
                inverted: int(f[10])?,
                accepted: int(f[11])?,
            },
        })
    }
}

/// Table-style summary, MSE shown x1000.
impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
        let score = match (self.score, self.flag) {
            (Some(s), _) => format!("{s:.1}"),
            (None, Some(flag)) => flag.as_str().to_string(),
            (None, None) => "-".into(),
        };
        write!(
            f,
            "AC% {:.0} | MSE {:.2} | FtDist {} | FtMMSE {} | Score {} | Clean {} | Invert {} | Accepted {}/{}",
            self.ac * 100.0,
            self.mse * 1000.0,
            opt(self.ft_dist),
            opt(self.ft_mmse),
            score,
            self.counts.clean,
            self.counts.inverted,
            self.counts.accepted,
            self.counts.generated
        )
    }
}
