//! Flat `key = value` run configuration.
//!
//! ```text
//! # desk-scale feedback run
//! layers = 32_3_64_256
//! dims = 10x16x16
//! spacing = 1.25,0.7,0.7
//! seed_count = 20
//! total_iterations = 6000
//! feedback_mode = one_reflection
//! segments = 1000,1000+,1000+,3000
//! batch_size = 64
//! learning_rate = 0.001
//! rng_seed = 7
//! generation_batch = 400
//! threshold = 0.5
//! ```
//!
//! A `+` after a segment length injects accepted generated nodules into the
//! training set for that segment. `seeds_dir` optionally names a directory
//! written by [`NoduleSet::save_dir`](crate::NoduleSet::save_dir) to use
//! instead of synthetic seeds.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{LungError, Result};
use crate::net::{AdamParams, LayerSpec, TrainOptions};
use crate::voxel::{Dims, Spacing};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackMode {
    None,
    OneReflection,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::None => "none",
            FeedbackMode::OneReflection => "one_reflection",
        }
    }
}

impl FromStr for FeedbackMode {
    type Err = LungError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FeedbackMode::None),
            "one_reflection" => Ok(FeedbackMode::OneReflection),
            other => Err(LungError::InvalidConfig(format!(
                "unknown feedback_mode `{other}`"
            ))),
        }
    }
}

/// One training segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub iterations: u64,
    /// Train on the base set plus feedback generated just before the segment.
    pub inject: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub layers: LayerSpec,
    pub dims: Dims,
    pub spacing: Spacing,
    pub seed_count: usize,
    pub seeds_dir: Option<PathBuf>,
    pub total_iterations: u64,
    pub feedback_mode: FeedbackMode,
    pub segments: Vec<Segment>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rng_seed: u64,
    pub generation_batch: usize,
    pub threshold: f64,
}

impl Default for TrainConfig {
    /// Desk scale with two feedback rounds: 1/6, 1/6 (+), 1/6 (+), 1/2.
    fn default() -> Self {
        let seg = |iterations, inject| Segment { iterations, inject };
        Self {
            layers: LayerSpec(vec![32, 3, 64, 256]),
            dims: Dims::DESK,
            spacing: Spacing::CT,
            seed_count: 20,
            seeds_dir: None,
            total_iterations: 6000,
            feedback_mode: FeedbackMode::OneReflection,
            segments: vec![
                seg(1000, false),
                seg(1000, true),
                seg(1000, true),
                seg(3000, false),
            ],
            batch_size: 64,
            learning_rate: 1e-3,
            rng_seed: 7,
            generation_batch: 400,
            threshold: crate::DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    /// Plain training without feedback.
    pub fn single_segment(mut self, iterations: u64) -> Self {
        self.total_iterations = iterations;
        self.feedback_mode = FeedbackMode::None;
        self.segments = vec![Segment {
            iterations,
            inject: false,
        }];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LungError::InvalidConfig(m));
        if self.segments.is_empty() {
            return bad("at least one segment is required".into());
        }
        let sum: u64 = self.segments.iter().map(|s| s.iterations).sum();
        if sum != self.total_iterations {
            return bad(format!(
                "segments sum to {sum}, total_iterations is {}",
                self.total_iterations
            ));
        }
        if self.segments.iter().any(|s| s.iterations == 0) {
            return bad("segments must be non-empty".into());
        }
        match self.feedback_mode {
            FeedbackMode::None if self.segments.len() != 1 => {
                return bad("feedback_mode none takes a single segment".into());
            }
            FeedbackMode::None if self.segments[0].inject => {
                return bad("feedback_mode none cannot inject".into());
            }
            _ => {}
        }
        if self.segments[0].inject {
            return bad("the first segment cannot inject: nothing has been trained yet".into());
        }
        if self.seeds_dir.is_none() && self.seed_count < 2 {
            return bad("seed_count must be at least 2".into());
        }
        if self.batch_size == 0 || self.generation_batch == 0 {
            return bad("batch_size and generation_batch must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive".into());
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad("threshold must lie in (0, 1]".into());
        }
        if self.dims.is_empty() {
            return bad("dims must be positive".into());
        }
        Ok(())
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            batch_size: self.batch_size,
            adam: AdamParams {
                learning_rate: self.learning_rate,
                ..Default::default()
            },
        }
    }

    pub fn injection_count(&self) -> usize {
        self.segments.iter().filter(|s| s.inject).count()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen_total = false;
        let mut seen_segments = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LungError::InvalidConfig(format!("line {}: expected key = value", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let err = |what: &str| {
                LungError::InvalidConfig(format!("line {}: bad {key} `{value}`: {what}", n + 1))
            };
            match key {
                "layers" => cfg.layers = value.parse()?,
                "dims" => cfg.dims = parse_dims(value).ok_or_else(|| err("expected ZxYxX"))?,
                "spacing" => {
                    cfg.spacing = parse_spacing(value).ok_or_else(|| err("expected z,y,x in mm"))?
                }
                "seed_count" => cfg.seed_count = value.parse().map_err(|_| err("integer"))?,
                "seeds_dir" => {
                    cfg.seeds_dir = if value.is_empty() {
                        None
                    } else {
                        Some(PathBuf::from(value))
                    }
                }
                "total_iterations" => {
                    cfg.total_iterations = value.parse().map_err(|_| err("integer"))?;
                    seen_total = true;
                }
                "feedback_mode" => cfg.feedback_mode = value.parse()?,
                "segments" => {
                    cfg.segments = parse_segments(value)
                        .ok_or_else(|| err("comma-separated lengths, `+` to inject"))?;
                    seen_segments = true;
                }
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| err("integer"))?,
                "learning_rate" => cfg.learning_rate = value.parse().map_err(|_| err("number"))?,
                "rng_seed" => cfg.rng_seed = value.parse().map_err(|_| err("integer"))?,
                "generation_batch" => {
                    cfg.generation_batch = value.parse().map_err(|_| err("integer"))?
                }
                "threshold" => cfg.threshold = value.parse().map_err(|_| err("number"))?,
                other => {
                    return Err(LungError::InvalidConfig(format!(
                        "line {}: unknown key `{other}`",
                        n + 1
                    )))
                }
            }
        }
        // a lone total implies a single segment when feedback is off
        if seen_total && !seen_segments && cfg.feedback_mode == FeedbackMode::None {
            cfg.segments = vec![Segment {
                iterations: cfg.total_iterations,
                inject: false,
            }];
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_dims(s: &str) -> Option<Dims> {
    let v: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    match v[..] {
        [nz, ny, nx] if nz > 0 && ny > 0 && nx > 0 => Some(Dims::new(nz, ny, nx)),
        _ => None,
    }
}

fn parse_spacing(s: &str) -> Option<Spacing> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    match v[..] {
        [z, y, x] if [z, y, x].iter().all(|d| d.is_finite() && *d > 0.0) => {
            Some(Spacing::new(z, y, x))
        }
        _ => None,
    }
}

fn parse_segments(s: &str) -> Option<Vec<Segment>> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            let (num, inject) = match p.strip_suffix('+') {
                Some(n) => (n.trim(), true),
                None => (p, false),
            };
            num.parse()
                .ok()
                .map(|iterations| Segment { iterations, inject })
        })
        .collect()
}

/// Writes the same format [`TrainConfig::parse`] reads.
impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let segs: Vec<String> = self
            .segments
            .iter()
            .map(|s| format!("{}{}", s.iterations, if s.inject { "+" } else { "" }))
            .collect();
        let d = self.dims;
        let sp = self.spacing;
        writeln!(f, "layers = {}", self.layers)?;
        writeln!(f, "dims = {}x{}x{}", d.nz, d.ny, d.nx)?;
        writeln!(f, "spacing = {},{},{}", sp.z, sp.y, sp.x)?;
        writeln!(f, "seed_count = {}", self.seed_count)?;
        if let Some(dir) = &self.seeds_dir {
            writeln!(f, "seeds_dir = {}", dir.display())?;
        }
        writeln!(f, "total_iterations = {}", self.total_iterations)?;
        writeln!(f, "feedback_mode = {}", self.feedback_mode.as_str())?;
        writeln!(f, "segments = {}", segs.join(","))?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "learning_rate = {}", self.learning_rate)?;
        writeln!(f, "rng_seed = {}", self.rng_seed)?;
        writeln!(f, "generation_batch = {}", self.generation_batch)?;
        writeln!(f, "threshold = {}", self.threshold)
    }
}
