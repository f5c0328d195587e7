//! Synthetic 3D lung nodule generation.
//!
//! A dense autoencoder is trained on a handful of seed voxel shapes expanded
//! by reflections and half-pixel shifts. Its decoder turns points of the
//! bounded latent cube `[-1, 1]^d` into new shapes, which are forced into a
//! single connected component and then screened by a statistical shape
//! analyzer. Whole configurations are ranked by a composite score.
//!
//! Module map:
//!
//! - [`voxel`]: grids, binarization, labeling, reconnection, reflections.
//! - [`dataset`]: synthetic seeds, 16x augmentation, feedback injection.
//! - [`net`]: the autoencoder, backpropagation and Adam.
//! - [`analyzer`]: twelve shape features and the acceptance filter.
//! - [`metrics`]: FtDist, FtMMSE and the composite score.
//! - [`pipeline`]: end-to-end runs, generation, interpolation and sweeps.

pub mod analyzer;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod voxel;

pub use analyzer::{AcceptanceState, FeatureVector, SeedStats};
pub use dataset::{NoduleRecord, NoduleSet, Provenance};
pub use error::{LungError, Result};
pub use metrics::MetricsReport;
pub use net::{AdamState, LatentVector, Network};
pub use pipeline::{RunReport, TrainConfig};
pub use voxel::{BinaryMask, ComponentLabeling, Dims, Spacing, VoxelGrid};

/// Binarization threshold used wherever on/off voxels are needed.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
