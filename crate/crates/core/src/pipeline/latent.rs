use super::generate::{decode_all, GeneratedBatch};
use crate::dataset::NoduleSet;
use crate::error::{LungError, Result};
use crate::net::{LatentVector, Network};
use crate::voxel::VoxelGrid;

/// `steps` evenly spaced decodes on the latent segment between the encodings
/// of `a` and `b`, endpoints included. `raw[0]` and `raw[steps - 1]` are the
/// reconstructions of `a` and `b`.
pub fn interpolate(
    net: &Network,
    a: &VoxelGrid,
    b: &VoxelGrid,
    steps: usize,
    threshold: f64,
) -> Result<GeneratedBatch> {
    if steps < 2 {
        return Err(LungError::InvalidArgument(
            "interpolation needs at least 2 steps".into(),
        ));
    }
    if a.dims() != b.dims() {
        return Err(LungError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let za = net.encode(a)?;
    let zb = net.encode(b)?;
    let latents = (0..steps)
        .map(|i| za.lerp(&zb, i as f64 / (steps - 1) as f64))
        .collect::<Result<Vec<LatentVector>>>()?;
    decode_all(net, latents, a.dims(), a.spacing(), threshold)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentScatter {
    pub dims: (usize, usize),
    /// One point per seed, in seed order.
    pub points: Vec<[f64; 2]>,
    /// Population variance of every latent dimension over the seeds.
    pub variance: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl LatentScatter {
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "seed,z{},z{}", self.dims.0, self.dims.1)?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(w, "{i},{},{}", p[0], p[1])?;
        }
        Ok(())
    }
}

/// Seed encodings projected onto two latent dimensions.
pub fn latent_scatter(
    net: &Network,
    seeds: &NoduleSet,
    dims: (usize, usize),
) -> Result<LatentScatter> {
    let d = net.latent_dim();
    if dims.0 >= d || dims.1 >= d {
        return Err(LungError::InvalidArgument(format!(
            "latent dimensions {dims:?} out of range for width {d}"
        )));
    }
    if seeds.is_empty() {
        return Err(LungError::EmptySet);
    }
    let codes = seeds
        .grids()
        .map(|g| net.encode(g))
        .collect::<Result<Vec<_>>>()?;
    let n = codes.len() as f64;
    let mut variance = Vec::with_capacity(d);
    let mut min = Vec::with_capacity(d);
    let mut max = Vec::with_capacity(d);
    for k in 0..d {
        let col: Vec<f64> = codes.iter().map(|c| c.values()[k]).collect();
        let mean = col.iter().sum::<f64>() / n;
        variance.push(col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n);
        min.push(col.iter().copied().fold(f64::INFINITY, f64::min));
        max.push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let points = codes
        .iter()
        .map(|c| [c.values()[dims.0], c.values()[dims.1]])
        .collect();
    Ok(LatentScatter {
        dims,
        points,
        variance,
        min,
        max,
    })
}
