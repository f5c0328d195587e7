use rayon::prelude::*;

use crate::dataset::{NoduleRecord, NoduleSet, Provenance};
use crate::error::{LungError, Result};
use crate::metrics::BatchCounts;
use crate::net::{sample_latent, LatentVector, Network};
use crate::rng::{self, stream};
use crate::voxel::{reconnect_detailed, Dims, Spacing, VoxelGrid};

/// What happened to one decode on its way to a single component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenFlags {
    /// Exactly one component before repair.
    pub clean: bool,
    /// More than half the voxels on.
    pub inverted: bool,
    /// Voxels switched on by repair.
    pub added: usize,
}

#[derive(Clone, Debug)]
pub struct GeneratedBatch {
    pub latents: Vec<LatentVector>,
    /// Decoder output before repair.
    pub raw: Vec<VoxelGrid>,
    /// Repaired grids, provenance `Generated`, source id = position.
    pub set: NoduleSet,
    pub flags: Vec<GenFlags>,
}

impl GeneratedBatch {
    /// Counts with `accepted` left at zero.
    pub fn counts(&self) -> BatchCounts {
        let clean = self.flags.iter().filter(|f| f.clean).count();
        BatchCounts {
            generated: self.flags.len(),
            clean,
            reconnected: self.flags.len() - clean,
            inverted: self.flags.iter().filter(|f| f.inverted).count(),
            accepted: 0,
        }
    }
}

/// Forces a decode into one component. A decode with no voxel at or above
/// the threshold gets its brightest voxel switched on.
pub fn repair(grid: &VoxelGrid, threshold: f64) -> (VoxelGrid, GenFlags) {
    let inverted = grid.is_inverted(threshold);
    match reconnect_detailed(grid, threshold) {
        Ok(r) => {
            let flags = GenFlags {
                clean: r.was_clean(),
                inverted,
                added: r.added.len(),
            };
            (r.grid, flags)
        }
        Err(_) => {
            let mut values = grid.values().to_vec();
            let brightest =
                values
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &v)| if v > values[best] { i } else { best });
            values[brightest] = 1.0;
            let fixed = VoxelGrid::new(grid.dims(), grid.spacing(), values).expect("same geometry");
            (
                fixed,
                GenFlags {
                    clean: false,
                    inverted,
                    added: 1,
                },
            )
        }
    }
}

/// Decodes `count` latent points drawn uniformly from `[-1, 1]^d`, then
/// repairs each decode into a single component.
pub fn generate(
    net: &Network,
    count: usize,
    dims: Dims,
    spacing: Spacing,
    rng_seed: u64,
    threshold: f64,
) -> Result<GeneratedBatch> {
    if count == 0 {
        return Err(LungError::InvalidArgument(
            "count must be at least 1".into(),
        ));
    }
    if dims.len() != net.voxels() {
        return Err(LungError::DimensionMismatch {
            expected: net.voxels(),
            found: dims.len(),
        });
    }
    let mut rng = rng::seeded(rng_seed, stream::GENERATE);
    let latents: Vec<LatentVector> = (0..count)
        .map(|_| sample_latent(net.latent_dim(), &mut rng))
        .collect();
    decode_all(net, latents, dims, spacing, threshold)
}

pub(crate) fn decode_all(
    net: &Network,
    latents: Vec<LatentVector>,
    dims: Dims,
    spacing: Spacing,
    threshold: f64,
) -> Result<GeneratedBatch> {
    let decoded: Vec<(VoxelGrid, VoxelGrid, GenFlags)> = latents
        .par_iter()
        .map(|z| {
            let raw = net.decode(z, dims, spacing)?;
            let (fixed, flags) = repair(&raw, threshold);
            Ok((raw, fixed, flags))
        })
        .collect::<Result<_>>()?;

    let mut set = NoduleSet::new(dims, spacing);
    let mut raw = Vec::with_capacity(decoded.len());
    let mut flags = Vec::with_capacity(decoded.len());
    for (i, (r, fixed, f)) in decoded.into_iter().enumerate() {
        set.push(NoduleRecord {
            grid: fixed,
            provenance: Provenance::Generated,
            source_id: i as u32,
        })?;
        raw.push(r);
        flags.push(f);
    }
    Ok(GeneratedBatch {
        latents,
        raw,
        set,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::LayerSpec;
    use crate::voxel::label_components;

    #[test]
    fn every_output_is_one_component() {
        let dims = Dims::new(4, 6, 6);
        let net = Network::new(dims.len(), &LayerSpec(vec![8, 2, 8]), 5).unwrap();
        let batch = generate(&net, 40, dims, Spacing::CT, 1, 0.5).unwrap();
        assert_eq!(batch.set.len(), 40);
        for g in batch.set.grids() {
            assert_eq!(label_components(&g.binarize(0.5)).component_count(), 1);
        }
        let c = batch.counts();
        assert_eq!(c.clean + c.reconnected, c.generated);
    }

    #[test]
    fn blank_decode_gets_one_voxel() {
        let g = VoxelGrid::filled(Dims::new(2, 2, 2), Spacing::CT, 0.1);
        let (fixed, flags) = repair(&g, 0.5);
        assert_eq!(fixed.binarize(0.5).count_on(), 1);
        assert!(!flags.clean && !flags.inverted);
    }

    #[test]
    fn all_ones_is_inverted() {
        let g = VoxelGrid::filled(Dims::new(2, 3, 3), Spacing::CT, 1.0);
        let (fixed, flags) = repair(&g, 0.5);
        assert!(flags.inverted && flags.clean);
        assert_eq!(fixed, g);
    }

    #[test]
    fn reproducible_and_validated() {
        let dims = Dims::new(3, 4, 4);
        let net = Network::new(dims.len(), &LayerSpec(vec![6, 3, 6]), 2).unwrap();
        let a = generate(&net, 5, dims, Spacing::CT, 9, 0.5).unwrap();
        let b = generate(&net, 5, dims, Spacing::CT, 9, 0.5).unwrap();
        assert_eq!(a.set, b.set);
        assert!(generate(&net, 0, dims, Spacing::CT, 9, 0.5).is_err());
        assert!(generate(&net, 1, Dims::new(2, 2, 2), Spacing::CT, 9, 0.5).is_err());
    }
}
