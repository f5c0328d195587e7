use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::{AdamParams, AdamState, Network};
use crate::dataset::NoduleSet;
use crate::error::{LungError, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub adam: AdamParams,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            adam: AdamParams::default(),
        }
    }
}

/// Mini-batch training loss after one iteration, 1-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPoint {
    pub iteration: u64,
    pub mse: f64,
}

/// Reconstruction trainer whose optimizer state and shuffling stream
/// persist across calls to [`run`](Self::run), so training can be split
/// into segments over changing data.
#[derive(Clone, Debug)]
pub struct Trainer {
    net: Network,
    adam: AdamState,
    rng: rng::Rng,
    options: TrainOptions,
    iteration: u64,
}

impl Trainer {
    pub fn new(net: Network, options: TrainOptions, rng_seed: u64) -> Result<Self> {
        if options.batch_size == 0 {
            return Err(LungError::InvalidConfig(
                "batch size must be positive".into(),
            ));
        }
        let adam = AdamState::new(&net, options.adam);
        Ok(Self {
            net,
            adam,
            rng: rng::seeded(rng_seed, rng::stream::SHUFFLE),
            options,
            iteration: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn into_network(self) -> Network {
        self.net
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Runs `iterations` Adam steps on `set`, reshuffling at every epoch
    /// start. The final batch of an epoch may be short. Losses are appended
    /// to `history`.
    pub fn run(
        &mut self,
        set: &NoduleSet,
        iterations: u64,
        history: &mut Vec<LossPoint>,
    ) -> Result<()> {
        if set.is_empty() {
            return Err(LungError::EmptySet);
        }
        let voxels = self.net.voxels();
        if set.dims().len() != voxels {
            return Err(LungError::DimensionMismatch {
                expected: voxels,
                found: set.dims().len(),
            });
        }
        let data = set_matrix(set);
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut cursor = order.len();
        history.reserve(iterations as usize);

        for _ in 0..iterations {
            if cursor == order.len() {
                order.shuffle(&mut self.rng);
                cursor = 0;
            }
            let take = self.options.batch_size.min(order.len() - cursor);
            let mut batch = Array2::zeros((take, voxels));
            for (mut row, &i) in batch
                .rows_mut()
                .into_iter()
                .zip(&order[cursor..cursor + take])
            {
                row.assign(&data.row(i));
            }
            cursor += take;

            let (loss, grads) = self.net.backward_rows(batch.view(), batch.view());
            self.adam.step(&mut self.net, &grads)?;
            self.iteration += 1;
            history.push(LossPoint {
                iteration: self.iteration,
                mse: loss,
            });
        }
        Ok(())
    }
}

fn set_matrix(set: &NoduleSet) -> Array2<f64> {
    let voxels = set.dims().len();
    let flat = set
        .grids()
        .flat_map(|g| g.values().iter().map(|&v| f64::from(v)))
        .collect();
    Array2::from_shape_vec((set.len(), voxels), flat).expect("set geometry is uniform")
}

pub fn train(
    net: Network,
    set: &NoduleSet,
    iterations: u64,
    options: &TrainOptions,
    rng_seed: u64,
) -> Result<(Network, Vec<LossPoint>)> {
    let mut trainer = Trainer::new(net, *options, rng_seed)?;
    let mut history = Vec::new();
    trainer.run(set, iterations, &mut history)?;
    Ok((trainer.into_network(), history))
}

/// Mean per-nodule reconstruction MSE, using the same path as inference.
pub fn mean_reconstruction_mse(net: &Network, set: &NoduleSet) -> Result<f64> {
    if set.is_empty() {
        return Err(LungError::EmptySet);
    }
    let mut total = 0.0;
    for g in set.grids() {
        let (recon, _) = net.forward(g)?;
        total += super::loss_mse(&recon, g)?;
    }
    Ok(total / set.len() as f64)
}

pub fn write_loss_csv(mut w: impl Write, history: &[LossPoint]) -> Result<()> {
    writeln!(w, "iteration,mse")?;
    for p in history {
        writeln!(w, "{},{}", p.iteration, p.mse)?;
    }
    Ok(())
}
