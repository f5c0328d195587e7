//! Dense autoencoder trained with Adam on mean squared voxel error.
//!
//! Hidden layers use `tanh`, the output layer a sigmoid. The smallest hidden
//! layer is the bottleneck: layers up to it form the feature network
//! (encoder), the rest the generator network (decoder).

mod adam;
mod gradcheck;
mod io;
mod network;
mod train;

pub use adam::{adam_update, AdamParams, AdamState};
pub use gradcheck::{gradcheck, random_gradcheck, GradCheck, REL_FLOOR};
pub use io::{read_network, write_network, NET_MAGIC};
pub use network::{
    loss_mse, sample_latent, DenseLayer, Gradients, LatentVector, LayerSpec, Network,
};
pub use train::{mean_reconstruction_mse, train, write_loss_csv, LossPoint, TrainOptions, Trainer};
