use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;

use crate::error::{LungError, Result};
use crate::rng;
use crate::voxel::{Dims, Spacing, VoxelGrid};

/// Hidden layer widths between input and output, written `32_3_64_256`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LayerSpec(pub Vec<usize>);

impl LayerSpec {
    pub fn hidden(&self) -> &[usize] {
        &self.0
    }

    /// Index (into the hidden list) of the first narrowest layer.
    pub fn bottleneck(&self) -> usize {
        let min = *self.0.iter().min().expect("layer spec is never empty");
        self.0.iter().position(|&w| w == min).unwrap()
    }

    /// Copy with the bottleneck width replaced.
    pub fn with_bottleneck_width(&self, width: usize) -> Self {
        let mut out = self.clone();
        out.0[self.bottleneck()] = width;
        out
    }
}

impl FromStr for LayerSpec {
    type Err = LungError;

    fn from_str(s: &str) -> Result<Self> {
        let widths = s
            .split('_')
            .map(|w| match w.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(LungError::InvalidConfig(format!(
                    "bad layer width `{w}` in `{s}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if widths.is_empty() {
            return Err(LungError::InvalidConfig("empty layer spec".into()));
        }
        Ok(Self(widths))
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join("_"))
    }
}

/// Maps `inputs` to `outputs` as `W x + b`; `weights` is `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Parameter gradients, one entry per layer, same shapes as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<DenseLayer>);

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A point in the latent cube `[-1, 1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(LungError::InvalidArgument(format!(
                "latent component {v} outside [-1, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `(1 - t) a + t b`; exact at both ends.
    pub fn lerp(&self, other: &LatentVector, t: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(LungError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Self::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }
}

/// I.i.d. uniform components in `[-1, 1]`.
pub fn sample_latent(dim: usize, rng: &mut rng::Rng) -> LatentVector {
    assert!(dim >= 1, "latent dimension must be positive");
    LatentVector((0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
}

/// Mean over all voxels of the squared difference.
pub fn loss_mse(reconstruction: &VoxelGrid, target: &VoxelGrid) -> Result<f64> {
    if reconstruction.dims() != target.dims() {
        return Err(LungError::DimensionMismatch {
            expected: target.len(),
            found: reconstruction.len(),
        });
    }
    let sum: f64 = reconstruction
        .values()
        .iter()
        .zip(target.values())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum();
    Ok(sum / target.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    bottleneck: usize,
    layers: Vec<DenseLayer>,
}

impl Network {
    /// Zero weights and biases.
    pub fn zeros(layer_sizes: Vec<usize>, bottleneck: usize) -> Result<Self> {
        validate(&layer_sizes, bottleneck)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Ok(Self {
            layer_sizes,
            bottleneck,
            layers,
        })
    }

    /// `voxels -> hidden... -> voxels` with weights uniform in `±1/sqrt(fan_in)`
    /// and zero biases.
    pub fn new(voxels: usize, spec: &LayerSpec, rng_seed: u64) -> Result<Self> {
        let mut sizes = Vec::with_capacity(spec.0.len() + 2);
        sizes.push(voxels);
        sizes.extend_from_slice(&spec.0);
        sizes.push(voxels);
        let mut net = Self::zeros(sizes, spec.bottleneck() + 1)?;
        let mut rng = rng::seeded(rng_seed, rng::stream::INIT);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            layer
                .weights
                .mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    pub(crate) fn from_parts(
        layer_sizes: Vec<usize>,
        bottleneck: usize,
        layers: Vec<DenseLayer>,
    ) -> Result<Self> {
        validate(&layer_sizes, bottleneck)?;
        let ok = layers.len() + 1 == layer_sizes.len()
            && layers
                .iter()
                .zip(layer_sizes.windows(2))
                .all(|(l, w)| l.inputs() == w[0] && l.outputs() == w[1] && l.bias.len() == w[1]);
        if !ok {
            return Err(LungError::ShapeMismatch(
                "layers do not match layer sizes".into(),
            ));
        }
        Ok(Self {
            layer_sizes,
            bottleneck,
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Index into [`layer_sizes`](Self::layer_sizes) of the latent layer.
    pub fn bottleneck_index(&self) -> usize {
        self.bottleneck
    }

    pub fn latent_dim(&self) -> usize {
        self.layer_sizes[self.bottleneck]
    }

    pub fn voxels(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec(self.layer_sizes[1..self.layer_sizes.len() - 1].to_vec())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(
            self.layers
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs(), l.outputs()))
                .collect(),
        )
    }

    fn is_output_layer(&self, k: usize) -> bool {
        k + 1 == self.layers.len()
    }

    fn apply(&self, k: usize, input: ArrayView2<f64>) -> Array2<f64> {
        let layer = &self.layers[k];
        let mut z = input.dot(&layer.weights.t());
        z += &layer.bias;
        if self.is_output_layer(k) {
            z.mapv_inplace(sigmoid);
        } else {
            z.mapv_inplace(f64::tanh);
        }
        z
    }

    /// Rows are samples. Returns bottleneck activations.
    pub fn encode_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for k in 0..self.bottleneck {
            a = self.apply(k, a.view());
        }
        a
    }

    /// Rows are latent points. Returns sigmoid outputs.
    pub fn decode_rows(&self, latent: ArrayView2<f64>) -> Array2<f64> {
        let mut a = latent.to_owned();
        for k in self.bottleneck..self.layers.len() {
            a = self.apply(k, a.view());
        }
        a
    }

    /// Full pass, literally `decode_rows(encode_rows(x))`.
    pub fn forward_rows(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let latent = self.encode_rows(x);
        let out = self.decode_rows(latent.view());
        (out, latent)
    }

    fn check_input(&self, grid: &VoxelGrid) -> Result<()> {
        if grid.len() != self.voxels() {
            return Err(LungError::DimensionMismatch {
                expected: self.voxels(),
                found: grid.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &VoxelGrid) -> Result<(VoxelGrid, LatentVector)> {
        let latent = self.encode(input)?;
        let recon = self.decode(&latent, input.dims(), input.spacing())?;
        Ok((recon, latent))
    }

    pub fn encode(&self, grid: &VoxelGrid) -> Result<LatentVector> {
        self.check_input(grid)?;
        let z = self.encode_rows(grid_row(grid).view());
        Ok(LatentVector(z.row(0).to_vec()))
    }

    /// Decodes into a grid of the given geometry, which must hold exactly
    /// [`voxels`](Self::voxels) values.
    pub fn decode(&self, latent: &LatentVector, dims: Dims, spacing: Spacing) -> Result<VoxelGrid> {
        if latent.dim() != self.latent_dim() {
            return Err(LungError::DimensionMismatch {
                expected: self.latent_dim(),
                found: latent.dim(),
            });
        }
        if dims.len() != self.voxels() {
            return Err(LungError::DimensionMismatch {
                expected: self.voxels(),
                found: dims.len(),
            });
        }
        let row = Array2::from_shape_vec((1, latent.dim()), latent.0.clone()).expect("row shape");
        let out = self.decode_rows(row.view());
        Ok(VoxelGrid::from_parts_unchecked(
            dims,
            spacing,
            out.iter().map(|&v| to_open_unit(v)).collect(),
        ))
    }

    /// Loss gradients for one sample.
    pub fn backward(&self, input: &VoxelGrid, target: &VoxelGrid) -> Result<Gradients> {
        self.check_input(input)?;
        self.check_input(target)?;
        Ok(self
            .backward_rows(grid_row(input).view(), grid_row(target).view())
            .1)
    }

    /// Mean squared error over all entries of the batch and its parameter
    /// gradients.
    pub fn backward_rows(&self, x: ArrayView2<f64>, target: ArrayView2<f64>) -> (f64, Gradients) {
        let n_layers = self.layers.len();
        // acts[k] is the input to layer k; acts[n_layers] the output
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_owned());
        for k in 0..n_layers {
            let next = self.apply(k, acts[k].view());
            acts.push(next);
        }
        let out = &acts[n_layers];
        let scale = 2.0 / out.len() as f64;
        let mut loss = 0.0;
        let mut delta = Array2::zeros(out.raw_dim());
        Zip::from(&mut delta)
            .and(out)
            .and(&target)
            .for_each(|d, &o, &t| {
                let e = o - t;
                loss += e * e;
                *d = scale * e * o * (1.0 - o);
            });
        loss /= out.len() as f64;

        let mut grads = Vec::with_capacity(n_layers);
        for k in (0..n_layers).rev() {
            let input = &acts[k];
            let weights = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weights);
                Zip::from(&mut back)
                    .and(input)
                    .for_each(|b, &a| *b *= 1.0 - a * a);
                delta = back;
            }
            grads.push(DenseLayer { weights, bias });
        }
        grads.reverse();
        (loss, Gradients(grads))
    }

    /// Mean squared error of `forward_rows`, no gradients.
    pub fn loss_rows(&self, x: ArrayView2<f64>, target: ArrayView2<f64>) -> f64 {
        let (out, _) = self.forward_rows(x);
        let sum: f64 = out
            .iter()
            .zip(target.iter())
            .map(|(o, t)| (o - t).powi(2))
            .sum();
        sum / out.len() as f64
    }
}

fn validate(layer_sizes: &[usize], bottleneck: usize) -> Result<()> {
    if layer_sizes.len() < 3 {
        return Err(LungError::InvalidConfig(
            "network needs at least one hidden layer".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(LungError::InvalidConfig(
            "layer widths must be positive".into(),
        ));
    }
    if layer_sizes[0] != layer_sizes[layer_sizes.len() - 1] {
        return Err(LungError::InvalidConfig(
            "autoencoder output width must equal input width".into(),
        ));
    }
    if bottleneck == 0 || bottleneck >= layer_sizes.len() - 1 {
        return Err(LungError::InvalidConfig(format!(
            "bottleneck index {bottleneck} is not a hidden layer"
        )));
    }
    Ok(())
}

pub(crate) fn grid_row(grid: &VoxelGrid) -> Array2<f64> {
    Array2::from_shape_vec(
        (1, grid.len()),
        grid.values().iter().map(|&v| f64::from(v)).collect(),
    )
    .expect("row shape")
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Narrows a sigmoid output to `f32` while keeping it strictly inside (0, 1).
fn to_open_unit(v: f64) -> f32 {
    const HI: f32 = 1.0 - f32::EPSILON / 2.0;
    (v as f32).clamp(f32::MIN_POSITIVE, HI)
}
