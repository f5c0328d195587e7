//! Central finite-difference check of [`Network::backward_rows`].

use ndarray::ArrayView2;

use super::Network;

/// Denominator floor for the relative error, so that entries whose true
/// gradient is essentially zero are judged by absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Compares every analytic parameter gradient with
/// `(L(p + h) - L(p - h)) / 2h`. Relative error is
/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
fn param_mut(net: &mut Network, k: usize, idx: usize) -> &mut f64 {
    let layer = &mut net.layers_mut()[k];
    let n_weights = layer.weights.len();
    if idx < n_weights {
        &mut layer.weights.as_slice_mut().expect("standard layout")[idx]
    } else {
        &mut layer.bias[idx - n_weights]
    }
}

pub fn gradcheck(net: &Network, x: ArrayView2<f64>, target: ArrayView2<f64>, h: f64) -> GradCheck {
    let (_, analytic) = net.backward_rows(x, target);
    let mut probe = net.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };

    for k in 0..net.layers().len() {
        let n_weights = net.layers()[k].weights.len();
        let n_bias = net.layers()[k].bias.len();
        for idx in 0..n_weights + n_bias {
            let original = *param_mut(&mut probe, k, idx);
            *param_mut(&mut probe, k, idx) = original + h;
            let up = probe.loss_rows(x, target);
            *param_mut(&mut probe, k, idx) = original - h;
            let down = probe.loss_rows(x, target);
            *param_mut(&mut probe, k, idx) = original;

            let numeric = (up - down) / (2.0 * h);
            let a = if idx < n_weights {
                analytic.0[k].weights.as_slice().expect("standard layout")[idx]
            } else {
                analytic.0[k].bias[idx - n_weights]
            };
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    report
}

/// Worst case of [`gradcheck`] over `trials` random networks with at most 64
/// inputs and one to three hidden layers, each fed a small random batch.
pub fn random_gradcheck(trials: usize, rng_seed: u64) -> GradCheck {
    use ndarray::Array2;
    use rand::Rng as _;

    use super::LayerSpec;
    use crate::rng::{derive_seed, seeded, stream};

    let mut worst = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    for t in 0..trials {
        let seed = derive_seed(rng_seed, t as u64);
        let mut rng = seeded(seed, stream::REPLAY);
        let voxels = rng.random_range(2..=64);
        let depth = rng.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
        let net = Network::new(voxels, &LayerSpec(hidden), seed).expect("valid random shape");
        let rows = rng.random_range(1..=4);
        let x = Array2::from_shape_fn((rows, voxels), |_| rng.random::<f64>());
        let target = Array2::from_shape_fn((rows, voxels), |_| rng.random::<f64>());
        let g = gradcheck(&net, x.view(), target.view(), 1e-4);
        worst.max_rel_error = worst.max_rel_error.max(g.max_rel_error);
        worst.max_abs_error = worst.max_abs_error.max(g.max_abs_error);
        worst.checked += g.checked;
    }
    worst
}
