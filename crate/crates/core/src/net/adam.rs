use super::{DenseLayer, Gradients, Network};
use crate::error::{LungError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of a flat parameter slice. `step` is the
/// 1-based step number of this update.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    hp: &AdamParams,
) {
    debug_assert!(params.len() == grads.len() && m.len() == grads.len() && v.len() == grads.len());
    let c1 = 1.0 - hp.beta1.powf(step as f64);
    let c2 = 1.0 - hp.beta2.powf(step as f64);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
}

/// Moment estimates for every network parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub params: AdamParams,
    step: u64,
    first: Vec<DenseLayer>,
    second: Vec<DenseLayer>,
}

impl AdamState {
    pub fn new(net: &Network, params: AdamParams) -> Self {
        let zeros = net.zero_gradients().0;
        Self {
            params,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[DenseLayer] {
        &self.first
    }

    pub fn second_moment(&self) -> &[DenseLayer] {
        &self.second
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let layers = net.layers_mut();
        let shapes_match = grads.0.len() == layers.len()
            && self.first.len() == layers.len()
            && layers
                .iter()
                .zip(&grads.0)
                .zip(&self.first)
                .all(|((p, g), m)| {
                    p.weights.dim() == g.weights.dim()
                        && p.bias.dim() == g.bias.dim()
                        && m.weights.dim() == p.weights.dim()
                        && m.bias.dim() == p.bias.dim()
                });
        if !shapes_match {
            return Err(LungError::ShapeMismatch(
                "gradients or moments do not match the network".into(),
            ));
        }
        self.step += 1;
        let t = self.step;
        let hp = self.params;
        for (((p, g), m), v) in layers
            .iter_mut()
            .zip(&grads.0)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            adam_update(
                p.weights.as_slice_mut().expect("standard layout"),
                g.weights.as_slice().expect("standard layout"),
                m.weights.as_slice_mut().expect("standard layout"),
                v.weights.as_slice_mut().expect("standard layout"),
                t,
                &hp,
            );
            adam_update(
                p.bias.as_slice_mut().expect("standard layout"),
                g.bias.as_slice().expect("standard layout"),
                m.bias.as_slice_mut().expect("standard layout"),
                v.bias.as_slice_mut().expect("standard layout"),
                t,
                &hp,
            );
        }
        Ok(())
    }
}
