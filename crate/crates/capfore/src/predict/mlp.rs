//! Fully-connected network with ReLU hidden activations and a scalar
//! linear output, trained on squared error by seeded mini-batch gradient
//! descent with momentum-free adaptive per-parameter steps (RMSProp-style
//! accumulators), dropout on hidden layers, L2 weight decay, and early
//! stopping on dev RMSE. The best-dev weights are returned.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

const RMS_DECAY: f64 = 0.9;
const RMS_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub lr: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub hidden_dims: Vec<usize>,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Early stopping: stop after this many dev evaluations without
    /// improvement.
    pub patience: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            lr: 1e-3,
            batch_size: 64,
            dropout: 0.0,
            hidden_dims: vec![128, 64],
            weight_decay: 0.0,
            max_epochs: 200,
            patience: 10,
        }
    }
}

/// One dense layer, weights row-major `[n_out × n_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    /// Uniform fan-in-scaled init: U(-k, k) with k = 1/sqrt(n_in).
    fn init(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Layer {
        let k = 1.0 / (n_in as f64).sqrt();
        let w = (0..n_in * n_out).map(|_| rng.gen_range(-k..k)).collect();
        let b = (0..n_out).map(|_| rng.gen_range(-k..k)).collect();
        Layer { n_in, n_out, w, b }
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.b[o];
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

struct Trace {
    /// `a[0]` is the input, `a[l+1]` the (post-ReLU, post-dropout) output
    /// of layer l. The final entry holds the scalar output.
    a: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
}

impl Network {
    pub fn new(input_dim: usize, hidden_dims: &[usize], rng: &mut ChaCha8Rng) -> Network {
        let mut layers = Vec::with_capacity(hidden_dims.len() + 1);
        let mut n_in = input_dim;
        for &h in hidden_dims {
            layers.push(Layer::init(n_in, h, rng));
            n_in = h;
        }
        layers.push(Layer::init(n_in, 1, rng));
        Network { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    fn forward_trace(&self, input: &[f64], masks: Option<&[Vec<f64>]>) -> Trace {
        let n_layers = self.layers.len();
        let mut a = Vec::with_capacity(n_layers + 1);
        let mut z = Vec::with_capacity(n_layers);
        a.push(input.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut zl = Vec::new();
            layer.apply(a.last().unwrap(), &mut zl);
            let al = if l + 1 < n_layers {
                let mut h: Vec<f64> = zl.iter().map(|v| v.max(0.0)).collect();
                if let Some(masks) = masks {
                    for (hv, m) in h.iter_mut().zip(&masks[l]) {
                        *hv *= m;
                    }
                }
                h
            } else {
                zl.clone()
            };
            z.push(zl);
            a.push(al);
        }
        Trace { a, z }
    }

    pub fn forward(&self, input: &[f64]) -> f64 {
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if l + 1 < n_layers {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        assert_eq!(off, params.len());
    }

    /// Mean squared error over a batch, computed without dropout. This is
    /// the loss the analytic gradient is checked against.
    pub fn mse_loss(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let sse: f64 = x
            .iter()
            .zip(y)
            .map(|(row, t)| {
                let p = self.forward(row);
                (p - t) * (p - t)
            })
            .sum();
        sse / x.len() as f64
    }

    /// Analytic gradient of `mse_loss` in `flat_params` layout.
    pub fn mse_gradient(&self, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let mut grads = self.zero_grads();
        for (row, t) in x.iter().zip(y) {
            let trace = self.forward_trace(row, None);
            let dout = 2.0 * (trace.a.last().unwrap()[0] - t) / x.len() as f64;
            self.backward_sample(&trace, None, dout, &mut grads);
        }
        flatten_grads(&self.layers, &grads)
    }

    fn zero_grads(&self) -> Vec<LayerGrads> {
        self.layers
            .iter()
            .map(|l| LayerGrads {
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect()
    }

    /// Accumulate one sample's gradients. `dout` is dL/d(output).
    fn backward_sample(
        &self,
        trace: &Trace,
        masks: Option<&[Vec<f64>]>,
        dout: f64,
        grads: &mut [LayerGrads],
    ) {
        let n_layers = self.layers.len();
        let mut delta = vec![dout];
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let input = &trace.a[l];
            for o in 0..layer.n_out {
                let d = delta[o];
                let grow = &mut grads[l].w[o * layer.n_in..(o + 1) * layer.n_in];
                for (g, x) in grow.iter_mut().zip(input) {
                    *g += d * x;
                }
                grads[l].b[o] += d;
            }
            if l == 0 {
                break;
            }
            // Propagate to the previous hidden layer: through W, the
            // dropout mask, and the ReLU derivative.
            let mut prev = vec![0.0; layer.n_in];
            for o in 0..layer.n_out {
                let d = delta[o];
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if let Some(masks) = masks {
                for (p, m) in prev.iter_mut().zip(&masks[l - 1]) {
                    *p *= m;
                }
            }
            for (p, z) in prev.iter_mut().zip(&trace.z[l - 1]) {
                if *z <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

struct LayerGrads {
    w: Vec<f64>,
    b: Vec<f64>,
}

fn flatten_grads(layers: &[Layer], grads: &[LayerGrads]) -> Vec<f64> {
    let mut out = Vec::with_capacity(layers.iter().map(|l| l.w.len() + l.b.len()).sum());
    for g in grads {
        out.extend_from_slice(&g.w);
        out.extend_from_slice(&g.b);
    }
    out
}

/// Training history kept alongside the fitted network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_dev_rmse: f64,
}

/// Train with RMSProp-style adaptive steps and early stopping on dev
/// RMSE; the weights from the best dev epoch are returned.
pub fn train_mlp(
    x: &[Vec<f64>],
    y: &[f64],
    dev_x: &[Vec<f64>],
    dev_y: &[f64],
    params: &MlpParams,
    seed_val: u64,
) -> Result<(Network, TrainLog)> {
    if x.is_empty() {
        return Err(Error::EmptyInput("empty training set".into()));
    }
    if dev_x.is_empty() {
        return Err(Error::EmptyInput(
            "mlp early stopping needs a non-empty dev set".into(),
        ));
    }
    if !(0.0..1.0).contains(&params.dropout) {
        return Err(Error::InvalidHyperparam(format!(
            "dropout must be in [0, 1), got {}",
            params.dropout
        )));
    }
    if params.lr <= 0.0 {
        return Err(Error::InvalidHyperparam("mlp learning rate must be positive".into()));
    }

    let mut rng = seed::rng(seed::derive(seed_val, "mlp-init"));
    let mut net = Network::new(x[0].len(), &params.hidden_dims, &mut rng);
    let mut cache: Vec<LayerGrads> = net.zero_grads();
    let mut train_rng = seed::rng(seed::derive(seed_val, "mlp-train"));

    let dev_rmse = |net: &Network| -> f64 {
        let sse: f64 = dev_x
            .iter()
            .zip(dev_y)
            .map(|(row, t)| {
                let p = net.forward(row).clamp(0.0, 1.0);
                (p - t) * (p - t)
            })
            .sum();
        (sse / dev_x.len() as f64).sqrt()
    };

    let n_hidden = params.hidden_dims.len();
    let keep = 1.0 - params.dropout;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut best = (f64::INFINITY, net.clone(), 0usize);
    let mut bad_evals = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 0..params.max_epochs {
        epochs_run = epoch + 1;
        order.shuffle(&mut train_rng);
        for batch in order.chunks(params.batch_size.max(1)) {
            let mut grads = net.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let masks: Option<Vec<Vec<f64>>> = if params.dropout > 0.0 {
                    Some(
                        (0..n_hidden)
                            .map(|l| {
                                (0..params.hidden_dims[l])
                                    .map(|_| {
                                        if train_rng.gen::<f64>() < keep {
                                            1.0 / keep
                                        } else {
                                            0.0
                                        }
                                    })
                                    .collect()
                            })
                            .collect(),
                    )
                } else {
                    None
                };
                let trace = net.forward_trace(&x[idx], masks.as_deref());
                let dout = 2.0 * (trace.a.last().unwrap()[0] - y[idx]) * scale;
                net.backward_sample(&trace, masks.as_deref(), dout, &mut grads);
            }
            // RMSProp update with coupled L2 weight decay.
            for (l, layer) in net.layers.iter_mut().enumerate() {
                for (i, w) in layer.w.iter_mut().enumerate() {
                    let g = grads[l].w[i] + params.weight_decay * *w;
                    let v = &mut cache[l].w[i];
                    *v = RMS_DECAY * *v + (1.0 - RMS_DECAY) * g * g;
                    *w -= params.lr * g / (v.sqrt() + RMS_EPS);
                }
                for (i, b) in layer.b.iter_mut().enumerate() {
                    let g = grads[l].b[i] + params.weight_decay * *b;
                    let v = &mut cache[l].b[i];
                    *v = RMS_DECAY * *v + (1.0 - RMS_DECAY) * g * g;
                    *b -= params.lr * g / (v.sqrt() + RMS_EPS);
                }
            }
        }

        let rmse = dev_rmse(&net);
        if rmse < best.0 {
            best = (rmse, net.clone(), epoch);
            bad_evals = 0;
        } else {
            bad_evals += 1;
            if bad_evals >= params.patience {
                break;
            }
        }
    }

    let log = TrainLog {
        epochs_run,
        best_epoch: best.2,
        best_dev_rmse: best.0,
    };
    Ok((best.1, log))
}
