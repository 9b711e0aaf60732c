//! Deep feed-forward binary classifier: three ReLU hidden layers of width
//! ten, a single sigmoid output, inverted dropout after each hidden
//! activation, binary cross-entropy loss, Adam updates.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, LabelVector};
use crate::error::{Error, Result};
use crate::model::ScoreVector;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DffConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub dropout_rate: f64,
    /// Also drop input units, not just hidden activations.
    pub input_dropout: bool,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DffConfig {
    fn default() -> Self {
        DffConfig {
            hidden_layers: 3,
            hidden_width: 10,
            dropout_rate: 0.2,
            input_dropout: false,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 10,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl DffConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} not in [0,1)",
                self.dropout_rate
            )));
        }
        if self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(Error::Config("hidden layers and width must be >= 1".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One affine layer, weights row-major `in_dim x out_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DffModel {
    pub layers: Vec<Layer>,
    pub config: DffConfig,
    pub epochs_run: usize,
}

impl DffModel {
    pub fn input_width(&self) -> usize {
        self.layers[0].in_dim
    }

    fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn glorot_init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Layer {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let weights = (0..in_dim * out_dim)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Layer {
        weights,
        bias: vec![0.0; out_dim],
        in_dim,
        out_dim,
    }
}

/// Activations kept from a forward pass, for backprop.
struct ForwardTrace {
    /// Post-activation (and post-dropout) inputs to each affine layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation values of each hidden layer.
    pre_act: Vec<Vec<f64>>,
    /// Dropout masks (already scaled by 1/(1-p)), one per dropout site.
    masks: Vec<Option<Vec<f64>>>,
    /// Sigmoid outputs.
    probs: Vec<f64>,
}

fn affine(input: &[f64], batch: usize, layer: &Layer) -> Vec<f64> {
    let mut out = vec![0.0; batch * layer.out_dim];
    for b in 0..batch {
        let row = &input[b * layer.in_dim..(b + 1) * layer.in_dim];
        let out_row = &mut out[b * layer.out_dim..(b + 1) * layer.out_dim];
        out_row.copy_from_slice(&layer.bias);
        for (i, &x) in row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let w_row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
            for (o, &w) in w_row.iter().enumerate() {
                out_row[o] += x * w;
            }
        }
    }
    out
}

fn forward(
    model: &DffModel,
    input: &[f64],
    batch: usize,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> ForwardTrace {
    let cfg = &model.config;
    let n_hidden = model.layers.len() - 1;
    let keep = 1.0 - cfg.dropout_rate;
    let mut rng = dropout_rng;

    let mut draw_mask = |len: usize| -> Option<Vec<f64>> {
        rng.as_deref_mut().map(|r| {
            (0..len)
                .map(|_| if r.random_bool(keep) { 1.0 / keep } else { 0.0 })
                .collect()
        })
    };

    let mut inputs = Vec::with_capacity(model.layers.len());
    let mut pre_act = Vec::with_capacity(n_hidden);
    let mut masks = Vec::with_capacity(model.layers.len());

    let mut current: Vec<f64> = input.to_vec();
    if cfg.input_dropout {
        if let Some(mask) = draw_mask(current.len()) {
            for (v, m) in current.iter_mut().zip(&mask) {
                *v *= m;
            }
            masks.push(Some(mask));
        } else {
            masks.push(None);
        }
    } else {
        masks.push(None);
    }

    for l in 0..n_hidden {
        inputs.push(current.clone());
        let z = affine(&current, batch, &model.layers[l]);
        let mut h: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
        if let Some(mask) = draw_mask(h.len()) {
            for (v, m) in h.iter_mut().zip(&mask) {
                *v *= m;
            }
            masks.push(Some(mask));
        } else {
            masks.push(None);
        }
        pre_act.push(z);
        current = h;
    }

    inputs.push(current.clone());
    let z_out = affine(&current, batch, model.layers.last().unwrap());
    let probs = z_out.iter().map(|&z| sigmoid(z)).collect();

    ForwardTrace {
        inputs,
        pre_act,
        masks,
        probs,
    }
}

fn bce_loss(probs: &[f64], labels: &[f64]) -> f64 {
    let eps = 1e-12;
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Backprop of mean binary cross-entropy through the trace.
fn backward(model: &DffModel, trace: &ForwardTrace, labels: &[f64], batch: usize) -> Gradients {
    let n_layers = model.layers.len();
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = model
        .layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
        .collect();

    // dL/dz at the sigmoid output
    let mut delta: Vec<f64> = trace
        .probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| (p - y) / batch as f64)
        .collect();

    for l in (0..n_layers).rev() {
        let layer = &model.layers[l];
        let input = &trace.inputs[l];
        {
            let (gw, gb) = &mut grads[l];
            for b in 0..batch {
                let in_row = &input[b * layer.in_dim..(b + 1) * layer.in_dim];
                let d_row = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
                for (i, &x) in in_row.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let gw_row = &mut gw[i * layer.out_dim..(i + 1) * layer.out_dim];
                    for (o, &d) in d_row.iter().enumerate() {
                        gw_row[o] += x * d;
                    }
                }
                for (o, &d) in d_row.iter().enumerate() {
                    gb[o] += d;
                }
            }
        }
        if l == 0 {
            break;
        }
        // propagate to the previous activation
        let mut prev = vec![0.0; batch * layer.in_dim];
        for b in 0..batch {
            let d_row = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
            let p_row = &mut prev[b * layer.in_dim..(b + 1) * layer.in_dim];
            for i in 0..layer.in_dim {
                let w_row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                let mut acc = 0.0;
                for (o, &d) in d_row.iter().enumerate() {
                    acc += w_row[o] * d;
                }
                p_row[i] = acc;
            }
        }
        // through dropout (mask index l: site after hidden layer l-1 ... site 0 is the input)
        if let Some(mask) = &trace.masks[l] {
            for (v, m) in prev.iter_mut().zip(mask) {
                *v *= m;
            }
        }
        // through ReLU of hidden layer l-1
        for (v, &z) in prev.iter_mut().zip(&trace.pre_act[l - 1]) {
            if z <= 0.0 {
                *v = 0.0;
            }
        }
        delta = prev;
    }

    Gradients { layers: grads }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &DffConfig) {
        self.t += 1;
        let lr = cfg.learning_rate;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

fn flatten_params(model: &DffModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.param_count());
    for l in &model.layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.bias);
    }
    out
}

fn unflatten_params(model: &mut DffModel, flat: &[f64]) {
    let mut at = 0;
    for l in &mut model.layers {
        let nw = l.weights.len();
        l.weights.copy_from_slice(&flat[at..at + nw]);
        at += nw;
        let nb = l.bias.len();
        l.bias.copy_from_slice(&flat[at..at + nb]);
        at += nb;
    }
}

fn flatten_grads(g: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in &g.layers {
        out.extend_from_slice(w);
        out.extend_from_slice(b);
    }
    out
}

/// Seeded mini-batch training. Deterministic given (inputs, config, seed).
pub fn train_dff(x: &FeatureTable, y: &LabelVector, cfg: &DffConfig) -> Result<DffModel> {
    cfg.validate()?;
    if !y.has_both_classes() {
        return Err(Error::SingleClass);
    }
    if x.n_rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    let d = x.n_features();

    let mut init_rng = seeding::rng(seeding::subseed(cfg.seed, "dff-init", 0));
    let mut layers = Vec::with_capacity(cfg.hidden_layers + 1);
    let mut in_dim = d;
    for _ in 0..cfg.hidden_layers {
        layers.push(glorot_init(in_dim, cfg.hidden_width, &mut init_rng));
        in_dim = cfg.hidden_width;
    }
    layers.push(glorot_init(in_dim, 1, &mut init_rng));

    let mut model = DffModel {
        layers,
        config: cfg.clone(),
        epochs_run: 0,
    };

    let n_params = model.param_count();
    let mut adam = AdamState::new(n_params);
    let mut shuffle_rng = seeding::rng(seeding::subseed(cfg.seed, "dff-shuffle", 0));
    let mut dropout_rng = seeding::rng(seeding::subseed(cfg.seed, "dff-dropout", 0));

    let n = x.n_rows();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = chunk.len();
            let mut input = Vec::with_capacity(batch * d);
            let mut labels = Vec::with_capacity(batch);
            for &i in chunk {
                input.extend_from_slice(x.row(i));
                labels.push(f64::from(y.get(i)));
            }
            let trace = forward(&model, &input, batch, Some(&mut dropout_rng));
            let loss = bce_loss(&trace.probs, &labels);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let grads = backward(&model, &trace, &labels, batch);

            let mut flat = flatten_params(&model);
            adam.step(&mut flat, &flatten_grads(&grads), cfg);
            unflatten_params(&mut model, &flat);
        }
        model.epochs_run = epoch + 1;
    }
    Ok(model)
}

/// Forward pass with dropout disabled; sigmoid outputs in (0,1).
pub fn predict_dff(model: &DffModel, x: &FeatureTable) -> Result<ScoreVector> {
    if x.n_features() != model.input_width() {
        return Err(Error::Dimension {
            expected: model.input_width(),
            found: x.n_features(),
        });
    }
    let trace = forward(model, x.values(), x.n_rows(), None);
    Ok(ScoreVector::new(trace.probs))
}

fn relu_pattern(trace: &ForwardTrace) -> Vec<bool> {
    trace
        .pre_act
        .iter()
        .flatten()
        .map(|&z| z > 0.0)
        .collect()
}

/// Compares analytic gradients against central finite differences for every
/// parameter and returns the max relative error. Dropout disabled. A
/// parameter whose +/- epsilon probes land on different sides of a ReLU
/// kink is skipped: the loss is not differentiable there and a central
/// difference measures nothing meaningful.
pub fn gradient_check(
    model: &DffModel,
    x: &FeatureTable,
    y: &LabelVector,
    epsilon: f64,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon {epsilon} must be > 0")));
    }
    if x.n_features() != model.input_width() {
        return Err(Error::Dimension {
            expected: model.input_width(),
            found: x.n_features(),
        });
    }
    let batch = x.n_rows();
    let labels: Vec<f64> = y.as_slice().iter().map(|&l| f64::from(l)).collect();

    let trace = forward(model, x.values(), batch, None);
    let analytic = flatten_grads(&backward(model, &trace, &labels, batch));

    let mut probe = model.clone();
    let base = flatten_params(model);
    let mut max_rel = 0.0f64;
    for p in 0..base.len() {
        let mut flat = base.clone();
        flat[p] = base[p] + epsilon;
        unflatten_params(&mut probe, &flat);
        let trace_plus = forward(&probe, x.values(), batch, None);
        let plus = bce_loss(&trace_plus.probs, &labels);
        flat[p] = base[p] - epsilon;
        unflatten_params(&mut probe, &flat);
        let trace_minus = forward(&probe, x.values(), batch, None);
        let minus = bce_loss(&trace_minus.probs, &labels);
        if relu_pattern(&trace_plus) != relu_pattern(&trace_minus) {
            continue;
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let g = analytic[p];
        let rel = (g - numeric).abs() / (1e-8f64).max(g.abs() + numeric.abs());
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
