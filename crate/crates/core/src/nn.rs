//! Small dense feed-forward networks trained with momentum SGD.
//!
//! Parameters are `f64` throughout. Each layer stores its weights row-major as
//! `outputs x inputs`, followed by a bias vector.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_finite, check_len, Error, Result};

/// Floor applied to probabilities inside the logarithm of the cross-entropy loss.
pub const PROB_FLOOR: f64 = 1e-8;

/// Step used by [`DenseNet::gradient_check`].
pub const FD_STEP: f64 = 1e-5;

const MAGIC: &[u8; 8] = b"INVRLNET";
const BLOB_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
            Activation::Linear => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.025,
            momentum: 0.8,
            batch_size: 32,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(
                "sgd",
                format!("learning rate {}", self.learning_rate),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("sgd", format!("momentum {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("sgd", "batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Training target for one sample. The variant selects the loss.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Mean squared error against a full output vector.
    Values(Vec<f64>),
    /// Advantage-weighted cross-entropy `-advantage * log softmax(out)[action]`.
    Advantage { action: usize, advantage: f64 },
}

impl Target {
    fn loss(&self, output: &[f64]) -> f64 {
        match self {
            Target::Values(t) => {
                let n = output.len() as f64;
                output.iter().zip(t).map(|(y, t)| (y - t).powi(2)).sum::<f64>() / n
            }
            Target::Advantage { action, advantage } => {
                let probs = softmax(output);
                -advantage * probs[*action].max(PROB_FLOOR).ln()
            }
        }
    }

    fn output_gradient(&self, output: &[f64]) -> Vec<f64> {
        match self {
            Target::Values(t) => {
                let n = output.len() as f64;
                output.iter().zip(t).map(|(y, t)| 2.0 * (y - t) / n).collect()
            }
            Target::Advantage { action, advantage } => {
                let probs = softmax(output);
                if probs[*action] <= PROB_FLOOR {
                    return vec![0.0; output.len()];
                }
                probs
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| {
                        let hot = if k == *action { 1.0 } else { 0.0 };
                        -advantage * (hot - p)
                    })
                    .collect()
            }
        }
    }

    fn check(&self, outputs: usize) -> Result<()> {
        match self {
            Target::Values(t) => {
                check_len("target", outputs, t.len())?;
                check_finite("target", t)
            }
            Target::Advantage { action, advantage } => {
                if *action >= outputs {
                    return Err(Error::invalid("target", format!("action {action} out of range")));
                }
                check_finite("advantage", &[*advantage])
            }
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
    vel_weights: Vec<f64>,
    vel_bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            inputs,
            outputs,
            activation,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            vel_weights: vec![0.0; inputs * outputs],
            vel_bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| {
                let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
                self.activation.apply(z)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

impl DenseNet {
    /// Network with every parameter at zero.
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::invalid(
                "network",
                "need at least an input and an output layer",
            ));
        }
        check_len("activations", sizes.len() - 1, activations.len())?;
        if sizes.contains(&0) {
            return Err(Error::invalid("network", "zero-width layer"));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Dense::zeros(w[0], w[1], act))
            .collect();
        Ok(DenseNet { layers })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters in blob order: per layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("parameters", self.param_count(), params.len())?;
        check_finite("parameters", params)?;
        let mut rest = params;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.weights.len());
            let (b, tail) = tail.split_at(layer.bias.len());
            layer.weights.copy_from_slice(w);
            layer.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Overwrites the parameters with another network's, leaving momentum alone.
    pub fn copy_params_from(&mut self, other: &DenseNet) -> Result<()> {
        if self.sizes() != other.sizes() || self.activations() != other.activations() {
            return Err(Error::invalid(
                "network",
                "architecture mismatch on parameter copy",
            ));
        }
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.copy_from_slice(&src.weights);
            dst.bias.copy_from_slice(&src.bias);
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.inputs(), input.len())?;
        check_finite("network input", input)?;
        Ok(self.forward_unchecked(input))
    }

    fn forward_unchecked(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer.forward(&x);
        }
        x
    }

    /// Layer outputs, starting with the input itself.
    fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut outs = Vec::with_capacity(self.layers.len() + 1);
        outs.push(input.to_vec());
        for layer in &self.layers {
            let next = layer.forward(outs.last().unwrap());
            outs.push(next);
        }
        outs
    }

    fn check_batch(&self, inputs: &[Vec<f64>], targets: &[Target]) -> Result<()> {
        check_len("batch targets", inputs.len(), targets.len())?;
        if inputs.is_empty() {
            return Err(Error::invalid("batch", "empty"));
        }
        for (x, t) in inputs.iter().zip(targets) {
            check_len("network input", self.inputs(), x.len())?;
            check_finite("network input", x)?;
            t.check(self.outputs())?;
        }
        Ok(())
    }

    /// Mean loss over the batch without touching the parameters.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Target]) -> Result<f64> {
        self.check_batch(inputs, targets)?;
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| t.loss(&self.forward_unchecked(x)))
            .sum();
        Ok(total / inputs.len() as f64)
    }

    /// Mean batch loss and its gradient with respect to every parameter.
    pub fn gradients(&self, inputs: &[Vec<f64>], targets: &[Target]) -> Result<(f64, Gradients)> {
        self.check_batch(inputs, targets)?;
        let mut grads = Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        };
        let scale = 1.0 / inputs.len() as f64;
        let mut loss = 0.0;
        for (x, target) in inputs.iter().zip(targets) {
            let outs = self.trace(x);
            let output = outs.last().unwrap();
            loss += target.loss(output);
            // Gradient of the loss with respect to the current layer's output.
            let mut upstream = target.output_gradient(output);
            for (k, layer) in self.layers.iter().enumerate().rev() {
                let y = &outs[k + 1];
                let input = &outs[k];
                let delta: Vec<f64> = upstream
                    .iter()
                    .zip(y)
                    .map(|(g, &y)| g * layer.activation.derivative_from_output(y))
                    .collect();
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    grads.bias[k][o] += d * scale;
                    let row = &mut grads.weights[k][o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += d * xi * scale;
                    }
                }
                if k > 0 {
                    upstream = vec![0.0; layer.inputs];
                    for (o, d) in delta.iter().enumerate() {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (u, w) in upstream.iter_mut().zip(row) {
                            *u += d * w;
                        }
                    }
                }
            }
        }
        Ok((loss * scale, grads))
    }

    /// One heavy-ball momentum step on the batch: `m <- mu m - lr g`, `theta <- theta + m`.
    ///
    /// Returns the batch loss before the update. A non-finite gradient leaves
    /// the network untouched.
    pub fn train_batch(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[Target],
        config: &SgdConfig,
    ) -> Result<f64> {
        let (loss, grads) = self.gradients(inputs, targets)?;
        for (k, (gw, gb)) in grads.weights.iter().zip(&grads.bias).enumerate() {
            if gw.iter().chain(gb).any(|g| !g.is_finite()) {
                log::warn!("non-finite gradient in layer {k}, batch loss {loss}");
                return Err(Error::NonFiniteGradient { layer: k });
            }
        }
        let (lr, mu) = (config.learning_rate, config.momentum);
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(grads.weights.iter().zip(&grads.bias)) {
            for ((w, v), g) in layer.weights.iter_mut().zip(&mut layer.vel_weights).zip(gw) {
                *v = mu * *v - lr * g;
                *w += *v;
            }
            for ((b, v), g) in layer.bias.iter_mut().zip(&mut layer.vel_bias).zip(gb) {
                *v = mu * *v - lr * g;
                *b += *v;
            }
        }
        Ok(loss)
    }

    /// Largest hybrid relative error `|g - g_fd| / max(1e-8, |g| + |g_fd|)`
    /// between backprop and central finite differences over all parameters.
    pub fn gradient_check(&self, input: &[f64], target: &Target) -> Result<f64> {
        let inputs = [input.to_vec()];
        let targets = [target.clone()];
        let (_, grads) = self.gradients(&inputs, &targets)?;
        let analytic = grads.flatten();
        let base = self.params();
        let mut probe = self.clone();
        let mut worst = 0.0_f64;
        for (i, g) in analytic.iter().enumerate() {
            let mut shifted = base.clone();
            shifted[i] = base[i] + FD_STEP;
            probe.set_params(&shifted)?;
            let up = probe.loss(&inputs, &targets)?;
            shifted[i] = base[i] - FD_STEP;
            probe.set_params(&shifted)?;
            let down = probe.loss(&inputs, &targets)?;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let err = (g - numeric).abs() / (g.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
        Ok(worst)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for size in self.sizes() {
            out.extend_from_slice(&(size as u32).to_le_bytes());
        }
        out.extend(self.layers.iter().map(|l| l.activation.tag()));
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest[..CHECKSUM_LEN]);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let blob_err = |msg: &str| Error::Blob(msg.to_string());
        if bytes.len() < MAGIC.len() + 8 + CHECKSUM_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(blob_err("missing magic header"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body)[..CHECKSUM_LEN] != *checksum {
            return Err(blob_err("checksum mismatch"));
        }
        let mut reader = Reader {
            buf: body,
            pos: MAGIC.len(),
        };
        let version = reader.u32()?;
        if version != BLOB_VERSION {
            return Err(Error::Blob(format!("unsupported version {version}")));
        }
        let n_layers = reader.u32()? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(Error::Blob(format!("implausible layer count {n_layers}")));
        }
        let sizes = (0..=n_layers)
            .map(|_| reader.u32().map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        let activations = (0..n_layers)
            .map(|_| {
                reader
                    .u8()
                    .and_then(|t| Activation::from_tag(t).ok_or_else(|| blob_err("unknown activation tag")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut net = DenseNet::zeros(&sizes, &activations).map_err(|e| Error::Blob(e.to_string()))?;
        let remaining = body.len() - reader.pos;
        if remaining != 8 * net.param_count() {
            return Err(Error::Blob(format!(
                "shape header implies {} parameters, found {} bytes",
                net.param_count(),
                remaining
            )));
        }
        let params = (0..net.param_count())
            .map(|_| reader.f64())
            .collect::<Result<Vec<_>>>()?;
        net.set_params(&params).map_err(|e| Error::Blob(e.to_string()))?;
        Ok(net)
    }

    /// Loads a blob and checks it has the expected layer sizes.
    pub fn from_bytes_expecting(bytes: &[u8], sizes: &[usize]) -> Result<Self> {
        let net = Self::from_bytes(bytes)?;
        if net.sizes() != sizes {
            return Err(Error::Blob(format!(
                "expected layer sizes {sizes:?}, blob has {:?}",
                net.sizes()
            )));
        }
        Ok(net)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Blob("truncated".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}
