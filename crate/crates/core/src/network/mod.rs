//! Dense feedforward networks over 6x6 grids: construction, forward pass with
//! every layer's activations captured, and exact backpropagation for a
//! softmax output trained with cross-entropy.
//!
//! All arithmetic is `f64` and evaluated in a fixed sequential order, so a
//! network built from the same config produces the same bits everywhere.

mod activation;
pub(crate) mod model_io;

pub use activation::Activation;
pub use model_io::{model_load, model_save, MODEL_FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PixelGrid, GRID_COLS, GRID_LEN, GRID_ROWS};
use crate::rng::SeededRng;

/// Probabilities are clamped to this floor before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Flatten,
    #[default]
    Dense,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(default)]
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            units: Some(units),
            activation: Some(activation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Uniform in `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`, zero biases.
    #[default]
    UniformScaled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub input_rows: usize,
    pub input_cols: usize,
    pub hidden: Vec<LayerSpec>,
    pub output_units: usize,
    pub output_activation: Activation,
    pub init: Init,
    pub seed: u64,
}

pub const DEFAULT_HIDDEN_UNITS: usize = 20;

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_rows: GRID_ROWS,
            input_cols: GRID_COLS,
            hidden: vec![LayerSpec::dense(DEFAULT_HIDDEN_UNITS, Activation::Relu)],
            output_units: 10,
            output_activation: Activation::Softmax,
            init: Init::UniformScaled,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hidden(mut self, widths: &[usize], activation: Activation) -> Self {
        self.hidden = widths
            .iter()
            .map(|&w| LayerSpec::dense(w, activation))
            .collect();
        self
    }

    /// Checks every invariant; errors carry the offending field path.
    pub fn validate(&self) -> Result<()> {
        if self.input_rows != GRID_ROWS {
            return Err(Error::config("input_rows", format!("must be {GRID_ROWS}")));
        }
        if self.input_cols != GRID_COLS {
            return Err(Error::config("input_cols", format!("must be {GRID_COLS}")));
        }
        for (i, spec) in self.hidden.iter().enumerate() {
            let at = |field: &str| format!("hidden[{i}]{field}");
            match spec.kind {
                LayerKind::Flatten => {
                    return Err(Error::config(
                        at(".kind"),
                        "flatten is implicit at the input and cannot appear among hidden layers",
                    ))
                }
                LayerKind::Dense => {
                    match spec.units {
                        None => return Err(Error::config(at(".units"), "missing")),
                        Some(0) => return Err(Error::config(at(".units"), "must be positive")),
                        Some(_) => {}
                    }
                    match spec.activation {
                        None => return Err(Error::config(at(".activation"), "missing")),
                        Some(Activation::Softmax) => {
                            return Err(Error::config(
                                at(".activation"),
                                "softmax is only permitted on the final layer",
                            ))
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        if self.output_units < 2 {
            return Err(Error::config("output_units", "must be at least 2"));
        }
        if self.output_activation != Activation::Softmax {
            return Err(Error::config(
                "output_activation",
                "only softmax is supported on the output layer",
            ));
        }
        Ok(())
    }

    /// `(units_out, activation)` for every dense layer in order, output last.
    pub(crate) fn dense_shapes(&self) -> Vec<(usize, Activation)> {
        let mut v: Vec<(usize, Activation)> = self
            .hidden
            .iter()
            .map(|s| {
                (
                    s.units.unwrap_or(0),
                    s.activation.unwrap_or(Activation::Relu),
                )
            })
            .collect();
        v.push((self.output_units, self.output_activation));
        v
    }
}

/// One dense layer: `out = activation(W * in + b)`, `W` row-major `units_out x units_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    units_in: usize,
    units_out: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub(crate) fn from_parts(
        units_in: usize,
        units_out: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Self {
        debug_assert_eq!(weights.len(), units_in * units_out);
        debug_assert_eq!(biases.len(), units_out);
        DenseLayer {
            units_in,
            units_out,
            weights,
            biases,
            activation,
        }
    }

    pub fn units_in(&self) -> usize {
        self.units_in
    }

    pub fn units_out(&self) -> usize {
        self.units_out
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.units_in + inp]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.units_in)
            .zip(&self.biases)
            .map(|(row, &b)| {
                let mut sum = b;
                for (&w, &x) in row.iter().zip(input) {
                    sum += w * x;
                }
                sum
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<DenseLayer>,
}

/// Named output values of one stage of a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub values: Vec<f64>,
}

/// Every stage of one forward pass: the raw input first, then each dense layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationRecord {
    pub stages: Vec<Stage>,
}

impl ActivationRecord {
    pub fn input(&self) -> &[f64] {
        &self.stages[0].values
    }

    pub fn output(&self) -> &[f64] {
        &self
            .stages
            .last()
            .expect("record has an input stage")
            .values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Loss gradients, shaped exactly like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    /// `self += other`
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= factor);
            l.biases.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|x| x.is_finite()))
    }
}

fn stage_name(index: usize, dense_count: usize) -> String {
    if index == 0 {
        "input".to_owned()
    } else if index == dense_count {
        "output".to_owned()
    } else {
        format!("hidden{index}")
    }
}

impl Network {
    /// Builds a freshly initialized network. Pure function of `config`.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(config.seed);
        let mut units_in = GRID_LEN;
        let mut layers = Vec::new();
        for (units_out, activation) in config.dense_shapes() {
            let limit = (6.0 / (units_in + units_out) as f64).sqrt();
            let weights = (0..units_in * units_out)
                .map(|_| rng.uniform(-limit, limit))
                .collect();
            layers.push(DenseLayer::from_parts(
                units_in,
                units_out,
                weights,
                vec![0.0; units_out],
                activation,
            ));
            units_in = units_out;
        }
        Ok(Network { config, layers })
    }

    /// Assembles a network from explicit layers, checking chaining against the config.
    pub fn from_layers(config: NetworkConfig, layers: Vec<DenseLayer>) -> Result<Self> {
        config.validate()?;
        let shapes = config.dense_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::config(
                "layers",
                format!(
                    "expected {} dense layers, got {}",
                    shapes.len(),
                    layers.len()
                ),
            ));
        }
        let mut units_in = GRID_LEN;
        for (k, (layer, (units_out, activation))) in layers.iter().zip(shapes).enumerate() {
            if layer.units_in != units_in || layer.units_out != units_out {
                return Err(Error::config(
                    format!("layers[{k}]"),
                    format!(
                        "shape {}x{} does not chain (expected {units_out}x{units_in})",
                        layer.units_out, layer.units_in
                    ),
                ));
            }
            if layer.activation != activation {
                return Err(Error::config(
                    format!("layers[{k}].activation"),
                    format!(
                        "{} does not match config ({})",
                        layer.activation.name(),
                        activation.name()
                    ),
                ));
            }
            units_in = units_out;
        }
        Ok(Network { config, layers })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn output_units(&self) -> usize {
        self.config.output_units
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// All weights then biases, layer by layer.
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.biases);
        }
        v
    }

    /// Forward pass capturing every stage; stage 0 is the flattened input.
    pub fn forward(&self, input: &PixelGrid) -> ActivationRecord {
        let n = self.layers.len();
        let mut stages = Vec::with_capacity(n + 1);
        stages.push(Stage {
            name: stage_name(0, n),
            values: input.pixels().to_vec(),
        });
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.pre_activation(&stages[k].values);
            stages.push(Stage {
                name: stage_name(k + 1, n),
                values: layer.activation.apply_finite(&z),
            });
        }
        ActivationRecord { stages }
    }

    /// Output probabilities only.
    pub fn probabilities(&self, input: &PixelGrid) -> Vec<f64> {
        let mut a = input.pixels().to_vec();
        for layer in &self.layers {
            a = layer.activation.apply_finite(&layer.pre_activation(&a));
        }
        a
    }

    /// Cross-entropy loss `-ln(max(p_target, 1e-12))`.
    pub fn loss(&self, input: &PixelGrid, target: usize) -> Result<f64> {
        self.check_target(target)?;
        Ok(cross_entropy(&self.probabilities(input), target))
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.config.output_units {
            return Err(Error::Argument(format!(
                "target class {target} out of range for {} outputs",
                self.config.output_units
            )));
        }
        Ok(())
    }

    /// Loss and its exact gradient with respect to every weight and bias.
    pub fn backward(&self, input: &PixelGrid, target: usize) -> Result<(f64, Gradients)> {
        self.check_target(target)?;
        let n = self.layers.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(n);
        acts.push(input.pixels().to_vec());
        for layer in &self.layers {
            let z = layer.pre_activation(acts.last().unwrap());
            acts.push(layer.activation.apply_finite(&z));
            pres.push(z);
        }

        let probs = &acts[n];
        let loss = cross_entropy(probs, target);
        let mut grads = Gradients::zeros_like(self);
        // Below the clamp the loss is flat, so every gradient is zero.
        if probs[target] < PROB_FLOOR {
            return Ok((loss, grads));
        }

        // dL/dz at the softmax output.
        let mut delta: Vec<f64> = probs.clone();
        delta[target] -= 1.0;

        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let prev = &acts[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] = d;
                let row = &mut g.weights[o * layer.units_in..(o + 1) * layer.units_in];
                for (gw, &x) in row.iter_mut().zip(prev) {
                    *gw = d * x;
                }
            }
            if k == 0 {
                break;
            }
            let below = &self.layers[k - 1];
            let mut next = vec![0.0; layer.units_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.units_in..(o + 1) * layer.units_in];
                for (acc, &w) in next.iter_mut().zip(row) {
                    *acc += w * d;
                }
            }
            for (i, v) in next.iter_mut().enumerate() {
                *v *= below.activation.derivative(pres[k - 1][i], acts[k][i]);
            }
            delta = next;
        }
        Ok((loss, grads))
    }

    /// `w <- w - lr * grad` for every parameter.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, d) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * d;
            }
            for (b, d) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= learning_rate * d;
            }
        }
    }

    /// Euclidean distance between the flattened parameter vectors.
    pub fn parameter_distance(&self, other: &Network) -> f64 {
        self.flat_parameters()
            .iter()
            .zip(other.flat_parameters())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    -probs[target].clamp(PROB_FLOOR, 1.0).ln()
}
