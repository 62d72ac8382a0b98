//! ReLU classifier networks as exact piecewise-linear objects.
//!
//! A [`Plnn`] is an ordered list of dense layers with ReLU on every hidden
//! layer and a sigmoid on the single output unit. Within the linear region
//! selected by a [`Configuration`] (the on/off pattern of all hidden
//! neurons), the network *is* an affine map, and everything about that map
//! has a closed form: the local [`LinearEquation`], the half-space
//! [`Inequality`] list bounding the region, each neuron's zero-activation
//! hyperplane, and the region's decision boundary.
//!
//! All products over layers run right-to-left (the last layer's matrix is
//! applied last), so the accumulated weight equals `W_n · ... · W_1` with
//! masked columns for the off neurons.

use std::fmt;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`].
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One dense layer: `z = W x + b`, with `W` shaped `[out × in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Self {
        Layer { weights, bias }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Copy of the weight matrix with the columns of off neurons zeroed.
    fn masked_columns(&self, mask: &[bool]) -> Array2<f64> {
        let mut w = self.weights.clone();
        for (j, &on) in mask.iter().enumerate() {
            if !on {
                w.column_mut(j).fill(0.0);
            }
        }
        w
    }
}

/// Activation states of every hidden neuron, layer-major, neuron index
/// ascending within a layer. Bit 1 means the ReLU is passing its input
/// through (pre-activation ≥ 0), bit 0 means it outputs zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    bits: Vec<bool>,
}

impl Configuration {
    pub fn new(bits: Vec<bool>) -> Self {
        Configuration { bits }
    }

    /// Build from 0/1 integers; anything nonzero counts as on.
    pub fn from_bits(bits: &[u8]) -> Self {
        Configuration {
            bits: bits.iter().map(|&b| b != 0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// Compact text form, e.g. `10110`.
    pub fn bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Parse the [`bitstring`](Self::bitstring) form.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::DataFormat(format!(
                    "invalid configuration character '{other}'"
                ))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(Configuration { bits })
    }

    /// Copy with bit `i` flipped.
    pub fn with_bit_flipped(&self, i: usize) -> Configuration {
        let mut bits = self.bits.clone();
        bits[i] = !bits[i];
        Configuration { bits }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bitstring())
    }
}

/// The affine map `z = w·x + b` a network applies inside one region.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquation {
    pub w: Array1<f64>,
    pub b: f64,
}

impl LinearEquation {
    pub fn eval(&self, x: ArrayView1<f64>) -> f64 {
        self.w.dot(&x) + self.b
    }

    /// True when every weight entry is exactly zero (constant-output region).
    pub fn is_zero_weight(&self) -> bool {
        self.w.iter().all(|&v| v == 0.0)
    }
}

/// Comparison sense of a half-space constraint on `w·x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    /// `w·x + b ≥ 0`, corresponding to activation bit 1.
    Geq,
    /// `w·x + b < 0`, corresponding to activation bit 0.
    Lt,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Geq => ">=",
            Sense::Lt => "<",
        })
    }
}

/// One linear inequality bounding a region.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub w: Array1<f64>,
    pub b: f64,
    pub sense: Sense,
}

impl Inequality {
    /// Signed value `w·x + b`; the sense decides which side is inside.
    pub fn margin(&self, x: ArrayView1<f64>) -> f64 {
        self.w.dot(&x) + self.b
    }

    pub fn satisfied_by(&self, x: ArrayView1<f64>) -> bool {
        let v = self.margin(x);
        match self.sense {
            Sense::Geq => v >= 0.0,
            Sense::Lt => v < 0.0,
        }
    }
}

/// One linear region together with the instance statistics observed on a
/// dataset. Built by `analysis::region_census`.
#[derive(Debug, Clone)]
pub struct Region {
    pub config: Configuration,
    pub inequalities: Vec<Inequality>,
    pub equation: LinearEquation,
    pub trivial: bool,
    pub instance_count: usize,
    /// (count of label 0, count of label 1).
    pub class_counts: (usize, usize),
}

impl Region {
    /// A region holding instances of both classes.
    pub fn is_mixed(&self) -> bool {
        self.class_counts.0 > 0 && self.class_counts.1 > 0
    }
}

/// Result of a forward pass: the output probability and every layer's
/// pre-activation vector (the output layer's scalar included, last).
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub probability: f64,
    pub preactivations: Vec<Array1<f64>>,
}

impl ForwardPass {
    /// Pre-sigmoid output value.
    pub fn logit(&self) -> f64 {
        self.preactivations.last().expect("at least one layer")[0]
    }
}

/// A piecewise-linear classifier: dense ReLU hidden layers and a single
/// sigmoid output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Plnn {
    layers: Vec<Layer>,
}

impl Plnn {
    /// Validate layer shapes and build the network.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l}: bias length {} != weight rows {}",
                    layer.bias.len(),
                    layer.out_dim()
                )));
            }
            if l + 1 < layers.len() && layers[l + 1].in_dim() != layer.out_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} input dim {} != layer {l} output dim {}",
                    l + 1,
                    layers[l + 1].in_dim(),
                    layer.out_dim()
                )));
            }
            if layer
                .weights
                .iter()
                .chain(layer.bias.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l} contains a non-finite entry"
                )));
            }
        }
        let last = layers.last().expect("nonempty");
        if last.out_dim() != 1 {
            return Err(Error::InvalidNetwork(format!(
                "output layer must have exactly 1 unit, got {}",
                last.out_dim()
            )));
        }
        Ok(Plnn { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Total layer count n (hidden layers plus the output layer).
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    /// Total hidden neuron count N, the configuration length.
    pub fn num_hidden_neurons(&self) -> usize {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .sum()
    }

    /// Offset of hidden layer `layer`'s first bit within a configuration.
    pub fn layer_offset(&self, layer: usize) -> usize {
        self.layers[..layer].iter().map(Layer::out_dim).sum()
    }

    /// Map a flat hidden-neuron index back to (layer, neuron-within-layer).
    pub fn locate_neuron(&self, bit: usize) -> (usize, usize) {
        let mut rest = bit;
        for (l, layer) in self.layers[..self.layers.len() - 1].iter().enumerate() {
            if rest < layer.out_dim() {
                return (l, rest);
            }
            rest -= layer.out_dim();
        }
        panic!("bit index {bit} out of range");
    }

    fn check_input(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_config(&self, c: &Configuration) -> Result<()> {
        if c.len() != self.num_hidden_neurons() {
            return Err(Error::ShapeMismatch {
                expected: self.num_hidden_neurons(),
                got: c.len(),
            });
        }
        Ok(())
    }

    /// Feed `x` through the network, recording every pre-activation.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<ForwardPass> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut preactivations = Vec::with_capacity(n);
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.weights.dot(&a) + &layer.bias;
            if l + 1 < n {
                a = z.mapv(|v| v.max(0.0));
            }
            preactivations.push(z);
        }
        let probability = sigmoid(preactivations[n - 1][0]);
        Ok(ForwardPass {
            probability,
            preactivations,
        })
    }

    /// Activation pattern of `x`: bit 1 iff the neuron's pre-activation ≥ 0.
    pub fn configuration_of(&self, x: ArrayView1<f64>) -> Result<Configuration> {
        let pass = self.forward(x)?;
        Ok(Self::configuration_from_preacts(&pass.preactivations))
    }

    fn configuration_from_preacts(preacts: &[Array1<f64>]) -> Configuration {
        let bits = preacts[..preacts.len() - 1]
            .iter()
            .flat_map(|z| z.iter().map(|&v| v >= 0.0))
            .collect();
        Configuration::new(bits)
    }

    /// Configuration of every row of `x`.
    pub fn configurations_batch(&self, x: ArrayView2<f64>) -> Result<Vec<Configuration>> {
        x.rows()
            .into_iter()
            .map(|row| self.configuration_of(row))
            .collect()
    }

    /// Pre-sigmoid outputs for every row of `x` (fast matrix path).
    pub fn logits_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let n = self.layers.len();
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias;
            a = if l + 1 < n { z.mapv(|v| v.max(0.0)) } else { z };
        }
        Ok(a.index_axis(Axis(1), 0).to_owned())
    }

    /// Masked weight matrix of layer `l` under `c`: for `l ≥ 1`, column `j`
    /// is zeroed iff neuron `j` of hidden layer `l−1` is off. Layer 0 is
    /// never masked.
    fn masked_layer(&self, l: usize, c: &Configuration) -> Array2<f64> {
        if l == 0 {
            return self.layers[0].weights.clone();
        }
        let off = self.layer_offset(l - 1);
        let width = self.layers[l - 1].out_dim();
        self.layers[l].masked_columns(&c.bits()[off..off + width])
    }

    /// All masked weight matrices `[W_1^C, ..., W_n^C]` for configuration `c`.
    pub fn masked_weights(&self, c: &Configuration) -> Result<Vec<Array2<f64>>> {
        self.check_config(c)?;
        Ok((0..self.layers.len())
            .map(|l| self.masked_layer(l, c))
            .collect())
    }

    /// Accumulated affine map through layers `0..=last` under `c`:
    /// returns (product of masked weights, accumulated bias).
    fn accumulate_through(&self, c: &Configuration, last: usize) -> (Array2<f64>, Array1<f64>) {
        let mut w_acc = self.masked_layer(0, c);
        let mut b_acc = self.layers[0].bias.clone();
        for l in 1..=last {
            let wm = self.masked_layer(l, c);
            w_acc = wm.dot(&w_acc);
            b_acc = wm.dot(&b_acc) + &self.layers[l].bias;
        }
        (w_acc, b_acc)
    }

    /// Closed-form local affine map of the region indexed by `c`.
    ///
    /// For every `x` whose configuration is `c`, `w·x + b` equals the
    /// network's final pre-activation.
    pub fn linear_equation(&self, c: &Configuration) -> Result<LinearEquation> {
        self.check_config(c)?;
        let (w_acc, b_acc) = self.accumulate_through(c, self.layers.len() - 1);
        Ok(LinearEquation {
            w: w_acc.row(0).to_owned(),
            b: b_acc[0],
        })
    }

    /// True iff some hidden layer is entirely off in `c`, which forces the
    /// region's output to be constant.
    pub fn is_trivial(&self, c: &Configuration) -> Result<bool> {
        self.check_config(c)?;
        let mut off = 0;
        for layer in &self.layers[..self.layers.len() - 1] {
            let width = layer.out_dim();
            if c.bits()[off..off + width].iter().all(|&b| !b) {
                return Ok(true);
            }
            off += width;
        }
        Ok(false)
    }

    /// Boundary `(w, b)` of neuron (`layer`, `neuron`)'s zero-activation
    /// hyperplane under `c`. `layer` indexes hidden layers from 0. The
    /// result depends only on the bits of layers before `layer`; `w·x + b`
    /// equals the neuron's pre-activation for any `x` whose configuration
    /// agrees with `c` on those bits.
    pub fn zero_activation_hyperplane(
        &self,
        c: &Configuration,
        layer: usize,
        neuron: usize,
    ) -> Result<(Array1<f64>, f64)> {
        self.check_config(c)?;
        let hidden = self.layers.len() - 1;
        if layer >= hidden {
            return Err(Error::IndexOutOfRange {
                what: "hidden layer",
                index: layer,
                len: hidden,
            });
        }
        if neuron >= self.layers[layer].out_dim() {
            return Err(Error::IndexOutOfRange {
                what: "neuron",
                index: neuron,
                len: self.layers[layer].out_dim(),
            });
        }
        let (w_acc, b_acc) = self.accumulate_through(c, layer);
        Ok((w_acc.row(neuron).to_owned(), b_acc[neuron]))
    }

    /// The half-space constraints of region `c`: one inequality per hidden
    /// neuron, with sense ≥ for bit 1 and < for bit 0. For a single-layer
    /// network these are exactly the sign constraints on `W_1 x + B_1`.
    pub fn region_inequalities(&self, c: &Configuration) -> Result<Vec<Inequality>> {
        self.check_config(c)?;
        let mut out = Vec::with_capacity(self.num_hidden_neurons());
        let mut w_acc = self.masked_layer(0, c);
        let mut b_acc = self.layers[0].bias.clone();
        let mut off = 0;
        for l in 0..self.layers.len() - 1 {
            if l > 0 {
                let wm = self.masked_layer(l, c);
                w_acc = wm.dot(&w_acc);
                b_acc = wm.dot(&b_acc) + &self.layers[l].bias;
            }
            for i in 0..self.layers[l].out_dim() {
                out.push(Inequality {
                    w: w_acc.row(i).to_owned(),
                    b: b_acc[i],
                    sense: if c.bit(off + i) { Sense::Geq } else { Sense::Lt },
                });
            }
            off += self.layers[l].out_dim();
        }
        Ok(out)
    }

    /// The region's decision boundary `w·x + b = 0` (output probability
    /// one half), or `None` for trivial regions, which no boundary crosses.
    pub fn decision_boundary(&self, c: &Configuration) -> Result<Option<LinearEquation>> {
        if self.is_trivial(c)? {
            return Ok(None);
        }
        Ok(Some(self.linear_equation(c)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PlnnJson::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: PlnnJson = serde_json::from_str(s)?;
        raw.into_plnn()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk model form: row-major weight rows, one object per layer.
#[derive(Serialize, Deserialize)]
struct LayerJson {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PlnnJson {
    layers: Vec<LayerJson>,
}

impl From<&Plnn> for PlnnJson {
    fn from(net: &Plnn) -> Self {
        PlnnJson {
            layers: net
                .layers
                .iter()
                .map(|layer| LayerJson {
                    w: layer.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    b: layer.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl PlnnJson {
    fn into_plnn(self) -> Result<Plnn> {
        let layers = self
            .layers
            .into_iter()
            .enumerate()
            .map(|(l, raw)| {
                let rows = raw.w.len();
                let cols = raw.w.first().map_or(0, Vec::len);
                if raw.w.iter().any(|r| r.len() != cols) {
                    return Err(Error::DataFormat(format!(
                        "layer {l}: ragged weight rows"
                    )));
                }
                let flat: Vec<f64> = raw.w.into_iter().flatten().collect();
                let weights = Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|e| Error::DataFormat(format!("layer {l}: {e}")))?;
                Ok(Layer::new(weights, Array1::from_vec(raw.b)))
            })
            .collect::<Result<Vec<Layer>>>()?;
        Plnn::new(layers)
    }
}
