use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Elu,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub width: usize,
    pub activation: Activation,
}

/// Architecture of a fully connected network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub input: usize,
    pub layers: Vec<Layer>,
}

impl MlpSpec {
    pub fn new(input: usize, layers: Vec<(usize, Activation)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        if input == 0 || layers.iter().any(|(w, _)| *w == 0) {
            return Err(Error::Config("MLP widths must be positive".into()));
        }
        Ok(Self {
            input,
            layers: layers
                .into_iter()
                .map(|(width, activation)| Layer { width, activation })
                .collect(),
        })
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(self.input, |l| l.width)
    }

    pub fn param_count(&self) -> usize {
        let mut fan_in = self.input;
        let mut total = 0;
        for l in &self.layers {
            total += fan_in * l.width + l.width;
            fan_in = l.width;
        }
        total
    }
}

/// Weights (`[fan_in, width]`) and biases (`[1, width]`) for an [`MlpSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

/// Tape handles for the parameters of one [`Mlp`].
#[derive(Clone, Debug)]
pub struct MlpVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl MlpVars {
    /// Weight/bias vars interleaved in the same order as [`Mlp::params`].
    pub fn all(&self) -> Vec<Var> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [*w, *b])
            .collect()
    }
}

impl Mlp {
    /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) for weights and biases.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut weights = Vec::with_capacity(spec.layers.len());
        let mut biases = Vec::with_capacity(spec.layers.len());
        let mut fan_in = spec.input;
        for layer in &spec.layers {
            let bound = (1.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * layer.width)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let b: Vec<f64> = (0..layer.width)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            weights.push(Tensor::matrix(fan_in, layer.width, w).expect("weight shape"));
            biases.push(Tensor::matrix(1, layer.width, b).expect("bias shape"));
            fan_in = layer.width;
        }
        Self {
            spec,
            weights,
            biases,
        }
    }

    pub fn from_params(spec: MlpSpec, weights: Vec<Tensor>, biases: Vec<Tensor>) -> Result<Self> {
        if weights.len() != spec.layers.len() || biases.len() != spec.layers.len() {
            return Err(Error::Config(
                "parameter count does not match MLP spec".into(),
            ));
        }
        let mut fan_in = spec.input;
        for (i, layer) in spec.layers.iter().enumerate() {
            if weights[i].shape() != [fan_in, layer.width] || biases[i].shape() != [1, layer.width]
            {
                return Err(Error::Config(format!(
                    "layer {i}: expected weight [{fan_in}, {}] and bias [1, {}], got {:?} and {:?}",
                    layer.width,
                    layer.width,
                    weights[i].shape(),
                    biases[i].shape()
                )));
            }
            fan_in = layer.width;
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    /// Parameters in fixed order: w0, b0, w1, b1, ...
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.cols() != self.spec.input {
            return Err(Error::Config(format!(
                "MLP expects input width {}, got {}",
                self.spec.input,
                input.cols()
            )));
        }
        Ok(())
    }

    /// Inference without recording.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut h = input.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let mut next = h.matmul(&self.weights[i])?;
            let b = self.biases[i].data();
            for r in 0..next.rows() {
                for (v, bb) in next.row_mut(r).iter_mut().zip(b) {
                    *v = layer.activation.apply(*v + bb);
                }
            }
            h = next;
        }
        Ok(h)
    }

    /// Put the parameters on the tape as leaves.
    pub fn register(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            weights: self.weights.iter().map(|w| tape.leaf(w.clone())).collect(),
            biases: self.biases.iter().map(|b| tape.leaf(b.clone())).collect(),
        }
    }

    /// Recorded forward pass using previously registered parameters.
    pub fn forward_tape(&self, tape: &mut Tape, vars: &MlpVars, input: Var) -> Result<Var> {
        self.check_input(tape.value(input))?;
        let mut h = input;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let lin = tape.matmul(h, vars.weights[i])?;
            let pre = tape.add_row(lin, vars.biases[i])?;
            h = match layer.activation {
                Activation::Elu => tape.elu(pre),
                Activation::Relu => tape.relu(pre),
                Activation::Identity => pre,
            };
        }
        Ok(h)
    }
}
