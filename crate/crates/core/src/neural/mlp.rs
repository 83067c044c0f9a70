use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Module, NeuralError};
use crate::autodiff::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu(f64),
    Relu,
    Linear,
}

impl Activation {
    pub fn apply<'g>(&self, x: Var<'g>) -> Var<'g> {
        match *self {
            Activation::LeakyRelu(slope) => x.leaky_relu(slope),
            Activation::Relu => x.relu(),
            Activation::Linear => x,
        }
    }
}

/// A stack of fully connected layers. `layer_widths` lists each layer's
/// output width; the activation of the last layer is `output_activation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.layer_widths.is_empty() {
            return Err(NeuralError::InvalidSpec("an MLP needs at least one layer".into()));
        }
        if self.input_dim == 0 || self.layer_widths.contains(&0) {
            return Err(NeuralError::InvalidSpec(format!(
                "widths must be positive: input {} layers {:?}",
                self.input_dim, self.layer_widths
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap_or(&0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `fan_in x fan_out`
    pub weight: Tensor,
    /// `1 x fan_out`
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Linear>,
}

impl Mlp {
    /// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut fan_in = spec.input_dim;
        let mut layers = Vec::with_capacity(spec.layer_widths.len());
        for &width in &spec.layer_widths {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..fan_in * width)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            layers.push(Linear {
                weight: Tensor::new(fan_in, width, data)?,
                bias: Tensor::zeros(1, width),
            });
            fan_in = width;
        }
        Ok(Mlp { spec, layers })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut fan_in = spec.input_dim;
        let layers = spec
            .layer_widths
            .iter()
            .map(|&w| {
                let l = Linear {
                    weight: Tensor::zeros(fan_in, w),
                    bias: Tensor::zeros(1, w),
                };
                fan_in = w;
                l
            })
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Places the weights on `graph`, as gradient-receiving leaves when
    /// `trainable`, as constants otherwise.
    pub fn bind<'g>(&self, graph: &'g Graph, trainable: bool) -> BoundMlp<'g> {
        let lift = |t: &Tensor| {
            if trainable {
                graph.param(t.clone())
            } else {
                graph.constant(t.clone())
            }
        };
        BoundMlp {
            layers: self
                .layers
                .iter()
                .map(|l| (lift(&l.weight), lift(&l.bias)))
                .collect(),
            activation: self.spec.activation,
            output_activation: self.spec.output_activation,
            input_dim: self.spec.input_dim,
        }
    }

    /// Forward pass on plain tensors.
    pub fn eval(&self, input: &Tensor) -> Result<Tensor, NeuralError> {
        let g = Graph::new();
        let out = self.bind(&g, false).forward(g.constant(input.clone()))?;
        Ok(out.value())
    }
}

impl Module for Mlp {
    fn parameters(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    fn parameter_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{i}.weight"), format!("{i}.bias")])
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct BoundMlp<'g> {
    layers: Vec<(Var<'g>, Var<'g>)>,
    activation: Activation,
    output_activation: Activation,
    input_dim: usize,
}

impl<'g> BoundMlp<'g> {
    pub fn forward(&self, input: Var<'g>) -> Result<Var<'g>, NeuralError> {
        let width = input.shape().cols;
        if width != self.input_dim {
            return Err(NeuralError::InputWidth {
                expected: self.input_dim,
                got: width,
            });
        }
        let last = self.layers.len() - 1;
        let mut h = input;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            h = h.matmul(*w)?.add_row(*b)?;
            h = if i == last {
                self.output_activation.apply(h)
            } else {
                self.activation.apply(h)
            };
        }
        Ok(h)
    }

    /// Weight and bias nodes in [`Module::parameters`] order.
    pub fn params(&self) -> Vec<Var<'g>> {
        self.layers.iter().flat_map(|(w, b)| [*w, *b]).collect()
    }

    /// The same weights as constants.
    pub fn detached(&self) -> BoundMlp<'g> {
        BoundMlp {
            layers: self
                .layers
                .iter()
                .map(|(w, b)| (w.detach(), b.detach()))
                .collect(),
            ..self.clone()
        }
    }
}
