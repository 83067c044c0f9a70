use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, BoundMlp, Mlp, MlpSpec, Module, NeuralError, LEAKY_SLOPE};
use crate::autodiff::{Graph, Tensor, Var};

/// Two-branch layout shared by generator and critic: an embedding of the
/// `(s, a)` encoding, concatenated with a second input (noise for the
/// generator, a sample for the critic) and passed through a trunk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Width of the state-action encoding.
    pub cond_dim: usize,
    pub embed_widths: Vec<usize>,
    /// Hidden trunk widths; the linear output layer of width
    /// `output_dim` is appended.
    pub trunk_widths: Vec<usize>,
    pub noise_dim: usize,
    pub output_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticSpec {
    pub cond_dim: usize,
    pub embed_widths: Vec<usize>,
    pub trunk_widths: Vec<usize>,
    /// Dimension of the samples being scored.
    pub sample_dim: usize,
}

fn branch_specs(
    cond_dim: usize,
    embed_widths: &[usize],
    side_dim: usize,
    trunk_widths: &[usize],
    output_dim: usize,
) -> (MlpSpec, MlpSpec) {
    let leaky = Activation::LeakyRelu(LEAKY_SLOPE);
    let embed = MlpSpec {
        input_dim: cond_dim,
        layer_widths: embed_widths.to_vec(),
        activation: leaky,
        output_activation: leaky,
    };
    let mut widths = trunk_widths.to_vec();
    widths.push(output_dim);
    let trunk = MlpSpec {
        input_dim: embed_widths.last().copied().unwrap_or(0) + side_dim,
        layer_widths: widths,
        activation: leaky,
        output_activation: Activation::Linear,
    };
    (embed, trunk)
}

/// `G(z | s, a)` producing samples in `R^output_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet {
    spec: GeneratorSpec,
    embed: Mlp,
    trunk: Mlp,
}

impl GeneratorNet {
    pub fn new(spec: GeneratorSpec, seed: u64) -> Result<Self, NeuralError> {
        if spec.noise_dim == 0 || spec.output_dim == 0 {
            return Err(NeuralError::InvalidSpec(
                "noise and output dimensions must be positive".into(),
            ));
        }
        let (e, t) = branch_specs(
            spec.cond_dim,
            &spec.embed_widths,
            spec.noise_dim,
            &spec.trunk_widths,
            spec.output_dim,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(GeneratorNet {
            embed: Mlp::new(e, &mut rng)?,
            trunk: Mlp::new(t, &mut rng)?,
            spec,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn noise_dim(&self) -> usize {
        self.spec.noise_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    pub fn cond_dim(&self) -> usize {
        self.spec.cond_dim
    }

    pub fn bind<'g>(&self, graph: &'g Graph, trainable: bool) -> BoundGenerator<'g> {
        BoundGenerator {
            embed: self.embed.bind(graph, trainable),
            trunk: self.trunk.bind(graph, trainable),
        }
    }

    /// Samples for a batch of encodings and noise rows, as plain tensors.
    pub fn sample(&self, cond: &Tensor, noise: &Tensor) -> Result<Tensor, NeuralError> {
        let g = Graph::new();
        let out = self
            .bind(&g, false)
            .forward_cond(g.constant(cond.clone()), g.constant(noise.clone()))?;
        Ok(out.value())
    }
}

impl Module for GeneratorNet {
    fn parameters(&self) -> Vec<&Tensor> {
        let mut p = self.embed.parameters();
        p.extend(self.trunk.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.embed.parameters_mut();
        p.extend(self.trunk.parameters_mut());
        p
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .embed
            .parameter_names()
            .into_iter()
            .map(|n| format!("embed.{n}"))
            .collect();
        names.extend(self.trunk.parameter_names().into_iter().map(|n| format!("trunk.{n}")));
        names
    }
}

#[derive(Clone, Debug)]
pub struct BoundGenerator<'g> {
    embed: BoundMlp<'g>,
    trunk: BoundMlp<'g>,
}

impl<'g> BoundGenerator<'g> {
    /// `G(z | s, a)` with separate state and action encodings.
    pub fn forward(&self, s_enc: Var<'g>, a_enc: Var<'g>, z: Var<'g>) -> Result<Var<'g>, NeuralError> {
        let cond = s_enc.graph().concat(&[s_enc, a_enc])?;
        self.forward_cond(cond, z)
    }

    /// `G(z | cond)` for a batch: row `i` depends only on row `i` of both
    /// inputs.
    pub fn forward_cond(&self, cond: Var<'g>, z: Var<'g>) -> Result<Var<'g>, NeuralError> {
        let e = self.embed.forward(cond)?;
        let h = cond.graph().concat(&[e, z])?;
        self.trunk.forward(h)
    }

    pub fn params(&self) -> Vec<Var<'g>> {
        let mut p = self.embed.params();
        p.extend(self.trunk.params());
        p
    }

    pub fn detached(&self) -> BoundGenerator<'g> {
        BoundGenerator {
            embed: self.embed.detached(),
            trunk: self.trunk.detached(),
        }
    }
}

/// `f(x | s, a)` scoring samples with a single real number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    spec: CriticSpec,
    embed: Mlp,
    trunk: Mlp,
}

impl CriticNet {
    pub fn new(spec: CriticSpec, seed: u64) -> Result<Self, NeuralError> {
        if spec.sample_dim == 0 {
            return Err(NeuralError::InvalidSpec("sample dimension must be positive".into()));
        }
        let (e, t) = branch_specs(
            spec.cond_dim,
            &spec.embed_widths,
            spec.sample_dim,
            &spec.trunk_widths,
            1,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(CriticNet {
            embed: Mlp::new(e, &mut rng)?,
            trunk: Mlp::new(t, &mut rng)?,
            spec,
        })
    }

    pub fn spec(&self) -> &CriticSpec {
        &self.spec
    }

    pub fn sample_dim(&self) -> usize {
        self.spec.sample_dim
    }

    pub fn bind<'g>(&self, graph: &'g Graph, trainable: bool) -> BoundCritic<'g> {
        BoundCritic {
            embed: self.embed.bind(graph, trainable),
            trunk: self.trunk.bind(graph, trainable),
        }
    }
}

impl Module for CriticNet {
    fn parameters(&self) -> Vec<&Tensor> {
        let mut p = self.embed.parameters();
        p.extend(self.trunk.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.embed.parameters_mut();
        p.extend(self.trunk.parameters_mut());
        p
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .embed
            .parameter_names()
            .into_iter()
            .map(|n| format!("embed.{n}"))
            .collect();
        names.extend(self.trunk.parameter_names().into_iter().map(|n| format!("trunk.{n}")));
        names
    }
}

#[derive(Clone, Debug)]
pub struct BoundCritic<'g> {
    embed: BoundMlp<'g>,
    trunk: BoundMlp<'g>,
}

impl<'g> BoundCritic<'g> {
    pub fn forward(&self, s_enc: Var<'g>, a_enc: Var<'g>, x: Var<'g>) -> Result<Var<'g>, NeuralError> {
        let cond = s_enc.graph().concat(&[s_enc, a_enc])?;
        self.forward_cond(cond, x)
    }

    /// Scores, `batch x 1`.
    pub fn forward_cond(&self, cond: Var<'g>, x: Var<'g>) -> Result<Var<'g>, NeuralError> {
        let e = self.embed.forward(cond)?;
        let h = cond.graph().concat(&[e, x])?;
        self.trunk.forward(h)
    }

    pub fn params(&self) -> Vec<Var<'g>> {
        let mut p = self.embed.params();
        p.extend(self.trunk.params());
        p
    }

    pub fn detached(&self) -> BoundCritic<'g> {
        BoundCritic {
            embed: self.embed.detached(),
            trunk: self.trunk.detached(),
        }
    }
}
