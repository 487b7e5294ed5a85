use ndarray::Array2;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Message-passing depth. Fixed.
pub const MESSAGE_LAYERS: usize = 2;

/// Largest accepted input, hidden or classifier width.
pub const MAX_DIM: usize = 1 << 16;

/// Edge types seen by message passing. `SelfLoop` links every node to itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Fact,
    Synonym,
    SelfLoop,
}

pub const RELATIONS: [Relation; 3] = [Relation::Fact, Relation::Synonym, Relation::SelfLoop];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub classifier_dim: usize,
    pub message_layers: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 64,
            hidden_dim: 256,
            classifier_dim: 64,
            message_layers: MESSAGE_LAYERS,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.classifier_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.input_dim.max(self.hidden_dim).max(self.classifier_dim) > MAX_DIM {
            return Err(Error::Config(format!("model dimensions must be at most {MAX_DIM}")));
        }
        if self.message_layers != MESSAGE_LAYERS {
            return Err(Error::Config(format!(
                "model.message_layers must be {MESSAGE_LAYERS}, got {}",
                self.message_layers
            )));
        }
        Ok(())
    }

    /// `(rows, cols)` of every tensor, in [`TENSOR_NAMES`] order.
    pub fn tensor_shapes(&self) -> [(usize, usize); TENSOR_COUNT] {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.classifier_dim);
        [
            (d, h),
            (1, h),
            (h, h),
            (h, h),
            (h, h),
            (h, h),
            (h, h),
            (h, h),
            (2 * h, c),
            (1, c),
            (c, 1),
            (1, 1),
        ]
    }

    /// Fan-in used to scale the uniform initializer of each tensor.
    fn fan_ins(&self) -> [usize; TENSOR_COUNT] {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.classifier_dim);
        [d, d, h, h, h, h, h, h, 2 * h, 2 * h, c, c]
    }
}

pub const TENSOR_COUNT: usize = 12;

pub const TENSOR_NAMES: [&str; TENSOR_COUNT] = [
    "input_proj",
    "type_embedding",
    "message.0.fact",
    "message.0.synonym",
    "message.0.self_loop",
    "message.1.fact",
    "message.1.synonym",
    "message.1.self_loop",
    "hidden_weight",
    "hidden_bias",
    "output_weight",
    "output_bias",
];

/// Every learned tensor. Also used as the gradient record.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `d x h` input projection.
    pub input_proj: Array2<f64>,
    /// `1 x h` embedding of the entity node type.
    pub type_embedding: Array2<f64>,
    /// `[layer][relation]`, each `h x h`.
    pub message: [[Array2<f64>; 3]; MESSAGE_LAYERS],
    pub hidden_weight: Array2<f64>,
    pub hidden_bias: Array2<f64>,
    pub output_weight: Array2<f64>,
    pub output_bias: Array2<f64>,
}

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let s = cfg.tensor_shapes();
        let z = |i: usize| Array2::zeros(s[i]);
        Params {
            input_proj: z(0),
            type_embedding: z(1),
            message: [[z(2), z(3), z(4)], [z(5), z(6), z(7)]],
            hidden_weight: z(8),
            hidden_bias: z(9),
            output_weight: z(10),
            output_bias: z(11),
        }
    }

    pub(crate) fn from_tensors(tensors: Vec<Array2<f64>>) -> Self {
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("tensor count checked by caller");
        Params {
            input_proj: next(),
            type_embedding: next(),
            message: [[next(), next(), next()], [next(), next(), next()]],
            hidden_weight: next(),
            hidden_bias: next(),
            output_weight: next(),
            output_bias: next(),
        }
    }

    pub fn tensors(&self) -> [&Array2<f64>; TENSOR_COUNT] {
        let [[m00, m01, m02], [m10, m11, m12]] = &self.message;
        [
            &self.input_proj,
            &self.type_embedding,
            m00,
            m01,
            m02,
            m10,
            m11,
            m12,
            &self.hidden_weight,
            &self.hidden_bias,
            &self.output_weight,
            &self.output_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; TENSOR_COUNT] {
        let Params {
            input_proj,
            type_embedding,
            message: [[m00, m01, m02], [m10, m11, m12]],
            hidden_weight,
            hidden_bias,
            output_weight,
            output_bias,
        } = self;
        [
            input_proj,
            type_embedding,
            m00,
            m01,
            m02,
            m10,
            m11,
            m12,
            hidden_weight,
            hidden_bias,
            output_weight,
            output_bias,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// The subgraph missingness scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessModel {
    pub config: ModelConfig,
    pub params: Params,
}

impl MissingnessModel {
    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, drawn from `rng`.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut params = Params::zeros(&config);
        for (t, fan_in) in params.tensors_mut().into_iter().zip(config.fan_ins()) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            t.iter_mut().for_each(|x| *x = dist.sample(rng));
        }
        Ok(MissingnessModel { config, params })
    }

    /// [`init`](Self::init) with a generator seeded from `config.seed`.
    pub fn from_seed(config: ModelConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::init(config, &mut rng)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }
}
