//! A small multi-type transformer policy over [`HetGraph`](crate::graph::HetGraph)s.
//!
//! Every ordered `(source type, destination type)` relation owns its own
//! query/key/value projections; a node attends only over its graph
//! neighbours, one softmax per relation, and the messages of all relations
//! are summed. Layers are pre-norm: `h += attn(ln1(h))`, `h += ffn(ln2(h))`
//! with a `d -> 2d -> d` GELU feed-forward. A linear head scores the action
//! nodes and masked actions get a `-inf` logit.
//!
//! Parameters live in one flat buffer whose layout is a pure function of the
//! config. Values are kept exactly representable as `f32` so checkpoints
//! round-trip, while all arithmetic runs in `f64`.

mod checkpoint;
mod decode;
mod net;
mod train;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use decode::{decode_greedy, masked_softmax};
pub use net::Tape;
pub use train::{cross_entropy, jsp_demos, kp_demos, train_imitation, Demo, StepSchedule, TrainOptions, TrainReport};

use crate::error::{Error, Result};
use crate::graph::NodeType;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MttConfig {
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub node_types: Vec<NodeType>,
    /// Attention types as ordered `(source, destination)` pairs.
    pub relations: Vec<(NodeType, NodeType)>,
    pub seed: u64,
}

impl MttConfig {
    fn with_types(node_types: Vec<NodeType>, relations: Vec<(NodeType, NodeType)>, seed: u64) -> Self {
        Self {
            embed_dim: 32,
            n_layers: 2,
            n_heads: 4,
            node_types,
            relations,
            seed,
        }
    }

    pub fn knapsack(seed: u64) -> Self {
        use NodeType::*;
        Self::with_types(vec![Item, Capacity], vec![(Item, Capacity), (Capacity, Item)], seed)
    }

    pub fn job_shop(seed: u64) -> Self {
        use NodeType::*;
        Self::with_types(
            vec![Operation, Machine],
            vec![(Operation, Operation), (Operation, Machine), (Machine, Operation)],
            seed,
        )
    }

    /// Both problem families on one backbone.
    pub fn unified(seed: u64) -> Self {
        let (kp, jsp) = (Self::knapsack(seed), Self::job_shop(seed));
        Self::with_types(
            [kp.node_types, jsp.node_types].concat(),
            [kp.relations, jsp.relations].concat(),
            seed,
        )
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.n_heads == 0 || self.embed_dim % self.n_heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "embed_dim {} must be a positive multiple of n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        for (i, t) in self.node_types.iter().enumerate() {
            if self.node_types[..i].contains(t) {
                return Err(Error::InvalidArgument(format!("node type {} listed twice", t.name())));
            }
        }
        for (i, &(s, d)) in self.relations.iter().enumerate() {
            if !self.node_types.contains(&s) || !self.node_types.contains(&d) {
                return Err(Error::InvalidArgument(format!(
                    "relation {}->{} uses an unlisted node type",
                    s.name(),
                    d.name()
                )));
            }
            if self.relations[..i].contains(&(s, d)) {
                return Err(Error::InvalidArgument(format!(
                    "relation {}->{} listed twice",
                    s.name(),
                    d.name()
                )));
            }
        }
        Ok(())
    }
}

/// Named slice of the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EmbedSlots {
    pub weight: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AttnSlots {
    pub query: usize,
    pub key: usize,
    pub value: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerSlots {
    pub norm1_gain: usize,
    pub norm1_bias: usize,
    pub attn: Vec<AttnSlots>,
    pub norm2_gain: usize,
    pub norm2_bias: usize,
    pub ffn_w1: usize,
    pub ffn_b1: usize,
    pub ffn_w2: usize,
    pub ffn_b2: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub tensors: Vec<TensorSpec>,
    pub embed: Vec<EmbedSlots>,
    pub layers: Vec<LayerSlots>,
    pub head_weight: usize,
    pub head_bias: usize,
    pub total: usize,
}

impl Layout {
    fn build(cfg: &MttConfig) -> Self {
        let d = cfg.embed_dim;
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>| {
            let spec = TensorSpec { name, shape, offset: total };
            total += spec.len();
            let off = spec.offset;
            tensors.push(spec);
            off
        };
        let embed = cfg
            .node_types
            .iter()
            .map(|t| EmbedSlots {
                weight: add(format!("embed.{}.weight", t.name()), vec![d, t.feature_width()]),
                bias: add(format!("embed.{}.bias", t.name()), vec![d]),
            })
            .collect();
        let layers = (0..cfg.n_layers)
            .map(|l| {
                let norm1_gain = add(format!("layer{l}.norm1.gain"), vec![d]);
                let norm1_bias = add(format!("layer{l}.norm1.bias"), vec![d]);
                let attn = cfg
                    .relations
                    .iter()
                    .map(|(s, t)| {
                        let p = format!("layer{l}.attn.{}->{}", s.name(), t.name());
                        AttnSlots {
                            query: add(format!("{p}.query"), vec![d, d]),
                            key: add(format!("{p}.key"), vec![d, d]),
                            value: add(format!("{p}.value"), vec![d, d]),
                        }
                    })
                    .collect();
                LayerSlots {
                    norm1_gain,
                    norm1_bias,
                    attn,
                    norm2_gain: add(format!("layer{l}.norm2.gain"), vec![d]),
                    norm2_bias: add(format!("layer{l}.norm2.bias"), vec![d]),
                    ffn_w1: add(format!("layer{l}.ffn.w1"), vec![2 * d, d]),
                    ffn_b1: add(format!("layer{l}.ffn.b1"), vec![2 * d]),
                    ffn_w2: add(format!("layer{l}.ffn.w2"), vec![d, 2 * d]),
                    ffn_b2: add(format!("layer{l}.ffn.b2"), vec![d]),
                }
            })
            .collect();
        let head_weight = add("head.weight".into(), vec![d]);
        let head_bias = add("head.bias".into(), vec![1]);
        Self {
            tensors,
            embed,
            layers,
            head_weight,
            head_bias,
            total,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MttModel {
    config: MttConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl PartialEq for MttModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

/// Builds a model with weights uniform in `[-1/sqrt(d), 1/sqrt(d)]` drawn in
/// layout order from the config seed. Layer-norm gains start at one and
/// their biases at zero.
pub fn init_model(config: MttConfig) -> Result<MttModel> {
    config.validate()?;
    let layout = Layout::build(&config);
    let bound = 1.0 / (config.embed_dim as f64).sqrt();
    let mut rng = SplitMix64::new(config.seed);
    let mut params = vec![0.0; layout.total];
    for spec in &layout.tensors {
        let is_norm = spec.name.contains(".norm");
        for p in &mut params[spec.range()] {
            *p = if is_norm {
                if spec.name.ends_with(".gain") { 1.0 } else { 0.0 }
            } else {
                f64::from(rng.symmetric(bound) as f32)
            };
        }
    }
    Ok(MttModel {
        config,
        layout,
        params,
    })
}

impl MttModel {
    pub fn config(&self) -> &MttConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.layout.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.layout.tensors.iter().find(|t| t.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access for tests and gradient checks. Callers that intend to
    /// checkpoint should keep values `f32`-representable.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn tensor_values(&self, name: &str) -> Option<&[f64]> {
        self.tensor(name).map(|t| &self.params[t.range()])
    }

    pub(crate) fn from_parts(config: MttConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::build(&config);
        if params.len() != layout.total {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub(crate) fn type_index(&self, t: NodeType) -> Option<usize> {
        self.config.node_types.iter().position(|&x| x == t)
    }

    pub(crate) fn relation_index(&self, src: NodeType, dst: NodeType) -> Option<usize> {
        self.config.relations.iter().position(|&r| r == (src, dst))
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One update; results are rounded to `f32` precision.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], step_size: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let update = step_size * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            *p = f64::from((*p - update) as f32);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_parameters() {
        let a = init_model(MttConfig::knapsack(9)).unwrap();
        let b = init_model(MttConfig::knapsack(9)).unwrap();
        assert_eq!(a.params(), b.params());
        let c = init_model(MttConfig::knapsack(10)).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn head_width() {
        assert_eq!(MttConfig::knapsack(0).head_dim(), 8);
    }

    #[test]
    fn heads_must_divide_width() {
        let mut cfg = MttConfig::knapsack(0);
        cfg.n_heads = 5;
        assert!(matches!(init_model(cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn parameter_count_is_a_function_of_config() {
        let m = init_model(MttConfig::knapsack(1)).unwrap();
        let d = 32;
        let embed = (d * 2 + d) + (d + d);
        let per_layer = 4 * d + 2 * 3 * d * d + (2 * d * d + 2 * d) + (2 * d * d + d);
        assert_eq!(m.param_count(), embed + 2 * per_layer + d + 1);
        let bound = 1.0 / (d as f64).sqrt();
        assert!(m.params().iter().all(|p| p.is_finite() && p.abs() <= 1.0));
        let w = m.tensor_values("layer0.ffn.w1").unwrap();
        assert!(w.iter().all(|p| p.abs() <= bound));
        assert!(m.params().iter().all(|&p| f64::from(p as f32) == p));
    }

    #[test]
    fn zero_step_size_leaves_parameters() {
        let mut m = init_model(MttConfig::knapsack(1)).unwrap();
        let before = m.params().to_vec();
        let grads = vec![0.5; m.param_count()];
        let mut opt = Adam::new(m.param_count());
        opt.step(m.params_mut(), &grads, 0.0);
        assert_eq!(m.params(), &before[..]);
    }
}
