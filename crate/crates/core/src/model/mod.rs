//! The dual-branch network.
//!
//! ```text
//! features (B×F) ─► branch A: F→256→256→256 ─┐
//!                                            ├─► concat (B×320) ─► head: 320→512→128→32→1
//! ids (B) ─► embed (B×d) ─► branch B: d→64→64→64 ┘
//! ```
//!
//! Every linear layer except the last head layer is followed by swish. The
//! concatenation itself is not activated.

mod io;

pub use io::{from_bytes, inspect, load, save, to_bytes, ModelFileInfo, FORMAT_VERSION, MAGIC};

use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::layers::{
    concat_cols, embedding_backward, embedding_lookup, linear_backward, linear_forward, split_cols,
    swish, swish_backward, EmbeddingTable, LinearGrads, LinearParams,
};
use crate::rng::{seeded_uniform, RngState};
use crate::tensor::{Matrix, Real};

pub const DEFAULT_BRANCH_A: [usize; 3] = [256, 256, 256];
pub const DEFAULT_BRANCH_B: [usize; 3] = [64, 64, 64];
pub const DEFAULT_HEAD: [usize; 4] = [512, 128, 32, 1];
/// Target one-hot-to-embedding compression ratio.
pub const MIN_COMPRESSION_RATIO: f64 = 20.0;
/// Embedding rows are initialized uniform on `[-EMBED_INIT, EMBED_INIT)`.
pub const EMBED_INIT: f64 = 0.05;

/// Embedding width for a vocabulary of `vocab_size` rows (OOV row included):
/// `min(64, max(4, floor((V - 1) / 20)))`.
pub fn default_embed_dim(vocab_size: usize) -> usize {
    (vocab_size.saturating_sub(1) / 20).clamp(4, 64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub feature_count: usize,
    /// Embedding rows, including the reserved out-of-vocabulary row 0.
    pub id_vocab: usize,
    pub embed_dim: usize,
    pub branch_a_widths: Vec<usize>,
    pub branch_b_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
    /// `false` drops the embedding and branch B (dense-only ablation).
    pub id_branch: bool,
}

impl ModelConfig {
    /// Default widths and embedding rule for the given input sizes.
    pub fn new(feature_count: usize, id_vocab: usize) -> Self {
        Self {
            feature_count,
            id_vocab,
            embed_dim: default_embed_dim(id_vocab),
            branch_a_widths: DEFAULT_BRANCH_A.to_vec(),
            branch_b_widths: DEFAULT_BRANCH_B.to_vec(),
            head_widths: DEFAULT_HEAD.to_vec(),
            id_branch: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.feature_count == 0 {
            return bad("feature_count must be at least 1".into());
        }
        for (name, widths) in [
            ("branch_a_widths", &self.branch_a_widths),
            ("head_widths", &self.head_widths),
        ]
        .into_iter()
        .chain(
            self.id_branch
                .then_some(("branch_b_widths", &self.branch_b_widths)),
        ) {
            if widths.is_empty() {
                return bad(format!("{name} must name at least one layer"));
            }
            if widths.contains(&0) {
                return bad(format!("{name} contains a zero width: {widths:?}"));
            }
        }
        if self.head_widths.last() != Some(&1) {
            return bad(format!(
                "last head width must be 1, got {:?}",
                self.head_widths
            ));
        }
        if self.id_branch {
            if self.id_vocab < 2 {
                return bad(format!(
                    "id_vocab must be at least 2 (row 0 is out-of-vocabulary), got {}",
                    self.id_vocab
                ));
            }
            if self.embed_dim == 0 {
                return bad("embed_dim must be at least 1".into());
            }
        }
        Ok(())
    }

    /// `(V - 1) / d`.
    pub fn compression_ratio(&self) -> f64 {
        self.id_vocab.saturating_sub(1) as f64 / self.embed_dim.max(1) as f64
    }

    /// True when the vocabulary is large enough to expect the target ratio
    /// but the configured width misses it.
    pub fn compression_below_target(&self) -> bool {
        self.id_branch
            && self.id_vocab.saturating_sub(1) >= 160
            && self.compression_ratio() < MIN_COMPRESSION_RATIO
    }

    fn branch_a_out(&self) -> usize {
        *self.branch_a_widths.last().unwrap_or(&0)
    }

    fn branch_b_out(&self) -> usize {
        if self.id_branch {
            *self.branch_b_widths.last().unwrap_or(&0)
        } else {
            0
        }
    }

    pub fn head_input_width(&self) -> usize {
        self.branch_a_out() + self.branch_b_out()
    }

    /// Shapes of every parameter tensor in serialization order.
    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let mut shapes = Vec::new();
        if self.id_branch {
            shapes.push(ParamShape {
                name: "embedding".into(),
                fan_in: self.id_vocab,
                fan_out: self.embed_dim,
                has_bias: false,
            });
        }
        let mut push_mlp = |prefix: &str, input: usize, widths: &[usize]| {
            let mut fan_in = input;
            for (i, &w) in widths.iter().enumerate() {
                shapes.push(ParamShape {
                    name: format!("{prefix}.{i}"),
                    fan_in,
                    fan_out: w,
                    has_bias: true,
                });
                fan_in = w;
            }
        };
        push_mlp("branch_a", self.feature_count, &self.branch_a_widths);
        if self.id_branch {
            push_mlp("branch_b", self.embed_dim, &self.branch_b_widths);
        }
        push_mlp("head", self.head_input_width(), &self.head_widths);
        shapes
    }
}

/// One learnable tensor group: a linear layer (weight plus bias) or the
/// embedding table (no bias).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShape {
    pub name: String,
    pub fan_in: usize,
    pub fan_out: usize,
    pub has_bias: bool,
}

impl ParamShape {
    pub fn count(&self) -> usize {
        self.fan_in * self.fan_out + if self.has_bias { self.fan_out } else { 0 }
    }
}

/// Total learnable scalars: `Σ(in·out + out)` over linear layers plus `V·d`.
pub fn param_count(config: &ModelConfig) -> usize {
    config.param_shapes().iter().map(ParamShape::count).sum()
}

/// Human-readable per-layer table, one line per tensor group plus a total.
pub fn param_breakdown(config: &ModelConfig) -> String {
    let mut out = String::new();
    for s in config.param_shapes() {
        out.push_str(&format!(
            "{:<12} {:>6} -> {:<6} {:>10}\n",
            s.name,
            s.fan_in,
            s.fan_out,
            s.count()
        ));
    }
    out.push_str(&format!("{:<12} {:>28}\n", "total", param_count(config)));
    out
}

/// Feature column names and id vocabulary the network was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSchema {
    pub feature_names: Vec<String>,
    pub vocab: Vocab,
}

/// A stack of linear layers with swish after each one (optionally excluding
/// the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T = f32> {
    pub layers: Vec<LinearParams<T>>,
    pub activate_last: bool,
}

#[derive(Debug, Clone)]
pub struct MlpCache<T = f32> {
    inputs: Vec<Matrix<T>>,
    pre: Vec<Matrix<T>>,
}

impl<T: Real> Mlp<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn init(
        fan_in: usize,
        widths: &[usize],
        activate_last: bool,
        rng: &mut RngState,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = fan_in;
        for &w in widths {
            layers.push(glorot_linear(prev, w, rng)?);
            prev = w;
        }
        Ok(Self {
            layers,
            activate_last,
        })
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, LinearParams::fan_out)
    }

    fn activated(&self, i: usize) -> bool {
        i + 1 < self.layers.len() || self.activate_last
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, MlpCache<T>)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = linear_forward(&h, layer)?;
            let next = if self.activated(i) {
                swish(&z)
            } else {
                z.clone()
            };
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok((h, MlpCache { inputs, pre }))
    }

    /// Returns the gradient with respect to the input (when `need_input_grad`)
    /// and per-layer gradients in forward order.
    pub fn backward(
        &self,
        cache: &MlpCache<T>,
        d_out: &Matrix<T>,
        need_input_grad: bool,
    ) -> Result<MlpGrads<T>> {
        if cache.pre.len() != self.layers.len() {
            return Err(Error::Usage(format!(
                "cache holds {} layers, network has {}",
                cache.pre.len(),
                self.layers.len()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = d_out.clone();
        for i in (0..self.layers.len()).rev() {
            let d_pre = if self.activated(i) {
                swish_backward(&cache.pre[i], &d)?
            } else {
                d
            };
            let (d_in, g) = linear_backward(&cache.inputs[i], &self.layers[i], &d_pre)?;
            grads.push(g);
            d = d_in;
            if i == 0 && !need_input_grad {
                grads.reverse();
                return Ok((None, grads));
            }
        }
        grads.reverse();
        Ok((Some(d), grads))
    }
}

fn glorot_linear<T: Real>(
    fan_in: usize,
    fan_out: usize,
    rng: &mut RngState,
) -> Result<LinearParams<T>> {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let weight = seeded_uniform(rng, -s, s, fan_in, fan_out)?;
    LinearParams::new(weight, vec![T::zero(); fan_out])
}

/// Input gradient (when requested) and per-layer gradients.
pub type MlpGrads<T> = (Option<Matrix<T>>, Vec<LinearGrads<T>>);

/// Which part of the network a parameter tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Embedding,
    BranchA,
    BranchB,
    Head,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualBranchNet<T = f32> {
    config: ModelConfig,
    pub(crate) embedding: Option<EmbeddingTable<T>>,
    pub(crate) branch_a: Mlp<T>,
    pub(crate) branch_b: Option<Mlp<T>>,
    pub(crate) head: Mlp<T>,
    schema: Option<InputSchema>,
    /// Bumped on every mutable parameter access; ties caches to weights.
    revision: u64,
}

/// Activations retained by [`DualBranchNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f32> {
    revision: u64,
    batch: usize,
    ids: Vec<usize>,
    branch_a: MlpCache<T>,
    branch_b: Option<MlpCache<T>>,
    head: MlpCache<T>,
}

impl<T> ForwardCache<T> {
    pub fn batch_size(&self) -> usize {
        self.batch
    }
}

/// One gradient per parameter tensor, mirroring [`DualBranchNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T = f32> {
    pub embedding: Option<Matrix<T>>,
    pub branch_a: Vec<LinearGrads<T>>,
    pub branch_b: Vec<LinearGrads<T>>,
    pub head: Vec<LinearGrads<T>>,
}

impl<T: Real> GradientSet<T> {
    /// Flat views in the same order as [`DualBranchNet::param_tensors`].
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        if let Some(e) = &self.embedding {
            out.push(e.data());
        }
        for g in self.branch_a.iter().chain(&self.branch_b).chain(&self.head) {
            out.push(g.weight.data());
            out.push(&g.bias);
        }
        out
    }
}

impl<T: Real> DualBranchNet<T> {
    /// Initializes a network. Embedding, branch A, branch B and head draw
    /// from `rng` in that order.
    pub fn build(config: ModelConfig, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        if config.compression_below_target() {
            log::warn!(
                "embedding compression ratio {:.2} is below {MIN_COMPRESSION_RATIO} for {} ids",
                config.compression_ratio(),
                config.id_vocab - 1
            );
        }
        let embedding = if config.id_branch {
            Some(EmbeddingTable::new(seeded_uniform(
                rng,
                -EMBED_INIT,
                EMBED_INIT,
                config.id_vocab,
                config.embed_dim,
            )?)?)
        } else {
            None
        };
        let branch_a = Mlp::init(config.feature_count, &config.branch_a_widths, true, rng)?;
        let branch_b = if config.id_branch {
            Some(Mlp::init(
                config.embed_dim,
                &config.branch_b_widths,
                true,
                rng,
            )?)
        } else {
            None
        };
        let head = Mlp::init(config.head_input_width(), &config.head_widths, false, rng)?;
        Ok(Self {
            config,
            embedding,
            branch_a,
            branch_b,
            head,
            schema: None,
            revision: 0,
        })
    }

    /// Assembles a network from explicit parts. Shapes must chain.
    pub fn from_parts(
        config: ModelConfig,
        embedding: Option<EmbeddingTable<T>>,
        branch_a: Mlp<T>,
        branch_b: Option<Mlp<T>>,
        head: Mlp<T>,
    ) -> Result<Self> {
        config.validate()?;
        let net = Self {
            config,
            embedding,
            branch_a,
            branch_b,
            head,
            schema: None,
            revision: 0,
        };
        let expected = net.config.param_shapes();
        let actual = net.param_shapes_actual();
        if expected != actual {
            return Err(Error::Config(format!(
                "parts do not match configuration: expected {expected:?}, got {actual:?}"
            )));
        }
        Ok(net)
    }

    fn param_shapes_actual(&self) -> Vec<ParamShape> {
        let mut shapes = Vec::new();
        if let Some(e) = &self.embedding {
            shapes.push(ParamShape {
                name: "embedding".into(),
                fan_in: e.vocab_size(),
                fan_out: e.dim(),
                has_bias: false,
            });
        }
        let mut push = |prefix: &str, mlp: &Mlp<T>| {
            for (i, l) in mlp.layers.iter().enumerate() {
                shapes.push(ParamShape {
                    name: format!("{prefix}.{i}"),
                    fan_in: l.fan_in(),
                    fan_out: l.fan_out(),
                    has_bias: true,
                });
            }
        };
        push("branch_a", &self.branch_a);
        if let Some(b) = &self.branch_b {
            push("branch_b", b);
        }
        push("head", &self.head);
        shapes
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn schema(&self) -> Option<&InputSchema> {
        self.schema.as_ref()
    }

    pub fn set_schema(&mut self, schema: InputSchema) -> Result<()> {
        if schema.feature_names.len() != self.config.feature_count {
            return Err(Error::Config(format!(
                "schema lists {} features, network expects {}",
                schema.feature_names.len(),
                self.config.feature_count
            )));
        }
        if self.config.id_branch && schema.vocab.len() != self.config.id_vocab {
            return Err(Error::Config(format!(
                "vocabulary has {} entries, embedding has {} rows",
                schema.vocab.len(),
                self.config.id_vocab
            )));
        }
        self.schema = Some(schema);
        Ok(())
    }

    pub fn embedding(&self) -> Option<&EmbeddingTable<T>> {
        self.embedding.as_ref()
    }

    pub fn branch_a(&self) -> &Mlp<T> {
        &self.branch_a
    }

    pub fn branch_b(&self) -> Option<&Mlp<T>> {
        self.branch_b.as_ref()
    }

    pub fn head(&self) -> &Mlp<T> {
        &self.head
    }

    pub fn param_count(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat views of every parameter tensor in serialization order:
    /// embedding, branch A (weight, bias per layer), branch B, head.
    pub fn param_tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        if let Some(e) = &self.embedding {
            out.push(e.table.data());
        }
        let b_layers = self.branch_b.iter().flat_map(|b| &b.layers);
        for l in self
            .branch_a
            .layers
            .iter()
            .chain(b_layers)
            .chain(&self.head.layers)
        {
            out.push(l.weight.data());
            out.push(&l.bias);
        }
        out
    }

    /// Mutable counterpart of [`param_tensors`](Self::param_tensors).
    /// Invalidates outstanding forward caches.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.revision += 1;
        let mut out: Vec<&mut [T]> = Vec::new();
        if let Some(e) = &mut self.embedding {
            out.push(e.table.data_mut());
        }
        let b_layers = self.branch_b.iter_mut().flat_map(|b| &mut b.layers);
        for l in self
            .branch_a
            .layers
            .iter_mut()
            .chain(b_layers)
            .chain(&mut self.head.layers)
        {
            out.push(l.weight.data_mut());
            out.push(&mut l.bias);
        }
        out
    }

    /// Group of each tensor returned by [`param_tensors`](Self::param_tensors).
    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut out = Vec::new();
        if self.embedding.is_some() {
            out.push(ParamGroup::Embedding);
        }
        out.extend(std::iter::repeat_n(
            ParamGroup::BranchA,
            2 * self.branch_a.layers.len(),
        ));
        if let Some(b) = &self.branch_b {
            out.extend(std::iter::repeat_n(ParamGroup::BranchB, 2 * b.layers.len()));
        }
        out.extend(std::iter::repeat_n(
            ParamGroup::Head,
            2 * self.head.layers.len(),
        ));
        out
    }

    /// Replaces branch A with pre-trained weights of the same shape.
    pub fn set_branch_a(&mut self, branch: Mlp<T>) -> Result<()> {
        check_same_shapes(&self.branch_a, &branch)?;
        self.revision += 1;
        self.branch_a = branch;
        Ok(())
    }

    /// Replaces the embedding table and branch B with pre-trained weights.
    pub fn set_id_branch(&mut self, embedding: EmbeddingTable<T>, branch: Mlp<T>) -> Result<()> {
        let (Some(cur_e), Some(cur_b)) = (&self.embedding, &self.branch_b) else {
            return Err(Error::Config("network has no id branch".into()));
        };
        if cur_e.table.shape() != embedding.table.shape() {
            return Err(Error::shape(
                "set_id_branch",
                cur_e.table.shape_str(),
                embedding.table.shape_str(),
            ));
        }
        check_same_shapes(cur_b, &branch)?;
        self.revision += 1;
        self.embedding = Some(embedding);
        self.branch_b = Some(branch);
        Ok(())
    }

    fn check_inputs(&self, features: &Matrix<T>, ids: &[usize]) -> Result<()> {
        if features.cols() != self.config.feature_count {
            return Err(Error::shape(
                "DualBranchNet::forward",
                format!("features {}", features.shape_str()),
                format!("{} expected features", self.config.feature_count),
            ));
        }
        if ids.len() != features.rows() {
            return Err(Error::shape(
                "DualBranchNet::forward",
                format!("features {}", features.shape_str()),
                format!("{} ids", ids.len()),
            ));
        }
        Ok(())
    }

    pub fn forward(
        &self,
        features: &Matrix<T>,
        ids: &[usize],
    ) -> Result<(Matrix<T>, ForwardCache<T>)> {
        self.check_inputs(features, ids)?;
        let (a_out, a_cache) = self.branch_a.forward(features)?;
        let (joined, b_cache) = match (&self.embedding, &self.branch_b) {
            (Some(e), Some(b)) => {
                let emb = embedding_lookup(ids, e)?;
                let (b_out, b_cache) = b.forward(&emb)?;
                (concat_cols(&a_out, &b_out)?, Some(b_cache))
            }
            _ => (a_out, None),
        };
        let (pred, head_cache) = self.head.forward(&joined)?;
        Ok((
            pred,
            ForwardCache {
                revision: self.revision,
                batch: features.rows(),
                ids: ids.to_vec(),
                branch_a: a_cache,
                branch_b: b_cache,
                head: head_cache,
            },
        ))
    }

    /// Predictions only, one per row.
    pub fn predict(&self, features: &Matrix<T>, ids: &[usize]) -> Result<Vec<T>> {
        Ok(self.forward(features, ids)?.0.into_vec())
    }

    pub fn backward(&self, cache: &ForwardCache<T>, d_pred: &Matrix<T>) -> Result<GradientSet<T>> {
        if cache.revision != self.revision {
            return Err(Error::Usage(
                "forward cache is stale: parameters changed since the forward pass".into(),
            ));
        }
        if d_pred.shape() != (cache.batch, 1) {
            return Err(Error::shape(
                "DualBranchNet::backward",
                format!("cache for batch {}", cache.batch),
                format!("d_pred {}", d_pred.shape_str()),
            ));
        }
        if cache.branch_b.is_some() != self.branch_b.is_some() {
            return Err(Error::Usage(
                "forward cache does not match network layout".into(),
            ));
        }
        let (d_joined, head) = self.head.backward(&cache.head, d_pred, true)?;
        let d_joined = d_joined.expect("input gradient requested");
        let a_width = self.branch_a.output_width();
        let (d_a, d_b) = if self.branch_b.is_some() {
            let (l, r) = split_cols(&d_joined, a_width)?;
            (l, Some(r))
        } else {
            (d_joined, None)
        };
        let (_, branch_a) = self.branch_a.backward(&cache.branch_a, &d_a, false)?;
        let (embedding, branch_b) = match (&self.branch_b, &cache.branch_b, d_b, &self.embedding) {
            (Some(b), Some(bc), Some(d_b), Some(e)) => {
                let (d_emb, grads) = b.backward(bc, &d_b, true)?;
                let d_emb = d_emb.expect("input gradient requested");
                (
                    Some(embedding_backward(&cache.ids, &d_emb, e.vocab_size())?),
                    grads,
                )
            }
            _ => (None, Vec::new()),
        };
        Ok(GradientSet {
            embedding,
            branch_a,
            branch_b,
            head,
        })
    }
}

fn check_same_shapes<T: Real>(a: &Mlp<T>, b: &Mlp<T>) -> Result<()> {
    let shape = |m: &Mlp<T>| {
        m.layers
            .iter()
            .map(|l| (l.fan_in(), l.fan_out()))
            .collect::<Vec<_>>()
    };
    if shape(a) != shape(b) {
        return Err(Error::shape(
            "replace branch",
            format!("{:?}", shape(a)),
            format!("{:?}", shape(b)),
        ));
    }
    Ok(())
}
