//! Staged training: optional per-branch pre-training with temporary linear
//! heads, then joint training of the full network.
//!
//! Random streams derived from the seed (see [`RngState::derive`]):
//! initialization uses stream 0, dense pre-training 1, id pre-training 2,
//! joint training 3. Temporary heads are drawn from streams 11 and 12. A
//! phase that does not run consumes nothing, so `pretrain_mode = none` is
//! exactly plain joint training.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::data::{batch_order, time_split, Batch, Dataset};
use crate::error::{Error, Result};
use crate::layers::{embedding_backward, embedding_lookup, EmbeddingTable, Loss};
use crate::metrics::{grouped_pearson, mse_metric, pearson, MetricReport};
use crate::model::{
    self, default_embed_dim, DualBranchNet, InputSchema, Mlp, ModelConfig, ParamGroup,
};
use crate::optim::{adam_step, AdamHyper, AdamState, WarmupSchedule};
use crate::rng::RngState;
use crate::tensor::Matrix;

const STREAM_INIT: u64 = 0;
const STREAM_PRETRAIN_DENSE: u64 = 1;
const STREAM_PRETRAIN_ID: u64 = 2;
const STREAM_JOINT: u64 = 3;
const STREAM_HEAD_DENSE: u64 = 11;
const STREAM_HEAD_ID: u64 = 12;

/// Rows per forward pass during evaluation.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PretrainMode {
    None,
    Dense,
    Id,
    Both,
}

impl FromStr for PretrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "dense" => Ok(Self::Dense),
            "id" => Ok(Self::Id),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!(
                "pretrain mode must be one of none, dense, id, both; got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Dense,
    Id,
}

impl BranchKind {
    fn phase(self) -> &'static str {
        match self {
            BranchKind::Dense => "pretrain_dense",
            BranchKind::Id => "pretrain_id",
        }
    }
}

pub const JOINT_PHASE: &str = "joint";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub total_epochs: usize,
    pub warmup_steps: u64,
    pub pretrain_mode: PretrainMode,
    /// Epochs for each pre-trained branch. Branches pre-train independently,
    /// so this counts once against `total_epochs`.
    pub pretrain_epochs: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub loss: Loss,
    pub adam: AdamHyper,
    /// `None` applies [`default_embed_dim`].
    pub embed_dim: Option<usize>,
    pub branch_a_widths: Vec<usize>,
    pub branch_b_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
    /// `false` trains the dense-only ablation.
    pub id_branch: bool,
    /// Keep pre-trained branches fixed during joint training.
    pub freeze_pretrained: bool,
    /// Also report the mean per-time-id Pearson coefficient.
    pub per_time_metrics: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: crate::optim::DEFAULT_LR,
            batch_size: 1024,
            total_epochs: 100,
            warmup_steps: crate::optim::DEFAULT_WARMUP_STEPS,
            pretrain_mode: PretrainMode::Both,
            pretrain_epochs: 20,
            val_fraction: 0.2,
            seed: 0,
            loss: Loss::Mse,
            adam: AdamHyper::default(),
            embed_dim: None,
            branch_a_widths: model::DEFAULT_BRANCH_A.to_vec(),
            branch_b_widths: model::DEFAULT_BRANCH_B.to_vec(),
            head_widths: model::DEFAULT_HEAD.to_vec(),
            id_branch: true,
            freeze_pretrained: false,
            per_time_metrics: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.pretrain_mode != PretrainMode::None && self.pretrain_epochs > self.total_epochs {
            return Err(Error::Config(format!(
                "pre-training epochs ({}) exceed the total budget ({})",
                self.pretrain_epochs, self.total_epochs
            )));
        }
        if self.pretrain_mode == PretrainMode::Id && !self.id_branch {
            return Err(Error::Config(
                "cannot pre-train the id branch of a dense-only model".into(),
            ));
        }
        self.schedule()?;
        Ok(())
    }

    fn schedule(&self) -> Result<WarmupSchedule> {
        WarmupSchedule::new(self.lr, self.warmup_steps)
    }

    fn pretrains(&self, kind: BranchKind) -> bool {
        match (self.pretrain_mode, kind) {
            (PretrainMode::Both, BranchKind::Dense) | (PretrainMode::Dense, BranchKind::Dense) => {
                true
            }
            (PretrainMode::Both, BranchKind::Id) | (PretrainMode::Id, BranchKind::Id) => {
                self.id_branch
            }
            _ => false,
        }
    }

    pub fn joint_epochs(&self) -> usize {
        match self.pretrain_mode {
            PretrainMode::None => self.total_epochs,
            _ => self.total_epochs - self.pretrain_epochs.min(self.total_epochs),
        }
    }

    fn effective_pretrain_epochs(&self) -> usize {
        match self.pretrain_mode {
            PretrainMode::None => 0,
            _ => self.pretrain_epochs,
        }
    }

    /// Network shape for a training set.
    pub fn model_config(&self, train: &Dataset) -> ModelConfig {
        let id_vocab = train.vocab().len();
        ModelConfig {
            feature_count: train.feature_count(),
            id_vocab,
            embed_dim: self
                .embed_dim
                .unwrap_or_else(|| default_embed_dim(id_vocab)),
            branch_a_widths: self.branch_a_widths.clone(),
            branch_b_widths: self.branch_b_widths.clone(),
            head_widths: self.head_widths.clone(),
            id_branch: self.id_branch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub phase: &'static str,
    /// 1-based within the phase.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_pearson: Option<f64>,
    pub val_mse: Option<f64>,
    /// Learning rate of the last step of the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub phase: &'static str,
    /// 1-based within the phase; the warm-up restarts with every phase.
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
    pub wall_time: Duration,
    /// SHA-256 of the serialized final model, hex encoded.
    pub checksum: String,
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainReport {
    /// `phase,epoch,train_loss,val_pearson,val_mse,lr`, one line per epoch.
    /// Missing validation values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,epoch,train_loss,val_pearson,val_mse,lr\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.phase,
                r.epoch,
                r.train_loss,
                opt_field(r.val_pearson),
                opt_field(r.val_mse),
                r.lr
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Step records of one phase.
    pub fn phase_steps<'a>(&'a self, phase: &'a str) -> impl Iterator<Item = &'a StepRecord> + 'a {
        self.steps.iter().filter(move |s| s.phase == phase)
    }
}

/// SHA-256 over the serialized model.
pub fn model_checksum(net: &DualBranchNet<f32>) -> String {
    let digest = Sha256::digest(model::to_bytes(net));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Something the epoch loop can optimize.
trait Trainable {
    fn tensors(&self) -> Vec<&[f32]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f32]>;
    /// Loss of `batch` and the gradient of every tensor.
    fn loss_and_grads(&self, batch: &Batch, loss: Loss) -> Result<(f64, Vec<Vec<f32>>)>;
    fn predict(&self, features: &Matrix<f32>, ids: &[usize]) -> Result<Vec<f32>>;
}

impl Trainable for DualBranchNet<f32> {
    fn tensors(&self) -> Vec<&[f32]> {
        self.param_tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        self.param_tensors_mut()
    }

    fn loss_and_grads(&self, batch: &Batch, loss: Loss) -> Result<(f64, Vec<Vec<f32>>)> {
        let (pred, cache) = self.forward(&batch.features, &batch.ids)?;
        let (l, d_pred) = loss.evaluate(pred.data(), &batch.targets)?;
        let d_pred = Matrix::from_vec(d_pred.len(), 1, d_pred)?;
        let grads = self.backward(&cache, &d_pred)?;
        Ok((
            l as f64,
            grads.tensors().into_iter().map(<[f32]>::to_vec).collect(),
        ))
    }

    fn predict(&self, features: &Matrix<f32>, ids: &[usize]) -> Result<Vec<f32>> {
        DualBranchNet::predict(self, features, ids)
    }
}

/// Weights of one branch after pre-training. `embedding` is set for the id
/// branch only.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchWeights {
    pub kind: BranchKind,
    pub embedding: Option<EmbeddingTable<f32>>,
    pub mlp: Mlp<f32>,
}

/// A single branch followed by a temporary `width → 1` linear head.
struct BranchModel {
    weights: BranchWeights,
    head: Mlp<f32>,
}

impl BranchModel {
    fn input(&self, features: &Matrix<f32>, ids: &[usize]) -> Result<Matrix<f32>> {
        match &self.weights.embedding {
            Some(e) => embedding_lookup(ids, e),
            None => Ok(features.clone()),
        }
    }
}

impl Trainable for BranchModel {
    fn tensors(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::new();
        if let Some(e) = &self.weights.embedding {
            out.push(e.table.data());
        }
        for l in self.weights.mlp.layers.iter().chain(&self.head.layers) {
            out.push(l.weight.data());
            out.push(&l.bias);
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = Vec::new();
        if let Some(e) = &mut self.weights.embedding {
            out.push(e.table.data_mut());
        }
        for l in self
            .weights
            .mlp
            .layers
            .iter_mut()
            .chain(&mut self.head.layers)
        {
            out.push(l.weight.data_mut());
            out.push(&mut l.bias);
        }
        out
    }

    fn loss_and_grads(&self, batch: &Batch, loss: Loss) -> Result<(f64, Vec<Vec<f32>>)> {
        let x = self.input(&batch.features, &batch.ids)?;
        let (h, branch_cache) = self.weights.mlp.forward(&x)?;
        let (pred, head_cache) = self.head.forward(&h)?;
        let (l, d_pred) = loss.evaluate(pred.data(), &batch.targets)?;
        let d_pred = Matrix::from_vec(d_pred.len(), 1, d_pred)?;
        let (d_h, head_grads) = self.head.backward(&head_cache, &d_pred, true)?;
        let d_h = d_h.expect("input gradient requested");
        let need_x = self.weights.embedding.is_some();
        let (d_x, branch_grads) = self.weights.mlp.backward(&branch_cache, &d_h, need_x)?;

        let mut grads = Vec::new();
        if let (Some(e), Some(d_x)) = (&self.weights.embedding, d_x) {
            grads.push(embedding_backward(&batch.ids, &d_x, e.vocab_size())?.into_vec());
        }
        for g in branch_grads.into_iter().chain(head_grads) {
            grads.push(g.weight.into_vec());
            grads.push(g.bias);
        }
        Ok((l as f64, grads))
    }

    fn predict(&self, features: &Matrix<f32>, ids: &[usize]) -> Result<Vec<f32>> {
        let x = self.input(features, ids)?;
        let (h, _) = self.weights.mlp.forward(&x)?;
        Ok(self.head.forward(&h)?.0.into_vec())
    }
}

/// Data for a phase: training rows, optional validation rows, and dense ids
/// of both under the training vocabulary.
struct PhaseData<'a> {
    train: &'a Dataset,
    train_ids: Vec<usize>,
    val: Option<(&'a Dataset, Vec<usize>)>,
}

impl<'a> PhaseData<'a> {
    fn new(train: &'a Dataset, val: Option<&'a Dataset>) -> Self {
        Self {
            train,
            train_ids: train.dense_ids(),
            val: val.filter(|v| !v.is_empty()).map(|v| (v, v.dense_ids())),
        }
    }
}

fn predict_chunked<M: Trainable>(
    model: &M,
    features: &Matrix<f32>,
    ids: &[usize],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(features.rows());
    for start in (0..features.rows()).step_by(EVAL_CHUNK) {
        let rows: Vec<usize> = (start..(start + EVAL_CHUNK).min(features.rows())).collect();
        let chunk = features.select_rows(&rows);
        let pred = model.predict(&chunk, &ids[start..start + rows.len()])?;
        out.extend(pred.into_iter().map(f64::from));
    }
    Ok(out)
}

fn validation_metrics<M: Trainable>(
    model: &M,
    data: &PhaseData<'_>,
) -> Result<(Option<f64>, Option<f64>)> {
    let Some((val, ids)) = &data.val else {
        return Ok((None, None));
    };
    let pred = predict_chunked(model, val.features(), ids)?;
    if pred.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric(
            "validation predictions are not finite".into(),
        ));
    }
    let mse = mse_metric(&pred, val.target())?;
    let r = match pearson(&pred, val.target()) {
        Ok(r) => Some(r),
        Err(Error::UndefinedCorrelation(_)) | Err(Error::Argument(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((r, Some(mse)))
}

/// Runs `epochs` epochs of Adam with a fresh optimizer state and warm-up.
/// Only tensors with `trainable[i]` set are updated.
#[allow(clippy::too_many_arguments)]
fn fit_phase<M: Trainable>(
    model: &mut M,
    data: &PhaseData<'_>,
    epochs: usize,
    trainable: &[bool],
    cfg: &TrainConfig,
    rng: &mut RngState,
    phase: &'static str,
    report: &mut TrainReport,
) -> Result<()> {
    if epochs == 0 {
        return Ok(());
    }
    let schedule = cfg.schedule()?;
    let selected = |tensors: Vec<&[f32]>| -> Vec<usize> {
        tensors
            .iter()
            .enumerate()
            .filter(|(i, _)| trainable[*i])
            .map(|(_, t)| t.len())
            .collect()
    };
    let mut state = AdamState::new(&selected(model.tensors()), cfg.adam);
    let mut step = 0u64;
    let n = data.train.len();

    for epoch in 1..=epochs {
        let order = batch_order(n, cfg.batch_size, rng)?;
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for rows in &order {
            let batch = data.train.batch(rows, &data.train_ids);
            let (loss, grads) = model.loss_and_grads(&batch, cfg.loss)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "{phase}: loss became {loss} at epoch {epoch}"
                )));
            }
            step += 1;
            lr = schedule.lr(step);
            let mut params: Vec<&mut [f32]> = model
                .tensors_mut()
                .into_iter()
                .zip(trainable)
                .filter_map(|(t, &on)| on.then_some(t))
                .collect();
            let grads: Vec<&[f32]> = grads
                .iter()
                .zip(trainable)
                .filter_map(|(g, &on)| on.then_some(g.as_slice()))
                .collect();
            adam_step(&mut params, &grads, &mut state, lr)?;
            loss_sum += loss * rows.len() as f64;
            report.steps.push(StepRecord {
                phase,
                step,
                lr,
                loss,
            });
        }
        let (val_pearson, val_mse) = validation_metrics(model, data)?;
        let train_loss = loss_sum / n as f64;
        log::info!(
            "{phase} epoch {epoch}/{epochs}: train_loss={train_loss:.6} val_pearson={} val_mse={} lr={lr}",
            opt_field(val_pearson),
            opt_field(val_mse)
        );
        report.epochs.push(EpochRecord {
            phase,
            epoch,
            train_loss,
            val_pearson,
            val_mse,
            lr,
        });
    }
    Ok(())
}

fn temp_head(width: usize, seed: u64, kind: BranchKind) -> Result<Mlp<f32>> {
    let stream = match kind {
        BranchKind::Dense => STREAM_HEAD_DENSE,
        BranchKind::Id => STREAM_HEAD_ID,
    };
    Mlp::init(width, &[1], false, &mut RngState::derive(seed, stream))
}

fn initial_branch(net: &DualBranchNet<f32>, kind: BranchKind) -> Result<BranchWeights> {
    match kind {
        BranchKind::Dense => Ok(BranchWeights {
            kind,
            embedding: None,
            mlp: net.branch_a().clone(),
        }),
        BranchKind::Id => match (net.embedding(), net.branch_b()) {
            (Some(e), Some(b)) => Ok(BranchWeights {
                kind,
                embedding: Some(e.clone()),
                mlp: b.clone(),
            }),
            _ => Err(Error::Config("network has no id branch".into())),
        },
    }
}

fn run_pretrain(
    kind: BranchKind,
    net: &DualBranchNet<f32>,
    data: &PhaseData<'_>,
    cfg: &TrainConfig,
    report: &mut TrainReport,
) -> Result<BranchWeights> {
    let weights = initial_branch(net, kind)?;
    let head = temp_head(weights.mlp.output_width(), cfg.seed, kind)?;
    let mut model = BranchModel { weights, head };
    let trainable = vec![true; model.tensors().len()];
    let stream = match kind {
        BranchKind::Dense => STREAM_PRETRAIN_DENSE,
        BranchKind::Id => STREAM_PRETRAIN_ID,
    };
    let mut rng = RngState::derive(cfg.seed, stream);
    fit_phase(
        &mut model,
        data,
        cfg.effective_pretrain_epochs(),
        &trainable,
        cfg,
        &mut rng,
        kind.phase(),
        report,
    )?;
    Ok(model.weights)
}

/// Pre-trains one branch of `net` on `train` behind a temporary linear head
/// and returns the branch's weights (the head is discarded). Runs
/// `cfg.pretrain_epochs` epochs regardless of `cfg.pretrain_mode`; when
/// `val` is given, each epoch record carries the branch-plus-head metrics on it.
pub fn pretrain_branch(
    kind: BranchKind,
    net: &DualBranchNet<f32>,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(BranchWeights, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Argument(
            "cannot pre-train on an empty dataset".into(),
        ));
    }
    let cfg = TrainConfig {
        pretrain_mode: PretrainMode::Both,
        ..cfg.clone()
    };
    let mut report = TrainReport::default();
    let data = PhaseData::new(train, val);
    let w = run_pretrain(kind, net, &data, &cfg, &mut report)?;
    Ok((w, report))
}

/// Builds the initial network for `train` (before any phase runs).
pub fn initial_net(cfg: &TrainConfig, train: &Dataset) -> Result<DualBranchNet<f32>> {
    let mut net = DualBranchNet::build(
        cfg.model_config(train),
        &mut RngState::derive(cfg.seed, STREAM_INIT),
    )?;
    net.set_schema(InputSchema {
        feature_names: train.feature_names().to_vec(),
        vocab: train.vocab().clone(),
    })?;
    Ok(net)
}

/// Joint training of every (non-frozen) tensor of `net` for `epochs` epochs.
pub fn train_joint(
    net: &mut DualBranchNet<f32>,
    train: &Dataset,
    val: Option<&Dataset>,
    epochs: usize,
    frozen: &[ParamGroup],
    cfg: &TrainConfig,
    report: &mut TrainReport,
) -> Result<()> {
    let data = PhaseData::new(train, val);
    let trainable: Vec<bool> = net
        .param_groups()
        .iter()
        .map(|g| !frozen.contains(g))
        .collect();
    let mut rng = RngState::derive(cfg.seed, STREAM_JOINT);
    fit_phase(
        net,
        &data,
        epochs,
        &trainable,
        cfg,
        &mut rng,
        JOINT_PHASE,
        report,
    )
}

/// Full protocol: time split, optional branch pre-training, joint training.
pub fn train(cfg: &TrainConfig, ds: &Dataset) -> Result<(DualBranchNet<f32>, TrainReport)> {
    let started = Instant::now();
    cfg.validate()?;
    let (train, val) = time_split(ds, cfg.val_fraction)?;
    if train.is_empty() {
        return Err(Error::Argument(
            "no training rows after the time split".into(),
        ));
    }
    let mut net = initial_net(cfg, &train)?;
    let mut report = TrainReport::default();
    let data = PhaseData::new(&train, Some(&val));

    let mut frozen = Vec::new();
    if cfg.effective_pretrain_epochs() > 0 {
        if cfg.pretrains(BranchKind::Dense) {
            let w = run_pretrain(BranchKind::Dense, &net, &data, cfg, &mut report)?;
            net.set_branch_a(w.mlp)?;
            frozen.push(ParamGroup::BranchA);
        }
        if cfg.pretrains(BranchKind::Id) {
            let w = run_pretrain(BranchKind::Id, &net, &data, cfg, &mut report)?;
            let embedding = w.embedding.expect("id branch has an embedding");
            net.set_id_branch(embedding, w.mlp)?;
            frozen.extend([ParamGroup::Embedding, ParamGroup::BranchB]);
        }
    }
    if !cfg.freeze_pretrained {
        frozen.clear();
    }
    train_joint(
        &mut net,
        &train,
        Some(&val),
        cfg.joint_epochs(),
        &frozen,
        cfg,
        &mut report,
    )?;
    report.checksum = model_checksum(&net);
    report.wall_time = started.elapsed();
    Ok((net, report))
}

/// Features and dense ids of `ds` as the network expects them: columns
/// reordered by the network's feature names and ids mapped through its
/// vocabulary, when it carries a schema.
fn network_inputs(net: &DualBranchNet<f32>, ds: &Dataset) -> Result<(Matrix<f32>, Vec<usize>)> {
    match net.schema() {
        Some(schema) => {
            let features = if ds.feature_names() == schema.feature_names.as_slice() {
                ds.features().clone()
            } else {
                ds.select_features(&schema.feature_names)?
                    .features()
                    .clone()
            };
            let ids = ds
                .investment_id()
                .iter()
                .map(|&id| schema.vocab.lookup(id))
                .collect();
            Ok((features, ids))
        }
        None => {
            if ds.feature_count() != net.config().feature_count {
                return Err(Error::Schema(format!(
                    "data has {} features, model expects {}",
                    ds.feature_count(),
                    net.config().feature_count
                )));
            }
            Ok((ds.features().clone(), ds.dense_ids()))
        }
    }
}

/// Predictions for every row of `ds`, in order. Unseen ids use the
/// out-of-vocabulary row.
pub fn predict(net: &DualBranchNet<f32>, ds: &Dataset) -> Result<Vec<f64>> {
    let (features, ids) = network_inputs(net, ds)?;
    predict_chunked(net, &features, &ids)
}

pub fn evaluate(net: &DualBranchNet<f32>, ds: &Dataset) -> Result<MetricReport> {
    evaluate_with(net, ds, false)
}

/// Global Pearson and MSE over all rows; with `per_time` also the mean of
/// per-time-id coefficients.
pub fn evaluate_with(
    net: &DualBranchNet<f32>,
    ds: &Dataset,
    per_time: bool,
) -> Result<MetricReport> {
    if ds.len() < 2 {
        return Err(Error::Argument(format!(
            "evaluation needs at least 2 rows, got {}",
            ds.len()
        )));
    }
    let pred = predict(net, ds)?;
    let mut report = MetricReport::compute(&pred, ds.target())
        .map_err(|e| e.context("evaluating model predictions"))?;
    if per_time {
        report.pearson_by_time = Some(grouped_pearson(&pred, ds.target(), ds.time_id())?.0);
    }
    Ok(report)
}
