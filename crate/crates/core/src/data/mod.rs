//! Tabular data in the `row_id, time_id, investment_id, target, f_0..` layout.

mod csv_io;
mod synth;
mod vocab;

pub use csv_io::{load_csv, write_csv, CsvOptions};
pub use synth::{generate_synthetic, SynthSpec, Synthetic};
pub use vocab::{Vocab, OOV_INDEX};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::Matrix;

/// Columnar dataset. `vocab` maps raw investment ids to embedding rows and
/// may come from a different dataset (for validation and inference data it
/// is the training vocabulary).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    row_ids: Vec<String>,
    time_id: Vec<i64>,
    investment_id: Vec<i64>,
    target: Vec<f64>,
    features: Matrix<f32>,
    feature_names: Vec<String>,
    vocab: Vocab,
}

/// Rows selected for one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Matrix<f32>,
    pub ids: Vec<usize>,
    pub targets: Vec<f32>,
}

impl Dataset {
    /// Assembles a dataset and builds its vocabulary from `investment_id`.
    pub fn new(
        row_ids: Vec<String>,
        time_id: Vec<i64>,
        investment_id: Vec<i64>,
        target: Vec<f64>,
        features: Matrix<f32>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.rows();
        if row_ids.len() != n || time_id.len() != n || investment_id.len() != n || target.len() != n
        {
            return Err(Error::shape(
                "Dataset::new",
                format!("features {}", features.shape_str()),
                format!(
                    "columns of length {}/{}/{}/{}",
                    row_ids.len(),
                    time_id.len(),
                    investment_id.len(),
                    target.len()
                ),
            ));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::shape(
                "Dataset::new",
                format!("features {}", features.shape_str()),
                format!("{} feature names", feature_names.len()),
            ));
        }
        if !features.all_finite() {
            return Err(Error::Numeric(
                "dataset features contain non-finite values".into(),
            ));
        }
        let vocab = Vocab::build(investment_id.iter().copied());
        Ok(Self {
            row_ids,
            time_id,
            investment_id,
            target,
            features,
            feature_names,
            vocab,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn time_id(&self) -> &[i64] {
        &self.time_id
    }

    pub fn investment_id(&self) -> &[i64] {
        &self.investment_id
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn features(&self) -> &Matrix<f32> {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Same rows, different id mapping.
    pub fn with_vocab(mut self, vocab: Vocab) -> Self {
        self.vocab = vocab;
        self
    }

    /// Replaces the investment ids (keeps the current vocabulary).
    pub fn with_investment_ids(mut self, ids: Vec<i64>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::shape(
                "with_investment_ids",
                format!("{} rows", self.len()),
                format!("{} ids", ids.len()),
            ));
        }
        self.investment_id = ids;
        Ok(self)
    }

    /// Dense embedding index of every row under the current vocabulary.
    pub fn dense_ids(&self) -> Vec<usize> {
        self.investment_id
            .iter()
            .map(|&id| self.vocab.lookup(id))
            .collect()
    }

    pub fn distinct_times(&self) -> Vec<i64> {
        self.time_id
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Rows at `indices`, in that order, sharing this dataset's vocabulary.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            time_id: indices.iter().map(|&i| self.time_id[i]).collect(),
            investment_id: indices.iter().map(|&i| self.investment_id[i]).collect(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            features: self.features.select_rows(indices),
            feature_names: self.feature_names.clone(),
            vocab: self.vocab.clone(),
        }
    }

    /// Keeps only the named feature columns, in the order given.
    pub fn select_features(&self, names: &[String]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Schema(format!("unknown feature column {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        out.features = self.features.select_cols(&cols);
        out.feature_names = names.to_vec();
        Ok(out)
    }

    /// Gathers one batch, precomputed dense ids supplied by the caller.
    pub fn batch(&self, rows: &[usize], dense_ids: &[usize]) -> Batch {
        Batch {
            features: self.features.select_rows(rows),
            ids: rows.iter().map(|&r| dense_ids[r]).collect(),
            targets: rows.iter().map(|&r| self.target[r] as f32).collect(),
        }
    }
}

/// Splits by time: the `ceil(val_fraction · T)` latest distinct time ids go
/// to validation, capped at `T − 1` so training keeps at least one time. The
/// training side gets a fresh vocabulary; validation rows use it too.
pub fn time_split(ds: &Dataset, val_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Argument(format!(
            "validation fraction must be in [0, 1), got {val_fraction}"
        )));
    }
    let times = ds.distinct_times();
    let n_val = if val_fraction == 0.0 {
        0
    } else {
        if times.len() < 2 {
            return Err(Error::Argument(format!(
                "time split needs at least 2 distinct time ids, found {}",
                times.len()
            )));
        }
        ((val_fraction * times.len() as f64).ceil() as usize).min(times.len() - 1)
    };
    let cutoff = times.get(times.len() - n_val).copied();
    let (mut train_rows, mut val_rows) = (Vec::new(), Vec::new());
    for (i, &t) in ds.time_id.iter().enumerate() {
        match cutoff {
            Some(c) if t >= c => val_rows.push(i),
            _ => train_rows.push(i),
        }
    }
    let train = ds.subset(&train_rows);
    let vocab = Vocab::build(train.investment_id.iter().copied());
    let val = ds.subset(&val_rows).with_vocab(vocab.clone());
    Ok((train.with_vocab(vocab), val))
}

/// A seeded permutation of `0..n` cut into chunks of `batch_size`.
pub fn batch_order(n: usize, batch_size: usize, rng: &mut RngState) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Argument("cannot batch an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub fn make_batches(ds: &Dataset, batch_size: usize, rng: &mut RngState) -> Result<Vec<Batch>> {
    let dense = ds.dense_ids();
    Ok(batch_order(ds.len(), batch_size, rng)?
        .iter()
        .map(|rows| ds.batch(rows, &dense))
        .collect())
}
