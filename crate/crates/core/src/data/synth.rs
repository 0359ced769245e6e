//! Seeded synthetic data with a known generating process.
//!
//! For row `r` with features `f` (standard normal) and id `k`:
//!
//! ```text
//! target = wᵀf + α_k + nonlinearity · tanh(f₀·f₁) + ε,   ε ~ N(0, noise_std²)
//! ```
//!
//! with `w_j ~ N(0, weight_scale² / F)` (so `wᵀf` has variance close to
//! `weight_scale²`) and `α_k ~ N(0, id_std²)`. Rows come in time blocks of
//! `ids` rows; each block holds every id once, in a shuffled order. Raw
//! investment ids are `0..ids`.
//!
//! Features are rounded to `f32` before the target is computed, so the stored
//! weights reproduce the linear part of the target exactly.

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub rows: usize,
    pub ids: usize,
    pub features: usize,
    pub weight_scale: f64,
    pub id_std: f64,
    pub nonlinearity: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            rows: 2000,
            ids: 100,
            features: 30,
            weight_scale: 1.0,
            id_std: 1.0,
            nonlinearity: 0.5,
            noise_std: 0.5,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.ids == 0 || self.features == 0 {
            return Err(Error::Config(format!(
                "rows, ids and features must all be at least 1 (got {}, {}, {})",
                self.rows, self.ids, self.features
            )));
        }
        if self.rows < self.ids {
            return Err(Error::Config(format!(
                "need at least one row per id: {} rows for {} ids",
                self.rows, self.ids
            )));
        }
        for (name, v) in [
            ("weight_scale", self.weight_scale),
            ("id_std", self.id_std),
            ("nonlinearity", self.nonlinearity),
            ("noise_std", self.noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be a finite value >= 0, got {v}"
                )));
            }
        }
        if self.nonlinearity > 0.0 && self.features < 2 {
            return Err(Error::Config(
                "the nonlinear term needs at least 2 features".into(),
            ));
        }
        Ok(())
    }
}

/// Generated data plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset,
    /// Linear weights `w`, one per feature.
    pub weights: Vec<f64>,
    /// Id effect `α_k`, indexed by raw investment id.
    pub id_effects: Vec<f64>,
}

impl Synthetic {
    /// `wᵀf` for every row of `ds`, using the stored weights.
    pub fn linear_signal(&self, ds: &Dataset) -> Vec<f64> {
        (0..ds.len())
            .map(|r| linear(&self.weights, ds.features().row(r)))
            .collect()
    }
}

fn linear(w: &[f64], f: &[f32]) -> f64 {
    w.iter().zip(f).map(|(&w, &x)| w * x as f64).sum()
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    // Separate streams so, e.g., changing the noise level leaves features alone.
    let mut param_rng = RngState::derive(spec.seed, 0);
    let mut feature_rng = RngState::derive(spec.seed, 1);
    let mut layout_rng = RngState::derive(spec.seed, 2);
    let mut noise_rng = RngState::derive(spec.seed, 3);

    let w_std = spec.weight_scale / (spec.features as f64).sqrt();
    let weights: Vec<f64> = (0..spec.features)
        .map(|_| param_rng.normal(0.0, w_std))
        .collect();
    let id_effects: Vec<f64> = (0..spec.ids)
        .map(|_| param_rng.normal(0.0, spec.id_std))
        .collect();

    let n = spec.rows;
    let mut values = Vec::with_capacity(n * spec.features);
    let mut row_ids = Vec::with_capacity(n);
    let mut time_id = Vec::with_capacity(n);
    let mut investment_id = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    let mut block: Vec<usize> = (0..spec.ids).collect();
    for r in 0..n {
        let pos = r % spec.ids;
        if pos == 0 {
            layout_rng.shuffle(&mut block);
        }
        let t = (r / spec.ids) as i64;
        let k = block[pos];
        let row: Vec<f32> = (0..spec.features)
            .map(|_| feature_rng.standard_normal() as f32)
            .collect();
        let mut y = linear(&weights, &row) + id_effects[k];
        if spec.nonlinearity > 0.0 {
            y += spec.nonlinearity * (row[0] as f64 * row[1] as f64).tanh();
        }
        if spec.noise_std > 0.0 {
            y += noise_rng.normal(0.0, spec.noise_std);
        }
        values.extend_from_slice(&row);
        row_ids.push(format!("{t}_{k}"));
        time_id.push(t);
        investment_id.push(k as i64);
        target.push(y);
    }
    let features = Matrix::from_vec(n, spec.features, values)?;
    let names = (0..spec.features).map(|i| format!("f_{i}")).collect();
    let data = Dataset::new(row_ids, time_id, investment_id, target, features, names)?;
    Ok(Synthetic {
        data,
        weights,
        id_effects,
    })
}
