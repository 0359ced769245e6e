//! Evaluation metrics. Everything here runs in `f64`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Pearson correlation of `x` and `y`.
///
/// Both vectors are centered on their means, then
/// `ρ = Σ(x−μx)(y−μy) / (√Σ(x−μx)² · √Σ(y−μy)²)`. The result is clamped to
/// `[-1, 1]`. A constant input is an error, not a silent zero.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "pearson needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Argument(format!(
            "pearson needs at least 2 values, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first input"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second input"));
    }
    // sqrt each factor separately so the product cannot overflow.
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    if !r.is_finite() {
        return Err(Error::Numeric(format!("pearson evaluated to {r}")));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// Mean squared difference.
pub fn mse_metric(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "mse needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Argument("mse needs at least one value".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// Mean of per-group Pearson coefficients, grouping rows by `groups`.
///
/// Groups with fewer than two rows or a constant side are skipped. Returns
/// the mean and the number of groups that contributed.
pub fn grouped_pearson(pred: &[f64], target: &[f64], groups: &[i64]) -> Result<(f64, usize)> {
    if pred.len() != target.len() || pred.len() != groups.len() {
        return Err(Error::Argument(format!(
            "grouped pearson needs equal lengths, got {}, {} and {}",
            pred.len(),
            target.len(),
            groups.len()
        )));
    }
    let mut by_group: BTreeMap<i64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((&p, &t), &g) in pred.iter().zip(target).zip(groups) {
        let e = by_group.entry(g).or_default();
        e.0.push(p);
        e.1.push(t);
    }
    let mut sum = 0.0;
    let mut used = 0;
    for (p, t) in by_group.values() {
        match pearson(p, t) {
            Ok(r) => {
                sum += r;
                used += 1;
            }
            Err(Error::UndefinedCorrelation(_)) | Err(Error::Argument(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::UndefinedCorrelation("every time group"));
    }
    Ok((sum / used as f64, used))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub pearson: f64,
    pub mse: f64,
    pub n: usize,
    /// Mean per-time-group coefficient, when requested.
    pub pearson_by_time: Option<f64>,
}

impl MetricReport {
    pub fn compute(pred: &[f64], target: &[f64]) -> Result<Self> {
        Ok(Self {
            pearson: pearson(pred, target)?,
            mse: mse_metric(pred, target)?,
            n: pred.len(),
            pearson_by_time: None,
        })
    }
}
