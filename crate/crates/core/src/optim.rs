//! Adam with bias correction, and a linear warm-up learning-rate schedule.

use crate::error::{Error, Result};
use crate::tensor::Real;

pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_WARMUP_STEPS: u64 = 1000;

/// `lr(t) = base_lr · min(1, t / warmup_steps)` for steps `t ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmupSchedule {
    pub base_lr: f64,
    pub warmup_steps: u64,
}

impl Default for WarmupSchedule {
    fn default() -> Self {
        Self {
            base_lr: DEFAULT_LR,
            warmup_steps: DEFAULT_WARMUP_STEPS,
        }
    }
}

impl WarmupSchedule {
    pub fn new(base_lr: f64, warmup_steps: u64) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {base_lr}"
            )));
        }
        if warmup_steps == 0 {
            return Err(Error::Config("warm-up steps must be at least 1".into()));
        }
        Ok(Self {
            base_lr,
            warmup_steps,
        })
    }

    pub fn lr(&self, step: u64) -> f64 {
        warmup_lr(step, self)
    }
}

pub fn warmup_lr(step: u64, s: &WarmupSchedule) -> f64 {
    s.base_lr * (step as f64 / s.warmup_steps as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub hyper: AdamHyper,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    /// Zero moments shaped like `sizes` (one entry per tensor).
    pub fn new(sizes: &[usize], hyper: AdamHyper) -> Self {
        Self {
            hyper,
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn for_tensors(tensors: &[&[T]], hyper: AdamHyper) -> Self {
        let sizes: Vec<usize> = tensors.iter().map(|t| t.len()).collect();
        Self::new(&sizes, hyper)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }
}

/// One Adam update of every tensor in `params` using `grads`.
pub fn adam_step<T: Real>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Usage(format!(
            "adam_step: {} parameter tensors, {} gradients, state for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::Usage(format!(
                "adam_step: tensor {i} has {} parameters, {} gradients, state for {}",
                p.len(),
                g.len(),
                state.m[i].len()
            )));
        }
    }
    if lr.is_nan() || lr < 0.0 {
        return Err(Error::Argument(format!(
            "learning rate must be >= 0, got {lr}"
        )));
    }

    state.step += 1;
    let t = state.step as i32;
    let h = state.hyper;
    let b1 = T::from_f64(h.beta1);
    let b2 = T::from_f64(h.beta2);
    let one_m_b1 = T::from_f64(1.0 - h.beta1);
    let one_m_b2 = T::from_f64(1.0 - h.beta2);
    let bc1 = T::from_f64(1.0 - h.beta1.powi(t));
    let bc2 = T::from_f64(1.0 - h.beta2.powi(t));
    let eps = T::from_f64(h.eps);
    let lr_t = T::from_f64(lr);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((p, &g), m), v) in p
            .iter_mut()
            .zip(g.iter())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = b1 * *m + one_m_b1 * g;
            *v = b2 * *v + one_m_b2 * g * g;
            if lr > 0.0 {
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr_t * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}
