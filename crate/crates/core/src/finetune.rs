//! Fine-tuned variant: cache keys become a learnable linear adapter.
//!
//! The adapter weight `W` (D × N) starts as the transposed feature bank, so
//! `f · W` reproduces the training-free similarities exactly. Training keeps
//! the label bank and the activation fixed and minimizes the mean
//! cross-entropy of the two aggregated logits with AdamW, one full-batch
//! step per epoch over the cached support records.
//!
//! Gradient of the per-sample loss with respect to `W[d][j]`:
//!
//! ```text
//! p        = softmax(logits)
//! dL/ds_j  = alpha * phi(s_j) * sum_c (p_c - y_c) * values[j][c]
//! dL/dW_dj = f_d * dL/ds_j
//! ```

use serde::{Deserialize, Serialize};

use crate::cache::{check_alpha, CacheModel, KeyMode, SupportSet};
use crate::embedding::{l2_normalize, Label};
use crate::error::{Error, Result};
use crate::inference::{logits_from_similarities, Prediction};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            epochs: 20,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay.is_finite()
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "bad optimizer settings {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState {
    /// D × N.
    pub weights: Matrix,
    pub m: Matrix,
    pub v: Matrix,
    pub step: u64,
    pub hyper: AdamWConfig,
    pub alpha: f64,
}

pub fn init_adapter(cache: &CacheModel, hyper: AdamWConfig) -> Result<AdapterState> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    hyper.validate()?;
    let weights = cache.keys.transpose();
    let (d, n) = (weights.rows(), weights.cols());
    Ok(AdapterState {
        weights,
        m: Matrix::zeros(d, n),
        v: Matrix::zeros(d, n),
        step: 0,
        hyper,
        alpha: cache.alpha,
    })
}

/// `f_test · W`.
pub fn adapter_forward(f_test: &[f64], weights: &Matrix) -> Result<Vec<f64>> {
    if f_test.len() != weights.rows() {
        return Err(Error::DimensionMismatch {
            expected: weights.rows(),
            found: f_test.len(),
        });
    }
    let n = weights.cols();
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (d, &x) in f_test.iter().enumerate() {
            acc += x * weights.get(d, j);
        }
        *o = acc;
    }
    Ok(out)
}

impl AdapterState {
    pub fn logits(&self, f_test: &[f64], values: &[[f64; 2]]) -> Result<crate::inference::Logits> {
        let sims = adapter_forward(f_test, &self.weights)?;
        logits_from_similarities(&sims, values, self.alpha)
    }
}

/// Softmax over two logits with max subtraction.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// `-log softmax(logits)[label]`, computed as a log-sum-exp.
pub fn cross_entropy(logits: [f64; 2], label: Label) -> f64 {
    let m = logits[0].max(logits[1]);
    (m - logits[label.index()]) + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln()
}

/// Mean cross-entropy over `batch` and its gradient with respect to `weights`.
pub fn loss_and_grad(
    batch: &[(Vec<f64>, Label)],
    weights: &Matrix,
    values: &[[f64; 2]],
    alpha: f64,
) -> Result<(f64, Matrix)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_alpha(alpha)?;
    if values.len() != weights.cols() {
        return Err(Error::LengthMismatch {
            expected: weights.cols(),
            found: values.len(),
        });
    }
    let (dim, n) = (weights.rows(), weights.cols());
    let mut grad = Matrix::zeros(dim, n);
    let mut total = 0.0;
    let mut ds = vec![0.0; n];
    for (f, label) in batch {
        let sims = adapter_forward(f, weights)?;
        let phi: Vec<f64> = sims.iter().map(|&s| (-alpha * (1.0 - s)).exp()).collect();
        let mut logits = [0.0; 2];
        for (w, v) in phi.iter().zip(values) {
            logits[0] += w * v[0];
            logits[1] += w * v[1];
        }
        if !logits.iter().all(|x| x.is_finite()) {
            return Err(Error::non_finite("adapter logits"));
        }
        total += cross_entropy(logits, *label);
        let p = softmax2(logits);
        let target = crate::cache::one_hot(*label);
        let dz = [p[0] - target[0], p[1] - target[1]];
        for j in 0..n {
            ds[j] = alpha * phi[j] * (dz[0] * values[j][0] + dz[1] * values[j][1]);
        }
        for (d, &x) in f.iter().enumerate() {
            for (g, &s) in grad.row_mut(d).iter_mut().zip(&ds) {
                *g += x * s;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    grad.as_mut_slice().iter_mut().for_each(|g| *g *= scale);
    let loss = total * scale;
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::non_finite("loss or gradient"));
    }
    Ok((loss, grad))
}

/// One decoupled-weight-decay Adam update.
pub fn adamw_step(state: &mut AdapterState, grad: &Matrix) -> Result<()> {
    if grad.rows() != state.weights.rows() || grad.cols() != state.weights.cols() {
        return Err(Error::DimensionMismatch {
            expected: state.weights.as_slice().len(),
            found: grad.as_slice().len(),
        });
    }
    if !grad.is_finite() {
        return Err(Error::non_finite("gradient"));
    }
    let h = state.hyper;
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - h.beta1.powi(t);
    let bias2 = 1.0 - h.beta2.powi(t);
    let w = state.weights.as_mut_slice();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (i, &g) in grad.as_slice().iter().enumerate() {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        w[i] -= h.lr * (m_hat / (v_hat.sqrt() + h.eps) + h.weight_decay * w[i]);
    }
    if !state.weights.is_finite() {
        return Err(Error::non_finite("adapter weights after update"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean loss before this epoch's update.
    pub loss: f64,
    pub support_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub hyper: AdamWConfig,
    pub alpha: f64,
    pub epochs: Vec<EpochLog>,
    /// Loss and accuracy of the weights returned to the caller.
    pub final_loss: f64,
    pub final_support_accuracy: f64,
}

impl TrainLog {
    pub fn initial_loss(&self) -> f64 {
        self.epochs.first().map_or(self.final_loss, |e| e.loss)
    }
}

fn support_accuracy(
    batch: &[(Vec<f64>, Label)],
    state: &AdapterState,
    values: &[[f64; 2]],
) -> Result<f64> {
    let mut correct = 0usize;
    for (f, label) in batch {
        if Prediction::from_logits(state.logits(f, values)?).label == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / batch.len() as f64)
}

/// Trains the adapter on the support records the cache was built from and
/// returns a cache whose keys are the learned `Wᵀ` rows.
pub fn finetune(
    cache: &CacheModel,
    support: &SupportSet,
    hyper: AdamWConfig,
) -> Result<(CacheModel, TrainLog)> {
    let support_ids: Vec<&str> = support.ids();
    if support_ids.len() != cache.entry_ids.len()
        || support_ids
            .iter()
            .zip(&cache.entry_ids)
            .any(|(a, b)| *a != b)
    {
        return Err(Error::SupportMismatch(format!(
            "{} support records vs {} cache entries, or ids differ",
            support_ids.len(),
            cache.entry_ids.len()
        )));
    }
    let batch: Vec<(Vec<f64>, Label)> = support
        .records
        .iter()
        .map(|r| Ok((l2_normalize(&r.vector_f64())?, r.label)))
        .collect::<Result<_>>()?;

    let mut state = init_adapter(cache, hyper)?;
    let mut epochs = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let (loss, grad) = loss_and_grad(&batch, &state.weights, &cache.values, state.alpha)?;
        let support_accuracy = support_accuracy(&batch, &state, &cache.values)?;
        log::debug!("epoch {epoch}: loss {loss:.6} support acc {support_accuracy:.4}");
        epochs.push(EpochLog {
            epoch,
            loss,
            support_accuracy,
        });
        adamw_step(&mut state, &grad)?;
    }
    let (final_loss, _) = loss_and_grad(&batch, &state.weights, &cache.values, state.alpha)?;
    let final_support_accuracy = support_accuracy(&batch, &state, &cache.values)?;

    let tuned = CacheModel {
        keys: state.weights.transpose(),
        key_mode: KeyMode::Learned,
        ..cache.clone()
    };
    Ok((
        tuned,
        TrainLog {
            hyper,
            alpha: state.alpha,
            epochs,
            final_loss,
            final_support_accuracy,
        },
    ))
}
