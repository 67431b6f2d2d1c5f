//! Multimodal fusion head: a logistic-loss linear classifier over the
//! concatenation of a text embedding and a z-scored audio feature block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension normalization for the audio block, fitted on training data
/// only. Dimensions with zero training variance are flagged and passed
/// through unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub frozen: Vec<bool>,
}

impl NormStats {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| Error::Model("no rows".into()))?;
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Model("inconsistent audio feature dimensions".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std: Vec<f64> = std.iter().map(|v| v.sqrt()).collect();
        // Zero variance up to accumulation noise counts as constant.
        let frozen: Vec<bool> = std
            .iter()
            .zip(&mean)
            .map(|(&s, &m)| s <= 1e-12 * m.abs().max(1.0))
            .collect();
        Ok(Self { mean, std, frozen })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.frozen[j] {
                    v
                } else {
                    (v - self.mean[j]) / self.std[j]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FusionOptions {
    /// L2 penalty on the weights (the bias is unregularized).
    pub l2: f64,
    /// Stop when the gradient norm falls below this.
    pub gradient_tolerance: f64,
    pub max_iters: usize,
}

impl Default for FusionOptions {
    fn default() -> Self {
        Self { l2: 1e-2, gradient_tolerance: 1e-5, max_iters: 50_000 }
    }
}

/// Mean logistic loss with L2 penalty, and its gradient in (weights, bias).
/// Labels are 0/1 with 1 the positive class.
pub fn logistic_loss_and_gradient(
    features: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &label) in features.iter().zip(labels) {
        let y = if label == 1 { 1.0 } else { -1.0 };
        let score: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + bias;
        let margin = y * score;
        // ln(1 + exp(-m)) computed stably on both tails.
        loss += if margin > 0.0 {
            (-margin).exp().ln_1p()
        } else {
            -margin + margin.exp().ln_1p()
        };
        let sigma = 1.0 / (1.0 + margin.exp());
        let coeff = -y * sigma;
        for (g, &v) in grad_w.iter_mut().zip(x) {
            *g += coeff * v;
        }
        grad_b += coeff;
    }
    loss /= n;
    grad_b /= n;
    for g in grad_w.iter_mut() {
        *g /= n;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss, grad_w, grad_b)
}

/// Trained fusion head over pre-assembled feature rows.
#[derive(Debug, Clone)]
pub struct FusionTrained {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub norm_stats: NormStats,
    pub converged: bool,
}

/// Train the fusion head. `embeddings` and `audio_rows` are parallel arrays;
/// the audio block is z-scored with statistics computed here, on this
/// training data alone, then concatenated after the embedding. Gradient
/// descent with backtracking line search runs until the gradient norm meets
/// the tolerance.
pub fn train_fusion(
    embeddings: &[Vec<f64>],
    audio_rows: &[Vec<f64>],
    labels: &[u8],
    options: &FusionOptions,
) -> Result<FusionTrained> {
    if embeddings.is_empty() || embeddings.len() != audio_rows.len() || embeddings.len() != labels.len() {
        return Err(Error::Model("fusion training inputs are empty or misaligned".into()));
    }
    let embed_dim = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != embed_dim) {
        return Err(Error::Model("inconsistent embedding dimensions".into()));
    }
    if !labels.iter().any(|&l| l == 0) || !labels.iter().any(|&l| l == 1) {
        return Err(Error::Model("training requires at least one example per class".into()));
    }

    let norm_stats = NormStats::fit(audio_rows)?;
    let features: Vec<Vec<f64>> = embeddings
        .iter()
        .zip(audio_rows)
        .map(|(e, a)| {
            let mut row = e.clone();
            row.extend(norm_stats.apply(a));
            row
        })
        .collect();

    let dim = embed_dim + audio_rows[0].len();
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut converged = false;
    let (mut loss, mut grad_w, mut grad_b) =
        logistic_loss_and_gradient(&features, labels, &weights, bias, options.l2);

    let mut step = 1.0;
    for _ in 0..options.max_iters {
        let grad_norm =
            (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if grad_norm <= options.gradient_tolerance {
            converged = true;
            break;
        }
        // Backtracking line search on the descent direction -gradient.
        let mut accepted = false;
        for _ in 0..60 {
            let candidate_w: Vec<f64> =
                weights.iter().zip(&grad_w).map(|(w, g)| w - step * g).collect();
            let candidate_b = bias - step * grad_b;
            let (candidate_loss, cw, cb) =
                logistic_loss_and_gradient(&features, labels, &candidate_w, candidate_b, options.l2);
            if candidate_loss <= loss - 1e-4 * step * grad_norm * grad_norm {
                weights = candidate_w;
                bias = candidate_b;
                loss = candidate_loss;
                grad_w = cw;
                grad_b = cb;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    Ok(FusionTrained { weights, bias, norm_stats, converged })
}
