//! Linear SVM trained by dual coordinate descent.
//!
//! Solves the L2-regularized hinge-loss problem
//! `min_w 1/2 ||w||^2 + C sum_i max(0, 1 - y_i w.x_i)` where the bias is an
//! augmented, regularized constant feature. One dual coordinate is optimized
//! exactly per step, so the dual objective never decreases.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::textstats::SparseVector;

#[derive(Debug, Clone, Copy)]
pub struct SvmOptions {
    /// Hinge-loss weight.
    pub c: f64,
    /// Stop once the primal-dual gap falls below this.
    pub dual_gap_tolerance: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch coordinate permutation.
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self { c: 1.0, dual_gap_tolerance: 1e-4, max_epochs: 1000, seed: 0 }
    }
}

/// Trained weights plus the per-epoch dual objective trace.
#[derive(Debug, Clone)]
pub struct SvmTrained {
    /// Feature weights, without the bias slot.
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual objective after each epoch; nondecreasing.
    pub dual_history: Vec<f64>,
    pub converged: bool,
}

/// Primal objective of the augmented problem (bias regularized).
pub fn svm_primal_objective(
    x: &[SparseVector],
    y: &[f64],
    weights: &[f64],
    bias: f64,
    c: f64,
) -> f64 {
    let reg = 0.5 * (weights.iter().map(|w| w * w).sum::<f64>() + bias * bias);
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - yi * (xi.dot_dense(weights) + bias)).max(0.0))
        .sum();
    reg + c * loss
}

/// Train on sparse rows with binary labels (0 or 1; 1 is the positive
/// class). Requires at least one example of each class.
pub fn train_svm(x: &[SparseVector], labels: &[u8], options: &SvmOptions) -> Result<SvmTrained> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::Model("training set is empty or misaligned with labels".into()));
    }
    let dim = x[0].dim;
    if x.iter().any(|xi| xi.dim != dim) {
        return Err(Error::Model("inconsistent feature dimensions".into()));
    }
    let has0 = labels.iter().any(|&l| l == 0);
    let has1 = labels.iter().any(|&l| l == 1);
    if !has0 || !has1 {
        return Err(Error::Model("training requires at least one example per class".into()));
    }

    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    // Diagonal of Q; the +1 term is the augmented bias feature.
    let q_diag: Vec<f64> = x.iter().map(|xi| xi.values.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();

    let mut alpha = vec![0.0f64; n];
    let mut weights = vec![0.0f64; dim];
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut dual_history = Vec::new();
    let mut converged = false;

    for _ in 0..options.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = &x[i];
            let margin = y[i] * (xi.dot_dense(&weights) + bias);
            let gradient = margin - 1.0;
            let projected = if alpha[i] <= 0.0 {
                gradient.min(0.0)
            } else if alpha[i] >= options.c {
                gradient.max(0.0)
            } else {
                gradient
            };
            if projected.abs() < 1e-14 {
                continue;
            }
            let updated = (alpha[i] - gradient / q_diag[i]).clamp(0.0, options.c);
            let delta = updated - alpha[i];
            if delta == 0.0 {
                continue;
            }
            alpha[i] = updated;
            let step = delta * y[i];
            for (&k, &v) in xi.indices.iter().zip(&xi.values) {
                weights[k] += step * v;
            }
            bias += step;
        }

        let norm_sq = weights.iter().map(|w| w * w).sum::<f64>() + bias * bias;
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm_sq;
        dual_history.push(dual);
        let primal = svm_primal_objective(x, &y, &weights, bias, options.c);
        if primal - dual <= options.dual_gap_tolerance {
            converged = true;
            break;
        }
    }

    Ok(SvmTrained { weights, bias, dual_history, converged })
}
