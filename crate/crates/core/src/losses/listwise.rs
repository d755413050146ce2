//! Per-query losses over one score vector.

use super::{check_finite, RowLossValueGrad};
use crate::error::{Error, Result};

/// Stable log-softmax of `x / temperature`.
pub fn log_softmax(x: &[f64], temperature: f64) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = x.iter().map(|v| (v - max) / temperature).collect();
    let log_sum = shifted.iter().map(|v| v.exp()).sum::<f64>().ln();
    shifted.into_iter().map(|v| v - log_sum).collect()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    log_softmax(x, 1.0).into_iter().map(f64::exp).collect()
}

/// Shannon entropy (natural log) of `softmax(y)`.
pub fn softmax_entropy(y: &[f64]) -> f64 {
    log_softmax(y, 1.0)
        .into_iter()
        .map(|lp| {
            let p = lp.exp();
            if p > 0.0 {
                -p * lp
            } else {
                0.0
            }
        })
        .sum()
}

fn check_pair(labels: &[f64], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::shape(format!(
            "{} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.len() < 2 {
        return Err(Error::invalid("list-wise loss needs at least 2 entries"));
    }
    check_finite("labels", labels.iter())?;
    check_finite("scores", scores.iter())
}

/// `-log softmax(s / tau)[positive]`.
pub fn infonce_loss_grad(positive: usize, scores: &[f64], temperature: f64) -> Result<RowLossValueGrad> {
    if scores.len() < 2 {
        return Err(Error::invalid("InfoNCE needs at least 2 entries"));
    }
    if positive >= scores.len() {
        return Err(Error::invalid(format!(
            "positive index {positive} out of range for {} scores",
            scores.len()
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    check_finite("scores", scores.iter())?;
    let log_p = log_softmax(scores, temperature);
    let grad = log_p
        .iter()
        .enumerate()
        .map(|(j, lp)| (lp.exp() - f64::from(u8::from(j == positive))) / temperature)
        .collect();
    Ok(RowLossValueGrad {
        value: -log_p[positive],
        grad,
    })
}

/// `KL(softmax(y) || softmax(s))`.
pub fn kl_loss_grad(labels: &[f64], scores: &[f64]) -> Result<RowLossValueGrad> {
    check_pair(labels, scores)?;
    let log_p = log_softmax(labels, 1.0);
    let log_q = log_softmax(scores, 1.0);
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (lp, lq) in log_p.iter().zip(&log_q) {
        let p = lp.exp();
        if p > 0.0 {
            value += p * (lp - lq);
        }
        grad.push(lq.exp() - p);
    }
    Ok(RowLossValueGrad { value, grad })
}

/// Top-one cross entropy `-sum softmax(y) * log softmax(s)`.
pub fn listnet_loss_grad(labels: &[f64], scores: &[f64]) -> Result<RowLossValueGrad> {
    check_pair(labels, scores)?;
    let log_p = log_softmax(labels, 1.0);
    let log_q = log_softmax(scores, 1.0);
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (lp, lq) in log_p.iter().zip(&log_q) {
        let p = lp.exp();
        value -= p * lq;
        grad.push(lq.exp() - p);
    }
    Ok(RowLossValueGrad { value, grad })
}

/// `ln(1 + e^{-x})` without overflow.
fn softplus_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean pairwise logistic loss over ordered pairs with `y_i > y_j`.
pub fn ranknet_loss_grad(labels: &[f64], scores: &[f64]) -> Result<RowLossValueGrad> {
    check_pair(labels, scores)?;
    let m = scores.len();
    let mut grad = vec![0.0; m];
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in 0..m {
            if labels[i] > labels[j] {
                let margin = scores[i] - scores[j];
                total += softplus_neg(margin);
                // d/dmargin ln(1 + e^{-margin}) = -sigmoid(-margin)
                let g = -sigmoid(-margin);
                grad[i] += g;
                grad[j] -= g;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Ok(RowLossValueGrad { value: 0.0, grad });
    }
    let scale = 1.0 / pairs as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(RowLossValueGrad {
        value: total * scale,
        grad,
    })
}

/// Ideal DCG with exponential gains over every label in the row.
pub(crate) fn ideal_dcg(labels: &[f64]) -> f64 {
    let mut sorted = labels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .iter()
        .enumerate()
        .map(|(r, &y)| (y.exp2() - 1.0) / ((r + 2) as f64).log2())
        .sum()
}

/// Negative smooth nDCG with sigmoid-relaxed ranks.
pub fn approx_ndcg_loss_grad(labels: &[f64], scores: &[f64], temperature: f64) -> Result<RowLossValueGrad> {
    check_pair(labels, scores)?;
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let idcg = ideal_dcg(labels);
    if !(idcg > 0.0) {
        return Err(Error::invalid("undefined IDCG: all labels are zero"));
    }
    let m = scores.len();
    // ranks[i] = 1 + sum_{j != i} sigmoid((s_j - s_i) / tau)
    let mut ranks = vec![1.0; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                ranks[i] += sigmoid((scores[j] - scores[i]) / temperature);
            }
        }
    }
    let ln2 = std::f64::consts::LN_2;
    let mut value = 0.0;
    let mut d_rank = vec![0.0; m];
    for i in 0..m {
        let gain = labels[i].exp2() - 1.0;
        let log_term = (1.0 + ranks[i]).ln();
        value -= gain * ln2 / log_term / idcg;
        // d/dr [-(g ln2) / (idcg ln(1+r))] = g ln2 / (idcg (1+r) ln(1+r)^2)
        d_rank[i] = gain * ln2 / (idcg * (1.0 + ranks[i]) * log_term * log_term);
    }
    let mut grad = vec![0.0; m];
    for i in 0..m {
        if d_rank[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            if i == j {
                continue;
            }
            let sig = sigmoid((scores[j] - scores[i]) / temperature);
            let dsig = sig * (1.0 - sig) / temperature;
            grad[j] += d_rank[i] * dsig;
            grad[i] -= d_rank[i] * dsig;
        }
    }
    Ok(RowLossValueGrad { value, grad })
}
