//! Loss functions over label matrix `H` and score matrix `S`, with analytic `dL/dS`.
//!
//! The Wasserstein loss compares whole batches. The others are per-query and are lifted to
//! batches by [`batch_reduce`], which averages rows.

mod listwise;
mod wasserstein;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use listwise::{
    approx_ndcg_loss_grad, infonce_loss_grad, kl_loss_grad, listnet_loss_grad, log_softmax,
    ranknet_loss_grad, softmax, softmax_entropy,
};
pub use wasserstein::{
    gaussian_stats, trace_sqrt_cross, wasserstein_loss_grad, wasserstein_with_diagnostics,
    GaussianStats, SvdDiagnostics, SINGULAR_VALUE_CLAMP,
};

pub const DEFAULT_INFONCE_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_APPROX_NDCG_TEMPERATURE: f64 = 0.1;

/// Loss value and gradient with respect to a score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    pub grad: DMatrix<f64>,
}

/// Loss value and gradient with respect to one query's score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RowLossValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

pub(crate) fn check_finite<'a>(what: &str, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for (i, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{what}[{i}] = {v}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Wasserstein,
    #[serde(rename = "infonce")]
    InfoNce,
    Kl,
    #[serde(rename = "listnet")]
    ListNet,
    #[serde(rename = "ranknet")]
    RankNet,
    ApproxNdcg,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Wasserstein,
        LossKind::InfoNce,
        LossKind::Kl,
        LossKind::ListNet,
        LossKind::RankNet,
        LossKind::ApproxNdcg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Wasserstein => "wasserstein",
            LossKind::InfoNce => "infonce",
            LossKind::Kl => "kl",
            LossKind::ListNet => "listnet",
            LossKind::RankNet => "ranknet",
            LossKind::ApproxNdcg => "approx_ndcg",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss {s:?}")))
    }
}

/// A per-query loss applied to one row of `(H, S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowLoss {
    /// The positive is the single column whose label is above zero.
    InfoNce { temperature: f64 },
    Kl,
    ListNet,
    RankNet,
    ApproxNdcg { temperature: f64 },
}

impl RowLoss {
    pub fn eval(&self, labels: &[f64], scores: &[f64]) -> Result<RowLossValueGrad> {
        match *self {
            RowLoss::InfoNce { temperature } => {
                let mut positives = labels.iter().enumerate().filter(|(_, &y)| y > 0.0);
                let positive = match (positives.next(), positives.next()) {
                    (Some((p, _)), None) => p,
                    _ => {
                        return Err(Error::invalid(
                            "InfoNCE row needs exactly one positive label",
                        ))
                    }
                };
                infonce_loss_grad(positive, scores, temperature)
            }
            RowLoss::Kl => kl_loss_grad(labels, scores),
            RowLoss::ListNet => listnet_loss_grad(labels, scores),
            RowLoss::RankNet => ranknet_loss_grad(labels, scores),
            RowLoss::ApproxNdcg { temperature } => approx_ndcg_loss_grad(labels, scores, temperature),
        }
    }
}

/// Mean of a per-query loss over rows; gradient rows scaled by `1/b`.
pub fn batch_reduce(loss: RowLoss, labels: &DMatrix<f64>, scores: &DMatrix<f64>) -> Result<LossValueGrad> {
    if labels.shape() != scores.shape() {
        return Err(Error::shape(format!(
            "labels {:?} vs scores {:?}",
            labels.shape(),
            scores.shape()
        )));
    }
    let b = labels.nrows();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut grad = DMatrix::zeros(b, labels.ncols());
    let mut total = 0.0;
    let scale = 1.0 / b as f64;
    for i in 0..b {
        let y: Vec<f64> = labels.row(i).iter().copied().collect();
        let s: Vec<f64> = scores.row(i).iter().copied().collect();
        let row = loss.eval(&y, &s).map_err(|e| Error::Row {
            row: i,
            source: Box::new(e),
        })?;
        total += row.value;
        for (j, g) in row.grad.into_iter().enumerate() {
            grad[(i, j)] = g * scale;
        }
    }
    Ok(LossValueGrad {
        value: total * scale,
        grad,
    })
}

/// A fully configured batch loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Wasserstein,
    Row(RowLoss),
}

impl Loss {
    pub fn new(kind: LossKind, infonce_temperature: f64, approx_ndcg_temperature: f64) -> Self {
        match kind {
            LossKind::Wasserstein => Loss::Wasserstein,
            LossKind::InfoNce => Loss::Row(RowLoss::InfoNce {
                temperature: infonce_temperature,
            }),
            LossKind::Kl => Loss::Row(RowLoss::Kl),
            LossKind::ListNet => Loss::Row(RowLoss::ListNet),
            LossKind::RankNet => Loss::Row(RowLoss::RankNet),
            LossKind::ApproxNdcg => Loss::Row(RowLoss::ApproxNdcg {
                temperature: approx_ndcg_temperature,
            }),
        }
    }

    pub fn with_defaults(kind: LossKind) -> Self {
        Self::new(kind, DEFAULT_INFONCE_TEMPERATURE, DEFAULT_APPROX_NDCG_TEMPERATURE)
    }

    pub fn loss_grad(&self, labels: &DMatrix<f64>, scores: &DMatrix<f64>) -> Result<LossValueGrad> {
        match self {
            Loss::Wasserstein => wasserstein_loss_grad(labels, scores),
            Loss::Row(row) => batch_reduce(*row, labels, scores),
        }
    }
}
