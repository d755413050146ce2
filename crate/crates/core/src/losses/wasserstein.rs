//! Closed-form 2-Wasserstein distance between Gaussian fits of two matrices.
//!
//! Rows are samples and columns are dimensions. For label matrix `H` and score matrix `S`
//! of shape `(n, m)`:
//!
//! ```text
//! D(H, S) = |mu_H - mu_S|^2 + tr(C_H) + tr(C_S) - 2 tr((C_H C_S)^{1/2})
//! ```
//!
//! The cross term never forms an `m x m` square root. With centred `H~`, `S~` it equals
//! `|H~ S~^T|_* / (n - 1)`, the nuclear norm of an `n x n` matrix, whose subgradient is
//! `U V^T` from the SVD.

use nalgebra::{DMatrix, DVector};

use super::{check_finite, LossValueGrad};
use crate::error::{Error, Result};
use crate::linalg::jacobi_svd;

/// Singular values below this fraction of the largest one count as zero.
pub const SINGULAR_VALUE_CLAMP: f64 = 1e-9;

/// Kept singular values closer than this ratio to the largest are reported as near-degenerate.
const NEAR_DEGENERATE_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Column means and sample covariance (divisor `n - 1`) of an `n x m` matrix.
pub fn gaussian_stats(samples: &DMatrix<f64>) -> Result<GaussianStats> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::invalid("covariance requires at least 2 rows"));
    }
    let mean = column_means(samples);
    let centered = center(samples, &mean);
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    // the product is symmetric up to rounding; make it exact
    let sym = (&cov + cov.transpose()) * 0.5;
    cov.copy_from(&sym);
    Ok(GaussianStats { mean, cov })
}

pub(crate) fn column_means(samples: &DMatrix<f64>) -> DVector<f64> {
    let n = samples.nrows() as f64;
    DVector::from_iterator(
        samples.ncols(),
        samples.column_iter().map(|c| c.iter().sum::<f64>() / n),
    )
}

pub(crate) fn center(samples: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = samples.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    out
}

/// How the nuclear-norm SVD was truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdDiagnostics {
    /// Singular values kept above the clamp.
    pub kept: usize,
    /// Singular values set to zero by the clamp.
    pub clamped: usize,
    /// Smallest kept singular value over the largest; 1 when nothing was kept.
    pub min_kept_ratio: f64,
    /// Numerical rank of the centred label matrix.
    pub label_rank: usize,
}

impl SvdDiagnostics {
    /// True when the cross term is not differentiable in the scores, or is close enough to a
    /// kink that a finite-difference step can cross it.
    pub fn is_degenerate(&self) -> bool {
        self.kept != self.label_rank || self.min_kept_ratio < NEAR_DEGENERATE_RATIO
    }
}

struct NuclearNorm {
    value: f64,
    /// `U_k V_k^T` over kept singular directions.
    subgradient: DMatrix<f64>,
    kept: usize,
    clamped: usize,
    min_kept_ratio: f64,
}

fn nuclear_norm(m: &DMatrix<f64>) -> NuclearNorm {
    let svd = jacobi_svd(m);
    let largest = svd.largest();
    let cutoff = largest * SINGULAR_VALUE_CLAMP;
    let mut value = 0.0;
    let mut subgradient = DMatrix::zeros(m.nrows(), m.ncols());
    let mut kept = 0;
    let mut smallest = largest;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if largest > 0.0 && s > cutoff {
            value += s;
            kept += 1;
            smallest = smallest.min(s);
            subgradient += svd.u.column(k) * svd.v.column(k).transpose();
        }
    }
    NuclearNorm {
        value,
        subgradient,
        kept,
        clamped: svd.singular_values.len() - kept,
        min_kept_ratio: if kept == 0 { 1.0 } else { smallest / largest },
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let svd = jacobi_svd(m);
    let largest = svd.largest();
    if largest == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > largest * SINGULAR_VALUE_CLAMP)
        .count()
}

/// `tr((C_x C_y)^{1/2})` from centred samples, via the nuclear norm of `Xc Yc^T`.
pub fn trace_sqrt_cross(xc: &DMatrix<f64>, yc: &DMatrix<f64>) -> Result<f64> {
    if xc.shape() != yc.shape() {
        return Err(Error::shape(format!(
            "trace_sqrt_cross: {:?} vs {:?}",
            xc.shape(),
            yc.shape()
        )));
    }
    let n = xc.nrows();
    if n < 2 {
        return Err(Error::invalid("covariance requires at least 2 rows"));
    }
    Ok(nuclear_norm(&(xc * yc.transpose())).value / (n as f64 - 1.0))
}

/// Wasserstein loss of scores `S` against labels `H`, with `dD/dS`.
pub fn wasserstein_loss_grad(labels: &DMatrix<f64>, scores: &DMatrix<f64>) -> Result<LossValueGrad> {
    wasserstein_with_diagnostics(labels, scores).map(|(loss, _)| loss)
}

pub fn wasserstein_with_diagnostics(
    labels: &DMatrix<f64>,
    scores: &DMatrix<f64>,
) -> Result<(LossValueGrad, SvdDiagnostics)> {
    if labels.shape() != scores.shape() {
        return Err(Error::shape(format!(
            "labels {:?} vs scores {:?}",
            labels.shape(),
            scores.shape()
        )));
    }
    let n = labels.nrows();
    if n < 2 {
        return Err(Error::invalid(
            "wasserstein loss needs a batch of at least 2 rows",
        ));
    }
    check_finite("labels", labels.iter())?;
    check_finite("scores", scores.iter())?;

    let denom = n as f64 - 1.0;
    let mu_h = column_means(labels);
    let mu_s = column_means(scores);
    let hc = center(labels, &mu_h);
    let sc = center(scores, &mu_s);

    let mean_diff = &mu_s - &mu_h;
    let mean_term = mean_diff.norm_squared();
    let trace_h = hc.norm_squared() / denom;
    let trace_s = sc.norm_squared() / denom;
    let cross = nuclear_norm(&(&hc * sc.transpose()));
    let value = mean_term + trace_h + trace_s - 2.0 * cross.value / denom;

    // d tr(C_S) / dS = 2 S~ / (n-1); d |H~ S~^T|_* / dS~ = V U^T H~
    let mut grad = (&sc - (cross.subgradient.transpose() * &hc)) * (2.0 / denom);
    // project onto zero column means (chain rule through centring)
    let grad_means = column_means(&grad);
    grad = center(&grad, &grad_means);
    for mut row in grad.row_iter_mut() {
        row += (&mean_diff * (2.0 / n as f64)).transpose();
    }

    let diagnostics = SvdDiagnostics {
        kept: cross.kept,
        clamped: cross.clamped,
        min_kept_ratio: cross.min_kept_ratio,
        label_rank: numerical_rank(&hc),
    };
    Ok((LossValueGrad { value, grad }, diagnostics))
}
