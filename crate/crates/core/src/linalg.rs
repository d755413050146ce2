//! One-sided Jacobi SVD.
//!
//! Columns of a working copy of `A` are orthogonalised by plane rotations, which are also
//! accumulated into `V`. At convergence the column norms are the singular values and the
//! normalised columns are `U`, so `A = U diag(s) V^T`. Small singular values keep high
//! relative accuracy, which the nuclear-norm clamp relies on.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 80;
const ORTHOGONALITY_TOL: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x cols`; columns with zero singular value are left at zero.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `cols x cols`, orthogonal.
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn largest(&self) -> f64 {
        self.singular_values.iter().copied().fold(0.0, f64::max)
    }
}

pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    let rows = a.nrows();
    let cols = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == 0.0 || gamma.abs() <= ORTHOGONALITY_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..cols {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut singular_values = DVector::zeros(cols);
    for j in 0..cols {
        let norm = w.column(j).norm();
        singular_values[j] = norm;
        if norm > 0.0 {
            w.column_mut(j).unscale_mut(norm);
        }
    }
    Svd {
        u: w,
        singular_values,
        v,
    }
}
