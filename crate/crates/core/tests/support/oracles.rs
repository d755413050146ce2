//! Independent reference implementations and randomized checks shared by test targets.
//!
//! Each `check_*` function returns a short summary on success and a description of the first
//! mismatch on failure, so callers can either assert or report.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use gradrank_core::encoder::{batch_loss_and_grad, EncoderParams};
use gradrank_core::losses::{
    gaussian_stats, kl_loss_grad, listnet_loss_grad, softmax_entropy, wasserstein_loss_grad,
    wasserstein_with_diagnostics, Loss, LossKind,
};
use gradrank_core::metrics::{mrr_at_k, ndcg_at_k, recall_at_k, Gain, MetricReport, RunRanking};
use gradrank_core::ranking::{assemble_batch, Passage, Qrels, Query, RankingContext};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check<T = String> = Result<T, String>;

// ---------------------------------------------------------------------------------------------
// Wasserstein

/// Eigenvalues below this fraction of the largest are rounding noise of a rank-deficient matrix.
const EIGEN_CLAMP: f64 = 1e-11;

pub const WASSERSTEIN_TOLERANCE: f64 = 1e-8;

fn psd_sqrt(c: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(c.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let roots = eig
        .eigenvalues
        .map(|l| if l > top * EIGEN_CLAMP { l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `|mu_x - mu_y|^2 + tr C_x + tr C_y - 2 tr (C_x^{1/2} C_y C_x^{1/2})^{1/2}`.
pub fn eigen_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let sx = gaussian_stats(x).unwrap();
    let sy = gaussian_stats(y).unwrap();
    let root = psd_sqrt(&sx.cov);
    let mut inner = &root * &sy.cov * &root;
    inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cross: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > top * EIGEN_CLAMP)
        .map(|l| l.sqrt())
        .sum();
    (&sx.mean - &sy.mean).norm_squared() + sx.cov.trace() + sy.cov.trace() - 2.0 * cross
}

/// Scale of the terms that cancel in `D`, used to make tolerances relative.
pub fn magnitude(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let sx = gaussian_stats(x).unwrap();
    let sy = gaussian_stats(y).unwrap();
    1.0 + (&sx.mean - &sy.mean).norm_squared() + sx.cov.trace() + sy.cov.trace()
}

/// Integer grades against uniform scores, `b` in 2..=8 and `m` in 1..=12.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = rng.random_range(2..=8);
    let m = rng.random_range(1..=12);
    let h = DMatrix::from_fn(b, m, |_, _| f64::from(rng.random_range(0u8..=3)));
    let s = DMatrix::from_fn(b, m, |_, _| rng.random_range(-3.0..3.0));
    (h, s)
}

fn d(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    wasserstein_loss_grad(a, b).unwrap().value
}

pub fn check_wasserstein_oracle(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (h, s) = random_pair(&mut rng);
        let got = d(&h, &s);
        let want = eigen_oracle(&h, &s);
        let rel = (got - want).abs() / magnitude(&h, &s);
        worst = worst.max(rel);
        if rel > WASSERSTEIN_TOLERANCE {
            return Err(format!("case {case}: {got} vs oracle {want}"));
        }
    }
    Ok(format!("{cases} pairs, worst relative gap {worst:.1e}"))
}

pub fn check_wasserstein_properties(seed: u64, cases: usize) -> Check {
    let tol = WASSERSTEIN_TOLERANCE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (h, s) = random_pair(&mut rng);
        let scale = magnitude(&h, &s);
        let dhs = d(&h, &s);
        if d(&h, &h).abs() > tol * scale {
            return Err(format!("case {case}: D(H,H) = {}", d(&h, &h)));
        }
        if (dhs - d(&s, &h)).abs() > tol * scale {
            return Err(format!("case {case}: asymmetric"));
        }
        let c: f64 = rng.random_range(0.1..3.0);
        if (d(&(&h * c), &(&s * c)) - c * c * dhs).abs() > tol * c * c * scale {
            return Err(format!("case {case}: not degree-2 homogeneous"));
        }
        let shift = DMatrix::from_fn(1, h.ncols(), |_, _| rng.random_range(-5.0..5.0));
        let moved = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] + shift[(0, j)]);
        if (d(&moved(&h), &moved(&s)) - dhs).abs() > tol * scale {
            return Err(format!("case {case}: not translation invariant"));
        }
    }
    Ok(format!("{cases} pairs: identity, symmetry, homogeneity, translation"))
}

// ---------------------------------------------------------------------------------------------
// Gradients

pub const FD_STEP: f64 = 1e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Relative error with a floor so entries that are zero analytically compare absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

fn random_labels(rng: &mut ChaCha8Rng, kind: LossKind, b: usize, m: usize) -> DMatrix<f64> {
    let mut h = DMatrix::from_fn(b, m, |_, _| f64::from(rng.random_range(0u8..=3)));
    for i in 0..b {
        match kind {
            LossKind::InfoNce => {
                let p = rng.random_range(0..m);
                for j in 0..m {
                    h[(i, j)] = f64::from(u8::from(j == p));
                }
            }
            // an all-zero row has no ideal DCG
            LossKind::ApproxNdcg if h.row(i).iter().all(|&y| y == 0.0) => {
                h[(i, rng.random_range(0..m))] = f64::from(rng.random_range(1u8..=3));
            }
            _ => {}
        }
    }
    h
}

/// Central differences on `instances` random score matrices. Returns the degenerate
/// Wasserstein draws that were skipped.
pub fn check_loss_gradient(kind: LossKind, seed: u64, instances: usize) -> Check<usize> {
    let loss = Loss::with_defaults(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut skipped = 0;
    while checked < instances {
        let b = rng.random_range(2..=6);
        let m = rng.random_range(if kind == LossKind::Wasserstein { 1 } else { 2 }..=6);
        let h = random_labels(&mut rng, kind, b, m);
        let s = DMatrix::from_fn(b, m, |_, _| rng.random_range(-2.0..2.0));
        if kind == LossKind::Wasserstein {
            let (_, diag) = wasserstein_with_diagnostics(&h, &s).unwrap();
            if diag.is_degenerate() {
                skipped += 1;
                continue;
            }
        }
        let analytic = loss.loss_grad(&h, &s).unwrap().grad;
        for i in 0..b {
            for j in 0..m {
                let mut plus = s.clone();
                plus[(i, j)] += FD_STEP;
                let mut minus = s.clone();
                minus[(i, j)] -= FD_STEP;
                let numeric = (loss.loss_grad(&h, &plus).unwrap().value
                    - loss.loss_grad(&h, &minus).unwrap().value)
                    / (2.0 * FD_STEP);
                if rel_err(analytic[(i, j)], numeric) > GRADIENT_TOLERANCE {
                    return Err(format!(
                        "{kind} instance {checked} entry ({i},{j}): analytic {} numeric {numeric}",
                        analytic[(i, j)]
                    ));
                }
            }
        }
        checked += 1;
    }
    Ok(skipped)
}

fn tiny_batch_contexts() -> Vec<RankingContext> {
    let ctx = |q: &str, qt: &str, pos: &str, neg: &str| {
        RankingContext::from_graded(
            Query::new(q, qt),
            [
                (Passage::synthetic(format!("{q}-p"), pos), 3),
                (Passage::synthetic(format!("{q}-n"), neg), 0),
            ],
        )
        .unwrap()
    };
    vec![
        ctx("a", "red fox jumps", "red fox", "lazy dog sleeps"),
        ctx("b", "blue whale sings", "whale song blue", "red dog"),
    ]
}

/// Every weight and bias entry through featurize, encode, score and loss (b=2, c=2, d=2, k=3).
pub fn check_parameter_gradient(kind: LossKind, tolerance: f64) -> Check<()> {
    let loss = Loss::with_defaults(kind);
    let batch = assemble_batch(tiny_batch_contexts(), true).unwrap();
    let mut params = EncoderParams::random(3, 2, true, 41).unwrap();
    // a non-zero bias keeps its gradient away from a symmetric point
    params.bias_mut().unwrap().copy_from_slice(&[0.3, -0.2]);
    let (_, grad) = batch_loss_and_grad(&params, &batch, &loss).unwrap();
    let eval = |p: &EncoderParams| batch_loss_and_grad(p, &batch, &loss).unwrap().0;

    for idx in 0..params.weights().len() {
        let orig = params.weights()[idx];
        params.weights_mut()[idx] = orig + FD_STEP;
        let up = eval(&params);
        params.weights_mut()[idx] = orig - FD_STEP;
        let down = eval(&params);
        params.weights_mut()[idx] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = grad.weight((idx / 2) as u32, idx % 2);
        if rel_err(analytic, numeric) > tolerance {
            return Err(format!("{kind} weight {idx}: analytic {analytic} numeric {numeric}"));
        }
    }
    let analytic_bias = grad.bias.clone().unwrap();
    for k in 0..2 {
        let orig = params.bias().unwrap()[k];
        params.bias_mut().unwrap()[k] = orig + FD_STEP;
        let up = eval(&params);
        params.bias_mut().unwrap()[k] = orig - FD_STEP;
        let down = eval(&params);
        params.bias_mut().unwrap()[k] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        if rel_err(analytic_bias[k], numeric) > tolerance {
            return Err(format!("{kind} bias {k}: analytic {} numeric {numeric}", analytic_bias[k]));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// KL and ListNet

pub fn check_kl_listnet(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_gap, mut worst_grad): (f64, f64) = (0.0, 0.0);
    for case in 0..cases {
        let m = rng.random_range(2..=10);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let kl = kl_loss_grad(&y, &s).unwrap();
        let ln = listnet_loss_grad(&y, &s).unwrap();
        let gap = (ln.value - kl.value - softmax_entropy(&y)).abs();
        worst_gap = worst_gap.max(gap);
        if gap > 1e-10 {
            return Err(format!("case {case}: value gap {gap}"));
        }
        for (a, b) in kl.grad.iter().zip(&ln.grad) {
            worst_grad = worst_grad.max((a - b).abs());
            if (a - b).abs() > 1e-12 {
                return Err(format!("case {case}: gradient {a} vs {b}"));
            }
        }
    }
    Ok(format!("{cases} cases, worst value gap {worst_gap:.1e}, worst gradient gap {worst_grad:.1e}"))
}

// ---------------------------------------------------------------------------------------------
// Metrics

pub struct MetricInstance {
    /// `(doc id, score)` in generation order, ids unique.
    pub docs: Vec<(String, f64)>,
    pub judged: BTreeMap<String, u32>,
    pub k: usize,
    pub threshold: u32,
}

pub fn random_metric_instance(rng: &mut ChaCha8Rng) -> MetricInstance {
    let n = rng.random_range(1..=10);
    // coarse scores so that ties are common
    let mut docs: Vec<(String, f64)> = (0..n)
        .map(|i| (format!("d{:02}", rng.random_range(0..40) * 10 + i), f64::from(rng.random_range(-3i32..=3)) * 0.5))
        .collect();
    let mut judged = BTreeMap::new();
    for (id, _) in &docs {
        if rng.random_bool(0.8) {
            judged.insert(id.clone(), rng.random_range(0u32..=3));
        }
    }
    // judged documents the run never retrieved
    for extra in 0..rng.random_range(0..3) {
        judged.insert(format!("x{extra}"), rng.random_range(0u32..=3));
    }
    let mut seen = HashSet::new();
    docs.retain(|(id, _)| seen.insert(id.clone()));
    MetricInstance {
        docs,
        judged,
        k: rng.random_range(1..=12),
        threshold: rng.random_range(1..=3),
    }
}

/// Selection-style ordering by `(score desc, id asc)`, independent of the library sort.
fn oracle_order(docs: &[(String, f64)]) -> Vec<String> {
    let mut left: Vec<(String, f64)> = docs.to_vec();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for i in 1..left.len() {
            let (ref id, s) = left[i];
            let (ref bid, bs) = left[best];
            if s > bs || (s == bs && id < bid) {
                best = i;
            }
        }
        out.push(left.remove(best).0);
    }
    out
}

fn oracle_gain(g: u32, gain: Gain) -> f64 {
    match gain {
        Gain::Exponential => 2f64.powi(g as i32) - 1.0,
        Gain::Linear => f64::from(g),
    }
}

pub fn oracle_ndcg(inst: &MetricInstance, gain: Gain) -> Option<f64> {
    let order = oracle_order(&inst.docs);
    let mut dcg = 0.0;
    for (r, id) in order.iter().take(inst.k).enumerate() {
        let g = inst.judged.get(id).copied().unwrap_or(0);
        dcg += oracle_gain(g, gain) / (r as f64 + 2.0).log2();
    }
    let mut ideal: Vec<u32> = inst.judged.values().copied().collect();
    ideal.sort();
    ideal.reverse();
    let mut idcg = 0.0;
    for (r, g) in ideal.into_iter().take(inst.k).enumerate() {
        idcg += oracle_gain(g, gain) / (r as f64 + 2.0).log2();
    }
    (idcg > 0.0).then(|| dcg / idcg)
}

pub fn oracle_mrr(inst: &MetricInstance) -> Option<f64> {
    if !inst.judged.values().any(|&g| g >= inst.threshold) {
        return None;
    }
    let order = oracle_order(&inst.docs);
    for (r, id) in order.iter().take(inst.k).enumerate() {
        if inst.judged.get(id).copied().unwrap_or(0) >= inst.threshold {
            return Some(1.0 / (r as f64 + 1.0));
        }
    }
    Some(0.0)
}

pub fn oracle_recall(inst: &MetricInstance) -> Option<f64> {
    let relevant = inst.judged.values().filter(|&&g| g >= inst.threshold).count();
    if relevant == 0 {
        return None;
    }
    let order = oracle_order(&inst.docs);
    let hit = order
        .iter()
        .take(inst.k)
        .filter(|id| inst.judged.get(*id).copied().unwrap_or(0) >= inst.threshold)
        .count();
    Some(hit as f64 / relevant as f64)
}

pub fn wrap_instance(inst: &MetricInstance) -> (RunRanking, Qrels) {
    let mut run = RunRanking::new();
    run.insert("q", inst.docs.clone()).unwrap();
    let mut qrels = Qrels::new();
    for (id, &g) in &inst.judged {
        qrels.insert("q", id, g).unwrap();
    }
    (run, qrels)
}

fn compare(got: &MetricReport, want: Option<f64>, what: &str, case: usize) -> Check<()> {
    match want {
        Some(v) => {
            let value = got.per_query.get("q").copied();
            match value {
                Some(g) if got.skipped == 0 && (g - v).abs() <= 1e-12 => Ok(()),
                _ => Err(format!("{what} case {case}: {value:?} vs oracle {v}")),
            }
        }
        None if got.skipped == 1 && got.per_query.is_empty() => Ok(()),
        None => Err(format!("{what} case {case}: expected the query to be skipped")),
    }
}

pub fn check_metric_oracles(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let inst = random_metric_instance(&mut rng);
        let (run, qrels) = wrap_instance(&inst);
        for gain in [Gain::Exponential, Gain::Linear] {
            compare(&ndcg_at_k(&run, &qrels, inst.k, gain).unwrap(), oracle_ndcg(&inst, gain), "ndcg", case)?;
        }
        compare(&mrr_at_k(&run, &qrels, inst.k, inst.threshold).unwrap(), oracle_mrr(&inst), "mrr", case)?;
        compare(&recall_at_k(&run, &qrels, inst.k, inst.threshold).unwrap(), oracle_recall(&inst), "recall", case)?;
    }
    Ok(format!("{cases} instances x {{ndcg exp, ndcg linear, mrr, recall}} within 1e-12"))
}

/// Three documents judged 3, 1, 0, retrieved in the order 1, 3, 0.
pub fn worked_ndcg_example() -> (RunRanking, Qrels) {
    let mut qrels = Qrels::new();
    for (id, g) in [("d1", 3), ("d2", 1), ("d3", 0)] {
        qrels.insert("q", id, g).unwrap();
    }
    let mut run = RunRanking::new();
    run.insert("q", vec![("d2".into(), 3.0), ("d1".into(), 2.0), ("d3".into(), 1.0)]).unwrap();
    (run, qrels)
}

/// `(1 + 7 / log2 3) / (7 + 1 / log2 3)` evaluated directly.
pub fn worked_ndcg_closed_form() -> f64 {
    let log3 = 3f64.log2();
    (1.0 + 7.0 / log3) / (7.0 + 1.0 / log3)
}
