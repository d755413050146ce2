//! Linear dual encoder: `e = W^T x + b`, scores are inner products of embeddings.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::features::{featurize, FeatureVector};
use super::params::EncoderParams;
use crate::error::{Error, Result};
use crate::ranking::TrainingBatch;

pub fn encode(params: &EncoderParams, features: &FeatureVector) -> Result<Vec<f64>> {
    if features.bits() != params.bucket_bits() {
        return Err(Error::shape(format!(
            "features over 2^{} buckets, encoder expects 2^{}",
            features.bits(),
            params.bucket_bits()
        )));
    }
    let mut out = match params.bias() {
        Some(b) => b.to_vec(),
        None => vec![0.0; params.dim()],
    };
    for &(index, count) in features.entries() {
        let count = f64::from(count);
        for (o, w) in out.iter_mut().zip(params.weight_row(index as usize)) {
            *o += count * w;
        }
    }
    Ok(out)
}

pub fn encode_text(params: &EncoderParams, text: &str) -> Result<Vec<f64>> {
    encode(params, &featurize(text, params.bucket_bits())?)
}

pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("embedding lengths {} vs {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Featurized and encoded texts of one batch, reused by the backward pass.
pub struct BatchEncoding {
    query_features: Vec<FeatureVector>,
    query_embeddings: Vec<Vec<f64>>,
    /// Keyed by `(context, entry)`.
    passage_features: BTreeMap<(usize, usize), FeatureVector>,
    passage_embeddings: BTreeMap<(usize, usize), Vec<f64>>,
    pub scores: DMatrix<f64>,
}

pub fn encode_batch(params: &EncoderParams, batch: &TrainingBatch) -> Result<BatchEncoding> {
    let bits = params.bucket_bits();
    let mut query_features = Vec::with_capacity(batch.rows());
    let mut query_embeddings = Vec::with_capacity(batch.rows());
    for ctx in &batch.contexts {
        let fv = featurize(&ctx.query.text, bits)?;
        query_embeddings.push(encode(params, &fv)?);
        query_features.push(fv);
    }
    let mut passage_features = BTreeMap::new();
    let mut passage_embeddings = BTreeMap::new();
    let mut scores = DMatrix::zeros(batch.rows(), batch.cols());
    for (i, row) in batch.columns.iter().enumerate() {
        for (j, col) in row.iter().enumerate() {
            let key = (col.context, col.entry);
            let embedding = match passage_embeddings.entry(key) {
                Entry::Occupied(slot) => slot.into_mut(),
                Entry::Vacant(slot) => {
                    let text = &batch.contexts[col.context].entries[col.entry].passage.text;
                    let fv = featurize(text, bits)?;
                    let e = encode(params, &fv).map_err(|e| Error::invalid(format!("({i}, {j}): {e}")))?;
                    passage_features.insert(key, fv);
                    slot.insert(e)
                }
            };
            scores[(i, j)] = similarity(&query_embeddings[i], embedding)?;
        }
    }
    Ok(BatchEncoding {
        query_features,
        query_embeddings,
        passage_features,
        passage_embeddings,
        scores,
    })
}

/// Score matrix `S[i][j] = sim(encode(query_i), encode(passage_ij))`.
pub fn forward_scores(params: &EncoderParams, batch: &TrainingBatch) -> Result<DMatrix<f64>> {
    Ok(encode_batch(params, batch)?.scores)
}

/// Gradient of a loss with respect to encoder parameters, sparse over weight rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrad {
    pub rows: BTreeMap<u32, Vec<f64>>,
    pub bias: Option<Vec<f64>>,
}

impl ParamGrad {
    fn add_embedding_grad(&mut self, features: &FeatureVector, grad: &[f64], with_bias: bool) {
        for &(index, count) in features.entries() {
            let row = self.rows.entry(index).or_insert_with(|| vec![0.0; grad.len()]);
            let count = f64::from(count);
            for (r, g) in row.iter_mut().zip(grad) {
                *r += count * g;
            }
        }
        if with_bias {
            let bias = self.bias.get_or_insert_with(|| vec![0.0; grad.len()]);
            for (b, g) in bias.iter_mut().zip(grad) {
                *b += g;
            }
        }
    }

    /// Dense value of the gradient for weight `(bucket, dim)`.
    pub fn weight(&self, bucket: u32, dim: usize) -> f64 {
        self.rows.get(&bucket).map_or(0.0, |r| r[dim])
    }
}

/// Chain rule from `dL/dS` back to `dL/dW` (and `dL/db`).
pub fn backward(params: &EncoderParams, encoding: &BatchEncoding, batch: &TrainingBatch, score_grad: &DMatrix<f64>) -> Result<ParamGrad> {
    if score_grad.shape() != encoding.scores.shape() {
        return Err(Error::shape(format!(
            "score gradient {:?} vs scores {:?}",
            score_grad.shape(),
            encoding.scores.shape()
        )));
    }
    let dim = params.dim();
    let mut query_grads = vec![vec![0.0; dim]; batch.rows()];
    let mut passage_grads: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (i, row) in batch.columns.iter().enumerate() {
        let eq = &encoding.query_embeddings[i];
        for (j, col) in row.iter().enumerate() {
            let g = score_grad[(i, j)];
            if g == 0.0 {
                continue;
            }
            let key = (col.context, col.entry);
            let ep = &encoding.passage_embeddings[&key];
            for (qg, p) in query_grads[i].iter_mut().zip(ep) {
                *qg += g * p;
            }
            let pg = passage_grads.entry(key).or_insert_with(|| vec![0.0; dim]);
            for (pg, q) in pg.iter_mut().zip(eq) {
                *pg += g * q;
            }
        }
    }
    let with_bias = params.bias().is_some();
    let mut grad = ParamGrad::default();
    if with_bias {
        grad.bias = Some(vec![0.0; dim]);
    }
    for (fv, g) in encoding.query_features.iter().zip(&query_grads) {
        grad.add_embedding_grad(fv, g, with_bias);
    }
    for (key, g) in &passage_grads {
        grad.add_embedding_grad(&encoding.passage_features[key], g, with_bias);
    }
    Ok(grad)
}
