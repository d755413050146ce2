//! Mini-batch training of the linear encoder.
//!
//! Each step assembles a batch, scores it, evaluates the configured loss and back-propagates
//! through the inner product and the linear map. Gradients of `grad_accumulation` consecutive
//! steps are averaged before one Adam update. The learning rate ramps linearly over the first
//! `warmup_ratio` of updates (update `u` of `w` warm-up updates uses `lr * u / w`) and stays
//! constant afterwards.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{backward, encode_batch, ParamGrad};
use super::params::{EncoderParams, DEFAULT_DIM};
use super::features::DEFAULT_BUCKET_BITS;
use crate::error::{Error, Result};
use crate::losses::{Loss, LossKind, DEFAULT_APPROX_NDCG_TEMPERATURE, DEFAULT_INFONCE_TEMPERATURE};
use crate::ranking::{
    assemble_batch, binarize_context, expand_for_infonce, validate_context, RankingContext,
    TrainingBatch, DEFAULT_POSITIVE_GRADES,
};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_ratio: f64,
    pub grad_accumulation: usize,
    pub seed: u64,
    pub in_batch_expansion: bool,
    pub binarize: bool,
    pub infonce_temperature: f64,
    pub approx_ndcg_temperature: f64,
    pub bucket_bits: u32,
    pub dim: usize,
    pub bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Wasserstein,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 1,
            warmup_ratio: 0.05,
            grad_accumulation: 4,
            seed: 0,
            in_batch_expansion: true,
            binarize: false,
            infonce_temperature: DEFAULT_INFONCE_TEMPERATURE,
            approx_ndcg_temperature: DEFAULT_APPROX_NDCG_TEMPERATURE,
            bucket_bits: DEFAULT_BUCKET_BITS,
            dim: DEFAULT_DIM,
            bias: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be finite and non-negative", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be ≥ 1".into());
        }
        if self.loss == LossKind::Wasserstein && self.batch_size < 2 {
            return bad("batch size must be ≥ 2 for the wasserstein loss".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1".into());
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad(format!("warmup ratio {} outside [0, 1)", self.warmup_ratio));
        }
        if self.grad_accumulation == 0 {
            return bad("gradient accumulation steps must be ≥ 1".into());
        }
        if !(self.infonce_temperature > 0.0) || !(self.approx_ndcg_temperature > 0.0) {
            return bad("temperatures must be positive".into());
        }
        Ok(())
    }

    pub fn loss_fn(&self) -> Loss {
        Loss::new(self.loss, self.infonce_temperature, self.approx_ndcg_temperature)
    }

    /// Grades counted as positive once labels have been prepared.
    pub fn positive_grades(&self) -> Vec<u8> {
        if self.binarize {
            vec![1]
        } else {
            DEFAULT_POSITIVE_GRADES.to_vec()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub history: Vec<StepRecord>,
    /// Rows the trainer iterates over: contexts, or InfoNCE instances.
    pub units: usize,
    pub updates: usize,
}

/// Turns raw contexts into the rows the trainer batches: binarised if configured, and split
/// into single-positive instances for InfoNCE.
pub fn prepare_units(config: &TrainConfig, contexts: &[RankingContext]) -> Result<Vec<RankingContext>> {
    let mut units = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        if let Some(v) = validate_context(ctx).first() {
            return Err(Error::invalid(format!("context {:?}: {v}", ctx.query.id)));
        }
        let ctx = if config.binarize {
            binarize_context(ctx, &DEFAULT_POSITIVE_GRADES).context
        } else {
            ctx.clone()
        };
        if config.loss == LossKind::InfoNce {
            units.extend(
                expand_for_infonce(&ctx, &config.positive_grades())
                    .iter()
                    .map(|inst| inst.to_context()),
            );
        } else {
            units.push(ctx);
        }
    }
    Ok(units)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
        }
    }
}

/// Loss and parameter gradient for one batch.
pub fn batch_loss_and_grad(params: &EncoderParams, batch: &TrainingBatch, loss: &Loss) -> Result<(f64, ParamGrad)> {
    let encoding = encode_batch(params, batch)?;
    let lg = loss.loss_grad(&batch.labels, &encoding.scores)?;
    let grad = backward(params, &encoding, batch, &lg.grad)?;
    Ok((lg.value, grad))
}

fn batches_per_epoch(config: &TrainConfig, units: usize) -> usize {
    let full = units / config.batch_size;
    let rest = units % config.batch_size;
    // a trailing single row cannot form a Wasserstein batch
    full + usize::from(rest > 0 && !(config.loss == LossKind::Wasserstein && rest < 2))
}

pub fn train(config: &TrainConfig, contexts: &[RankingContext], initial: EncoderParams) -> Result<TrainOutcome> {
    config.validate()?;
    if contexts.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if initial.bucket_bits() != config.bucket_bits || initial.dim() != config.dim {
        return Err(Error::Config(format!(
            "initial params are 2^{} x {}, config asks for 2^{} x {}",
            initial.bucket_bits(),
            initial.dim(),
            config.bucket_bits,
            config.dim
        )));
    }
    let mut units = prepare_units(config, contexts)?;
    if units.is_empty() {
        return Err(Error::invalid("no training rows after label preparation"));
    }
    let per_epoch = batches_per_epoch(config, units.len());
    if per_epoch == 0 {
        return Err(Error::invalid("not enough rows for a single batch"));
    }
    let updates_per_epoch = per_epoch.div_ceil(config.grad_accumulation);
    let total_updates = updates_per_epoch * config.epochs;
    let warmup = (config.warmup_ratio * total_updates as f64).ceil() as usize;
    let loss = config.loss_fn();

    let mut params = initial;
    let n_weights = params.weights().len();
    let dim = params.dim();
    let mut opt_w = Adam::new(n_weights);
    let mut opt_b = Adam::new(dim);
    let mut acc_w = vec![0.0; n_weights];
    let mut acc_b = vec![0.0; dim];
    let mut touched: Vec<u32> = Vec::new();
    let mut pending = 0usize;
    let mut updates = 0usize;
    let mut history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for epoch in 0..config.epochs {
        units.shuffle(&mut rng);
        for (b, chunk) in units.chunks(config.batch_size).take(per_epoch).enumerate() {
            let batch = assemble_batch(chunk.to_vec(), config.in_batch_expansion)?;
            let step = history.len();
            let (value, grad) = batch_loss_and_grad(&params, &batch, &loss)?;
            if !value.is_finite() {
                return Err(Error::Diverged { step });
            }
            history.push(StepRecord { step, loss: value });
            for (row, g) in grad.rows {
                let base = row as usize * dim;
                for (a, v) in acc_w[base..base + dim].iter_mut().zip(&g) {
                    *a += v;
                }
                touched.push(row);
            }
            if let Some(gb) = grad.bias {
                for (a, v) in acc_b.iter_mut().zip(&gb) {
                    *a += v;
                }
            }
            pending += 1;
            let last_in_epoch = b + 1 == per_epoch;
            if pending == config.grad_accumulation || last_in_epoch {
                updates += 1;
                let lr = if warmup > 0 && updates <= warmup {
                    config.learning_rate * updates as f64 / warmup as f64
                } else {
                    config.learning_rate
                };
                let scale = 1.0 / pending as f64;
                acc_w.iter_mut().for_each(|a| *a *= scale);
                acc_b.iter_mut().for_each(|a| *a *= scale);
                opt_w.step(params.weights_mut(), &acc_w, lr);
                if let Some(bias) = params.bias_mut() {
                    opt_b.step(bias, &acc_b, lr);
                }
                for row in touched.drain(..) {
                    let base = row as usize * dim;
                    acc_w[base..base + dim].iter_mut().for_each(|a| *a = 0.0);
                }
                acc_b.iter_mut().for_each(|a| *a = 0.0);
                pending = 0;
                debug!("epoch {epoch} update {updates}/{total_updates} lr {lr:.3e} loss {value:.6}");
            }
        }
    }
    Ok(TrainOutcome {
        params,
        history,
        units: units.len(),
        updates,
    })
}
