//! Hashed-feature dual encoder and its training loop.

mod features;
mod model;
mod params;
mod train;

pub use features::{featurize, hash_token, tokenize, FeatureVector, DEFAULT_BUCKET_BITS, HASH_SEED, MAX_BUCKET_BITS};
pub use model::{backward, encode, encode_batch, encode_text, forward_scores, similarity, BatchEncoding, ParamGrad};
pub use params::{load_params, save_params, EncoderParams, DEFAULT_DIM, FORMAT_VERSION, MAGIC};
pub use train::{
    batch_loss_and_grad, prepare_units, train, StepRecord, TrainConfig, TrainOutcome, ADAM_BETA1,
    ADAM_BETA2, ADAM_EPSILON,
};
