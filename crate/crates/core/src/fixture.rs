//! Deterministic synthetic ranking contexts with planted lexical overlap.
//!
//! Every query carries four topic tokens. Its grade 3, 2, 1 and 0 passages contain 4, 3, 1
//! and 0 of them; the remaining topic slots hold other topic tokens, and all texts are padded
//! with words from a small filler vocabulary shared by every text. Lexical overlap on topic
//! tokens is the only relevance signal. Filler words outnumber topic tokens, so a randomly
//! initialised encoder scores mostly noise until it learns to suppress them.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::TrainConfig;
use crate::error::Result;
use crate::losses::LossKind;
use crate::ranking::{Passage, Qrels, Query, RankingContext};

/// Planted topic tokens shared with the query, indexed by `3 - grade`.
pub const SHARED_TOKENS: [usize; 4] = [4, 3, 1, 0];
pub const TOPIC_TOKENS_PER_TEXT: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub seed: u64,
    pub train_contexts: usize,
    pub heldout_contexts: usize,
    pub topic_vocab: usize,
    pub filler_vocab: usize,
    pub query_filler: usize,
    pub passage_filler: usize,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            seed: 17,
            train_contexts: 200,
            heldout_contexts: 50,
            topic_vocab: 60,
            filler_vocab: 10,
            query_filler: 4,
            passage_filler: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub train: Vec<RankingContext>,
    pub heldout: Vec<RankingContext>,
}

impl Fixture {
    pub fn heldout_queries(&self) -> Vec<Query> {
        self.heldout.iter().map(|c| c.query.clone()).collect()
    }

    /// Every held-out passage, in context order.
    pub fn heldout_corpus(&self) -> Vec<Passage> {
        self.heldout
            .iter()
            .flat_map(|c| c.entries.iter().map(|e| e.passage.clone()))
            .collect()
    }

    pub fn heldout_qrels(&self) -> Result<Qrels> {
        Qrels::from_contexts(&self.heldout)
    }
}

fn topic(i: usize) -> String {
    format!("topic{i:03}")
}

fn filler(i: usize) -> String {
    format!("word{i:03}")
}

fn build_context(config: &FixtureConfig, rng: &mut ChaCha8Rng, qid: &str) -> Result<RankingContext> {
    let all_topics: Vec<usize> = (0..config.topic_vocab).collect();
    let mut picked: Vec<usize> = all_topics
        .choose_multiple(rng, TOPIC_TOKENS_PER_TEXT)
        .copied()
        .collect();
    picked.shuffle(rng);
    let others: Vec<usize> = all_topics.iter().copied().filter(|t| !picked.contains(t)).collect();

    let fill = |rng: &mut ChaCha8Rng, tokens: &mut Vec<String>, n: usize| {
        tokens.extend((0..n).map(|_| filler(rng.random_range(0..config.filler_vocab))));
        tokens.shuffle(rng);
        tokens.join(" ")
    };

    let mut query_tokens: Vec<String> = picked.iter().map(|&t| topic(t)).collect();
    let query_text = fill(rng, &mut query_tokens, config.query_filler);

    let mut passages = Vec::with_capacity(4);
    for (level, &shared) in SHARED_TOKENS.iter().enumerate() {
        let grade = 3 - level as u8;
        let mut tokens: Vec<String> = picked[..shared].iter().map(|&t| topic(t)).collect();
        tokens.extend(
            others
                .choose_multiple(rng, TOPIC_TOKENS_PER_TEXT - shared)
                .map(|&t| topic(t)),
        );
        let text = fill(rng, &mut tokens, config.passage_filler);
        passages.push((Passage::synthetic(format!("{qid}-L{grade}"), text), grade));
    }
    RankingContext::from_graded(Query::new(qid, query_text), passages)
}

/// Training settings that fit the default fixture in one epoch: small batches and no
/// accumulation, since 200 contexts only give 50 optimizer updates at batch size 4.
pub fn fixture_train_config(loss: LossKind, binarize: bool) -> TrainConfig {
    TrainConfig {
        loss,
        binarize,
        learning_rate: 0.012,
        batch_size: 4,
        grad_accumulation: 1,
        epochs: 1,
        seed: 7,
        ..TrainConfig::default()
    }
}

pub fn separable_fixture(config: &FixtureConfig) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let train = (0..config.train_contexts)
        .map(|i| build_context(config, &mut rng, &format!("train{i:04}")))
        .collect::<Result<Vec<_>>>()?;
    let heldout = (0..config.heldout_contexts)
        .map(|i| build_context(config, &mut rng, &format!("heldout{i:04}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Fixture { train, heldout })
}
