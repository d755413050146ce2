//! In-context example pool: queries with at least one passage at every grade.

use std::collections::BTreeMap;

use gradrank_core::io::parse_contexts;
use gradrank_core::ranking::{RankingContext, MAX_GRADE};
use log::warn;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Three hand-written queries, one passage per grade each.
pub const BUNDLED_POOL: &str = include_str!("../fixtures/example_pool.jsonl");

/// One query and one passage per grade, stored from grade 3 down to grade 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InContextExample {
    pub query: String,
    pub passages: [String; 4],
}

impl InContextExample {
    pub fn passage(&self, grade: u8) -> &str {
        &self.passages[usize::from(MAX_GRADE - grade)]
    }
}

#[derive(Debug, Clone)]
struct PoolQuery {
    text: String,
    /// Passages indexed by `3 - grade`.
    by_level: [Vec<String>; 4],
}

#[derive(Debug, Clone)]
pub struct ExamplePool {
    queries: Vec<PoolQuery>,
}

impl ExamplePool {
    /// Groups passages by query id across all contexts. Queries missing a grade, or with an
    /// empty passage, are dropped with a warning.
    pub fn from_contexts(contexts: &[RankingContext]) -> Result<Self> {
        let mut grouped: BTreeMap<&str, PoolQuery> = BTreeMap::new();
        let mut order = Vec::new();
        for ctx in contexts {
            let entry = grouped.entry(ctx.query.id.as_str()).or_insert_with(|| {
                order.push(ctx.query.id.as_str());
                PoolQuery {
                    text: ctx.query.text.clone(),
                    by_level: Default::default(),
                }
            });
            for e in &ctx.entries {
                let text = e.passage.text.trim();
                if !text.is_empty() {
                    entry.by_level[usize::from(MAX_GRADE - e.label.grade())].push(text.to_string());
                }
            }
        }
        let mut queries = Vec::new();
        for id in order {
            let q = grouped.remove(id).expect("grouped above");
            let missing: Vec<u8> = (0..=MAX_GRADE)
                .rev()
                .filter(|&g| q.by_level[usize::from(MAX_GRADE - g)].is_empty())
                .collect();
            if !missing.is_empty() || q.text.trim().is_empty() {
                warn!("example pool: query {id:?} lacks grade(s) {missing:?} and is excluded");
                continue;
            }
            queries.push(q);
        }
        if queries.is_empty() {
            return Err(Error::Pool("no query has a passage at every grade".into()));
        }
        Ok(Self { queries })
    }

    pub fn parse(jsonl: &str, origin: &std::path::Path) -> Result<Self> {
        Self::from_contexts(&parse_contexts(jsonl, origin)?)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_POOL, std::path::Path::new("<bundled pool>")).expect("bundled pool is valid")
    }

    /// Number of usable queries.
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// A uniform query, then a uniform passage for each grade from 3 down to 0.
pub fn sample_example<R: Rng + ?Sized>(pool: &ExamplePool, rng: &mut R) -> InContextExample {
    let q = pool.queries.choose(rng).expect("pool is never empty");
    let passages = std::array::from_fn(|level| q.by_level[level].choose(rng).expect("all grades present").clone());
    InContextExample {
        query: q.text.clone(),
        passages,
    }
}
