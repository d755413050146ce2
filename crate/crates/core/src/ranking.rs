//! Queries, passages, graded labels and ranking contexts.
//!
//! A [`RankingContext`] is the atomic training record: one query and an ordered list of
//! passages, each with a grade in `0..=3`. Batches of contexts become a label matrix `H`
//! of shape `(batch, context size)` via [`assemble_batch`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest grade a passage can carry.
pub const MAX_GRADE: u8 = 3;

/// Grades treated as positive when collapsing to binary labels.
pub const DEFAULT_POSITIVE_GRADES: [u8; 2] = [3, 2];

/// Grade given to real positive passages when they are merged into a synthetic context.
pub const REAL_POSITIVE_GRADE: u8 = 3;
/// Grade given to real negative passages when they are merged into a synthetic context.
pub const REAL_NEGATIVE_GRADE: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PassageSource {
    #[default]
    Synthetic,
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: PassageSource,
}

impl Passage {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: PassageSource) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            source,
        }
    }

    pub fn synthetic(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(id, text, PassageSource::Synthetic)
    }

    pub fn real(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(id, text, PassageSource::Real)
    }
}

/// A relevance grade in `0..=3` (irrelevant, related, highly relevant, perfectly relevant).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RelevanceLabel(u8);

impl RelevanceLabel {
    pub fn new(grade: u8) -> Result<Self> {
        if grade > MAX_GRADE {
            return Err(Error::invalid(format!(
                "grade {grade} outside 0..={MAX_GRADE}"
            )));
        }
        Ok(Self(grade))
    }

    pub fn grade(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<u8> for RelevanceLabel {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<RelevanceLabel> for u8 {
    fn from(label: RelevanceLabel) -> u8 {
        label.0
    }
}

impl fmt::Display for RelevanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextEntry {
    pub passage: Passage,
    pub label: RelevanceLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingContext {
    pub query: Query,
    pub entries: Vec<ContextEntry>,
}

impl RankingContext {
    pub fn new(query: Query, entries: Vec<ContextEntry>) -> Self {
        Self { query, entries }
    }

    /// Builds a context from `(passage, grade)` pairs, rejecting out-of-range grades.
    pub fn from_graded(
        query: Query,
        passages: impl IntoIterator<Item = (Passage, u8)>,
    ) -> Result<Self> {
        let entries = passages
            .into_iter()
            .map(|(passage, grade)| {
                Ok(ContextEntry {
                    passage,
                    label: RelevanceLabel::new(grade)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { query, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grades(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label.grade()).collect()
    }

    pub fn grade_sum(&self) -> u32 {
        self.entries.iter().map(|e| u32::from(e.label.grade())).sum()
    }
}

/// Lists every violated context invariant. An empty list means the context is valid.
pub fn validate_context(ctx: &RankingContext) -> Vec<String> {
    let mut violations = Vec::new();
    if ctx.query.id.is_empty() {
        violations.push("empty query id".to_string());
    }
    if ctx.query.text.is_empty() {
        violations.push("empty query text".to_string());
    }
    if ctx.entries.len() < 2 {
        violations.push("fewer than 2 entries".to_string());
    } else {
        let distinct: BTreeSet<u8> = ctx.entries.iter().map(|e| e.label.grade()).collect();
        if distinct.len() < 2 {
            violations.push("fewer than 2 distinct grades".to_string());
        }
    }
    let mut seen = HashSet::new();
    for (i, entry) in ctx.entries.iter().enumerate() {
        if entry.passage.id.is_empty() {
            violations.push(format!("empty passage id at entry {i}"));
        } else if !seen.insert(entry.passage.id.as_str()) {
            violations.push(format!("duplicate passage id {:?}", entry.passage.id));
        }
        if entry.passage.text.is_empty() {
            violations.push(format!("empty passage text at entry {i}"));
        }
    }
    violations
}

/// Result of [`binarize_context`]: the relabelled context and any invariant it now breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binarized {
    pub context: RankingContext,
    pub violations: Vec<String>,
}

impl Binarized {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Maps grades in `positive_grades` to 1 and everything else to 0.
pub fn binarize_context(ctx: &RankingContext, positive_grades: &[u8]) -> Binarized {
    let entries = ctx
        .entries
        .iter()
        .map(|e| ContextEntry {
            passage: e.passage.clone(),
            label: RelevanceLabel(u8::from(positive_grades.contains(&e.label.grade()))),
        })
        .collect();
    let context = RankingContext::new(ctx.query.clone(), entries);
    let violations = validate_context(&context);
    Binarized {
        context,
        violations,
    }
}

/// Appends real passages to a context: positives graded 3, negatives graded 1.
pub fn merge_real(
    ctx: &RankingContext,
    positives: &[Passage],
    negatives: &[Passage],
) -> Result<RankingContext> {
    let mut ids: HashSet<&str> = ctx.entries.iter().map(|e| e.passage.id.as_str()).collect();
    for p in positives.iter().chain(negatives) {
        if !ids.insert(p.id.as_str()) {
            return Err(Error::IdCollision(p.id.clone()));
        }
    }
    let mut merged = ctx.clone();
    let grade_of = |grade| RelevanceLabel::new(grade).expect("constant grade in range");
    merged
        .entries
        .extend(positives.iter().map(|p| ContextEntry {
            passage: p.clone(),
            label: grade_of(REAL_POSITIVE_GRADE),
        }));
    merged
        .entries
        .extend(negatives.iter().map(|p| ContextEntry {
            passage: p.clone(),
            label: grade_of(REAL_NEGATIVE_GRADE),
        }));
    Ok(merged)
}

/// Location of a batch column's passage: `contexts[context].entries[entry]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnRef {
    pub context: usize,
    pub entry: usize,
}

/// A batch of equal-size rows ready for scoring.
///
/// Row `i` belongs to `contexts[i]`; `columns[i][j]` says which passage sits in column `j`.
/// With in-batch expansion a row lists its own entries first, then every entry of the other
/// contexts in batch order, all graded 0.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub contexts: Vec<RankingContext>,
    pub labels: DMatrix<f64>,
    pub columns: Vec<Vec<ColumnRef>>,
}

impl TrainingBatch {
    pub fn rows(&self) -> usize {
        self.labels.nrows()
    }

    pub fn cols(&self) -> usize {
        self.labels.ncols()
    }

    pub fn passage(&self, row: usize, col: usize) -> &Passage {
        let c = self.columns[row][col];
        &self.contexts[c.context].entries[c.entry].passage
    }
}

pub fn assemble_batch(contexts: Vec<RankingContext>, in_batch_expansion: bool) -> Result<TrainingBatch> {
    let b = contexts.len();
    if b == 0 {
        return Err(Error::invalid("batch needs at least one context"));
    }
    let c = contexts[0].len();
    if c == 0 {
        return Err(Error::invalid("context 0 has no entries"));
    }
    if let Some((i, ctx)) = contexts.iter().enumerate().find(|(_, ctx)| ctx.len() != c) {
        return Err(Error::shape(format!(
            "ragged batch: context 0 has {c} entries but context {i} has {}",
            ctx.len()
        )));
    }
    let m = if in_batch_expansion { b * c } else { c };
    let mut labels = DMatrix::zeros(b, m);
    let mut columns = Vec::with_capacity(b);
    for (i, ctx) in contexts.iter().enumerate() {
        let mut row = Vec::with_capacity(m);
        for (j, entry) in ctx.entries.iter().enumerate() {
            labels[(i, j)] = entry.label.as_f64();
            row.push(ColumnRef {
                context: i,
                entry: j,
            });
        }
        if in_batch_expansion {
            for other in (0..b).filter(|&o| o != i) {
                row.extend((0..c).map(|entry| ColumnRef {
                    context: other,
                    entry,
                }));
            }
        }
        columns.push(row);
    }
    Ok(TrainingBatch {
        contexts,
        labels,
        columns,
    })
}

/// One contrastive training instance: a single positive against the context's negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoNceInstance {
    pub query: Query,
    pub positive: Passage,
    pub negatives: Vec<Passage>,
}

impl InfoNceInstance {
    /// Positive first with grade 1, negatives after with grade 0.
    pub fn to_context(&self) -> RankingContext {
        let mut entries = Vec::with_capacity(1 + self.negatives.len());
        entries.push(ContextEntry {
            passage: self.positive.clone(),
            label: RelevanceLabel(1),
        });
        entries.extend(self.negatives.iter().map(|p| ContextEntry {
            passage: p.clone(),
            label: RelevanceLabel(0),
        }));
        RankingContext::new(self.query.clone(), entries)
    }
}

/// Splits a context into one instance per positive entry.
pub fn expand_for_infonce(ctx: &RankingContext, positive_grades: &[u8]) -> Vec<InfoNceInstance> {
    let (positives, negatives): (Vec<_>, Vec<_>) = ctx
        .entries
        .iter()
        .partition(|e| positive_grades.contains(&e.label.grade()));
    let negatives: Vec<Passage> = negatives.into_iter().map(|e| e.passage.clone()).collect();
    positives
        .into_iter()
        .map(|e| InfoNceInstance {
            query: ctx.query.clone(),
            positive: e.passage.clone(),
            negatives: negatives.clone(),
        })
        .collect()
}

/// Graded relevance judgments keyed by query id, then passage id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a judgment. A repeated `(query, passage)` pair is an error.
    pub fn insert(&mut self, query_id: &str, passage_id: &str, grade: u32) -> Result<()> {
        let per_query = self.judgments.entry(query_id.to_string()).or_default();
        if per_query.contains_key(passage_id) {
            return Err(Error::invalid(format!(
                "duplicate judgment for ({query_id}, {passage_id})"
            )));
        }
        per_query.insert(passage_id.to_string(), grade);
        Ok(())
    }

    pub fn grade(&self, query_id: &str, passage_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(passage_id).copied()
    }

    pub fn query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.judgments.iter().map(|(q, j)| (q.as_str(), j))
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds qrels from the grades stored in contexts.
    pub fn from_contexts<'a>(contexts: impl IntoIterator<Item = &'a RankingContext>) -> Result<Self> {
        let mut qrels = Self::new();
        for ctx in contexts {
            for e in &ctx.entries {
                qrels.insert(&ctx.query.id, &e.passage.id, u32::from(e.label.grade()))?;
            }
        }
        Ok(qrels)
    }

    pub(crate) fn retain(&mut self, mut keep: impl FnMut(u32) -> bool) {
        for per_query in self.judgments.values_mut() {
            per_query.retain(|_, g| keep(*g));
        }
        self.judgments.retain(|_, per_query| !per_query.is_empty());
    }
}
