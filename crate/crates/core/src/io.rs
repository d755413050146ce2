//! On-disk formats.
//!
//! - Context JSONL: `{"query_id", "query", "passages": [{"id", "text", "grade", "source"}]}`
//! - Qrels: `qid 0 docid grade`, whitespace separated
//! - Queries and corpus: `id<TAB>text`
//! - Runs: `qid Q0 docid rank score tag`

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RunRanking;
use crate::ranking::{
    ContextEntry, Passage, PassageSource, Qrels, Query, RankingContext, RelevanceLabel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassageRecord {
    pub id: String,
    pub text: String,
    pub grade: u8,
    #[serde(default)]
    pub source: PassageSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextRecord {
    pub query_id: String,
    pub query: String,
    pub passages: Vec<PassageRecord>,
}

impl From<&RankingContext> for ContextRecord {
    fn from(ctx: &RankingContext) -> Self {
        Self {
            query_id: ctx.query.id.clone(),
            query: ctx.query.text.clone(),
            passages: ctx
                .entries
                .iter()
                .map(|e| PassageRecord {
                    id: e.passage.id.clone(),
                    text: e.passage.text.clone(),
                    grade: e.label.grade(),
                    source: e.passage.source,
                })
                .collect(),
        }
    }
}

impl TryFrom<ContextRecord> for RankingContext {
    type Error = Error;

    fn try_from(record: ContextRecord) -> Result<Self> {
        let entries = record
            .passages
            .into_iter()
            .map(|p| {
                Ok(ContextEntry {
                    label: RelevanceLabel::new(p.grade)?,
                    passage: Passage::new(p.id, p.text, p.source),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RankingContext::new(Query::new(record.query_id, record.query), entries))
    }
}

/// One JSON line, newline-terminated.
pub fn context_line(ctx: &RankingContext) -> String {
    let mut line = serde_json::to_string(&ContextRecord::from(ctx)).expect("records serialise");
    line.push('\n');
    line
}

pub fn parse_contexts(text: &str, path: &Path) -> Result<Vec<RankingContext>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: ContextRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        out.push(RankingContext::try_from(record).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}

pub fn read_contexts(path: &Path) -> Result<Vec<RankingContext>> {
    parse_contexts(&fs::read_to_string(path)?, path)
}

pub fn write_contexts(path: &Path, contexts: &[RankingContext]) -> Result<()> {
    let text: String = contexts.iter().map(context_line).collect();
    fs::write(path, text)?;
    Ok(())
}

pub fn read_qrels(path: &Path) -> Result<Qrels> {
    let text = fs::read_to_string(path)?;
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [qid, _iteration, docid, grade] => {
                let grade: u32 = grade
                    .parse()
                    .map_err(|_| parse_err(format!("grade {grade:?} is not a non-negative integer")))?;
                qrels.insert(qid, docid, grade).map_err(|e| parse_err(e.to_string()))?;
            }
            _ => return Err(parse_err(format!("expected 4 fields, found {}", fields.len()))),
        }
    }
    Ok(qrels)
}

pub fn write_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (qid, judged) in qrels.queries() {
        for (docid, grade) in judged {
            let _ = writeln!(out, "{qid} 0 {docid} {grade}");
        }
    }
    out
}

/// `id<TAB>text` lines. Text may contain further tabs.
pub fn read_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, body) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: "expected id<TAB>text".to_string(),
        })?;
        out.push((id.to_string(), body.to_string()));
    }
    Ok(out)
}

pub fn read_queries(path: &Path) -> Result<Vec<Query>> {
    Ok(read_tsv(path)?.into_iter().map(|(id, text)| Query::new(id, text)).collect())
}

pub fn read_corpus(path: &Path, source: PassageSource) -> Result<Vec<Passage>> {
    Ok(read_tsv(path)?
        .into_iter()
        .map(|(id, text)| Passage::new(id, text, source))
        .collect())
}

pub fn write_tsv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    rows.into_iter().map(|(id, text)| format!("{id}\t{text}\n")).collect()
}

/// Renders the top `depth` entries per query in TREC run format.
pub fn format_run(run: &RunRanking, tag: &str, depth: usize) -> String {
    let mut out = String::new();
    for (qid, ranking) in run.queries() {
        for (rank, (docid, score)) in ranking.iter().take(depth).enumerate() {
            let _ = writeln!(out, "{qid} Q0 {docid} {} {score} {tag}", rank + 1);
        }
    }
    out
}

/// Parses a TREC run. Stated ranks are ignored; order comes from scores and the tie rule.
pub fn read_run(path: &Path) -> Result<RunRanking> {
    let text = fs::read_to_string(path)?;
    let mut grouped: std::collections::BTreeMap<String, Vec<(String, f64)>> = Default::default();
    for (i, line) in text.lines().enumerate() {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [qid, _q0, docid, _rank, score, _tag] => {
                let score: f64 = score
                    .parse()
                    .map_err(|_| parse_err(format!("score {score:?} is not a number")))?;
                grouped.entry(qid.to_string()).or_default().push((docid.to_string(), score));
            }
            _ => return Err(parse_err(format!("expected 6 fields, found {}", fields.len()))),
        }
    }
    let mut run = RunRanking::new();
    for (qid, scored) in grouped {
        run.insert(&qid, scored)?;
    }
    Ok(run)
}
