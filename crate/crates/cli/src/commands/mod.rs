//! One module per subcommand.

pub mod analyze;
pub mod convert;
pub mod eval;
pub mod generate;
pub mod train;

use std::collections::HashMap;
use std::path::Path;

use gradrank_core::io::{read_contexts, read_corpus, read_qrels};
use gradrank_core::ranking::{merge_real, Passage, PassageSource, RankingContext};
use log::info;
use serde::Serialize;

use crate::failure::{require_file, CmdResult, Failure};

/// Reads a context file, failing with a usage error if it is missing or malformed.
pub fn load_contexts(path: &Path) -> CmdResult<Vec<RankingContext>> {
    require_file(path, "contexts file")?;
    read_contexts(path).map_err(Failure::from)
}

/// Prints a JSON summary on stdout.
pub fn print_summary(value: &impl Serialize) {
    println!("{}", serde_json::to_string(value).expect("summaries serialise"));
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MergeCounts {
    /// Contexts whose query has real judgments.
    pub merged_contexts: usize,
    pub added_positives: usize,
    pub added_negatives: usize,
}

/// Appends real judged passages to the contexts of matching queries. Passages judged ≥ 1
/// join as positives and passages judged 0 as negatives, in passage id order; `merge_real`
/// assigns their grades.
pub fn merge_real_data(
    contexts: &[RankingContext],
    qrels_path: &Path,
    corpus_path: &Path,
) -> CmdResult<(Vec<RankingContext>, MergeCounts)> {
    require_file(qrels_path, "real qrels file")?;
    require_file(corpus_path, "real corpus file")?;
    let qrels = read_qrels(qrels_path)?;
    let corpus: HashMap<String, Passage> = read_corpus(corpus_path, PassageSource::Real)?
        .into_iter()
        .map(|p| (p.id.clone(), p))
        .collect();
    let mut counts = MergeCounts::default();
    let mut out = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        let Some(judged) = qrels.query(&ctx.query.id) else {
            out.push(ctx.clone());
            continue;
        };
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (id, &grade) in judged {
            let passage = corpus.get(id).cloned().ok_or_else(|| {
                Failure::usage(format!(
                    "passage {id:?} judged for query {:?} is not in {}",
                    ctx.query.id,
                    corpus_path.display()
                ))
            })?;
            if grade >= 1 {
                positives.push(passage);
            } else {
                negatives.push(passage);
            }
        }
        counts.merged_contexts += 1;
        counts.added_positives += positives.len();
        counts.added_negatives += negatives.len();
        let merged = merge_real(ctx, &positives, &negatives)
            .map_err(|e| Failure::from(e).context(format!("merging into context {:?}", ctx.query.id)))?;
        out.push(merged);
    }
    info!(
        "merged real passages into {} contexts (+{} positives, +{} negatives)",
        counts.merged_contexts, counts.added_positives, counts.added_negatives
    );
    Ok((out, counts))
}
