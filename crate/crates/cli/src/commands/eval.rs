//! `eval`: ranks a corpus with trained parameters and reports retrieval metrics.

use std::collections::BTreeMap;

use gradrank_core::encoder::load_params;
use gradrank_core::io::{format_run, read_corpus, read_qrels, read_queries};
use gradrank_core::metrics::{mrr_at_k, ndcg_at_k, rank_full, recall_at_k, strict_filter, MetricReport};
use gradrank_core::ranking::PassageSource;
use log::warn;
use serde::{Deserialize, Serialize};

use super::print_summary;
use crate::args::{EvalArgs, GlobalArgs, MetricArg};
use crate::config::{apply, apply_path, required, CliConfig};
use crate::failure::{require_file, write_json, write_output, CmdResult, Failure};

pub const RUN_FILE: &str = "run.trec";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_TAG: &str = "gradrank";
/// Grade removed by strict evaluation.
pub const STRICT_EXCLUDED_GRADE: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub queries: usize,
    pub corpus: usize,
    /// Queries with at least one judgment after any strict filtering.
    pub judged_queries: usize,
    pub strict: bool,
    /// Judgments removed by strict filtering.
    pub filtered_judgments: usize,
    /// Ranked queries without judgments.
    pub unjudged_queries: usize,
    /// Judged queries absent from the query file.
    pub missing_from_run: usize,
    pub warnings: Vec<String>,
    /// Mean of every metric, keyed `metric@k`.
    pub summary: BTreeMap<String, f64>,
    pub metrics: Vec<MetricReport>,
}

pub fn run(_global: &GlobalArgs, mut config: CliConfig, args: EvalArgs) -> CmdResult<()> {
    let e = &mut config.eval;
    apply(&mut e.metrics, args.metrics);
    apply(&mut e.ks, args.k);
    apply(&mut e.gain, args.gain.map(Into::into));
    apply(&mut e.threshold, args.threshold);
    apply(&mut e.strict, args.strict);
    apply(&mut e.depth, args.depth);
    let inputs = &mut config.inputs;
    apply_path(&mut inputs.params, &args.params);
    apply_path(&mut inputs.queries, &args.queries);
    apply_path(&mut inputs.corpus, &args.corpus);
    apply_path(&mut inputs.qrels, &args.qrels);
    let e = &config.eval;
    if e.ks.is_empty() || e.ks.contains(&0) {
        return Err(Failure::usage("cutoffs must be a non-empty list of positive integers"));
    }
    if e.metrics.is_empty() {
        return Err(Failure::usage("no metrics requested"));
    }
    if e.depth == 0 {
        return Err(Failure::usage("run depth must be ≥ 1"));
    }

    let params_path = required(&config.inputs.params, "--params")?;
    let queries_path = required(&config.inputs.queries, "--queries")?;
    let corpus_path = required(&config.inputs.corpus, "--corpus")?;
    let qrels_path = required(&config.inputs.qrels, "--qrels")?;
    require_file(params_path, "params file")?;
    require_file(queries_path, "queries file")?;
    require_file(corpus_path, "corpus file")?;
    require_file(qrels_path, "qrels file")?;
    let params = load_params(params_path)?;
    let queries = read_queries(queries_path)?;
    let corpus = read_corpus(corpus_path, PassageSource::Real)?;
    let mut qrels = read_qrels(qrels_path)?;

    let mut filtered = 0;
    if e.strict {
        let before = qrels.len();
        qrels = strict_filter(&qrels, STRICT_EXCLUDED_GRADE);
        filtered = before - qrels.len();
    }
    let run = rank_full(&params, &queries, &corpus)?;
    write_output(&args.out.join(RUN_FILE), format_run(&run, RUN_TAG, e.depth))?;

    let mut reports = Vec::new();
    for metric in &e.metrics {
        for &k in &e.ks {
            reports.push(match metric {
                MetricArg::Ndcg => ndcg_at_k(&run, &qrels, k, e.gain)?,
                MetricArg::Mrr => mrr_at_k(&run, &qrels, k, e.threshold)?,
                MetricArg::Recall => recall_at_k(&run, &qrels, k, e.threshold)?,
            });
        }
    }

    let unjudged = queries.iter().filter(|q| qrels.query(&q.id).is_none()).count();
    let judged_queries = qrels.queries().count();
    let missing = qrels.queries().filter(|(q, _)| run.query(q).is_none()).count();
    let mut warnings = Vec::new();
    if unjudged as f64 > e.mismatch_warning_ratio * queries.len() as f64 {
        warnings.push(format!("{unjudged} of {} queries have no judgments and were skipped", queries.len()));
    }
    if missing as f64 > e.mismatch_warning_ratio * judged_queries as f64 {
        warnings.push(format!("{missing} of {judged_queries} judged queries are not in the query file"));
    }
    for w in &warnings {
        warn!("{w}");
    }
    let report = EvalReport {
        queries: queries.len(),
        corpus: corpus.len(),
        judged_queries,
        strict: e.strict,
        filtered_judgments: filtered,
        unjudged_queries: unjudged,
        missing_from_run: missing,
        warnings,
        summary: reports.iter().map(|r| (r.label(), r.mean)).collect(),
        metrics: reports,
    };
    write_json(&args.out.join(REPORT_FILE), &report)?;
    print_summary(&report.summary);
    Ok(())
}
