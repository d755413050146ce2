//! End-to-end dataset generation.
//!
//! Knobs, examples and jitter seeds are drawn for every query in input order before any
//! request is sent, so the randomness a query sees does not depend on completion order or on
//! how many queries an earlier interrupted run already finished. Requests run through an
//! ordered buffer of at most `concurrency` futures, and results are written in input order.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use gradrank_core::io::{context_line, parse_contexts};
use gradrank_core::ranking::{Query, RankingContext};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::client::ChatClient;
use crate::error::{Error, Result};
use crate::examples::{sample_example, ExamplePool, InContextExample};
use crate::knobs::{sample_knobs, PromptKnobs};
use crate::prompt::{build_prompt, response_to_context, Mode};

/// Generation attempts per query: the first try plus one regeneration on a parse failure.
pub const MAX_GENERATIONS: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationJob {
    pub query: Query,
    pub example: InContextExample,
    pub knobs: PromptKnobs,
    pub mode: Mode,
    pub jitter_seed: u64,
}

impl GenerationJob {
    pub fn prompt(&self) -> String {
        build_prompt(&self.query, &self.example, &self.knobs, self.mode)
    }
}

/// One line of the failure log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub query_id: String,
    pub reason: String,
    pub attempts: u32,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JobOutcome {
    Success { context: RankingContext, attempts: u32 },
    Failed(FailureRecord),
}

/// Draws knobs, an example and a jitter seed per query, sequentially.
pub fn plan_jobs(queries: &[Query], pool: &ExamplePool, seed: u64, mode: Mode) -> Result<Vec<GenerationJob>> {
    let mut seen = HashSet::new();
    if let Some(dup) = queries.iter().find(|q| !seen.insert(q.id.as_str())) {
        return Err(Error::Config(format!("duplicate query id {:?}", dup.id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(queries
        .iter()
        .map(|q| {
            let knobs = sample_knobs(&mut rng);
            let example = sample_example(pool, &mut rng);
            GenerationJob {
                query: q.clone(),
                example,
                knobs,
                mode,
                jitter_seed: rng.random(),
            }
        })
        .collect())
}

/// Calls the endpoint and parses, regenerating once on a parse failure. Endpoint errors
/// propagate; parse failures become a failure record.
pub async fn run_job(client: &ChatClient, job: &GenerationJob) -> Result<JobOutcome> {
    let prompt = job.prompt();
    let mut rng = ChaCha8Rng::seed_from_u64(job.jitter_seed);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let completion = client.complete(&prompt, &mut rng).await?;
        match response_to_context(&job.query, &completion.text, job.mode) {
            Ok(context) => return Ok(JobOutcome::Success { context, attempts }),
            Err(Error::Parse { reason, raw }) => {
                if attempts < MAX_GENERATIONS {
                    warn!("query {:?}: {reason}; regenerating", job.query.id);
                    continue;
                }
                return Ok(JobOutcome::Failed(FailureRecord {
                    query_id: job.query.id.clone(),
                    reason,
                    attempts,
                    raw,
                }));
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub seed: u64,
    pub mode: Mode,
    pub concurrency: usize,
    pub output: PathBuf,
    pub failures: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct GenerateSummary {
    pub planned: usize,
    pub already_written: usize,
    pub written: usize,
    pub failed: usize,
    /// Generation attempts, counting one per parse of a model response.
    pub generations: u32,
}

/// Query ids already present in `path`. A trailing line without a newline is the remnant of
/// an interrupted write and is truncated away.
fn existing_query_ids(path: &Path) -> Result<HashSet<String>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    let mut text = fs::read_to_string(path)?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        warn!("{}: dropping incomplete trailing line", path.display());
        text.truncate(keep);
        fs::write(path, &text)?;
    }
    Ok(parse_contexts(&text, path)?
        .into_iter()
        .map(|c| c.query.id)
        .collect())
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Generates contexts for every query not yet in the output file.
///
/// An endpoint failure stops the run after everything before the failing query has been
/// written; rerunning with the same inputs resumes from there.
pub async fn generate_dataset(
    client: &ChatClient,
    queries: &[Query],
    pool: &ExamplePool,
    options: &GenerateOptions,
) -> Result<GenerateSummary> {
    if options.concurrency == 0 {
        return Err(Error::Config("concurrency must be ≥ 1".into()));
    }
    let jobs = plan_jobs(queries, pool, options.seed, options.mode)?;
    let done = existing_query_ids(&options.output)?;
    let pending: Vec<&GenerationJob> = jobs.iter().filter(|j| !done.contains(&j.query.id)).collect();
    let mut summary = GenerateSummary {
        planned: jobs.len(),
        already_written: jobs.len() - pending.len(),
        ..GenerateSummary::default()
    };
    info!(
        "{} queries, {} already written, {} to generate",
        summary.planned,
        summary.already_written,
        pending.len()
    );
    // make sure both files exist even if nothing is generated
    append_line(&options.output, "")?;
    append_line(&options.failures, "")?;

    let mut results = stream::iter(pending.into_iter().map(|job| run_job(client, job))).buffered(options.concurrency);
    while let Some(result) = results.next().await {
        match result {
            Ok(JobOutcome::Success { context, attempts }) => {
                append_line(&options.output, &context_line(&context))?;
                summary.written += 1;
                summary.generations += attempts;
            }
            Ok(JobOutcome::Failed(record)) => {
                warn!("query {:?} failed: {}", record.query_id, record.reason);
                let mut line = serde_json::to_string(&record)?;
                line.push('\n');
                append_line(&options.failures, &line)?;
                summary.failed += 1;
                summary.generations += record.attempts;
            }
            Err(e) => {
                return Err(Error::Aborted {
                    written: summary.written,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(summary)
}
