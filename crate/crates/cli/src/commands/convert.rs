//! `convert`: binarised or real-data-merged copies of a context file.

use gradrank_core::io::context_line;
use gradrank_core::ranking::{binarize_context, RankingContext, DEFAULT_POSITIVE_GRADES};
use log::warn;
use serde::Serialize;

use super::{load_contexts, merge_real_data, print_summary, MergeCounts};
use crate::args::ConvertArgs;
use crate::config::{apply_path, required, CliConfig};
use crate::failure::{write_output, CmdResult, Failure};

#[derive(Debug, Serialize)]
struct BinarizeCounts {
    contexts: usize,
    positives: usize,
    negatives: usize,
    /// Contexts left with no positive or no negative.
    invalid: usize,
}

#[derive(Debug, Serialize)]
struct MergeSummary {
    contexts: usize,
    #[serde(flatten)]
    merge: MergeCounts,
}

pub fn run(mut config: CliConfig, args: ConvertArgs) -> CmdResult<()> {
    apply_path(&mut config.inputs.contexts, &args.input);
    apply_path(&mut config.inputs.real_qrels, &args.real_qrels);
    apply_path(&mut config.inputs.real_corpus, &args.real_corpus);
    let real = (&config.inputs.real_qrels, &config.inputs.real_corpus);
    let merging = real.0.is_some() || real.1.is_some();
    if args.binarize && merging {
        return Err(Failure::usage("--binarize cannot be combined with --real-qrels/--real-corpus"));
    }
    if !args.binarize && !merging {
        return Err(Failure::usage("nothing to do: pass --binarize, or --real-qrels with --real-corpus"));
    }
    let contexts = load_contexts(required(&config.inputs.contexts, "--input")?)?;

    let output: Vec<RankingContext> = if args.binarize {
        let mut counts = BinarizeCounts {
            contexts: contexts.len(),
            positives: 0,
            negatives: 0,
            invalid: 0,
        };
        let out = contexts
            .iter()
            .map(|ctx| {
                let b = binarize_context(ctx, &DEFAULT_POSITIVE_GRADES);
                if !b.is_valid() {
                    warn!("context {:?}: {}", ctx.query.id, b.violations.join("; "));
                    counts.invalid += 1;
                }
                let positives = b.context.entries.iter().filter(|e| e.label.grade() == 1).count();
                counts.positives += positives;
                counts.negatives += b.context.len() - positives;
                b.context
            })
            .collect();
        print_summary(&counts);
        out
    } else {
        let (Some(qrels), Some(corpus)) = real else {
            return Err(Failure::usage("--real-qrels and --real-corpus must be given together"));
        };
        let (out, merge) = merge_real_data(&contexts, qrels, corpus)?;
        print_summary(&MergeSummary {
            contexts: contexts.len(),
            merge,
        });
        out
    };
    write_output(&args.output, output.iter().map(context_line).collect::<String>())
}
