//! `train`: fits the encoder and writes params, loss history and the resolved config.

use std::fmt::Write as _;

use gradrank_core::encoder::{train, EncoderParams};
use serde::Serialize;
use serde_json::json;

use super::{load_contexts, merge_real_data, print_summary, MergeCounts};
use crate::args::{GlobalArgs, TrainArgs};
use crate::config::{apply, apply_path, required, CliConfig, Inputs};
use crate::failure::{write_json, write_output, CmdResult, Failure};

pub const PARAMS_FILE: &str = "params.bin";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Serialize)]
struct Summary {
    /// Rows the trainer iterated over: contexts, or one per positive for InfoNCE.
    units: usize,
    steps: usize,
    updates: usize,
    first_loss: Option<f64>,
    last_loss: Option<f64>,
    #[serde(flatten)]
    real: MergeCounts,
}

pub fn run(global: &GlobalArgs, mut config: CliConfig, args: TrainArgs) -> CmdResult<()> {
    let t = &mut config.train;
    apply(&mut t.loss, args.loss);
    apply(&mut t.binarize, args.binarize);
    apply(&mut t.in_batch_expansion, args.in_batch_expansion);
    apply(&mut t.learning_rate, args.learning_rate);
    apply(&mut t.batch_size, args.batch_size);
    apply(&mut t.epochs, args.epochs);
    apply(&mut t.warmup_ratio, args.warmup_ratio);
    apply(&mut t.grad_accumulation, args.grad_accumulation);
    apply(&mut t.bucket_bits, args.bucket_bits);
    apply(&mut t.dim, args.dim);
    apply(&mut t.bias, args.bias);
    apply(&mut t.seed, global.seed);
    apply_path(&mut config.inputs.contexts, &args.contexts);
    apply_path(&mut config.inputs.real_qrels, &args.real_qrels);
    apply_path(&mut config.inputs.real_corpus, &args.real_corpus);
    let t = &config.train;
    t.validate()?;

    let contexts_path = required(&config.inputs.contexts, "--contexts")?;
    let mut contexts = load_contexts(contexts_path)?;
    let mut real = MergeCounts::default();
    match (&config.inputs.real_qrels, &config.inputs.real_corpus) {
        (Some(qrels), Some(corpus)) => (contexts, real) = merge_real_data(&contexts, qrels, corpus)?,
        (None, None) => {}
        _ => return Err(Failure::usage("--real-qrels and --real-corpus must be given together")),
    }

    let init = EncoderParams::random(t.bucket_bits, t.dim, t.bias, t.seed)?;
    let outcome = train(t, &contexts, init)?;

    write_output(&args.out.join(PARAMS_FILE), outcome.params.to_bytes())?;
    let mut history = String::new();
    for record in &outcome.history {
        let _ = writeln!(history, "{}", serde_json::to_string(record).expect("records serialise"));
    }
    write_output(&args.out.join(HISTORY_FILE), history)?;
    let inputs = Inputs {
        contexts: config.inputs.contexts.clone(),
        real_qrels: config.inputs.real_qrels.clone(),
        real_corpus: config.inputs.real_corpus.clone(),
        ..Inputs::default()
    };
    write_json(&args.out.join(CONFIG_FILE), &json!({"inputs": inputs, "train": t}))?;

    print_summary(&Summary {
        units: outcome.units,
        steps: outcome.history.len(),
        updates: outcome.updates,
        first_loss: outcome.history.first().map(|r| r.loss),
        last_loss: outcome.history.last().map(|r| r.loss),
        real,
    });
    Ok(())
}
