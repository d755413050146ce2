//! `generate`: graded contexts from a chat-completion endpoint.

use std::ffi::OsString;
use std::path::PathBuf;

use gradrank_core::io::read_queries;
use gradrank_datagen::{generate_dataset, ChatClient, ExamplePool, GenerateOptions};
use log::warn;
use serde::Serialize;

use super::print_summary;
use crate::args::{GenerateArgs, GlobalArgs};
use crate::config::{apply, apply_path, required, CliConfig};
use crate::failure::{require_file, CmdResult, Failure};

#[derive(Debug, Serialize)]
struct Counts {
    requested: usize,
    already_written: usize,
    succeeded: usize,
    failed: usize,
    failure_log: PathBuf,
}

fn default_failure_log(output: &std::path::Path) -> PathBuf {
    let mut name = OsString::from(output.as_os_str());
    name.push(".failures.jsonl");
    PathBuf::from(name)
}

pub fn run(global: &GlobalArgs, mut config: CliConfig, args: GenerateArgs) -> CmdResult<()> {
    let g = &mut config.generation;
    apply(&mut g.endpoint, args.endpoint);
    apply(&mut g.model, args.model);
    apply(&mut g.mode, args.mode.map(Into::into));
    apply(&mut g.concurrency, args.concurrency);
    apply(&mut g.temperature, args.temperature);
    apply(&mut g.max_tokens, args.max_tokens);
    apply(&mut g.seed, global.seed);
    apply(&mut config.max_failure_rate, args.max_failure_rate);
    apply_path(&mut config.inputs.queries, &args.queries);
    apply_path(&mut config.inputs.pool, &args.pool);

    if !(0.0..=1.0).contains(&config.max_failure_rate) {
        return Err(Failure::usage(format!("max failure rate {} outside [0, 1]", config.max_failure_rate)));
    }
    let queries_path = required(&config.inputs.queries, "--queries")?;
    require_file(queries_path, "queries file")?;
    let queries = read_queries(queries_path)?;
    let pool = match &config.inputs.pool {
        Some(path) => {
            require_file(path, "example pool")?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("example pool {}: {e}", path.display())))?;
            ExamplePool::parse(&text, path)?
        }
        None => ExamplePool::bundled(),
    };
    let client = ChatClient::new(&config.generation)?;
    let failures = args.failures.clone().unwrap_or_else(|| default_failure_log(&args.output));
    let options = GenerateOptions {
        seed: config.generation.seed,
        mode: config.generation.mode,
        concurrency: config.generation.concurrency,
        output: args.output.clone(),
        failures: failures.clone(),
    };

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Internal(e.into()))?;
    let summary = runtime
        .block_on(generate_dataset(&client, &queries, &pool, &options))
        .map_err(|e| Failure::from(e).context(format!("failure log: {}", failures.display())))?;

    print_summary(&Counts {
        requested: summary.planned,
        already_written: summary.already_written,
        succeeded: summary.written,
        failed: summary.failed,
        failure_log: failures.clone(),
    });
    let attempted = summary.written + summary.failed;
    if attempted > 0 {
        let rate = summary.failed as f64 / attempted as f64;
        if rate > config.max_failure_rate {
            return Err(Failure::external(format!(
                "{} of {attempted} queries failed ({:.1}%, limit {:.1}%); failure log: {}",
                summary.failed,
                100.0 * rate,
                100.0 * config.max_failure_rate,
                failures.display()
            )));
        }
        if summary.failed > 0 {
            warn!("{} queries failed; see {}", summary.failed, failures.display());
        }
    }
    Ok(())
}
