//! `analyze`: similarity score distributions per relevance grade.

use std::collections::BTreeMap;

use gradrank_core::encoder::{encode_text, load_params, similarity};
use gradrank_core::metrics::{render_histograms, score_distribution_by_level, LevelSummary};
use serde::{Deserialize, Serialize};

use super::{load_contexts, print_summary};
use crate::args::AnalyzeArgs;
use crate::config::{apply, apply_path, required, CliConfig};
use crate::failure::{require_file, write_json, write_output, CmdResult, Failure};

pub const LEVELS_FILE: &str = "levels.json";
pub const HISTOGRAM_FILE: &str = "histograms.txt";

/// Contents of `levels.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub contexts: usize,
    /// Scored (query, passage) pairs.
    pub pairs: usize,
    /// Summary per grade, keyed by the grade as a string.
    pub levels: BTreeMap<u8, LevelSummary>,
    /// True when mean scores fall strictly from the highest grade present to the lowest.
    pub means_strictly_decreasing: bool,
}

pub fn run(mut config: CliConfig, args: AnalyzeArgs) -> CmdResult<()> {
    apply(&mut config.analyze.bins, args.bins);
    apply(&mut config.analyze.width, args.width);
    apply_path(&mut config.inputs.params, &args.params);
    apply_path(&mut config.inputs.contexts, &args.contexts);
    let a = &config.analyze;
    if a.bins == 0 || a.width == 0 {
        return Err(Failure::usage("histogram bins and width must be ≥ 1"));
    }
    let params_path = required(&config.inputs.params, "--params")?;
    require_file(params_path, "params file")?;
    let params = load_params(params_path)?;
    let contexts = load_contexts(required(&config.inputs.contexts, "--contexts")?)?;
    if contexts.iter().all(|c| c.is_empty()) {
        return Err(Failure::usage("no passages to analyse"));
    }

    let mut scores = Vec::new();
    for ctx in &contexts {
        let q = encode_text(&params, &ctx.query.text)?;
        for e in &ctx.entries {
            scores.push((e.label.grade(), similarity(&q, &encode_text(&params, &e.passage.text)?)?));
        }
    }
    let levels = score_distribution_by_level(&scores)?;
    let means: Vec<f64> = levels.values().map(|s| s.mean).collect();
    let report = LevelReport {
        contexts: contexts.len(),
        pairs: scores.len(),
        means_strictly_decreasing: means.windows(2).all(|w| w[0] < w[1]),
        levels,
    };
    write_json(&args.out.join(LEVELS_FILE), &report)?;
    write_output(&args.out.join(HISTOGRAM_FILE), render_histograms(&scores, a.bins, a.width))?;
    print_summary(&report.levels.iter().map(|(g, s)| (g.to_string(), s.mean)).collect::<BTreeMap<_, _>>());
    Ok(())
}
