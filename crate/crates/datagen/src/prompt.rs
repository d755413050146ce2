//! Prompt rendering and response parsing.
//!
//! Generated passages are delimited by heading markers on their own line. Multi-level prompts
//! ask for `### Level 3` down to `### Level 0`; binary prompts ask for `### Positive`,
//! `### Negative 1` and `### Negative 2`. Anything before the first marker is ignored.

use std::fmt::Write as _;

use gradrank_core::ranking::{Passage, Query, RankingContext};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::examples::InContextExample;
use crate::knobs::PromptKnobs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Multilevel,
    Binary,
}

pub const LEVEL_MARKER: &str = "### Level";
pub const LEVEL_MARKERS: [&str; 4] = ["### Level 3", "### Level 2", "### Level 1", "### Level 0"];
pub const BINARY_MARKERS: [&str; 3] = ["### Positive", "### Negative 1", "### Negative 2"];
const BINARY_FAMILIES: [&str; 2] = ["### Positive", "### Negative"];

/// Grade given to the generated positive in binary mode.
pub const BINARY_POSITIVE_GRADE: u8 = 1;

const LEVEL_DEFINITIONS: &str = "\
Relevance levels, from the TREC Deep Learning judging guidelines:
- Perfectly relevant: the passage is dedicated to the query and contains the exact answer.
- Highly relevant: the passage has some answer for the query, but the answer may be a bit unclear, or hidden amongst extraneous information.
- Related: the passage seems related to the query but does not answer it.
- Irrelevant: the passage has nothing to do with the query.
";

fn knob_clauses(knobs: &PromptKnobs, answer_passage: &str) -> String {
    let mut out = String::new();
    if let Some(n) = knobs.num_sentences.count() {
        let _ = writeln!(out, "- Each passage should be about {n} sentences long.");
    }
    if let Some(level) = knobs.difficulty.label() {
        let _ = writeln!(out, "- Write for a reader with a {level} level of education.");
    }
    if knobs.avoid_first_sentence {
        let _ = writeln!(
            out,
            "- Do not answer the query in the very first sentence of the {answer_passage} passage."
        );
    }
    out
}

/// The example block: the query line followed by the four marked passages.
pub fn render_example_block(example: &InContextExample) -> String {
    let mut out = format!("Query: {}\n", example.query.trim());
    for (marker, text) in LEVEL_MARKERS.iter().zip(&example.passages) {
        let _ = write!(out, "{marker}\n{}\n", text.trim());
    }
    out
}

fn multilevel_prompt(query: &Query, example: &InContextExample, knobs: &PromptKnobs) -> String {
    let mut out = String::new();
    out.push_str(
        "You are helping to build a search relevance dataset. Given a search query, write four passages that a search engine might retrieve for it, each at a different level of relevance.\n\n",
    );
    out.push_str(LEVEL_DEFINITIONS);
    out.push_str(
        "\nWrite the four passages one after another in decreasing order of relevance: perfectly relevant, highly relevant, related, irrelevant. Make each passage clearly less relevant than the ones you have already written.\n",
    );
    let clauses = knob_clauses(knobs, "perfectly relevant");
    if !clauses.is_empty() {
        out.push_str("\nAdditional requirements:\n");
        out.push_str(&clauses);
    }
    out.push_str("\nPut every passage under its heading, exactly in this format, and write nothing else:\n");
    for (marker, what) in LEVEL_MARKERS
        .iter()
        .zip(["perfectly relevant", "highly relevant", "related", "irrelevant"])
    {
        let _ = writeln!(out, "{marker}\n<{what} passage>");
    }
    out.push_str("\nExample\n");
    out.push_str(&render_example_block(example));
    let _ = write!(out, "\nNow write the four passages.\nQuery: {}\n", query.text.trim());
    out
}

fn binary_prompt(query: &Query, knobs: &PromptKnobs) -> String {
    let mut out = String::new();
    out.push_str(
        "You have been assigned a retrieval task: given a search query, write one passage that answers it and two hard negative passages.\n\n",
    );
    let _ = writeln!(out, "Query: {}\n", query.text.trim());
    out.push_str("Requirements:\n");
    out.push_str("- The positive passage must be relevant to the query and answer it.\n");
    out.push_str(
        "- Each negative passage must look similar to the positive one, sharing its topic or vocabulary, but must not answer the query.\n",
    );
    out.push_str(&knob_clauses(knobs, "positive"));
    out.push_str("\nPut every passage under its heading, exactly in this format, and write nothing else:\n");
    for (marker, what) in BINARY_MARKERS.iter().zip(["positive", "first negative", "second negative"]) {
        let _ = writeln!(out, "{marker}\n<{what} passage>");
    }
    out
}

/// Renders the prompt. Binary mode is zero-shot and does not use the example.
pub fn build_prompt(query: &Query, example: &InContextExample, knobs: &PromptKnobs, mode: Mode) -> String {
    match mode {
        Mode::Multilevel => multilevel_prompt(query, example, knobs),
        Mode::Binary => binary_prompt(query, knobs),
    }
}

/// Which expected marker, if any, a heading line names.
fn marker_at(line: &str, markers: &[&str]) -> Option<usize> {
    markers.iter().position(|m| {
        line.strip_prefix(m)
            .is_some_and(|rest| rest.chars().next().is_none_or(|c| !c.is_alphanumeric()))
    })
}

fn section_name(marker: &str) -> String {
    marker.trim_start_matches('#').trim().to_lowercase()
}

/// Splits `response` into one section per marker, in marker order.
fn split_sections(response: &str, markers: &[&str], families: &[&str]) -> Result<Vec<String>> {
    let mut sections: Vec<Option<Vec<&str>>> = vec![None; markers.len()];
    let mut current: Option<usize> = None;
    for line in response.lines() {
        let trimmed = line.trim();
        let heading = families.iter().any(|f| {
            trimmed
                .strip_prefix(f)
                .is_some_and(|rest| rest.chars().next().is_none_or(|c| !c.is_alphabetic()))
        });
        if !heading {
            if let Some(i) = current {
                sections[i].as_mut().expect("open section").push(line);
            }
            continue;
        }
        let Some(i) = marker_at(trimmed, markers) else {
            return Err(Error::parse(format!("unexpected marker {trimmed:?}"), response));
        };
        if sections[i].is_some() {
            return Err(Error::parse(format!("duplicate {}", section_name(markers[i])), response));
        }
        if let Some(prev) = current {
            if i < prev {
                return Err(Error::parse(
                    format!("{} out of order", section_name(markers[i])),
                    response,
                ));
            }
        }
        sections[i] = Some(Vec::new());
        current = Some(i);
    }
    let mut out = Vec::with_capacity(markers.len());
    for (marker, lines) in markers.iter().zip(sections) {
        let Some(lines) = lines else {
            return Err(Error::parse(format!("missing {}", section_name(marker)), response));
        };
        let text = lines.join("\n").trim().to_string();
        if text.is_empty() {
            return Err(Error::parse(format!("empty {}", section_name(marker)), response));
        }
        out.push(text);
    }
    Ok(out)
}

/// Four `(text, grade)` pairs graded 3, 2, 1, 0.
pub fn parse_multilevel(response: &str) -> Result<Vec<(String, u8)>> {
    let sections = split_sections(response, &LEVEL_MARKERS, &[LEVEL_MARKER])?;
    Ok(sections.into_iter().zip([3u8, 2, 1, 0]).collect())
}

/// Positive, first negative, second negative.
pub fn parse_binary(response: &str) -> Result<Vec<String>> {
    split_sections(response, &BINARY_MARKERS, &BINARY_FAMILIES)
}

/// Parses a response into a context for `query`.
pub fn response_to_context(query: &Query, response: &str, mode: Mode) -> Result<RankingContext> {
    let graded: Vec<(Passage, u8)> = match mode {
        Mode::Multilevel => parse_multilevel(response)?
            .into_iter()
            .map(|(text, g)| (Passage::synthetic(format!("{}-L{g}", query.id), text), g))
            .collect(),
        Mode::Binary => parse_binary(response)?
            .into_iter()
            .zip(["P", "N1", "N2"])
            .map(|(text, suffix)| {
                let grade = if suffix == "P" { BINARY_POSITIVE_GRADE } else { 0 };
                (Passage::synthetic(format!("{}-{suffix}", query.id), text), grade)
            })
            .collect(),
    };
    Ok(RankingContext::from_graded(query.clone(), graded)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knobs::{Difficulty, NumSentences};

    fn example() -> InContextExample {
        InContextExample {
            query: "what is rust".into(),
            passages: [
                "Rust is a systems language.".into(),
                "Rust has a borrow checker.\nIt is strict.".into(),
                "Iron oxide is also called rust.".into(),
                "Bananas are yellow.".into(),
            ],
        }
    }

    fn reason(r: Result<Vec<(String, u8)>>) -> String {
        match r {
            Err(Error::Parse { reason, raw }) => {
                assert!(!raw.is_empty());
                reason
            }
            other => panic!("expected a parse failure, got {other:?}"),
        }
    }

    #[test]
    fn plain_knobs_add_no_clauses() {
        let p = build_prompt(&Query::new("q", "why is the sky blue"), &example(), &PromptKnobs::PLAIN, Mode::Multilevel);
        assert!(!p.contains("sentences long"));
        assert!(!p.contains("level of education"));
        assert!(!p.contains("very first sentence"));
        assert!(!p.contains("Additional requirements"));
    }

    #[test]
    fn knob_clauses_rendered() {
        let knobs = PromptKnobs {
            num_sentences: NumSentences::Five,
            difficulty: Difficulty::Phd,
            avoid_first_sentence: true,
        };
        let p = build_prompt(&Query::new("q", "why is the sky blue"), &example(), &knobs, Mode::Multilevel);
        assert!(p.contains("about 5 sentences long"));
        assert!(p.contains("PhD level"));
        assert!(p.contains("very first sentence of the perfectly relevant passage"));
    }

    #[test]
    fn four_markers_in_instruction_and_four_in_example() {
        let p = build_prompt(&Query::new("q", "why is the sky blue"), &example(), &PromptKnobs::PLAIN, Mode::Multilevel);
        let (instruction, example_part) = p.split_once("\nExample\n").unwrap();
        assert_eq!(instruction.matches(LEVEL_MARKER).count(), 4);
        assert_eq!(example_part.matches(LEVEL_MARKER).count(), 4);
        for m in LEVEL_MARKERS {
            assert_eq!(instruction.matches(m).count(), 1);
            assert_eq!(example_part.matches(m).count(), 1);
        }
    }

    #[test]
    fn binary_prompt_markers() {
        let p = build_prompt(&Query::new("q", "why is the sky blue"), &example(), &PromptKnobs::PLAIN, Mode::Binary);
        for m in BINARY_MARKERS {
            assert_eq!(p.matches(m).count(), 1);
        }
        assert!(!p.contains(LEVEL_MARKER));
    }

    #[test]
    fn example_block_round_trips() {
        let ex = example();
        let parsed = parse_multilevel(&render_example_block(&ex)).unwrap();
        let texts: Vec<&str> = parsed.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(texts, ex.passages.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(parsed.iter().map(|(_, g)| *g).collect::<Vec<_>>(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn leading_chatter_ignored() {
        let r = "Sure! Here you go.\n### Level 3\na\n### Level 2\nb\n### Level 1\nc\n### Level 0\nd\n";
        assert_eq!(parse_multilevel(r).unwrap().len(), 4);
    }

    #[test]
    fn heading_decorations_accepted() {
        let r = "### Level 3 (perfectly relevant)\na\n### Level 2:\nb\n  ### Level 1\nc\n### Level 0\nd";
        let parsed = parse_multilevel(r).unwrap();
        assert_eq!(parsed[2].0, "c");
    }

    #[test]
    fn failures_name_the_problem() {
        assert_eq!(reason(parse_multilevel("### Level 3\na\n### Level 2\nb\n### Level 1\nc\n")), "missing level 0");
        assert_eq!(
            reason(parse_multilevel("### Level 3\na\n### Level 3\nb\n### Level 1\nc\n### Level 0\nd")),
            "duplicate level 3"
        );
        assert_eq!(
            reason(parse_multilevel("### Level 3\na\n### Level 1\nb\n### Level 2\nc\n### Level 0\nd")),
            "level 2 out of order"
        );
        assert_eq!(
            reason(parse_multilevel("### Level 3\na\n### Level 2\n\n### Level 1\nc\n### Level 0\nd")),
            "empty level 2"
        );
        assert!(reason(parse_multilevel("### Level 4\na")).starts_with("unexpected marker"));
        assert_eq!(reason(parse_multilevel("no markers at all")), "missing level 3");
    }

    #[test]
    fn binary_parse_and_ids() {
        let r = "### Positive\np\n### Negative 1\nn1\n### Negative 2\nn2";
        let ctx = response_to_context(&Query::new("q7", "x"), r, Mode::Binary).unwrap();
        let ids: Vec<&str> = ctx.entries.iter().map(|e| e.passage.id.as_str()).collect();
        assert_eq!(ids, ["q7-P", "q7-N1", "q7-N2"]);
        assert_eq!(ctx.grades(), vec![1, 0, 0]);
        assert!(parse_binary("### Positive\np\n### Negative 1\nn1").is_err());
    }

    #[test]
    fn multilevel_ids() {
        let r = "### Level 3\na\n### Level 2\nb\n### Level 1\nc\n### Level 0\nd";
        let ctx = response_to_context(&Query::new("q1", "x"), r, Mode::Multilevel).unwrap();
        let ids: Vec<&str> = ctx.entries.iter().map(|e| e.passage.id.as_str()).collect();
        assert_eq!(ids, ["q1-L3", "q1-L2", "q1-L1", "q1-L0"]);
    }
}
