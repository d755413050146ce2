//! Synthetic multi-level ranking contexts from a chat-completion endpoint.
//!
//! For each query a prompt is built from sampled diversity knobs and an in-context example,
//! the endpoint writes four passages of decreasing relevance, and the response is parsed into
//! a graded context.

pub mod client;
pub mod error;
pub mod examples;
pub mod generate;
pub mod knobs;
pub mod prompt;

pub use client::{ChatClient, Completion, GenerationConfig, RetryPolicy, DEFAULT_API_KEY_ENV};
pub use error::{Error, Result};
pub use examples::{sample_example, ExamplePool, InContextExample, BUNDLED_POOL};
pub use generate::{
    generate_dataset, plan_jobs, run_job, FailureRecord, GenerateOptions, GenerateSummary, GenerationJob,
    JobOutcome, MAX_GENERATIONS,
};
pub use knobs::{sample_knobs, Difficulty, NumSentences, PromptKnobs};
pub use prompt::{build_prompt, parse_binary, parse_multilevel, render_example_block, response_to_context, Mode};
