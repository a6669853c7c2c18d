//! Stylometric authorship verification through prompted language models.
//!
//! This crate implements a confidence-score prompting pipeline for the
//! authorship-verification task: given two texts, ask a chat model to
//! compare writing style and emit a confidence score in `[0, 1]` for the
//! likelihood that the texts share an author. The pieces are:
//!
//! - [`corpus`]: author-labeled document loading and seeded pair sampling.
//! - [`features`]: the stylometric variable list injected into prompts.
//! - [`prompt`]: prompt templates and few-shot demonstration handling.
//! - [`gateway`]: a chat-completions client with retries, key rotation,
//!   caching, and record/replay cassettes for hermetic runs.
//! - [`response`]: confidence-score and feature-score extraction from free
//!   text.
//! - [`evaluator`]: batch runs, threshold sweeps, and comparable reports.
//! - [`config`] and [`cli`]: layered run configuration and the `promptav`
//!   binary.
//!
//! # Example
//!
//! Scores parse out of model responses and feed threshold sweeps:
//!
//! ```
//! use promptav::corpus::Label;
//! use promptav::evaluator::{default_grid, sweep_thresholds, PredictionRecord};
//! use promptav::response::extract_overall_score;
//!
//! let score = extract_overall_score(
//!     "Both texts favor short sentences. Overall confidence score: 0.7",
//! )?;
//! assert_eq!(score, 0.7);
//!
//! let records = vec![
//!     PredictionRecord::scored("pair-1", Label::Same, score),
//!     PredictionRecord::scored("pair-2", Label::Different, 0.2),
//! ];
//! let sweep = sweep_thresholds(&records, &default_grid())?;
//! assert_eq!(sweep.best_accuracy, 1.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cli;
pub mod config;
pub mod corpus;
pub mod evaluator;
pub mod features;
pub mod gateway;
pub mod prompt;
pub mod response;

pub use config::{ConfigError, RunConfig, RunManifest};
pub use corpus::{sample_pairs, AuthorDocument, CorpusError, Label, PairSampleSpec, TextPair};
pub use evaluator::{
    accuracy_at, compare_reports, evaluate, sweep_thresholds, EvaluateError, EvaluationReport,
    EvaluationRun, PredictionRecord, ThresholdSweep,
};
pub use features::{FeatureDescriptor, FeatureSet};
pub use gateway::{
    estimate_cost, ChatRequest, ChatResponse, Gateway, GatewayConfig, GatewayError, GatewayMode,
    Money, Rate,
};
pub use prompt::{Demonstration, PromptEngine, PromptError, PromptStrategy};
pub use response::{
    decide, extract_feature_scores, extract_overall_score, parse_response, ExtractOptions,
    ResponseParseError, VerificationOutcome,
};

/// The guide's chapters double as doc-tests: every fenced Rust block in
/// `book/src/` compiles and runs with the test suite, so the documentation
/// cannot drift from the API it describes.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/pair-sampling.md")]
    struct PairSampling;
    #[doc = include_str!("../../../book/src/prompting.md")]
    struct Prompting;
    #[doc = include_str!("../../../book/src/parsing.md")]
    struct Parsing;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/gateway.md")]
    struct TheGateway;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct CommandLine;
}
