//! Pipeline stages wiring the core algorithms to model backends: generation
//! sweeps, the entailment jury, purification, and detection runs.

pub mod detect_run;
pub mod generate;
pub mod judge;
pub mod purify_run;
pub mod scorers;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] f3_core::corpus::CorpusError),
    #[error(transparent)]
    Prompt(#[from] f3_core::prompt::PromptError),
    #[error(transparent)]
    Purify(#[from] f3_core::purify::PurifyError),
    #[error(transparent)]
    Eval(#[from] f3_core::evaluate::EvalError),
    #[error(transparent)]
    Gateway(#[from] f3_gateway::GatewayError),
    #[error(transparent)]
    Scorer(#[from] f3_core::purify::ScorerError),
    #[error("generation source {id} must be a human-written, verified real article")]
    BadSource { id: String },
    #[error("variant {variant} is not a generation variant")]
    NotAGenerationVariant { variant: String },
}

pub use detect_run::{parse_outputs, parse_raw, run_matrix, MatrixOutcome, RawDetection, UnknownRateEntry};
pub use generate::{
    generate_one, merge_outcomes, sweep, sweep_variants, GenerationEntry, GenerationOutcome,
    JobStatus,
};
pub use judge::{entailment_prompt, judge_pair, vote_from_reply, JUDGE_IMPERSONATOR};
pub use purify_run::{run_purify, PurifyOutcome, ThresholdChoice};
pub use scorers::{
    score_pairs, CachedScorer, CommandScorer, FixtureScoreRule, FixtureScorer, FixtureScript,
    HttpScorer, ReplayScorer,
};
