//! Structured financial chain-of-thought evaluation harness.
//!
//! The crate covers the whole pipeline: expert blueprints written as Mermaid
//! flowcharts, byte-exact prompt assembly for four prompting strategies,
//! domain routing, chat-completion clients, answer extraction, scoring,
//! paired bootstrap statistics and a token cost simulator.

pub mod blueprint;
pub mod costsim;
pub mod dataset;
pub mod domain;
pub mod evaluation;
pub mod extraction;
pub mod inference;
pub mod jsonl;
pub mod pipeline;
pub mod pool;
pub mod prompting;
pub mod report;
pub mod routing;
pub mod stats;

pub use domain::{AnswerLetter, DomainCode};
pub use prompting::{FinCotMode, McqItem, PromptStrategy};
