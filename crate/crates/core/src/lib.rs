//! Knowledge-graph question answering driven by a language agent: the agent
//! first writes down what it believes, then explores the graph outward from
//! the question's topic entities until the collected paths answer it.

pub mod answerer;
pub mod backend;
pub mod cli;
pub mod config;
pub mod dot;
pub mod error;
pub mod evalkit;
pub mod explorer;
pub mod gateway;
pub mod ipg;
pub mod metering;
pub mod model;

pub use answerer::{answer_question, AnswerConfig, AnswerOutcome, AnswerSource, Engine};
pub use error::EngineError;
