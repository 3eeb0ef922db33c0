//! Mutation-based evaluation of LLM code summaries.
//!
//! The pipeline injects one controlled edit into a subject program, collects
//! summaries of both versions under a fixed prompt, routes each summary pair
//! to human raters and analyses the reconciled verdicts.

pub mod analytics;
pub mod cli;
pub mod corpus;
pub mod fsio;
pub mod lang;
pub mod mutation;
pub mod pipeline;
pub mod review;
pub mod store;
pub mod summary;
