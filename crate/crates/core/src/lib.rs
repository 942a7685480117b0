//! Subject-centric evaluation of text anonymization.
//!
//! Anonymizers rewrite documents, an LLM adversary re-identifies subjects and
//! infers their PII from the rewritten text, and the inferences are aligned
//! and scored against ground truth to yield collective and individual
//! protection rates alongside span-based and utility metrics.

pub mod adversary;
pub mod anonymizers;
pub mod cli;
pub mod alignment;
pub mod corpus;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod scoring;

#[cfg(test)]
mod testutil;
