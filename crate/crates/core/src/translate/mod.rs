//! Compilation of a behavior tree into a network of blocks with ports,
//! reactions and connections.
//!
//! Every tree node becomes a block exposing `start`, `success` and
//! `failure`. Composites only wire their children together; the
//! decision logic lives in the connections, plus a collector block per
//! parallel node. Data moves along dedicated forwarding ports, merge blocks
//! pick the latest writer, and a `Pre` block per channel carries values
//! into the next tick for readers that precede a writer.

mod build;
pub mod dot;
mod graph;
pub mod order;

pub use graph::*;

use thiserror::Error;

use crate::check::CheckReport;
use crate::model::BtDef;

/// Deliberate miscompilations, used to check that differential testing
/// notices a broken translator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Wire fallback children like a sequence.
    SwapFallbackWiring,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TranslateOptions {
    pub mutation: Option<Mutation>,
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("definition has {} check finding(s)", .0.items.len())]
    Invalid(CheckReport),
    #[error("internal error: reaction graph has a cycle through {} reaction(s)", .0.len())]
    InternalCycle(Vec<ReactionId>),
}

pub fn translate(def: &BtDef) -> Result<ReactorGraph, TranslateError> {
    translate_with(def, &TranslateOptions::default())
}

pub fn translate_with(def: &BtDef, options: &TranslateOptions) -> Result<ReactorGraph, TranslateError> {
    build::translate(def, options)
}

#[cfg(test)]
mod tests;
