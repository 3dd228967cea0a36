//! Behavior trees with explicit dataflow.
//!
//! A tree is written in a small textual language ([`parser`]), checked
//! statically ([`check`]), compiled into a network of reactor-like blocks
//! ([`translate`]) and executed under logical time ([`runtime`]). The
//! [`oracle`] ticks the same tree directly and serves as the reference the
//! compiled form is tested against ([`difftest`]).

pub mod body;
pub mod check;
pub mod difftest;
pub mod expr;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod runtime;
pub mod translate;

pub use body::{ExternOutcome, ExternRegistry};
pub use check::{validate, CheckReport};
pub use model::{BtDef, NodeId, Status, Value, ValueType};
pub use parser::{parse, parse_file, pretty_print, Diagnostic};
