//! Abstract syntax, values and statuses shared by every stage.

pub mod ast;
pub mod span;
pub mod value;

pub use ast::*;
pub use span::Span;
pub use value::{parallel_status, Status, Value, ValueType};
