//! Text front end: lexer, recursive-descent parser with recovery,
//! canonical printer and a seeded random tree generator.

mod generate;
mod lexer;
mod print;
mod syntax;

use std::fmt;
use std::sync::Arc;

pub use generate::{gen_random_def, GenConfig};
pub use print::pretty_print;

use crate::check::Severity;
use crate::model::{BtDef, Span};

/// A located message produced while reading source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, span, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.severity, self.message)
    }
}

/// Parses a behavior tree definition. Diagnostics are reported in source order.
pub fn parse(text: &str) -> Result<BtDef, Vec<Diagnostic>> {
    parse_file("<input>", text)
}

pub fn parse_file(file: &str, text: &str) -> Result<BtDef, Vec<Diagnostic>> {
    let file: Arc<str> = Arc::from(file);
    let (toks, lex_errors) = lexer::lex(&file, text);
    let mut parser = syntax::Parser::new(toks);
    let def = parser.parse_def();
    let mut diags: Vec<Diagnostic> =
        lex_errors.into_iter().map(|e| Diagnostic::error(e.span, e.message)).collect();
    diags.extend(parser.diags);
    match def {
        Some(def) if diags.is_empty() => Ok(def),
        _ => {
            diags.sort_by_key(|d| (d.span.start_line, d.span.start_col));
            if diags.is_empty() {
                diags.push(Diagnostic::error(Span::new(file, (1, 1), (1, 1)), "invalid behavior tree"));
            }
            Err(diags)
        }
    }
}

/// Like [`parse_file`] for raw bytes, reporting invalid UTF-8 as a diagnostic.
pub fn parse_bytes(file: &str, bytes: &[u8]) -> Result<BtDef, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_file(file, text),
        Err(e) => {
            let valid = std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or_default();
            let line = valid.matches('\n').count() as u32 + 1;
            let col = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
            Err(vec![Diagnostic::error(
                Span::new(Arc::from(file), (line, col), (line, col + 1)),
                "input is not valid UTF-8",
            )])
        }
    }
}

#[cfg(test)]
mod tests;
