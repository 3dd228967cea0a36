use std::sync::Arc;

use crate::model::Span;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    /// Literal digits, kept as text so a leading minus can be folded in.
    Int(String),
    Float(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Comma,
    Semi,
    Arrow,
    Assign,
    BodyOpen,
    BodyClose,
    At,
    Not,
    AndAnd,
    OrOr,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(_) | Tok::Float(_) => "number".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Arrow => "->",
            Tok::Assign => "=",
            Tok::BodyOpen => "{=",
            Tok::BodyClose => "=}",
            Tok::At => "@",
            Tok::Not => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            _ => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub struct LexError {
    pub span: Span,
    pub message: String,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> (u32, u32) {
        (self.line, self.col)
    }
}

/// Splits source text into tokens. Always ends with an `Eof` token.
pub fn lex(file: &Arc<str>, text: &str) -> (Vec<Token>, Vec<LexError>) {
    let mut cur = Cursor { chars: text.chars().peekable(), line: 1, col: 1 };
    let mut toks = Vec::new();
    let mut errors = Vec::new();
    let span = |s: (u32, u32), e: (u32, u32)| Span::new(file.clone(), s, e);

    while let Some(c) = cur.peek() {
        let start = cur.pos();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.peek2() == Some('/') {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(c) = cur.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
                s.push(c);
                cur.bump();
            }
            Tok::Ident(s)
        } else if c.is_ascii_digit() {
            lex_number(&mut cur)
        } else if c == '"' {
            cur.bump();
            let mut s = String::new();
            let mut closed = false;
            while let Some(c) = cur.bump() {
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => match cur.bump() {
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some('r') => s.push('\r'),
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        Some(other) => {
                            errors.push(LexError {
                                span: span(start, cur.pos()),
                                message: format!("unknown escape `\\{other}`"),
                            });
                        }
                        None => break,
                    },
                    '\n' => break,
                    c => s.push(c),
                }
            }
            if !closed {
                errors.push(LexError { span: span(start, cur.pos()), message: "unterminated string literal".into() });
            }
            Tok::Str(s)
        } else {
            cur.bump();
            let next = cur.peek();
            let mut two = |t: Tok| {
                cur.bump();
                t
            };
            match (c, next) {
                ('{', Some('=')) => two(Tok::BodyOpen),
                ('=', Some('}')) => two(Tok::BodyClose),
                ('=', Some('=')) => two(Tok::EqEq),
                ('!', Some('=')) => two(Tok::Ne),
                ('<', Some('=')) => two(Tok::Le),
                ('>', Some('=')) => two(Tok::Ge),
                ('-', Some('>')) => two(Tok::Arrow),
                ('&', Some('&')) => two(Tok::AndAnd),
                ('|', Some('|')) => two(Tok::OrOr),
                ('{', _) => Tok::LBrace,
                ('}', _) => Tok::RBrace,
                ('(', _) => Tok::LParen,
                (')', _) => Tok::RParen,
                (':', _) => Tok::Colon,
                (',', _) => Tok::Comma,
                (';', _) => Tok::Semi,
                ('=', _) => Tok::Assign,
                ('@', _) => Tok::At,
                ('!', _) => Tok::Not,
                ('<', _) => Tok::Lt,
                ('>', _) => Tok::Gt,
                ('+', _) => Tok::Plus,
                ('-', _) => Tok::Minus,
                ('*', _) => Tok::Star,
                ('/', _) => Tok::Slash,
                ('%', _) => Tok::Percent,
                (c, _) => {
                    errors.push(LexError {
                        span: span(start, cur.pos()),
                        message: format!("unexpected character `{}`", c.escape_debug()),
                    });
                    continue;
                }
            }
        };
        toks.push(Token { tok, span: span(start, cur.pos()) });
    }
    let end = cur.pos();
    toks.push(Token { tok: Tok::Eof, span: span(end, end) });
    (toks, errors)
}

fn lex_number(cur: &mut Cursor<'_>) -> Tok {
    let mut s = String::new();
    let mut float = false;
    let digits = |cur: &mut Cursor<'_>, s: &mut String| {
        while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
            s.push(d);
            cur.bump();
        }
    };
    digits(cur, &mut s);
    if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
        float = true;
        s.push('.');
        cur.bump();
        digits(cur, &mut s);
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let mut probe = cur.chars.clone();
        probe.next();
        let mut sign = None;
        if let Some(c @ ('+' | '-')) = probe.peek().copied() {
            sign = Some(c);
            probe.next();
        }
        if probe.peek().is_some_and(char::is_ascii_digit) {
            float = true;
            s.push('e');
            cur.bump();
            if let Some(c) = sign {
                s.push(c);
                cur.bump();
            }
            digits(cur, &mut s);
        }
    }
    if float {
        Tok::Float(s)
    } else {
        Tok::Int(s)
    }
}
