// Grammar:
//
// def      -> 'behaviortree' IDENT '{' port* node '}'
// port     -> ('input' | 'output') IDENT ':' TYPE
// node     -> composite | leaf
// composite-> ('sequence' | 'fallback' | 'parallel' ('(' INT ')')?) '{' chan* node+ '}'
// chan     -> 'channel' IDENT ':' TYPE
// leaf     -> ('task' | 'condition') STRING iface? body
// iface    -> '(' refs? ')' ('->' '(' refs? ')')?
// body     -> '{=' text '=}' | '{' state* 'reaction' iface? '{=' text '=}' '}'
// state    -> 'state' IDENT ':' TYPE '=' literal
// text     -> '@extern' IDENT | '@expr' expr | '@script' step+ ('loop' | 'hold')
// step     -> 'step' '{' (('emit' | 'state') IDENT '=' expr ';')* 'status' status (',' status)* '}'
//
// expr     -> or ; or -> and ('||' and)* ; and -> eq ('&&' eq)*
// eq       -> cmp (('==' | '!=') cmp)* ; cmp -> add (('<' | '<=' | '>' | '>=') add)*
// add      -> mul (('+' | '-') mul)* ; mul -> unary (('*' | '/' | '%') unary)*
// unary    -> ('!' | '-') unary | atom
// atom     -> literal | IDENT | 'present' '(' IDENT ')' | 'if' '(' expr ',' expr ',' expr ')' | '(' expr ')'

use std::collections::BTreeSet;

use super::lexer::{Tok, Token};
use super::Diagnostic;
use crate::expr::{BinOp, Expr, UnOp};
use crate::model::{
    is_reserved, BtDef, BtNode, ChannelDecl, Composite, CompositeKind, Direction, Leaf, LeafKind, NodeKind,
    PortDecl, Script, ScriptStep, ScriptTail, Span, StateDecl, StepStatus, TaskBody, Value, ValueType,
};

const NODE_KEYWORDS: [&str; 5] = ["sequence", "fallback", "parallel", "task", "condition"];

/// Marker for an error that has already been recorded as a diagnostic.
pub(super) struct Reported;

type PResult<T> = Result<T, Reported>;

pub(super) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub(super) diags: Vec<Diagnostic>,
}

impl Parser {
    pub(super) fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, diags: Vec::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span.clone()
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&mut self, span: Span, message: impl Into<String>) -> Reported {
        self.diags.push(Diagnostic::error(span, message));
        Reported
    }

    fn unexpected(&mut self, expected: &str) -> Reported {
        let found = self.peek().describe();
        let span = self.span();
        self.error(span, format!("expected {expected}, found {found}"))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => Err(self.unexpected(what)),
        }
    }

    fn value_type(&mut self) -> PResult<ValueType> {
        let (name, span) = self.ident("a type")?;
        ValueType::from_keyword(&name)
            .ok_or_else(|| self.error(span, format!("unknown type `{name}`, expected bool, int, float or string")))
    }

    fn at_node_start(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if NODE_KEYWORDS.contains(&s.as_str()))
    }

    pub(super) fn parse_def(&mut self) -> Option<BtDef> {
        let result = self.def();
        match result {
            Ok(def) if self.diags.is_empty() => Some(def),
            _ => None,
        }
    }

    fn def(&mut self) -> PResult<BtDef> {
        let start = self.expect_keyword("behaviortree")?;
        let (name, _) = self.ident("a behavior tree name")?;
        self.expect(Tok::LBrace)?;
        let mut ports: Vec<PortDecl> = Vec::new();
        while self.at_keyword("input") || self.at_keyword("output") {
            let kw = self.bump();
            let direction = if matches!(&kw.tok, Tok::Ident(s) if s == "input") {
                Direction::Input
            } else {
                Direction::Output
            };
            let (pname, pspan) = self.ident("a port name")?;
            self.expect(Tok::Colon)?;
            let ty = self.value_type()?;
            if is_reserved(&pname) {
                self.error(pspan.clone(), format!("`{pname}` is an implicit port and cannot be declared"));
            } else if ports.iter().any(|p| p.name == pname) {
                self.error(pspan.clone(), format!("duplicate port `{pname}`"));
            }
            ports.push(PortDecl { name: pname, direction, ty, span: kw.span.to(&self.prev_span()) });
        }
        let root = if self.at_node_start() {
            self.node()
        } else {
            return Err(self.unexpected("a root node"));
        };
        while self.at_node_start() {
            let span = self.span();
            self.error(span, "a behavior tree has exactly one root node");
            self.node();
        }
        let end = self.expect(Tok::RBrace)?;
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        let root = root.ok_or(Reported)?;
        Ok(BtDef { name, ports, root, span: start.to(&end) })
    }

    /// Parses a node, recovering to the node's end on error.
    fn node(&mut self) -> Option<BtNode> {
        let start = self.pos;
        match self.node_inner() {
            Ok(node) => Some(node),
            Err(Reported) => {
                self.recover_from(start);
                None
            }
        }
    }

    /// Skips from the keyword at `start` past the node's balanced block, or up
    /// to the next sibling node or enclosing `}`.
    fn recover_from(&mut self, start: usize) {
        self.pos = start + 1;
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::LBrace | Tok::BodyOpen => depth += 1,
                Tok::RBrace | Tok::BodyClose if depth == 0 => return,
                Tok::RBrace | Tok::BodyClose => {
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        return;
                    }
                }
                _ if depth == 0 && self.at_node_start() => return,
                _ => {}
            }
            self.bump();
        }
    }

    fn node_inner(&mut self) -> PResult<BtNode> {
        let (kw, start) = self.ident("a node")?;
        match kw.as_str() {
            "sequence" => self.composite(CompositeKind::Sequence, start, None),
            "fallback" => self.composite(CompositeKind::Fallback, start, None),
            "parallel" => {
                let threshold = if self.eat(&Tok::LParen) {
                    let t = match self.peek().clone() {
                        Tok::Int(text) => {
                            let span = self.bump().span;
                            text.parse::<usize>()
                                .map_err(|_| self.error(span, format!("threshold `{text}` is out of range")))?
                        }
                        _ => return Err(self.unexpected("a threshold")),
                    };
                    self.expect(Tok::RParen)?;
                    Some(t)
                } else {
                    None
                };
                self.composite(CompositeKind::Parallel { threshold: 0 }, start, threshold)
            }
            "task" => self.leaf(LeafKind::Task, start),
            "condition" => self.leaf(LeafKind::Condition, start),
            _ => Err(self.error(start, format!("expected a node, found `{kw}`"))),
        }
    }

    fn composite(&mut self, kind: CompositeKind, start: Span, threshold: Option<usize>) -> PResult<BtNode> {
        self.expect(Tok::LBrace)?;
        let mut channels: Vec<ChannelDecl> = Vec::new();
        let mut children = Vec::new();
        let mut failed = false;
        loop {
            match self.peek() {
                Tok::RBrace | Tok::Eof => break,
                _ if self.at_keyword("channel") => {
                    let kw = self.bump().span;
                    let (name, nspan) = self.ident("a channel name")?;
                    self.expect(Tok::Colon)?;
                    let ty = self.value_type()?;
                    if !children.is_empty() {
                        self.error(kw.clone(), "channel declarations must precede child nodes");
                    }
                    if is_reserved(&name) {
                        self.error(nspan, format!("`{name}` is an implicit port and cannot name a channel"));
                    }
                    channels.push(ChannelDecl { name, ty, span: kw.to(&self.prev_span()) });
                }
                _ if self.at_node_start() => match self.node() {
                    Some(child) => children.push(child),
                    None => failed = true,
                },
                _ => {
                    self.unexpected("a channel or child node");
                    failed = true;
                    self.bump();
                }
            }
        }
        let end = self.expect(Tok::RBrace)?;
        let span = start.to(&end);
        if children.is_empty() && !failed {
            self.error(span.clone(), format!("{} requires at least one child", kind.keyword()));
        }
        let kind = match kind {
            CompositeKind::Parallel { .. } => CompositeKind::Parallel { threshold: threshold.unwrap_or(children.len()) },
            k => k,
        };
        Ok(BtNode { kind: NodeKind::Composite(Composite { kind, channels, children }), span })
    }

    fn iface(&mut self) -> PResult<(Vec<String>, Vec<String>)> {
        let sources = self.ref_list()?;
        let effects = if self.eat(&Tok::Arrow) { self.ref_list()? } else { Vec::new() };
        Ok((sources, effects))
    }

    fn ref_list(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LParen)?;
        let mut refs = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                refs.push(self.ident("a port or channel name")?.0);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma)?;
            }
        }
        Ok(refs)
    }

    fn leaf(&mut self, kind: LeafKind, start: Span) -> PResult<BtNode> {
        let label = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return Err(self.unexpected("a quoted label")),
        };
        let (mut sources, mut effects) = if *self.peek() == Tok::LParen { self.iface()? } else { (vec![], vec![]) };
        let mut states = Vec::new();
        let body = match self.peek() {
            Tok::BodyOpen => self.body_block()?,
            Tok::LBrace => {
                self.bump();
                while self.at_keyword("state") {
                    states.push(self.state_decl()?);
                }
                let reaction = self.expect_keyword("reaction")?;
                if *self.peek() == Tok::LParen {
                    let had_iface = !sources.is_empty() || !effects.is_empty();
                    let (s, e) = self.iface()?;
                    if had_iface {
                        self.error(reaction, "interface declared both on the node and on its reaction");
                    }
                    sources = s;
                    effects = e;
                }
                let body = self.body_block()?;
                self.expect(Tok::RBrace)?;
                body
            }
            _ => return Err(self.unexpected("`{=` or `{`")),
        };
        let span = start.to(&self.prev_span());
        let leaf = Leaf { kind, label, sources, effects, states, body };
        Ok(BtNode { kind: NodeKind::Leaf(leaf), span })
    }

    fn state_decl(&mut self) -> PResult<StateDecl> {
        let kw = self.bump().span;
        let (name, _) = self.ident("a state name")?;
        self.expect(Tok::Colon)?;
        let ty = self.value_type()?;
        self.expect(Tok::Assign)?;
        let initial = self.literal()?;
        Ok(StateDecl { name, ty, initial, span: kw.to(&self.prev_span()) })
    }

    fn literal(&mut self) -> PResult<Value> {
        let negative = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(_) | Tok::Float(_) => {
                let e = self.number(negative)?;
                match e {
                    Expr::Lit(v) => Ok(v),
                    _ => unreachable!("number() yields literals"),
                }
            }
            Tok::Str(s) if !negative => {
                self.bump();
                Ok(Value::String(s))
            }
            Tok::Ident(s) if !negative && (s == "true" || s == "false") => {
                self.bump();
                Ok(Value::Bool(s == "true"))
            }
            _ => Err(self.unexpected("a literal")),
        }
    }

    fn number(&mut self, negative: bool) -> PResult<Expr> {
        let tok = self.bump();
        let sign = if negative { "-" } else { "" };
        match tok.tok {
            Tok::Int(text) => format!("{sign}{text}")
                .parse::<i64>()
                .map(|i| Expr::Lit(Value::Int(i)))
                .map_err(|_| self.error(tok.span, format!("integer literal `{sign}{text}` out of range"))),
            Tok::Float(text) => format!("{sign}{text}")
                .parse::<f64>()
                .map(|x| Expr::Lit(Value::Float(x)))
                .map_err(|_| self.error(tok.span, format!("malformed float literal `{text}`"))),
            _ => unreachable!("caller checked for a number"),
        }
    }

    fn body_block(&mut self) -> PResult<TaskBody> {
        let open = self.expect(Tok::BodyOpen)?;
        let terminated = self.toks[self.pos..].iter().any(|t| t.tok == Tok::BodyClose);
        if !terminated {
            self.pos = self.toks.len() - 1;
            return Err(self.error(open, "unterminated `{=` block"));
        }
        self.expect(Tok::At)?;
        let (kind, kspan) = self.ident("`extern`, `expr` or `script`")?;
        let body = match kind.as_str() {
            "extern" => TaskBody::Extern(self.ident("an extern name")?.0),
            "expr" => TaskBody::Expr(self.expr()?),
            "script" => {
                let mut steps = Vec::new();
                while self.at_keyword("step") {
                    steps.push(self.step()?);
                }
                if steps.is_empty() {
                    return Err(self.unexpected("`step`"));
                }
                let tail = if self.at_keyword("loop") {
                    ScriptTail::Loop
                } else if self.at_keyword("hold") {
                    ScriptTail::Hold
                } else {
                    return Err(self.unexpected("`step`, `loop` or `hold`"));
                };
                self.bump();
                TaskBody::Script(Script { steps, tail })
            }
            other => return Err(self.error(kspan, format!("unknown body kind `@{other}`"))),
        };
        self.expect(Tok::BodyClose)?;
        Ok(body)
    }

    fn step(&mut self) -> PResult<ScriptStep> {
        self.bump();
        self.expect(Tok::LBrace)?;
        let mut emits = Vec::new();
        let mut state_updates = Vec::new();
        while self.at_keyword("emit") || self.at_keyword("state") {
            let is_emit = self.at_keyword("emit");
            self.bump();
            let (target, _) = self.ident("a target name")?;
            self.expect(Tok::Assign)?;
            let value = self.expr()?;
            self.expect(Tok::Semi)?;
            if is_emit {
                emits.push((target, value));
            } else {
                state_updates.push((target, value));
            }
        }
        self.expect_keyword("status")?;
        let mut seen = BTreeSet::new();
        let mut status = StepStatus::default();
        loop {
            let (word, span) = self.ident("`success`, `failure` or `running`")?;
            match word.as_str() {
                "success" => status.success = true,
                "failure" => status.failure = true,
                "running" => {}
                _ => return Err(self.error(span, format!("unknown status `{word}`"))),
            }
            if !seen.insert(word.clone()) || (seen.contains("running") && seen.len() > 1) {
                return Err(self.error(span, "conflicting status list"));
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(ScriptStep { emits, state_updates, status })
    }

    pub(super) fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op().filter(|op| op.precedence() >= min_prec) {
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            Tok::Minus => {
                self.bump();
                if matches!(self.peek(), Tok::Int(_) | Tok::Float(_)) {
                    self.number(true)
                } else {
                    Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
                }
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Float(_) => self.number(false),
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Lit(Value::String(s)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let span = self.bump().span;
                match name.as_str() {
                    "true" => return Ok(Expr::Lit(Value::Bool(true))),
                    "false" => return Ok(Expr::Lit(Value::Bool(false))),
                    _ => {}
                }
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Ref(name));
                }
                self.bump();
                match name.as_str() {
                    "present" => {
                        let (arg, _) = self.ident("a source name")?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Present(arg))
                    }
                    "if" => {
                        let c = self.expr()?;
                        self.expect(Tok::Comma)?;
                        let t = self.expr()?;
                        self.expect(Tok::Comma)?;
                        let e = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)))
                    }
                    _ => Err(self.error(span, format!("unknown function `{name}`"))),
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}
