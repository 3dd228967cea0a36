//! Expression language used inside task bodies.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::value::Value;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Expr {
    Lit(Value),
    /// Read of a source or state variable.
    Ref(String),
    /// `present(name)`: whether an event is present on a source.
    Present(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `if(cond, then, else)`, evaluates only the selected branch.
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; all binary operators are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

const UNARY_PREC: u8 = 7;
const ATOM_PREC: u8 = 8;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("read of absent `{0}`")]
    ReadOfAbsent(String),
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow in `{0}`")]
    Overflow(&'static str),
}

/// Name resolution for expression evaluation. `None` means unbound,
/// `Some(None)` means bound but absent at this tag.
pub trait Env {
    fn lookup(&self, name: &str) -> Option<Option<&Value>>;
}

impl Env for BTreeMap<String, Option<Value>> {
    fn lookup(&self, name: &str) -> Option<Option<&Value>> {
        self.get(name).map(Option::as_ref)
    }
}

impl Expr {
    pub fn lit(v: Value) -> Expr {
        Expr::Lit(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Ref(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn eval(&self, env: &dyn Env) -> Result<Value, EvalError> {
        match self {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Ref(name) => match env.lookup(name) {
                None => Err(EvalError::Unbound(name.clone())),
                Some(None) => Err(EvalError::ReadOfAbsent(name.clone())),
                Some(Some(v)) => Ok(v.clone()),
            },
            Expr::Present(name) => match env.lookup(name) {
                None => Err(EvalError::Unbound(name.clone())),
                Some(v) => Ok(Value::Bool(v.is_some())),
            },
            Expr::Unary(op, e) => {
                let v = e.eval(env)?;
                match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(i)) => {
                        i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow("-"))
                    }
                    (UnOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
                    (op, v) => Err(EvalError::TypeMismatch(format!(
                        "`{}` applied to {}",
                        if *op == UnOp::Not { "!" } else { "-" },
                        v.ty()
                    ))),
                }
            }
            Expr::If(c, t, e) => match c.eval(env)? {
                Value::Bool(true) => t.eval(env),
                Value::Bool(false) => e.eval(env),
                v => Err(EvalError::TypeMismatch(format!("`if` condition is {}", v.ty()))),
            },
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let lhs = expect_bool(*op, l.eval(env)?)?;
                match (op, lhs) {
                    (BinOp::And, false) => Ok(Value::Bool(false)),
                    (BinOp::Or, true) => Ok(Value::Bool(true)),
                    _ => Ok(Value::Bool(expect_bool(*op, r.eval(env)?)?)),
                }
            }
            Expr::Binary(op, l, r) => {
                let lhs = l.eval(env)?;
                let rhs = r.eval(env)?;
                apply_binary(*op, lhs, rhs)
            }
        }
    }

    /// Identifiers read by this expression, including `present` operands.
    pub fn free_names(&self, out: &mut Vec<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Ref(n) | Expr::Present(n) => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            Expr::Unary(_, e) => e.free_names(out),
            Expr::Binary(_, l, r) => {
                l.free_names(out);
                r.free_names(out);
            }
            Expr::If(c, t, e) => {
                c.free_names(out);
                t.free_names(out);
                e.free_names(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => UNARY_PREC,
            _ => ATOM_PREC,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Lit(v) => write!(f, "{v}")?,
            Expr::Ref(n) => f.write_str(n)?,
            Expr::Present(n) => write!(f, "present({n})")?,
            Expr::Unary(op, e) => {
                f.write_str(if *op == UnOp::Not { "!" } else { "-" })?;
                // A negated numeric literal would re-lex as a signed literal.
                let wrap_lit = *op == UnOp::Neg
                    && matches!(**e, Expr::Lit(Value::Int(_) | Value::Float(_)));
                if wrap_lit {
                    write!(f, "({e})")?;
                } else {
                    e.fmt_prec(f, UNARY_PREC)?;
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)?;
            }
            Expr::If(c, t, e) => write!(f, "if({c}, {t}, {e})")?,
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

fn expect_bool(op: BinOp, v: Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        v => Err(EvalError::TypeMismatch(format!(
            "`{}` operand is {}",
            op.symbol(),
            v.ty()
        ))),
    }
}

fn apply_binary(op: BinOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    use BinOp::*;
    use Value::*;
    let mismatch = |l: &Value, r: &Value| {
        EvalError::TypeMismatch(format!("{} {} {}", l.ty(), op.symbol(), r.ty()))
    };
    Ok(match (op, &lhs, &rhs) {
        (Eq, l, r) | (Ne, l, r) => {
            if l.ty() != r.ty() {
                return Err(mismatch(l, r));
            }
            Bool((l == r) == (op == Eq))
        }
        (Lt | Le | Gt | Ge, Int(a), Int(b)) => Bool(compare(op, a.partial_cmp(b))),
        (Lt | Le | Gt | Ge, Float(a), Float(b)) => Bool(compare(op, a.partial_cmp(b))),
        (Lt | Le | Gt | Ge, String(a), String(b)) => Bool(compare(op, a.partial_cmp(b))),
        (Add, String(a), String(b)) => String(format!("{a}{b}")),
        (Add, Int(a), Int(b)) => Int(a.checked_add(*b).ok_or(EvalError::Overflow("+"))?),
        (Sub, Int(a), Int(b)) => Int(a.checked_sub(*b).ok_or(EvalError::Overflow("-"))?),
        (Mul, Int(a), Int(b)) => Int(a.checked_mul(*b).ok_or(EvalError::Overflow("*"))?),
        (Div | Rem, Int(_), Int(0)) => return Err(EvalError::DivisionByZero),
        (Div, Int(a), Int(b)) => Int(a.checked_div(*b).ok_or(EvalError::Overflow("/"))?),
        (Rem, Int(a), Int(b)) => Int(a.checked_rem(*b).ok_or(EvalError::Overflow("%"))?),
        (Add, Float(a), Float(b)) => Float(a + b),
        (Sub, Float(a), Float(b)) => Float(a - b),
        (Mul, Float(a), Float(b)) => Float(a * b),
        (Div, Float(a), Float(b)) => Float(a / b),
        (Rem, Float(a), Float(b)) => Float(a % b),
        (_, l, r) => return Err(mismatch(l, r)),
    })
}

fn compare(op: BinOp, ord: Option<std::cmp::Ordering>) -> bool {
    use std::cmp::Ordering::*;
    match (op, ord) {
        (_, None) => false,
        (BinOp::Lt, Some(o)) => o == Less,
        (BinOp::Le, Some(o)) => o != Greater,
        (BinOp::Gt, Some(o)) => o == Greater,
        (BinOp::Ge, Some(o)) => o != Less,
        _ => unreachable!("not a comparison"),
    }
}
