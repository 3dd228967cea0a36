//! Execution of a single task or condition body. Both the compiled runtime
//! and the reference interpreter call into this, so a leaf behaves the same
//! under either driver.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::model::{Leaf, ScriptTail, Status, TaskBody, Value, ValueType};

pub type Sources = BTreeMap<String, Option<Value>>;
pub type States = BTreeMap<String, Value>;

/// What a host callback produced for one invocation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternOutcome {
    pub emits: Vec<(String, Value)>,
    pub success: bool,
    pub failure: bool,
}

impl ExternOutcome {
    pub fn status(status: Status) -> Self {
        ExternOutcome {
            emits: Vec::new(),
            success: status == Status::Success,
            failure: status == Status::Failure,
        }
    }

    pub fn running() -> Self {
        Self::status(Status::Running)
    }

    pub fn emit(mut self, target: impl Into<String>, value: Value) -> Self {
        self.emits.push((target.into(), value));
        self
    }
}

/// Host callback behind an `@extern` body. It must be deterministic in its
/// arguments for runs to be reproducible.
pub type ExternFn = dyn Fn(&Sources, &mut States) -> Result<ExternOutcome, String> + Send + Sync;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("extern `{0}` is already registered")]
    DuplicateExtern(String),
}

#[derive(Clone, Default)]
pub struct ExternRegistry {
    callbacks: BTreeMap<String, Arc<ExternFn>>,
}

impl fmt::Debug for ExternRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.callbacks.keys()).finish()
    }
}

impl ExternRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, name: impl Into<String>, callback: F) -> Result<(), RegistryError>
    where
        F: Fn(&Sources, &mut States) -> Result<ExternOutcome, String> + Send + Sync + 'static,
    {
        let name = name.into();
        if self.callbacks.contains_key(&name) {
            return Err(RegistryError::DuplicateExtern(name));
        }
        self.callbacks.insert(name, Arc::new(callback));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Arc<ExternFn>> {
        self.callbacks.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.callbacks.contains_key(name)
    }
}

/// Failure of one leaf invocation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvokeError {
    #[error("task produced both success and failure")]
    DoubleStatus,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("emit to `{0}` which is not a declared effect")]
    UndeclaredEffect(String),
    #[error("type mismatch: `{target}` expects {expected}, got {found}")]
    WrongType {
        target: String,
        expected: ValueType,
        found: ValueType,
    },
    #[error("condition expression yielded {0}, expected bool")]
    NonBoolCondition(ValueType),
    #[error("extern `{name}` failed: {message}")]
    Extern { name: String, message: String },
    #[error("extern `{0}` is not registered")]
    MissingExtern(String),
}

/// Persistent per-leaf state: declared state variables and the script cursor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LeafState {
    pub vars: States,
    pub cursor: usize,
}

impl LeafState {
    pub fn new(leaf: &Leaf) -> Self {
        LeafState {
            vars: leaf.states.iter().map(|s| (s.name.clone(), s.initial.clone())).collect(),
            cursor: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub emits: Vec<(String, Value)>,
    pub status: Status,
}

struct BodyEnv<'a> {
    sources: &'a Sources,
    vars: &'a States,
}

impl crate::expr::Env for BodyEnv<'_> {
    fn lookup(&self, name: &str) -> Option<Option<&Value>> {
        if let Some(v) = self.sources.get(name) {
            return Some(v.as_ref());
        }
        self.vars.get(name).map(Some)
    }
}

/// Runs a leaf body once. `effect_type` gives the declared type of each
/// effect. State is only updated when the invocation succeeds.
pub fn invoke(
    leaf: &Leaf,
    effect_type: &dyn Fn(&str) -> Option<ValueType>,
    sources: &Sources,
    state: &mut LeafState,
    externs: &ExternRegistry,
) -> Result<Invocation, InvokeError> {
    let mut next = state.clone();
    let (emits, success, failure) = match &leaf.body {
        TaskBody::Expr(e) => {
            let env = BodyEnv { sources, vars: &state.vars };
            match e.eval(&env)? {
                Value::Bool(b) => (Vec::new(), b, !b),
                v => return Err(InvokeError::NonBoolCondition(v.ty())),
            }
        }
        TaskBody::Script(script) => {
            let step = &script.steps[state.cursor.min(script.steps.len() - 1)];
            let env = BodyEnv { sources, vars: &state.vars };
            let emits = eval_all(&step.emits, &env)?;
            for (name, value) in eval_all(&step.state_updates, &env)? {
                let declared = leaf.states.iter().find(|s| s.name == name).map(|s| s.ty);
                if let Some(expected) = declared.filter(|t| *t != value.ty()) {
                    return Err(InvokeError::WrongType { target: name, expected, found: value.ty() });
                }
                next.vars.insert(name, value);
            }
            let last = script.steps.len() - 1;
            next.cursor = match script.tail {
                ScriptTail::Loop if state.cursor >= last => 0,
                ScriptTail::Hold if state.cursor >= last => last,
                _ => state.cursor + 1,
            };
            (emits, step.status.success, step.status.failure)
        }
        TaskBody::Extern(name) => {
            let callback = externs.get(name).ok_or_else(|| InvokeError::MissingExtern(name.clone()))?;
            let out = callback(sources, &mut next.vars)
                .map_err(|message| InvokeError::Extern { name: name.clone(), message })?;
            (out.emits, out.success, out.failure)
        }
    };
    if success && failure {
        return Err(InvokeError::DoubleStatus);
    }
    let mut merged: Vec<(String, Value)> = Vec::with_capacity(emits.len());
    for (target, value) in emits {
        if !leaf.effects.contains(&target) {
            return Err(InvokeError::UndeclaredEffect(target));
        }
        if let Some(expected) = effect_type(&target).filter(|t| *t != value.ty()) {
            return Err(InvokeError::WrongType { target, expected, found: value.ty() });
        }
        match merged.iter_mut().find(|(t, _)| *t == target) {
            Some(slot) => slot.1 = value,
            None => merged.push((target, value)),
        }
    }
    *state = next;
    let status = if success {
        Status::Success
    } else if failure {
        Status::Failure
    } else {
        Status::Running
    };
    Ok(Invocation { emits: merged, status })
}

fn eval_all(items: &[(String, Expr)], env: &BodyEnv<'_>) -> Result<Vec<(String, Value)>, EvalError> {
    items.iter().map(|(n, e)| Ok((n.clone(), e.eval(env)?))).collect()
}

/// Message attached to the trace when a condition reports RUNNING.
pub const RUNNING_CONDITION_WARNING: &str = "condition yielded RUNNING";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LeafKind, Script, ScriptStep, StateDecl, StepStatus};

    fn scripted(steps: Vec<ScriptStep>, tail: ScriptTail) -> Leaf {
        Leaf {
            kind: LeafKind::Task,
            label: "t".into(),
            sources: vec!["x".into()],
            effects: vec!["y".into()],
            states: vec![StateDecl { name: "n".into(), ty: ValueType::Int, initial: Value::Int(0), span: Default::default() }],
            body: TaskBody::Script(Script { steps, tail }),
        }
    }

    fn step(status: Status) -> ScriptStep {
        ScriptStep {
            emits: vec![("y".into(), Expr::var("n"))],
            state_updates: vec![("n".into(), Expr::bin(crate::expr::BinOp::Add, Expr::var("n"), Expr::lit(Value::Int(1))))],
            status: StepStatus::of(status),
        }
    }

    fn int_type(_: &str) -> Option<ValueType> {
        Some(ValueType::Int)
    }

    #[test]
    fn script_reads_snapshot_and_advances() {
        let leaf = scripted(vec![step(Status::Running), step(Status::Success)], ScriptTail::Loop);
        let mut st = LeafState::new(&leaf);
        let src: Sources = [("x".to_string(), None)].into();
        let reg = ExternRegistry::new();
        let statuses: Vec<_> = (0..4)
            .map(|_| invoke(&leaf, &int_type, &src, &mut st, &reg).unwrap())
            .map(|inv| (inv.status, inv.emits[0].1.clone()))
            .collect();
        assert_eq!(
            statuses,
            vec![
                (Status::Running, Value::Int(0)),
                (Status::Success, Value::Int(1)),
                (Status::Running, Value::Int(2)),
                (Status::Success, Value::Int(3)),
            ]
        );
    }

    #[test]
    fn hold_repeats_last_step() {
        let leaf = scripted(vec![step(Status::Running), step(Status::Failure)], ScriptTail::Hold);
        let mut st = LeafState::new(&leaf);
        let reg = ExternRegistry::new();
        let got: Vec<_> = (0..4)
            .map(|_| invoke(&leaf, &int_type, &Sources::new(), &mut st, &reg).unwrap().status)
            .collect();
        assert_eq!(got, vec![Status::Running, Status::Failure, Status::Failure, Status::Failure]);
    }

    #[test]
    fn double_status_is_rejected_without_state_change() {
        let mut s = step(Status::Success);
        s.status.failure = true;
        let leaf = scripted(vec![s], ScriptTail::Loop);
        let mut st = LeafState::new(&leaf);
        let err = invoke(&leaf, &int_type, &Sources::new(), &mut st, &ExternRegistry::new()).unwrap_err();
        assert_eq!(err, InvokeError::DoubleStatus);
        assert_eq!(st, LeafState::new(&leaf));
    }

    #[test]
    fn extern_callbacks_share_the_status_check() {
        let mut reg = ExternRegistry::new();
        reg.register("both", |_, _| Ok(ExternOutcome { emits: vec![], success: true, failure: true }))
            .unwrap();
        reg.register("ok", |_, _| Ok(ExternOutcome::status(Status::Success))).unwrap();
        assert_eq!(
            reg.register("ok", |_, _| Ok(ExternOutcome::running())),
            Err(RegistryError::DuplicateExtern("ok".into()))
        );
        let mut leaf = scripted(vec![], ScriptTail::Loop);
        leaf.body = TaskBody::Extern("both".into());
        let mut st = LeafState::new(&leaf);
        assert_eq!(
            invoke(&leaf, &int_type, &Sources::new(), &mut st, &reg),
            Err(InvokeError::DoubleStatus)
        );
        leaf.body = TaskBody::Extern("ok".into());
        assert_eq!(invoke(&leaf, &int_type, &Sources::new(), &mut st, &reg).unwrap().status, Status::Success);
    }

    #[test]
    fn emit_type_is_checked() {
        let mut s = step(Status::Success);
        s.emits = vec![("y".into(), Expr::lit(Value::Bool(true)))];
        let leaf = scripted(vec![s], ScriptTail::Loop);
        let err = invoke(&leaf, &int_type, &Sources::new(), &mut LeafState::new(&leaf), &ExternRegistry::new());
        assert!(matches!(err, Err(InvokeError::WrongType { .. })));
    }
}
