//! Deterministic execution of a compiled network under logical time.
//!
//! Each tag is processed in one pass over the reactions in a topological
//! order; every port holds at most one event per tag and connections are
//! instantaneous. Trace events of a tag are put into a canonical order (the
//! depth-first walk of the tree) so that any valid reaction order, and the
//! reference interpreter, produce the same bytes.

mod scenario;
mod trace;

pub use scenario::{Injection, Scenario, TagInputs, TimerSpec};
pub use trace::{EventKind, Tag, Trace, TraceEvent};

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::body::{invoke, ExternRegistry, InvokeError, LeafState, RUNNING_CONDITION_WARNING};
use crate::model::{parallel_status, NodeId, Status, TaskBody, Value, ValueType};
use crate::translate::order::topological_order;
use crate::translate::{BlockId, BlockKind, MergeMode, PortId, PortType, ReactionId, ReactionKind, ReactorGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("{node} at {tag}: task produced both success and failure")]
    DoubleStatus { node: NodeId, tag: Tag },
    #[error("{node} at {tag}: {error}")]
    Task { node: NodeId, tag: Tag, error: InvokeError },
    #[error("{block} at {tag}: more than one status event")]
    MergeConflict { block: String, tag: Tag },
    #[error("unknown port `{0}`")]
    UnknownPort(String),
    #[error("no extern registered as `{name}` (used by \"{label}\")")]
    MissingExtern { name: String, label: String },
    #[error("value for `{port}` has type {found}, expected {expected}")]
    InputType { port: String, expected: String, found: String },
    #[error("tag {tag} does not come after {previous}")]
    TagOrder { tag: Tag, previous: Tag },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("tree does not validate: {0}")]
    Invalid(String),
}

impl RuntimeError {
    /// Maps a failed leaf invocation onto the error and the trace event both
    /// executors report for it.
    pub(crate) fn from_invoke(node: &NodeId, tag: Tag, error: InvokeError) -> (RuntimeError, TraceEvent) {
        let event = TraceEvent::error(tag, node, &error.to_string());
        let err = match error {
            InvokeError::DoubleStatus => RuntimeError::DoubleStatus { node: node.clone(), tag },
            error => RuntimeError::Task { node: node.clone(), tag, error },
        };
        (err, event)
    }
}

/// A failed run together with the trace up to and including the error.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct RunError {
    pub error: RuntimeError,
    pub trace: Trace,
}

/// Everything that persists between tags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct State {
    pub last: Option<Tag>,
    pub leaves: BTreeMap<NodeId, LeafState>,
    /// Buffered channel values, by `Pre` block name.
    pub pre: BTreeMap<String, Option<Value>>,
}

/// Position of an event within its tag: input ports, then the depth-first
/// walk of the tree, then output ports.
type Key = (u8, u32, u8, usize);

const RANK_INVOKED: u8 = 0;
const RANK_PORT: u8 = 1;
const RANK_WARNING: u8 = 2;
const RANK_STATUS: u8 = 3;
const RANK_ERROR: u8 = 4;

#[derive(Clone, Copy, Debug)]
enum Role {
    TreeInput(usize),
    TreeOutput(usize),
    NodeStart(BlockId),
    NodeStatus(BlockId, Status),
    Internal(u32),
}

/// Outcome of a failed [`Runtime::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub error: RuntimeError,
    pub events: Vec<TraceEvent>,
}

pub struct Runtime {
    graph: ReactorGraph,
    externs: ExternRegistry,
    order: Vec<ReactionId>,
    fanout: Vec<Vec<PortId>>,
    roles: Vec<Role>,
    /// Nearest enclosing node block, for keying events of helper blocks.
    owner_walk: Vec<(u32, u32)>,
    full: bool,
}

impl Runtime {
    pub fn new(graph: ReactorGraph, externs: ExternRegistry) -> Result<Runtime, RuntimeError> {
        for block in &graph.blocks {
            if let BlockKind::Task { leaf, .. } = &block.kind {
                if let TaskBody::Extern(name) = &leaf.body {
                    if !externs.contains(name) {
                        return Err(RuntimeError::MissingExtern { name: name.clone(), label: leaf.label.clone() });
                    }
                }
            }
        }
        let fanout = graph.fanout();
        let mut owner_walk = vec![(0, 0); graph.blocks.len()];
        for b in &graph.blocks {
            owner_walk[b.id.0] = match b.node() {
                Some((_, walk, _)) => (walk.enter, walk.exit),
                None => b.parent.map_or((0, 0), |p| owner_walk[p.0]),
            };
        }
        let mut roles: Vec<Role> = graph.ports.iter().map(|p| Role::Internal(owner_walk[p.block.0].0)).collect();
        let (tree, inputs, outputs) = graph.tree();
        roles[tree.start.0] = Role::TreeInput(0);
        for (i, (_, p)) in inputs.iter().enumerate() {
            roles[p.0] = Role::TreeInput(i + 1);
        }
        for (i, (_, p)) in outputs.iter().enumerate() {
            roles[p.0] = Role::TreeOutput(i);
        }
        for b in &graph.blocks {
            if let Some((_, _, boundary)) = b.node() {
                roles[boundary.start.0] = Role::NodeStart(b.id);
                roles[boundary.success.0] = Role::NodeStatus(b.id, Status::Success);
                roles[boundary.failure.0] = Role::NodeStatus(b.id, Status::Failure);
            }
        }
        let order = graph.top_order.clone();
        Ok(Runtime { graph, externs, order, fanout, roles, owner_walk, full: false })
    }

    /// Also trace events on ports internal to the network.
    pub fn with_full_trace(mut self, full: bool) -> Self {
        self.full = full;
        self
    }

    /// Executes reactions in another valid order, derived from `seed`.
    pub fn with_random_order(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.order = topological_order(&self.graph, |_| rng.random_range(0..u64::MAX))
            .expect("translated graphs are acyclic");
        self
    }

    pub fn graph(&self) -> &ReactorGraph {
        &self.graph
    }

    pub fn order(&self) -> &[ReactionId] {
        &self.order
    }

    pub fn initial_state(&self) -> State {
        let mut state = State::default();
        for b in &self.graph.blocks {
            match &b.kind {
                BlockKind::Task { node, leaf, .. } => {
                    state.leaves.insert(node.clone(), LeafState::new(leaf));
                }
                BlockKind::Pre { .. } => {
                    state.pre.insert(b.name.clone(), None);
                }
                _ => {}
            }
        }
        state
    }

    /// Declared inputs of the tree with their types.
    pub fn input_types(&self) -> Vec<(String, ValueType)> {
        let (_, inputs, _) = self.graph.tree();
        inputs.iter().map(|(n, p)| (n.clone(), self.data_type(*p))).collect()
    }

    fn data_type(&self, port: PortId) -> ValueType {
        match self.graph.port(port).ty {
            PortType::Data(t) => t,
            PortType::Pure => unreachable!("data port expected"),
        }
    }

    pub fn run(&self, scenario: &Scenario) -> Result<Trace, RunError> {
        let schedule = scenario
            .schedule(&self.input_types())
            .map_err(|error| RunError { error, trace: Trace::default() })?;
        let mut state = self.initial_state();
        let mut trace = Trace::default();
        for (tag, inputs) in schedule {
            match self.step(&state, tag, &inputs) {
                Ok((next, events)) => {
                    trace.events.extend(events);
                    state = next;
                }
                Err(failure) => {
                    trace.events.extend(failure.events);
                    return Err(RunError { error: failure.error, trace });
                }
            }
        }
        Ok(trace)
    }

    fn write(&self, values: &mut [Option<Option<Value>>], port: PortId, payload: Option<Value>) {
        let mut stack = vec![port];
        while let Some(p) = stack.pop() {
            values[p.0] = Some(payload.clone());
            stack.extend(self.fanout[p.0].iter().copied());
        }
    }

    /// Processes one tag. Pure in `state`: the new state is returned.
    pub fn step(&self, state: &State, tag: Tag, inputs: &[(String, Option<Value>)]) -> Result<(State, Vec<TraceEvent>), StepFailure> {
        let fail = |error| StepFailure { error, events: Vec::new() };
        if let Some(previous) = state.last.filter(|p| *p >= tag) {
            return Err(fail(RuntimeError::TagOrder { tag, previous }));
        }
        let g = &self.graph;
        let mut values: Vec<Option<Option<Value>>> = vec![None; g.ports.len()];
        let (tree, tree_inputs, _) = g.tree();
        for (name, value) in inputs {
            if name == "start" {
                if let Some(v) = value {
                    return Err(fail(RuntimeError::InputType {
                        port: name.clone(),
                        expected: "pure event".into(),
                        found: v.ty().to_string(),
                    }));
                }
                self.write(&mut values, tree.start, None);
                continue;
            }
            let port = tree_inputs
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, p)| *p)
                .ok_or_else(|| fail(RuntimeError::UnknownPort(name.clone())))?;
            let expected = self.data_type(port);
            match value {
                Some(v) if v.ty() == expected => self.write(&mut values, port, Some(v.clone())),
                _ => {
                    return Err(fail(RuntimeError::InputType {
                        port: name.clone(),
                        expected: expected.to_string(),
                        found: value.as_ref().map_or("pure event".into(), |v| v.ty().to_string()),
                    }))
                }
            }
        }

        let mut next = state.clone();
        next.last = Some(tag);
        let mut events: Vec<(Key, TraceEvent)> = Vec::new();
        let mut errors: Vec<(Key, RuntimeError, TraceEvent)> = Vec::new();
        let present = |values: &[Option<Option<Value>>], p: &PortId| values[p.0].is_some();

        for rid in &self.order {
            let r = g.reaction(*rid);
            if !r.triggers.iter().any(|p| present(&values, p)) {
                continue;
            }
            let block = g.block(r.block);
            match (&block.kind, r.kind) {
                (BlockKind::Task { node, walk, boundary, leaf, sources, effects }, ReactionKind::Task) => {
                    let args = sources.iter().map(|(n, p)| (n.clone(), values[p.0].clone().flatten())).collect();
                    let effect_type = |name: &str| {
                        effects.iter().find(|(n, _)| n == name).map(|(_, p)| self.data_type(*p))
                    };
                    let leaf_state = next.leaves.get_mut(node).expect("every task has state");
                    match invoke(leaf, &effect_type, &args, leaf_state, &self.externs) {
                        Ok(inv) => {
                            for (name, value) in inv.emits {
                                let port = effects.iter().find(|(n, _)| *n == name).expect("effect checked").1;
                                self.write(&mut values, port, Some(value));
                            }
                            match inv.status {
                                Status::Success => self.write(&mut values, boundary.success, None),
                                Status::Failure => self.write(&mut values, boundary.failure, None),
                                Status::Running if leaf.is_condition() => events.push((
                                    (1, walk.exit, RANK_WARNING, 0),
                                    TraceEvent::warning(tag, node, RUNNING_CONDITION_WARNING),
                                )),
                                Status::Running => {}
                            }
                        }
                        Err(e) => {
                            let (err, event) = RuntimeError::from_invoke(node, tag, e);
                            errors.push(((1, walk.exit, RANK_ERROR, 0), err, event));
                        }
                    }
                }
                (BlockKind::Collector { threshold, child_success, child_failure, success, failure }, _) => {
                    let s = child_success.iter().filter(|p| present(&values, p)).count();
                    let f = child_failure.iter().filter(|p| present(&values, p)).count();
                    match parallel_status(s, f, *threshold, child_success.len()) {
                        Status::Success => self.write(&mut values, *success, None),
                        Status::Failure => self.write(&mut values, *failure, None),
                        Status::Running => {}
                    }
                }
                (BlockKind::Merge { mode, inputs, output }, _) => {
                    let mut live = inputs.iter().filter(|p| present(&values, p));
                    let chosen = match mode {
                        MergeMode::AtMostOne => {
                            let first = live.next();
                            if live.next().is_some() {
                                let err = RuntimeError::MergeConflict { block: block.name.clone(), tag };
                                let event = TraceEvent::error(tag, &block.name, "more than one status event");
                                errors.push(((1, self.owner_walk[block.id.0].1, RANK_ERROR, 0), err, event));
                                continue;
                            }
                            first
                        }
                        MergeMode::LatestWins => live.next_back(),
                    };
                    if let Some(p) = chosen {
                        let payload = values[p.0].clone().flatten();
                        self.write(&mut values, *output, payload);
                    }
                }
                (BlockKind::Pre { output, .. }, ReactionKind::PreEmit) => {
                    if let Some(v) = next.pre.get(&block.name).cloned().flatten() {
                        self.write(&mut values, *output, Some(v));
                    }
                }
                (BlockKind::Pre { input, .. }, ReactionKind::PreStore) => {
                    if let Some(Some(v)) = &values[input.0] {
                        next.pre.insert(block.name.clone(), Some(v.clone()));
                    }
                }
                (kind, reaction) => unreachable!("reaction {reaction:?} on block {kind:?}"),
            }
        }

        for (i, value) in values.iter().enumerate() {
            let Some(payload) = value else { continue };
            let port = &g.ports[i];
            let node_of = |b: BlockId| g.block(b).node().expect("node block");
            match self.roles[i] {
                Role::TreeInput(pos) => events.push(((0, pos as u32, 0, 0), TraceEvent::port(tag, &port.name, payload.as_ref()))),
                Role::TreeOutput(pos) => {
                    events.push(((2, pos as u32, 0, 0), TraceEvent::port(tag, &port.name, payload.as_ref())))
                }
                Role::NodeStart(b) => {
                    let (node, walk, _) = node_of(b);
                    let event = TraceEvent::invoked(tag, node, &g.block(b).label());
                    events.push(((1, walk.enter, RANK_INVOKED, 0), event));
                }
                Role::NodeStatus(b, status) => {
                    let (node, walk, _) = node_of(b);
                    events.push(((1, walk.exit, RANK_STATUS, 0), TraceEvent::status(tag, node, status)));
                }
                Role::Internal(pos) if self.full => {
                    let subject = format!("{}.{}", g.block(port.block).name, port.name);
                    let mut event = TraceEvent::port(tag, &subject, payload.as_ref());
                    event.internal = true;
                    events.push(((1, pos, RANK_PORT, i), event));
                }
                Role::Internal(_) => {}
            }
        }
        events.sort_by_key(|(k, _)| *k);

        if let Some((key, error, event)) = errors.into_iter().min_by_key(|(k, ..)| *k) {
            let mut kept: Vec<TraceEvent> = events.into_iter().filter(|(k, _)| *k < key).map(|(_, e)| e).collect();
            kept.push(event);
            return Err(StepFailure { error, events: kept });
        }
        Ok((next, events.into_iter().map(|(_, e)| e).collect()))
    }
}

#[cfg(test)]
mod tests;
