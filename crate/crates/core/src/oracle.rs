//! Reference interpreter: ticks the tree recursively, without compiling it.
//!
//! It reads the same definitions and scenarios as the runtime and writes
//! traces in the same format, so the two can be compared byte for byte.

use std::collections::BTreeMap;

use crate::body::{invoke, ExternRegistry, LeafState, RUNNING_CONDITION_WARNING};
use crate::check::{resolve, validate, ChannelKey, Resolution, Target};
use crate::model::{parallel_status, BtDef, BtNode, CompositeKind, NodeId, NodeKind, Status, TaskBody, Value};
use crate::runtime::{RunError, RuntimeError, Scenario, Tag, Trace, TraceEvent};

/// Everything the interpreter carries between and within ticks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TickEnv {
    /// Values written to channels during the current tick.
    pub channel_now: BTreeMap<ChannelKey, Value>,
    /// Last value written to each channel in an earlier tick.
    pub channel_pre: BTreeMap<ChannelKey, Value>,
    pub states: BTreeMap<NodeId, LeafState>,
    pub inputs: BTreeMap<String, Value>,
    pub outputs: BTreeMap<String, Value>,
}

/// An error during a tick, with the events produced before it.
#[derive(Debug, Clone, PartialEq)]
pub struct TickFailure {
    pub error: RuntimeError,
    pub events: Vec<TraceEvent>,
}

pub struct Oracle<'a> {
    def: &'a BtDef,
    res: Resolution,
    externs: &'a ExternRegistry,
}

impl<'a> Oracle<'a> {
    pub fn new(def: &'a BtDef, externs: &'a ExternRegistry) -> Result<Self, RuntimeError> {
        let report = validate(def);
        if !report.is_empty() {
            return Err(RuntimeError::Invalid(report.items.iter().map(|i| i.message.clone()).collect::<Vec<_>>().join("; ")));
        }
        for (_, leaf) in def.leaves() {
            if let TaskBody::Extern(name) = &leaf.body {
                if !externs.contains(name) {
                    return Err(RuntimeError::MissingExtern { name: name.clone(), label: leaf.label.clone() });
                }
            }
        }
        Ok(Oracle { def, res: resolve(def), externs })
    }

    pub fn initial_env(&self) -> TickEnv {
        let states = self.def.leaves().into_iter().map(|(id, leaf)| (id, LeafState::new(leaf))).collect();
        TickEnv { states, ..TickEnv::default() }
    }

    /// Ticks the whole tree once. Channel buffers of the next tick are
    /// updated before returning.
    pub fn tick(&self, env: &TickEnv, tag: Tag) -> Result<(Status, TickEnv, Vec<TraceEvent>), TickFailure> {
        let mut env = env.clone();
        env.channel_now.clear();
        env.outputs.clear();
        let mut events = Vec::new();
        match self.node(&self.def.root, &NodeId::root(), &mut env, tag, &mut events) {
            Ok(status) => {
                let now = std::mem::take(&mut env.channel_now);
                env.channel_pre.extend(now);
                Ok((status, env, events))
            }
            Err(error) => Err(TickFailure { error, events }),
        }
    }

    fn node(&self, node: &BtNode, id: &NodeId, env: &mut TickEnv, tag: Tag, events: &mut Vec<TraceEvent>) -> Result<Status, RuntimeError> {
        events.push(TraceEvent::invoked(tag, id, &node.describe()));
        let status = match &node.kind {
            NodeKind::Leaf(leaf) => {
                let resolved = self.res.leaf(id).expect("validated leaves resolve");
                let sources = resolved
                    .sources
                    .iter()
                    .map(|(name, target)| (name.clone(), self.read(env, resolved, target)))
                    .collect();
                let effect_type = |name: &str| {
                    let target = &resolved.effects.iter().find(|(n, _)| n == name)?.1;
                    self.res.type_of(self.def, target)
                };
                let state = env.states.get_mut(id).expect("every leaf has state");
                let inv = match invoke(leaf, &effect_type, &sources, state, self.externs) {
                    Ok(inv) => inv,
                    Err(e) => {
                        let (error, event) = RuntimeError::from_invoke(id, tag, e);
                        events.push(event);
                        return Err(error);
                    }
                };
                for (name, value) in inv.emits {
                    match &resolved.effects.iter().find(|(n, _)| *n == name).expect("effect checked").1 {
                        Target::Channel(key) => env.channel_now.insert(key.clone(), value),
                        Target::Output(port) => env.outputs.insert(port.clone(), value),
                        Target::Input(_) => unreachable!("inputs are not writable"),
                    };
                }
                if inv.status == Status::Running && leaf.is_condition() {
                    events.push(TraceEvent::warning(tag, id, RUNNING_CONDITION_WARNING));
                }
                inv.status
            }
            NodeKind::Composite(c) => {
                let children = c.children.iter().enumerate().map(|(i, child)| (child, id.child(i)));
                match c.kind {
                    CompositeKind::Sequence | CompositeKind::Fallback => {
                        let keep_going = if c.kind == CompositeKind::Sequence { Status::Success } else { Status::Failure };
                        let mut status = keep_going;
                        for (child, child_id) in children {
                            status = self.node(child, &child_id, env, tag, events)?;
                            if status != keep_going {
                                break;
                            }
                        }
                        status
                    }
                    CompositeKind::Parallel { threshold } => {
                        let (mut s, mut f) = (0, 0);
                        for (child, child_id) in children {
                            match self.node(child, &child_id, env, tag, events)? {
                                Status::Success => s += 1,
                                Status::Failure => f += 1,
                                Status::Running => {}
                            }
                        }
                        parallel_status(s, f, threshold, c.children.len())
                    }
                }
            }
        };
        if status != Status::Running {
            events.push(TraceEvent::status(tag, id, status));
        }
        Ok(status)
    }

    fn read(&self, env: &TickEnv, reader: &crate::check::ResolvedLeaf, target: &Target) -> Option<Value> {
        match target {
            Target::Input(port) => env.inputs.get(port).cloned(),
            Target::Output(_) => None,
            Target::Channel(key) => env.channel_now.get(key).cloned().or_else(|| {
                if self.res.is_backward_reader(reader, target) {
                    env.channel_pre.get(key).cloned()
                } else {
                    None
                }
            }),
        }
    }

    pub fn run(&self, scenario: &Scenario) -> Result<Trace, RunError> {
        let inputs: Vec<_> = self
            .def
            .ports
            .iter()
            .filter(|p| p.direction == crate::model::Direction::Input)
            .map(|p| (p.name.clone(), p.ty))
            .collect();
        let schedule = scenario.schedule(&inputs).map_err(|error| RunError { error, trace: Trace::default() })?;
        let mut env = self.initial_env();
        let mut trace = Trace::default();
        for (tag, tag_inputs) in schedule {
            let mut started = false;
            env.inputs.clear();
            for (port, value) in tag_inputs {
                trace.events.push(TraceEvent::port(tag, &port, value.as_ref()));
                match value {
                    Some(v) => {
                        env.inputs.insert(port, v);
                    }
                    None => started = true,
                }
            }
            if !started {
                continue;
            }
            match self.tick(&env, tag) {
                Ok((_, next, events)) => {
                    trace.events.extend(events);
                    for p in &self.def.ports {
                        if let Some(v) = next.outputs.get(&p.name) {
                            trace.events.push(TraceEvent::port(tag, &p.name, Some(v)));
                        }
                    }
                    env = next;
                }
                Err(failure) => {
                    trace.events.extend(failure.events);
                    return Err(RunError { error: failure.error, trace });
                }
            }
        }
        Ok(trace)
    }
}

/// Interprets `def` over `scenario`.
pub fn run_oracle(def: &BtDef, scenario: &Scenario, externs: &ExternRegistry) -> Result<Trace, RunError> {
    let oracle = Oracle::new(def, externs).map_err(|error| RunError { error, trace: Trace::default() })?;
    oracle.run(scenario)
}
