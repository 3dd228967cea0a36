//! Static well-formedness checks and name resolution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::model::{
    is_reserved, BtDef, BtNode, CompositeKind, Direction, Leaf, NodeId, NodeKind, Span, TaskBody, ValueType,
};

/// Identity of a channel: the composite declaring it plus its name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelKey {
    pub owner: NodeId,
    pub name: String,
}

/// What a reference in a leaf's interface points at.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Input(String),
    Output(String),
    Channel(ChannelKey),
}

impl Target {
    pub fn name(&self) -> &str {
        match self {
            Target::Input(n) | Target::Output(n) => n,
            Target::Channel(k) => &k.name,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Input(n) => write!(f, "input port {n}"),
            Target::Output(n) => write!(f, "output port {n}"),
            Target::Channel(k) => write!(f, "channel {}", k.name),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResolvedLeaf {
    pub id: NodeId,
    /// Position in depth-first, left-to-right leaf order.
    pub order: usize,
    pub sources: Vec<(String, Target)>,
    pub effects: Vec<(String, Target)>,
}

impl ResolvedLeaf {
    pub fn reads(&self, target: &Target) -> bool {
        self.sources.iter().any(|(_, t)| t == target)
    }

    pub fn writes(&self, target: &Target) -> bool {
        self.effects.iter().any(|(_, t)| t == target)
    }
}

/// Name resolution of every leaf interface. Unresolvable refs are dropped.
#[derive(Clone, Debug, Default)]
pub struct Resolution {
    pub leaves: Vec<ResolvedLeaf>,
    pub channels: BTreeMap<ChannelKey, ValueType>,
}

impl Resolution {
    pub fn leaf(&self, id: &NodeId) -> Option<&ResolvedLeaf> {
        self.leaves.iter().find(|l| &l.id == id)
    }

    pub fn writers<'a>(&'a self, target: &'a Target) -> impl Iterator<Item = &'a ResolvedLeaf> + 'a {
        self.leaves.iter().filter(move |l| l.writes(target))
    }

    pub fn readers<'a>(&'a self, target: &'a Target) -> impl Iterator<Item = &'a ResolvedLeaf> + 'a {
        self.leaves.iter().filter(move |l| l.reads(target))
    }

    /// Every target some leaf writes, in a stable order.
    pub fn written_targets(&self) -> BTreeSet<Target> {
        self.leaves.iter().flat_map(|l| l.effects.iter().map(|(_, t)| t.clone())).collect()
    }

    /// Whether `reader` sees values of `target` from the previous tick, i.e.
    /// some writer does not run strictly before it. A leaf writing what it
    /// reads counts as running after its own read.
    pub fn is_backward_reader(&self, reader: &ResolvedLeaf, target: &Target) -> bool {
        matches!(target, Target::Channel(_)) && self.writers(target).any(|w| w.order >= reader.order)
    }

    pub fn type_of(&self, def: &BtDef, target: &Target) -> Option<ValueType> {
        match target {
            Target::Input(n) | Target::Output(n) => def.port(n).map(|p| p.ty),
            Target::Channel(k) => self.channels.get(k).copied(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// One finding of [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckItem {
    pub severity: Severity,
    pub code: &'static str,
    #[serde(rename = "nodePath")]
    pub node_path: Option<String>,
    pub message: String,
    #[serde(skip)]
    pub span: Span,
}

pub mod codes {
    pub const UNRESOLVED_REF: &str = "E001";
    pub const DUPLICATE_NAME: &str = "E002";
    pub const THRESHOLD_RANGE: &str = "E003";
    pub const PARALLEL_WRITERS: &str = "E004";
    pub const PARALLEL_READ_WRITE: &str = "E005";
    pub const EXPR_ON_TASK: &str = "E006";
    pub const WRONG_DIRECTION: &str = "E007";
    pub const RESERVED_NAME: &str = "E008";
    pub const EMPTY: &str = "E009";
    pub const UNKNOWN_IDENT: &str = "E010";
    pub const UNDECLARED_TARGET: &str = "E011";
    pub const STATE_TYPE: &str = "E012";
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.items.iter().any(|i| i.severity == Severity::Error)
    }

    /// One JSON object per line: severity, code, nodePath, message.
    pub fn to_json_lines(&self) -> String {
        self.items
            .iter()
            .map(|i| serde_json::to_string(i).expect("check items serialize") + "\n")
            .collect()
    }

    fn error(&mut self, code: &'static str, node: Option<&NodeId>, span: &Span, message: String) {
        self.items.push(CheckItem {
            severity: Severity::Error,
            code,
            node_path: node.map(NodeId::to_string),
            message,
            span: span.clone(),
        });
    }
}

/// Runs every static check. An empty report means the definition compiles.
pub fn validate(def: &BtDef) -> CheckReport {
    let mut report = CheckReport::default();
    check_ports(def, &mut report);
    let resolution = resolve_into(def, &mut report);
    check_conflicts(def, &resolution, &mut report);
    report
}

/// Resolves leaf interfaces, ignoring any errors.
pub fn resolve(def: &BtDef) -> Resolution {
    resolve_into(def, &mut CheckReport::default())
}

/// Pairs of leaves writing one target whose deepest common ancestor is a
/// parallel node, ordered by node path.
pub fn parallel_writer_conflicts(def: &BtDef) -> Vec<(String, NodeId, NodeId)> {
    let resolution = resolve(def);
    conflict_pairs(def, &resolution, |a, b, t| a.writes(t) && b.writes(t))
        .into_iter()
        .map(|(t, a, b)| (t.name().to_string(), a, b))
        .collect()
}

fn conflict_pairs(
    def: &BtDef,
    resolution: &Resolution,
    related: impl Fn(&ResolvedLeaf, &ResolvedLeaf, &Target) -> bool,
) -> Vec<(Target, NodeId, NodeId)> {
    let mut out = Vec::new();
    let targets: BTreeSet<Target> = resolution
        .leaves
        .iter()
        .flat_map(|l| l.sources.iter().chain(&l.effects).map(|(_, t)| t.clone()))
        .collect();
    for target in &targets {
        let touching: Vec<&ResolvedLeaf> = resolution
            .leaves
            .iter()
            .filter(|l| l.reads(target) || l.writes(target))
            .collect();
        for (i, a) in touching.iter().enumerate() {
            for b in &touching[i + 1..] {
                if !(related(a, b, target) || related(b, a, target)) {
                    continue;
                }
                let lca = a.id.common_ancestor(&b.id);
                let is_parallel = def
                    .node(&lca)
                    .and_then(BtNode::as_composite)
                    .is_some_and(|c| matches!(c.kind, CompositeKind::Parallel { .. }));
                if is_parallel {
                    out.push((target.clone(), a.id.clone(), b.id.clone()));
                }
            }
        }
    }
    out.sort_by(|x, y| (&x.1, &x.2, &x.0).cmp(&(&y.1, &y.2, &y.0)));
    out
}

fn check_ports(def: &BtDef, report: &mut CheckReport) {
    let mut seen = BTreeSet::new();
    for p in &def.ports {
        if is_reserved(&p.name) {
            report.error(
                codes::RESERVED_NAME,
                None,
                &p.span,
                format!("`{}` is an implicit port and cannot be declared", p.name),
            );
        }
        if !seen.insert(p.name.as_str()) {
            report.error(codes::DUPLICATE_NAME, None, &p.span, format!("duplicate port `{}`", p.name));
        }
    }
}

fn check_conflicts(def: &BtDef, resolution: &Resolution, report: &mut CheckReport) {
    for (target, a, b) in conflict_pairs(def, resolution, |a, b, t| a.writes(t) && b.writes(t)) {
        let span = def.node(&b).map(|n| n.span.clone()).unwrap_or_default();
        report.error(
            codes::PARALLEL_WRITERS,
            Some(&a),
            &span,
            format!("parallel writers on {target}: {a} and {b}"),
        );
    }
    let read_write = |a: &ResolvedLeaf, b: &ResolvedLeaf, t: &Target| {
        matches!(t, Target::Channel(_)) && a.reads(t) && b.writes(t)
    };
    for (target, a, b) in conflict_pairs(def, resolution, read_write) {
        let span = def.node(&b).map(|n| n.span.clone()).unwrap_or_default();
        report.error(
            codes::PARALLEL_READ_WRITE,
            Some(&a),
            &span,
            format!("{target} is read and written in concurrent branches: {a} and {b}"),
        );
    }
}

struct Scope<'a> {
    channels: Vec<(ChannelKey, ValueType)>,
    def: &'a BtDef,
}

impl Scope<'_> {
    fn lookup(&self, name: &str) -> Option<(Target, ValueType)> {
        if let Some((key, ty)) = self.channels.iter().rev().find(|(k, _)| k.name == name) {
            return Some((Target::Channel(key.clone()), *ty));
        }
        self.def.port(name).map(|p| match p.direction {
            Direction::Input => (Target::Input(name.to_string()), p.ty),
            Direction::Output => (Target::Output(name.to_string()), p.ty),
        })
    }
}

fn resolve_into(def: &BtDef, report: &mut CheckReport) -> Resolution {
    let mut resolution = Resolution::default();
    let mut scope = Scope { channels: Vec::new(), def };
    resolve_node(&def.root, &NodeId::root(), &mut scope, &mut resolution, report);
    resolution
}

fn resolve_node(
    node: &BtNode,
    id: &NodeId,
    scope: &mut Scope<'_>,
    out: &mut Resolution,
    report: &mut CheckReport,
) {
    match &node.kind {
        NodeKind::Leaf(leaf) => {
            let order = out.leaves.len();
            let resolved = resolve_leaf(leaf, id, &node.span, scope, report);
            out.leaves.push(ResolvedLeaf { order, ..resolved });
        }
        NodeKind::Composite(c) => {
            if c.children.is_empty() {
                report.error(
                    codes::EMPTY,
                    Some(id),
                    &node.span,
                    format!("{} requires at least one child", c.kind.keyword()),
                );
            }
            if let CompositeKind::Parallel { threshold } = c.kind {
                let n = c.children.len();
                if threshold < 1 || threshold > n {
                    report.error(
                        codes::THRESHOLD_RANGE,
                        Some(id),
                        &node.span,
                        format!("parallel threshold {threshold} outside 1..={n}"),
                    );
                }
            }
            let depth = scope.channels.len();
            let mut local = BTreeSet::new();
            for ch in &c.channels {
                if is_reserved(&ch.name) {
                    report.error(
                        codes::RESERVED_NAME,
                        Some(id),
                        &ch.span,
                        format!("`{}` is an implicit port and cannot name a channel", ch.name),
                    );
                }
                let clash = !local.insert(ch.name.as_str()) || scope.lookup(&ch.name).is_some();
                if clash {
                    report.error(
                        codes::DUPLICATE_NAME,
                        Some(id),
                        &ch.span,
                        format!("channel `{}` clashes with a visible port or channel", ch.name),
                    );
                    continue;
                }
                let key = ChannelKey { owner: id.clone(), name: ch.name.clone() };
                out.channels.insert(key.clone(), ch.ty);
                scope.channels.push((key, ch.ty));
            }
            for (i, child) in c.children.iter().enumerate() {
                resolve_node(child, &id.child(i), scope, out, report);
            }
            scope.channels.truncate(depth);
        }
    }
}

fn resolve_leaf(leaf: &Leaf, id: &NodeId, span: &Span, scope: &Scope<'_>, report: &mut CheckReport) -> ResolvedLeaf {
    let mut resolve_list = |refs: &[String], want: Direction| {
        let mut seen = BTreeSet::new();
        let mut resolved = Vec::new();
        for name in refs {
            if !seen.insert(name.as_str()) {
                report.error(codes::DUPLICATE_NAME, Some(id), span, format!("`{name}` listed twice"));
                continue;
            }
            match scope.lookup(name) {
                None => report.error(
                    codes::UNRESOLVED_REF,
                    Some(id),
                    span,
                    format!("`{name}` does not name a visible port or channel"),
                ),
                Some((Target::Output(_), _)) if want == Direction::Input => report.error(
                    codes::WRONG_DIRECTION,
                    Some(id),
                    span,
                    format!("output port `{name}` cannot be a source"),
                ),
                Some((Target::Input(_), _)) if want == Direction::Output => report.error(
                    codes::WRONG_DIRECTION,
                    Some(id),
                    span,
                    format!("input port `{name}` cannot be an effect"),
                ),
                Some((target, _)) => resolved.push((name.clone(), target)),
            }
        }
        resolved
    };
    let sources = resolve_list(&leaf.sources, Direction::Input);
    let effects = resolve_list(&leaf.effects, Direction::Output);

    let mut states = BTreeSet::new();
    for st in &leaf.states {
        if !states.insert(st.name.as_str()) || leaf.sources.contains(&st.name) {
            report.error(
                codes::DUPLICATE_NAME,
                Some(id),
                &st.span,
                format!("state `{}` clashes with another state or source", st.name),
            );
        }
        if is_reserved(&st.name) {
            report.error(codes::RESERVED_NAME, Some(id), &st.span, format!("`{}` is reserved", st.name));
        }
        if st.initial.ty() != st.ty {
            report.error(
                codes::STATE_TYPE,
                Some(id),
                &st.span,
                format!("state `{}` declared {} but initialised with {}", st.name, st.ty, st.initial.ty()),
            );
        }
    }

    let readable = |name: &str| leaf.sources.iter().any(|s| s == name) || states.contains(name);
    let check_expr = |e: &crate::expr::Expr, report: &mut CheckReport| {
        let mut names = Vec::new();
        e.free_names(&mut names);
        for n in names {
            if !readable(&n) {
                report.error(
                    codes::UNKNOWN_IDENT,
                    Some(id),
                    span,
                    format!("`{n}` is neither a source nor a state of `{}`", leaf.label),
                );
            }
        }
    };
    match &leaf.body {
        TaskBody::Extern(_) => {}
        TaskBody::Expr(e) => {
            if !leaf.is_condition() {
                report.error(
                    codes::EXPR_ON_TASK,
                    Some(id),
                    span,
                    format!("task `{}` uses an @expr body, which only conditions may", leaf.label),
                );
            }
            check_expr(e, report);
        }
        TaskBody::Script(script) => {
            if script.steps.is_empty() {
                report.error(codes::EMPTY, Some(id), span, "script requires at least one step".into());
            }
            for step in &script.steps {
                for (target, e) in &step.emits {
                    if !leaf.effects.contains(target) {
                        report.error(
                            codes::UNDECLARED_TARGET,
                            Some(id),
                            span,
                            format!("emit to `{target}` which is not an effect"),
                        );
                    }
                    check_expr(e, report);
                }
                for (target, e) in &step.state_updates {
                    if !leaf.states.iter().any(|s| &s.name == target) {
                        report.error(
                            codes::UNDECLARED_TARGET,
                            Some(id),
                            span,
                            format!("update of `{target}` which is not a state"),
                        );
                    }
                    check_expr(e, report);
                }
            }
        }
    }
    ResolvedLeaf { id: id.clone(), order: 0, sources, effects }
}
