use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use super::span::Span;
use super::value::{Status, Value, ValueType};
use crate::expr::Expr;

/// Implicit port names every node owns; user declarations may not reuse them.
pub const RESERVED_NAMES: [&str; 4] = ["start", "success", "failure", "running"];

pub fn is_reserved(name: &str) -> bool {
    RESERVED_NAMES.contains(&name)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BtDef {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub root: BtNode,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub ty: ValueType,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelDecl {
    pub name: String,
    pub ty: ValueType,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateDecl {
    pub name: String,
    pub ty: ValueType,
    pub initial: Value,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BtNode {
    pub kind: NodeKind,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum NodeKind {
    Leaf(Leaf),
    Composite(Composite),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LeafKind {
    Task,
    Condition,
}

impl LeafKind {
    pub fn keyword(self) -> &'static str {
        match self {
            LeafKind::Task => "task",
            LeafKind::Condition => "condition",
        }
    }
}

/// A task or condition: the unit of business logic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Leaf {
    pub kind: LeafKind,
    pub label: String,
    pub sources: Vec<String>,
    pub effects: Vec<String>,
    pub states: Vec<StateDecl>,
    pub body: TaskBody,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompositeKind {
    Sequence,
    Fallback,
    Parallel { threshold: usize },
}

impl CompositeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            CompositeKind::Sequence => "sequence",
            CompositeKind::Fallback => "fallback",
            CompositeKind::Parallel { .. } => "parallel",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompositeKind::Sequence => "→",
            CompositeKind::Fallback => "?",
            CompositeKind::Parallel { .. } => "⇉",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Composite {
    pub kind: CompositeKind,
    pub channels: Vec<ChannelDecl>,
    pub children: Vec<BtNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TaskBody {
    /// Host callback registered under this name.
    Extern(String),
    Script(Script),
    /// Boolean expression; only valid on conditions.
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Script {
    pub steps: Vec<ScriptStep>,
    pub tail: ScriptTail,
}

/// What a script does once its last step has run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScriptTail {
    Loop,
    Hold,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScriptStep {
    pub emits: Vec<(String, Expr)>,
    pub state_updates: Vec<(String, Expr)>,
    pub status: StepStatus,
}

/// Status outputs a step produces. Both flags set is expressible on purpose:
/// it is the malformed output the runtime must reject.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub struct StepStatus {
    pub success: bool,
    pub failure: bool,
}

impl StepStatus {
    pub fn of(status: Status) -> Self {
        StepStatus {
            success: status == Status::Success,
            failure: status == Status::Failure,
        }
    }
}

impl BtNode {
    pub fn leaf(leaf: Leaf) -> BtNode {
        BtNode {
            kind: NodeKind::Leaf(leaf),
            span: Span::default(),
        }
    }

    pub fn composite(kind: CompositeKind, channels: Vec<ChannelDecl>, children: Vec<BtNode>) -> BtNode {
        BtNode {
            kind: NodeKind::Composite(Composite { kind, channels, children }),
            span: Span::default(),
        }
    }

    pub fn children(&self) -> &[BtNode] {
        match &self.kind {
            NodeKind::Leaf(_) => &[],
            NodeKind::Composite(c) => &c.children,
        }
    }

    pub fn as_leaf(&self) -> Option<&Leaf> {
        match &self.kind {
            NodeKind::Leaf(l) => Some(l),
            NodeKind::Composite(_) => None,
        }
    }

    pub fn as_composite(&self) -> Option<&Composite> {
        match &self.kind {
            NodeKind::Composite(c) => Some(c),
            NodeKind::Leaf(_) => None,
        }
    }

    /// Short human-readable description used in traces and diagrams.
    pub fn describe(&self) -> String {
        match &self.kind {
            NodeKind::Leaf(l) => l.label.clone(),
            NodeKind::Composite(c) => match c.kind {
                CompositeKind::Parallel { threshold } => format!("parallel({threshold})"),
                k => k.keyword().to_string(),
            },
        }
    }

    fn strip_spans(&mut self) {
        self.span = Span::default();
        match &mut self.kind {
            NodeKind::Leaf(l) => l.states.iter_mut().for_each(|s| s.span = Span::default()),
            NodeKind::Composite(c) => {
                c.channels.iter_mut().for_each(|ch| ch.span = Span::default());
                c.children.iter_mut().for_each(BtNode::strip_spans);
            }
        }
    }

    fn count(&self) -> usize {
        1 + self.children().iter().map(BtNode::count).sum::<usize>()
    }
}

impl Leaf {
    pub fn is_condition(&self) -> bool {
        self.kind == LeafKind::Condition
    }
}

impl BtDef {
    /// Copy with every source span cleared, for comparing ASTs structurally.
    pub fn without_spans(&self) -> BtDef {
        let mut def = self.clone();
        def.span = Span::default();
        def.ports.iter_mut().for_each(|p| p.span = Span::default());
        def.root.strip_spans();
        def
    }

    pub fn same_ast(&self, other: &BtDef) -> bool {
        self.without_spans() == other.without_spans()
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn node(&self, id: &NodeId) -> Option<&BtNode> {
        let mut node = &self.root;
        for &i in &id.0 {
            node = node.children().get(i as usize)?;
        }
        Some(node)
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    /// Pre-order walk with node ids.
    pub fn walk<'a>(&'a self, mut f: impl FnMut(&NodeId, &'a BtNode)) {
        fn go<'a>(node: &'a BtNode, id: &mut NodeId, f: &mut impl FnMut(&NodeId, &'a BtNode)) {
            f(id, node);
            for (i, child) in node.children().iter().enumerate() {
                id.0.push(i as u32);
                go(child, id, f);
                id.0.pop();
            }
        }
        go(&self.root, &mut NodeId::root(), &mut f);
    }

    /// Leaves in depth-first, left-to-right order.
    pub fn leaves(&self) -> Vec<(NodeId, &Leaf)> {
        let mut out = Vec::new();
        self.walk(|id, node| {
            if let Some(l) = node.as_leaf() {
                out.push((id.clone(), l));
            }
        });
        out
    }
}

/// Position of a node as the child indices along the path from the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub Vec<u32>);

impl NodeId {
    pub fn root() -> NodeId {
        NodeId(Vec::new())
    }

    pub fn child(&self, index: usize) -> NodeId {
        let mut path = self.0.clone();
        path.push(index as u32);
        NodeId(path)
    }

    pub fn parent(&self) -> Option<NodeId> {
        let (_, init) = self.0.split_last()?;
        Some(NodeId(init.to_vec()))
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_ancestor_of(&self, other: &NodeId) -> bool {
        other.0.len() > self.0.len() && other.0.starts_with(&self.0)
    }

    /// Deepest common ancestor, which may be one of the two ids itself.
    pub fn common_ancestor(&self, other: &NodeId) -> NodeId {
        let n = self.0.iter().zip(&other.0).take_while(|(a, b)| a == b).count();
        NodeId(self.0[..n].to_vec())
    }

    /// Compact form usable inside identifiers: `n` for the root, `n_0_1` below.
    pub fn ident(&self) -> String {
        let mut s = String::from("n");
        for i in &self.0 {
            s.push('_');
            s.push_str(&i.to_string());
        }
        s
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "/" {
            return Ok(NodeId::root());
        }
        let rest = s.strip_prefix('/').ok_or_else(|| format!("node path `{s}` must start with `/`"))?;
        rest.split('/')
            .map(|seg| seg.parse::<u32>().map_err(|_| format!("bad segment `{seg}` in node path `{s}`")))
            .collect::<Result<Vec<_>, _>>()
            .map(NodeId)
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
