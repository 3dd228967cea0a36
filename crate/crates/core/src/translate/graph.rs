use serde::Serialize;

use crate::model::{CompositeKind, Direction, Leaf, NodeId, ValueType};

macro_rules! index_type {
    ($name:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }
    };
}

index_type!(BlockId);
index_type!(PortId);
index_type!(ReactionId);

/// Payload of a port: pure events carry no value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PortType {
    Pure,
    Data(ValueType),
}

#[derive(Clone, Debug, Serialize)]
pub struct Port {
    pub id: PortId,
    pub block: BlockId,
    pub name: String,
    pub direction: Direction,
    #[serde(rename = "type")]
    pub ty: PortType,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeMode {
    /// Errors when two inputs are present at one tag.
    AtMostOne,
    /// Forwards the present input with the highest priority (latest in `inputs`).
    LatestWins,
}

/// Where a node sits in the depth-first walk: `enter` before its children,
/// `exit` after them. Used to put trace events in a canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WalkIndex {
    pub enter: u32,
    pub exit: u32,
}

/// The three implicit ports every node block exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Boundary {
    pub start: PortId,
    pub success: PortId,
    pub failure: PortId,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BlockKind {
    /// The behavior tree reactor itself.
    Tree {
        boundary: Boundary,
        inputs: Vec<(String, PortId)>,
        outputs: Vec<(String, PortId)>,
    },
    Composite {
        node: NodeId,
        composite: CompositeKind,
        walk: WalkIndex,
        boundary: Boundary,
    },
    Task {
        node: NodeId,
        walk: WalkIndex,
        boundary: Boundary,
        leaf: Leaf,
        sources: Vec<(String, PortId)>,
        effects: Vec<(String, PortId)>,
    },
    Collector {
        threshold: usize,
        child_success: Vec<PortId>,
        child_failure: Vec<PortId>,
        success: PortId,
        failure: PortId,
    },
    Merge {
        mode: MergeMode,
        /// Ascending priority.
        inputs: Vec<PortId>,
        output: PortId,
    },
    Pre {
        channel: String,
        input: PortId,
        start: PortId,
        output: PortId,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Block {
    pub id: BlockId,
    /// Unique, identifier-safe name.
    pub name: String,
    pub parent: Option<BlockId>,
    pub ports: Vec<PortId>,
    #[serde(flatten)]
    pub kind: BlockKind,
}

impl Block {
    pub fn node(&self) -> Option<(&NodeId, WalkIndex, Boundary)> {
        match &self.kind {
            BlockKind::Composite { node, walk, boundary, .. } | BlockKind::Task { node, walk, boundary, .. } => {
                Some((node, *walk, *boundary))
            }
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            BlockKind::Task { leaf, .. } => leaf.label.clone(),
            BlockKind::Composite { composite, .. } => match composite {
                CompositeKind::Parallel { threshold } => format!("parallel({threshold})"),
                k => k.keyword().to_string(),
            },
            _ => self.name.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionKind {
    Task,
    Collect,
    Merge,
    PreEmit,
    PreStore,
}

/// A reaction and its causality interface.
#[derive(Clone, Debug, Serialize)]
pub struct Reaction {
    pub id: ReactionId,
    pub block: BlockId,
    pub kind: ReactionKind,
    pub triggers: Vec<PortId>,
    pub sources: Vec<PortId>,
    pub effects: Vec<PortId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Connection {
    pub from: PortId,
    pub to: PortId,
}

/// The compiled network for one behavior tree.
#[derive(Clone, Debug, Serialize)]
pub struct ReactorGraph {
    pub name: String,
    pub root: BlockId,
    pub blocks: Vec<Block>,
    pub ports: Vec<Port>,
    pub reactions: Vec<Reaction>,
    pub connections: Vec<Connection>,
    /// Execution order of reactions consistent with causality.
    pub top_order: Vec<ReactionId>,
}

impl ReactorGraph {
    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    pub fn port(&self, id: PortId) -> &Port {
        &self.ports[id.0]
    }

    pub fn reaction(&self, id: ReactionId) -> &Reaction {
        &self.reactions[id.0]
    }

    pub fn tree(&self) -> (&Boundary, &[(String, PortId)], &[(String, PortId)]) {
        match &self.block(self.root).kind {
            BlockKind::Tree { boundary, inputs, outputs } => (boundary, inputs, outputs),
            _ => unreachable!("root block is always the tree"),
        }
    }

    pub fn blocks_named<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Block> + 'a {
        self.blocks.iter().filter(move |b| b.name.starts_with(prefix))
    }

    pub fn count_blocks(&self, pred: impl Fn(&BlockKind) -> bool) -> usize {
        self.blocks.iter().filter(|b| pred(&b.kind)).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    /// Connections leaving each port, indexed by port.
    pub fn fanout(&self) -> Vec<Vec<PortId>> {
        let mut out = vec![Vec::new(); self.ports.len()];
        for c in &self.connections {
            out[c.from.0].push(c.to);
        }
        out
    }
}
