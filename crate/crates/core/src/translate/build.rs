use std::collections::{BTreeMap, BTreeSet};

use super::graph::*;
use super::order::{topological_order, OrderError};
use super::{Mutation, TranslateError, TranslateOptions};
use crate::check::{resolve, validate, ChannelKey, Resolution, Target};
use crate::model::{BtDef, BtNode, CompositeKind, Direction, NodeId, NodeKind, ValueType};

pub(super) fn translate(def: &BtDef, opts: &TranslateOptions) -> Result<ReactorGraph, TranslateError> {
    let report = validate(def);
    if !report.is_empty() {
        return Err(TranslateError::Invalid(report));
    }
    let mut b = Builder {
        def,
        res: resolve(def),
        opts,
        g: ReactorGraph {
            name: def.name.clone(),
            root: BlockId(0),
            blocks: Vec::new(),
            ports: Vec::new(),
            reactions: Vec::new(),
            connections: Vec::new(),
            top_order: Vec::new(),
        },
        names: BTreeSet::new(),
        nodes: BTreeMap::new(),
        leaf_ports: BTreeMap::new(),
        shared_inputs: BTreeMap::new(),
        walk: 0,
    };
    b.tree();
    b.node(&def.root, NodeId::root(), BlockId(0));
    let root = b.nodes[&NodeId::root()].1;
    let tree = b.tree_boundary();
    b.connect(tree.start, root.start);
    b.connect(root.success, tree.success);
    b.connect(root.failure, tree.failure);
    b.wire_data();
    let mut g = b.g;
    g.top_order = topological_order(&g, |_| 0).map_err(|OrderError::Cycle(ids)| TranslateError::InternalCycle(ids))?;
    Ok(g)
}

struct Builder<'a> {
    def: &'a BtDef,
    res: Resolution,
    opts: &'a TranslateOptions,
    g: ReactorGraph,
    names: BTreeSet<String>,
    /// Node block and boundary per tree node.
    nodes: BTreeMap<NodeId, (BlockId, Boundary)>,
    /// Per leaf: source and effect ports by ref name.
    leaf_ports: BTreeMap<NodeId, (BTreeMap<String, PortId>, BTreeMap<String, PortId>)>,
    /// Forwarded top-level input ports, shared by every reader below a block.
    shared_inputs: BTreeMap<(BlockId, String), PortId>,
    walk: u32,
}

impl Builder<'_> {
    fn unique_name(&mut self, base: String) -> String {
        let mut name = base.clone();
        let mut k = 1;
        while !self.names.insert(name.clone()) {
            name = format!("{base}_{k}");
            k += 1;
        }
        name
    }

    fn add_block(&mut self, name: String, parent: Option<BlockId>, kind: BlockKind) -> BlockId {
        let id = BlockId(self.g.blocks.len());
        let name = self.unique_name(name);
        self.g.blocks.push(Block { id, name, parent, ports: Vec::new(), kind });
        id
    }

    fn add_port(&mut self, block: BlockId, name: &str, direction: Direction, ty: PortType) -> PortId {
        let id = PortId(self.g.ports.len());
        self.g.ports.push(Port { id, block, name: name.to_string(), direction, ty });
        self.g.blocks[block.0].ports.push(id);
        id
    }

    fn add_reaction(&mut self, block: BlockId, kind: ReactionKind, triggers: Vec<PortId>, sources: Vec<PortId>, effects: Vec<PortId>) {
        let id = ReactionId(self.g.reactions.len());
        self.g.reactions.push(Reaction { id, block, kind, triggers, sources, effects });
    }

    fn connect(&mut self, from: PortId, to: PortId) {
        self.g.connections.push(Connection { from, to });
    }

    fn boundary_ports(&mut self, block: BlockId) -> Boundary {
        Boundary {
            start: self.add_port(block, "start", Direction::Input, PortType::Pure),
            success: self.add_port(block, "success", Direction::Output, PortType::Pure),
            failure: self.add_port(block, "failure", Direction::Output, PortType::Pure),
        }
    }

    fn set_kind(&mut self, block: BlockId, kind: BlockKind) {
        self.g.blocks[block.0].kind = kind;
    }

    fn tree_boundary(&self) -> Boundary {
        match &self.g.blocks[0].kind {
            BlockKind::Tree { boundary, .. } => *boundary,
            _ => unreachable!(),
        }
    }

    fn placeholder() -> BlockKind {
        BlockKind::Merge { mode: MergeMode::LatestWins, inputs: Vec::new(), output: PortId(usize::MAX) }
    }

    fn tree(&mut self) {
        let id = self.add_block(self.def.name.clone(), None, Self::placeholder());
        let boundary = self.boundary_ports(id);
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for p in &self.def.ports {
            let port = self.add_port(id, &p.name, p.direction, PortType::Data(p.ty));
            match p.direction {
                Direction::Input => inputs.push((p.name.clone(), port)),
                Direction::Output => outputs.push((p.name.clone(), port)),
            }
        }
        self.set_kind(id, BlockKind::Tree { boundary, inputs, outputs });
    }

    fn node(&mut self, node: &BtNode, id: NodeId, parent: BlockId) -> Boundary {
        let enter = self.walk;
        self.walk += 1;
        let block = match &node.kind {
            NodeKind::Leaf(_) => self.add_block(format!("task_{}", id.ident()), Some(parent), Self::placeholder()),
            NodeKind::Composite(c) => {
                self.add_block(format!("{}_{}", c.kind.keyword(), id.ident()), Some(parent), Self::placeholder())
            }
        };
        let boundary = self.boundary_ports(block);
        self.nodes.insert(id.clone(), (block, boundary));
        match &node.kind {
            NodeKind::Leaf(leaf) => {
                let types = self.res.leaf(&id).cloned().expect("validated leaves resolve");
                let mut sources = Vec::new();
                let mut effects = Vec::new();
                for (name, target) in &types.sources {
                    let ty = self.res.type_of(self.def, target).expect("resolved");
                    sources.push((name.clone(), self.add_port(block, name, Direction::Input, PortType::Data(ty))));
                }
                for (name, target) in &types.effects {
                    let ty = self.res.type_of(self.def, target).expect("resolved");
                    effects.push((name.clone(), self.add_port(block, name, Direction::Output, PortType::Data(ty))));
                }
                let mut fx = vec![boundary.success, boundary.failure];
                fx.extend(effects.iter().map(|(_, p)| *p));
                self.add_reaction(
                    block,
                    ReactionKind::Task,
                    vec![boundary.start],
                    sources.iter().map(|(_, p)| *p).collect(),
                    fx,
                );
                self.leaf_ports.insert(
                    id.clone(),
                    (sources.iter().cloned().collect(), effects.iter().cloned().collect()),
                );
                self.walk += 1;
                let walk = WalkIndex { enter, exit: self.walk - 1 };
                self.set_kind(
                    block,
                    BlockKind::Task { node: id, walk, boundary, leaf: leaf.clone(), sources, effects },
                );
            }
            NodeKind::Composite(c) => {
                let children: Vec<Boundary> = c
                    .children
                    .iter()
                    .enumerate()
                    .map(|(i, child)| self.node(child, id.child(i), block))
                    .collect();
                self.wire_composite(block, c.kind, boundary, &children);
                self.walk += 1;
                let walk = WalkIndex { enter, exit: self.walk - 1 };
                self.set_kind(block, BlockKind::Composite { node: id, composite: c.kind, walk, boundary });
            }
        }
        boundary
    }

    fn wire_composite(&mut self, block: BlockId, kind: CompositeKind, me: Boundary, children: &[Boundary]) {
        let chain = |b: &Boundary, on_success: bool| if on_success { b.success } else { b.failure };
        match kind {
            CompositeKind::Sequence | CompositeKind::Fallback => {
                // A sequence advances on success, a fallback on failure.
                let mut advance_on_success = kind == CompositeKind::Sequence;
                if kind == CompositeKind::Fallback && self.opts.mutation == Some(Mutation::SwapFallbackWiring) {
                    advance_on_success = true;
                }
                self.connect(me.start, children[0].start);
                for pair in children.windows(2) {
                    self.connect(chain(&pair[0], advance_on_success), pair[1].start);
                }
                let last = children.last().expect("validated composites have children");
                let (through, collected) = if advance_on_success {
                    (me.success, me.failure)
                } else {
                    (me.failure, me.success)
                };
                self.connect(chain(last, advance_on_success), through);
                let exits: Vec<PortId> = children.iter().map(|c| chain(c, !advance_on_success)).collect();
                self.merge_into(block, "status", MergeMode::AtMostOne, &exits, PortType::Pure, collected);
            }
            CompositeKind::Parallel { threshold } => {
                let collector = self.add_block(format!("collector_{}", self.g.blocks[block.0].name), Some(block), Self::placeholder());
                let mut child_success = Vec::new();
                let mut child_failure = Vec::new();
                for (i, child) in children.iter().enumerate() {
                    self.connect(me.start, child.start);
                    let s = self.add_port(collector, &format!("success{i}"), Direction::Input, PortType::Pure);
                    let f = self.add_port(collector, &format!("failure{i}"), Direction::Input, PortType::Pure);
                    self.connect(child.success, s);
                    self.connect(child.failure, f);
                    child_success.push(s);
                    child_failure.push(f);
                }
                let success = self.add_port(collector, "success", Direction::Output, PortType::Pure);
                let failure = self.add_port(collector, "failure", Direction::Output, PortType::Pure);
                let triggers = child_success.iter().chain(&child_failure).copied().collect();
                self.add_reaction(collector, ReactionKind::Collect, triggers, Vec::new(), vec![success, failure]);
                self.connect(success, me.success);
                self.connect(failure, me.failure);
                self.set_kind(
                    collector,
                    BlockKind::Collector { threshold, child_success, child_failure, success, failure },
                );
            }
        }
    }

    /// Feeds `target` from `inputs`: directly for a single input, otherwise
    /// through a merge block owned by `block`. Returns nothing for no inputs.
    fn merge_into(&mut self, block: BlockId, what: &str, mode: MergeMode, inputs: &[PortId], ty: PortType, target: PortId) {
        match inputs {
            [] => {}
            [single] => self.connect(*single, target),
            _ => {
                let out = self.merge(block, what, mode, inputs, ty);
                self.connect(out, target);
            }
        }
    }

    fn merge(&mut self, block: BlockId, what: &str, mode: MergeMode, inputs: &[PortId], ty: PortType) -> PortId {
        let owner = self.g.blocks[block.0].name.clone();
        let m = self.add_block(format!("merge_{what}_{owner}"), Some(block), Self::placeholder());
        let ins: Vec<PortId> = inputs
            .iter()
            .enumerate()
            .map(|(i, src)| {
                let p = self.add_port(m, &format!("in{i}"), Direction::Input, ty);
                self.connect(*src, p);
                p
            })
            .collect();
        let output = self.add_port(m, "out", Direction::Output, ty);
        self.add_reaction(m, ReactionKind::Merge, ins.clone(), Vec::new(), vec![output]);
        self.set_kind(m, BlockKind::Merge { mode, inputs: ins, output });
        output
    }

    /// Composite blocks strictly between `owner` (None for the tree) and `leaf`, outermost first.
    fn intermediates(&self, owner: Option<&NodeId>, leaf: &NodeId) -> Vec<BlockId> {
        let skip = owner.map_or(0, |o| o.depth() + 1);
        (skip..leaf.depth())
            .map(|d| self.nodes[&NodeId(leaf.0[..d].to_vec())].0)
            .collect()
    }

    fn owner_block(&self, owner: Option<&NodeId>) -> BlockId {
        owner.map_or(self.g.root, |o| self.nodes[o].0)
    }

    /// Carries a value from inside `owner` down to a leaf source port through
    /// ports dedicated to this reader. Returns the port to feed from inside `owner`.
    fn forward_down(&mut self, owner: Option<&NodeId>, leaf: &NodeId, name: &str, ty: ValueType, leaf_port: PortId) -> PortId {
        let mut below = leaf_port;
        let port_name = format!("{name}@{leaf}");
        for block in self.intermediates(owner, leaf).into_iter().rev() {
            let p = self.add_port(block, &port_name, Direction::Input, PortType::Data(ty));
            self.connect(p, below);
            below = p;
        }
        below
    }

    /// Carries a leaf effect up to `owner`. Returns the port visible inside `owner`.
    fn forward_up(&mut self, owner: Option<&NodeId>, leaf: &NodeId, name: &str, ty: ValueType, leaf_port: PortId) -> PortId {
        let mut current = leaf_port;
        let port_name = format!("{name}@{leaf}");
        for block in self.intermediates(owner, leaf).into_iter().rev() {
            let p = self.add_port(block, &port_name, Direction::Output, PortType::Data(ty));
            self.connect(current, p);
            current = p;
        }
        current
    }

    fn wire_data(&mut self) {
        let leaves = self.res.leaves.clone();
        let (_, tree_inputs, tree_outputs) = self.g.tree();
        let tree_inputs: BTreeMap<String, PortId> = tree_inputs.iter().cloned().collect();
        let tree_outputs: Vec<(String, PortId)> = tree_outputs.to_vec();

        // Top-level inputs fan out through shared forwarding ports.
        for leaf in &leaves {
            for (name, target) in &leaf.sources {
                let Target::Input(port) = target else { continue };
                let ty = self.def.port(port).expect("resolved").ty;
                let mut current = tree_inputs[port];
                for block in self.intermediates(None, &leaf.id) {
                    current = match self.shared_inputs.get(&(block, port.clone())) {
                        Some(p) => *p,
                        None => {
                            let p = self.add_port(block, port, Direction::Input, PortType::Data(ty));
                            self.connect(current, p);
                            self.shared_inputs.insert((block, port.clone()), p);
                            p
                        }
                    };
                }
                let leaf_port = self.leaf_ports[&leaf.id].0[name];
                self.connect(current, leaf_port);
            }
        }

        // Top-level outputs: latest writer in execution order wins.
        for (port, tree_port) in tree_outputs {
            let target = Target::Output(port.clone());
            let ty = self.def.port(&port).expect("declared").ty;
            let writers: Vec<PortId> = leaves
                .iter()
                .filter(|l| l.writes(&target))
                .map(|l| {
                    let p = self.leaf_ports[&l.id].1[&port];
                    self.forward_up(None, &l.id, &port, ty, p)
                })
                .collect();
            let root = self.g.root;
            self.merge_into(root, &port, MergeMode::LatestWins, &writers, PortType::Data(ty), tree_port);
        }

        let channels: Vec<(ChannelKey, ValueType)> = self.res.channels.iter().map(|(k, t)| (k.clone(), *t)).collect();
        for (key, ty) in channels {
            self.wire_channel(&leaves, &key, ty);
        }
    }

    fn wire_channel(&mut self, leaves: &[crate::check::ResolvedLeaf], key: &ChannelKey, ty: ValueType) {
        let target = Target::Channel(key.clone());
        let owner = Some(&key.owner);
        let owner_block = self.owner_block(owner);
        let name = key.name.clone();
        let writers: Vec<(usize, PortId)> = leaves
            .iter()
            .filter(|l| l.writes(&target))
            .map(|l| {
                let p = self.leaf_ports[&l.id].1[&name];
                (l.order, self.forward_up(owner, &l.id, &name, ty, p))
            })
            .collect();
        let needs_pre = leaves.iter().any(|l| l.reads(&target) && self.res.is_backward_reader(l, &target));
        let pre_out = needs_pre.then(|| {
            let pre = self.add_block(format!("Pre_{name}"), Some(owner_block), Self::placeholder());
            let input = self.add_port(pre, "in", Direction::Input, PortType::Data(ty));
            let start = self.add_port(pre, "start", Direction::Input, PortType::Pure);
            let output = self.add_port(pre, "out", Direction::Output, PortType::Data(ty));
            self.add_reaction(pre, ReactionKind::PreEmit, vec![start], Vec::new(), vec![output]);
            self.add_reaction(pre, ReactionKind::PreStore, vec![input], Vec::new(), Vec::new());
            self.set_kind(pre, BlockKind::Pre { channel: name.clone(), input, start, output });
            let owner_start = self.nodes[&key.owner].1.start;
            self.connect(owner_start, start);
            let all: Vec<PortId> = writers.iter().map(|(_, p)| *p).collect();
            self.merge_into(owner_block, &format!("{name}_final"), MergeMode::LatestWins, &all, PortType::Data(ty), input);
            output
        });
        for reader in leaves.iter().filter(|l| l.reads(&target)) {
            let mut inputs = Vec::new();
            if self.res.is_backward_reader(reader, &target) {
                inputs.extend(pre_out);
            }
            inputs.extend(writers.iter().filter(|(order, _)| *order < reader.order).map(|(_, p)| *p));
            if inputs.is_empty() {
                continue;
            }
            let leaf_port = self.leaf_ports[&reader.id].0[&name];
            let handle = self.forward_down(owner, &reader.id, &name, ty, leaf_port);
            let what = format!("{name}_{}", reader.id.ident());
            self.merge_into(owner_block, &what, MergeMode::LatestWins, &inputs, PortType::Data(ty), handle);
        }
    }
}
