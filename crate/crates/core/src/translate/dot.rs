//! Graphviz renderings of a tree and of its compiled network. Output is a
//! pure function of the input, so it can be diffed.

use std::fmt::Write;

use super::graph::{BlockId, BlockKind, PortId, ReactorGraph};
use crate::model::{BtDef, CompositeKind, Direction, LeafKind, NodeKind};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' | '\\' | '{' | '}' | '|' | '<' | '>' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

/// The tree as drawn in the literature: tasks as boxes, conditions as
/// ellipses, composites by their symbol.
pub fn bt_to_dot(def: &BtDef) -> String {
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", escape(&def.name)).unwrap();
    writeln!(out, "  node [fontname=\"Helvetica\"];").unwrap();
    let mut edges = Vec::new();
    def.walk(|id, node| {
        let name = id.ident();
        match &node.kind {
            NodeKind::Leaf(leaf) => {
                let shape = match leaf.kind {
                    LeafKind::Task => "box",
                    LeafKind::Condition => "ellipse",
                };
                writeln!(out, "  {name} [shape={shape}, label=\"{}\"];", escape(&leaf.label)).unwrap();
            }
            NodeKind::Composite(c) => {
                let label = match c.kind {
                    CompositeKind::Parallel { threshold } => format!("{} {threshold}", c.kind.symbol()),
                    k => k.symbol().to_string(),
                };
                writeln!(out, "  {name} [shape=square, label=\"{label}\"];").unwrap();
            }
        }
        if let Some(parent) = id.parent() {
            edges.push(format!("  {} -> {name};", parent.ident()));
        }
    });
    for e in edges {
        writeln!(out, "{e}").unwrap();
    }
    out.push_str("}\n");
    out
}

fn is_cluster(kind: &BlockKind) -> bool {
    matches!(kind, BlockKind::Tree { .. } | BlockKind::Composite { .. })
}

/// The compiled network. Trees and composites are clusters whose ports are
/// small nodes; every other block is a record with its ports as fields.
pub fn graph_to_dot(g: &ReactorGraph) -> String {
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", escape(&g.name)).unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    writeln!(out, "  node [fontname=\"Helvetica\", fontsize=10];").unwrap();
    let mut children: Vec<Vec<BlockId>> = vec![Vec::new(); g.blocks.len()];
    for b in &g.blocks {
        if let Some(p) = b.parent {
            children[p.0].push(b.id);
        }
    }
    write_block(g, &children, g.root, 1, &mut out);
    for c in &g.connections {
        writeln!(out, "  {} -> {};", endpoint(g, c.from), endpoint(g, c.to)).unwrap();
    }
    out.push_str("}\n");
    out
}

fn endpoint(g: &ReactorGraph, port: PortId) -> String {
    let block = g.block(g.port(port).block);
    if is_cluster(&block.kind) {
        format!("p{}", port.0)
    } else {
        format!("b{}:p{}", block.id.0, port.0)
    }
}

fn write_block(g: &ReactorGraph, children: &[Vec<BlockId>], id: BlockId, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let block = g.block(id);
    if is_cluster(&block.kind) {
        writeln!(out, "{pad}subgraph cluster_{} {{", block.name).unwrap();
        writeln!(out, "{pad}  label=\"{}\";", escape(&block.label())).unwrap();
        for p in &block.ports {
            let port = g.port(*p);
            let shape = match port.direction {
                Direction::Input => "rarrow",
                Direction::Output => "larrow",
            };
            writeln!(out, "{pad}  p{} [shape={shape}, label=\"{}\"];", p.0, escape(&port.name)).unwrap();
        }
        for child in &children[id.0] {
            write_block(g, children, *child, depth + 1, out);
        }
        writeln!(out, "{pad}}}").unwrap();
        return;
    }
    let fields = |dir: Direction| {
        block
            .ports
            .iter()
            .filter(|p| g.port(**p).direction == dir)
            .map(|p| format!("<p{}> {}", p.0, escape(&g.port(*p).name)))
            .collect::<Vec<_>>()
            .join("|")
    };
    let title = match &block.kind {
        BlockKind::Task { .. } => escape(&block.label()),
        _ => escape(&block.name),
    };
    writeln!(
        out,
        "{pad}b{} [shape=record, label=\"{{{{{}}}|{title}|{{{}}}}}\"];",
        id.0,
        fields(Direction::Input),
        fields(Direction::Output)
    )
    .unwrap();
}
