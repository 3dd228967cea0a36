use std::fmt::Write;

use crate::model::value::write_string_literal;
use crate::model::{BtDef, BtNode, CompositeKind, Leaf, NodeKind, Script, ScriptTail, StepStatus, TaskBody};

/// Canonical text of a definition: two-space indent, one declaration per line.
pub fn pretty_print(def: &BtDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "behaviortree {} {{", def.name);
    for p in &def.ports {
        let _ = writeln!(out, "  {} {}: {}", p.direction.keyword(), p.name, p.ty);
    }
    node(&mut out, &def.root, 1);
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn node(out: &mut String, n: &BtNode, level: usize) {
    indent(out, level);
    match &n.kind {
        NodeKind::Composite(c) => {
            match c.kind {
                CompositeKind::Parallel { threshold } => {
                    let _ = write!(out, "parallel({threshold})");
                }
                k => out.push_str(k.keyword()),
            }
            out.push_str(" {\n");
            for ch in &c.channels {
                indent(out, level + 1);
                let _ = writeln!(out, "channel {}: {}", ch.name, ch.ty);
            }
            for child in &c.children {
                node(out, child, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        NodeKind::Leaf(leaf) => {
            out.push_str(leaf.kind.keyword());
            out.push(' ');
            let _ = write_string_literal(out, &leaf.label);
            if leaf.states.is_empty() {
                iface(out, leaf);
                out.push(' ');
                body(out, &leaf.body, level);
                out.push('\n');
            } else {
                out.push_str(" {\n");
                for st in &leaf.states {
                    indent(out, level + 1);
                    let _ = writeln!(out, "state {}: {} = {}", st.name, st.ty, st.initial);
                }
                indent(out, level + 1);
                out.push_str("reaction");
                iface(out, leaf);
                out.push(' ');
                body(out, &leaf.body, level + 1);
                out.push('\n');
                indent(out, level);
                out.push_str("}\n");
            }
        }
    }
}

fn iface(out: &mut String, leaf: &Leaf) {
    if leaf.sources.is_empty() && leaf.effects.is_empty() {
        return;
    }
    let _ = write!(out, " ({})", leaf.sources.join(", "));
    if !leaf.effects.is_empty() {
        let _ = write!(out, " -> ({})", leaf.effects.join(", "));
    }
}

fn body(out: &mut String, b: &TaskBody, level: usize) {
    match b {
        TaskBody::Extern(name) => {
            let _ = write!(out, "{{= @extern {name} =}}");
        }
        TaskBody::Expr(e) => {
            let _ = write!(out, "{{= @expr {e} =}}");
        }
        TaskBody::Script(script) => script_body(out, script, level),
    }
}

fn script_body(out: &mut String, script: &Script, level: usize) {
    out.push_str("{=\n");
    indent(out, level + 1);
    out.push_str("@script\n");
    for step in &script.steps {
        indent(out, level + 1);
        out.push_str("step {");
        for (target, e) in &step.emits {
            let _ = write!(out, " emit {target} = {e};");
        }
        for (target, e) in &step.state_updates {
            let _ = write!(out, " state {target} = {e};");
        }
        let _ = writeln!(out, " status {} }}", status_list(step.status));
    }
    indent(out, level + 1);
    out.push_str(match script.tail {
        ScriptTail::Loop => "loop\n",
        ScriptTail::Hold => "hold\n",
    });
    indent(out, level);
    out.push_str("=}");
}

fn status_list(s: StepStatus) -> &'static str {
    match (s.success, s.failure) {
        (true, true) => "success, failure",
        (true, false) => "success",
        (false, true) => "failure",
        (false, false) => "running",
    }
}
