use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use super::graph::{PortId, ReactionId, ReactorGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderError {
    /// Reactions left over once no more could be scheduled.
    Cycle(Vec<ReactionId>),
}

/// Ports reachable from `port` by following connections, including itself.
fn downstream(fanout: &[Vec<PortId>], port: PortId, out: &mut BTreeSet<PortId>) {
    let mut stack = vec![port];
    while let Some(p) = stack.pop() {
        if out.insert(p) {
            stack.extend(fanout[p.0].iter().copied());
        }
    }
}

/// Precedence edges between reactions: `a -> b` when an effect of `a` can
/// reach a trigger or source of `b`, or when both live in one block and `a`
/// is declared first.
pub fn dependencies(g: &ReactorGraph) -> Vec<Vec<ReactionId>> {
    let fanout = g.fanout();
    let mut readers: Vec<Vec<ReactionId>> = vec![Vec::new(); g.ports.len()];
    for r in &g.reactions {
        for p in r.triggers.iter().chain(&r.sources) {
            readers[p.0].push(r.id);
        }
    }
    let mut edges = vec![Vec::new(); g.reactions.len()];
    for r in &g.reactions {
        let mut reach = BTreeSet::new();
        for p in &r.effects {
            downstream(&fanout, *p, &mut reach);
        }
        let mut next: BTreeSet<ReactionId> = reach.iter().flat_map(|p| readers[p.0].iter().copied()).collect();
        next.extend(
            g.reactions
                .iter()
                .filter(|o| o.block == r.block && o.id > r.id)
                .map(|o| o.id),
        );
        next.remove(&r.id);
        edges[r.id.0] = next.into_iter().collect();
    }
    edges
}

/// Kahn's algorithm. Among ready reactions the one with the smallest
/// `(priority, id)` goes first, so a constant priority yields the canonical
/// order and random priorities yield other valid orders.
pub fn topological_order(
    g: &ReactorGraph,
    mut priority: impl FnMut(ReactionId) -> u64,
) -> Result<Vec<ReactionId>, OrderError> {
    let edges = dependencies(g);
    let prio: Vec<u64> = g.reactions.iter().map(|r| priority(r.id)).collect();
    let mut indegree = vec![0usize; g.reactions.len()];
    for targets in &edges {
        for t in targets {
            indegree[t.0] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<(u64, ReactionId)>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, d)| **d == 0)
        .map(|(i, _)| Reverse((prio[i], ReactionId(i))))
        .collect();
    let mut order = Vec::with_capacity(g.reactions.len());
    while let Some(Reverse((_, r))) = ready.pop() {
        order.push(r);
        for t in &edges[r.0] {
            indegree[t.0] -= 1;
            if indegree[t.0] == 0 {
                ready.push(Reverse((prio[t.0], *t)));
            }
        }
    }
    if order.len() < g.reactions.len() {
        let left = (0..g.reactions.len()).filter(|i| indegree[*i] > 0).map(ReactionId).collect();
        return Err(OrderError::Cycle(left));
    }
    Ok(order)
}
