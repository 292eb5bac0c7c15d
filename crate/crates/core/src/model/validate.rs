use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tree::{NodeId, TaskTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRef {
    pub id: NodeId,
    pub name: String,
}

/// Outcome of checking whether a tree can be decomposed into robot actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub complete: bool,
    /// Composite leaves: abstract tasks that were never expanded.
    pub dangling_composites: Vec<NodeRef>,
    /// Primitive nodes with no robot action bound to them.
    pub unbound_primitives: Vec<NodeRef>,
    /// Each entry is one strongly connected set of leaves in the projected
    /// precedence graph.
    pub precedence_cycles: Vec<Vec<NodeId>>,
    pub structural_errors: Vec<String>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        if self.complete {
            return "complete".to_string();
        }
        let mut parts = Vec::new();
        if !self.dangling_composites.is_empty() {
            let names: Vec<_> = self.dangling_composites.iter().map(|n| n.name.as_str()).collect();
            parts.push(format!("dangling composite leaves: {}", names.join(", ")));
        }
        if !self.unbound_primitives.is_empty() {
            let names: Vec<_> = self.unbound_primitives.iter().map(|n| n.name.as_str()).collect();
            parts.push(format!("primitives without a robot action: {}", names.join(", ")));
        }
        if !self.precedence_cycles.is_empty() {
            parts.push(format!("{} precedence cycle(s)", self.precedence_cycles.len()));
        }
        for err in &self.structural_errors {
            parts.push(err.clone());
        }
        format!("incomplete: {}", parts.join("; "))
    }
}

pub fn validate_tree(tree: &TaskTree) -> ValidationReport {
    let mut structural_errors = Vec::new();
    let structure = tree.check_invariants();
    let cycles = precedence_cycles(tree);
    if let Err(err) = structure {
        if !err.starts_with("precedence cycle") {
            structural_errors.push(err);
        }
    }
    let mut dangling_composites = Vec::new();
    let mut unbound_primitives = Vec::new();
    for id in tree.preorder() {
        let node = &tree.nodes[&id];
        let entry = || NodeRef {
            id: id.clone(),
            name: node.name.clone(),
        };
        if node.is_composite() && node.children.is_empty() {
            dangling_composites.push(entry());
        } else if node.is_primitive() && node.action.is_none() {
            unbound_primitives.push(entry());
        }
    }
    let complete = dangling_composites.is_empty()
        && unbound_primitives.is_empty()
        && cycles.is_empty()
        && structural_errors.is_empty();
    ValidationReport {
        complete,
        dangling_composites,
        unbound_primitives,
        precedence_cycles: cycles,
        structural_errors,
    }
}

/// Strongly connected components of the leaf-projected precedence graph that
/// contain a cycle (size > 1, or a self loop).
pub(crate) fn precedence_cycles(tree: &TaskTree) -> Vec<Vec<NodeId>> {
    let edges = tree.projected_precedence();
    let mut adjacency: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for (a, b) in &edges {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default();
    }
    let self_loops: BTreeSet<&NodeId> = edges.iter().filter(|(a, b)| a == b).map(|(a, _)| a).collect();

    // Tarjan's algorithm.
    struct State<'a> {
        index: BTreeMap<&'a NodeId, usize>,
        low: BTreeMap<&'a NodeId, usize>,
        on_stack: BTreeSet<&'a NodeId>,
        stack: Vec<&'a NodeId>,
        next: usize,
        components: Vec<Vec<NodeId>>,
    }
    fn connect<'a>(v: &'a NodeId, adjacency: &BTreeMap<&'a NodeId, Vec<&'a NodeId>>, st: &mut State<'a>) {
        st.index.insert(v, st.next);
        st.low.insert(v, st.next);
        st.next += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        for &w in &adjacency[v] {
            if !st.index.contains_key(w) {
                connect(w, adjacency, st);
                let lw = st.low[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(lw);
            } else if st.on_stack.contains(w) {
                let iw = st.index[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(iw);
            }
        }
        if st.low[v] == st.index[v] {
            let mut component = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack.remove(w);
                component.push(w.clone());
                if w == v {
                    break;
                }
            }
            component.sort();
            st.components.push(component);
        }
    }
    let mut st = State {
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        next: 0,
        components: Vec::new(),
    };
    for v in adjacency.keys() {
        if !st.index.contains_key(v) {
            connect(v, &adjacency, &mut st);
        }
    }
    let mut cycles: Vec<Vec<NodeId>> = st
        .components
        .into_iter()
        .filter(|c| c.len() > 1 || self_loops.contains(&c[0]))
        .collect();
    cycles.sort();
    cycles
}
