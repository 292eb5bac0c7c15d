//! Text and Graphviz renderings of task trees.

use std::fmt::Write;

use crate::model::{TaskNode, TaskTree};

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

fn composite_label(node: &TaskNode) -> String {
    match node.constraint {
        Some(c) => format!("{}\\n{}", dot_escape(&node.name), c),
        None => format!("{}\\n(unexpanded)", dot_escape(&node.name)),
    }
}

/// Graphviz digraph: composites are ellipses labelled with their constraint,
/// primitives are boxes, precedence edges are dashed blue.
pub fn to_dot(tree: &TaskTree) -> String {
    let mut out = String::new();
    let order = tree.preorder();
    writeln!(out, "digraph \"{}\" {{", dot_escape(&tree.objective)).unwrap();
    writeln!(out, "  rankdir=TB;").unwrap();
    writeln!(out, "  node [fontname=\"Helvetica\"];").unwrap();
    for id in &order {
        let node = &tree.nodes[id];
        if node.is_composite() {
            writeln!(out, "  \"{id}\" [label=\"{}\", shape=ellipse];", composite_label(node)).unwrap();
        } else {
            writeln!(out, "  \"{id}\" [label=\"{}\", shape=box];", dot_escape(&node.name)).unwrap();
        }
    }
    for id in &order {
        for child in &tree.nodes[id].children {
            writeln!(out, "  \"{id}\" -> \"{child}\";").unwrap();
        }
    }
    for (before, after) in &tree.precedence {
        writeln!(
            out,
            "  \"{before}\" -> \"{after}\" [style=dashed, color=blue, constraint=false];"
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

/// Indented depth-first listing followed by the precedence pairs.
pub fn to_text(tree: &TaskTree) -> String {
    let mut out = String::new();
    let mut stack = vec![(tree.root.clone(), 0usize)];
    while let Some((id, depth)) = stack.pop() {
        let node = &tree.nodes[&id];
        let indent = "  ".repeat(depth);
        let annotation = if node.is_composite() {
            match node.constraint {
                Some(c) => format!("[{c}]"),
                None => "[unexpanded]".to_string(),
            }
        } else {
            match &node.action {
                Some(a) => format!("({}: {})", a.robot_type, a.capability),
                None => "(unbound primitive)".to_string(),
            }
        };
        writeln!(out, "{indent}{} {annotation}", node.name).unwrap();
        for child in node.children.iter().rev() {
            stack.push((child.clone(), depth + 1));
        }
    }
    if !tree.precedence.is_empty() {
        out.push_str("Precedence:\n");
        for (before, after) in &tree.precedence {
            writeln!(out, "  {} -> {}", tree.nodes[before].name, tree.nodes[after].name).unwrap();
        }
    }
    out
}
