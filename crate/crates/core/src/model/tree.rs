//! Hierarchical AND/XOR task trees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// Relation between a composite node and its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Every child must be completed.
    #[serde(rename = "AND")]
    And,
    /// Exactly one child must be completed.
    #[serde(rename = "XOR")]
    Xor,
}

impl Constraint {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AND" => Some(Constraint::And),
            "XOR" => Some(Constraint::Xor),
            _ => None,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::And => f.write_str("AND"),
            Constraint::Xor => f.write_str("XOR"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Composite,
    Primitive,
}

/// An action a robot type can execute directly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrimitiveAction {
    pub action_name: String,
    pub robot_type: String,
    pub capability: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

impl PrimitiveAction {
    pub fn new(
        action_name: impl Into<String>,
        robot_type: impl Into<String>,
        capability: impl Into<String>,
    ) -> Self {
        Self {
            action_name: action_name.into(),
            robot_type: robot_type.into(),
            capability: capability.into(),
            subject: None,
        }
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskNode {
    pub name: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<PrimitiveAction>,
    /// Marks a composite node whose primitive descendants of this robot type
    /// all run on a single robot instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_branch: Option<String>,
}

impl TaskNode {
    pub fn composite(name: impl Into<String>, constraint: Option<Constraint>) -> Self {
        Self {
            name: name.into(),
            kind: NodeKind::Composite,
            constraint,
            children: Vec::new(),
            action: None,
            robot_branch: None,
        }
    }

    pub fn primitive(name: impl Into<String>, action: Option<PrimitiveAction>) -> Self {
        Self {
            name: name.into(),
            kind: NodeKind::Primitive,
            constraint: None,
            children: Vec::new(),
            action,
            robot_branch: None,
        }
    }

    pub fn is_primitive(&self) -> bool {
        self.kind == NodeKind::Primitive
    }

    pub fn is_composite(&self) -> bool {
        self.kind == NodeKind::Composite
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTree {
    pub objective: String,
    pub root: NodeId,
    pub nodes: BTreeMap<NodeId, TaskNode>,
    #[serde(default)]
    pub precedence: Vec<(NodeId, NodeId)>,
}

/// Canonical spelling of a node name: trimmed, `{}` decoration removed,
/// internal whitespace collapsed.
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| *c != '{' && *c != '}')
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Key under which two names are considered the same node.
pub fn name_key(name: &str) -> String {
    normalize_name(name).to_lowercase()
}

impl TaskTree {
    /// A tree holding only a composite root named after the objective.
    pub fn new(objective: impl Into<String>) -> Self {
        let objective = objective.into();
        let root = NodeId::new("n0");
        let mut nodes = BTreeMap::new();
        nodes.insert(root.clone(), TaskNode::composite(objective.clone(), None));
        Self {
            objective,
            root,
            nodes,
            precedence: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let tree: TaskTree = serde_json::from_str(text)?;
        tree.check_invariants().map_err(ModelError::InvalidTree)?;
        Ok(tree)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn node(&self, id: &NodeId) -> Option<&TaskNode> {
        self.nodes.get(id)
    }

    pub fn root_node(&self) -> &TaskNode {
        &self.nodes[&self.root]
    }

    pub(crate) fn node_mut(&mut self, id: &NodeId) -> Option<&mut TaskNode> {
        self.nodes.get_mut(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids in depth-first pre-order from the root. Nodes unreachable
    /// from the root are not listed.
    pub fn preorder(&self) -> Vec<NodeId> {
        self.preorder_from(&self.root)
    }

    pub fn preorder_from(&self, start: &NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut visited = BTreeSet::new();
        let mut stack = vec![start.clone()];
        while let Some(id) = stack.pop() {
            if !visited.insert(id.clone()) {
                continue;
            }
            if let Some(node) = self.nodes.get(&id) {
                for child in node.children.iter().rev() {
                    stack.push(child.clone());
                }
            }
            out.push(id);
        }
        out
    }

    pub fn parents(&self) -> BTreeMap<NodeId, NodeId> {
        let mut parents = BTreeMap::new();
        for (id, node) in &self.nodes {
            for child in &node.children {
                parents.insert(child.clone(), id.clone());
            }
        }
        parents
    }

    pub fn depth(&self, id: &NodeId) -> usize {
        let parents = self.parents();
        let mut depth = 0;
        let mut current = id;
        while let Some(parent) = parents.get(current) {
            depth += 1;
            current = parent;
        }
        depth
    }

    /// Primitive nodes in the subtree rooted at `id` (including `id` itself).
    pub fn primitives_under(&self, id: &NodeId) -> Vec<NodeId> {
        self.preorder_from(id)
            .into_iter()
            .filter(|n| self.nodes.get(n).is_some_and(TaskNode::is_primitive))
            .collect()
    }

    /// Leaves of the subtree at `id`: primitives and composites with no
    /// children yet.
    pub fn leaves_under(&self, id: &NodeId) -> Vec<NodeId> {
        self.preorder_from(id)
            .into_iter()
            .filter(|n| self.nodes.get(n).is_some_and(|node| node.children.is_empty()))
            .collect()
    }

    /// The node that decides which robot instance executes `primitive`: the
    /// nearest ancestor marked as a branch of the action's robot type, or the
    /// primitive itself.
    pub fn binding_unit(&self, primitive: &NodeId) -> NodeId {
        let parents = self.parents();
        self.binding_unit_with(primitive, &parents)
    }

    pub(crate) fn binding_unit_with(
        &self,
        primitive: &NodeId,
        parents: &BTreeMap<NodeId, NodeId>,
    ) -> NodeId {
        let Some(robot_type) = self
            .nodes
            .get(primitive)
            .and_then(|n| n.action.as_ref())
            .map(|a| a.robot_type.as_str())
        else {
            return primitive.clone();
        };
        let mut current = primitive;
        while let Some(parent) = parents.get(current) {
            if self.nodes[parent].robot_branch.as_deref() == Some(robot_type) {
                return parent.clone();
            }
            current = parent;
        }
        primitive.clone()
    }

    pub fn find_by_key(&self, key: &str) -> Option<&NodeId> {
        self.nodes
            .iter()
            .find(|(_, node)| name_key(&node.name) == key)
            .map(|(id, _)| id)
    }

    pub fn has_name(&self, name: &str) -> bool {
        self.find_by_key(&name_key(name)).is_some()
    }

    /// Smallest `nK` id not present in the tree.
    pub fn fresh_id(&self) -> NodeId {
        let mut k = self.nodes.len();
        loop {
            let id = NodeId(format!("n{k}"));
            if !self.nodes.contains_key(&id) {
                return id;
            }
            k += 1;
        }
    }

    /// Returns `name` or, if taken, `name (2)`, `name (3)`, ...
    pub fn unique_name(&self, name: &str) -> String {
        if !self.has_name(name) {
            return name.to_string();
        }
        (2..)
            .map(|k| format!("{name} ({k})"))
            .find(|candidate| !self.has_name(candidate))
            .expect("unbounded search")
    }

    pub fn add_precedence(&mut self, before: NodeId, after: NodeId) {
        let pair = (before, after);
        if !self.precedence.contains(&pair) {
            self.precedence.push(pair);
        }
    }

    /// Adds `node` as the last child of `parent` under a fresh id. Does not
    /// enforce constraint agreement; callers do.
    pub(crate) fn push_child(&mut self, parent: &NodeId, node: TaskNode) -> NodeId {
        let id = self.fresh_id();
        self.nodes.insert(id.clone(), node);
        self.nodes
            .get_mut(parent)
            .expect("parent exists")
            .children
            .push(id.clone());
        id
    }

    /// Copies `fragment` under `parent`, renumbering its ids and renaming
    /// nodes whose names collide with existing ones. Returns the id of the
    /// grafted fragment root.
    pub fn graft(&mut self, parent: &NodeId, fragment: &TaskTree) -> Result<NodeId, ModelError> {
        if !self.nodes.get(parent).is_some_and(TaskNode::is_composite) {
            return Err(ModelError::InvalidTree(format!(
                "graft target '{parent}' is not a composite node"
            )));
        }
        let mut mapping = BTreeMap::new();
        for old in fragment.preorder() {
            let id = self.fresh_id();
            let mut node = fragment.nodes[&old].clone();
            node.name = self.unique_name(&node.name);
            node.children.clear();
            self.nodes.insert(id.clone(), node);
            mapping.insert(old, id);
        }
        for (old, new) in &mapping {
            let children = fragment.nodes[old]
                .children
                .iter()
                .map(|c| mapping[c].clone())
                .collect();
            self.nodes.get_mut(new).expect("just inserted").children = children;
        }
        for (before, after) in &fragment.precedence {
            self.add_precedence(mapping[before].clone(), mapping[after].clone());
        }
        let new_root = mapping[&fragment.root].clone();
        self.nodes
            .get_mut(parent)
            .expect("checked above")
            .children
            .push(new_root.clone());
        Ok(new_root)
    }

    /// Precedence pairs expanded to leaf level: each pair on composite nodes
    /// becomes one pair per (leaf under before, leaf under after).
    pub fn projected_precedence(&self) -> BTreeSet<(NodeId, NodeId)> {
        let mut edges = BTreeSet::new();
        for (before, after) in &self.precedence {
            let from = self.leaves_under(before);
            let to = self.leaves_under(after);
            for a in &from {
                for b in &to {
                    edges.insert((a.clone(), b.clone()));
                }
            }
        }
        edges
    }

    /// Structural invariants. Completeness (every leaf primitive) is not
    /// checked here; see [`super::validate_tree`].
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.nodes.contains_key(&self.root) {
            return Err(format!("root '{}' does not exist", self.root));
        }
        let mut parent_of: BTreeMap<&NodeId, &NodeId> = BTreeMap::new();
        for (id, node) in &self.nodes {
            for child in &node.children {
                if !self.nodes.contains_key(child) {
                    return Err(format!("node '{id}' references missing child '{child}'"));
                }
                if child == &self.root {
                    return Err(format!("root '{}' has a parent", self.root));
                }
                if let Some(previous) = parent_of.insert(child, id) {
                    return Err(format!(
                        "node '{child}' has two parents ('{previous}' and '{id}')"
                    ));
                }
            }
            match node.kind {
                NodeKind::Primitive => {
                    if !node.children.is_empty() {
                        return Err(format!("primitive node '{id}' has children"));
                    }
                    if node.constraint.is_some() {
                        return Err(format!("primitive node '{id}' carries a constraint"));
                    }
                }
                NodeKind::Composite => {
                    if node.action.is_some() {
                        return Err(format!("composite node '{id}' carries an action"));
                    }
                    if !node.children.is_empty() && node.constraint.is_none() {
                        return Err(format!("composite node '{id}' has children but no constraint"));
                    }
                }
            }
        }
        let reachable = self.preorder();
        if reachable.len() != self.nodes.len() {
            return Err(format!(
                "{} node(s) unreachable from root",
                self.nodes.len() - reachable.len()
            ));
        }
        let mut keys = BTreeSet::new();
        for node in self.nodes.values() {
            if normalize_name(&node.name).is_empty() {
                return Err("node with empty name".to_string());
            }
            if !keys.insert(name_key(&node.name)) {
                return Err(format!("duplicate node name '{}'", node.name));
            }
        }
        for (before, after) in &self.precedence {
            for id in [before, after] {
                if !self.nodes.contains_key(id) {
                    return Err(format!("precedence references missing node '{id}'"));
                }
            }
        }
        if let Some(cycle) = super::validate::precedence_cycles(self).into_iter().next() {
            let names: Vec<_> = cycle.iter().map(|id| self.nodes[id].name.as_str()).collect();
            return Err(format!("precedence cycle: {}", names.join(" -> ")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_tree() -> TaskTree {
        let mut tree = TaskTree::new("Mission");
        let root = tree.root.clone();
        tree.node_mut(&root).unwrap().constraint = Some(Constraint::And);
        let a = tree.push_child(&root, TaskNode::composite("A", None));
        tree.node_mut(&a).unwrap().constraint = Some(Constraint::Xor);
        let a1 = tree.push_child(
            &a,
            TaskNode::primitive("a1", Some(PrimitiveAction::new("a1", "R", "Search"))),
        );
        let _a2 = tree.push_child(
            &a,
            TaskNode::primitive("a2", Some(PrimitiveAction::new("a2", "R", "Search"))),
        );
        let b = tree.push_child(
            &root,
            TaskNode::primitive("b", Some(PrimitiveAction::new("b", "R", "Reach"))),
        );
        tree.add_precedence(a1, b);
        tree
    }

    #[test]
    fn names_normalize() {
        assert_eq!(normalize_name("  Detect {Child} "), "Detect Child");
        assert_eq!(name_key("Locate  the {Lost} child"), "locate the lost child");
    }

    #[test]
    fn preorder_follows_child_order() {
        let tree = small_tree();
        let names: Vec<_> = tree
            .preorder()
            .iter()
            .map(|id| tree.nodes[id].name.clone())
            .collect();
        assert_eq!(names, ["Mission", "A", "a1", "a2", "b"]);
        tree.check_invariants().unwrap();
    }

    #[test]
    fn json_round_trip_keeps_precedence() {
        let tree = small_tree();
        let back = TaskTree::from_json(&tree.to_json()).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.precedence.len(), 1);
    }

    #[test]
    fn graft_renames_collisions() {
        let mut tree = small_tree();
        let mut fragment = TaskTree::new("A");
        let froot = fragment.root.clone();
        fragment.node_mut(&froot).unwrap().constraint = Some(Constraint::And);
        fragment.push_child(&froot, TaskNode::primitive("x", None));
        let root = tree.root.clone();
        let new_root = tree.graft(&root, &fragment).unwrap();
        assert_eq!(tree.nodes[&new_root].name, "A (2)");
        tree.check_invariants().unwrap();
    }

    #[test]
    fn invariant_violations_detected() {
        let mut tree = small_tree();
        let b = tree.find_by_key("b").unwrap().clone();
        let a1 = tree.find_by_key("a1").unwrap().clone();
        tree.add_precedence(b, a1);
        assert!(tree.check_invariants().unwrap_err().contains("cycle"));

        let mut tree = small_tree();
        let id = tree.find_by_key("a2").unwrap().clone();
        tree.node_mut(&id).unwrap().name = "A1".into();
        assert!(tree.check_invariants().unwrap_err().contains("duplicate"));
    }

    #[test]
    fn binding_unit_is_nearest_matching_branch() {
        let mut tree = small_tree();
        let a = tree.find_by_key("a").unwrap().clone();
        tree.node_mut(&a).unwrap().robot_branch = Some("R".into());
        let a1 = tree.find_by_key("a1").unwrap().clone();
        let b = tree.find_by_key("b").unwrap().clone();
        assert_eq!(tree.binding_unit(&a1), a);
        assert_eq!(tree.binding_unit(&b), b);
    }
}
