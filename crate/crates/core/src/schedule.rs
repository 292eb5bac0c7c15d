//! Per-robot action orders for a chosen alternative.
//!
//! Precedence pairs of the tree are projected onto the alternative's actions
//! (a pair on composite nodes orders every selected action below `before`
//! ahead of every selected action below `after`) and the result is
//! topologically sorted, breaking ties by depth-first tree position. Orders
//! between different robots are exported as explicit cross edges, reduced to
//! those not implied by other edges.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::model::{ModelError, NodeId, PrimitiveAction, TaskTree};
use crate::mrta::{Alternative, RobotInstance};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("precedence constraints form a cycle: {}", .0.join(" -> "))]
    CyclicPrecedence(Vec<String>),
    #[error("alternative references node '{0}', which is not in the tree")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledAction {
    pub node: NodeId,
    #[serde(flatten)]
    pub action: PrimitiveAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotSchedule {
    #[serde(flatten)]
    pub robot: RobotInstance,
    pub actions: Vec<ScheduledAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionRef {
    #[serde(flatten)]
    pub robot: RobotInstance,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrossEdge {
    pub from: ActionRef,
    pub to: ActionRef,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub robots: Vec<RobotSchedule>,
    pub cross_edges: Vec<CrossEdge>,
}

impl Schedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    fn label(&self, robot: &RobotInstance) -> String {
        let same_type = self
            .robots
            .iter()
            .filter(|r| r.robot.robot_type == robot.robot_type)
            .count();
        if same_type > 1 {
            robot.to_string()
        } else {
            robot.robot_type.clone()
        }
    }

    fn action_name<'a>(&'a self, r: &'a ActionRef) -> &'a str {
        self.robots
            .iter()
            .find(|s| s.robot == r.robot)
            .and_then(|s| s.actions.iter().find(|a| a.node == r.node))
            .map_or(r.node.as_str(), |a| a.action.action_name.as_str())
    }

    /// One bracketed action list per robot, then the cross-robot orders.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.robots {
            let actions: Vec<_> = r.actions.iter().map(|a| a.action.action_name.as_str()).collect();
            writeln!(out, "{} : [{}]", self.label(&r.robot), actions.join(", ")).unwrap();
        }
        if !self.cross_edges.is_empty() {
            out.push_str("Cross-robot precedence:\n");
            for e in &self.cross_edges {
                writeln!(
                    out,
                    "  {} : {} -> {} : {}",
                    self.label(&e.from.robot),
                    self.action_name(&e.from),
                    self.label(&e.to.robot),
                    self.action_name(&e.to)
                )
                .unwrap();
            }
        }
        out
    }
}

/// Precedence pairs between actions of `alt`, as indices into its
/// assignments.
fn induced_edges(alt: &Alternative, tree: &TaskTree) -> BTreeSet<(usize, usize)> {
    let index: BTreeMap<&NodeId, usize> =
        alt.assignments.iter().enumerate().map(|(i, a)| (&a.node, i)).collect();
    let mut edges = BTreeSet::new();
    for (before, after) in &tree.precedence {
        let from: Vec<usize> = tree
            .primitives_under(before)
            .iter()
            .filter_map(|n| index.get(n).copied())
            .collect();
        let to: Vec<usize> = tree
            .primitives_under(after)
            .iter()
            .filter_map(|n| index.get(n).copied())
            .collect();
        for &a in &from {
            for &b in &to {
                edges.insert((a, b));
            }
        }
    }
    edges
}

fn find_cycle(succ: &[Vec<usize>], remaining: &BTreeSet<usize>) -> Vec<usize> {
    // Every node left over by Kahn's algorithm has a predecessor that is also
    // left over, so walking predecessors must revisit a node.
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for (v, ws) in succ.iter().enumerate() {
        for &w in ws {
            pred[w].push(v);
        }
    }
    let mut seen = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut v = *remaining.iter().next().expect("non-empty");
    loop {
        if seen[v] != usize::MAX {
            let mut cycle = path[seen[v]..].to_vec();
            cycle.reverse();
            return cycle;
        }
        seen[v] = path.len();
        path.push(v);
        v = *pred[v]
            .iter()
            .find(|u| remaining.contains(u))
            .expect("leftover node has a leftover predecessor");
    }
}

pub fn build_schedule(alt: &Alternative, tree: &TaskTree) -> Result<Schedule, ScheduleError> {
    let position: BTreeMap<NodeId, usize> = tree
        .preorder()
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    for a in &alt.assignments {
        if !position.contains_key(&a.node) {
            return Err(ScheduleError::UnknownNode(a.node.clone()));
        }
    }
    let n = alt.assignments.len();
    let edges = induced_edges(alt, tree);
    let mut succ = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(a, b) in &edges {
        succ[a].push(b);
        indegree[b] += 1;
    }

    // Kahn's algorithm, smallest tree position first.
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| Reverse((position[&alt.assignments[i].node], i)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, v))) = ready.pop() {
        order.push(v);
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse((position[&alt.assignments[w].node], w)));
            }
        }
    }
    if order.len() < n {
        let emitted: BTreeSet<usize> = order.iter().copied().collect();
        let remaining: BTreeSet<usize> = (0..n).filter(|i| !emitted.contains(i)).collect();
        let cycle = find_cycle(&succ, &remaining);
        let mut names: Vec<String> = cycle
            .iter()
            .map(|&i| tree.nodes[&alt.assignments[i].node].name.clone())
            .collect();
        names.push(names[0].clone());
        return Err(ScheduleError::CyclicPrecedence(names));
    }

    let mut robots: Vec<RobotSchedule> = Vec::new();
    let mut lists: BTreeMap<&RobotInstance, Vec<usize>> = BTreeMap::new();
    for &v in &order {
        let a = &alt.assignments[v];
        lists.entry(&a.robot).or_default().push(v);
        if !robots.iter().any(|r| r.robot == a.robot) {
            robots.push(RobotSchedule {
                robot: a.robot.clone(),
                actions: Vec::new(),
            });
        }
    }
    for r in &mut robots {
        r.actions = lists[&r.robot]
            .iter()
            .map(|&v| ScheduledAction {
                node: alt.assignments[v].node.clone(),
                action: alt.assignments[v].action.clone(),
            })
            .collect();
    }

    // Combined order: induced edges plus each robot's sequence.
    let mut combined: BTreeSet<(usize, usize)> = edges.clone();
    for list in lists.values() {
        for pair in list.windows(2) {
            combined.insert((pair[0], pair[1]));
        }
    }
    let rank: Vec<usize> = {
        let mut r = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            r[v] = i;
        }
        r
    };
    // reach[v] = nodes reachable from v, computed in reverse topological order.
    let mut out_edges = vec![Vec::new(); n];
    for &(a, b) in &combined {
        out_edges[a].push(b);
    }
    let mut reach = vec![BTreeSet::new(); n];
    for &v in order.iter().rev() {
        let mut set = BTreeSet::new();
        for &w in &out_edges[v] {
            set.insert(w);
            set.extend(reach[w].iter().copied());
        }
        reach[v] = set;
    }
    let mut cross_edges = Vec::new();
    for &(a, b) in &edges {
        let (ra, rb) = (&alt.assignments[a].robot, &alt.assignments[b].robot);
        if ra == rb {
            continue;
        }
        let implied = out_edges[a]
            .iter()
            .any(|&w| w != b && (reach[w].contains(&b)));
        if !implied {
            cross_edges.push((rank[a], rank[b], a, b));
        }
    }
    cross_edges.sort();
    let cross_edges = cross_edges
        .into_iter()
        .map(|(_, _, a, b)| CrossEdge {
            from: ActionRef {
                robot: alt.assignments[a].robot.clone(),
                node: alt.assignments[a].node.clone(),
            },
            to: ActionRef {
                robot: alt.assignments[b].robot.clone(),
                node: alt.assignments[b].node.clone(),
            },
        })
        .collect();
    Ok(Schedule { robots, cross_edges })
}

/// Checks that `schedule` runs every action of `alt` exactly once on its
/// bound robot and that every precedence pair of the tree, projected onto
/// `alt`, is implied by the per-robot sequences together with the cross
/// edges.
pub fn verify_schedule(schedule: &Schedule, tree: &TaskTree, alt: &Alternative) -> bool {
    let mut placed: BTreeMap<(&RobotInstance, &NodeId), usize> = BTreeMap::new();
    for r in &schedule.robots {
        for a in &r.actions {
            *placed.entry((&r.robot, &a.node)).or_default() += 1;
        }
    }
    let expected: BTreeMap<(&RobotInstance, &NodeId), usize> =
        alt.assignments.iter().map(|a| ((&a.robot, &a.node), 1)).collect();
    if placed != expected || expected.len() != alt.assignments.len() {
        return false;
    }

    // Relation over nodes of the alternative.
    let nodes: Vec<&NodeId> = alt.assignments.iter().map(|a| &a.node).collect();
    let id: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let n = nodes.len();
    let mut adj = vec![vec![false; n]; n];
    for r in &schedule.robots {
        for w in r.actions.windows(2) {
            adj[id[&w[0].node]][id[&w[1].node]] = true;
        }
    }
    for e in &schedule.cross_edges {
        match (id.get(&e.from.node), id.get(&e.to.node)) {
            (Some(&a), Some(&b)) => adj[a][b] = true,
            _ => return false,
        }
    }
    // Transitive closure (Floyd-Warshall).
    let mut reach = adj;
    for k in 0..n {
        let via = reach[k].clone();
        for row in reach.iter_mut() {
            if row[k] {
                for (cell, &step) in row.iter_mut().zip(&via) {
                    *cell |= step;
                }
            }
        }
    }
    if (0..n).any(|i| reach[i][i]) {
        return false;
    }

    let parent: BTreeMap<&NodeId, &NodeId> = tree
        .nodes
        .iter()
        .flat_map(|(p, node)| node.children.iter().map(move |c| (c, p)))
        .collect();
    let within = |x: &NodeId, ancestor: &NodeId| -> bool {
        let mut cur = x;
        loop {
            if cur == ancestor {
                return true;
            }
            match parent.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    };
    for (before, after) in &tree.precedence {
        for (i, x) in nodes.iter().enumerate() {
            if !within(x, before) {
                continue;
            }
            for (j, y) in nodes.iter().enumerate() {
                if within(y, after) && !reach[i][j] {
                    return false;
                }
            }
        }
    }
    true
}
