#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::Rng;

use mrta_planner::builder::{BuilderCall, PrecedencePair};
use mrta_planner::model::{Constraint, Fleet, NodeId, NodeKind, PrimitiveAction, RobotSpec, TaskNode, TaskTree};
use mrta_planner::mrta::Alternative;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub const MOM_CHILD: &str = "Reunite mom with her lost child";
pub const CAT_RESCUE: &str = "Rescue cat trapped in a building on fire";
pub const RESTAURANTS: &str = "Recommend best Italian restaurants in the area";

pub type ActionMultiset = Vec<(String, String)>;
pub type AltKey = (Vec<(String, usize, String)>, i64);

/// (robot type, action) pairs of an alternative, sorted, case-folded.
pub fn action_multiset(alt: &Alternative) -> ActionMultiset {
    let mut v: Vec<_> = alt
        .assignments
        .iter()
        .map(|a| (a.robot.robot_type.to_lowercase(), a.action.action_name.to_lowercase()))
        .collect();
    v.sort();
    v
}

pub fn expected(lists: &[(&str, &[&str])]) -> ActionMultiset {
    let mut v: Vec<_> = lists
        .iter()
        .flat_map(|(robot, actions)| actions.iter().map(move |a| (robot.to_lowercase(), a.to_lowercase())))
        .collect();
    v.sort();
    v
}

/// Assignment set plus quantized utility; equal keys mean equal alternatives.
pub fn alt_key(alt: &Alternative) -> AltKey {
    let mut v: Vec<_> = alt
        .assignments
        .iter()
        .map(|a| (a.robot.robot_type.clone(), a.robot.instance, a.node.0.clone()))
        .collect();
    v.sort();
    (v, (alt.utility * 1e9).round() as i64)
}

const TYPES: [&str; 5] = ["Alpha", "Bravo", "Charlie", "Delta", "Echo"];
const CAPS: [&str; 5] = ["Search", "Follow", "Reach", "Carry", "Message Display"];
pub const GHOST: &str = "Ghost Robot";

/// Up to 5 robot types with 1 to 3 instances and 1 to 3 capabilities each.
pub fn random_fleet<R: Rng>(rng: &mut R) -> Fleet {
    let n = rng.random_range(1..=5);
    let robots = TYPES[..n]
        .iter()
        .map(|t| {
            let mut spec = RobotSpec::new(*t, rng.random_range(1..=3));
            let k = rng.random_range(1..=3);
            for cap in CAPS.choose_multiple(rng, k) {
                let q = rng.random_range(1..=10) as f64 / 10.0;
                spec = spec.with_capability(*cap, q);
            }
            spec
        })
        .collect();
    Fleet::new(robots).unwrap()
}

struct Gen<'a, R> {
    rng: &'a mut R,
    fleet: &'a Fleet,
    tree: TaskTree,
    leaves: usize,
    max_leaves: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn action(&mut self, forced: Option<&str>) -> PrimitiveAction {
        let robot_type = match forced {
            Some(t) => t.to_string(),
            None if self.rng.random_bool(0.08) => GHOST.to_string(),
            None => self.fleet.robots.choose(self.rng).unwrap().type_name.clone(),
        };
        let capability = match self.fleet.robot(&robot_type) {
            Some(spec) => spec.capabilities.keys().cloned().collect::<Vec<_>>().choose(self.rng).unwrap().clone(),
            None => "Search".to_string(),
        };
        let i = self.tree.nodes.len();
        PrimitiveAction::new(format!("act {i}"), robot_type, capability)
    }

    fn add(&mut self, parent: &NodeId, node: TaskNode) -> NodeId {
        let id = NodeId(format!("n{}", self.tree.nodes.len()));
        self.tree.nodes.insert(id.clone(), node);
        self.tree.nodes.get_mut(parent).unwrap().children.push(id.clone());
        id
    }

    fn expand(&mut self, id: &NodeId, depth: usize, forced: Option<String>) {
        let constraint = if self.rng.random_bool(0.5) { Constraint::And } else { Constraint::Xor };
        let width = self.rng.random_range(1..=3);
        self.tree.nodes.get_mut(id).unwrap().constraint = Some(constraint);
        for _ in 0..width {
            let budget_left = self.leaves < self.max_leaves;
            let composite = depth < 3 && budget_left && self.rng.random_bool(0.45);
            let i = self.tree.nodes.len();
            if composite {
                let branch = match &forced {
                    Some(t) => Some(t.clone()),
                    None if self.rng.random_bool(0.3) => {
                        let t = self.fleet.robots.choose(self.rng).unwrap().type_name.clone();
                        Some(t)
                    }
                    None => None,
                };
                let mut node = TaskNode::composite(format!("task {i}"), None);
                if forced.is_none() {
                    node.robot_branch = branch.clone();
                }
                let child = self.add(id, node);
                self.expand(&child, depth + 1, branch);
            } else if budget_left {
                let action = self.action(forced.as_deref());
                self.add(id, TaskNode::primitive(format!("leaf {i}"), Some(action)));
                self.leaves += 1;
            }
        }
        if self.tree.nodes[id].children.is_empty() {
            // Budget ran out before anything was added; reuse the last leaf
            // slot so the composite is not left dangling.
            let action = self.action(forced.as_deref());
            let i = self.tree.nodes.len();
            self.add(id, TaskNode::primitive(format!("leaf {i}"), Some(action)));
            self.leaves += 1;
        }
    }
}

/// A complete tree of depth at most 4 and branching at most 3 with at most
/// `max_leaves` primitives (one more is possible when the budget runs out at
/// an empty composite, so callers pass 19 to stay within 20). A few forward
/// precedence pairs between unrelated nodes are added.
pub fn random_tree<R: Rng>(rng: &mut R, fleet: &Fleet, max_leaves: usize) -> TaskTree {
    let mut gen = Gen {
        rng,
        fleet,
        tree: TaskTree::new("mission"),
        leaves: 0,
        max_leaves,
    };
    let root = gen.tree.root.clone();
    gen.expand(&root, 0, None);
    let mut tree = gen.tree;
    let rng = gen.rng;

    let order = tree.preorder();
    let parents = tree.parents();
    let ancestor = |a: &NodeId, d: &NodeId| {
        let mut cur = d;
        while let Some(p) = parents.get(cur) {
            if p == a {
                return true;
            }
            cur = p;
        }
        false
    };
    for _ in 0..rng.random_range(0..=3) {
        let i = rng.random_range(1..order.len());
        let j = rng.random_range(1..order.len());
        let (a, b) = (&order[i.min(j)], &order[i.max(j)]);
        if a != b && !ancestor(a, b) {
            tree.add_precedence(a.clone(), b.clone());
        }
    }
    tree
}

pub fn primitive_count(tree: &TaskTree) -> usize {
    tree.nodes.values().filter(|n| n.kind == NodeKind::Primitive).count()
}

/// A random builder call that is valid more often than not.
pub fn random_call<R: Rng>(rng: &mut R, tree: &TaskTree) -> BuilderCall {
    let names: Vec<String> = tree.nodes.values().map(|n| n.name.clone()).collect();
    let fresh = |rng: &mut R| -> String {
        match rng.random_range(0..10) {
            0 => String::new(),
            1 => names.choose(rng).unwrap().clone(),
            2 => names.choose(rng).unwrap().to_uppercase(),
            _ => format!("Task {}", rng.random_range(0..40)),
        }
    };
    let parent = |rng: &mut R| -> String {
        if rng.random_bool(0.1) {
            "no such node".to_string()
        } else {
            names.choose(rng).unwrap().clone()
        }
    };
    let constraint = |rng: &mut R| if rng.random_bool(0.5) { Constraint::And } else { Constraint::Xor };
    match rng.random_range(0..10) {
        0..=2 => BuilderCall::CreateAndAddSubtask {
            parent: parent(rng),
            is_primitive: rng.random_bool(0.2),
            task_name: fresh(rng),
            constraint: constraint(rng),
        },
        3..=5 => {
            let n = rng.random_range(0..=3);
            let task_names: Vec<String> = (0..n).map(|_| fresh(rng)).collect();
            let flags = n + usize::from(rng.random_bool(0.1));
            let mut pool = task_names.clone();
            pool.extend(names.iter().cloned());
            pool.push("nowhere".into());
            let pairs = (0..rng.random_range(0..=2))
                .map(|_| PrecedencePair::new(pool.choose(rng).unwrap(), pool.choose(rng).unwrap()))
                .collect();
            BuilderCall::AddMultiSubtasks {
                parent: parent(rng),
                is_primitive: (0..flags).map(|_| rng.random_bool(0.15)).collect(),
                task_names,
                constraint: constraint(rng),
                pairs,
            }
        }
        6..=8 => {
            const ROUTINES: [&str; 7] = [
                "SearchTree",
                "FollowTree",
                "ReachTree",
                "SearchAndFollowTree",
                "TransportTree",
                "ReachAndTransportTree",
                "FlyTree",
            ];
            let n = rng.random_range(1..=2);
            let tree_names: Vec<String> = (0..n).map(|_| ROUTINES.choose(rng).unwrap().to_string()).collect();
            let tree_arguments = (0..n + usize::from(rng.random_bool(0.1)))
                .map(|_| {
                    let k = rng.random_range(0..=2);
                    (0..k).map(|_| ["Child", "Mom", "cat", ""].choose(rng).unwrap().to_string()).collect()
                })
                .collect();
            let pairs = if rng.random_bool(0.2) {
                vec![PrecedencePair::new(names.choose(rng).unwrap(), names.choose(rng).unwrap())]
            } else {
                Vec::new()
            };
            BuilderCall::AttachMultiSubtrees {
                parent: parent(rng),
                tree_names,
                tree_arguments,
                constraint: constraint(rng),
                pairs,
            }
        }
        _ => {
            if rng.random_bool(0.5) {
                BuilderCall::PlotTree
            } else {
                BuilderCall::PrintTree
            }
        }
    }
}

/// Node id to name.
pub fn labels(tree: &TaskTree) -> BTreeMap<String, String> {
    tree.nodes.iter().map(|(id, n)| (id.0.clone(), n.name.clone())).collect()
}
